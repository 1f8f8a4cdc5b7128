def process(data):
    result = persist(data)   
    # raises on failure
    if not result:
        raise PersistenceError("persist returned empty")
    return {"status": "ok"}
