//! One firing and one quiet snippet per automated check.

use std::sync::Arc;

use truthscan::rules::{CheckId, Finding, RuleEngine, Severity};
use truthscan::syntax::{parse_source, ParseMode, SourceFile};

fn run(path: &str, src: &str) -> Vec<Finding> {
    let model = parse_source(Arc::new(SourceFile::new(path, src))).expect("parse");
    RuleEngine::default().run_all_checks(&model)
}

fn hits(path: &str, src: &str, check: CheckId) -> Vec<(usize, Severity)> {
    run(path, src).into_iter().filter(|f| f.check == check).map(|f| (f.line, f.severity)).collect()
}

#[test]
fn c01_success_return_in_handler() {
    let src = "def f():\n    try:\n        g()\n    except ValueError:\n        return {\"status\": \"ok\"}\n";
    assert_eq!(hits("a.py", src, CheckId::C01), vec![(5, Severity::High)]);
    let js = "function f() {\n  try { g(); } catch (e) {\n    return { success: true };\n  }\n}\n";
    assert_eq!(hits("a.js", js, CheckId::C01), vec![(3, Severity::High)]);
    let quiet = "def f():\n    try:\n        g()\n    except ValueError:\n        return {\"status\": \"error\"}\n";
    assert!(hits("a.py", quiet, CheckId::C01).is_empty());
}

#[test]
fn c02_audit_call_behind_swallowing_handler() {
    let src = "def f():\n    try:\n        audit.record_event('x')\n    except Exception:\n        pass\n";
    assert_eq!(hits("a.py", src, CheckId::C02), vec![(3, Severity::High)]);
    let quiet = "def f():\n    try:\n        audit.record_event('x')\n    except Exception:\n        raise\n";
    assert!(hits("a.py", quiet, CheckId::C02).is_empty());
}

#[test]
fn c03_breadth_and_body_set_severity() {
    let src = "try:\n    a()\nexcept Exception:\n    pass\ntry:\n    b()\nexcept:\n    log.error('x')\ntry:\n    c()\nexcept ValueError:\n    pass\n";
    assert_eq!(hits("a.py", src, CheckId::C03), vec![(3, Severity::High), (7, Severity::Medium)]);
    let js = "try { a(); } catch (e) {}\ntry { b(); } catch (e) { console.error(e); }\ntry { c(); } catch (e) { throw e; }\n";
    assert_eq!(hits("a.js", js, CheckId::C03), vec![(1, Severity::High), (2, Severity::Medium)]);
}

#[test]
fn c04_defaults_are_low() {
    let src = "x = cfg.get('k', 3)\ny = value or 'dev'\n";
    assert_eq!(hits("a.py", src, CheckId::C04), vec![(1, Severity::Low), (2, Severity::Low)]);
    let ts = "const y: string = x ?? 'none';\n";
    assert_eq!(hits("a.ts", ts, CheckId::C04), vec![(1, Severity::Low)]);
    assert!(hits("a.py", "x = cfg['k']\n", CheckId::C04).is_empty());
}

#[test]
fn c05_bypass_flag_skips_guard() {
    let src = "def f(req):\n    if settings.skip_validation:\n        return handle(req)\n    verify(req)\n    return handle(req)\n";
    assert_eq!(hits("a.py", src, CheckId::C05), vec![(2, Severity::High)]);
    let quiet = "def f(req):\n    if req.empty:\n        return None\n    verify(req)\n";
    assert!(hits("a.py", quiet, CheckId::C05).is_empty());
}

#[test]
fn c06_null_on_failure_path() {
    let src = "def f():\n    try:\n        return load()\n    except ValueError:\n        return None\n";
    assert_eq!(hits("a.py", src, CheckId::C06), vec![(5, Severity::Medium)]);
    let quiet = "def f():\n    return load()\n";
    assert!(hits("a.py", quiet, CheckId::C06).is_empty());
}

#[test]
fn c08_unsupervised_spawn() {
    let src = "async def f():\n    asyncio.create_task(work())\n";
    assert_eq!(hits("a.py", src, CheckId::C08), vec![(2, Severity::Medium)]);
    let quiet = "async def f():\n    t = asyncio.create_task(work())\n    await t\n";
    assert!(hits("a.py", quiet, CheckId::C08).is_empty());
}

#[test]
fn c09_environment_branch_skips_guard() {
    let src = "def f(req):\n    if os.environ.get('ENV') == 'dev':\n        return handle(req)\n    authorize(req)\n    return handle(req)\n";
    assert_eq!(hits("a.py", src, CheckId::C09), vec![(2, Severity::High)]);
}

#[test]
fn c10_startup_swallow() {
    let src = "def init_app():\n    try:\n        connect()\n    except Exception:\n        pass\n";
    assert_eq!(hits("a.py", src, CheckId::C10), vec![(4, Severity::High)]);
    let quiet = "def handle():\n    try:\n        connect()\n    except Exception:\n        pass\n";
    assert!(hits("a.py", quiet, CheckId::C10).is_empty());
}

#[test]
fn c11_unseeded_randomness() {
    let src = "import random\nx = random.random()\n";
    assert_eq!(hits("a.py", src, CheckId::C11), vec![(2, Severity::High)]);
    let seeded = "import random\nrandom.seed(1)\nx = random.random()\n";
    assert!(hits("a.py", seeded, CheckId::C11).is_empty());
    let temp = "client.create(model=m, temperature=0.7)\n";
    assert_eq!(hits("a.py", temp, CheckId::C11), vec![(1, Severity::High)]);
}

#[test]
fn c13_fallback_without_posture() {
    let src = "def f():\n    try:\n        return score()\n    except ValueError:\n        return {}\n";
    assert_eq!(hits("a.py", src, CheckId::C13), vec![(5, Severity::Medium)]);
    let quiet = "def f():\n    try:\n        return score()\n    except ValueError:\n        return {\"degraded\": True}\n";
    assert!(hits("a.py", quiet, CheckId::C13).is_empty());
}

#[test]
fn c14_test_asymmetry_levels() {
    let happy = "def test_a():\n    assert f()\ndef test_b():\n    assert g()\ndef test_c():\n    assert h()\n";
    assert_eq!(hits("tests/test_x.py", happy, CheckId::C14), vec![(1, Severity::High)]);
    let scarce = "def test_a():\n    assert f()\n";
    assert_eq!(hits("tests/test_x.py", scarce, CheckId::C14), vec![(1, Severity::Medium)]);
    let balanced = "def test_a():\n    assert f()\ndef test_b():\n    with pytest.raises(ValueError):\n        g()\n";
    assert!(hits("tests/test_x.py", balanced, CheckId::C14).is_empty());
    assert!(hits("src/x.py", happy, CheckId::C14).is_empty());
}

#[test]
fn c15_retry_without_idempotency() {
    let src = "@retry(stop=3)\ndef f():\n    requests.post(url)\n";
    assert_eq!(hits("a.py", src, CheckId::C15), vec![(3, Severity::High)]);
    let keyed = "@retry(stop=3)\ndef f(idempotency_key):\n    requests.post(url, key=idempotency_key)\n";
    assert!(hits("a.py", keyed, CheckId::C15).is_empty());
}

#[test]
fn human_review_checks_never_fire() {
    let src = "def f():\n    try:\n        audit.record_event('x')\n    except Exception:\n        return True\n";
    let all = run("a.py", src);
    assert!(!all.is_empty());
    assert!(all.iter().all(|f| f.check.is_automated()));
}

#[test]
fn broken_file_uses_lexical_subset() {
    let src = "def f(:\n    try:\n        g()\n    except:\n        pass\n";
    let model = parse_source(Arc::new(SourceFile::new("b.py", src))).unwrap();
    assert_eq!(model.mode, ParseMode::LexicalFallback);
    let found = RuleEngine::default().run_all_checks(&model);
    assert!(found.iter().any(|f| f.check == CheckId::C03 && f.line == 4));
    assert!(found.iter().all(|f| f.check.runs_lexically()));
}

#[test]
fn identical_blocks_are_counted_individually() {
    let block = "try:\n    work()\nexcept Exception:\n    pass\n";
    let src = block.repeat(5);
    let lines: Vec<usize> = hits("a.py", &src, CheckId::C03).into_iter().map(|(l, _)| l).collect();
    assert_eq!(lines, vec![3, 7, 11, 15, 19]);
}
