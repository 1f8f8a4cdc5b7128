pub mod corpus;
pub mod lexicon;
pub mod llm;
pub mod report;
pub mod research;
pub mod rules;
pub mod scan;
pub mod syntax;
