pub mod dsl;
pub mod guards;
pub mod interpreter;
pub mod label;
pub mod pipeline;
pub mod policy;
pub mod quarantine;
pub mod toolsim;
pub mod value;
