pub mod artifact;
pub mod grammar;
pub mod order;
pub mod validate;
