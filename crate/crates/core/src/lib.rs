pub mod math;
pub mod sim;
pub mod refmotion;
pub mod env;
pub mod tasks;
pub mod learn;
pub mod eval;
