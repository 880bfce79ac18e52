pub mod cli;
pub mod error;
pub mod fixtures;
pub mod hierarchy;
pub mod io;
pub mod linalg;
pub mod solver;
pub mod refit;
pub mod simgen;
pub mod subspaces;
pub mod tuning;
