//! Free amalgamation, generic expansions and independence checks for classes
//! of finite multi-sorted structures.

pub mod class;
pub mod cli;
pub mod formula;
pub mod independence;
pub mod limit;
pub mod presentation;
pub mod search;
pub mod sexpr;
pub mod signature;
pub mod structure;
pub mod term;
pub mod text;
