//! Over-approximating abstraction of answer set programs.
//!
//! Two transformations are provided — literal omission ([`omit`]) and domain
//! abstraction ([`domain`]) — together with a small grounder/solver used to
//! check that every concrete answer set is covered by an abstract one
//! ([`check`]), and a policy-checking harness ([`policy`]).

pub mod ast;
pub mod check;
pub mod domain;
pub mod error;
pub mod gen;
pub mod ground;
pub mod mapping;
pub mod omit;
pub mod parser;
pub mod policy;
pub mod solve;
pub mod sorts;

pub use ast::*;
pub use error::{Error, Result};
pub use mapping::{refine_mapping, ClassDef, DomainMapping, Refinement, RelCase, SortMapping};
pub use parser::{
    parse_mapping, parse_program, parse_program_in, parse_program_str, print_mapping, print_program, print_rule,
    SourceProgram,
};

/// Resource bounds for grounding and solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of ground rule instances.
    pub max_ground_rules: usize,
    /// Maximum number of search-tree nodes per solver call.
    pub max_nodes: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_ground_rules: 1_000_000, max_nodes: 10_000_000 }
    }
}
