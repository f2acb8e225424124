//! Pattern-match safety checking by inference of datatype refinements.
//!
//! Programs are elaborated with ordinary types, then every definition is
//! summarised by a constrained type scheme whose constraints are guarded
//! constructor-set inclusions. A definition is safe when its constraints are
//! satisfiable.

pub mod bench;
pub mod constraint;
pub mod eval;
pub mod gen;
pub mod infer;
pub mod refinement;
pub mod solver;
pub mod subtype;
pub mod types;
pub mod program;
pub mod surface;
