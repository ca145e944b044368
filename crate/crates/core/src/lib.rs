//! Satisfiability for the non-normal modal description logics E, M, C and N
//! over ALC, on neighbourhood models.
//!
//! The [`tableau`] handles the full language and [`extraction`] turns its
//! open saturated states into models, which are checked against
//! [`semantics`]. A SAT verdict is always backed by such a model. An UNSAT
//! verdict is exact on constant domains, but can miss varying-domain models
//! that depend on modalised concepts. The
//! [`fragment`] module decides the constant-domain fragment without modalised
//! concepts, and [`oracle`] searches small models exhaustively.

pub mod corpus;
pub mod extraction;
pub mod fragment;
pub mod logic;
pub mod oracle;
pub mod semantics;
pub mod syntax;
pub mod tableau;

pub use logic::{logic_for, LogicRegistry, ModalLogic};
pub use semantics::{FrameClass, NeighbourhoodModel};
pub use syntax::{normalize, parse_formula, Concept, Formula};
pub use tableau::{solve, SolveOptions, SolveResult, Tableau, Verdict};
