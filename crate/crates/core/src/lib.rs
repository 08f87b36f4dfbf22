//! Regularized Newton-type polynomial interpolation and polynomial solvers for
//! linear differential equations.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod collocate;
mod dd;
pub mod error;
pub mod expr;
pub mod hermite;
pub mod index;
pub mod jet;
pub mod multivariate;
pub mod operator;
pub mod poly;
pub mod synthesis;
pub mod verify;
pub mod wkb;

pub use error::{Error, Result};
pub use expr::{parse, Expr};
pub use index::MultiIndex;
pub use jet::{JetSource, JetTable, JetValue};
pub use operator::DifferentialOperator;
pub use poly::{NewtonPolynomial, Precision, ProductTerm};
