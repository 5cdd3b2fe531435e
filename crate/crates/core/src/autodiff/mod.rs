//! Scalar reverse-mode differentiation.
//!
//! ```
//! use physid::autodiff::Tape;
//!
//! let tape = Tape::new();
//! let x = tape.var(3.0);
//! let y = x * x;
//! assert_eq!(tape.backward(y).wrt(x), 6.0);
//! ```

mod gradcheck;
mod real;
mod suite;
mod tape;

pub use gradcheck::{
    grad_check, grad_check_with, gradient, numeric_gradient, numeric_gradient_with, relative_error,
    CoordCheck, GradCheckReport, ScalarFn, Stencil,
};
pub use real::Real;
pub use suite::{primitive_suite, PrimitiveCheck};
pub use tape::{Gradients, Prim, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdError {
    #[error("{prim:?} is undefined at {value}")]
    Domain { prim: Prim, value: f64 },
    #[error("{prim:?} expects {expected} inputs, got {got}")]
    Arity {
        prim: Prim,
        expected: usize,
        got: usize,
    },
    #[error("input recorded on a different tape")]
    ForeignTape,
}
