#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub use error::{Error, Result};

pub mod autodiff;
pub mod dynamics;
pub mod experiments;
pub mod ingest;
pub mod integrator;
pub mod ltcnet;
pub mod objective;
pub mod synth;
pub mod trainer;
