//! Primal-dual regularized accelerated natural policy gradient for
//! entropy-regularized constrained MDPs, with an exact dynamic-programming
//! oracle for small finite instances.

pub mod asgd;
pub mod cmdp;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lp;
pub mod oracle;
pub mod outer;
pub mod policy;
pub mod rng;
pub mod sampler;
pub mod verify;

pub use error::{Error, Result};
