//! Zero-attracting LMS: the adaptive filter, its exact transient moment
//! model, and a seeded Monte Carlo harness to check one against the other.

pub mod error;
pub mod filter;
pub mod gaussmath;
pub mod harness;
pub mod linalg;
pub mod signals;
pub mod theory;

pub use error::{Error, Result};
