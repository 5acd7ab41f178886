//! Numerical laboratory for exchange fluctuation relations between two
//! correlated quantum systems.

pub mod dynamics;
pub mod error;
pub mod history;
pub mod linalg;
pub mod theorems;
pub mod thermal;

pub use error::{Result, XftError};
