//! Differentiable simulation of two balls with frictionless elastic contacts
//! and time-of-impact gradient corrections, plus gradient-descent optimal
//! control on top of it.

pub mod adjoint;
pub mod error;
pub mod experiment;
pub mod objective;
pub mod optimize;
pub mod sim;
pub mod vec2;

pub use error::{Result, SimError};
pub use vec2::Vec2;
