//! Simulation of non-unitary quantum operations through unitary
//! decompositions: block encodings, QSP/QSVT, two- and four-unitary
//! decompositions of contractions, and shot-level estimators.

pub mod channels;
pub mod encodings;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod numerics;
pub mod qsp;
pub mod tud;

pub use error::{Error, Result};
