//! Theta functions of Schottky groups over `Q_p` and its quadratic
//! ramified extensions.

pub mod bounds;
pub mod error;
pub mod fast;
pub mod io;
pub mod localfield;
pub mod naive;
pub mod projline;
pub mod schottky;
pub mod tate;

pub use error::{Error, Result};
