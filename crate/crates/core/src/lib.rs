pub mod autoenc;
pub mod error;
pub mod generative;
pub mod nn;
pub mod numkit;
pub mod qcontrol;
pub mod qsim;
pub mod rl;
pub mod statest;

pub use error::{Error, Result};
