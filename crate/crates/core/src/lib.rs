pub mod baselines;
pub mod captioner;
pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod optim;
pub mod scenescape;
pub mod pmte;
pub mod seed;
pub mod synthetic;
pub mod text;
pub mod topics;

pub use error::{Error, Result};
