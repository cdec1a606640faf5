//! Monkey processes: Markov processes that, at the end of each run, jump back
//! to their own position at a random past time chosen with a memory kernel.
//!
//! The crate simulates them two ways (literally, and through the time change
//! `X(t) = Z(S(t))`), computes the quenched cumulant `Λ ∘ Λ_Z` and its
//! Legendre transform, and provides the numerical checks in [`verify`].

pub mod error;
pub mod genealogy;
pub mod kernel;
pub mod markov;
pub mod numeric;
pub mod ratefn;
pub mod registry;
pub mod rng;
pub mod runlength;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
pub use genealogy::{Extent, RunSequence};
pub use kernel::{MemoryKernel, Regime};
pub use markov::{MarkovProcess, TimeMode};
pub use ratefn::RateFunction;
pub use runlength::RunLength;
pub use sim::{Environment, Model};
