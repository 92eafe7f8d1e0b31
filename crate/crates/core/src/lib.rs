//! Finite Markov chain analysis and generalization bounds for learning from
//! Markov-dependent samples.
//!
//! The crate is organised bottom-up: [`chain`] holds the chain itself,
//! [`spectral`] and [`mixing`] compute the constants that enter every bound,
//! [`empirical`] estimates complexities of finite function classes,
//! [`bounds`] and [`deepnet`] evaluate the bounds, [`reduce`] turns
//! higher-order recursions into first-order chains, and [`verify`] checks the
//! inequalities by simulation.

pub mod analysis;
pub mod bounds;
pub mod chain;
pub mod deepnet;
pub mod empirical;
pub mod error;
pub mod mixing;
pub mod reduce;
pub mod rng;
pub mod spectral;
pub mod verify;

pub use analysis::ChainAnalysis;
pub use bounds::{BoundReport, DeltaTerms, MarginLoss, SymmetrizationTerms};
pub use chain::{ChainSpec, StationaryResult, Trajectory};
pub use empirical::{ComplexityEstimate, FunctionClass};
pub use error::{Error, Result};
pub use mixing::{GuardMode, MixingProfile};
pub use spectral::{NormConvention, SpectralReport};
pub use verify::VerifyReport;
