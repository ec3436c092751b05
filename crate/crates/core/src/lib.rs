//! Offline divergence-regularized policy learning for finite contextual and
//! dueling bandits.

pub mod algorithms;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod harness;
pub mod instances;
pub mod io;
pub mod model;
pub mod rng;
pub mod solvers;
pub mod table;
pub mod uncertainty;

pub use error::{Error, Result};
pub use model::{
    BanditInstance, BanditSample, Dataset, Divergence, FDivergence, FunctionClass, Noise, PreferenceDataset,
    PreferenceSample, Regularizer,
};
pub use rng::RngSeed;
pub use table::{Policy, Table};
