//! Speaker-verification scoring backend.
//!
//! The crate consumes speaker embeddings and AAM-softmax prototype matrices
//! produced by an external extractor and provides:
//!
//! - [`hpm`]: hard prototype mining batch plans (broad and domain-balanced);
//! - [`aam`]: the AAM-softmax loss with analytic gradients;
//! - [`lid`]: a Gaussian-backend Farsi/English language detector;
//! - [`snorm`]: cosine scoring with adaptive s-norm and a language-dependent offset;
//! - [`calibration`], [`scores`] and [`metrics`]: calibration, fusion, EER and MinDCF;
//! - [`synth`]: deterministic synthetic corpora for end-to-end runs;
//! - [`formats`] and [`cli`]: file formats and the `svb` command line.

pub mod aam;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod formats;
pub mod hpm;
pub mod lid;
pub mod math;
pub mod metrics;
pub mod prototypes;
pub mod scores;
pub mod snorm;
pub mod synth;

pub use error::{Error, Result};
pub use math::{Domain, Embedding, Language};
