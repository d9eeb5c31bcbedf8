//! Batch analytics for media-framing studies: parse GDELT GKG records into
//! monthly topic-sentiment series, screen them against a public-sentiment
//! series (ADF, Granger, cross-correlation, PCA, VAR, OLS), extract
//! legislation topics with LDA, and link themes to legislative activity,
//! with a pluggable annotation backend and reliability metrics.

pub mod annotate;
pub mod econ;
pub mod gkg;
pub mod legis;
pub mod linalg;
pub mod month;
pub mod multivar;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod series;
pub mod synth;
pub mod textio;
pub mod topics;

pub use gkg::StateCode;
pub use month::{MonthRange, YearMonth};
