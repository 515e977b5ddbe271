//! Epidemic wave reconstruction from daily mortality records.
//!
//! The crate turns raw daily death counts into excess mortality against a
//! weighted multi-year baseline, splits the excess into waves, calibrates SEIR
//! parameters to each wave by exhaustive grid search, forecasts the next wave
//! as a parameter envelope, and solves the final-size relation for herd
//! immunity levels.
//!
//! The modules mirror those stages:
//!
//! * [`mortality`]: series ingestion, 7-day trailing smoothing, baseline and excess.
//! * [`waves`]: threshold segmentation and per-wave death bookkeeping.
//! * [`epidemic`]: SIR/SEIR vector fields, RK4 integration, observation model.
//! * [`calibration`]: grid search over `(beta, eta, epsilon)` with a profiled scale.
//! * [`forecast`]: central/lower/upper daily-death bands from prior fits.
//! * [`finalsize`]: the final-size equation `R_f + exp(-R0 R_f) = 1`.
//! * [`fixture`]: synthetic datasets for demos and tests.
//!
//! The guide under `book/` walks through each stage; its code listings are
//! compiled and run as doc-tests of this crate.

pub mod calibration;
pub mod epidemic;
mod error;
pub mod finalsize;
pub mod fixture;
pub mod forecast;
mod format;
pub mod mortality;
pub mod waves;

pub use error::{Error, Result};
pub use format::format_significant;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/excess.md")]
    mod excess {}
    #[doc = include_str!("../../../book/src/waves.md")]
    mod waves {}
    #[doc = include_str!("../../../book/src/seir.md")]
    mod seir {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/forecast.md")]
    mod forecast {}
    #[doc = include_str!("../../../book/src/final_size.md")]
    mod final_size {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reference_run.md")]
    mod reference_run {}
}
