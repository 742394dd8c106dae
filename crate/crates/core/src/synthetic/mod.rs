//! Synthetic multimodal cohorts with known ground truth.

pub mod cohort;
pub mod timeseries;

pub use cohort::{
    generate_cohort, CohortSpec, LatentRecord, SampleCount, SourceGen, SyntheticCohort,
};
pub use timeseries::{generate_raw_timeseries, RawCohort, TimeseriesSpec};
