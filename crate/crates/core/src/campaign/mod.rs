//! Measurement records, configuration statistics and synthetic campaigns.

pub mod records;
pub mod summary;
pub mod synthetic;

pub use records::{
    filter_survey, ingest_records, write_records, Ingested, Material, MeasurementRecord, FILTER_SURVEY_CSV,
    RECORD_COLUMNS,
};
pub use summary::{
    compare_configurations, correlate_t1, find_reduction, group_label, rate_ratio, rescale_rate, round_sig,
    summarize_configurations, time_correct_records, Averaging, ConfigSummary, CorrectedRecord, Grouping,
    Reduction, Summaries, T1Correlation, T1Pair, FOAM_PLUS_FILTER, NO_FILTER,
};
pub use synthetic::{
    run_synthetic_campaign, CampaignManifest, CampaignPhysics, CampaignPlan, CampaignResult, CampaignSpec,
    ClosureEntry, ConfigurationPoint, PlanFit, PointResult,
};
