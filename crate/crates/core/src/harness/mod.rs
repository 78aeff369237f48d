//! Seeded experiment campaigns, result tables, artifacts and figure data.

mod artifacts;
mod campaign;
mod figures;
mod spec;

pub use artifacts::{audit_artifacts, mask_path, recon_path, truth_path, ArtifactStore, AuditEntry, AuditReport};
pub use campaign::{
    find_cell, read_results_csv, reconstruct, run_campaign, run_table1, run_table2, save_results_csv,
    summarize, truth_field, write_results_csv, write_summary_csv, write_table1_layout,
    write_table2_layout, CampaignResult, CellFailure, ResultRow, RunOptions, SummaryCell,
    RESULTS_HEADER,
};
pub use figures::{
    write_field_images, write_pgm, write_spectrum_csv, write_trace_csv, FigureKind, TRACE_RANGE,
};
pub use spec::{field_seed, mask_seed, mix_seed, splitmix64, ExperimentSpec, MethodKind, SamplePlan};
