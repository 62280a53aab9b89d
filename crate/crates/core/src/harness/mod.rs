//! Scenario configuration, trials, sweeps and CSV output.

mod config;
mod figures;
mod sweep;
mod trial;

pub use config::{PowerMode, ScenarioConfig, SeedSpec, SweepAxes};
pub use figures::{
    fig3_rows, fig4_rows, fig4_variants, fig5_rows, fig5_variants, write_figures, Fig3Row, Fig4Row, FIG3_COLUMNS,
    FIG3_FILE, FIG4_COLUMNS, FIG4_FILE, FIG5_FILE,
};
pub use sweep::{
    cell_seed, emit_csv, emit_summary_csv, percentile, read_csv, run_sweep, run_sweep_variants, variants,
    CellSummary, SweepResult, SweepRow, SUMMARY_COLUMNS, SWEEP_COLUMNS,
};
pub use trial::{finish_trial, harvest_rates, run_allocation, run_trial, Allocation, TrialResult, Variant};
