//! Experiment layer: refinement ladders, order estimates, hierarchical
//! state preparation, CSV/SVG output, configs and the command drivers.

pub mod config;
pub mod drivers;
pub mod ladder;
pub mod report;
pub mod stateprep;

pub use config::{parse_levels, LabConfig, MaterialSpec, SCHEMA_VERSION};
pub use ladder::{
    loglog_slope, observed_order, run_ladder, theoretical_order, ConvergenceLadder, LadderPlan,
    OrderEstimate, Rung, SkippedLevel, TheoreticalOrder,
};
pub use report::{
    emit_plot, error_plot, exponent_plot, export_estimates_csv, export_ladder_csv,
    import_ladder_csv, plot_slope, Plot, Series,
};
pub use stateprep::{gram_prefix_sum, stateprep_amplitudes, AxisRange, GramPrefix, SplitOrder};
