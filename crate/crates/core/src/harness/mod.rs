//! Experiment plumbing: TOML configs, seeded runs with CSV/JSONL logs, the
//! ablation matrix and SVG learning curves.

mod config;
mod matrix;
mod plot;
mod run;

pub use config::{parse_config, BonusSpec, ExperimentConfig, MemberSpec, Preset};
pub use matrix::{matrix_candidates, run_matrix, Candidate, Question, SummaryRow, MIXTURES};
pub use plot::{collect_curves, emit_plot, read_log, render_svg, xml_escape, Curve, LogRow};
pub use run::{build_bonus, run_dir, run_experiment, train_seed, SeedRun, CSV_COLUMNS, SCHEMA_VERSION};
