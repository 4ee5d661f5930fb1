//! Dataset ingestion, the experiment protocol and report emission.

pub mod libsvm;
pub mod protocol;
pub mod report;

pub use libsvm::{parse_libsvm, parse_libsvm_str, parse_libsvm_with, write_libsvm, LabelMap};
pub use protocol::{
    run_experiment, run_experiment_on, run_trial, split_protocol, split_sizes, ExperimentConfig, ExperimentOutput,
    KPolicy, Method, Split, SvtOptions,
};
pub use report::{
    emit_report, read_trials_csv, write_margins_csv, write_report, write_trials_csv, ExperimentRecord, MeanInterval,
    ReportFormat, SummaryReport, TrialReport, CSV_HEADER,
};
