//! Experiment harness: benchmark presets, seeded parameter sweeps with
//! replication, and plot-ready tabular output.
//!
//! A sweep is fully determined by its [`ExperimentSpec`]: instances are
//! generated from seeds derived per (point, replicate), engines run in
//! known-parameters mode (BP, MF, the spectral methods) or EM mode, and
//! every row of the result is reproducible byte for byte except for the
//! wall-time column.

pub mod harness;

pub use harness::{
    emit_summary, emit_tsv, run_sweep, EngineSel, ExperimentSpec, Preset, SweepAxis,
    SweepResult, SweepRow,
};
