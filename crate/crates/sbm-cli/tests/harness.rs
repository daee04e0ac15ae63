//! Sweep harness determinism and output format checks.

use sbm_cli::harness::{
    emit_summary, emit_tsv, run_sweep, EmSweepOptions, EngineSel, ExperimentSpec, Preset,
    SweepAxis, SweepResult, SweepRow,
};
use sbm_core::engine::EstepOptions;
use sbm_core::spectral::SpectralOptions;

fn mini_spec() -> ExperimentSpec {
    ExperimentSpec {
        preset: Preset::TwoGroups,
        n: 600,
        axis: SweepAxis::Epsilon,
        start: 0.1,
        stop: 0.3,
        step: 0.1,
        fixed_epsilon: 0.3,
        fixed_mean_degree: 6.0,
        engines: vec![EngineSel::Bp, EngineSel::Mf],
        replicates: 3,
        base_seed: 11,
        estep: EstepOptions::default(),
        spectral: SpectralOptions::default(),
        em: EmSweepOptions::default(),
        workers: 2,
    }
}

/// Everything except the wall-time column, which is inherently noisy.
fn strip_wall(tsv: &str) -> String {
    tsv.lines()
        .map(|line| {
            let cols: Vec<&str> = line.split('\t').collect();
            let mut kept: Vec<&str> = Vec::new();
            for (i, c) in cols.iter().enumerate() {
                if i != 9 {
                    kept.push(c);
                }
            }
            kept.join("\t")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn sweep_is_deterministic_modulo_wall_time() {
    let spec = mini_spec();
    let a = run_sweep(&spec).unwrap();
    let b = run_sweep(&spec).unwrap();
    assert_eq!(strip_wall(&emit_tsv(&a)), strip_wall(&emit_tsv(&b)));
}

#[test]
fn rows_are_ordered_and_complete() {
    let spec = mini_spec();
    let result = run_sweep(&spec).unwrap();
    assert_eq!(result.rows.len(), 3 * 2 * 3); // points × engines × replicates
    let mut last = (f64::NEG_INFINITY, 0usize, 0usize);
    for row in &result.rows {
        let engine_idx = spec.engines.iter().position(|e| *e == row.engine).unwrap();
        let key = (row.axis_value, engine_idx, row.replicate);
        assert!(
            key.0 > last.0
                || (key.0 == last.0 && (key.1, key.2) > (last.1, last.2)),
            "rows out of order at {key:?}"
        );
        last = key;
    }
}

#[test]
fn removing_an_axis_point_preserves_other_rows() {
    let full = run_sweep(&mini_spec()).unwrap();
    let mut reduced_spec = mini_spec();
    reduced_spec.stop = 0.2; // drop the last point
    let reduced = run_sweep(&reduced_spec).unwrap();
    let full_rows: Vec<String> = emit_tsv(&full)
        .lines()
        .filter(|l| !l.starts_with("3.0"))
        .map(|l| strip_wall(l))
        .collect();
    let reduced_rows: Vec<String> = emit_tsv(&reduced)
        .lines()
        .map(|l| strip_wall(l))
        .collect();
    assert_eq!(full_rows, reduced_rows);
}

#[test]
fn tsv_single_row_is_two_lines() {
    let result = SweepResult {
        rows: vec![SweepRow {
            axis_value: 0.4,
            engine: EngineSel::Bp,
            replicate: 0,
            seed: 1,
            overlap: 0.5,
            confidence: 0.5,
            free_energy: -1.0,
            iterations: 10,
            converged: true,
            wall_seconds: 0.1,
            note: String::new(),
        }],
    };
    let tsv = emit_tsv(&result);
    assert_eq!(tsv.trim_end().lines().count(), 2);
    assert!(tsv.starts_with("axis\tengine\treplicate"));
}

#[test]
fn summary_reports_mean_and_standard_error() {
    let mk = |replicate: usize, overlap: f64| SweepRow {
        axis_value: 0.4,
        engine: EngineSel::Bp,
        replicate,
        seed: replicate as u64,
        overlap,
        confidence: overlap,
        free_energy: -1.0,
        iterations: 5,
        converged: true,
        wall_seconds: 0.0,
        note: String::new(),
    };
    let result = SweepResult {
        rows: vec![mk(0, 0.2), mk(1, 0.4)],
    };
    let summary = emit_summary(&result);
    // mean 0.3 with standard error 0.1
    let data_line = summary.lines().nth(1).unwrap();
    let cols: Vec<&str> = data_line.split('\t').collect();
    assert_eq!(cols[3], "3.00000e-1");
    assert_eq!(cols[4], "1.00000e-1");
    assert_eq!(cols[2], "2");
}

#[test]
fn per_row_failures_do_not_abort() {
    // mean degree too large for the node count at the first point:
    // generation fails, the row records the failure, other rows survive
    let mut spec = mini_spec();
    spec.n = 30;
    spec.fixed_mean_degree = 20.0; // c_in = 2c/(1+eps) > 30 at small eps
    spec.start = 0.05;
    spec.stop = 0.85;
    spec.step = 0.8;
    spec.replicates = 1;
    let result = run_sweep(&spec).unwrap();
    assert_eq!(result.rows.len(), 4);
    let failed: Vec<&SweepRow> = result.rows.iter().filter(|r| !r.note.is_empty()).collect();
    let ok: Vec<&SweepRow> = result.rows.iter().filter(|r| r.note.is_empty()).collect();
    assert!(!failed.is_empty(), "expected the degenerate point to fail");
    assert!(!ok.is_empty(), "expected the sane point to succeed");
    for row in failed {
        assert!(!row.converged);
        assert!(row.overlap.is_nan());
    }
}

#[test]
fn golden_miniature_sweep_is_frozen() {
    let spec = ExperimentSpec {
        preset: Preset::TwoGroups,
        n: 400,
        axis: SweepAxis::Epsilon,
        start: 0.2,
        stop: 0.4,
        step: 0.2,
        fixed_epsilon: 0.3,
        fixed_mean_degree: 5.0,
        engines: vec![EngineSel::Bp],
        replicates: 2,
        base_seed: 3,
        estep: EstepOptions::default(),
        spectral: SpectralOptions::default(),
        em: EmSweepOptions::default(),
        workers: 1,
    };
    let got = strip_wall(&emit_tsv(&run_sweep(&spec).unwrap()));
    let golden = strip_wall(include_str!("data/golden_mini_sweep.tsv"));
    assert_eq!(got.trim_end(), golden.trim_end());
}
