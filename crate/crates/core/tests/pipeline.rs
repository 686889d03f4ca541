use approx::assert_relative_eq;
use thermosig_core::ingest::{BuildOptions, ColumnMap, IngestError, ModeRule};
use thermosig_core::regression::DEFAULT_MODE_FILTER;
use thermosig_core::{
    assemble, build_frames, emit_csv, grid_fit, grid_fit_with_surface, integrate, load_signature,
    objective, parse_csv, simulate, Axis, Basis, GridSpec, HvacMode, Scenario, Spacing, Theta,
};

fn one_day() -> Scenario {
    Scenario {
        duration: 1440,
        ..Scenario::default()
    }
}

fn coarse_grid(cells: usize) -> GridSpec {
    GridSpec {
        c_p: Axis {
            lo: 0.0,
            hi: 1000.0,
            cells,
        },
        alpha: Axis {
            lo: 0.0,
            hi: 10_000.0,
            cells,
        },
        spacing: Spacing::Linear,
        refinement_passes: 2,
    }
}

#[test]
fn emitted_csv_rebuilds_the_truth() {
    let scenario = one_day();
    let run = simulate(&scenario).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dataset.csv");
    emit_csv(&run, &path).unwrap();

    let records = parse_csv(&path, &ColumnMap::default()).unwrap();
    assert_eq!(records, run.records);
    let series = build_frames(
        &records,
        &scenario.constants,
        &ModeRule::default(),
        &BuildOptions::default(),
    )
    .unwrap();

    assert_eq!(series.start, run.truth.start);
    assert_eq!(series.step, run.truth.step);
    assert_eq!(series.len(), run.truth.len());
    for (got, want) in series.frames.iter().zip(&run.truth.frames) {
        assert_eq!(got.mode, want.mode);
        assert_eq!(got.n, want.n);
        assert_relative_eq!(got.t_in, want.t_in, max_relative = 1e-12);
        assert_relative_eq!(got.t_out, want.t_out, max_relative = 1e-12);
        assert_eq!(got.t_water_in, want.t_water_in);
        assert_eq!(got.t_water_out, want.t_water_out);
        assert_eq!(got.v_cool_w, want.v_cool_w);
        assert_eq!(got.e_v, want.e_v);
        match (got.delta, want.delta) {
            (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-10, "{a} vs {b}"),
            (a, b) => assert_eq!(a, b),
        }
    }
    assert_eq!(
        series.frames.iter().filter(|f| f.delta.is_none()).count(),
        1
    );
}

#[test]
fn empty_series_is_too_short_on_reingest() {
    let mut run = simulate(&one_day()).unwrap();
    run.records.clear();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    emit_csv(&run, &path).unwrap();

    let records = parse_csv(&path, &ColumnMap::default()).unwrap();
    assert!(records.is_empty());
    let err = build_frames(
        &records,
        &one_day().constants,
        &ModeRule::default(),
        &BuildOptions::default(),
    );
    assert!(matches!(err, Err(IngestError::TooShort(0))), "{err:?}");
}

#[test]
fn truth_has_zero_objective_on_both_bases() {
    let scenario = one_day();
    let run = simulate(&scenario).unwrap();
    let sys = integrate(assemble(&run.truth, &scenario.constants, DEFAULT_MODE_FILTER).unwrap());
    for basis in [Basis::Raw, Basis::Integrated] {
        let j = objective(&scenario.theta_true, &sys, basis).unwrap();
        assert!(j <= 1e-12, "{basis:?}: {j:e}");
    }
}

#[test]
fn extended_mode_filter_is_still_exact() {
    let scenario = one_day();
    let run = simulate(&scenario).unwrap();
    let modes = [HvacMode::Refrigerator, HvacMode::Mixed];
    let sys = integrate(assemble(&run.truth, &scenario.constants, &modes).unwrap());
    assert!(objective(&scenario.theta_true, &sys, Basis::Integrated).unwrap() <= 1e-12);
}

#[test]
fn noiseless_fit_recovers_grid_point() {
    let scenario = one_day();
    let run = simulate(&scenario).unwrap();
    assert!(run.diagnostics.identifiable);
    let sys = integrate(assemble(&run.truth, &scenario.constants, DEFAULT_MODE_FILTER).unwrap());
    let fit = grid_fit(&sys, &coarse_grid(50), Basis::Integrated).unwrap();
    assert_eq!(fit.theta.c_p, 100.0);
    assert_eq!(fit.theta.alpha, 5000.0);
    assert_relative_eq!(fit.theta.beta_ac, 2000.0, max_relative = 1e-9);
    assert!(fit.relative_error <= 1e-9);
    assert!(fit.used_integration);
    assert!(!fit.at_upper_bound);
    let usable = run
        .truth
        .frames
        .iter()
        .filter(|f| f.mode == HvacMode::Refrigerator && f.delta.is_some())
        .count();
    assert_eq!(fit.mode_frames_used, usable);
}

#[test]
fn fit_is_independent_of_thread_count() {
    let scenario = Scenario {
        noise: thermosig_core::synth::NoiseModel {
            quantization: 0.1,
            std: 0.05,
        },
        ..one_day()
    };
    let run = simulate(&scenario).unwrap();
    let series = build_frames(
        &run.records,
        &scenario.constants,
        &ModeRule::default(),
        &BuildOptions::default(),
    )
    .unwrap();
    let sys = integrate(assemble(&series, &scenario.constants, DEFAULT_MODE_FILTER).unwrap());
    let grid = coarse_grid(30);

    let results: Vec<_> = [1, 3, 8]
        .into_iter()
        .map(|threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| grid_fit_with_surface(&sys, &grid, Basis::Integrated).unwrap())
        })
        .collect();
    for r in &results[1..] {
        assert_eq!(r.0, results[0].0);
        assert_eq!(r.1.len(), results[0].1.len());
        for (a, b) in r.1.iter().zip(&results[0].1) {
            assert_eq!(a.objective.map(f64::to_bits), b.objective.map(f64::to_bits));
            assert_eq!(a.beta_ac.to_bits(), b.beta_ac.to_bits());
        }
    }
}

#[test]
fn signature_of_truth_closes() {
    let scenario = one_day();
    let run = simulate(&scenario).unwrap();
    let sig = load_signature(&run.truth, &scenario.theta_true, &scenario.constants);
    let max_l = sig.l_total.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    for r in sig.residual.iter().flatten() {
        assert!(r.abs() <= 1e-9 * max_l, "{r}");
    }
    let (p, e) = sig.shares().unwrap();
    assert_relative_eq!(p + e, 1.0, max_relative = 1e-12);
    assert_eq!(sig.negative_new_air_frames, 0);
}

#[test]
fn fitted_theta_is_feasible() {
    let run = simulate(&one_day()).unwrap();
    let sys = integrate(assemble(&run.truth, &one_day().constants, DEFAULT_MODE_FILTER).unwrap());
    let fit = grid_fit(&sys, &coarse_grid(10), Basis::Raw).unwrap();
    assert!(fit.theta.is_feasible());
    assert!(fit.relative_error >= 0.0);
    assert_ne!(fit.theta, Theta::new(0.0, 0.0, 0.0));
}
