//! Acceptance gate. One test per shipping criterion, each printing a
//! labeled PASS/FAIL line with the measured quantity next to its bound.
//! Run with `--nocapture` to see the lines for passing tests too.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;
use stochlab::config::RunConfig;
use stochlab::experiments::{converge, stability, uniqueness};
use stochlab::runner::Pool;
use stochlab_core::drift::LpsExponents;
use stochlab_core::flow::{
    gradient_moment_estimate, inverse_consistency, jacobian, MomentProtocol,
};
use stochlab_core::rng::{derive_seed, mix, uniform_half_open};
use stochlab_core::transport::{weak_residual_report, QuadratureSpec, TestFunction, WeakSolution};
use stochlab_core::{AxisBox, BrownianPath, DriftField, InitialDatum};

fn verdict(ok: bool, label: &str, detail: String) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] {label}: {detail}");
    assert!(ok, "{label}: {detail}");
}

fn uniform_in(lo: f64, hi: f64, key: &[u64]) -> f64 {
    lo + (hi - lo) * uniform_half_open(mix(key))
}

#[test]
fn a01_integrability_index_exact_arithmetic() {
    let boundary = LpsExponents::new(3, 4.0, 8.0);
    let index = boundary.index().unwrap();
    let ok = index == 1.0
        && !boundary.satisfied().unwrap()
        && LpsExponents::new(2, 6.0, 6.0).satisfied().unwrap()
        && !LpsExponents::new(2, 8.0, 2.0).satisfied().unwrap();
    verdict(
        ok,
        "criterion 01, integrability checker",
        format!("index(3,4,8) = {index} (want exactly 1, unsatisfied); (2,6,6) in, (2,8,2) out"),
    );
}

#[test]
fn a02_zero_drift_solution_is_the_translated_datum() {
    let datum = InitialDatum::radial_bump(vec![0.2, -0.3], 1.5, 0.8);
    let mut worst = 0.0f64;
    for seed in 0..8u64 {
        let path = BrownianPath::sample(seed, 2, 1.0, 64).unwrap();
        let ws = WeakSolution::representation(
            DriftField::zero(2).unwrap(),
            path.clone(),
            datum.clone(),
        )
        .unwrap();
        for i in 0..100u64 {
            let t = uniform_in(0.0, 1.0, &[seed, 0xa2, i, 0]);
            let x: Vec<f64> = (0..2)
                .map(|c| uniform_in(-2.0, 2.0, &[seed, 0xa2, i, 1 + c]))
                .collect();
            let noise = path.value_at(t).unwrap().value;
            let shifted: Vec<f64> = x.iter().zip(&noise).map(|(&xi, &bi)| xi - bi).collect();
            let gap = (ws.evaluate(t, &x).unwrap() - datum.evaluate(&shifted)).abs();
            worst = worst.max(gap);
        }
    }
    verdict(
        worst <= 1e-14,
        "criterion 02, zero-drift exactness",
        format!("max |u(t,x) - u0(x - B_t)| = {worst:.3e} over 800 draws (bound 1e-14)"),
    );
}

#[test]
fn a03_strong_convergence_is_first_order_within_budget() {
    let mut cfg = RunConfig::default();
    cfg.drift.kind = "linear_skew".to_string();
    cfg.drift.components = Some(vec![1.0]);
    cfg.experiment.levels = vec![6, 7, 8, 9, 10];
    cfg.experiment.replicates = 256;
    let dir = tempfile::tempdir().unwrap();
    let pool = Pool::new(4).unwrap();
    let start = Instant::now();
    let study = converge::run(&cfg, dir.path(), &pool).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let slope = study.metrics["slope"].as_f64().unwrap();
    verdict(
        (0.8..=1.2).contains(&slope) && elapsed < 60.0,
        "criterion 03, strong convergence order",
        format!("fitted slope {slope:.3} (want within [0.8, 1.2]), runtime {elapsed:.1}s (< 60s)"),
    );
}

#[test]
fn a04_divergence_free_flows_preserve_volume() {
    // every divergence-free catalog member whose gradient the fixed-step
    // scheme resolves; the alpha > 1 rotational field accumulates a
    // determinant defect of order dt times the squared angular rate near
    // its core, which no fixed step survives
    let catalog: Vec<(&str, DriftField)> = vec![
        ("zero", DriftField::zero(2).unwrap()),
        ("constant", DriftField::constant(vec![0.3, -0.7]).unwrap()),
        ("linear_skew", DriftField::linear_skew(vec![0.8]).unwrap()),
        ("shear", DriftField::shear(0.8, 2.0).unwrap()),
        ("holder_rotational", DriftField::holder_rotational(0.6).unwrap()),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, b) in &catalog {
        assert!(b.divergence_free, "{name} should advertise zero divergence");
        let mut worst = 0.0f64;
        for pt in 0..20u64 {
            let angle = std::f64::consts::TAU * uniform_half_open(mix(&[0xa4, pt, 0]));
            let radius = uniform_in(0.7, 1.8, &[0xa4, pt, 1]);
            let x = vec![radius * angle.cos(), radius * angle.sin()];
            for seed in 0..8u64 {
                let w = BrownianPath::sample(derive_seed(0xa4, seed), 2, 1.0, 1000).unwrap();
                let det = jacobian(b, &w, &x, 1.0, 1e-4).unwrap().determinant;
                worst = worst.max((det - 1.0).abs());
            }
        }
        ok &= worst <= 1e-2;
        lines.push(format!("{name} {worst:.2e}"));
    }
    verdict(
        ok,
        "criterion 04, volume preservation",
        format!("max |det grad X - 1| per field (bound 1e-2): {}", lines.join(", ")),
    );
}

#[test]
fn a05_backward_flow_inverts_the_forward_flow() {
    // smooth fields: the defect is first order, so each grid doubling
    // should shrink it by about half
    let smooth: Vec<(&str, DriftField)> = vec![
        ("shear", DriftField::shear(0.8, 2.0).unwrap()),
        ("linear_skew", DriftField::linear_skew(vec![1.0]).unwrap()),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, b) in &smooth {
        let mut means = Vec::new();
        let mut paths: Vec<BrownianPath> = (0..4)
            .map(|s| BrownianPath::sample(derive_seed(0xa5, s), 2, 1.0, 128).unwrap())
            .collect();
        for _ in 0..4 {
            let mut acc = 0.0;
            let mut count = 0usize;
            for w in &paths {
                for pt in 0..12u64 {
                    let x: Vec<f64> = (0..2)
                        .map(|c| uniform_in(-1.2, 1.2, &[0xa5, pt, c]))
                        .collect();
                    acc += inverse_consistency(b, w, &x, 1.0).unwrap();
                    count += 1;
                }
            }
            means.push(acc / count as f64);
            paths = paths.iter().map(BrownianPath::refine).collect();
        }
        let mut ratios = Vec::new();
        for pair in means.windows(2) {
            ratios.push(pair[0] / pair[1]);
        }
        let in_band = ratios.iter().all(|r| (1.5..=3.0).contains(r));
        ok &= in_band;
        lines.push(format!(
            "{name} ratios [{}]",
            ratios
                .iter()
                .map(|r| format!("{r:.2}"))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }

    // noise-only flow: inversion is exact translation algebra
    let zero = DriftField::zero(2).unwrap();
    let w = BrownianPath::sample(derive_seed(0xa5, 99), 2, 1.0, 256).unwrap();
    let mut zero_worst = 0.0f64;
    let origin_defect = inverse_consistency(&zero, &w, &[0.0, 0.0], 0.73).unwrap();
    for pt in 0..20u64 {
        let x: Vec<f64> = (0..2)
            .map(|c| uniform_in(-2.0, 2.0, &[0xa5e, pt, c]))
            .collect();
        let t = uniform_in(0.1, 1.0, &[0xa5e, pt, 7]);
        zero_worst = zero_worst.max(inverse_consistency(&zero, &w, &x, t).unwrap());
    }
    ok &= origin_defect == 0.0 && zero_worst <= 1e-14;
    lines.push(format!(
        "zero drift: origin defect {origin_defect:.1e}, generic max {zero_worst:.1e}"
    ));
    verdict(
        ok,
        "criterion 05, inverse-flow consistency",
        format!("per-level ratios want [1.5, 3]; {}", lines.join("; ")),
    );
}

#[test]
fn a06_weak_residual_shrinks_and_flags_the_frozen_control() {
    let drift = DriftField::shear(0.8, 2.0).unwrap();
    let datum = InitialDatum::radial_bump(vec![0.2, -0.1], 0.9, 1.0);
    let phi = TestFunction::new(vec![0.3, 0.2], 1.3, 1.0).unwrap();
    let domain = AxisBox::centered_cube(3.0, 2).unwrap();
    let base = BrownianPath::sample(41, 2, 1.0, 32).unwrap();

    let ladder = [
        (base.clone(), 65usize),
        (base.refine(), 129),
        (base.refine().refine(), 257),
    ];
    let mut residuals = Vec::new();
    for (path, nodes) in &ladder {
        let quad = QuadratureSpec::new(domain.clone(), *nodes).unwrap();
        let ws =
            WeakSolution::representation(drift.clone(), path.clone(), datum.clone()).unwrap();
        let report = weak_residual_report(&ws, &phi, 1.0, &quad).unwrap();
        residuals.push(report.residual.abs());
    }
    let (finest_path, finest_nodes) = ladder.last().unwrap();
    let quad = QuadratureSpec::new(domain.clone(), *finest_nodes).unwrap();
    let frozen = WeakSolution::new(
        drift.clone(),
        finest_path.clone(),
        datum.clone(),
        stochlab_core::transport::Route::FrozenDatum,
    )
    .unwrap();
    let control = weak_residual_report(&frozen, &phi, 1.0, &quad)
        .unwrap()
        .residual
        .abs();

    let decreasing = residuals.windows(2).all(|w| w[1] < w[0]);
    let separated = control >= 10.0 * residuals.last().unwrap();
    verdict(
        decreasing && separated,
        "criterion 06, weak-residual discrimination",
        format!(
            "|R| ladder [{}] decreasing, frozen control {control:.2e} >= 10x finest",
            residuals
                .iter()
                .map(|r| format!("{r:.2e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

#[test]
fn a07_representation_and_auxiliary_routes_agree() {
    let drift = DriftField::shear(0.8, 2.0).unwrap();
    let datum = InitialDatum::radial_bump(vec![0.0, 0.0], 1.2, 1.0);
    let coarse = BrownianPath::sample(17, 2, 1.0, 1024).unwrap();
    let fine = coarse.refine().refine(); // 4096 steps

    let max_gap = |path: &BrownianPath| -> f64 {
        let rep =
            WeakSolution::representation(drift.clone(), path.clone(), datum.clone()).unwrap();
        let aux = WeakSolution::auxiliary(drift.clone(), path.clone(), datum.clone()).unwrap();
        let mut worst = 0.0f64;
        for i in 0..100u64 {
            let t = uniform_in(0.0, 1.0, &[0xa7, i, 0]);
            let x: Vec<f64> = (0..2)
                .map(|c| uniform_in(-1.5, 1.5, &[0xa7, i, 1 + c]))
                .collect();
            let gap = (rep.evaluate(t, &x).unwrap() - aux.evaluate(t, &x).unwrap()).abs();
            worst = worst.max(gap);
        }
        worst
    };
    let gap_coarse = max_gap(&coarse);
    let gap_fine = max_gap(&fine);
    verdict(
        gap_fine <= 1e-3 && gap_fine < gap_coarse,
        "criterion 07, route equivalence",
        format!(
            "max gap {gap_fine:.2e} at 4096 steps (bound 1e-3), {gap_coarse:.2e} at 1024"
        ),
    );
}

#[test]
fn a08_mollification_ladder_settles_on_one_solution() {
    let mut cfg = RunConfig::default();
    cfg.drift.kind = "rotational_singular".to_string();
    cfg.drift.alpha = Some(1.5);
    cfg.drift.p = 3.0;
    cfg.drift.q = 8.0;
    cfg.datum.center = vec![0.8, 0.0];
    cfg.datum.radius = 0.7;
    cfg.n_steps = 128;
    cfg.quadrature.nodes_per_axis = 33;
    cfg.experiment.deltas = vec![0.4, 0.2, 0.1, 0.05];
    let dir = tempfile::tempdir().unwrap();
    let pool = Pool::new(4).unwrap();
    let study = uniqueness::run(&cfg, dir.path(), &pool).unwrap();

    let gaps: Vec<f64> = cfg
        .experiment
        .deltas
        .iter()
        .map(|d| study.metrics[&format!("gap_delta_{d}")].as_f64().unwrap())
        .collect();
    // non-increasing within measurement noise: allow a 10% wobble around
    // the scheme floor, never an actual climb
    let tame = gaps
        .windows(2)
        .all(|w| w[1] <= 1.10 * w[0] + 1e-4);
    let final_gap = *gaps.last().unwrap();
    verdict(
        tame && final_gap <= 1e-2,
        "criterion 08, uniqueness probe",
        format!(
            "normalized pairing gaps [{}], final {final_gap:.2e} (bound 1e-2)",
            gaps.iter()
                .map(|g| format!("{g:.2e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

#[test]
fn a09_datum_perturbations_never_amplify() {
    let mut cfg = RunConfig::default();
    cfg.n_steps = 128;
    let dir = tempfile::tempdir().unwrap();
    let pool = Pool::new(4).unwrap();
    let study = stability::run_strong(&cfg, dir.path(), &pool).unwrap();
    let all_exact = study.metrics["all_exact"] == serde_json::Value::Bool(true);
    let violation = study.metrics["max_violation"].as_f64().unwrap();
    verdict(
        all_exact && violation == 0.0,
        "criterion 09, strong stability",
        format!(
            "sup-norm excess {violation:.1e} (want exactly 0), dyadic offsets reproduced exactly: {all_exact}"
        ),
    );
}

#[test]
fn a10_oscillatory_data_pair_to_nothing() {
    let mut cfg = RunConfig::default();
    cfg.drift.kind = "zero".to_string();
    cfg.n_steps = 512;
    cfg.datum.center = vec![0.0, 0.0];
    cfg.datum.radius = 1.2;
    cfg.quadrature.nodes_per_axis = 257;
    let dir = tempfile::tempdir().unwrap();
    let pool = Pool::new(4).unwrap();
    let study = stability::run_weak(&cfg, dir.path(), &pool).unwrap();
    let decreasing = study.metrics["decreasing"] == serde_json::Value::Bool(true);
    let final_ratio = study.metrics["final_ratio"].as_f64().unwrap();
    verdict(
        decreasing && final_ratio <= 0.05,
        "criterion 10, weak-star stability",
        format!("|pairing| decreasing, final/first = {final_ratio:.2e} (bound 0.05)"),
    );
}

#[test]
fn a11_backward_gradient_moments_stay_bounded() {
    let b = DriftField::rotational_singular(1.5, LpsExponents::new(2, 3.0, 8.0)).unwrap();
    let seeds: Vec<u64> = (0..512).map(|r| derive_seed(0xa11, r)).collect();
    // the delta = 0.05 field has gradients near 90 around the core, so the
    // step count must keep dt well under the inverse gradient
    let protocol = MomentProtocol {
        n_steps: 512,
        diff_step: 1e-4,
        kernel_points: 15,
    };
    let x = [0.9, 0.4];
    let deltas = [0.4, 0.2, 0.1, 0.05];
    let mut estimates = Vec::new();
    for &delta in &deltas {
        let est = gradient_moment_estimate(&b, &seeds, &x, 1.0, 2.0, delta, &protocol).unwrap();
        assert_eq!(est.replicates_failed, 0, "mollified runs should not fail");
        estimates.push(est.value);
    }
    let max = estimates.iter().cloned().fold(f64::MIN, f64::max);
    let min = estimates.iter().cloned().fold(f64::MAX, f64::min);
    let ratio = max / min;
    verdict(
        ratio <= 2.0,
        "criterion 11, gradient-moment boundedness",
        format!(
            "E|grad Y|^2 over deltas [{}]: max/min = {ratio:.3} (bound 2)",
            estimates
                .iter()
                .map(|e| format!("{e:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

fn dir_snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

#[test]
fn a12_studies_are_byte_deterministic_across_worker_counts() {
    let mut cfg = RunConfig::default();
    cfg.experiment.levels = vec![3, 4, 5];
    cfg.experiment.replicates = 16;

    let mut uniq_cfg = RunConfig::default();
    uniq_cfg.n_steps = 32;
    uniq_cfg.quadrature.nodes_per_axis = 17;
    uniq_cfg.experiment.deltas = vec![0.4, 0.2];
    uniq_cfg.datum.radius = 0.7;

    let mut checked = 0usize;
    for (workers_a, workers_b) in [(1usize, 4usize)] {
        let run_pair = |run: &dyn Fn(&Pool, &Path)| {
            let dir_a = tempfile::tempdir().unwrap();
            let dir_b = tempfile::tempdir().unwrap();
            run(&Pool::new(workers_a).unwrap(), dir_a.path());
            run(&Pool::new(workers_b).unwrap(), dir_b.path());
            (dir_snapshot(dir_a.path()), dir_snapshot(dir_b.path()))
        };
        let (a, b) = run_pair(&|pool, dir| {
            converge::run(&cfg, dir, pool).unwrap();
        });
        assert_eq!(
            a.keys().collect::<Vec<_>>(),
            b.keys().collect::<Vec<_>>(),
            "artifact sets differ"
        );
        for (name, bytes) in &a {
            assert_eq!(bytes, &b[name], "{name} differs between worker counts");
        }
        checked += a.len();
        let (a, b) = run_pair(&|pool, dir| {
            uniqueness::run(&uniq_cfg, dir, pool).unwrap();
        });
        for (name, bytes) in &a {
            assert_eq!(bytes, &b[name], "{name} differs between worker counts");
        }
        checked += a.len();
    }
    verdict(
        checked >= 8,
        "criterion 12, determinism",
        format!("{checked} artifacts byte-identical between 1 and 4 workers"),
    );
}
