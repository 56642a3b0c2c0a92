//! Stability of the solution map in both topologies.
//!
//! Weak: oscillatory data `sin(n x_1)` under a fixed window converge
//! weak-star to zero, and the transported pairings must follow. The
//! pairing is computed by pushing the test mass forward, `integral of
//! u0_n(y) phi(X_t(y)) dy`, legitimate because the flows preserve volume;
//! one flow table serves the whole sequence.
//!
//! Strong: offsetting or rescaling the datum moves the solution by
//! exactly the same amount, pointwise, with zero tolerance. Dyadic
//! offsets against an indicator datum keep even the floating-point
//! arithmetic exact.

use super::{GridCache, Study};
use crate::config::RunConfig;
use crate::error::Result;
use crate::output;
use crate::runner::Pool;
use crate::svg::{self, Series};
use crate::table::MetricTable;
use std::path::Path;
use stochlab_core::flow::forward_flow;
use stochlab_core::transport::{InitialDatum, TestFunction, WeakSolution};
use stochlab_core::{rng, BrownianPath, Real};

const FREQUENCIES: [usize; 5] = [4, 8, 16, 32, 64];

pub fn run_weak(cfg: &RunConfig, out: &Path, pool: &Pool) -> Result<Study> {
    let drift = cfg.build_drift()?;
    let quad = cfg.build_quadrature()?;
    let grid = GridCache::new(&quad)?;
    let path = BrownianPath::sample(cfg.seed, cfg.dimension, cfg.horizon, cfg.n_steps)?;
    let t = cfg.experiment.time;
    let phi = TestFunction::new(vec![0.4, 0.6], 1.15, 1.0)?;
    quad.check_support(&phi)?;

    // forward the test mass once; the datum sequence only reweights it
    let pushed: Vec<Real> = pool.try_map(&grid.nodes, |y| {
        let traj = forward_flow(&drift, &path, y, 0.0, t)?;
        Ok(phi.value(traj.terminal_position()))
    })?;

    let window_center = cfg.datum.center.clone();
    let window_radius = cfg.datum.radius;
    let pairing_of = |datum: &InitialDatum<Real>| -> Real {
        let mut acc = 0.0;
        for (i, y) in grid.nodes.iter().enumerate() {
            acc += grid.weights[i] * datum.evaluate(y) * pushed[i];
        }
        acc
    };

    let mut table = MetricTable::new(&[
        "frequency",
        "abs_pairing",
        "ratio_to_first",
        "nodes",
        "steps",
        "seed",
    ]);
    let mut values = Vec::new();
    for &n in &FREQUENCIES {
        let datum = InitialDatum::oscillatory(
            n as f64,
            window_center.clone(),
            window_radius,
            cfg.datum.amplitude,
        );
        values.push(pairing_of(&datum).abs());
    }
    let first = values[0];
    for (&n, &v) in FREQUENCIES.iter().zip(&values) {
        table.push(vec![
            n.into(),
            v.into(),
            (v / first).into(),
            quad.nodes_per_axis.into(),
            cfg.n_steps.into(),
            cfg.seed.into(),
        ])?;
    }
    output::write_csv(&out.join("weak_pairings.csv"), &table)?;

    let limit_datum = InitialDatum::constant(cfg.dimension, 0.0);
    let limit_abs = pairing_of(&limit_datum).abs();

    svg::write_svg_plot(
        &out.join("weak_pairings.svg"),
        "transported pairing of oscillatory data",
        "oscillation frequency",
        "|pairing|",
        &[Series::new(
            "sequence",
            FREQUENCIES
                .iter()
                .zip(&values)
                .map(|(&n, &v)| (n as f64, v))
                .collect(),
        )],
        true,
    )?;

    // how far below the first pairing the last one must fall
    const FINAL_RATIO_BOUND: f64 = 0.05;

    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let final_ratio = values.last().unwrap() / first;
    let mut study = Study::new("stability_weak", cfg.seed);
    study.param("drift", drift.kind_id());
    study.param("frequencies", serde_json::to_value(FREQUENCIES)?);
    study.param("time", t);
    study.param("window_radius", window_radius);
    study.param("final_ratio_bound", FINAL_RATIO_BOUND);
    study.metric("decreasing", decreasing);
    study.metric("first_abs_pairing", first);
    study.metric("final_ratio", final_ratio);
    study.pass(decreasing && final_ratio <= FINAL_RATIO_BOUND);
    study.metric("limit_abs_pairing", limit_abs);
    study.artifact("weak_pairings.csv");
    study.artifact("weak_pairings.svg");
    study.finish(out, cfg)
}

const OFFSET_EXPONENTS: [u32; 6] = [1, 2, 3, 4, 5, 6];

pub fn run_strong(cfg: &RunConfig, out: &Path, pool: &Pool) -> Result<Study> {
    let drift = cfg.build_drift()?;
    let path = BrownianPath::sample(cfg.seed, cfg.dimension, cfg.horizon, cfg.n_steps)?;
    // exactness needs values in {0, 1}; fall back to the default
    // indicator when the config asks for anything else
    let base = if cfg.datum.kind == "indicator" {
        cfg.build_datum()?
    } else {
        InitialDatum::indicator_halfspace(vec![1.0, 0.0], 0.0)
    };

    // probe points: fixed battery of (t, x) pairs on the path grid
    let probes: Vec<(Real, Vec<Real>)> = (0..200u64)
        .map(|i| {
            let k = (rng::mix(&[cfg.seed, 0xbeef, i]) % (cfg.n_steps as u64 + 1)) as usize;
            let x = (0..cfg.dimension)
                .map(|c| 4.0 * rng::uniform_half_open(rng::mix(&[cfg.seed, i, c as u64])) - 2.0)
                .collect();
            (path.time(k), x)
        })
        .collect();

    let reference = WeakSolution::representation(drift.clone(), path.clone(), base.clone())?;
    let ref_values: Vec<Real> =
        pool.try_map(&probes, |(t, x)| Ok(reference.evaluate(*t, x)?))?;

    let mut table = MetricTable::new(&[
        "family",
        "n",
        "datum_distance",
        "solution_distance",
        "exact",
        "steps",
        "seed",
    ]);
    let mut all_exact = true;
    let mut max_violation = 0.0f64;

    for &k in &OFFSET_EXPONENTS {
        let n = 1u64 << k;
        let eps = 1.0 / n as f64;
        for family in ["offset", "scaled"] {
            let datum = match family {
                "offset" => InitialDatum::affine(base.clone(), 1.0, eps),
                _ => InitialDatum::affine(base.clone(), 1.0 + eps, 0.0),
            };
            // sup over the datum: offset shifts everywhere by eps; scaling
            // moves the value 1 to 1 + eps and fixes 0
            let datum_distance = eps;
            let ws = WeakSolution::representation(drift.clone(), path.clone(), datum)?;
            let values: Vec<Real> = pool.try_map(&probes, |(t, x)| Ok(ws.evaluate(*t, x)?))?;
            let mut sup = 0.0f64;
            let mut exact = true;
            for (v, r) in values.iter().zip(&ref_values) {
                let gap = (v - r).abs();
                sup = sup.max(gap);
                // offset: every point moves by exactly eps; scaled: points
                // move by exactly eps where u = 1 and 0 where u = 0
                let expected_here = if family == "offset" {
                    eps
                } else if *r == 1.0 {
                    eps
                } else {
                    0.0
                };
                if gap != expected_here {
                    exact = false;
                }
            }
            if sup > datum_distance {
                max_violation = max_violation.max(sup - datum_distance);
            }
            all_exact &= exact;
            table.push(vec![
                family.into(),
                n.into(),
                datum_distance.into(),
                sup.into(),
                (exact as i64).into(),
                cfg.n_steps.into(),
                cfg.seed.into(),
            ])?;
        }
    }
    output::write_csv(&out.join("strong_distances.csv"), &table)?;

    let mut study = Study::new("stability_strong", cfg.seed);
    study.param("drift", drift.kind_id());
    study.param("probes", probes.len());
    study.metric("all_exact", all_exact);
    study.metric("max_violation", max_violation);
    study.pass(all_exact);
    study.artifact("strong_distances.csv");
    study.finish(out, cfg)
}
