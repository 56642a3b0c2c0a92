//! Strong convergence of the forward characteristic scheme: terminal
//! error of every requested level against a reference taken several
//! levels deeper on the same refinement tree, one tree per replicate,
//! slope fitted in log2.

use super::{fit_slope, Study};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::output;
use crate::runner::Pool;
use crate::svg::{self, Series};
use crate::table::MetricTable;
use serde_json::Value;
use std::path::Path;
use stochlab_core::flow::forward_flow;
use stochlab_core::{rng, BrownianPath};

/// Extra refinement between the finest requested level and the error
/// reference. Measuring against an adjacent level halves the apparent
/// error of the finest point and tilts the fitted slope; four levels of
/// headroom keep the bias under a tenth of a halving.
const REFERENCE_EXTRA: usize = 4;

pub fn run(cfg: &RunConfig, out: &Path, pool: &Pool) -> Result<Study> {
    // where the fitted order must land for an additive-noise Euler scheme;
    // an engineering band, echoed into study.json
    const SLOPE_BAND: (f64, f64) = (0.8, 1.2);

    let levels = &cfg.experiment.levels;
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "experiment.levels must be strictly increasing with at least two entries",
        ));
    }
    if *levels.last().unwrap() > 16 {
        return Err(Error::invalid("levels beyond 2^16 steps are not sensible here"));
    }
    let reference_level = levels.last().unwrap() + REFERENCE_EXTRA;
    let drift = cfg.build_drift()?;
    let d = cfg.dimension;
    let horizon = cfg.horizon;

    let replicates: Vec<u64> = (0..cfg.experiment.replicates as u64)
        .map(|r| rng::derive_seed(cfg.seed, r))
        .collect();

    // per replicate: one Brownian tree, terminal gap of every requested
    // level against the deep reference
    let per_rep_results: Vec<Result<Vec<f64>>> = pool.map(&replicates, |&seed| {
        let mut x = vec![0.0; d];
        for (c, xi) in x.iter_mut().enumerate() {
            *xi = rng::uniform_half_open(rng::mix(&[seed, 0xa11, c as u64])) - 0.5;
        }
        let mut paths = Vec::with_capacity(levels.len());
        let mut w = BrownianPath::sample(seed, d, horizon, 1usize << levels[0])?;
        for &level in levels {
            while w.n_steps() < (1usize << level) {
                w = w.refine();
            }
            paths.push(w.clone());
        }
        while w.n_steps() < (1usize << reference_level) {
            w = w.refine();
        }
        let reference = forward_flow(&drift, &w, &x, 0.0, horizon)?
            .terminal_position()
            .to_vec();
        paths
            .iter()
            .map(|path| {
                let terminal = forward_flow(&drift, path, &x, 0.0, horizon)?;
                Ok(stochlab_core::geom::dist(
                    terminal.terminal_position(),
                    &reference,
                ))
            })
            .collect()
    });

    // singularity hits abort a replicate; the ensemble stays unbiased by
    // dropping it whole rather than patching the level that failed
    let mut failures = 0usize;
    let mut per_rep = Vec::with_capacity(per_rep_results.len());
    for rep in per_rep_results {
        match rep {
            Ok(errors) => per_rep.push(errors),
            Err(_) => failures += 1,
        }
    }
    if per_rep.is_empty() {
        return Err(Error::invalid("every replicate failed to integrate"));
    }

    let mut mean_err = vec![0.0f64; levels.len()];
    let mut max_err = vec![0.0f64; levels.len()];
    for rep in &per_rep {
        for (i, &e) in rep.iter().enumerate() {
            mean_err[i] += e;
            max_err[i] = max_err[i].max(e);
        }
    }
    for e in &mut mean_err {
        *e /= per_rep.len() as f64;
    }

    let mut table = MetricTable::new(&[
        "level", "n_steps", "dt", "mean_error", "max_error", "replicates", "seed",
    ]);
    for (i, &level) in levels.iter().enumerate() {
        let n = 1usize << level;
        table.push(vec![
            level.into(),
            n.into(),
            (horizon / n as f64).into(),
            mean_err[i].into(),
            max_err[i].into(),
            per_rep.len().into(),
            cfg.seed.into(),
        ])?;
    }
    output::write_csv(&out.join("errors.csv"), &table)?;

    let mut study = Study::new("converge", cfg.seed);
    study.replicate_failures = failures;
    study.param("drift", drift.kind_id());
    study.param("levels", serde_json::to_value(levels)?);
    study.param("replicates", per_rep.len());
    study.param("reference_level", reference_level);
    study.param("slope_band", serde_json::to_value(SLOPE_BAND)?);
    study.artifact("errors.csv");

    // translation-exact drifts reproduce the finest path bitwise
    let exact = mean_err.iter().all(|&e| e == 0.0);
    study.metric("exact", exact);
    if exact {
        study.metric("slope", Value::Null);
        study.pass(true);
    } else {
        let xs: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
        let ys: Vec<f64> = mean_err.iter().map(|&e| e.log2()).collect();
        // error ~ C 2^(-order level)
        let order = -fit_slope(&xs, &ys);
        study.metric("slope", order);
        study.pass(order >= SLOPE_BAND.0 && order <= SLOPE_BAND.1);
        let points: Vec<(f64, f64)> = xs.iter().copied().zip(mean_err.iter().copied()).collect();
        svg::write_svg_plot(
            &out.join("errors.svg"),
            "terminal error vs refinement level",
            "level (n = 2^level)",
            "mean |X_T - X_T^ref|",
            &[Series::new(drift.kind_id().to_string(), points)],
            true,
        )?;
        study.artifact("errors.svg");
    }
    for (i, &level) in levels.iter().enumerate() {
        study.metric(&format!("mean_error_l{level}"), mean_err[i]);
    }

    study.finish(out, cfg)
}
