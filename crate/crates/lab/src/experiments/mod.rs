//! The numerical studies. Each one consumes a [`RunConfig`], writes its
//! tables, plots, and a `study.json` summary into the output directory,
//! and returns the summary for the CLI to print. Every random draw is
//! keyed by explicit seeds carried in the work items, which is what makes
//! the artifacts byte-identical across worker counts.

pub mod converge;
pub mod noise_compare;
pub mod persistence;
pub mod sharpness;
pub mod stability;
pub mod uniqueness;

use crate::config::RunConfig;
use crate::error::Result;
use crate::output;
use crate::runner::Pool;
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;
use stochlab_core::transport::{QuadratureSpec, TestFunction, WeakSolution};
use stochlab_core::Real;

#[derive(Debug, Serialize)]
pub struct Study {
    pub name: String,
    pub seed: u64,
    pub exploratory: bool,
    /// Verdict against the study's configured tolerances; `None` for
    /// measurement-only studies that carry no pass/fail semantics.
    pub passed: Option<bool>,
    pub replicate_failures: usize,
    pub parameters: BTreeMap<String, Value>,
    pub metrics: BTreeMap<String, Value>,
    pub artifacts: Vec<String>,
}

impl Study {
    pub fn new(name: &str, seed: u64) -> Self {
        Study {
            name: name.to_string(),
            seed,
            exploratory: false,
            passed: None,
            replicate_failures: 0,
            parameters: BTreeMap::new(),
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    /// ANDs another gate condition into the verdict.
    pub fn pass(&mut self, ok: bool) {
        self.passed = Some(self.passed.unwrap_or(true) && ok);
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.parameters.insert(key.to_string(), value.into());
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.to_string(), value.into());
    }

    pub fn artifact(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    /// Writes `study.json` plus the resolved config echo next to the other
    /// artifacts.
    pub fn finish(mut self, out: &Path, cfg: &RunConfig) -> Result<Study> {
        output::write_text(&out.join("config.txt"), &cfg.echo())?;
        self.artifacts.push("config.txt".to_string());
        self.artifacts.sort();
        output::write_json(&out.join("study.json"), &self)?;
        Ok(self)
    }
}

/// Quadrature nodes and weights materialized once; pairings against many
/// integrands reuse them in fixed node order.
pub(crate) struct GridCache {
    pub nodes: Vec<Vec<Real>>,
    pub weights: Vec<Real>,
}

impl GridCache {
    pub fn new(quad: &QuadratureSpec<Real>) -> Result<Self> {
        let grid = quad.grid()?;
        let mut nodes = Vec::with_capacity(grid.len());
        let mut weights = Vec::with_capacity(grid.len());
        for (x, w) in grid.iter() {
            nodes.push(x);
            weights.push(w);
        }
        Ok(GridCache { nodes, weights })
    }

    pub fn pairing(&self, values: &[Real], phi: &TestFunction<Real>) -> Real {
        let mut acc = 0.0;
        for (i, x) in self.nodes.iter().enumerate() {
            acc += self.weights[i] * values[i] * phi.value(x);
        }
        acc
    }
}

/// Solution values over the grid at the given path knots, nodes computed
/// in parallel, rows in knot order.
pub(crate) fn solution_values(
    ws: &WeakSolution<Real>,
    grid: &GridCache,
    knots: &[usize],
    pool: &Pool,
) -> Result<Vec<Vec<Real>>> {
    knots
        .iter()
        .map(|&k| {
            let t = ws.path.time(k);
            pool.try_map(&grid.nodes, |x| Ok(ws.evaluate(t, x)?))
        })
        .collect()
}

/// Ring of identical test bumps used as a pairing battery.
pub(crate) fn phi_ring(
    count: usize,
    ring_radius: Real,
    radius: Real,
) -> Result<Vec<TestFunction<Real>>> {
    (0..count)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / count as f64;
            TestFunction::new(
                vec![ring_radius * angle.cos(), ring_radius * angle.sin()],
                radius,
                1.0,
            )
            .map_err(Into::into)
        })
        .collect()
}

/// Battery of test bumps sized to fit inside the quadrature domain: one
/// centered, three on a ring.
pub fn residual_battery(quad: &QuadratureSpec<Real>) -> Result<Vec<TestFunction<Real>>> {
    let domain = &quad.domain;
    let dim = domain.dim();
    let half = domain
        .lo()
        .iter()
        .zip(domain.hi())
        .map(|(&lo, &hi)| (hi - lo) / 2.0)
        .fold(f64::INFINITY, f64::min);
    let mut battery = vec![TestFunction::new(
        stochlab_core::geom::zeros(dim),
        0.6 * half,
        1.0,
    )?];
    for mut phi in phi_ring(3, 0.3 * half, 0.45 * half)? {
        phi.center.resize(dim, 0.0);
        battery.push(phi);
    }
    for phi in &battery {
        quad.check_support(phi)?;
    }
    Ok(battery)
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit_recovers_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        assert!((fit_slope(&xs, &ys) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn phi_ring_spaces_centers_evenly() {
        let ring = phi_ring(4, 1.0, 0.3).unwrap();
        assert_eq!(ring.len(), 4);
        assert!((ring[0].center[0] - 1.0).abs() < 1e-15);
        assert!((ring[1].center[1] - 1.0).abs() < 1e-15);
        for phi in &ring {
            assert_eq!(phi.radius, 0.3);
        }
    }
}
