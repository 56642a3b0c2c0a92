//! Uniqueness probe: the auxiliary construction on the exact field against
//! the backward-flow representation through mollified fields. If both
//! converge to the same weak solution, the pairing discrepancy must fall
//! with the mollification width.

use super::{phi_ring, solution_values, GridCache, Study};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::output;
use crate::runner::Pool;
use crate::svg::{self, Series};
use crate::table::MetricTable;
use std::path::Path;
use stochlab_core::drift::{mollify, MollifierKernel};
use stochlab_core::transport::{TestFunction, WeakSolution};
use stochlab_core::{BrownianPath, DriftField, Real};

/// Kernel quadrature resolution for the mollified candidates; the kernel
/// mass is renormalized per point, so moderate resolution shifts the
/// effective kernel slightly without breaking unit mass.
pub(crate) const KERNEL_POINTS: usize = 21;

pub(crate) struct LadderRow {
    pub delta: f64,
    pub max_normalized: f64,
}

pub(crate) struct LadderOutput {
    pub rows: Vec<LadderRow>,
    pub detail: MetricTable,
    pub norm_scale: f64,
}

/// Shared engine: pairing discrepancies between the exact-field reference
/// and mollified candidates over a battery of test functions and knot
/// times. The sharpness study reuses it with out-of-class exponents.
pub(crate) fn discrepancy_ladder(
    cfg: &RunConfig,
    drift: &DriftField,
    pool: &Pool,
) -> Result<LadderOutput> {
    let deltas = &cfg.experiment.deltas;
    if deltas.is_empty() || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid(
            "experiment.deltas must be strictly decreasing and nonempty",
        ));
    }
    if cfg.n_steps % 4 != 0 {
        return Err(Error::invalid("n_steps must be divisible by 4"));
    }
    let datum = cfg.build_datum()?;
    let quad = cfg.build_quadrature()?;
    let grid = GridCache::new(&quad)?;
    let path = BrownianPath::sample(cfg.seed, cfg.dimension, cfg.horizon, cfg.n_steps)?;
    let knots: Vec<usize> = (1..=4).map(|k| k * cfg.n_steps / 4).collect();

    let ring_radius = stochlab_core::geom::norm(&cfg.datum.center).max(0.5);
    let battery: Vec<TestFunction<Real>> = phi_ring(8, ring_radius, 0.5)?;
    for phi in &battery {
        quad.check_support(phi)?;
    }
    // common normalization so discrepancies compare across the battery
    let norm_scale = datum.sup_norm * battery[0].abs_mass(129)?;

    let reference = WeakSolution::auxiliary(drift.clone(), path.clone(), datum.clone())?;
    let ref_values = solution_values(&reference, &grid, &knots, pool)?;

    let mut detail = MetricTable::new(&[
        "delta",
        "phi_id",
        "t",
        "pairing_reference",
        "pairing_mollified",
        "normalized_gap",
        "nodes",
        "steps",
        "seed",
    ]);
    let mut rows = Vec::new();
    for &delta in deltas {
        let kernel = MollifierKernel::new(delta, KERNEL_POINTS)?;
        let smoothed = mollify(drift, &kernel)?;
        let candidate = WeakSolution::representation(smoothed, path.clone(), datum.clone())?;
        let cand_values = solution_values(&candidate, &grid, &knots, pool)?;
        let mut worst = 0.0f64;
        for (row, &knot) in knots.iter().enumerate() {
            let t = path.time(knot);
            for (phi_id, phi) in battery.iter().enumerate() {
                let p_ref = grid.pairing(&ref_values[row], phi);
                let p_cand = grid.pairing(&cand_values[row], phi);
                let gap = (p_ref - p_cand).abs() / norm_scale;
                worst = worst.max(gap);
                detail.push(vec![
                    delta.into(),
                    phi_id.into(),
                    t.into(),
                    p_ref.into(),
                    p_cand.into(),
                    gap.into(),
                    quad.nodes_per_axis.into(),
                    cfg.n_steps.into(),
                    cfg.seed.into(),
                ])?;
            }
        }
        rows.push(LadderRow {
            delta,
            max_normalized: worst,
        });
    }
    Ok(LadderOutput {
        rows,
        detail,
        norm_scale,
    })
}

pub fn run(cfg: &RunConfig, out: &Path, pool: &Pool) -> Result<Study> {
    let drift = cfg.build_drift()?;
    let ladder = discrepancy_ladder(cfg, &drift, pool)?;

    output::write_csv(&out.join("pairings.csv"), &ladder.detail)?;
    let mut summary = MetricTable::new(&["delta", "max_normalized_gap", "seed"]);
    for row in &ladder.rows {
        summary.push(vec![row.delta.into(), row.max_normalized.into(), cfg.seed.into()])?;
    }
    output::write_csv(&out.join("ladder.csv"), &summary)?;
    svg::write_svg_plot(
        &out.join("ladder.svg"),
        "pairing gap vs mollification width",
        "delta",
        "max normalized gap",
        &[Series::new(
            drift.kind_id().to_string(),
            ladder
                .rows
                .iter()
                .map(|r| (r.delta, r.max_normalized))
                .collect(),
        )],
        true,
    )?;

    let non_increasing = ladder
        .rows
        .windows(2)
        .all(|w| w[1].max_normalized <= w[0].max_normalized);
    let final_gap = ladder.rows.last().map(|r| r.max_normalized).unwrap_or(0.0);

    // "non-increasing" is asserted only up to Monte Carlo wobble: a rung may
    // sit 10% above its predecessor plus an absolute floor before the ladder
    // counts as unsettled; the final rung is measured against the normalized
    // gap bound outright
    const WOBBLE_FACTOR: f64 = 1.10;
    const WOBBLE_FLOOR: f64 = 1e-4;
    const FINAL_GAP_BOUND: f64 = 1e-2;
    let settled = ladder.rows.windows(2).all(|w| {
        w[1].max_normalized <= WOBBLE_FACTOR * w[0].max_normalized + WOBBLE_FLOOR
    });

    let mut study = Study::new("uniqueness", cfg.seed);
    study.param("wobble_factor", WOBBLE_FACTOR);
    study.param("wobble_floor", WOBBLE_FLOOR);
    study.param("final_gap_bound", FINAL_GAP_BOUND);
    study.metric("settled", settled);
    study.pass(settled && final_gap <= FINAL_GAP_BOUND);
    study.param("drift", drift.kind_id());
    study.param("deltas", serde_json::to_value(&cfg.experiment.deltas)?);
    study.param("kernel_points", KERNEL_POINTS);
    study.param("battery_size", 8);
    study.param("normalization", ladder.norm_scale);
    study.param("warnings", serde_json::to_value(cfg.exponent_warnings())?);
    study.metric("non_increasing", non_increasing);
    study.metric("final_normalized_gap", final_gap);
    for row in &ladder.rows {
        study.metric(&format!("gap_delta_{}", row.delta), row.max_normalized);
    }
    study.artifact("pairings.csv");
    study.artifact("ladder.csv");
    study.artifact("ladder.svg");
    study.finish(out, cfg)
}
