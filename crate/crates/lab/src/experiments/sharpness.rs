//! Exploratory sweep at the edge of the integrability class: the
//! uniqueness ladder rerun for a family of singularity strengths, from
//! comfortably subcritical to outside the class. Nothing here asserts;
//! the point is the recorded contrast, not a verdict. The subcritical
//! theory says the ladder collapses inside the class and makes no promise
//! beyond it.

use super::uniqueness::discrepancy_ladder;
use super::Study;
use crate::config::RunConfig;
use crate::error::Result;
use crate::output;
use crate::runner::Pool;
use crate::svg::{self, Series};
use crate::table::MetricTable;
use std::path::Path;
use stochlab_core::drift::LpsExponents;
use stochlab_core::DriftField;

/// Singularity strengths swept: p(alpha - 1) crosses d = 2 at
/// alpha = 1 + 2/p, so with the declared p = 3 the class boundary sits
/// at alpha = 5/3 and the last entries step outside it.
const ALPHAS: [f64; 4] = [1.25, 1.5, 1.75, 2.0];

pub fn run(cfg: &RunConfig, out: &Path, pool: &Pool) -> Result<Study> {
    let mut table = MetricTable::new(&["alpha", "delta", "max_normalized_gap", "seed"]);
    let mut curves = Vec::new();
    for &alpha in &ALPHAS {
        let drift = DriftField::rotational_singular(
            alpha,
            LpsExponents::new(cfg.dimension, cfg.drift.p, cfg.drift.q),
        )?;
        let ladder = discrepancy_ladder(cfg, &drift, pool)?;
        let mut points = Vec::new();
        for row in &ladder.rows {
            table.push(vec![
                alpha.into(),
                row.delta.into(),
                row.max_normalized.into(),
                cfg.seed.into(),
            ])?;
            points.push((row.delta, row.max_normalized));
        }
        curves.push(Series::new(format!("alpha = {alpha}"), points));
    }
    output::write_csv(&out.join("sharpness.csv"), &table)?;
    svg::write_svg_plot(
        &out.join("sharpness.svg"),
        "ladder collapse across singularity strengths",
        "delta",
        "max normalized gap",
        &curves,
        true,
    )?;

    let mut study = Study::new("sharpness", cfg.seed);
    study.exploratory = true;
    study.param("alphas", serde_json::to_value(ALPHAS)?);
    study.param("p", cfg.drift.p);
    study.param("q", cfg.drift.q);
    study.param(
        "class_boundary_alpha",
        1.0 + cfg.dimension as f64 / cfg.drift.p,
    );
    for (i, &alpha) in ALPHAS.iter().enumerate() {
        if let Some(last) = curves[i].points.last() {
            study.metric(&format!("final_gap_alpha_{alpha}"), last.1);
        }
    }
    study.artifact("sharpness.csv");
    study.artifact("sharpness.svg");
    study.finish(out, cfg)
}
