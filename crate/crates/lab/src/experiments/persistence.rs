//! Modulus-of-continuity persistence: the solution inherits a Hoelder
//! modulus from the backward flow through composition with a Lipschitz
//! datum. Paired probes at dyadic separations measure both moduli; the
//! value modulus must sit under `Lip(u0) H gap^beta`, where `H` is the
//! backward-flow quotient over the same sample.

use super::Study;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::output;
use crate::runner::Pool;
use crate::svg::{self, Series};
use crate::table::MetricTable;
use std::path::Path;
use stochlab_core::flow::backward_flow;
use stochlab_core::{geom, rng, BrownianPath, Real};

const BETA: f64 = 0.9;
const BASE_POINTS: usize = 48;
const GAP_EXPONENTS: std::ops::RangeInclusive<u32> = 2..=10;

pub fn run(cfg: &RunConfig, out: &Path, pool: &Pool) -> Result<Study> {
    let drift = cfg.build_drift()?;
    let datum = cfg.build_datum()?;
    let lip = datum.lipschitz_bound().ok_or_else(|| {
        Error::invalid("persistence needs a Lipschitz datum; indicator data carry no modulus")
    })?;
    let path = BrownianPath::sample(cfg.seed, cfg.dimension, cfg.horizon, cfg.n_steps)?;
    let t = cfg.experiment.time;

    // paired probes: base point plus a partner at distance 2^-j along a
    // seeded direction
    let mut probes: Vec<Vec<Real>> = Vec::new();
    let mut pair_index: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..BASE_POINTS as u64 {
        let base: Vec<Real> = (0..cfg.dimension)
            .map(|c| 3.0 * rng::uniform_half_open(rng::mix(&[cfg.seed, 0xca, i, c as u64])) - 1.5)
            .collect();
        let mut dir: Vec<Real> = (0..cfg.dimension)
            .map(|c| rng::standard_normal(&[cfg.seed, 0xcb, i, c as u64]))
            .collect();
        let len = geom::norm(&dir);
        for v in &mut dir {
            *v /= len;
        }
        let base_idx = probes.len();
        probes.push(base.clone());
        for j in GAP_EXPONENTS {
            let gap = 0.5f64.powi(j as i32);
            let partner: Vec<Real> = base
                .iter()
                .zip(&dir)
                .map(|(&b, &d)| b + gap * d)
                .collect();
            pair_index.push((base_idx, probes.len(), gap));
            probes.push(partner);
        }
    }

    let images: Vec<Vec<Real>> = pool.try_map(&probes, |x| {
        Ok(backward_flow(&drift, &path, x, 0.0, t)?
            .terminal_position()
            .to_vec())
    })?;
    let values: Vec<Real> = images.iter().map(|y| datum.evaluate(y)).collect();

    // backward-flow quotient over every probe pair, not just the designed
    // ones; the designed pairs then bin the modulus by separation
    let mut flow_quotient = 0.0f64;
    for i in 0..probes.len() {
        for j in (i + 1)..probes.len() {
            let gap = geom::dist(&probes[i], &probes[j]);
            if gap == 0.0 {
                continue;
            }
            let q = geom::dist(&images[i], &images[j]) / gap.powf(BETA);
            flow_quotient = flow_quotient.max(q);
        }
    }

    let mut table = MetricTable::new(&[
        "gap",
        "flow_modulus",
        "value_modulus",
        "bound",
        "ratio",
        "steps",
        "seed",
    ]);
    let mut max_ratio = 0.0f64;
    for j in GAP_EXPONENTS {
        let gap = 0.5f64.powi(j as i32);
        let mut flow_mod = 0.0f64;
        let mut value_mod = 0.0f64;
        for &(a, b, g) in &pair_index {
            if g != gap {
                continue;
            }
            flow_mod = flow_mod.max(geom::dist(&images[a], &images[b]));
            value_mod = value_mod.max((values[a] - values[b]).abs());
        }
        let bound = lip * flow_quotient * gap.powf(BETA);
        let ratio = if bound > 0.0 { value_mod / bound } else { 0.0 };
        max_ratio = max_ratio.max(ratio);
        table.push(vec![
            gap.into(),
            flow_mod.into(),
            value_mod.into(),
            bound.into(),
            ratio.into(),
            cfg.n_steps.into(),
            cfg.seed.into(),
        ])?;
    }
    output::write_csv(&out.join("modulus.csv"), &table)?;

    let gaps: Vec<f64> = GAP_EXPONENTS.map(|j| 0.5f64.powi(j as i32)).collect();
    let value_mods = table.column_f64("value_modulus")?;
    let bounds = table.column_f64("bound")?;
    svg::write_svg_plot(
        &out.join("modulus.svg"),
        "value modulus vs probe separation",
        "gap",
        "modulus",
        &[
            Series::new("measured", gaps.iter().copied().zip(value_mods).collect()),
            Series::new("bound", gaps.iter().copied().zip(bounds).collect()),
        ],
        false,
    )?;

    let mut study = Study::new("persistence", cfg.seed);
    study.param("drift", drift.kind_id());
    study.param("beta", BETA);
    study.param("lipschitz_bound", lip);
    study.param("probe_pairs", pair_index.len());
    study.param("time", t);
    study.metric("flow_holder_quotient", flow_quotient);
    study.metric("max_ratio", max_ratio);
    study.metric("within_bound", max_ratio <= 1.0);
    study.pass(max_ratio <= 1.0);
    study.artifact("modulus.csv");
    study.artifact("modulus.svg");
    study.finish(out, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn holder_swirl_keeps_the_composed_modulus() {
        let mut cfg = RunConfig::default();
        cfg.drift.kind = "holder_rotational".to_string();
        cfg.drift.alpha = Some(0.6);
        cfg.n_steps = 256;
        let dir = tempdir().unwrap();
        let pool = Pool::new(2).unwrap();
        let study = run(&cfg, dir.path(), &pool).unwrap();
        assert_eq!(study.metrics["within_bound"], serde_json::Value::Bool(true));
        assert_eq!(study.passed, Some(true));
        let q = study.metrics["flow_holder_quotient"].as_f64().unwrap();
        assert!(q.is_finite() && q > 0.0);
    }

    #[test]
    fn indicator_data_are_rejected() {
        let mut cfg = RunConfig::default();
        cfg.datum.kind = "indicator".to_string();
        let dir = tempdir().unwrap();
        let pool = Pool::new(1).unwrap();
        assert!(run(&cfg, dir.path(), &pool).is_err());
    }
}
