//! Plain-text run configuration: `key = value` lines, `#` comments, and
//! bracketed sections that prefix the keys that follow. Unknown keys are
//! hard errors carrying the line number; silent typos in study configs
//! have burned enough hours already.

use crate::error::{Error, Result};
use stochlab_core::drift::LpsExponents;
use stochlab_core::geom::AxisBox;
use stochlab_core::transport::{InitialDatum, QuadratureSpec};
use stochlab_core::{DriftField, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct DriftConfig {
    pub kind: String,
    pub alpha: Option<f64>,
    pub amplitude: f64,
    pub frequency: f64,
    pub p: f64,
    pub q: f64,
    pub components: Option<Vec<f64>>,
    pub cutoff_radius: Option<f64>,
    pub mollify_delta: Option<f64>,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            kind: "shear".to_string(),
            alpha: None,
            amplitude: 1.0,
            frequency: 2.0,
            p: 6.0,
            q: 6.0,
            components: None,
            cutoff_radius: None,
            mollify_delta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatumConfig {
    pub kind: String,
    pub level: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub normal: Vec<f64>,
    pub offset: f64,
    pub wave: Vec<f64>,
}

impl Default for DatumConfig {
    fn default() -> Self {
        DatumConfig {
            kind: "bump".to_string(),
            level: 1.0,
            center: vec![0.0, 0.0],
            radius: 1.0,
            amplitude: 1.0,
            frequency: 4.0,
            normal: vec![1.0, 0.0],
            offset: 0.0,
            wave: vec![2.0, -1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadConfig {
    pub half_width: f64,
    pub nodes_per_axis: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            half_width: 3.0,
            nodes_per_axis: QuadratureSpec::<Real>::DEFAULT_NODES_PER_AXIS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub replicates: usize,
    pub levels: Vec<usize>,
    pub deltas: Vec<f64>,
    pub time: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            replicates: 256,
            levels: vec![6, 7, 8, 9, 10],
            deltas: vec![0.4, 0.2, 0.1, 0.05],
            time: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dimension: usize,
    pub horizon: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub drift: DriftConfig,
    pub datum: DatumConfig,
    pub quadrature: QuadConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dimension: 2,
            horizon: 1.0,
            n_steps: 1024,
            seed: 0,
            drift: DriftConfig::default(),
            datum: DatumConfig::default(),
            quadrature: QuadConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

fn parse_scalar<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| {
        Error::config(
            line,
            format!(
                "key {key}: cannot parse {raw:?} as {}",
                std::any::type_name::<T>()
            ),
        )
    })
}

fn parse_list(line: usize, key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|part| parse_scalar::<f64>(line, key, part))
        .collect()
}

fn parse_int_list(line: usize, key: &str, raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|part| parse_scalar::<usize>(line, key, part))
        .collect()
}

const SECTIONS: [&str; 4] = ["drift", "datum", "quadrature", "experiment"];

/// Parses the config text; unknown sections or keys fail with their line.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| Error::config(line_no, "unclosed section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::config(line_no, format!("unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let (key_part, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(line_no, format!("expected key = value, got {line:?}")))?;
        let key = key_part.trim();
        let value = value.trim();
        let full = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        match full.as_str() {
            "dimension" => cfg.dimension = parse_scalar(line_no, &full, value)?,
            "horizon" => cfg.horizon = parse_scalar(line_no, &full, value)?,
            "n_steps" => cfg.n_steps = parse_scalar(line_no, &full, value)?,
            "seed" => cfg.seed = parse_scalar(line_no, &full, value)?,
            "drift.kind" => cfg.drift.kind = value.to_string(),
            "drift.alpha" => cfg.drift.alpha = Some(parse_scalar(line_no, &full, value)?),
            "drift.amplitude" => cfg.drift.amplitude = parse_scalar(line_no, &full, value)?,
            "drift.frequency" => cfg.drift.frequency = parse_scalar(line_no, &full, value)?,
            "drift.p" => cfg.drift.p = parse_scalar(line_no, &full, value)?,
            "drift.q" => cfg.drift.q = parse_scalar(line_no, &full, value)?,
            "drift.components" => {
                cfg.drift.components = Some(parse_list(line_no, &full, value)?)
            }
            "drift.cutoff_radius" => {
                cfg.drift.cutoff_radius = Some(parse_scalar(line_no, &full, value)?)
            }
            "drift.mollify_delta" => {
                cfg.drift.mollify_delta = Some(parse_scalar(line_no, &full, value)?)
            }
            "datum.kind" => cfg.datum.kind = value.to_string(),
            "datum.level" => cfg.datum.level = parse_scalar(line_no, &full, value)?,
            "datum.center" => cfg.datum.center = parse_list(line_no, &full, value)?,
            "datum.radius" => cfg.datum.radius = parse_scalar(line_no, &full, value)?,
            "datum.amplitude" => cfg.datum.amplitude = parse_scalar(line_no, &full, value)?,
            "datum.frequency" => cfg.datum.frequency = parse_scalar(line_no, &full, value)?,
            "datum.normal" => cfg.datum.normal = parse_list(line_no, &full, value)?,
            "datum.offset" => cfg.datum.offset = parse_scalar(line_no, &full, value)?,
            "datum.wave" => cfg.datum.wave = parse_list(line_no, &full, value)?,
            "quadrature.half_width" => {
                cfg.quadrature.half_width = parse_scalar(line_no, &full, value)?
            }
            "quadrature.nodes_per_axis" => {
                cfg.quadrature.nodes_per_axis = parse_scalar(line_no, &full, value)?
            }
            "experiment.replicates" => {
                cfg.experiment.replicates = parse_scalar(line_no, &full, value)?
            }
            "experiment.levels" => cfg.experiment.levels = parse_int_list(line_no, &full, value)?,
            "experiment.deltas" => cfg.experiment.deltas = parse_list(line_no, &full, value)?,
            "experiment.time" => cfg.experiment.time = parse_scalar(line_no, &full, value)?,
            _ => return Err(Error::config(line_no, format!("unknown key {full:?}"))),
        }
    }
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Full resolved state in the input syntax; `parse_config` restores it
    /// bit for bit, and every study drops it next to its artifacts.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        out.push_str("# resolved configuration\n");
        out.push_str(&format!("dimension = {}\n", self.dimension));
        out.push_str(&format!("horizon = {}\n", self.horizon));
        out.push_str(&format!("n_steps = {}\n", self.n_steps));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str("\n[drift]\n");
        out.push_str(&format!("kind = {}\n", self.drift.kind));
        if let Some(a) = self.drift.alpha {
            out.push_str(&format!("alpha = {a}\n"));
        }
        out.push_str(&format!("amplitude = {}\n", self.drift.amplitude));
        out.push_str(&format!("frequency = {}\n", self.drift.frequency));
        out.push_str(&format!("p = {}\n", self.drift.p));
        out.push_str(&format!("q = {}\n", self.drift.q));
        if let Some(c) = &self.drift.components {
            out.push_str(&format!("components = {}\n", join(c)));
        }
        if let Some(r) = self.drift.cutoff_radius {
            out.push_str(&format!("cutoff_radius = {r}\n"));
        }
        if let Some(d) = self.drift.mollify_delta {
            out.push_str(&format!("mollify_delta = {d}\n"));
        }
        out.push_str("\n[datum]\n");
        out.push_str(&format!("kind = {}\n", self.datum.kind));
        out.push_str(&format!("level = {}\n", self.datum.level));
        out.push_str(&format!("center = {}\n", join(&self.datum.center)));
        out.push_str(&format!("radius = {}\n", self.datum.radius));
        out.push_str(&format!("amplitude = {}\n", self.datum.amplitude));
        out.push_str(&format!("frequency = {}\n", self.datum.frequency));
        out.push_str(&format!("normal = {}\n", join(&self.datum.normal)));
        out.push_str(&format!("offset = {}\n", self.datum.offset));
        out.push_str(&format!("wave = {}\n", join(&self.datum.wave)));
        out.push_str("\n[quadrature]\n");
        out.push_str(&format!("half_width = {}\n", self.quadrature.half_width));
        out.push_str(&format!(
            "nodes_per_axis = {}\n",
            self.quadrature.nodes_per_axis
        ));
        out.push_str("\n[experiment]\n");
        out.push_str(&format!("replicates = {}\n", self.experiment.replicates));
        out.push_str(&format!(
            "levels = {}\n",
            self.experiment
                .levels
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ));
        out.push_str(&format!("deltas = {}\n", join(&self.experiment.deltas)));
        out.push_str(&format!("time = {}\n", self.experiment.time));
        out
    }

    /// Integrability bookkeeping for the configured field. Warnings, not
    /// errors: the sharpness study deliberately steps outside the class.
    pub fn exponent_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        let exps = LpsExponents::new(self.dimension, self.drift.p, self.drift.q);
        match exps.satisfied() {
            Ok(true) => {}
            Ok(false) => warnings.push(format!(
                "exponents (p={}, q={}) violate d/p + 2/q < 1 in d={}",
                self.drift.p, self.drift.q, self.dimension
            )),
            Err(e) => warnings.push(format!("exponent check failed: {e}")),
        }
        if self.drift.kind == "rotational_singular" {
            if let Some(alpha) = self.drift.alpha {
                // |b| ~ r^(1-alpha) near the origin, so the p-th power
                // integrates locally iff p (alpha - 1) < d
                if alpha > 1.0 && self.drift.p * (alpha - 1.0) >= self.dimension as f64 {
                    warnings.push(format!(
                        "rotational field with alpha={alpha} lies outside L^{}_loc in d={}",
                        self.drift.p, self.dimension
                    ));
                }
            }
        }
        warnings
    }

    pub fn build_drift(&self) -> Result<DriftField> {
        let d = self.dimension;
        let mut field = match self.drift.kind.as_str() {
            "zero" => DriftField::zero(d)?,
            "constant" => {
                let c = self.drift.components.clone().ok_or_else(|| {
                    Error::invalid("constant drift needs drift.components")
                })?;
                if c.len() != d {
                    return Err(Error::invalid(format!(
                        "drift.components has {} entries for dimension {d}",
                        c.len()
                    )));
                }
                DriftField::constant(c)?
            }
            "linear_skew" => {
                let spin = self
                    .drift
                    .components
                    .clone()
                    .unwrap_or_else(|| vec![1.0]);
                DriftField::linear_skew(spin)?
            }
            "shear" => DriftField::shear(self.drift.amplitude, self.drift.frequency)?,
            "rotational_singular" => {
                let alpha = self
                    .drift
                    .alpha
                    .ok_or_else(|| Error::invalid("rotational_singular needs drift.alpha"))?;
                DriftField::rotational_singular(
                    alpha,
                    LpsExponents::new(d, self.drift.p, self.drift.q),
                )?
            }
            "holder_rotational" => {
                let alpha = self
                    .drift
                    .alpha
                    .ok_or_else(|| Error::invalid("holder_rotational needs drift.alpha"))?;
                DriftField::holder_rotational(alpha)?
            }
            other => {
                return Err(Error::invalid(format!(
                    "unknown drift kind {other:?}; expected zero, constant, linear_skew, \
                     shear, rotational_singular, or holder_rotational"
                )))
            }
        };
        if let Some(r) = self.drift.cutoff_radius {
            field = field.with_cutoff_radius(r)?;
        }
        if let Some(delta) = self.drift.mollify_delta {
            let kernel =
                stochlab_core::MollifierKernel::with_default_resolution(delta)?;
            field = stochlab_core::drift::mollify(&field, &kernel)?;
        }
        Ok(field)
    }

    pub fn build_datum(&self) -> Result<InitialDatum<Real>> {
        let d = self.dimension;
        let need_dim = |v: &Vec<f64>, name: &str| {
            if v.len() != d {
                Err(Error::invalid(format!(
                    "datum.{name} has {} entries for dimension {d}",
                    v.len()
                )))
            } else {
                Ok(())
            }
        };
        Ok(match self.datum.kind.as_str() {
            "constant" => InitialDatum::constant(d, self.datum.level),
            "indicator" => {
                need_dim(&self.datum.normal, "normal")?;
                InitialDatum::indicator_halfspace(self.datum.normal.clone(), self.datum.offset)
            }
            "bump" => {
                need_dim(&self.datum.center, "center")?;
                InitialDatum::radial_bump(
                    self.datum.center.clone(),
                    self.datum.radius,
                    self.datum.amplitude,
                )
            }
            "cosine" => {
                need_dim(&self.datum.wave, "wave")?;
                InitialDatum::continuous_bounded(self.datum.amplitude, self.datum.wave.clone())
            }
            "oscillatory" => {
                need_dim(&self.datum.center, "center")?;
                InitialDatum::oscillatory(
                    self.datum.frequency,
                    self.datum.center.clone(),
                    self.datum.radius,
                    self.datum.amplitude,
                )
            }
            other => {
                return Err(Error::invalid(format!(
                    "unknown datum kind {other:?}; expected constant, indicator, bump, \
                     cosine, or oscillatory"
                )))
            }
        })
    }

    pub fn build_quadrature(&self) -> Result<QuadratureSpec<Real>> {
        let domain = AxisBox::centered_cube(self.quadrature.half_width, self.dimension)?;
        Ok(QuadratureSpec::new(domain, self.quadrature.nodes_per_axis)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_the_contracted_values() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.dimension, 2);
        assert_eq!(cfg.horizon, 1.0);
        assert_eq!(cfg.n_steps, 1024);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn sections_prefix_keys_and_comments_are_skipped() {
        let text = "\
# study setup
seed = 7

[drift]
kind = rotational_singular
alpha = 1.5
p = 3
q = 8

[quadrature]
nodes_per_axis = 65
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.drift.kind, "rotational_singular");
        assert_eq!(cfg.drift.alpha, Some(1.5));
        assert_eq!(cfg.quadrature.nodes_per_axis, 65);
        assert_eq!(cfg.horizon, 1.0);
    }

    #[test]
    fn unknown_keys_carry_their_line_number() {
        let err = parse_config("seed = 1\nwibble = 2\n").unwrap_err();
        match err {
            Error::Config { line, ref message } => {
                assert_eq!(line, 2);
                assert!(message.contains("wibble"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_sections_and_type_errors_are_rejected() {
        match parse_config("[nonsense]\n").unwrap_err() {
            Error::Config { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match parse_config("n_steps = soon\n").unwrap_err() {
            Error::Config { line, ref message } => {
                assert_eq!(line, 1);
                assert!(message.contains("n_steps"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_config("seed 3\n").is_err());
    }

    #[test]
    fn echo_round_trips_exactly() {
        let text = "\
seed = 12
n_steps = 256

[drift]
kind = rotational_singular
alpha = 1.25
p = 4
q = 10
mollify_delta = 0.2

[datum]
kind = indicator
normal = 0.6,-0.8
offset = 0.25

[experiment]
levels = 4,5,6
deltas = 0.4,0.1
";
        let cfg = parse_config(text).unwrap();
        let echoed = parse_config(&cfg.echo()).unwrap();
        assert_eq!(cfg, echoed);
        assert_eq!(cfg.echo(), echoed.echo());
    }

    #[test]
    fn exponent_bookkeeping_flags_bad_claims() {
        let mut cfg = RunConfig::default();
        cfg.drift.kind = "rotational_singular".to_string();
        cfg.drift.alpha = Some(1.5);
        cfg.drift.p = 3.0;
        cfg.drift.q = 8.0;
        assert!(cfg.exponent_warnings().is_empty());

        cfg.drift.p = 2.0;
        cfg.drift.q = 3.0; // 2/2 + 2/3 >= 1
        assert!(!cfg.exponent_warnings().is_empty());

        cfg.drift.p = 5.0;
        cfg.drift.q = 100.0;
        cfg.drift.alpha = Some(1.6); // 5 * 0.6 = 3 >= 2
        assert_eq!(cfg.exponent_warnings().len(), 1);
    }

    #[test]
    fn built_objects_match_the_requested_kinds() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.build_drift().unwrap().kind_id(), "shear");
        cfg.drift.kind = "constant".to_string();
        assert!(cfg.build_drift().is_err()); // components missing
        cfg.drift.components = Some(vec![1.0, 2.0]);
        assert_eq!(cfg.build_drift().unwrap().kind_id(), "constant");

        cfg.datum.kind = "oscillatory".to_string();
        let u0 = cfg.build_datum().unwrap();
        assert!(u0.sup_norm > 0.0);
        cfg.datum.kind = "granite".to_string();
        assert!(cfg.build_datum().is_err());
    }
}
