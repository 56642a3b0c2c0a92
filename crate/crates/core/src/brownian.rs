//! Deterministic Brownian paths with bridge refinement.
//!
//! Knot values are the primary data, not increments: refinement must leave
//! coarse-grid values bit-identical, and resumming increments would reorder
//! floating-point additions. Increments are derived views.

use crate::error::{Error, Result};
use crate::fmtnum;
use crate::geom::Point;
use crate::rng;
use crate::scalar::Scalar;

/// One Brownian trajectory on a uniform grid over `[0, horizon]`.
///
/// Fully determined by `(seed, dimension, horizon, n_steps, level)`; every
/// Gaussian draw is keyed on `(seed, level, knot index, component)`, so
/// construction order and thread count never matter.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath<T> {
    dimension: usize,
    horizon: T,
    n_steps: usize,
    /// Knot values, row-major: `values[k * dimension + c]` is component `c`
    /// at time `time(k)`. Row 0 is the zero vector.
    values: Vec<T>,
    seed: u64,
    level: u32,
}

/// Path value at a query time; `interpolated` is false exactly when the
/// time hit a grid knot.
#[derive(Debug, Clone, PartialEq)]
pub struct PathValue<T> {
    pub value: Point<T>,
    pub interpolated: bool,
}

impl<T: Scalar> BrownianPath<T> {
    /// Samples a fresh path: i.i.d. centered Gaussian increments with
    /// variance `horizon / n_steps` per component.
    pub fn sample(seed: u64, dimension: usize, horizon: T, n_steps: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::unsupported("path dimension must be at least 1"));
        }
        if n_steps == 0 {
            return Err(Error::unsupported("path needs at least one step"));
        }
        if horizon <= T::zero() {
            return Err(Error::unsupported("horizon must be positive"));
        }
        let sqrt_dt = (horizon / T::of_usize(n_steps)).sqrt();
        let mut values = vec![T::zero(); (n_steps + 1) * dimension];
        for k in 1..=n_steps {
            for c in 0..dimension {
                let z = T::of(rng::standard_normal(&[seed, 0, k as u64, c as u64]));
                values[k * dimension + c] = values[(k - 1) * dimension + c] + sqrt_dt * z;
            }
        }
        Ok(BrownianPath {
            dimension,
            horizon,
            n_steps,
            values,
            seed,
            level: 0,
        })
    }

    /// All-zero path on the same grid layout: the noise-off regime.
    pub fn zeroed(dimension: usize, horizon: T, n_steps: usize) -> Result<Self> {
        let mut p = Self::sample(0, dimension, horizon, n_steps)?;
        p.values.iter_mut().for_each(|v| *v = T::zero());
        Ok(p)
    }

    /// Doubles the grid by Brownian-bridge midpoints. Existing knots keep
    /// their exact values; each midpoint draws
    /// `(left + right)/2 + sqrt(dt/4) * z` with `z` keyed on
    /// `(seed, level + 1, odd knot index, component)`.
    pub fn refine(&self) -> Self {
        let n2 = self.n_steps * 2;
        let d = self.dimension;
        let level = self.level + 1;
        let quarter_dt = self.horizon / T::of_usize(self.n_steps) * T::of(0.25);
        let half_sd = quarter_dt.sqrt();
        let mut values = vec![T::zero(); (n2 + 1) * d];
        for k in 0..=self.n_steps {
            for c in 0..d {
                values[2 * k * d + c] = self.values[k * d + c];
            }
        }
        for k in 0..self.n_steps {
            let j = 2 * k + 1;
            for c in 0..d {
                let z = T::of(rng::standard_normal(&[
                    self.seed,
                    level as u64,
                    j as u64,
                    c as u64,
                ]));
                let left = self.values[k * d + c];
                let right = self.values[(k + 1) * d + c];
                values[j * d + c] = (left + right) * T::of(0.5) + half_sd * z;
            }
        }
        BrownianPath {
            dimension: d,
            horizon: self.horizon,
            n_steps: n2,
            values,
            seed: self.seed,
            level,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Grid time of knot `k`; the one formula every consumer must share so
    /// equality checks against knot times are exact.
    pub fn time(&self, k: usize) -> T {
        self.horizon * (T::of_usize(k) / T::of_usize(self.n_steps))
    }

    /// Knot value as a slice, no copy.
    pub fn knot(&self, k: usize) -> &[T] {
        &self.values[k * self.dimension..(k + 1) * self.dimension]
    }

    /// Index of the knot at time `t`, if `t` lies exactly on the grid.
    pub fn knot_index(&self, t: T) -> Option<usize> {
        let dt = self.horizon / T::of_usize(self.n_steps);
        let k = (t / dt).round().lossy_f64() as i64;
        if k < 0 || k > self.n_steps as i64 {
            return None;
        }
        let k = k as usize;
        (self.time(k) == t).then_some(k)
    }

    /// Exact at grid times; linear interpolation in between (flagged).
    pub fn value_at(&self, t: T) -> Result<PathValue<T>> {
        if t < T::zero() || t > self.horizon {
            return Err(Error::TimeOutOfRange {
                t: t.lossy_f64(),
                horizon: self.horizon.lossy_f64(),
            });
        }
        if let Some(k) = self.knot_index(t) {
            return Ok(PathValue {
                value: self.knot(k).to_vec(),
                interpolated: false,
            });
        }
        let dt = self.horizon / T::of_usize(self.n_steps);
        let k = (t / dt).floor().lossy_f64() as usize;
        let k = k.min(self.n_steps - 1);
        let t0 = self.time(k);
        let t1 = self.time(k + 1);
        let theta = (t - t0) / (t1 - t0);
        let value = self
            .knot(k)
            .iter()
            .zip(self.knot(k + 1))
            .map(|(&a, &b)| a + theta * (b - a))
            .collect();
        Ok(PathValue {
            value,
            interpolated: true,
        })
    }

    /// Increment over grid cell `k`, derived from knot values.
    pub fn increment(&self, k: usize) -> Point<T> {
        let d = self.dimension;
        (0..d)
            .map(|c| self.values[(k + 1) * d + c] - self.values[k * d + c])
            .collect()
    }

    pub fn increments(&self) -> Vec<Point<T>> {
        (0..self.n_steps).map(|k| self.increment(k)).collect()
    }

    /// CSV dump: header `t,B1,...,Bd`, one row per knot, canonical float
    /// formatting (17 significant digits, round-trip exact).
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("t");
        for c in 1..=self.dimension {
            out.push_str(&format!(",B{c}"));
        }
        out.push('\n');
        for k in 0..=self.n_steps {
            out.push_str(&fmtnum::canonical_f64(self.time(k).lossy_f64()));
            for c in 0..self.dimension {
                out.push(',');
                out.push_str(&fmtnum::canonical_f64(
                    self.values[k * self.dimension + c].lossy_f64(),
                ));
            }
            out.push('\n');
        }
        out
    }

    /// Inverse of [`dump_csv`]. The loaded path replays the stored values;
    /// it carries seed 0 and level 0, so refining it draws from that key
    /// space rather than the original sampler's.
    pub fn load_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::PathFormat("empty input".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(Error::PathFormat(format!("unexpected header `{header}`")));
        }
        for (i, col) in cols[1..].iter().enumerate() {
            if *col != format!("B{}", i + 1) {
                return Err(Error::PathFormat(format!("unexpected column `{col}`")));
            }
        }
        let dimension = cols.len() - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dimension + 1 {
                return Err(Error::PathFormat(format!(
                    "row {}: expected {} fields, got {}",
                    lineno + 2,
                    dimension + 1,
                    fields.len()
                )));
            }
            let mut parsed = fields.iter().map(|f| {
                fmtnum::parse_f64(f)
                    .ok_or_else(|| Error::PathFormat(format!("row {}: bad number `{f}`", lineno + 2)))
            });
            times.push(T::of(parsed.next().unwrap()?));
            for p in parsed {
                values.push(T::of(p?));
            }
        }
        if times.len() < 2 {
            return Err(Error::PathFormat("need at least two knots".into()));
        }
        let horizon = *times.last().unwrap();
        if horizon <= T::zero() {
            return Err(Error::PathFormat("final time must be positive".into()));
        }
        Ok(BrownianPath {
            dimension,
            horizon,
            n_steps: times.len() - 1,
            values,
            seed: 0,
            level: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sampling_is_bit_identical() {
        let a = BrownianPath::<f64>::sample(7, 2, 1.0, 8).unwrap();
        let b = BrownianPath::<f64>::sample(7, 2, 1.0, 8).unwrap();
        assert_eq!(a, b);
        let c = BrownianPath::<f64>::sample(8, 2, 1.0, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn starts_at_zero_and_ends_at_increment_sum() {
        let p = BrownianPath::<f64>::sample(3, 3, 2.0, 16).unwrap();
        assert_eq!(p.value_at(0.0).unwrap().value, vec![0.0; 3]);
        let total: Vec<f64> = (0..3)
            .map(|c| p.increments().iter().map(|dw| dw[c]).sum())
            .collect();
        let terminal = p.value_at(2.0).unwrap();
        assert!(!terminal.interpolated);
        for c in 0..3 {
            assert!((terminal.value[c] - total[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_query_interpolates_linearly() {
        let p = BrownianPath::<f64>::sample(11, 2, 1.0, 4).unwrap();
        let mid = 0.5 * (p.time(1) + p.time(2));
        let got = p.value_at(mid).unwrap();
        assert!(got.interpolated);
        for c in 0..2 {
            let expect = 0.5 * (p.knot(1)[c] + p.knot(2)[c]);
            assert!((got.value[c] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_range_times_error() {
        let p = BrownianPath::<f64>::sample(1, 1, 1.0, 4).unwrap();
        assert!(matches!(
            p.value_at(-0.1),
            Err(Error::TimeOutOfRange { .. })
        ));
        assert!(matches!(p.value_at(1.5), Err(Error::TimeOutOfRange { .. })));
    }

    #[test]
    fn refine_preserves_coarse_knots_bitwise() {
        let p = BrownianPath::<f64>::sample(42, 2, 1.0, 8).unwrap();
        let fine = p.refine().refine();
        for k in 0..=8 {
            assert_eq!(p.knot(k), fine.knot(4 * k), "knot {k}");
        }
        assert_eq!(fine.level(), 2);
        assert_eq!(fine.n_steps(), 32);
    }

    #[test]
    fn terminal_statistics_match_the_law() {
        // 10^4 paths: per-component terminal mean within 4*sqrt(T/n_paths),
        // variance within 10% of T.
        let n_paths = 10_000u64;
        let horizon = 1.0;
        let mut sum = [0.0f64; 2];
        let mut sumsq = [0.0f64; 2];
        for s in 0..n_paths {
            let p = BrownianPath::<f64>::sample(rng::derive_seed(500, s), 2, horizon, 4).unwrap();
            let end = p.knot(4);
            for c in 0..2 {
                sum[c] += end[c];
                sumsq[c] += end[c] * end[c];
            }
        }
        for c in 0..2 {
            let mean = sum[c] / n_paths as f64;
            let var = sumsq[c] / n_paths as f64 - mean * mean;
            assert!(mean.abs() < 4.0 * (horizon / n_paths as f64).sqrt(), "mean {mean}");
            assert!((var - horizon).abs() < 0.1 * horizon, "var {var}");
        }
    }

    #[test]
    fn increment_variance_matches_dt() {
        let n_paths = 2_000u64;
        let n_steps = 8;
        let dt = 1.0 / n_steps as f64;
        let mut sumsq = 0.0;
        let mut count = 0usize;
        for s in 0..n_paths {
            let p = BrownianPath::<f64>::sample(rng::derive_seed(77, s), 1, 1.0, n_steps).unwrap();
            for dw in p.increments() {
                sumsq += dw[0] * dw[0];
                count += 1;
            }
        }
        let var = sumsq / count as f64;
        assert!((var - dt).abs() < 0.1 * dt, "var {var} dt {dt}");
    }

    #[test]
    fn bridge_midpoints_have_quarter_cell_variance() {
        // Midpoint minus neighbor average is N(0, dt/4).
        let n_paths = 10_000u64;
        let dt = 1.0;
        let mut sumsq = 0.0;
        for s in 0..n_paths {
            let p = BrownianPath::<f64>::sample(rng::derive_seed(9, s), 1, dt, 1).unwrap();
            let f = p.refine();
            let centered = f.knot(1)[0] - 0.5 * (p.knot(0)[0] + p.knot(1)[0]);
            sumsq += centered * centered;
        }
        let var = sumsq / n_paths as f64;
        assert!((var - dt / 4.0).abs() < 0.1 * dt / 4.0, "var {var}");
    }

    #[test]
    fn horizon_scaling_matches_diffusive_law() {
        // Quadrupling T doubles the terminal standard deviation.
        let n_paths = 10_000u64;
        let mut var = [0.0f64; 2];
        for (i, horizon) in [1.0, 4.0].into_iter().enumerate() {
            let mut sumsq = 0.0;
            for s in 0..n_paths {
                let p =
                    BrownianPath::<f64>::sample(rng::derive_seed(31 + i as u64, s), 1, horizon, 8)
                        .unwrap();
                sumsq += p.knot(8)[0] * p.knot(8)[0];
            }
            var[i] = sumsq / n_paths as f64;
        }
        let ratio = var[1] / var[0];
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = BrownianPath::<f64>::sample(19, 2, 1.0, 8).unwrap();
        let text = p.dump_csv();
        assert!(text.starts_with("t,B1,B2\n"));
        let q = BrownianPath::<f64>::load_csv(&text).unwrap();
        assert_eq!(q.dimension(), 2);
        assert_eq!(q.n_steps(), 8);
        for k in 0..=8 {
            assert_eq!(p.knot(k), q.knot(k));
        }
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(BrownianPath::<f64>::load_csv("").is_err());
        assert!(BrownianPath::<f64>::load_csv("x,B1\n0,0\n1,1\n").is_err());
        assert!(BrownianPath::<f64>::load_csv("t,B1\n0,zero\n1,1\n").is_err());
        assert!(BrownianPath::<f64>::load_csv("t,B1\n0,0,9\n").is_err());
    }

    #[test]
    fn zeroed_path_is_identically_zero() {
        let p = BrownianPath::<f64>::zeroed(2, 1.0, 8).unwrap();
        for k in 0..=8 {
            assert_eq!(p.knot(k), &[0.0, 0.0]);
        }
    }

    proptest! {
        #[test]
        fn any_refinement_chain_preserves_knots(
            seed in 0u64..1_000_000,
            n in 1usize..32,
            depth in 1u32..4,
        ) {
            let base = BrownianPath::<f64>::sample(seed, 2, 1.0, n).unwrap();
            let mut fine = base.clone();
            for _ in 0..depth {
                fine = fine.refine();
            }
            let stride = 1usize << depth;
            for k in 0..=n {
                prop_assert_eq!(base.knot(k), fine.knot(stride * k));
            }
        }

        #[test]
        fn grid_times_are_recognized_exactly(
            seed in 0u64..1000,
            n in 1usize..64,
        ) {
            let p = BrownianPath::<f64>::sample(seed, 1, 1.0, n).unwrap();
            for k in 0..=n {
                let t = p.time(k);
                prop_assert_eq!(p.knot_index(t), Some(k));
                let v = p.value_at(t).unwrap();
                prop_assert!(!v.interpolated);
                prop_assert_eq!(&v.value[..], p.knot(k));
            }
        }
    }
}
