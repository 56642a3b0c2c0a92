//! Characteristic flows on a shared Brownian path: forward Euler-Maruyama,
//! the time-reversed backward scheme, Jacobian diagnostics, Hoelder
//! quotients, and gradient moment ensembles.
//!
//! Both integrators accumulate the drift and the noise separately and
//! recombine per knot. This is algebraically the textbook scheme, but for
//! zero drift the positions reduce to `start +/- (B_r - B_s)` with no
//! intermediate rounding, which the exactness contracts rely on.

use crate::brownian::BrownianPath;
use crate::drift::{mollify, DriftField, MollifierKernel};
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    Forward,
    Backward,
}

/// One integrated characteristic. `times` and `positions` run in
/// integration order: ascending for forward flows, descending for backward
/// ones, so `positions[0]` is always the start point.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory<T> {
    pub direction: FlowDirection,
    pub start_point: Point<T>,
    pub start_time: T,
    pub end_time: T,
    pub times: Vec<T>,
    pub positions: Vec<Point<T>>,
    pub drift_id: String,
    pub path_seed: u64,
    pub path_level: u32,
}

impl<T: Scalar> FlowTrajectory<T> {
    pub fn terminal_position(&self) -> &[T] {
        self.positions.last().expect("trajectory is never empty")
    }

    /// CSV dump in integration order: header `t,x1,...,xd`.
    pub fn dump_csv(&self) -> String {
        let d = self.start_point.len();
        let mut out = String::from("t");
        for c in 1..=d {
            out.push_str(&format!(",x{c}"));
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.positions) {
            out.push_str(&crate::fmtnum::canonical_f64(t.lossy_f64()));
            for c in 0..d {
                out.push(',');
                out.push_str(&crate::fmtnum::canonical_f64(x[c].lossy_f64()));
            }
            out.push('\n');
        }
        out
    }
}

/// Integration times for `[s, t]`: the endpoints plus every grid knot
/// strictly between them.
pub(crate) fn grid_times<T: Scalar>(w: &BrownianPath<T>, s: T, t: T) -> Result<Vec<T>> {
    let horizon = w.horizon();
    if s < T::zero() || s > horizon {
        return Err(Error::TimeOutOfRange {
            t: s.lossy_f64(),
            horizon: horizon.lossy_f64(),
        });
    }
    if t < s || t > horizon {
        return Err(Error::TimeOutOfRange {
            t: t.lossy_f64(),
            horizon: horizon.lossy_f64(),
        });
    }
    let mut times = vec![s];
    if t == s {
        return Ok(times);
    }
    let n = w.n_steps();
    let dt = horizon / T::of_usize(n);
    // locate the first knot past s without scanning the whole grid
    let mut k = ((s / dt).floor().lossy_f64() as usize).min(n);
    while k > 0 && w.time(k) > s {
        k -= 1;
    }
    while k <= n && w.time(k) <= s {
        k += 1;
    }
    while k <= n && w.time(k) < t {
        times.push(w.time(k));
        k += 1;
    }
    times.push(t);
    Ok(times)
}

fn path_values_at<T: Scalar>(w: &BrownianPath<T>, times: &[T]) -> Result<Vec<Point<T>>> {
    times.iter().map(|&t| Ok(w.value_at(t)?.value)).collect()
}

pub(crate) fn integration_error<T: Scalar>(time: T, e: Error) -> Error {
    match e {
        Error::SingularEvaluation { .. } => Error::Integration {
            time: time.lossy_f64(),
            reason: format!("{e}"),
        },
        other => other,
    }
}

fn check_point_dim<T: Scalar>(b: &DriftField<T>, w: &BrownianPath<T>, x: &[T]) -> Result<()> {
    if b.dimension() != w.dimension() {
        return Err(Error::DimensionMismatch {
            expected: b.dimension(),
            got: w.dimension(),
        });
    }
    if x.len() != b.dimension() {
        return Err(Error::DimensionMismatch {
            expected: b.dimension(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Forward characteristic `X_{s,t}(x)`: left-endpoint Euler-Maruyama
/// `X_{k+1} = X_k + b(t_k, X_k) dt + dB_k` on the path grid inside `[s, t]`.
pub fn forward_flow<T: Scalar>(
    b: &DriftField<T>,
    w: &BrownianPath<T>,
    x: &[T],
    s: T,
    t: T,
) -> Result<FlowTrajectory<T>> {
    check_point_dim(b, w, x)?;
    let times = grid_times(w, s, t)?;
    let noise = path_values_at(w, &times)?;
    let d = x.len();
    let mut drift_part = x.to_vec();
    let mut positions = Vec::with_capacity(times.len());
    positions.push(x.to_vec());
    for j in 1..times.len() {
        let t_prev = times[j - 1];
        let prev = &positions[j - 1];
        let bval = b.evaluate(t_prev, prev).map_err(|e| integration_error(t_prev, e))?;
        let dt = times[j] - t_prev;
        let mut next = vec![T::zero(); d];
        for i in 0..d {
            drift_part[i] += dt * bval[i];
            next[i] = drift_part[i] + (noise[j][i] - noise[0][i]);
        }
        positions.push(next);
    }
    Ok(FlowTrajectory {
        direction: FlowDirection::Forward,
        start_point: x.to_vec(),
        start_time: s,
        end_time: t,
        times,
        positions,
        drift_id: b.kind_id().to_string(),
        path_seed: w.seed(),
        path_level: w.level(),
    })
}

/// Backward characteristic `Y_{s,t}(y)`: the time mirror of the forward
/// scheme, drift at the right endpoint:
/// `Y_k = Y_{k+1} - b(t_{k+1}, Y_{k+1}) dt - (B_{k+1} - B_k)`.
pub fn backward_flow<T: Scalar>(
    b: &DriftField<T>,
    w: &BrownianPath<T>,
    y: &[T],
    s: T,
    t: T,
) -> Result<FlowTrajectory<T>> {
    check_point_dim(b, w, y)?;
    let ascending = grid_times(w, s, t)?;
    let noise = path_values_at(w, &ascending)?;
    let d = y.len();
    let m = ascending.len() - 1;
    let mut drift_part = y.to_vec();
    let mut times = vec![ascending[m]];
    let mut positions = Vec::with_capacity(ascending.len());
    positions.push(y.to_vec());
    for j in (0..m).rev() {
        let t_right = ascending[j + 1];
        let prev = positions.last().unwrap();
        let bval = b
            .evaluate(t_right, prev)
            .map_err(|e| integration_error(t_right, e))?;
        let dt = t_right - ascending[j];
        let mut next = vec![T::zero(); d];
        for i in 0..d {
            drift_part[i] -= dt * bval[i];
            next[i] = drift_part[i] - (noise[m][i] - noise[j][i]);
        }
        positions.push(next);
        times.push(ascending[j]);
    }
    Ok(FlowTrajectory {
        direction: FlowDirection::Backward,
        start_point: y.to_vec(),
        start_time: s,
        end_time: t,
        times,
        positions,
        drift_id: b.kind_id().to_string(),
        path_seed: w.seed(),
        path_level: w.level(),
    })
}

/// `|Y_{0,t}(X_{0,t}(x)) - x|` on the shared path: the inverse-flow defect.
pub fn inverse_consistency<T: Scalar>(
    b: &DriftField<T>,
    w: &BrownianPath<T>,
    x: &[T],
    t: T,
) -> Result<T> {
    let fwd = forward_flow(b, w, x, T::zero(), t)?;
    let bwd = backward_flow(b, w, fwd.terminal_position(), T::zero(), t)?;
    Ok(geom::dist(bwd.terminal_position(), x))
}

/// Central-difference Jacobian of an arbitrary point map.
fn difference_jacobian<T, F>(map: F, x: &[T], h: T) -> Result<(Vec<T>, T)>
where
    T: Scalar,
    F: Fn(&[T]) -> Result<Point<T>>,
{
    let d = x.len();
    let mut matrix = vec![T::zero(); d * d];
    let mut probe = x.to_vec();
    for j in 0..d {
        probe[j] = x[j] + h;
        let plus = map(&probe)?;
        probe[j] = x[j] - h;
        let minus = map(&probe)?;
        probe[j] = x[j];
        for i in 0..d {
            matrix[i * d + j] = (plus[i] - minus[i]) / (h + h);
        }
    }
    let determinant = match d {
        1 => matrix[0],
        2 => matrix[0] * matrix[3] - matrix[1] * matrix[2],
        3 => {
            matrix[0] * (matrix[4] * matrix[8] - matrix[5] * matrix[7])
                - matrix[1] * (matrix[3] * matrix[8] - matrix[5] * matrix[6])
                + matrix[2] * (matrix[3] * matrix[7] - matrix[4] * matrix[6])
        }
        _ => return Err(Error::unsupported("jacobian supports d in 1..=3")),
    };
    Ok((matrix, determinant))
}

/// Flow partial derivatives at a base point, by central differences of the
/// forward flow on one shared path.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianSample<T> {
    pub base_point: Point<T>,
    pub time: T,
    pub dimension: usize,
    /// Row-major d x d matrix of `dX_i / dx_j`.
    pub matrix: Vec<T>,
    pub determinant: T,
}

impl<T: Scalar> JacobianSample<T> {
    pub fn entry(&self, i: usize, j: usize) -> T {
        self.matrix[i * self.dimension + j]
    }

    pub fn frobenius_norm(&self) -> T {
        self.matrix
            .iter()
            .fold(T::zero(), |acc, &m| acc + m * m)
            .sqrt()
    }
}

pub fn jacobian<T: Scalar>(
    b: &DriftField<T>,
    w: &BrownianPath<T>,
    x: &[T],
    t: T,
    h: T,
) -> Result<JacobianSample<T>> {
    check_point_dim(b, w, x)?;
    let map = |p: &[T]| Ok(forward_flow(b, w, p, T::zero(), t)?.terminal_position().to_vec());
    let (matrix, determinant) = difference_jacobian(map, x, h)?;
    Ok(JacobianSample {
        base_point: x.to_vec(),
        time: t,
        dimension: x.len(),
        matrix,
        determinant,
    })
}

/// Grid and differencing choices for gradient-moment ensembles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentProtocol<T> {
    pub n_steps: usize,
    pub diff_step: T,
    pub kernel_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate<T> {
    pub value: T,
    pub replicates_used: usize,
    pub replicates_failed: usize,
}

/// Monte Carlo estimate of `E |grad Y^delta_{0,t}(x)|^pmom` (Frobenius
/// norm of the backward-flow difference Jacobian under drift mollified at
/// `delta`). One path per seed; replicates that hit an integration error
/// are dropped and counted. The reduction runs in seed order regardless of
/// how callers schedule the work.
pub fn gradient_moment_estimate<T: Scalar>(
    b: &DriftField<T>,
    seeds: &[u64],
    x: &[T],
    t: T,
    pmom: T,
    delta: T,
    protocol: &MomentProtocol<T>,
) -> Result<MomentEstimate<T>> {
    if pmom < T::one() {
        return Err(Error::unsupported("moment order must be at least 1"));
    }
    if seeds.len() < 2 {
        return Err(Error::unsupported("moment ensembles need at least 2 seeds"));
    }
    let kernel = MollifierKernel::new(delta, protocol.kernel_points)?;
    let smoothed = mollify(b, &kernel)?;
    let mut acc = T::zero();
    let mut used = 0usize;
    let mut failed = 0usize;
    for &seed in seeds {
        let sample = (|| -> Result<T> {
            let w = BrownianPath::sample(seed, b.dimension(), t, protocol.n_steps)?;
            let map = |p: &[T]| {
                Ok(backward_flow(&smoothed, &w, p, T::zero(), t)?
                    .terminal_position()
                    .to_vec())
            };
            let (matrix, _) = difference_jacobian(map, x, protocol.diff_step)?;
            let frob = matrix
                .iter()
                .fold(T::zero(), |a, &m| a + m * m)
                .sqrt();
            Ok(frob.powf(pmom))
        })();
        match sample {
            Ok(v) => {
                acc += v;
                used += 1;
            }
            Err(Error::Integration { .. }) | Err(Error::SingularEvaluation { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::EmptyEnsemble { failed });
    }
    Ok(MomentEstimate {
        value: acc / T::of_usize(used),
        replicates_used: used,
        replicates_failed: failed,
    })
}

/// Max pairwise `|X(x) - X(x')| / |x - x'|^alpha` over a point cloud,
/// all trajectories on the same path.
pub fn holder_quotient<T: Scalar>(
    b: &DriftField<T>,
    w: &BrownianPath<T>,
    points: &[Point<T>],
    t: T,
    alpha: T,
) -> Result<T> {
    if points.len() < 2 {
        return Err(Error::unsupported("need at least 2 points for a quotient"));
    }
    if alpha <= T::zero() || alpha >= T::one() {
        return Err(Error::unsupported("holder exponent must lie in (0, 1)"));
    }
    let images: Vec<Point<T>> = points
        .iter()
        .map(|x| Ok(forward_flow(b, w, x, T::zero(), t)?.terminal_position().to_vec()))
        .collect::<Result<_>>()?;
    let mut best = T::zero();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let gap = geom::dist(&points[i], &points[j]);
            if gap == T::zero() {
                continue;
            }
            let spread = geom::dist(&images[i], &images[j]);
            best = best.max(spread / gap.powf(alpha));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::LpsExponents;
    use crate::rng;

    fn rotation() -> DriftField<f64> {
        DriftField::linear_skew(vec![1.0]).unwrap()
    }

    fn singular_swirl() -> DriftField<f64> {
        DriftField::rotational_singular(1.5, LpsExponents::new(2, 3.0, 8.0)).unwrap()
    }

    #[test]
    fn zero_drift_forward_is_the_noise_translation_bitwise() {
        let b = DriftField::<f64>::zero(2).unwrap();
        let w = BrownianPath::sample(5, 2, 1.0, 16).unwrap();
        let x = [0.3, -0.8];
        let traj = forward_flow(&b, &w, &x, 0.0, 1.0).unwrap();
        for (j, time) in traj.times.iter().enumerate() {
            let noise = w.value_at(*time).unwrap().value;
            let start_noise = w.value_at(0.0).unwrap().value;
            for i in 0..2 {
                let expect = x[i] + (noise[i] - start_noise[i]);
                assert_eq!(traj.positions[j][i].to_bits(), expect.to_bits());
            }
        }
    }

    #[test]
    fn zero_drift_backward_is_the_reverse_translation_bitwise() {
        let b = DriftField::<f64>::zero(2).unwrap();
        let w = BrownianPath::sample(6, 2, 1.0, 16).unwrap();
        let y = [1.5, 0.25];
        let traj = backward_flow(&b, &w, &y, 0.0, 1.0).unwrap();
        let b_end = w.value_at(1.0).unwrap().value;
        for (j, time) in traj.times.iter().enumerate() {
            let noise = w.value_at(*time).unwrap().value;
            for i in 0..2 {
                let expect = y[i] - (b_end[i] - noise[i]);
                assert_eq!(traj.positions[j][i].to_bits(), expect.to_bits());
            }
        }
        assert_eq!(traj.times[0], 1.0);
        assert_eq!(*traj.times.last().unwrap(), 0.0);
    }

    #[test]
    fn constant_drift_flows_hit_the_closed_form_on_dyadic_grids() {
        // dyadic start, rate, and grid: the drift accumulator is exact, so
        // the scheme reproduces x + c(t-s) + (B_t - B_s) bit for bit.
        let c = vec![0.5f64, -0.25];
        let b = DriftField::constant(c.clone()).unwrap();
        let w = BrownianPath::sample(9, 2, 1.0, 8).unwrap();
        let x = [0.25, -1.5];
        let fwd = forward_flow(&b, &w, &x, 0.0, 1.0).unwrap();
        let b1 = w.value_at(1.0).unwrap().value;
        for i in 0..2 {
            let expect = (x[i] + c[i]) + (b1[i] - 0.0);
            assert_eq!(fwd.terminal_position()[i].to_bits(), expect.to_bits());
        }
        let y = [2.0, 0.125];
        let bwd = backward_flow(&b, &w, &y, 0.0, 1.0).unwrap();
        for i in 0..2 {
            let expect = (y[i] - c[i]) - (b1[i] - 0.0);
            assert_eq!(bwd.terminal_position()[i].to_bits(), expect.to_bits());
        }
    }

    #[test]
    fn flows_between_interior_grid_times_stay_exact() {
        let b = DriftField::<f64>::zero(1).unwrap();
        let w = BrownianPath::sample(21, 1, 2.0, 32).unwrap();
        let s = w.time(4);
        let t = w.time(20);
        let traj = forward_flow(&b, &w, &[0.7], s, t).unwrap();
        let expect = 0.7 + (w.knot(20)[0] - w.knot(4)[0]);
        assert_eq!(traj.terminal_position()[0].to_bits(), expect.to_bits());
        assert_eq!(traj.times.len(), 17);
    }

    #[test]
    fn off_grid_endpoints_use_interpolated_noise() {
        let b = DriftField::<f64>::zero(1).unwrap();
        let w = BrownianPath::sample(22, 1, 1.0, 8).unwrap();
        let t = 0.3; // not a knot of an 8-step unit-horizon grid
        let traj = forward_flow(&b, &w, &[0.0], 0.0, t).unwrap();
        let expect = w.value_at(t).unwrap().value[0];
        assert_eq!(traj.terminal_position()[0].to_bits(), expect.to_bits());
    }

    #[test]
    fn degenerate_interval_is_a_single_point() {
        let b = rotation();
        let w = BrownianPath::sample(1, 2, 1.0, 8).unwrap();
        let traj = forward_flow(&b, &w, &[1.0, 0.0], 0.5, 0.5).unwrap();
        assert_eq!(traj.positions.len(), 1);
        assert_eq!(traj.terminal_position(), &[1.0, 0.0]);
    }

    #[test]
    fn rotation_flow_matches_the_matrix_exponential_oracle() {
        // Strong order 1: terminal error against the exact OU-style
        // solution, evaluated on a 128x bridge-refined common path, is
        // bounded by C dt at every level.
        let b = rotation();
        let base = BrownianPath::sample(33, 2, 1.0, 64).unwrap();
        let x = [0.5, 0.3];
        let mut fine = base.clone();
        for _ in 0..9 {
            fine = fine.refine();
        }
        // oracle: X_t = e^{At} x + sum e^{A(t - tau_k)} (B_{k+1} - B_k)
        let rot = |theta: f64, v: [f64; 2]| {
            [
                theta.cos() * v[0] - theta.sin() * v[1],
                theta.sin() * v[0] + theta.cos() * v[1],
            ]
        };
        let n_fine = fine.n_steps();
        let mut oracle = rot(1.0, x);
        for k in 0..n_fine {
            let tau = fine.time(k);
            let dw = fine.increment(k);
            let contrib = rot(1.0 - tau, [dw[0], dw[1]]);
            oracle[0] += contrib[0];
            oracle[1] += contrib[1];
        }
        let mut path = base;
        for level in 0..3 {
            let dt = 1.0 / path.n_steps() as f64;
            let got = forward_flow(&b, &path, &x, 0.0, 1.0).unwrap();
            let err = ((got.terminal_position()[0] - oracle[0]).powi(2)
                + (got.terminal_position()[1] - oracle[1]).powi(2))
            .sqrt();
            assert!(err <= 3.0 * dt, "level {level}: err {err} dt {dt}");
            path = path.refine();
        }
    }

    #[test]
    fn inverse_consistency_for_zero_drift_is_one_rounding() {
        let b = DriftField::<f64>::zero(2).unwrap();
        let w = BrownianPath::sample(40, 2, 1.0, 64).unwrap();
        // at the origin the translation cancels without rounding at all
        assert_eq!(inverse_consistency(&b, &w, &[0.0, 0.0], 1.0).unwrap(), 0.0);
        // generic points see exactly the rounding of one addition
        let defect = inverse_consistency(&b, &w, &[0.3, -1.7], 1.0).unwrap();
        assert!(defect <= 1e-15, "defect {defect}");
    }

    #[test]
    fn inverse_consistency_for_constant_drift_is_rounding_level() {
        let b = DriftField::constant(vec![0.5, -0.25]).unwrap();
        let w = BrownianPath::sample(41, 2, 1.0, 64).unwrap();
        let defect = inverse_consistency(&b, &w, &[0.25, 0.75], 1.0).unwrap();
        assert!(defect <= 1e-14, "defect {defect}");
    }

    #[test]
    fn inverse_defect_shrinks_by_at_least_4x_from_64_to_1024_steps() {
        let b = rotation();
        let coarse = BrownianPath::sample(42, 2, 1.0, 64).unwrap();
        let mut fine = coarse.clone();
        for _ in 0..4 {
            fine = fine.refine();
        }
        let x = [0.8, -0.2];
        let e_coarse = inverse_consistency(&b, &coarse, &x, 1.0).unwrap();
        let e_fine = inverse_consistency(&b, &fine, &x, 1.0).unwrap();
        assert!(
            e_fine * 4.0 <= e_coarse,
            "coarse {e_coarse} fine {e_fine}"
        );
    }

    #[test]
    fn semigroup_composition_holds_on_a_common_grid() {
        let b = rotation();
        let w = BrownianPath::sample(50, 2, 1.0, 128).unwrap();
        let x = [0.4, 0.1];
        let s = w.time(64);
        let u = w.time(128);
        let first = forward_flow(&b, &w, &x, 0.0, s).unwrap();
        let second = forward_flow(&b, &w, first.terminal_position(), s, u).unwrap();
        let direct = forward_flow(&b, &w, &x, 0.0, u).unwrap();
        let gap = geom::dist(second.terminal_position(), direct.terminal_position());
        assert!(gap <= 1e-13, "gap {gap}");
    }

    #[test]
    fn zero_drift_jacobian_is_the_identity() {
        let b = DriftField::<f64>::zero(2).unwrap();
        let w = BrownianPath::sample(60, 2, 1.0, 32).unwrap();
        let sample = jacobian(&b, &w, &[0.25, 0.5], 1.0, 0.0009765625).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (sample.entry(i, j) - expect).abs() <= 1e-12,
                    "entry {i}{j} = {}",
                    sample.entry(i, j)
                );
            }
        }
        assert!((sample.determinant - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn skew_rotation_preserves_volume_to_trace_order() {
        // det(I + dt A) = 1 + dt^2 per step; at n = 2^18 over T = 1/4 the
        // accumulated excess T dt stays below 1e-6.
        let b = rotation();
        let w = BrownianPath::sample(61, 2, 0.25, 1 << 18).unwrap();
        let sample = jacobian(&b, &w, &[0.5, -0.3], 0.25, 1e-4).unwrap();
        assert!(
            (sample.determinant - 1.0).abs() <= 1e-6,
            "det {}",
            sample.determinant
        );
    }

    #[test]
    fn shear_volume_defect_shrinks_under_refinement() {
        let b = DriftField::<f64>::shear(1.0, 2.0).unwrap();
        let coarse = BrownianPath::sample(62, 2, 1.0, 1000).unwrap();
        let fine = coarse.refine().refine();
        let x = [0.3, 0.7];
        let d_coarse = (jacobian(&b, &coarse, &x, 1.0, 1e-4).unwrap().determinant - 1.0).abs();
        let d_fine = (jacobian(&b, &fine, &x, 1.0, 1e-4).unwrap().determinant - 1.0).abs();
        assert!(d_coarse <= 1e-4, "coarse defect {d_coarse}");
        assert!(d_fine <= d_coarse + 1e-12, "fine {d_fine} coarse {d_coarse}");
    }

    #[test]
    fn gradient_moment_of_zero_drift_is_unity_in_1d() {
        let b = DriftField::<f64>::zero(1).unwrap();
        let seeds: Vec<u64> = (0..4).map(|i| rng::derive_seed(70, i)).collect();
        let protocol = MomentProtocol {
            n_steps: 16,
            diff_step: 0.0009765625,
            kernel_points: 9,
        };
        let est =
            gradient_moment_estimate(&b, &seeds, &[0.5], 1.0, 2.7, 0.1, &protocol).unwrap();
        assert!((est.value - 1.0).abs() <= 1e-12, "value {}", est.value);
        assert_eq!(est.replicates_used, 4);
        assert_eq!(est.replicates_failed, 0);
    }

    #[test]
    fn gradient_moment_of_a_rotation_is_the_dimension() {
        // grad Y is a near-rotation: squared Frobenius norm d = 2.
        let b = rotation();
        let seeds: Vec<u64> = (0..4).map(|i| rng::derive_seed(71, i)).collect();
        let protocol = MomentProtocol {
            n_steps: 2048,
            diff_step: 1e-4,
            kernel_points: 9,
        };
        let est =
            gradient_moment_estimate(&b, &seeds, &[0.4, 0.2], 0.5, 2.0, 0.1, &protocol).unwrap();
        assert!((est.value - 2.0).abs() <= 1e-3, "value {}", est.value);
    }

    #[test]
    fn holder_quotient_of_a_translation_is_the_gap_power() {
        let b = DriftField::<f64>::zero(2).unwrap();
        let w = BrownianPath::sample(80, 2, 1.0, 16).unwrap();
        let points = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]];
        let alpha = 0.7;
        let got = holder_quotient(&b, &w, &points, 1.0, alpha).unwrap();
        let expect = [1.0f64, 2.0, (5.0f64).sqrt()]
            .iter()
            .map(|g| g.powf(1.0 - alpha))
            .fold(0.0f64, f64::max);
        assert!((got - expect).abs() <= 1e-12, "got {got} expect {expect}");
    }

    #[test]
    fn rotation_holder_quotient_is_bounded_by_the_isometry_envelope() {
        let b = rotation();
        let w = BrownianPath::sample(81, 2, 1.0, 1024).unwrap();
        let points: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                vec![
                    rng::uniform_half_open(rng::mix(&[82, i, 0])) * 2.0 - 1.0,
                    rng::uniform_half_open(rng::mix(&[82, i, 1])) * 2.0 - 1.0,
                ]
            })
            .collect();
        let alpha = 0.7;
        let got = holder_quotient(&b, &w, &points, 1.0, alpha).unwrap();
        let mut envelope = 0.0f64;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                envelope = envelope.max(geom::dist(&points[i], &points[j]).powf(1.0 - alpha));
            }
        }
        // Euler expands an isometry by at most (1 + dt^2)^(n/2) ~ 1 + T dt / 2
        assert!(got <= envelope * (1.0 + 1e-3), "got {got} envelope {envelope}");
    }

    #[test]
    fn singular_swirl_quotient_is_stable_under_path_refinement() {
        let b = singular_swirl();
        let points: Vec<Vec<f64>> = (0..16)
            .map(|i| {
                vec![
                    rng::uniform_half_open(rng::mix(&[83, i, 0])) * 2.0 - 1.0,
                    rng::uniform_half_open(rng::mix(&[83, i, 1])) * 2.0 - 1.0,
                ]
            })
            .collect();
        let mut w = BrownianPath::sample(84, 2, 1.0, 256).unwrap();
        let q0 = holder_quotient(&b, &w, &points, 1.0, 0.9).unwrap();
        for level in 1..=2 {
            w = w.refine();
            let q = holder_quotient(&b, &w, &points, 1.0, 0.9).unwrap();
            assert!(
                (q - q0).abs() <= 0.5 * q0,
                "level {level}: q {q} vs q0 {q0}"
            );
        }
    }

    #[test]
    fn trajectory_csv_has_time_and_coordinates() {
        let b = rotation();
        let w = BrownianPath::sample(90, 2, 1.0, 4).unwrap();
        let traj = forward_flow(&b, &w, &[1.0, 0.0], 0.0, 1.0).unwrap();
        let csv = traj.dump_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x1,x2"));
        assert_eq!(lines.count(), 5);
    }

    #[test]
    fn out_of_range_windows_error() {
        let b = rotation();
        let w = BrownianPath::sample(91, 2, 1.0, 4).unwrap();
        assert!(forward_flow(&b, &w, &[0.0, 0.0], 0.5, 1.5).is_err());
        assert!(forward_flow(&b, &w, &[0.0, 0.0], 0.8, 0.2).is_err());
    }
}
