//! Weak solutions of the stochastic continuity equation with divergence-free
//! drift: the backward-flow representation, the shifted-field auxiliary
//! construction, and verification against the weak formulation with
//! Stratonovich midpoint quadrature.

use crate::brownian::BrownianPath;
use crate::drift::DriftField;
use crate::error::{Error, Result};
use crate::flow;
use crate::geom::{self, AxisBox, Point, TrapezoidGrid};
use crate::scalar::Scalar;
use std::sync::OnceLock;

/// Peak slope of the unit bump profile `exp(-1/(1-s))` along a radius,
/// i.e. `max_s 2 sqrt(s) e^{-1/(1-s)} / (1-s)^2`; scanned once.
fn bump_slope_max() -> f64 {
    static MAX: OnceLock<f64> = OnceLock::new();
    *MAX.get_or_init(|| {
        let n = 1 << 16;
        (1..n)
            .map(|i| {
                let s = i as f64 / n as f64;
                2.0 * s.sqrt() * (-1.0 / (1.0 - s)).exp() / ((1.0 - s) * (1.0 - s))
            })
            .fold(0.0, f64::max)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatumKind<T: Scalar> {
    Constant {
        level: T,
    },
    /// 1 on `normal . x > offset`, 0 elsewhere.
    IndicatorHalfspace {
        normal: Point<T>,
        offset: T,
    },
    /// `amplitude exp(-1/(1 - |x-center|^2/radius^2))` inside the ball.
    RadialBump {
        center: Point<T>,
        radius: T,
        amplitude: T,
    },
    /// `amplitude cos(wave . x)`: bounded, globally Lipschitz.
    ContinuousBounded {
        amplitude: T,
        wave: Point<T>,
    },
    /// `sin(frequency x_1)` times a bump window: the oscillatory sequence
    /// member with weak-star limit zero.
    Oscillatory {
        frequency: T,
        center: Point<T>,
        radius: T,
        amplitude: T,
    },
    /// `scale u_base + shift`: builds offset and rescaled sequence members.
    Affine {
        base: Box<InitialDatum<T>>,
        scale: T,
        shift: T,
    },
}

/// Bounded initial datum with a certified sup bound.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDatum<T: Scalar> {
    kind: DatumKind<T>,
    dimension: usize,
    /// Upper bound for `|u_0|`, attained for every catalog kind except the
    /// oscillatory window, where it is only an envelope.
    pub sup_norm: T,
}

impl<T: Scalar> InitialDatum<T> {
    pub fn constant(dimension: usize, level: T) -> Self {
        InitialDatum {
            kind: DatumKind::Constant { level },
            dimension,
            sup_norm: level.abs(),
        }
    }

    pub fn indicator_halfspace(normal: Point<T>, offset: T) -> Self {
        let dimension = normal.len();
        InitialDatum {
            kind: DatumKind::IndicatorHalfspace { normal, offset },
            dimension,
            sup_norm: T::one(),
        }
    }

    pub fn radial_bump(center: Point<T>, radius: T, amplitude: T) -> Self {
        let dimension = center.len();
        InitialDatum {
            kind: DatumKind::RadialBump {
                center,
                radius,
                amplitude,
            },
            dimension,
            sup_norm: amplitude.abs() * (-T::one()).exp(),
        }
    }

    pub fn continuous_bounded(amplitude: T, wave: Point<T>) -> Self {
        let dimension = wave.len();
        InitialDatum {
            kind: DatumKind::ContinuousBounded { amplitude, wave },
            dimension,
            sup_norm: amplitude.abs(),
        }
    }

    pub fn oscillatory(frequency: T, center: Point<T>, radius: T, amplitude: T) -> Self {
        let dimension = center.len();
        InitialDatum {
            kind: DatumKind::Oscillatory {
                frequency,
                center,
                radius,
                amplitude,
            },
            dimension,
            sup_norm: amplitude.abs() * (-T::one()).exp(),
        }
    }

    pub fn affine(base: InitialDatum<T>, scale: T, shift: T) -> Self {
        let dimension = base.dimension;
        let sup_norm = scale.abs() * base.sup_norm + shift.abs();
        InitialDatum {
            kind: DatumKind::Affine {
                base: Box::new(base),
                scale,
                shift,
            },
            dimension,
            sup_norm,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> &DatumKind<T> {
        &self.kind
    }

    fn bump_profile(x: &[T], center: &[T], radius: T) -> T {
        let s = geom::dist(x, center).powi(2) / (radius * radius);
        if s >= T::one() {
            T::zero()
        } else {
            (-(T::one() - s).recip()).exp()
        }
    }

    pub fn evaluate(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.dimension);
        match &self.kind {
            DatumKind::Constant { level } => *level,
            DatumKind::IndicatorHalfspace { normal, offset } => {
                if geom::dot(normal, x) > *offset {
                    T::one()
                } else {
                    T::zero()
                }
            }
            DatumKind::RadialBump {
                center,
                radius,
                amplitude,
            } => *amplitude * Self::bump_profile(x, center, *radius),
            DatumKind::ContinuousBounded { amplitude, wave } => {
                *amplitude * geom::dot(wave, x).cos()
            }
            DatumKind::Oscillatory {
                frequency,
                center,
                radius,
                amplitude,
            } => {
                *amplitude
                    * (*frequency * x[0]).sin()
                    * Self::bump_profile(x, center, *radius)
            }
            DatumKind::Affine { base, scale, shift } => *scale * base.evaluate(x) + *shift,
        }
    }

    /// Certified Lipschitz bound; `None` for discontinuous data.
    pub fn lipschitz_bound(&self) -> Option<T> {
        match &self.kind {
            DatumKind::Constant { .. } => Some(T::zero()),
            DatumKind::IndicatorHalfspace { .. } => None,
            DatumKind::RadialBump {
                radius, amplitude, ..
            } => Some(amplitude.abs() * T::of(bump_slope_max()) / *radius),
            DatumKind::ContinuousBounded { amplitude, wave } => {
                Some(amplitude.abs() * geom::norm(wave))
            }
            DatumKind::Oscillatory {
                frequency,
                radius,
                amplitude,
                ..
            } => {
                // product rule envelope: |f' w| + |f w'|
                let window_sup = (-T::one()).exp();
                Some(
                    amplitude.abs()
                        * (frequency.abs() * window_sup
                            + T::of(bump_slope_max()) / *radius),
                )
            }
            DatumKind::Affine { base, scale, .. } => {
                base.lipschitz_bound().map(|l| scale.abs() * l)
            }
        }
    }
}

/// Smooth compactly supported test function: a bump of the fixed profile
/// `amplitude exp(-1/(1 - |x-c|^2/r^2))` with analytic gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction<T> {
    pub center: Point<T>,
    pub radius: T,
    pub amplitude: T,
}

impl<T: Scalar> TestFunction<T> {
    pub fn new(center: Point<T>, radius: T, amplitude: T) -> Result<Self> {
        if radius <= T::zero() {
            return Err(Error::unsupported("test-function radius must be positive"));
        }
        Ok(TestFunction {
            center,
            radius,
            amplitude,
        })
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    fn squared_ratio(&self, x: &[T]) -> T {
        geom::dist(x, &self.center).powi(2) / (self.radius * self.radius)
    }

    /// Values below this distance ratio from the support edge are flushed
    /// to zero: the analytic tail there is far below underflow anyway and
    /// the gradient formula would divide by a vanishing square.
    fn edge_guard() -> T {
        T::one() - T::of(1e-12)
    }

    pub fn value(&self, x: &[T]) -> T {
        let s = self.squared_ratio(x);
        if s >= Self::edge_guard() {
            T::zero()
        } else {
            self.amplitude * (-(T::one() - s).recip()).exp()
        }
    }

    pub fn gradient(&self, x: &[T]) -> Point<T> {
        let s = self.squared_ratio(x);
        if s >= Self::edge_guard() {
            return geom::zeros(x.len());
        }
        let v = self.amplitude * (-(T::one() - s).recip()).exp();
        let one_minus = T::one() - s;
        let scale = -(v + v) / (self.radius * self.radius * one_minus * one_minus);
        x.iter()
            .zip(&self.center)
            .map(|(&xi, &ci)| scale * (xi - ci))
            .collect()
    }

    /// Quadrature of `|phi|` over its own support box; the natural scale
    /// for pairing tolerances.
    pub fn abs_mass(&self, nodes_per_axis: usize) -> Result<T> {
        let d = self.dimension();
        let lo = self
            .center
            .iter()
            .map(|&c| c - self.radius)
            .collect::<Vec<_>>();
        let hi = self
            .center
            .iter()
            .map(|&c| c + self.radius)
            .collect::<Vec<_>>();
        let grid = TrapezoidGrid::new(AxisBox::new(lo, hi)?, nodes_per_axis)?;
        let _ = d;
        Ok(grid.integrate(|x| self.value(x).abs()))
    }
}

/// Spatial quadrature domain and resolution for pairings.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec<T> {
    pub domain: AxisBox<T>,
    pub nodes_per_axis: usize,
}

impl<T: Scalar> QuadratureSpec<T> {
    /// Default resolution in d = 2; high-order accuracy is pointless for
    /// discontinuous data, refinement studies carry the burden instead.
    pub const DEFAULT_NODES_PER_AXIS: usize = 129;

    pub fn new(domain: AxisBox<T>, nodes_per_axis: usize) -> Result<Self> {
        let spec = QuadratureSpec {
            domain,
            nodes_per_axis,
        };
        let _ = spec.grid()?; // validates the node count
        Ok(spec)
    }

    pub fn grid(&self) -> Result<TrapezoidGrid<T>> {
        TrapezoidGrid::new(self.domain.clone(), self.nodes_per_axis)
    }

    pub fn check_support(&self, phi: &TestFunction<T>) -> Result<()> {
        if self.domain.contains_ball(&phi.center, phi.radius) {
            Ok(())
        } else {
            Err(Error::SupportOutsideBox)
        }
    }
}

/// How a candidate solution produces values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// `u(t, x) = u_0(Y_{0,t}(x))` through the backward stochastic flow.
    Representation,
    /// `u(t, x) = v(t, x - B_t)` with `v` transported by the deterministic
    /// characteristics of the shifted field `b(r, z + B_r)`.
    Auxiliary,
    /// `u(t, x) = u_0(x)`: transport ignored. A deliberately wrong
    /// candidate serving as the negative control in residual studies.
    FrozenDatum,
}

/// A candidate weak solution bound to one drift, one path, one datum.
#[derive(Debug, Clone)]
pub struct WeakSolution<T: Scalar> {
    pub drift: DriftField<T>,
    pub path: BrownianPath<T>,
    pub datum: InitialDatum<T>,
    pub route: Route,
}

impl<T: Scalar> WeakSolution<T> {
    pub fn new(
        drift: DriftField<T>,
        path: BrownianPath<T>,
        datum: InitialDatum<T>,
        route: Route,
    ) -> Result<Self> {
        let d = drift.dimension();
        if path.dimension() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: path.dimension(),
            });
        }
        if datum.dimension() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: datum.dimension(),
            });
        }
        Ok(WeakSolution {
            drift,
            path,
            datum,
            route,
        })
    }

    pub fn representation(
        drift: DriftField<T>,
        path: BrownianPath<T>,
        datum: InitialDatum<T>,
    ) -> Result<Self> {
        Self::new(drift, path, datum, Route::Representation)
    }

    /// The shifted-field construction; requires a divergence-free drift,
    /// otherwise the continuity equation is not a plain transport of the
    /// datum and composing with the inverse characteristics is wrong.
    pub fn auxiliary(
        drift: DriftField<T>,
        path: BrownianPath<T>,
        datum: InitialDatum<T>,
    ) -> Result<Self> {
        if !drift.divergence_free {
            return Err(Error::unsupported(
                "auxiliary construction requires a divergence-free drift",
            ));
        }
        Self::new(drift, path, datum, Route::Auxiliary)
    }

    pub fn frozen_control(
        drift: DriftField<T>,
        path: BrownianPath<T>,
        datum: InitialDatum<T>,
    ) -> Result<Self> {
        Self::new(drift, path, datum, Route::FrozenDatum)
    }

    /// Evaluates the candidate at `(t, x)` through its route.
    pub fn evaluate(&self, t: T, x: &[T]) -> Result<T> {
        match self.route {
            Route::Representation => {
                let traj = flow::backward_flow(&self.drift, &self.path, x, T::zero(), t)?;
                Ok(self.datum.evaluate(traj.terminal_position()))
            }
            Route::Auxiliary => {
                let origin = self.auxiliary_origin(t, x)?;
                Ok(self.datum.evaluate(&origin))
            }
            Route::FrozenDatum => Ok(self.datum.evaluate(x)),
        }
    }

    /// Inverse deterministic characteristic of the shifted field, started
    /// from `x - B_t`: the point whose datum value the auxiliary route
    /// reports.
    ///
    /// The reversed iteration evaluates the shifted drift at the left
    /// endpoint, `W_k = W_{k+1} - dt b(t_k, W_{k+1} + B_{t_k})`, mirroring
    /// the forward ODE scheme. The backward stochastic flow uses the right
    /// endpoint instead, so the two routes are independent discretizations
    /// whose gap measures scheme error and vanishes under refinement; for
    /// zero and constant drifts both collapse to the same translation.
    fn auxiliary_origin(&self, t: T, x: &[T]) -> Result<Point<T>> {
        if x.len() != self.drift.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.drift.dimension(),
                got: x.len(),
            });
        }
        let times = flow::grid_times(&self.path, T::zero(), t)?;
        let shift = self.path.value_at(t)?.value;
        let d = x.len();
        let mut w: Point<T> = (0..d).map(|i| x[i] - shift[i]).collect();
        for j in (0..times.len() - 1).rev() {
            let t_left = times[j];
            let noise_left = self.path.value_at(t_left)?.value;
            let arg: Point<T> = (0..d).map(|i| w[i] + noise_left[i]).collect();
            let bval = self
                .drift
                .evaluate(t_left, &arg)
                .map_err(|e| flow::integration_error(t_left, e))?;
            let dt = times[j + 1] - t_left;
            for i in 0..d {
                w[i] -= dt * bval[i];
            }
        }
        Ok(w)
    }
}

/// Memoized solution values on a quadrature grid at selected path knots.
///
/// Residual assembly reads every `(node, knot)` value three times (pairing,
/// drift term, Stratonovich term); evaluating the backward flow once per
/// pair dominates the cost otherwise. Rows follow the requested knot order,
/// nodes the grid's row-major order, so rebuilds are reproducible.
#[derive(Debug, Clone)]
pub struct SolutionTable<T: Scalar> {
    pub knot_indices: Vec<usize>,
    pub nodes: Vec<Point<T>>,
    pub weights: Vec<T>,
    /// `values[row][node]` = u(time of `knot_indices[row]`, `nodes[node]`).
    pub values: Vec<Vec<T>>,
}

impl<T: Scalar> SolutionTable<T> {
    /// Evaluates the solution at every (knot, node) pair.
    pub fn build(
        ws: &WeakSolution<T>,
        quad: &QuadratureSpec<T>,
        knot_indices: &[usize],
    ) -> Result<Self> {
        let grid = quad.grid()?;
        let mut nodes = Vec::with_capacity(grid.len());
        let mut weights = Vec::with_capacity(grid.len());
        for (x, w) in grid.iter() {
            nodes.push(x);
            weights.push(w);
        }
        let mut values = Vec::with_capacity(knot_indices.len());
        for &k in knot_indices {
            if k > ws.path.n_steps() {
                return Err(Error::unsupported(format!(
                    "knot {k} beyond the path grid ({} steps)",
                    ws.path.n_steps()
                )));
            }
            let t = ws.path.time(k);
            let mut row = Vec::with_capacity(nodes.len());
            for x in &nodes {
                row.push(ws.evaluate(t, x)?);
            }
            values.push(row);
        }
        Ok(SolutionTable {
            knot_indices: knot_indices.to_vec(),
            nodes,
            weights,
            values,
        })
    }

    /// All knots `0..=k(t)`; `t` must lie on the path grid.
    pub fn build_prefix(ws: &WeakSolution<T>, quad: &QuadratureSpec<T>, t: T) -> Result<Self> {
        let k_end = ws.path.knot_index(t).ok_or_else(|| {
            Error::unsupported("residual assembly requires t on the path grid")
        })?;
        let knots: Vec<usize> = (0..=k_end).collect();
        Self::build(ws, quad, &knots)
    }

    fn row_of(&self, knot: usize) -> Result<usize> {
        self.knot_indices
            .iter()
            .position(|&k| k == knot)
            .ok_or_else(|| Error::unsupported(format!("knot {knot} not in table")))
    }

    /// `integral of u(t_row, .) phi` by the stored weights.
    pub fn pairing_at(&self, knot: usize, phi: &TestFunction<T>) -> Result<T> {
        let row = self.row_of(knot)?;
        let mut acc = T::zero();
        for (i, x) in self.nodes.iter().enumerate() {
            acc += self.weights[i] * self.values[row][i] * phi.value(x);
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermValue<T> {
    pub value: T,
    pub skipped_nodes: usize,
}

/// `integral of u(t, .) phi` over the box; `t` need not be on the grid.
pub fn pairing<T: Scalar>(
    ws: &WeakSolution<T>,
    phi: &TestFunction<T>,
    t: T,
    quad: &QuadratureSpec<T>,
) -> Result<T> {
    quad.check_support(phi)?;
    let grid = quad.grid()?;
    let mut acc = T::zero();
    for (x, w) in grid.iter() {
        acc += w * ws.evaluate(t, &x)? * phi.value(&x);
    }
    Ok(acc)
}

/// Trace of the pairing over every path knot up to `t`.
pub fn pairing_trace<T: Scalar>(
    ws: &WeakSolution<T>,
    phi: &TestFunction<T>,
    t: T,
    quad: &QuadratureSpec<T>,
) -> Result<Vec<(T, T)>> {
    quad.check_support(phi)?;
    let table = SolutionTable::build_prefix(ws, quad, t)?;
    table
        .knot_indices
        .iter()
        .map(|&k| Ok((ws.path.time(k), table.pairing_at(k, phi)?)))
        .collect()
}

fn drift_term_from_table<T: Scalar>(
    table: &SolutionTable<T>,
    ws: &WeakSolution<T>,
    phi: &TestFunction<T>,
) -> Result<TermValue<T>> {
    let gradients: Vec<Point<T>> = table.nodes.iter().map(|x| phi.gradient(x)).collect();
    let mut skipped = 0usize;
    // g(row) = integral of u b . grad(phi) at that knot's time
    let mut g = Vec::with_capacity(table.knot_indices.len());
    for (row, &k) in table.knot_indices.iter().enumerate() {
        let t = ws.path.time(k);
        let mut acc = T::zero();
        for (i, x) in table.nodes.iter().enumerate() {
            match ws.drift.evaluate(t, x) {
                Ok(b) => {
                    acc += table.weights[i] * table.values[row][i] * geom::dot(&b, &gradients[i]);
                }
                Err(Error::SingularEvaluation { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        g.push(acc);
    }
    let mut value = T::zero();
    for row in 1..g.len() {
        let dt = ws.path.time(table.knot_indices[row]) - ws.path.time(table.knot_indices[row - 1]);
        value += (g[row - 1] + g[row]) * T::of(0.5) * dt;
    }
    Ok(TermValue {
        value,
        skipped_nodes: skipped,
    })
}

fn stratonovich_term_from_table<T: Scalar>(
    table: &SolutionTable<T>,
    ws: &WeakSolution<T>,
    phi: &TestFunction<T>,
) -> Result<T> {
    let d = ws.path.dimension();
    let gradients: Vec<Point<T>> = table.nodes.iter().map(|x| phi.gradient(x)).collect();
    // f[row][i] = integral of u(t_row, .) d_i phi
    let mut f = Vec::with_capacity(table.knot_indices.len());
    for row in 0..table.knot_indices.len() {
        let mut comp = vec![T::zero(); d];
        for (i, _) in table.nodes.iter().enumerate() {
            let scale = table.weights[i] * table.values[row][i];
            for c in 0..d {
                comp[c] += scale * gradients[i][c];
            }
        }
        f.push(comp);
    }
    let mut value = T::zero();
    for row in 1..f.len() {
        let k_prev = table.knot_indices[row - 1];
        let k_next = table.knot_indices[row];
        let b_prev = table_knot_value(ws, k_prev);
        let b_next = table_knot_value(ws, k_next);
        for c in 0..d {
            let midpoint = (f[row - 1][c] + f[row][c]) * T::of(0.5);
            value += midpoint * (b_next[c] - b_prev[c]);
        }
    }
    Ok(value)
}

fn table_knot_value<'a, T: Scalar>(ws: &'a WeakSolution<T>, k: usize) -> &'a [T] {
    ws.path.knot(k)
}

/// `integral over [0,t] of (integral of u b . grad phi)` by the
/// time-trapezoid rule on the path grid; singular quadrature nodes are
/// skipped and counted.
pub fn drift_term<T: Scalar>(
    ws: &WeakSolution<T>,
    phi: &TestFunction<T>,
    t: T,
    quad: &QuadratureSpec<T>,
) -> Result<TermValue<T>> {
    quad.check_support(phi)?;
    let table = SolutionTable::build_prefix(ws, quad, t)?;
    drift_term_from_table(&table, ws, phi)
}

/// Midpoint (Stratonovich) sum of `integral of u d_i phi` against the path
/// increments up to `t`.
pub fn stratonovich_term<T: Scalar>(
    ws: &WeakSolution<T>,
    phi: &TestFunction<T>,
    t: T,
    quad: &QuadratureSpec<T>,
) -> Result<T> {
    quad.check_support(phi)?;
    let table = SolutionTable::build_prefix(ws, quad, t)?;
    stratonovich_term_from_table(&table, ws, phi)
}

/// Everything the weak-form identity is made of, at one `(phi, t)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport<T> {
    pub t: T,
    pub pairing_t: T,
    pub pairing_0: T,
    pub drift_term: T,
    pub strat_term: T,
    pub residual: T,
    pub drift_skipped_nodes: usize,
    pub nodes_per_axis: usize,
    pub n_steps: usize,
}

/// `R(t) = pairing(t) - pairing(0) - drift term - Stratonovich term`,
/// all three terms sharing one memoized solution table.
pub fn weak_residual_report<T: Scalar>(
    ws: &WeakSolution<T>,
    phi: &TestFunction<T>,
    t: T,
    quad: &QuadratureSpec<T>,
) -> Result<ResidualReport<T>> {
    quad.check_support(phi)?;
    let table = SolutionTable::build_prefix(ws, quad, t)?;
    let k_end = *table.knot_indices.last().unwrap();
    let pairing_t = table.pairing_at(k_end, phi)?;
    let pairing_0 = table.pairing_at(0, phi)?;
    let drift = drift_term_from_table(&table, ws, phi)?;
    let strat = stratonovich_term_from_table(&table, ws, phi)?;
    Ok(ResidualReport {
        t,
        pairing_t,
        pairing_0,
        drift_term: drift.value,
        strat_term: strat,
        residual: pairing_t - pairing_0 - drift.value - strat,
        drift_skipped_nodes: drift.skipped_nodes,
        nodes_per_axis: quad.nodes_per_axis,
        n_steps: ws.path.n_steps(),
    })
}

pub fn weak_residual<T: Scalar>(
    ws: &WeakSolution<T>,
    phi: &TestFunction<T>,
    t: T,
    quad: &QuadratureSpec<T>,
) -> Result<T> {
    Ok(weak_residual_report(ws, phi, t, quad)?.residual)
}
