//! Drift field catalog: integrability bookkeeping, evaluation, numerical
//! divergence, mollification, and L^p norm estimates on boxes.
//!
//! Analytic fields (linear, shear) are not globally integrable, so every
//! cataloged field carries a smooth compact cutoff at radius `R` (default
//! 10). The cutoff is applied where it cannot break the divergence-free
//! structure: multiplicatively for azimuthal and skew fields (where
//! `x . b(x) = 0`), through the stream function in d = 2, and through a
//! curl potential in d = 3. Inside the plateau `r <= 0.8 R` every field
//! equals its textbook formula exactly.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::geom::{self, AxisBox, Point, TrapezoidGrid};
use crate::scalar::Scalar;

/// Integrability exponents: spatial dimension `d`, spatial exponent `p`,
/// temporal exponent `q`, all finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpsExponents<T> {
    pub d: usize,
    pub p: T,
    pub q: T,
}

impl<T: Scalar> LpsExponents<T> {
    pub fn new(d: usize, p: T, q: T) -> Self {
        LpsExponents { d, p, q }
    }

    /// The subcritical index `d/p + 2/q`.
    pub fn index(&self) -> Result<T> {
        if self.d == 0 {
            return Err(Error::NonPositiveExponent {
                name: "d",
                value: 0.0,
            });
        }
        if self.p <= T::zero() {
            return Err(Error::NonPositiveExponent {
                name: "p",
                value: self.p.lossy_f64(),
            });
        }
        if self.q <= T::zero() {
            return Err(Error::NonPositiveExponent {
                name: "q",
                value: self.q.lossy_f64(),
            });
        }
        Ok(T::of_usize(self.d) / self.p + T::of(2.0) / self.q)
    }

    /// True iff `p >= 2`, `q > 2`, and the index is strictly below 1.
    pub fn satisfied(&self) -> Result<bool> {
        let index = self.index()?;
        Ok(self.p >= T::of(2.0) && self.q > T::of(2.0) && index < T::one())
    }
}

/// `exp(-1/s)` continued by zero: the building block of every smooth
/// transition here.
fn decay<T: Scalar>(s: T) -> T {
    if s <= T::zero() {
        T::zero()
    } else {
        (-s.recip()).exp()
    }
}

/// Smooth monotone step: 0 for `s <= 0`, 1 for `s >= 1`. The guards cut
/// the transition 1e-3 short of each end, where the analytic value is
/// already below 1e-400 territory and subnormals would only add noise.
pub fn smooth_step<T: Scalar>(s: T) -> T {
    if s <= T::of(1e-3) {
        T::zero()
    } else if s >= T::of(1.0 - 1e-3) {
        T::one()
    } else {
        let f = decay(s);
        let g = decay(T::one() - s);
        f / (f + g)
    }
}

pub fn smooth_step_deriv<T: Scalar>(s: T) -> T {
    if s <= T::of(1e-3) || s >= T::of(1.0 - 1e-3) {
        T::zero()
    } else {
        let f = decay(s);
        let g = decay(T::one() - s);
        let sum = f + g;
        f * g * (s.powi(-2) + (T::one() - s).powi(-2)) / (sum * sum)
    }
}

/// Radial cutoff: 1 on `r <= 0.8 R`, 0 on `r >= R`, smooth between.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cutoff<T> {
    radius: T,
}

impl<T: Scalar> Cutoff<T> {
    fn plateau(&self) -> T {
        self.radius * T::of(0.8)
    }

    fn band(&self) -> T {
        self.radius - self.plateau()
    }

    fn value(&self, r: T) -> T {
        smooth_step((self.radius - r) / self.band())
    }

    fn deriv(&self, r: T) -> T {
        -smooth_step_deriv((self.radius - r) / self.band()) / self.band()
    }
}

pub type CustomFn<T> = dyn Fn(T, &[T]) -> Result<Point<T>> + Send + Sync;

#[derive(Clone)]
pub enum DriftKind<T: Scalar> {
    Zero,
    Constant {
        c: Point<T>,
    },
    /// d = 2: `spin = [a]` gives the skew matrix `[[0, -a], [a, 0]]`;
    /// d = 3: `spin` is the angular velocity, `b(x) = spin x x`.
    LinearSkew {
        spin: Vec<T>,
    },
    /// d = 2 only: `b = (amplitude cos(frequency x2), 0)` inside the plateau.
    Shear {
        amplitude: T,
        frequency: T,
    },
    /// d = 2 only: `b = x_perp / |x|^alpha` inside the plateau, undefined at
    /// the origin; genuinely unbounded for `alpha > 1`.
    RotationalSingular {
        alpha: T,
    },
    /// d = 2 only: `b = x_perp |x|^(alpha - 1)`, `alpha` in (0,1): a bounded
    /// Hoelder swirl, continuous everywhere with `b(0) = 0`.
    HolderRotational {
        alpha: T,
    },
    Custom {
        label: String,
        f: Arc<CustomFn<T>>,
    },
}

impl<T: Scalar> fmt::Debug for DriftKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftKind::Zero => write!(f, "Zero"),
            DriftKind::Constant { c } => write!(f, "Constant {{ c: {c:?} }}"),
            DriftKind::LinearSkew { spin } => write!(f, "LinearSkew {{ spin: {spin:?} }}"),
            DriftKind::Shear {
                amplitude,
                frequency,
            } => write!(f, "Shear {{ amplitude: {amplitude:?}, frequency: {frequency:?} }}"),
            DriftKind::RotationalSingular { alpha } => {
                write!(f, "RotationalSingular {{ alpha: {alpha:?} }}")
            }
            DriftKind::HolderRotational { alpha } => {
                write!(f, "HolderRotational {{ alpha: {alpha:?} }}")
            }
            DriftKind::Custom { label, .. } => write!(f, "Custom {{ label: {label:?} }}"),
        }
    }
}

/// A drift vector field together with its integrability claim.
#[derive(Debug, Clone)]
pub struct DriftField<T: Scalar> {
    kind: DriftKind<T>,
    dimension: usize,
    pub exponents: LpsExponents<T>,
    pub divergence_free: bool,
    pub singular_points: Vec<Point<T>>,
    cutoff: Cutoff<T>,
    /// Present on mollified fields: running count of kernel quadrature
    /// nodes skipped because the base field was singular there.
    skipped_nodes: Option<Arc<AtomicUsize>>,
}

const DEFAULT_CUTOFF_RADIUS: f64 = 10.0;

/// Integrability claim for smooth compactly supported catalog members:
/// comfortably subcritical in any supported dimension.
fn smooth_exponents<T: Scalar>(d: usize) -> LpsExponents<T> {
    LpsExponents::new(d, T::of(4.0 * d as f64), T::of(8.0))
}

impl<T: Scalar> DriftField<T> {
    fn base(kind: DriftKind<T>, dimension: usize, exponents: LpsExponents<T>) -> Self {
        DriftField {
            kind,
            dimension,
            exponents,
            divergence_free: true,
            singular_points: Vec::new(),
            cutoff: Cutoff {
                radius: T::of(DEFAULT_CUTOFF_RADIUS),
            },
            skipped_nodes: None,
        }
    }

    fn check_dim(dimension: usize) -> Result<()> {
        if (1..=3).contains(&dimension) {
            Ok(())
        } else {
            Err(Error::unsupported(format!(
                "drift catalog supports d in 1..=3, got {dimension}"
            )))
        }
    }

    pub fn zero(dimension: usize) -> Result<Self> {
        Self::check_dim(dimension)?;
        Ok(Self::base(DriftKind::Zero, dimension, smooth_exponents(dimension)))
    }

    /// Constant field. In d >= 2 it is tapered to zero outside the cutoff
    /// ball without losing the divergence-free property; in d = 1 it is
    /// left uncut, since any taper of a scalar field has a derivative.
    pub fn constant(c: Point<T>) -> Result<Self> {
        let d = c.len();
        Self::check_dim(d)?;
        Ok(Self::base(DriftKind::Constant { c }, d, smooth_exponents(d)))
    }

    /// Skew-linear field: rigid rotation at rate `spin`.
    pub fn linear_skew(spin: Vec<T>) -> Result<Self> {
        let d = match spin.len() {
            1 => 2,
            3 => 3,
            n => {
                return Err(Error::unsupported(format!(
                    "spin must have 1 component (d=2) or 3 (d=3), got {n}"
                )))
            }
        };
        Ok(Self::base(DriftKind::LinearSkew { spin }, d, smooth_exponents(d)))
    }

    pub fn shear(amplitude: T, frequency: T) -> Result<Self> {
        if frequency == T::zero() {
            return Err(Error::unsupported(
                "shear frequency must be nonzero; use `constant` for a flat profile",
            ));
        }
        Ok(Self::base(
            DriftKind::Shear {
                amplitude,
                frequency,
            },
            2,
            smooth_exponents(2),
        ))
    }

    /// Azimuthal field `x_perp / |x|^alpha` (d = 2), singular at the origin.
    /// `|b| ~ r^(1-alpha)` near zero, so it lies in `L^p_loc` iff
    /// `p (alpha - 1) < 2`; callers claim exponents explicitly.
    pub fn rotational_singular(alpha: T, exponents: LpsExponents<T>) -> Result<Self> {
        if exponents.d != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: exponents.d,
            });
        }
        let mut field = Self::base(DriftKind::RotationalSingular { alpha }, 2, exponents);
        field.singular_points = vec![geom::zeros(2)];
        Ok(field)
    }

    /// Bounded Hoelder swirl `x_perp |x|^(alpha - 1)`, `alpha` in (0, 1).
    pub fn holder_rotational(alpha: T) -> Result<Self> {
        if alpha <= T::zero() || alpha >= T::one() {
            return Err(Error::unsupported("holder exponent must lie in (0, 1)"));
        }
        Ok(Self::base(
            DriftKind::HolderRotational { alpha },
            2,
            smooth_exponents(2),
        ))
    }

    pub fn custom<F>(
        label: impl Into<String>,
        dimension: usize,
        divergence_free: bool,
        exponents: LpsExponents<T>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(T, &[T]) -> Result<Point<T>> + Send + Sync + 'static,
    {
        Self::check_dim(dimension)?;
        let mut field = Self::base(
            DriftKind::Custom {
                label: label.into(),
                f: Arc::new(f),
            },
            dimension,
            exponents,
        );
        field.divergence_free = divergence_free;
        Ok(field)
    }

    pub fn with_cutoff_radius(mut self, radius: T) -> Result<Self> {
        if radius <= T::zero() {
            return Err(Error::unsupported("cutoff radius must be positive"));
        }
        self.cutoff = Cutoff { radius };
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cutoff_radius(&self) -> T {
        self.cutoff.radius
    }

    /// Radius inside which the cutoff is identically 1 and fields follow
    /// their textbook formulas exactly.
    pub fn plateau_radius(&self) -> T {
        self.cutoff.plateau()
    }

    pub fn kind(&self) -> &DriftKind<T> {
        &self.kind
    }

    pub fn kind_id(&self) -> &str {
        match &self.kind {
            DriftKind::Zero => "zero",
            DriftKind::Constant { .. } => "constant",
            DriftKind::LinearSkew { .. } => "linear_skew",
            DriftKind::Shear { .. } => "shear",
            DriftKind::RotationalSingular { .. } => "rotational_singular",
            DriftKind::HolderRotational { .. } => "holder_rotational",
            DriftKind::Custom { label, .. } => label,
        }
    }

    /// Kernel quadrature nodes skipped so far by a mollified field; 0 for
    /// analytic catalog members.
    pub fn skipped_kernel_nodes(&self) -> usize {
        self.skipped_nodes
            .as_ref()
            .map(|c| c.load(Ordering::Relaxed))
            .unwrap_or(0)
    }

    fn singular_tolerance(&self, x: &[T]) -> T {
        T::epsilon() * T::of(16.0) * (T::one() + geom::norm(x))
    }

    pub fn is_singular_at(&self, x: &[T]) -> bool {
        let tol = self.singular_tolerance(x);
        self.singular_points.iter().any(|s| geom::dist(s, x) <= tol)
    }

    /// Evaluates `b(t, x)`. Deterministic; errors inside a machine-epsilon
    /// ball of a singular point rather than clamping.
    pub fn evaluate(&self, t: T, x: &[T]) -> Result<Point<T>> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        if self.is_singular_at(x) {
            return Err(Error::singular(t, x));
        }
        Ok(match &self.kind {
            DriftKind::Zero => geom::zeros(self.dimension),
            DriftKind::Constant { c } => self.eval_constant(c, x),
            DriftKind::LinearSkew { spin } => self.eval_linear_skew(spin, x),
            DriftKind::Shear {
                amplitude,
                frequency,
            } => self.eval_shear(*amplitude, *frequency, x),
            DriftKind::RotationalSingular { alpha } => self.eval_azimuthal(-*alpha, x),
            DriftKind::HolderRotational { alpha } => self.eval_azimuthal(*alpha - T::one(), x),
            DriftKind::Custom { f, .. } => return f(t, x),
        })
    }

    fn eval_constant(&self, c: &[T], x: &[T]) -> Point<T> {
        if self.dimension == 1 {
            return c.to_vec();
        }
        let r = geom::norm(x);
        if r <= self.cutoff.plateau() {
            return c.to_vec();
        }
        let chi = self.cutoff.value(r);
        let dchi = self.cutoff.deriv(r);
        match self.dimension {
            // stream function psi = c1 x2 - c2 x1 gives perp-gradient c;
            // the taper is grad-perp of (chi psi), divergence-free exactly.
            2 => {
                let psi = c[0] * x[1] - c[1] * x[0];
                let scale = dchi / r;
                vec![
                    chi * c[0] + psi * scale * x[1],
                    chi * c[1] - psi * scale * x[0],
                ]
            }
            // curl of (chi/2) (c x x): chi c + chi'/(2r) (c r^2 - x (c.x)).
            3 => {
                let cx = geom::dot(c, x);
                let scale = dchi / (r + r);
                (0..3)
                    .map(|i| chi * c[i] + scale * (c[i] * r * r - x[i] * cx))
                    .collect()
            }
            _ => unreachable!("constant fields exist only for d in 1..=3"),
        }
    }

    fn eval_linear_skew(&self, spin: &[T], x: &[T]) -> Point<T> {
        let raw = match self.dimension {
            2 => vec![-spin[0] * x[1], spin[0] * x[0]],
            3 => vec![
                spin[1] * x[2] - spin[2] * x[1],
                spin[2] * x[0] - spin[0] * x[2],
                spin[0] * x[1] - spin[1] * x[0],
            ],
            _ => unreachable!("skew fields exist only for d in 2..=3"),
        };
        // x . raw = 0, so a radial taper keeps the divergence at zero.
        let r = geom::norm(x);
        if r <= self.cutoff.plateau() {
            raw
        } else {
            let chi = self.cutoff.value(r);
            raw.into_iter().map(|v| chi * v).collect()
        }
    }

    fn eval_shear(&self, amplitude: T, frequency: T, x: &[T]) -> Point<T> {
        let r = geom::norm(x);
        let horizontal = amplitude * (frequency * x[1]).cos();
        if r <= self.cutoff.plateau() {
            return vec![horizontal, T::zero()];
        }
        // stream function psi = (a/k) sin(k x2); taper through grad-perp.
        let chi = self.cutoff.value(r);
        let dchi = self.cutoff.deriv(r);
        let psi = amplitude / frequency * (frequency * x[1]).sin();
        let scale = dchi / r;
        vec![
            chi * horizontal + psi * scale * x[1],
            -psi * scale * x[0],
        ]
    }

    /// Azimuthal profile `x_perp |x|^exponent`, tapered radially; exact
    /// divergence-free structure for any radial profile.
    fn eval_azimuthal(&self, exponent: T, x: &[T]) -> Point<T> {
        let r = geom::norm(x);
        // Continuous extension at the origin for nonnegative-degree
        // profiles (|b| = r^(1+exponent)); the singular case never gets
        // here because the origin is in `singular_points`.
        if r <= T::min_positive_value().sqrt() {
            return geom::zeros(2);
        }
        let chi = if r <= self.cutoff.plateau() {
            T::one()
        } else {
            self.cutoff.value(r)
        };
        let scale = r.powf(exponent) * chi;
        vec![-x[1] * scale, x[0] * scale]
    }

    /// Central-difference divergence with step `h`.
    pub fn divergence_numeric(&self, t: T, x: &[T], h: T) -> Result<T> {
        if h <= T::zero() {
            return Err(Error::unsupported("divergence step must be positive"));
        }
        let mut acc = T::zero();
        let mut probe = x.to_vec();
        for i in 0..self.dimension {
            probe[i] = x[i] + h;
            let plus = self.evaluate(t, &probe)?;
            probe[i] = x[i] - h;
            let minus = self.evaluate(t, &probe)?;
            probe[i] = x[i];
            acc += (plus[i] - minus[i]) / (h + h);
        }
        Ok(acc)
    }

    /// Trapezoid estimate of the L^p norm over a box; singular nodes are
    /// excluded from the sum and counted.
    pub fn lp_norm_estimate(
        &self,
        t: T,
        p: T,
        domain: &AxisBox<T>,
        nodes_per_axis: usize,
    ) -> Result<LpNormEstimate<T>> {
        if p < T::one() {
            return Err(Error::unsupported("norm exponent must be at least 1"));
        }
        if domain.dim() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: domain.dim(),
            });
        }
        let grid = TrapezoidGrid::new(domain.clone(), nodes_per_axis)?;
        let (acc, skipped) = grid.integrate_partial(|x| {
            self.evaluate(t, x).ok().map(|b| geom::norm(&b).powf(p))
        });
        Ok(LpNormEstimate {
            value: acc.powf(p.recip()),
            skipped_nodes: skipped,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpNormEstimate<T> {
    pub value: T,
    pub skipped_nodes: usize,
}

/// Scaled standard bump kernel `kappa_delta(y) = delta^-d kappa(y/delta)`,
/// `kappa(z) = exp(-1/(1-|z|^2))` normalized to unit mass on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierKernel<T> {
    pub delta: T,
    /// Nodes per axis for convolution quadrature over the kernel support.
    pub quadrature_points: usize,
}

/// Unit-ball masses of the unnormalized bump for d = 1, 2, 3, computed once
/// by composite Simpson on the radial integral.
fn bump_mass(d: usize) -> f64 {
    static MASSES: OnceLock<[f64; 3]> = OnceLock::new();
    let masses = MASSES.get_or_init(|| {
        let mut out = [0.0; 3];
        for (i, item) in out.iter_mut().enumerate() {
            let dim = i + 1;
            let n = 1 << 16;
            let h = 1.0 / n as f64;
            let f = |r: f64| {
                let s = 1.0 - r * r;
                if s <= 0.0 {
                    0.0
                } else {
                    r.powi(dim as i32 - 1) * (-1.0 / s).exp()
                }
            };
            let mut acc = f(0.0) + f(1.0);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(k as f64 * h);
            }
            let radial = acc * h / 3.0;
            let sphere = match dim {
                1 => 2.0,
                2 => std::f64::consts::TAU,
                _ => 4.0 * std::f64::consts::PI,
            };
            *item = sphere * radial;
        }
        out
    });
    masses[d - 1]
}

impl<T: Scalar> MollifierKernel<T> {
    /// Default resolution: 129 nodes per axis holds the unit-mass invariant
    /// to 1e-8 across the delta ladder in d = 2.
    pub const DEFAULT_QUADRATURE_POINTS: usize = 129;

    pub fn new(delta: T, quadrature_points: usize) -> Result<Self> {
        if delta <= T::zero() {
            return Err(Error::unsupported("mollifier radius must be positive"));
        }
        if quadrature_points < 3 {
            return Err(Error::unsupported(
                "kernel quadrature needs at least 3 nodes per axis",
            ));
        }
        Ok(MollifierKernel {
            delta,
            quadrature_points,
        })
    }

    pub fn with_default_resolution(delta: T) -> Result<Self> {
        Self::new(delta, Self::DEFAULT_QUADRATURE_POINTS)
    }

    /// Kernel value at `y`; symmetric, supported on `|y| < delta`.
    pub fn value(&self, y: &[T]) -> T {
        let d = y.len();
        let s = geom::dot(y, y) / (self.delta * self.delta);
        if s >= T::one() {
            return T::zero();
        }
        let norm = T::of(bump_mass(d)) * self.delta.powi(d as i32);
        (-(T::one() - s).recip()).exp() / norm
    }

    fn support_grid(&self, d: usize) -> Result<TrapezoidGrid<T>> {
        let cube = AxisBox::centered_cube(self.delta, d)?;
        TrapezoidGrid::new(cube, self.quadrature_points)
    }

    /// Quadrature mass of the scaled kernel; the unit-mass invariant check.
    pub fn mass_quadrature(&self, d: usize) -> Result<T> {
        Ok(self.support_grid(d)?.integrate(|y| self.value(y)))
    }
}

/// Convolves the field with the kernel by tensor-grid quadrature over the
/// kernel support. Singular base-field nodes are skipped and the kernel
/// weights renormalized over the surviving nodes, so constants mollify to
/// themselves even next to a singularity; skips are counted on the
/// returned field.
pub fn mollify<T: Scalar>(b: &DriftField<T>, k: &MollifierKernel<T>) -> Result<DriftField<T>> {
    let d = b.dimension();
    let grid = k.support_grid(d)?;
    let kernel = *k;
    let base = b.clone();
    let counter = Arc::new(AtomicUsize::new(0));
    let counter_inner = Arc::clone(&counter);
    let label = format!("mollified({}, delta={})", b.kind_id(), k.delta.lossy_f64());
    let f = move |t: T, x: &[T]| -> Result<Point<T>> {
        let mut num = geom::zeros::<T>(d);
        let mut den = T::zero();
        let mut shifted = vec![T::zero(); d];
        for (y, w) in grid.iter() {
            let kv = kernel.value(&y);
            if kv == T::zero() {
                continue;
            }
            for i in 0..d {
                shifted[i] = x[i] - y[i];
            }
            match base.evaluate(t, &shifted) {
                Ok(v) => {
                    let wk = w * kv;
                    for i in 0..d {
                        num[i] += wk * v[i];
                    }
                    den += wk;
                }
                Err(Error::SingularEvaluation { .. }) => {
                    counter_inner.fetch_add(1, Ordering::Relaxed);
                }
                Err(e) => return Err(e),
            }
        }
        if den <= T::zero() {
            return Err(Error::Integration {
                time: t.lossy_f64(),
                reason: "all kernel quadrature nodes were singular".into(),
            });
        }
        Ok(num.into_iter().map(|v| v / den).collect())
    };
    let mut out = DriftField::custom(label, d, b.divergence_free, b.exponents, f)?;
    out.cutoff = b.cutoff;
    out.skipped_nodes = Some(counter);
    Ok(out)
}
