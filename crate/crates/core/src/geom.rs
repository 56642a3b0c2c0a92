use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Points are plain coordinate vectors; dimensions here are 1 to 3, so the
/// allocation cost never dominates and slices keep call sites uniform.
pub type Point<T> = Vec<T>;

pub fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &c| acc + c * c).sqrt()
}

pub fn dist<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
        .sqrt()
}

pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

pub fn zeros<T: Scalar>(d: usize) -> Point<T> {
    vec![T::zero(); d]
}

/// Axis-aligned box, the domain of every spatial quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox<T> {
    lo: Point<T>,
    hi: Point<T>,
}

impl<T: Scalar> AxisBox<T> {
    pub fn new(lo: Point<T>, hi: Point<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(&a, &b)| a >= b) {
            return Err(Error::unsupported("box must have positive extent per axis"));
        }
        Ok(AxisBox { lo, hi })
    }

    /// Cube `[-half, half]^d`.
    pub fn centered_cube(half: T, d: usize) -> Result<Self> {
        AxisBox::new(vec![-half; d], vec![half; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&c, (&a, &b))| a <= c && c <= b)
    }

    pub fn contains_ball(&self, center: &[T], radius: T) -> bool {
        center.len() == self.dim()
            && center
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&c, (&a, &b))| c - radius >= a && c + radius <= b)
    }

    pub fn volume(&self) -> T {
        self.lo
            .iter()
            .zip(&self.hi)
            .fold(T::one(), |acc, (&a, &b)| acc * (b - a))
    }
}

/// Tensor-product trapezoid rule on an [`AxisBox`].
///
/// Nodes are enumerated row-major (last axis fastest); the order is part of
/// the contract because reductions over nodes must be reproducible.
#[derive(Debug, Clone)]
pub struct TrapezoidGrid<T> {
    domain: AxisBox<T>,
    nodes_per_axis: usize,
}

impl<T: Scalar> TrapezoidGrid<T> {
    pub fn new(domain: AxisBox<T>, nodes_per_axis: usize) -> Result<Self> {
        if nodes_per_axis < 2 {
            return Err(Error::unsupported("trapezoid rule needs at least 2 nodes per axis"));
        }
        Ok(TrapezoidGrid {
            domain,
            nodes_per_axis,
        })
    }

    pub fn domain(&self) -> &AxisBox<T> {
        &self.domain
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn len(&self) -> usize {
        self.nodes_per_axis.pow(self.domain.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn axis_coord(&self, axis: usize, i: usize) -> T {
        let a = self.domain.lo[axis];
        let b = self.domain.hi[axis];
        let frac = T::of_usize(i) / T::of_usize(self.nodes_per_axis - 1);
        a + (b - a) * frac
    }

    fn axis_weight(&self, axis: usize, i: usize) -> T {
        let h = (self.domain.hi[axis] - self.domain.lo[axis])
            / T::of_usize(self.nodes_per_axis - 1);
        if i == 0 || i == self.nodes_per_axis - 1 {
            h * T::of(0.5)
        } else {
            h
        }
    }

    /// Node and weight for a row-major flat index.
    pub fn node(&self, flat: usize) -> (Point<T>, T) {
        let d = self.domain.dim();
        let n = self.nodes_per_axis;
        let mut idx = flat;
        let mut coords = vec![T::zero(); d];
        let mut weight = T::one();
        for axis in (0..d).rev() {
            let i = idx % n;
            idx /= n;
            coords[axis] = self.axis_coord(axis, i);
            weight *= self.axis_weight(axis, i);
        }
        (coords, weight)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point<T>, T)> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// Integrates `f`, skipping nodes where it returns `None`; the skipped
    /// count rides along so callers can report quadrature holes.
    pub fn integrate_partial<F>(&self, mut f: F) -> (T, usize)
    where
        F: FnMut(&[T]) -> Option<T>,
    {
        let mut acc = T::zero();
        let mut skipped = 0usize;
        for (x, w) in self.iter() {
            match f(&x) {
                Some(v) => acc += w * v,
                None => skipped += 1,
            }
        }
        (acc, skipped)
    }

    pub fn integrate<F>(&self, mut f: F) -> T
    where
        F: FnMut(&[T]) -> T,
    {
        self.integrate_partial(|x| Some(f(x))).0
    }
}
