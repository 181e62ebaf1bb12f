//! Forward-mode automatic differentiation.
//!
//! A [`Jet`] carries a value together with its partial derivatives with
//! respect to `N` input coordinates. Jets nest: `Jet<Jet<f64, N>, N>` carries
//! exact second derivatives, which is how [`hessian`] and the log-Jacobian
//! gradient are computed. All catalog maps have at most two inputs, so `N` is
//! 1 or 2 in practice.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::Matrix;

/// Number types the catalog maps can be evaluated on.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(c: f64) -> Self;
    /// The undifferentiated value.
    fn re(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Scalar for f64 {
    fn cst(c: f64) -> Self {
        c
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Value plus `N` first-order partials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T, const N: usize> {
    pub v: T,
    pub du: [T; N],
}

impl<T: Scalar, const N: usize> Jet<T, N> {
    pub fn constant(v: T) -> Self {
        Self {
            v,
            du: [T::cst(0.0); N],
        }
    }

    /// The `i`-th coordinate variable: unit partial in slot `i`.
    pub fn variable(v: T, i: usize) -> Self {
        let mut du = [T::cst(0.0); N];
        du[i] = T::cst(1.0);
        Self { v, du }
    }

    /// Chain rule for a scalar function with value `f` and derivative `df` at `self.v`.
    #[inline]
    fn chain(self, f: T, df: T) -> Self {
        Self {
            v: f,
            du: self.du.map(|d| d * df),
        }
    }
}

impl<T: Scalar, const N: usize> Add for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        let mut du = self.du;
        for (a, b) in du.iter_mut().zip(o.du) {
            *a = *a + b;
        }
        Self { v: self.v + o.v, du }
    }
}

impl<T: Scalar, const N: usize> Sub for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        let mut du = self.du;
        for (a, b) in du.iter_mut().zip(o.du) {
            *a = *a - b;
        }
        Self { v: self.v - o.v, du }
    }
}

impl<T: Scalar, const N: usize> Mul for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut du = self.du;
        for (a, b) in du.iter_mut().zip(o.du) {
            *a = *a * o.v + self.v * b;
        }
        Self { v: self.v * o.v, du }
    }
}

impl<T: Scalar, const N: usize> Div for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = T::cst(1.0) / o.v;
        let q = self.v * inv;
        let mut du = self.du;
        for (a, b) in du.iter_mut().zip(o.du) {
            *a = (*a - q * b) * inv;
        }
        Self { v: q, du }
    }
}

impl<T: Scalar, const N: usize> Neg for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            v: -self.v,
            du: self.du.map(|d| -d),
        }
    }
}

impl<T: Scalar, const N: usize> Add<f64> for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn add(self, c: f64) -> Self {
        Self {
            v: self.v + c,
            du: self.du,
        }
    }
}

impl<T: Scalar, const N: usize> Sub<f64> for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn sub(self, c: f64) -> Self {
        Self {
            v: self.v - c,
            du: self.du,
        }
    }
}

impl<T: Scalar, const N: usize> Mul<f64> for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn mul(self, c: f64) -> Self {
        Self {
            v: self.v * c,
            du: self.du.map(|d| d * c),
        }
    }
}

impl<T: Scalar, const N: usize> Div<f64> for Jet<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, c: f64) -> Self {
        Self {
            v: self.v / c,
            du: self.du.map(|d| d / c),
        }
    }
}

impl<T: Scalar, const N: usize> Scalar for Jet<T, N> {
    fn cst(c: f64) -> Self {
        Self::constant(T::cst(c))
    }
    fn re(&self) -> f64 {
        self.v.re()
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), T::cst(1.0) / self.v)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, T::cst(0.5) / s)
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::cst(1.0),
            1 => self,
            _ => self.chain(self.v.powi(n), self.v.powi(n - 1) * (n as f64)),
        }
    }
}

/// Value, gradient and Hessian of a scalar function.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Matrix,
}

impl Jet2 {
    /// Drop the second-order part.
    pub fn to_first_order(&self) -> (f64, Vec<f64>) {
        (self.value, self.gradient.clone())
    }
}

/// A map ℝ^d → ℝ^p that can be evaluated on any [`Scalar`].
pub trait VectorField {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    /// Writes F(x) into `out` (length `dim_out`).
    fn eval_into<T: Scalar>(&self, x: &[T], out: &mut [T]);

    /// Input coordinates where the definition switches branch.
    fn breakpoints(&self) -> &[f64] {
        &[]
    }

    fn eval<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::cst(0.0); self.dim_out()];
        self.eval_into(x, &mut out);
        out
    }
}

fn check_input<M: VectorField>(map: &M, x: &[f64]) -> Result<()> {
    if x.len() != map.dim_in() {
        return Err(Error::DimensionMismatch {
            expected: map.dim_in(),
            got: x.len(),
        });
    }
    ensure_finite(x, "input point")
}

/// Values and Jacobian rows with a compile-time input dimension.
pub(crate) fn value_and_jacobian_n<M: VectorField, const N: usize>(
    map: &M,
    x: &[f64; N],
) -> (Vec<f64>, Vec<[f64; N]>) {
    let xs: [Jet<f64, N>; N] = std::array::from_fn(|i| Jet::variable(x[i], i));
    let out = map.eval(&xs);
    let vals = out.iter().map(|j| j.v).collect();
    let rows = out.iter().map(|j| j.du).collect();
    (vals, rows)
}

/// Entry (i, j) is ∂_j F_i(x), propagated through dual numbers.
pub fn jacobian<M: VectorField>(map: &M, x: &[f64]) -> Result<Matrix> {
    check_input(map, x)?;
    let p = map.dim_out();
    match x.len() {
        1 => {
            let (_, rows) = value_and_jacobian_n::<M, 1>(map, &[x[0]]);
            let mut m = Matrix::zeros(p, 1);
            for (i, r) in rows.iter().enumerate() {
                m[(i, 0)] = r[0];
            }
            Ok(m)
        }
        2 => {
            let (_, rows) = value_and_jacobian_n::<M, 2>(map, &[x[0], x[1]]);
            let mut m = Matrix::zeros(p, 2);
            for (i, r) in rows.iter().enumerate() {
                m[(i, 0)] = r[0];
                m[(i, 1)] = r[1];
            }
            Ok(m)
        }
        d => Err(Error::Unsupported(format!("input dimension {d} > 2"))),
    }
}

fn second_order_n<M: VectorField, const N: usize>(map: &M, x: &[f64; N]) -> Jet2 {
    let xs: [Jet<Jet<f64, N>, N>; N] = std::array::from_fn(|i| Jet {
        v: Jet::variable(x[i], i),
        du: std::array::from_fn(|k| Jet::constant(if k == i { 1.0 } else { 0.0 })),
    });
    let out = map.eval(&xs);
    let f = out[0];
    let mut h = Matrix::zeros(N, N);
    for i in 0..N {
        for j in 0..N {
            h[(i, j)] = f.du[i].du[j];
        }
    }
    Jet2 {
        value: f.v.v,
        gradient: f.v.du.to_vec(),
        hessian: h,
    }
}

/// Value, gradient and Hessian of a scalar map (p = 1) by nested jets.
pub fn second_order<M: VectorField>(map: &M, x: &[f64]) -> Result<Jet2> {
    check_input(map, x)?;
    if map.dim_out() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: map.dim_out(),
        });
    }
    match x.len() {
        1 => Ok(second_order_n::<M, 1>(map, &[x[0]])),
        2 => Ok(second_order_n::<M, 2>(map, &[x[0], x[1]])),
        d => Err(Error::Unsupported(format!("input dimension {d} > 2"))),
    }
}

pub fn hessian<M: VectorField>(map: &M, x: &[f64]) -> Result<Matrix> {
    second_order(map, x).map(|j| j.hessian)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdCheck {
    /// max over entries of |AD − central difference| / (1 + |AD|)
    pub max_rel: f64,
    /// The stencil [x − h, x + h] contains a branch point of the map.
    pub breakpoint_adjacent: bool,
}

/// Compare the AD Jacobian with central differences of step `h`.
pub fn fd_check<M: VectorField>(map: &M, x: &[f64], h: f64) -> Result<FdCheck> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step h = {h} must be > 0")));
    }
    let jac = jacobian(map, x)?;
    let mut worst: f64 = 0.0;
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        let fp = map.eval(&xp);
        let fm = map.eval(&xm);
        for i in 0..map.dim_out() {
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            let ad = jac[(i, j)];
            worst = worst.max((ad - fd).abs() / (1.0 + ad.abs()));
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    let breakpoint_adjacent = map
        .breakpoints()
        .iter()
        .any(|&b| x.iter().any(|&xi| (xi - b).abs() <= h));
    Ok(FdCheck {
        max_rel: worst,
        breakpoint_adjacent,
    })
}
