//! Local geometry of F near its zero set: the generalized Jacobian JF, the
//! gradient of log JF, the normal Hessian of ‖F‖², and level-set integrals
//! for the conic together with the coarea check.

use std::f64::consts::PI;

use crate::catalog::{Observable, SmoothMap, Weight};
use crate::error::{Error, Result};
use crate::jets::{self, Jet, Scalar, VectorField};
use crate::linalg::{gram_schmidt_rows, Matrix};
use crate::quadrature::{resolved_panels, truncation_radius, CompositeRule};

/// JF values at or below this are treated as degenerate.
pub const JACOBIAN_FLOOR: f64 = 1e-10;

/// det of the Gram matrix DF·DFᵀ (d ≥ p) or DFᵀ·DF (d < p), for p, d ≤ 2.
fn gram_det<T: Scalar>(rows: &[[T; 2]], d: usize) -> T {
    let p = rows.len();
    let entry = |i: usize, j: usize| -> T {
        if d >= p {
            (0..d).fold(T::cst(0.0), |acc, k| acc + rows[i][k] * rows[j][k])
        } else {
            (0..p).fold(T::cst(0.0), |acc, k| acc + rows[k][i] * rows[k][j])
        }
    };
    match d.min(p) {
        1 => entry(0, 0),
        _ => entry(0, 0) * entry(1, 1) - entry(0, 1) * entry(1, 0),
    }
}

fn pad<T: Scalar, const N: usize>(row: [T; N]) -> [T; 2] {
    let mut out = [T::cst(0.0); 2];
    out[..N].copy_from_slice(&row);
    out
}

/// JF(x) = √det(DF DFᵀ) if d ≥ p, else √det(DFᵀDF).
pub fn generalized_jacobian<M: VectorField>(map: &M, x: &[f64]) -> Result<f64> {
    let j = jets::jacobian(map, x)?;
    if map.dim_out() > 2 {
        return Err(Error::Unsupported(format!("output dimension {}", map.dim_out())));
    }
    let rows: Vec<[f64; 2]> = (0..j.rows())
        .map(|i| {
            let r = j.row(i);
            [r[0], r.get(1).copied().unwrap_or(0.0)]
        })
        .collect();
    Ok(gram_det(&rows, j.cols()).max(0.0).sqrt())
}

/// First and second order data at one point, with a compile-time input
/// dimension. This is the per-step work of the Langevin samplers.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LocalGeometry<const N: usize> {
    pub f: [f64; 2],
    pub df: [[f64; N]; 2],
    pub jf: f64,
    pub grad_log_jf: [f64; N],
}

pub(crate) fn local_geometry<M: VectorField, const N: usize>(map: &M, x: &[f64; N]) -> LocalGeometry<N> {
    let xs: [Jet<Jet<f64, N>, N>; N] = std::array::from_fn(|i| Jet {
        v: Jet::variable(x[i], i),
        du: std::array::from_fn(|k| Jet::constant(if k == i { 1.0 } else { 0.0 })),
    });
    let p = map.dim_out();
    let mut out = [Jet::<Jet<f64, N>, N>::cst(0.0); 2];
    map.eval_into(&xs, &mut out[..p]);
    let rows: Vec<[Jet<f64, N>; 2]> = out[..p].iter().map(|o| pad(o.du)).collect();
    let g = gram_det(&rows, N);
    let mut f = [0.0; 2];
    let mut df = [[0.0; N]; 2];
    for i in 0..p {
        f[i] = out[i].v.v;
        df[i] = out[i].v.du;
    }
    let jf = g.v.max(0.0).sqrt();
    let grad_log_jf = g.du.map(|d| 0.5 * d / g.v);
    LocalGeometry {
        f,
        df,
        jf,
        grad_log_jf,
    }
}

/// ∇ log JF(x), differentiating the Gram determinant with nested jets.
pub fn grad_log_jacobian<M: VectorField>(map: &M, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != map.dim_in() {
        return Err(Error::DimensionMismatch {
            expected: map.dim_in(),
            got: x.len(),
        });
    }
    crate::error::ensure_finite(x, "input point")?;
    let (jf, g) = match x.len() {
        1 => {
            let lg = local_geometry::<M, 1>(map, &[x[0]]);
            (lg.jf, lg.grad_log_jf.to_vec())
        }
        2 => {
            let lg = local_geometry::<M, 2>(map, &[x[0], x[1]]);
            (lg.jf, lg.grad_log_jf.to_vec())
        }
        d => return Err(Error::Unsupported(format!("input dimension {d} > 2"))),
    };
    if !(jf > JACOBIAN_FLOOR) {
        return Err(Error::DegenerateJacobian {
            value: jf,
            floor: JACOBIAN_FLOOR,
        });
    }
    Ok(g)
}

/// U(x) = ‖F(x)‖² as a scalar field.
pub struct SquaredNorm<'a, M>(pub &'a M);

impl<M: VectorField> VectorField for SquaredNorm<'_, M> {
    fn dim_in(&self) -> usize {
        self.0.dim_in()
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval_into<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        let f = self.0.eval(x);
        out[0] = f.iter().fold(T::cst(0.0), |acc, &v| acc + v * v);
    }
}

/// det(Oᵀ ∇²U O) at a zero x, where U = ‖F‖² and the columns of O are an
/// orthonormal basis of the span of the rows of DF(x).
///
/// The normal space has dimension min(d, p), and at a nondegenerate zero the
/// value is 2^{min(d,p)}·JF(x)².
pub fn normal_hessian_det<M: VectorField>(map: &M, x: &[f64], zero_tol: f64) -> Result<f64> {
    let df = jets::jacobian(map, x)?;
    let f = map.eval(x);
    let residual = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    if residual > zero_tol {
        return Err(Error::OffZeroSet {
            residual,
            tol: zero_tol,
        });
    }
    let jf = generalized_jacobian(map, x)?;
    if !(jf > JACOBIAN_FLOOR) {
        return Err(Error::DegenerateJacobian {
            value: jf,
            floor: JACOBIAN_FLOOR,
        });
    }
    let basis = gram_schmidt_rows(&df, 1e-12 * df.max_abs());
    let h = jets::hessian(&SquaredNorm(map), x)?;
    let r = basis.len();
    let mut reduced = Matrix::zeros(r, r);
    for a in 0..r {
        for b in 0..r {
            let mut s = 0.0;
            for i in 0..x.len() {
                for j in 0..x.len() {
                    s += basis[a][i] * h[(i, j)] * basis[b][j];
                }
            }
            reduced[(a, b)] = s;
        }
    }
    Ok(reduced.det())
}

/// Polar radius of the ellipse a₁x₁² + a₂x₂² = 1 at angle θ.
pub fn conic_radius(a1: f64, a2: f64, theta: f64) -> f64 {
    let c = theta.cos();
    (a2 + (a1 - a2) * c * c).powf(-0.5)
}

/// Point of the ellipse a₁x₁² + a₂x₂² = 1 at polar angle θ.
pub fn conic_point(a1: f64, a2: f64, theta: f64) -> [f64; 2] {
    let r = conic_radius(a1, a2, theta);
    [r * theta.cos(), r * theta.sin()]
}

/// Arc-length factor ℓ(θ) = √(r² + r'²) of the polar parametrization.
pub fn ellipse_arc_factor(a1: f64, a2: f64, theta: f64) -> f64 {
    let c2 = theta.cos().powi(2);
    (a2 * a2 + (a1 * a1 - a2 * a2) * c2).sqrt() * (a2 + (a1 - a2) * c2).powf(-1.5)
}

/// ∫_{F = t} φΨ/JF dH¹ over a level set of the conic F = a₁x₁² + a₂x₂² − 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelSetIntegralSpec {
    pub a1: f64,
    pub a2: f64,
    pub t: f64,
    pub phi: Observable,
    pub weight: Weight,
    /// θ-quadrature nodes (≥ 16), used as a composite rule of order 16.
    pub nodes: usize,
}

pub fn conic_levelset_integral(spec: &LevelSetIntegralSpec) -> Result<f64> {
    let map = SmoothMap::conic(spec.a1, spec.a2)?;
    levelset_integral_on(&map, spec)
}

fn levelset_integral_on(map: &SmoothMap, spec: &LevelSetIntegralSpec) -> Result<f64> {
    if !(spec.t > -1.0) || !spec.t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "level t = {} must exceed −1",
            spec.t
        )));
    }
    if spec.nodes < 16 {
        return Err(Error::InvalidParameter(format!(
            "{} θ nodes; at least 16 required",
            spec.nodes
        )));
    }
    let (a1, a2) = (spec.a1, spec.a2);
    let s = (1.0 + spec.t).sqrt();
    let rule = CompositeRule::new(-PI, PI, spec.nodes.div_ceil(16), 16);
    Ok(rule.integrate(|theta| {
        let [u, v] = conic_point(a1, a2, theta);
        let x = [s * u, s * v];
        let jf = 2.0 * (a1 * a1 * x[0] * x[0] + a2 * a2 * x[1] * x[1]).sqrt();
        let w = match spec.weight {
            Weight::Jacobian => jf,
            other => other.eval(map, &x),
        };
        spec.phi.eval(map, &x) * w / jf * s * ellipse_arc_factor(a1, a2, theta)
    }))
}

/// Rule sizes for [`coarea_residual`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoareaSettings {
    pub order_2d: usize,
    pub min_panels_2d: usize,
    pub order_t: usize,
    pub min_panels_t: usize,
    pub theta_nodes: usize,
    pub tail_tol: f64,
    /// Raise panel counts until panels are half a layer width.
    pub resolve_layer: bool,
}

impl Default for CoareaSettings {
    fn default() -> Self {
        Self {
            order_2d: 8,
            min_panels_2d: 128,
            order_t: 16,
            min_panels_t: 64,
            theta_nodes: 256,
            tail_tol: 1e-12,
            resolve_layer: true,
        }
    }
}

impl CoareaSettings {
    /// Deliberately under-resolved rules.
    pub fn coarse() -> Self {
        Self {
            order_2d: 4,
            min_panels_2d: 8,
            order_t: 4,
            min_panels_t: 2,
            theta_nodes: 16,
            tail_tol: 1e-12,
            resolve_layer: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoareaReport {
    /// ∫ φΨ exp(−|F|^k/ε) dx
    pub lhs: f64,
    /// ∫ exp(−|t|^k/ε) (∫_{F=t} φΨ/JF dH¹) dt
    pub rhs: f64,
    /// |lhs − rhs| / (|lhs| + |rhs|)
    pub rel_residual: f64,
}

/// Both sides of the coarea formula for the conic.
pub fn coarea_residual(
    map: &SmoothMap,
    k: u32,
    eps: f64,
    phi: Observable,
    weight: Weight,
    settings: &CoareaSettings,
) -> Result<CoareaReport> {
    let (a1, a2) = map
        .conic_coefficients()
        .ok_or_else(|| Error::Unsupported(format!("coarea check needs a conic, got `{}`", map.id())))?;
    if !(eps > 0.0) || k == 0 {
        return Err(Error::InvalidParameter(format!("eps = {eps}, k = {k}")));
    }
    let kf = k as f64;
    let scale = eps.powf(1.0 / kf);
    let slope = 2.0 * a1.max(a2).sqrt();
    let r = truncation_radius(map.growth(), k, eps, settings.tail_tol);
    let panels_2d = if settings.resolve_layer {
        resolved_panels(2.0 * r, 0.5 * scale / slope, settings.min_panels_2d)
    } else {
        settings.min_panels_2d
    };
    let rx = CompositeRule::new(-r, r, panels_2d, settings.order_2d);
    let mut lhs = 0.0;
    for (&x, &wx) in rx.nodes().iter().zip(rx.weights()) {
        let mut row = 0.0;
        for (&y, &wy) in rx.nodes().iter().zip(rx.weights()) {
            let p = [x, y];
            let f = a1 * x * x + a2 * y * y - 1.0;
            let g = (-f.abs().powf(kf) / eps).exp();
            if g == 0.0 {
                continue;
            }
            row += wy * g * phi.eval(map, &p) * weight.eval(map, &p);
        }
        lhs += wx * row;
    }

    let t_max = 1.5 * (eps * (1.0 / settings.tail_tol).ln()).powf(1.0 / kf);
    let panels_t = if settings.resolve_layer {
        resolved_panels(1.0 + t_max, 0.5 * scale, settings.min_panels_t)
    } else {
        settings.min_panels_t
    };
    let rt = CompositeRule::new(-1.0, t_max, panels_t, settings.order_t);
    let mut rhs = 0.0;
    for (&t, &wt) in rt.nodes().iter().zip(rt.weights()) {
        let g = (-t.abs().powf(kf) / eps).exp();
        if g == 0.0 {
            continue;
        }
        let level = LevelSetIntegralSpec {
            a1,
            a2,
            t,
            phi,
            weight,
            nodes: settings.theta_nodes,
        };
        rhs += wt * g * levelset_integral_on(map, &level)?;
    }
    Ok(CoareaReport {
        lhs,
        rhs,
        rel_residual: (lhs - rhs).abs() / (lhs.abs() + rhs.abs()),
    })
}
