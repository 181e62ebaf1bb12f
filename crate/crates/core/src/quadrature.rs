//! Deterministic integration: composite Gauss–Legendre rules, truncation of
//! ℝ^d from growth certificates, and the normalizers, moments and CDFs of
//! π_ε^Ψ ∝ Ψ·exp(−‖F‖^k/ε).
//!
//! Panel sums are accumulated sequentially in panel order, so every result
//! is bitwise reproducible.

use crate::catalog::{
    empirical_potential, GrowthCertificate, Observable, PotentialFamily, SmoothMap, Weight,
};
use crate::error::{Error, Result};
use crate::jets::VectorField;

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// A fixed composite rule: `panels` equal sub-intervals, `order` nodes each.
#[derive(Clone, Debug)]
pub struct CompositeRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(mid + 0.5 * h * x);
                weights.push(0.5 * h * w);
            }
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

pub const SUPPORTED_ORDERS: [usize; 4] = [4, 8, 16, 32];

fn check_rule(a: f64, b: f64, panels: usize, order: usize) -> Result<()> {
    if !SUPPORTED_ORDERS.contains(&order) {
        return Err(Error::InvalidParameter(format!(
            "Gauss–Legendre order {order} not in {SUPPORTED_ORDERS:?}"
        )));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("bad interval [{a}, {b}]")));
    }
    if panels == 0 {
        return Err(Error::InvalidParameter("panels must be >= 1".into()));
    }
    Ok(())
}

/// Composite Gauss–Legendre estimate of ∫_a^b f.
pub fn integrate_1d<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> Result<f64> {
    check_rule(a, b, panels, order)?;
    Ok(CompositeRule::new(a, b, panels, order).integrate(f))
}

/// Tensor-product composite rule over a rectangle.
pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    xr: (f64, f64),
    yr: (f64, f64),
    panels: (usize, usize),
    order: usize,
) -> Result<f64> {
    check_rule(xr.0, xr.1, panels.0, order)?;
    check_rule(yr.0, yr.1, panels.1, order)?;
    let rx = CompositeRule::new(xr.0, xr.1, panels.0, order);
    let ry = CompositeRule::new(yr.0, yr.1, panels.1, order);
    let mut total = 0.0;
    for (&x, &wx) in rx.nodes().iter().zip(rx.weights()) {
        let mut row = 0.0;
        for (&y, &wy) in ry.nodes().iter().zip(ry.weights()) {
            row += wy * f(x, y);
        }
        total += wx * row;
    }
    Ok(total)
}

/// Radius beyond which the Gibbs tail is below `tail_tol`:
/// R* = 1.5 · max(R, (ε·ln(1/tol)/m^k)^{1/(αk)}). Never fails; tol ≥ 1 gives 1.5·R.
pub fn truncation_radius(growth: GrowthCertificate, k: u32, eps: f64, tail_tol: f64) -> f64 {
    let log_term = (1.0 / tail_tol).ln().max(0.0);
    let ak = growth.alpha * k as f64;
    let tail = (eps * log_term / growth.m.powi(k as i32)).powf(1.0 / ak);
    1.5 * growth.r.max(tail)
}

/// (F, k, ε, Ψ) defining π_ε^Ψ.
#[derive(Clone, Debug)]
pub struct GibbsSpec {
    pub map: SmoothMap,
    pub k: u32,
    pub eps: f64,
    pub weight: Weight,
}

impl GibbsSpec {
    pub fn new(map: SmoothMap, k: u32, eps: f64, weight: Weight) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "temperature eps = {eps} must be > 0"
            )));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("exponent k must be >= 1".into()));
        }
        if !weight.positive_on_zeros(&map) {
            return Err(Error::InvalidParameter(format!(
                "weight `{}` vanishes on the zero set of `{}` (H2)",
                weight.name(),
                map.id()
            )));
        }
        Ok(Self { map, k, eps, weight })
    }

    /// Unnormalized density Ψ(x)·exp(−‖F(x)‖^k/ε).
    pub fn density(&self, x: &[f64]) -> f64 {
        let f = self.map.eval(x);
        let n2: f64 = f.iter().map(|v| v * v).sum();
        let energy = if self.k == 2 {
            n2
        } else {
            n2.sqrt().powi(self.k as i32)
        };
        let psi = self.weight.eval(&self.map, x);
        psi * (-energy / self.eps).exp()
    }

    /// Width of the concentration layer around F⁻¹(0) in x-units:
    /// ε^{1/k} divided by the steepest |JF| among the catalog zeros.
    pub fn layer_width(&self) -> f64 {
        let slope = self
            .map
            .known_zeros()
            .iter()
            .filter_map(|z| crate::geometry::generalized_jacobian(&self.map, z).ok())
            .fold(1e-3f64, f64::max);
        self.eps.powf(1.0 / self.k as f64) / slope
    }
}

/// Quadrature settings. `panels` and `panels_2d` are minimums: the Gibbs
/// integrals raise them so that each panel is at most half a layer width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSettings {
    pub order: usize,
    pub panels: usize,
    pub order_2d: usize,
    pub panels_2d: usize,
    pub tail_tol: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            order: 16,
            panels: 64,
            order_2d: 8,
            panels_2d: 128,
            tail_tol: 1e-12,
        }
    }
}

impl QuadratureSettings {
    /// Same rule with `factor`× as many panels everywhere.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            panels: self.panels * factor,
            panels_2d: self.panels_2d * factor,
            ..*self
        }
    }
}

/// Panel count so that each panel is at most `max_width` wide.
pub(crate) fn resolved_panels(len: f64, max_width: f64, min_panels: usize) -> usize {
    let needed = (len / max_width).ceil();
    if needed.is_finite() {
        min_panels.max(needed as usize)
    } else {
        min_panels
    }
}

/// How a panel count scales when the caller asks for a refinement.
fn scaled_panels(base: usize, requested: usize, len: f64, width: f64, default_min: usize) -> usize {
    let auto = resolved_panels(len, 0.5 * width, default_min);
    // Requested panels above the default are treated as a refinement factor
    // on top of the resolution rule.
    let factor = (requested as f64 / default_min as f64).max(1.0);
    ((auto as f64 * factor).ceil() as usize).max(requested).max(base)
}

fn weighted_integral<G: FnMut(&[f64]) -> f64>(
    spec: &GibbsSpec,
    settings: &QuadratureSettings,
    mut g: G,
) -> Result<f64> {
    let r = truncation_radius(spec.map.growth(), spec.k, spec.eps, settings.tail_tol);
    let width = spec.layer_width();
    match spec.map.d() {
        1 => {
            let defaults = QuadratureSettings::default();
            let panels = scaled_panels(1, settings.panels, 2.0 * r, width, defaults.panels);
            integrate_1d(
                |x| {
                    let p = [x];
                    spec.density(&p) * g(&p)
                },
                -r,
                r,
                panels,
                settings.order,
            )
        }
        2 => {
            let defaults = QuadratureSettings::default();
            let panels = scaled_panels(1, settings.panels_2d, 2.0 * r, width, defaults.panels_2d);
            integrate_2d(
                |x, y| {
                    let p = [x, y];
                    spec.density(&p) * g(&p)
                },
                (-r, r),
                (-r, r),
                (panels, panels),
                settings.order_2d,
            )
        }
        d => Err(Error::Unsupported(format!(
            "Gibbs quadrature in dimension {d} (only 1 and 2)"
        ))),
    }
}

/// J_ε = ∫ Ψ·exp(−‖F‖^k/ε) over the truncated box.
pub fn gibbs_normalizer(spec: &GibbsSpec, settings: &QuadratureSettings) -> Result<f64> {
    weighted_integral(spec, settings, |_| 1.0)
}

/// π_ε^Ψ[φ], already divided by the normalizer.
pub fn gibbs_moment(spec: &GibbsSpec, phi: Observable, settings: &QuadratureSettings) -> Result<f64> {
    let z = gibbs_normalizer(spec, settings)?;
    let num = weighted_integral(spec, settings, |x| phi.eval(&spec.map, x))?;
    Ok(num / z)
}

/// C_k = ∫‖t‖^k e^{−‖t‖^k} dt / ∫e^{−‖t‖^k} dt over ℝ^p.
///
/// Returns the closed form p/k after checking it against a radial quadrature
/// of the two integrals.
pub fn c_k_constant(p: u32, k: u32) -> Result<f64> {
    if p == 0 || k == 0 {
        return Err(Error::InvalidParameter("p and k must be >= 1".into()));
    }
    let closed = p as f64 / k as f64;
    let quad = c_k_radial_quadrature(p, k);
    if (quad - closed).abs() > 1e-10 * closed {
        return Err(Error::Consistency(format!(
            "C_k radial quadrature {quad} disagrees with p/k = {closed}"
        )));
    }
    Ok(closed)
}

/// The ratio with the common sphere area cancelled:
/// ∫₀^∞ r^{k+p−1}e^{−r^k} dr / ∫₀^∞ r^{p−1}e^{−r^k} dr.
pub fn c_k_radial_quadrature(p: u32, k: u32) -> f64 {
    let kf = k as f64;
    // e^{−r^k} < e^{−60} past this radius, far below the target accuracy.
    let upper = 60f64.powf(1.0 / kf);
    let rule = CompositeRule::new(0.0, upper, 400, 32);
    let pm1 = p as i32 - 1;
    let num = rule.integrate(|r| r.powi(k as i32 + pm1) * (-r.powi(k as i32)).exp());
    let den = rule.integrate(|r| r.powi(pm1) * (-r.powi(k as i32)).exp());
    num / den
}

/// A tabulated one-dimensional density with its CDF.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    grid: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridDensity {
    /// Tabulate a nonnegative function; normalization and cumulation use the
    /// trapezoid rule on the grid, so the CDF is exactly the integral of the
    /// piecewise-linear interpolant of the density.
    pub fn from_values(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidParameter(
                "grid density needs >= 2 nodes and matching values".into(),
            ));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "density values must be finite and >= 0".into(),
            ));
        }
        let mut cdf = Vec::with_capacity(grid.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 1..grid.len() {
            acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::InvalidParameter(
                "density has zero mass on the grid".into(),
            ));
        }
        let density = values.iter().map(|v| v / acc).collect();
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self { grid, density, cdf })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// CDF at x, interpolated linearly between nodes.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g[0] {
            return 0.0;
        }
        if x >= g[g.len() - 1] {
            return 1.0;
        }
        let i = g.partition_point(|&v| v <= x) - 1;
        let t = (x - g[i]) / (g[i + 1] - g[i]);
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Interior grid nodes that are strict local maxima of the density and
    /// carry at least `rel_height` of the global maximum.
    pub fn peaks(&self, rel_height: f64) -> Vec<f64> {
        let d = &self.density;
        let top = d.iter().copied().fold(0.0, f64::max);
        (1..d.len() - 1)
            .filter(|&i| d[i] > d[i - 1] && d[i] >= d[i + 1] && d[i] >= rel_height * top)
            .map(|i| self.grid[i])
            .collect()
    }
}

/// Tabulate π_ε^Ψ for a map with d = 1 on `grid_n` equally spaced nodes.
///
/// The tabulated interval is the part of the truncation box where the
/// density exceeds `tail_tol` times its maximum, found on a scan resolving
/// the concentration layer, and padded by a few scan steps.
pub fn gibbs_cdf(spec: &GibbsSpec, grid_n: usize, tail_tol: f64) -> Result<GridDensity> {
    if spec.map.d() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: spec.map.d(),
        });
    }
    if grid_n < 256 {
        return Err(Error::InvalidParameter(format!(
            "grid_n = {grid_n} must be >= 256"
        )));
    }
    let r = truncation_radius(spec.map.growth(), spec.k, spec.eps, tail_tol);
    let scan_n = resolved_panels(2.0 * r, 0.25 * spec.layer_width(), 100_000) + 1;
    let h = 2.0 * r / (scan_n - 1) as f64;
    let vals: Vec<f64> = (0..scan_n).map(|i| spec.density(&[-r + h * i as f64])).collect();
    let top = vals.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::Consistency("Gibbs density underflows everywhere".into()));
    }
    let keep = |v: &f64| *v > tail_tol * top;
    let first = vals.iter().position(keep).unwrap_or(0);
    let last = vals.iter().rposition(keep).unwrap_or(scan_n - 1);
    let lo = (-r + h * first as f64 - 4.0 * h).max(-r);
    let hi = (-r + h * last as f64 + 4.0 * h).min(r);
    let step = (hi - lo) / (grid_n - 1) as f64;
    let grid: Vec<f64> = (0..grid_n).map(|i| lo + step * i as f64).collect();
    let values = grid.iter().map(|&x| spec.density(&[x])).collect();
    GridDensity::from_values(grid, values)
}

/// Tabulate exp(−U_n/ε) for a potential family, U_n(x) = (1/n)Σ u(x, z_i),
/// on `grid_n` equally spaced nodes of the family's domain.
pub fn family_gibbs_cdf(
    family: PotentialFamily,
    data: &[f64],
    eps: f64,
    grid_n: usize,
) -> Result<GridDensity> {
    if data.is_empty() || !(eps > 0.0) || grid_n < 256 {
        return Err(Error::InvalidParameter(
            "family tabulation needs data, eps > 0 and grid_n >= 256".into(),
        ));
    }
    let (a, b) = family.domain();
    let h = (b - a) / (grid_n - 1) as f64;
    let grid: Vec<f64> = (0..grid_n).map(|i| a + h * i as f64).collect();
    let u: Vec<f64> = grid
        .iter()
        .map(|&x| empirical_potential(family, x, data))
        .collect();
    let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
    let values = u.iter().map(|v| (-(v - lo) / eps).exp()).collect();
    GridDensity::from_values(grid, values)
}
