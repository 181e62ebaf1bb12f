//! Empirical, atomic and tabulated measures, and the distances used to
//! compare them: exact W₁ on the line and on the circle, histogram total
//! variation, and log-log rate fits.

use std::f64::consts::PI;

use crate::error::{ensure_finite, Error, Result};
use crate::quadrature::{CompositeRule, GridDensity};

/// Samples in ℝ^dim stored flat. One-dimensional measures are kept sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    coords: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} coordinates do not form points of dimension {dim}",
                coords.len()
            )));
        }
        ensure_finite(&coords, "samples")?;
        let mut m = Self { dim, coords };
        if dim == 1 {
            m.coords.sort_by(f64::total_cmp);
        }
        Ok(m)
    }

    pub fn from_1d(samples: Vec<f64>) -> Result<Self> {
        Self::new(1, samples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// The sorted samples of a one-dimensional measure.
    pub fn values(&self) -> Option<&[f64]> {
        (self.dim == 1).then_some(self.coords.as_slice())
    }

    pub fn raw(&self) -> &[f64] {
        &self.coords
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        let mut m = vec![0.0; self.dim];
        for p in self.points() {
            for (a, b) in m.iter_mut().zip(p) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Concatenate measures of equal dimension. One-dimensional samples end up sorted.
    pub fn concat(parts: &[EmpiricalMeasure]) -> Result<Self> {
        let dim = parts.first().map_or(1, |p| p.dim);
        if let Some(bad) = parts.iter().find(|p| p.dim != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim,
            });
        }
        let coords = parts.iter().flat_map(|p| p.coords.iter().copied()).collect();
        Self::new(dim, coords)
    }
}

/// Finitely many weighted atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Atoms closer than this are considered the same point.
pub const ATOM_SEPARATION: f64 = 1e-6;

impl AtomicMeasure {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidParameter(
                "atomic measure needs matching, non-empty atoms and weights".into(),
            ));
        }
        let dim = atoms[0].len();
        if atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidParameter("atoms of mixed dimension".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("negative atom weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        for i in 0..atoms.len() {
            for j in 0..i {
                let d = crate::linalg::norm(
                    &atoms[i]
                        .iter()
                        .zip(&atoms[j])
                        .map(|(a, b)| a - b)
                        .collect::<Vec<_>>(),
                );
                if d <= ATOM_SEPARATION {
                    return Err(Error::InvalidParameter(format!(
                        "atoms {:?} and {:?} are not distinct",
                        atoms[i], atoms[j]
                    )));
                }
            }
        }
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&a, &b| atoms[a].partial_cmp(&atoms[b]).unwrap());
        Ok(Self {
            atoms: order.iter().map(|&i| atoms[i].clone()).collect(),
            weights: order.iter().map(|&i| weights[i]).collect(),
        })
    }

    /// Normalize nonnegative masses to weights.
    pub fn from_masses(atoms: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidParameter(format!("total mass {total}")));
        }
        let mut w: Vec<f64> = masses.iter().map(|m| m / total).collect();
        // Put the rounding error on the largest weight so the sum is 1.
        let rest: f64 = 1.0 - w.iter().sum::<f64>();
        if let Some(i) = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])) {
            w[i] += rest;
        }
        Self::new(atoms, w)
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    /// Atom positions of a one-dimensional measure.
    pub fn positions_1d(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a[0]).collect()
    }
}

/// A density on [−π, π) stored as averages over `n` equal cells.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleDensity {
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl AngleDensity {
    /// Cell averages of a nonnegative function, normalized to total mass 1.
    pub fn from_fn<F: FnMut(f64) -> f64>(cells: usize, mut f: F) -> Result<Self> {
        if cells < 2 {
            return Err(Error::InvalidParameter("need at least 2 cells".into()));
        }
        let h = 2.0 * PI / cells as f64;
        let mut masses = Vec::with_capacity(cells);
        for i in 0..cells {
            let a = -PI + h * i as f64;
            let m = CompositeRule::new(a, a + h, 1, 8).integrate(&mut f);
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::NonFinite(format!("cell {i} mass {m}")));
            }
            masses.push(m);
        }
        Self::from_masses(masses)
    }

    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("zero total mass".into()));
        }
        let h = 2.0 * PI / masses.len() as f64;
        let mut cdf = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m / total;
            cdf.push(acc);
        }
        let density = masses.iter().map(|m| m / total / h).collect();
        Ok(Self { density, cdf })
    }

    pub fn cells(&self) -> usize {
        self.density.len()
    }

    pub fn cell_width(&self) -> f64 {
        2.0 * PI / self.cells() as f64
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        let h = self.cell_width();
        (0..self.cells()).map(|i| -PI + h * (i as f64 + 0.5)).collect()
    }

    /// Average density over each cell.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// CDF at the right edge of each cell.
    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// CDF from −π, linear within cells.
    pub fn cdf_at(&self, theta: f64) -> f64 {
        let h = self.cell_width();
        let s = ((theta + PI) / h).clamp(0.0, self.cells() as f64);
        let i = (s.floor() as usize).min(self.cells() - 1);
        let left = if i == 0 { 0.0 } else { self.cdf[i - 1] };
        left + (s - i as f64) * (self.cdf[i] - left)
    }
}

/// Piecewise description of a one-dimensional CDF: knots, with the left
/// limit and value at each knot. Between knots the CDF is constant (steps)
/// or linear (tabulated densities).
#[derive(Clone, Debug)]
struct CdfView {
    knots: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    linear: bool,
}

impl CdfView {
    fn steps(points: &[f64], weights: &[f64]) -> Self {
        let mut knots: Vec<f64> = Vec::with_capacity(points.len());
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut acc = 0.0;
        for (&x, &w) in points.iter().zip(weights) {
            if knots.last() == Some(&x) {
                acc += w;
                *right.last_mut().unwrap() = acc;
            } else {
                knots.push(x);
                left.push(acc);
                acc += w;
                right.push(acc);
            }
        }
        Self {
            knots,
            left,
            right,
            linear: false,
        }
    }

    fn linear(knots: Vec<f64>, values: Vec<f64>) -> Self {
        Self {
            knots,
            left: values.clone(),
            right: values,
            linear: true,
        }
    }

    /// (F(x−), F(x)).
    fn at(&self, x: f64) -> (f64, f64) {
        let i = self.knots.partition_point(|&k| k < x);
        if i < self.knots.len() && self.knots[i] == x {
            return (self.left[i], self.right[i]);
        }
        let v = if i == 0 {
            0.0
        } else if i == self.knots.len() {
            *self.right.last().unwrap()
        } else if self.linear {
            let (a, b) = (self.knots[i - 1], self.knots[i]);
            let t = (x - a) / (b - a);
            self.right[i - 1] + t * (self.left[i] - self.right[i - 1])
        } else {
            self.right[i - 1]
        };
        (v, v)
    }
}

/// A one-dimensional measure accepted by [`w1_line`].
#[derive(Clone, Copy, Debug)]
pub enum Measure1d<'a> {
    Empirical(&'a EmpiricalMeasure),
    Atomic(&'a AtomicMeasure),
    Grid(&'a GridDensity),
}

impl<'a> From<&'a EmpiricalMeasure> for Measure1d<'a> {
    fn from(m: &'a EmpiricalMeasure) -> Self {
        Measure1d::Empirical(m)
    }
}

impl<'a> From<&'a AtomicMeasure> for Measure1d<'a> {
    fn from(m: &'a AtomicMeasure) -> Self {
        Measure1d::Atomic(m)
    }
}

impl<'a> From<&'a GridDensity> for Measure1d<'a> {
    fn from(m: &'a GridDensity) -> Self {
        Measure1d::Grid(m)
    }
}

impl Measure1d<'_> {
    fn view(&self) -> Result<CdfView> {
        match self {
            Measure1d::Empirical(m) => {
                let v = m.values().ok_or(Error::DimensionMismatch {
                    expected: 1,
                    got: m.dim(),
                })?;
                if v.is_empty() {
                    return Err(Error::InvalidParameter("empty sample".into()));
                }
                let w = vec![1.0 / v.len() as f64; v.len()];
                Ok(CdfView::steps(v, &w))
            }
            Measure1d::Atomic(m) => {
                if m.dim() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: m.dim(),
                    });
                }
                Ok(CdfView::steps(&m.positions_1d(), m.weights()))
            }
            Measure1d::Grid(g) => Ok(CdfView::linear(g.grid().to_vec(), g.cdf().to_vec())),
        }
    }
}

/// ∫ |D| over [a, b] for D linear from d0 to d1.
fn abs_linear_integral(d0: f64, d1: f64, h: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * (d0.abs() + d1.abs()) * h
    } else {
        0.5 * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs()) * h
    }
}

/// Segments (length, D at left end, D at right end) of D = F_a − F_b over
/// the merged knots within [lo, hi].
fn difference_segments(a: &CdfView, b: &CdfView, lo: f64, hi: f64) -> Vec<(f64, f64, f64)> {
    let mut knots: Vec<f64> = a
        .knots
        .iter()
        .chain(&b.knots)
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots
        .windows(2)
        .map(|w| {
            let (_, ar) = a.at(w[0]);
            let (_, br) = b.at(w[0]);
            let (al, _) = a.at(w[1]);
            let (bl, _) = b.at(w[1]);
            (w[1] - w[0], ar - br, al - bl)
        })
        .collect()
}

/// W₁ on ℝ as ∫|F_μ − F_ν|, exact for step and piecewise-linear CDFs.
pub fn w1_line<'a, 'b>(mu: impl Into<Measure1d<'a>>, nu: impl Into<Measure1d<'b>>) -> Result<f64> {
    let a = mu.into().view()?;
    let b = nu.into().view()?;
    let lo = a.knots[0].min(b.knots[0]);
    let hi = a.knots.last().unwrap().max(*b.knots.last().unwrap());
    if lo == hi {
        return Ok(0.0);
    }
    Ok(difference_segments(&a, &b, lo, hi)
        .into_iter()
        .map(|(h, d0, d1)| abs_linear_integral(d0, d1, h))
        .sum())
}

/// A measure on the circle [−π, π) accepted by [`w1_circular`].
#[derive(Clone, Copy, Debug)]
pub enum CircleMeasure<'a> {
    Samples(&'a EmpiricalMeasure),
    Density(&'a AngleDensity),
}

impl<'a> From<&'a EmpiricalMeasure> for CircleMeasure<'a> {
    fn from(m: &'a EmpiricalMeasure) -> Self {
        CircleMeasure::Samples(m)
    }
}

impl<'a> From<&'a AngleDensity> for CircleMeasure<'a> {
    fn from(m: &'a AngleDensity) -> Self {
        CircleMeasure::Density(m)
    }
}

impl CircleMeasure<'_> {
    fn view(&self) -> Result<CdfView> {
        match self {
            CircleMeasure::Samples(m) => {
                let v = m.values().ok_or(Error::DimensionMismatch {
                    expected: 1,
                    got: m.dim(),
                })?;
                if v.is_empty() {
                    return Err(Error::InvalidParameter("empty sample".into()));
                }
                if v.iter().any(|&t| !(-PI..PI).contains(&t)) {
                    return Err(Error::InvalidParameter("angles must lie in [−π, π)".into()));
                }
                let w = vec![1.0 / v.len() as f64; v.len()];
                Ok(CdfView::steps(v, &w))
            }
            CircleMeasure::Density(d) => {
                let h = d.cell_width();
                let mut knots = vec![-PI];
                let mut vals = vec![0.0];
                for (i, c) in d.cdf().iter().enumerate() {
                    knots.push(-PI + h * (i + 1) as f64);
                    vals.push(*c);
                }
                Ok(CdfView::linear(knots, vals))
            }
        }
    }
}

/// W₁ on the circle of circumference 2π: min over c of ∫|F_μ − F_ν − c|,
/// attained at a median of F_μ − F_ν.
pub fn w1_circular<'a, 'b>(
    mu: impl Into<CircleMeasure<'a>>,
    nu: impl Into<CircleMeasure<'b>>,
) -> Result<f64> {
    let a = mu.into().view()?;
    let b = nu.into().view()?;
    let segs = difference_segments(&a, &b, -PI, PI);
    // Lebesgue measure of {D ≤ c}, exact per linear segment.
    let below = |c: f64| -> f64 {
        segs.iter()
            .map(|&(h, d0, d1)| {
                let (lo, hi) = (d0.min(d1), d0.max(d1));
                if c >= hi {
                    h
                } else if c < lo {
                    0.0
                } else {
                    h * (c - lo) / (hi - lo)
                }
            })
            .sum()
    };
    let mut lo = segs.iter().map(|s| s.1.min(s.2)).fold(f64::INFINITY, f64::min);
    let mut hi = segs
        .iter()
        .map(|s| s.1.max(s.2))
        .fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) >= PI {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let c = hi;
    Ok(segs
        .iter()
        .map(|&(h, d0, d1)| abs_linear_integral(d0 - c, d1 - c, h))
        .sum())
}

/// Reference measure for [`tv_histogram`].
#[derive(Clone, Copy, Debug)]
pub enum BinTarget<'a> {
    Grid(&'a GridDensity),
    Angle(&'a AngleDensity),
}

impl<'a> From<&'a GridDensity> for BinTarget<'a> {
    fn from(m: &'a GridDensity) -> Self {
        BinTarget::Grid(m)
    }
}

impl<'a> From<&'a AngleDensity> for BinTarget<'a> {
    fn from(m: &'a AngleDensity) -> Self {
        BinTarget::Angle(m)
    }
}

/// ½ Σ |empirical − target| over `bins` equal bins spanning the target's
/// support. Samples outside the support count entirely toward the distance.
pub fn tv_histogram<'a>(
    samples: &EmpiricalMeasure,
    target: impl Into<BinTarget<'a>>,
    bins: usize,
) -> Result<f64> {
    let v = samples.values().ok_or(Error::DimensionMismatch {
        expected: 1,
        got: samples.dim(),
    })?;
    if v.is_empty() || bins == 0 {
        return Err(Error::InvalidParameter(
            "need samples and at least one bin".into(),
        ));
    }
    let target = target.into();
    let (lo, hi) = match target {
        BinTarget::Grid(g) => (g.grid()[0], *g.grid().last().unwrap()),
        BinTarget::Angle(_) => (-PI, PI),
    };
    let cdf = |x: f64| match target {
        BinTarget::Grid(g) => g.cdf_at(x),
        BinTarget::Angle(a) => a.cdf_at(x),
    };
    let h = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0usize;
    for &x in v {
        if x < lo || x > hi {
            outside += 1;
        } else {
            counts[(((x - lo) / h) as usize).min(bins - 1)] += 1;
        }
    }
    let n = v.len() as f64;
    let mut tv = outside as f64 / n;
    for (i, &c) in counts.iter().enumerate() {
        let a = lo + h * i as f64;
        let mass = cdf(a + h) - cdf(a);
        tv += (c as f64 / n - mass).abs();
    }
    Ok(0.5 * tv)
}

/// Fraction of samples nearest to each atom position.
pub fn nearest_atom_histogram(samples: &EmpiricalMeasure, atoms: &[f64]) -> Result<Vec<f64>> {
    let v = samples.values().ok_or(Error::DimensionMismatch {
        expected: 1,
        got: samples.dim(),
    })?;
    if atoms.is_empty() || v.is_empty() {
        return Err(Error::InvalidParameter("need samples and atoms".into()));
    }
    let mut counts = vec![0usize; atoms.len()];
    for &x in v {
        let j = (0..atoms.len())
            .min_by(|&a, &b| (x - atoms[a]).abs().total_cmp(&(x - atoms[b]).abs()))
            .unwrap();
        counts[j] += 1;
    }
    Ok(counts.iter().map(|&c| c as f64 / v.len() as f64).collect())
}

/// ½ Σ |a_i − b_i|.
pub fn tv_weights(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Least-squares line through (log ε, log value).
#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

pub fn rate_fit(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 2 {
        return Err(Error::InvalidParameter("rate fit needs at least 2 points".into()));
    }
    if pairs.iter().any(|&(e, v)| !(e > 0.0) || !(v > 0.0)) {
        return Err(Error::InvalidParameter(
            "rate fit needs positive ε and values".into(),
        ));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all ε values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        residuals,
    })
}

/// Polar angle in [−π, π).
pub fn angle_of(x: f64, y: f64) -> Result<f64> {
    if x.hypot(y) < 1e-12 {
        return Err(Error::InvalidParameter(format!("angle undefined at ({x}, {y})")));
    }
    let t = y.atan2(x);
    Ok(if t >= PI { -PI } else { t })
}

/// Push planar samples forward to their polar angles.
pub fn angle_pushforward(samples: &EmpiricalMeasure) -> Result<EmpiricalMeasure> {
    if samples.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: samples.dim(),
        });
    }
    let angles = samples
        .points()
        .map(|p| angle_of(p[0], p[1]))
        .collect::<Result<Vec<_>>>()?;
    EmpiricalMeasure::from_1d(angles)
}
