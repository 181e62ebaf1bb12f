//! ε → 0 limit objects: zero sets and atomic limits, the conic curve
//! density, the S₀ kernel of a potential family, the minimizer Monte Carlo,
//! and the two-point barrier model.

use crate::catalog::{PotentialFamily, SmoothMap, Weight};
use crate::error::{Error, Result};
use crate::geometry::{conic_point, ellipse_arc_factor, generalized_jacobian, JACOBIAN_FLOOR};
use crate::jets::{self, VectorField};
use crate::measures::{AngleDensity, AtomicMeasure};
use crate::quadrature::CompositeRule;
use crate::rng::SeededGenerator;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroFindingConfig {
    pub grid_n: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub dedup_tol: f64,
}

impl Default for ZeroFindingConfig {
    fn default() -> Self {
        Self {
            grid_n: 2048,
            newton_tol: 1e-12,
            max_newton_iters: 60,
            dedup_tol: 1e-6,
        }
    }
}

/// Found zeros, plus sign-change brackets where no seed converged.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroSet {
    pub zeros: Vec<f64>,
    pub unresolved: Vec<(f64, f64)>,
}

/// Gauss–Newton on ‖F‖² from one seed. Iterates until the step stalls so
/// that slowly converging (degenerate) zeros are fully polished.
fn gauss_newton(map: &SmoothMap, mut x: f64, cfg: &ZeroFindingConfig) -> Option<f64> {
    for _ in 0..cfg.max_newton_iters {
        let (f, rows) = jets::value_and_jacobian_n::<_, 1>(map, &[x]);
        let jtf: f64 = f.iter().zip(&rows).map(|(v, r)| v * r[0]).sum();
        let jtj: f64 = rows.iter().map(|r| r[0] * r[0]).sum();
        if f.iter().all(|v| *v == 0.0) || jtj == 0.0 {
            break;
        }
        let dx = jtf / jtj;
        if !dx.is_finite() {
            return None;
        }
        x -= dx;
        if dx.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    let res = map.eval(&[x]).iter().map(|v| v * v).sum::<f64>().sqrt();
    (res <= cfg.newton_tol).then_some(x)
}

/// Zeros of a map with d = 1 inside its domain box.
pub fn find_zeros(map: &SmoothMap, cfg: &ZeroFindingConfig) -> Result<ZeroSet> {
    if map.d() != 1 {
        return Err(Error::Unsupported(format!(
            "zero finding needs d = 1, `{}` has d = {}",
            map.id(),
            map.d()
        )));
    }
    if !(cfg.newton_tol < cfg.dedup_tol) || cfg.grid_n < 2 {
        return Err(Error::InvalidParameter(
            "zero finding needs newton_tol < dedup_tol and grid_n >= 2".into(),
        ));
    }
    let (a, b) = map.domain_box()[0];
    let h = (b - a) / (cfg.grid_n - 1) as f64;
    let seeds: Vec<f64> = (0..cfg.grid_n).map(|i| a + h * i as f64).collect();
    let mut found: Vec<f64> = seeds
        .iter()
        .filter_map(|&s| gauss_newton(map, s, cfg))
        .filter(|&z| z >= a && z <= b)
        .collect();
    found.sort_by(f64::total_cmp);
    let mut zeros: Vec<f64> = Vec::new();
    let residual = |x: f64| map.eval(&[x]).iter().map(|v| v * v).sum::<f64>();
    for z in found {
        match zeros.last_mut() {
            Some(last) if (z - *last).abs() <= cfg.dedup_tol => {
                if residual(z) < residual(*last) {
                    *last = z;
                }
            }
            _ => zeros.push(z),
        }
    }
    let mut unresolved = Vec::new();
    if map.p() == 1 {
        for w in seeds.windows(2) {
            let (fa, fb) = (map.eval(&[w[0]])[0], map.eval(&[w[1]])[0]);
            if fa * fb < 0.0
                && !zeros
                    .iter()
                    .any(|&z| z >= w[0] - cfg.dedup_tol && z <= w[1] + cfg.dedup_tol)
            {
                unresolved.push((w[0], w[1]));
            }
        }
    }
    Ok(ZeroSet { zeros, unresolved })
}

/// π₀^Ψ on a finite zero set: weights ∝ Ψ/JF.
pub fn atomic_limit(map: &SmoothMap, weight: Weight, cfg: &ZeroFindingConfig) -> Result<AtomicMeasure> {
    let zs = find_zeros(map, cfg)?;
    if zs.zeros.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "`{}` has no zeros in its domain box",
            map.id()
        )));
    }
    let mut masses = Vec::with_capacity(zs.zeros.len());
    for &z in &zs.zeros {
        let jf = generalized_jacobian(map, &[z])?;
        if !(jf > JACOBIAN_FLOOR) {
            return Err(Error::H1Violation { point: vec![z], jf });
        }
        let psi = match weight {
            Weight::Jacobian => jf,
            w => w.eval(map, &[z]),
        };
        masses.push(psi / jf);
    }
    AtomicMeasure::from_masses(zs.zeros.iter().map(|&z| vec![z]).collect(), masses)
}

/// Limit density of the conic over the polar angle: ∝ ℓ(θ)·(Ψ/JF) on the
/// curve a₁x₁² + a₂x₂² = 1, averaged over `grid_n` equal cells.
pub fn conic_limit_density(a1: f64, a2: f64, weight: Weight, grid_n: usize) -> Result<AngleDensity> {
    let map = SmoothMap::conic(a1, a2)?;
    AngleDensity::from_fn(grid_n, |theta| {
        let x = conic_point(a1, a2, theta);
        let ell = ellipse_arc_factor(a1, a2, theta);
        match weight {
            Weight::Jacobian => ell,
            w => {
                let jf = 2.0 * (a1 * a1 * x[0] * x[0] + a2 * a2 * x[1] * x[1]).sqrt();
                ell * w.eval(&map, &x) / jf
            }
        }
    })
}

/// Global-minimizer search for a potential family slice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinimizerSearch {
    pub grid_n: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Local minima within this of the global minimum value are kept.
    pub value_tol: f64,
    pub dedup_tol: f64,
}

impl Default for MinimizerSearch {
    fn default() -> Self {
        Self {
            grid_n: 2048,
            newton_tol: 1e-12,
            max_newton_iters: 50,
            value_tol: 1e-9,
            dedup_tol: 1e-6,
        }
    }
}

pub const HESSIAN_FLOOR: f64 = 1e-8;

/// Local minima of x ↦ u(x, z̄) over the family's domain, Newton-polished.
fn local_minima(family: PotentialFamily, zbar: f64, cfg: &MinimizerSearch) -> Vec<(f64, f64, f64)> {
    let (a, b) = family.domain();
    let h = (b - a) / (cfg.grid_n - 1) as f64;
    let vals: Vec<f64> = (0..cfg.grid_n)
        .map(|i| family.eval_generic(a + h * i as f64, zbar))
        .collect();
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    for i in 0..cfg.grid_n {
        let left = if i == 0 { f64::INFINITY } else { vals[i - 1] };
        let right = if i + 1 == cfg.grid_n {
            f64::INFINITY
        } else {
            vals[i + 1]
        };
        if !(vals[i] <= left && vals[i] <= right) {
            continue;
        }
        let mut x = a + h * i as f64;
        for _ in 0..cfg.max_newton_iters {
            let (_, ux, uxx) = family.derivatives(x, zbar);
            let dx = if uxx > 0.0 { ux / uxx } else { ux.signum() * h };
            let dx = dx.clamp(-h, h);
            x = (x - dx).clamp(a, b);
            if dx.abs() <= cfg.newton_tol {
                break;
            }
        }
        let (u, ux, uxx) = family.derivatives(x, zbar);
        if ux.abs() > 1e-8 || uxx < 0.0 {
            continue;
        }
        if out.iter().any(|m| (m.0 - x).abs() <= cfg.dedup_tol) {
            continue;
        }
        out.push((x, u, uxx));
    }
    out
}

/// S₀(z̄): global minimizers of u(·, z̄) weighted ∝ (∂ₓ²u)^{−1/2}.
pub fn s0_for_family(
    family: PotentialFamily,
    zbar: f64,
    cfg: &MinimizerSearch,
    hessian_floor: f64,
) -> Result<AtomicMeasure> {
    if family != PotentialFamily::Eq13 {
        return Err(Error::Unsupported(format!(
            "S₀ by continuous minimization needs eq13, got `{}`",
            family.id()
        )));
    }
    if !zbar.is_finite() {
        return Err(Error::NonFinite(format!("z̄ = {zbar}")));
    }
    let minima = local_minima(family, zbar, cfg);
    let best = minima.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let mut atoms = Vec::new();
    let mut masses = Vec::new();
    for &(x, u, uxx) in &minima {
        if u - best > cfg.value_tol {
            continue;
        }
        if !(uxx > hessian_floor) {
            return Err(Error::SingularHessian { point: x, value: uxx });
        }
        atoms.push(vec![x]);
        masses.push(uxx.powf(-0.5));
    }
    AtomicMeasure::from_masses(atoms, masses)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prop10Result {
    pub mean_excess: f64,
    pub positive_side_fraction: f64,
    /// min of U = u(·, 0), found numerically.
    pub u_star: f64,
}

/// Excess U(S₀(z̄)) − U* for one dataset, as (atoms, excess).
pub fn prop10_trial(data: &[f64], u_star: f64, cfg: &MinimizerSearch) -> Result<(AtomicMeasure, f64)> {
    let fam = PotentialFamily::Eq13;
    let zbar = data.iter().sum::<f64>() / data.len() as f64;
    let s0 = s0_for_family(fam, zbar, cfg, HESSIAN_FLOOR)?;
    let excess: f64 = s0
        .positions_1d()
        .iter()
        .zip(s0.weights())
        .map(|(&x, &w)| w * fam.eval_generic(x, 0.0))
        .sum::<f64>()
        - u_star;
    Ok((s0, excess))
}

/// Minimum value of u(·, 0).
pub fn eq13_u_star(cfg: &MinimizerSearch) -> f64 {
    local_minima(PotentialFamily::Eq13, 0.0, cfg)
        .iter()
        .map(|m| m.1)
        .fold(f64::INFINITY, f64::min)
}

/// Monte Carlo over datasets z^{1:n} ~ Uniform[−1/2, 1/2]^n. Trial j uses
/// seed + j, so trials are independent of how they are scheduled.
pub fn prop10_mc(n: usize, trials: usize, seed: u64) -> Result<Prop10Result> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be ≥ 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be ≥ 1".into()));
    }
    let cfg = MinimizerSearch::default();
    let u_star = eq13_u_star(&cfg);
    let workers = std::thread::available_parallelism()
        .map_or(1, |w| w.get())
        .min(trials);
    let mut per_trial: Vec<(f64, f64)> = vec![(0.0, 0.0); trials];
    let chunks: Vec<Result<Vec<(usize, f64, f64)>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    let mut out = Vec::new();
                    let mut data = vec![0.0; n];
                    for j in (w..trials).step_by(workers) {
                        let mut gen = SeededGenerator::new(seed.wrapping_add(j as u64));
                        data.iter_mut().for_each(|z| *z = gen.uniform_range(-0.5, 0.5));
                        let (s0, excess) = prop10_trial(&data, u_star, &cfg)?;
                        let positive: f64 = s0
                            .positions_1d()
                            .iter()
                            .zip(s0.weights())
                            .filter(|(x, _)| **x > 0.0)
                            .map(|(_, w)| w)
                            .sum();
                        out.push((j, excess, positive));
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trial worker panicked"))
            .collect()
    });
    for c in chunks {
        for (j, e, p) in c? {
            per_trial[j] = (e, p);
        }
    }
    let t = trials as f64;
    Ok(Prop10Result {
        mean_excess: per_trial.iter().map(|r| r.0).sum::<f64>() / t,
        positive_side_fraction: per_trial.iter().map(|r| r.1).sum::<f64>() / t,
        u_star,
    })
}

/// Two-point barrier model with f(x, z) = x·z^{2k+1}, x ∈ {0, 1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BarrierSpec {
    pub k_index: u32,
}

impl BarrierSpec {
    pub fn exponent(&self) -> i32 {
        2 * self.k_index as i32 + 1
    }
}

fn sigm_neg(t: f64) -> f64 {
    // sigm(−t) = 1/(1 + e^t)
    1.0 / (1.0 + t.exp())
}

/// W₁(δ_z S_ε, δ_z S₀) = sigm(−|z|^{2k+1}/ε).
pub fn barrier_w1_point(z: f64, eps: f64, spec: BarrierSpec) -> f64 {
    sigm_neg(z.abs().powi(spec.exponent()) / eps)
}

/// (W₁(μS_ε, μS₀), printed lower bound) for μ = Uniform[0, 1].
///
/// With u = z/ε^{1/m} the integral becomes ε^{1/m}∫₀^{ε^{−1/m}} sigm(−u^m) du,
/// whose integrand is resolved on a fixed u-grid for every ε.
pub fn barrier_w1_mixture(eps: f64, spec: BarrierSpec, panels: usize, order: usize) -> Result<(f64, f64)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be > 0")));
    }
    let m = spec.exponent();
    let mf = m as f64;
    let s = eps.powf(1.0 / mf);
    // sigm(−u^m) < e^{−745} past this point
    let upper = (1.0 / s).min(745f64.powf(1.0 / mf));
    let rule = CompositeRule::new(0.0, upper, panels.max(1), order);
    let w1 = s * rule.integrate(|u| sigm_neg(u.powi(m)));
    let tail_const = CompositeRule::new(0.0, 1.0, 64, 16).integrate(|z| (-z.powi(m)).exp());
    let lower = 2f64.powf(-1.0 / mf) * tail_const * s;
    Ok((w1, lower))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn line_restricted_box_has_no_zeros() {
        let m = SmoothMap::line().with_domain_box(vec![(1.0, 2.0)]);
        let z = find_zeros(&m, &ZeroFindingConfig::default()).unwrap();
        assert!(z.zeros.is_empty() && z.unresolved.is_empty());
    }

    #[test]
    fn double_root_is_an_h1_violation() {
        let m = SmoothMap::root_product(&[0.0, 0.0], (-1.0, 1.0));
        let r = atomic_limit(&m, Weight::One, &ZeroFindingConfig::default());
        assert!(matches!(r, Err(Error::H1Violation { .. })));
    }

    #[test]
    fn weights_ignore_weight_scale() {
        let m = crate::catalog::build_map("quartic", &BTreeMap::new()).unwrap();
        let a = atomic_limit(&m, Weight::One, &ZeroFindingConfig::default()).unwrap();
        assert_eq!(a.atoms().len(), 4);
        assert!((a.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn prop10_rejects_zero_trials() {
        let e = prop10_mc(10, 0, 1).unwrap_err();
        assert!(e.to_string().contains("trials must be ≥ 1"));
    }

    #[test]
    fn barrier_point_values() {
        let s = BarrierSpec { k_index: 0 };
        assert_eq!(barrier_w1_point(0.0, 1.0, s), 0.5);
        assert!((barrier_w1_point(1.0, 1.0, s) - 1.0 / (1.0 + std::f64::consts::E)).abs() < 1e-15);
        assert!(barrier_w1_point(0.5, 1e-6, s) <= 1e-10);
    }

    #[test]
    fn barrier_mixture_tends_to_half() {
        let (w, _) = barrier_w1_mixture(1e8, BarrierSpec { k_index: 1 }, 64, 16).unwrap();
        assert!((w - 0.5).abs() < 1e-8);
    }

    #[test]
    fn s0_only_for_eq13() {
        let r = s0_for_family(
            PotentialFamily::Barrier { k_index: 0 },
            0.1,
            &MinimizerSearch::default(),
            1e-8,
        );
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn conic_density_symmetries() {
        let d = conic_limit_density(1.0, 4.0, Weight::One, 64).unwrap();
        let n = d.cells();
        let v = d.density();
        for i in 0..n {
            assert!((v[i] - v[n - 1 - i]).abs() < 1e-12);
            assert!((v[i] - v[(n / 2 + n - 1 - i) % n]).abs() < 1e-12);
        }
    }
}
