//! The experiments behind each harness id. Every function is a pure function
//! of its parameters and seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::catalog::{build_map, Observable, PotentialFamily, SmoothMap, Weight, QUARTIC_ROOTS};
use crate::error::{Error, Result};
use crate::geometry::{
    coarea_residual, conic_point, generalized_jacobian, normal_hessian_det, CoareaReport, CoareaSettings,
};
use crate::jets::VectorField;
use crate::limits::{
    atomic_limit, barrier_w1_mixture, barrier_w1_point, conic_limit_density, prop10_mc, s0_for_family,
    BarrierSpec, MinimizerSearch, Prop10Result, ZeroFindingConfig, HESSIAN_FLOOR,
};
use crate::measures::{
    angle_pushforward, nearest_atom_histogram, rate_fit, tv_histogram, tv_weights, w1_circular, w1_line,
    AngleDensity, AtomicMeasure, EmpiricalMeasure, RateFit,
};
use crate::quadrature::{family_gibbs_cdf, gibbs_cdf, gibbs_moment, GibbsSpec, QuadratureSettings};
use crate::rng::SeededGenerator;
use crate::samplers::{
    corrected_ula_chain, merge_runs, run_parallel, sgld_trace, ula_chain, ChainConfig, ChainRun, SgldConfig,
    Tempering,
};

use super::config::Params;

fn quartic() -> SmoothMap {
    build_map("quartic", &BTreeMap::new()).expect("catalog quartic")
}

fn positive(v: f64, name: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("`{name}` = {v} must be > 0")))
    }
}

/// (ε, π_ε[P²], 2π_ε[P²]/ε) for the quartic with Ψ = 1, k = 2.
pub fn fig1_scaling(eps_list: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    let settings = QuadratureSettings::default();
    eps_list
        .iter()
        .map(|&eps| {
            let spec = GibbsSpec::new(quartic(), 2, positive(eps, "eps")?, Weight::One)?;
            let m = gibbs_moment(&spec, Observable::MapNormPow(2), &settings)?;
            Ok((eps, m, 2.0 * m / eps))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig2Result {
    pub roots: Vec<f64>,
    pub target_plain: Vec<f64>,
    pub target_corrected: Vec<f64>,
    pub plain: Vec<f64>,
    pub corrected: Vec<f64>,
    pub retained_plain: usize,
    pub retained_corrected: usize,
    /// Chains stopped by the divergence guard, left out of the histograms.
    pub diverged_plain: usize,
    pub diverged_corrected: usize,
    /// Largest ‖iterate‖ over the chains that finished.
    pub max_norm: f64,
}

/// Split ensemble results into finished runs and a count of diverged chains.
/// Any other failure is returned.
fn finished_runs(results: Vec<Result<ChainRun>>) -> Result<(ChainRun, usize)> {
    let mut ok = Vec::with_capacity(results.len());
    let mut diverged = 0;
    for r in results {
        match r {
            Ok(run) => ok.push(run),
            Err(Error::Divergence { .. }) => diverged += 1,
            Err(e) => return Err(e),
        }
    }
    if ok.is_empty() {
        return Err(Error::Divergence {
            step: 0,
            reason: "every chain of the ensemble diverged".into(),
        });
    }
    Ok((merge_runs(&ok)?, diverged))
}

impl Fig2Result {
    pub fn tv_plain_uniform(&self) -> f64 {
        tv_weights(&self.plain, &self.target_corrected)
    }
    pub fn tv_plain_weights(&self) -> f64 {
        tv_weights(&self.plain, &self.target_plain)
    }
    pub fn tv_corrected_uniform(&self) -> f64 {
        tv_weights(&self.corrected, &self.target_corrected)
    }
    pub fn tv_corrected_weights(&self) -> f64 {
        tv_weights(&self.corrected, &self.target_plain)
    }
}

/// Root histograms of tempered ensembles of plain and corrected ULA on the quartic.
pub fn fig2_run(p: &Params, seed: u64) -> Result<Fig2Result> {
    let eps = positive(p.float("eps"), "eps")?;
    let chains = p.count("chains")?;
    let burn_in = p.count("burn_in")?;
    let per_chain = p.count("retained_per_chain")?;
    let thinning = p.count("thinning")?;
    let chain_cfg = |s: u64| ChainConfig {
        step: p.float("step"),
        steps: burn_in + per_chain * thinning,
        burn_in,
        thinning,
        seed: s,
        x0: vec![p.float("x0")],
        tempering: Some(Tempering {
            start_temperature: p.float("start_temperature"),
            max_step: p.float("max_step"),
        }),
    };
    let map = quartic();
    let plain_spec = GibbsSpec::new(map.clone(), 2, eps, Weight::One)?;
    let corr_spec = GibbsSpec::new(map.clone(), 2, eps, Weight::Jacobian)?;
    let (plain, diverged_plain) = finished_runs(run_parallel(chains, seed, |s| {
        ula_chain(&plain_spec, &chain_cfg(s))
    }))?;
    let (corrected, diverged_corrected) = finished_runs(run_parallel(chains, seed, |s| {
        corrected_ula_chain(&corr_spec, &chain_cfg(s))
    }))?;
    let zf = ZeroFindingConfig::default();
    let target_plain = atomic_limit(&map, Weight::One, &zf)?;
    let target_corrected = atomic_limit(&map, Weight::Jacobian, &zf)?;
    let roots = target_plain.positions_1d();
    Ok(Fig2Result {
        plain: nearest_atom_histogram(&plain.samples, &roots)?,
        corrected: nearest_atom_histogram(&corrected.samples, &roots)?,
        target_plain: target_plain.weights().to_vec(),
        target_corrected: target_corrected.weights().to_vec(),
        retained_plain: plain.samples.len(),
        retained_corrected: corrected.samples.len(),
        diverged_plain,
        diverged_corrected,
        max_norm: plain.max_norm.max(corrected.max_norm),
        roots,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig3Result {
    pub centers: Vec<f64>,
    /// Limit of the corrected chain, ∝ ℓ(θ).
    pub target_ell: AngleDensity,
    /// Limit of the plain chain, ∝ ℓ(θ)/JF.
    pub target_ell_over_jf: AngleDensity,
    pub corrected_angles: EmpiricalMeasure,
    pub plain_angles: EmpiricalMeasure,
    pub bins: usize,
    pub max_norm: f64,
}

impl Fig3Result {
    fn tv(&self, angles: &EmpiricalMeasure, target: &AngleDensity) -> Result<f64> {
        tv_histogram(angles, target, self.bins)
    }
    /// [[corrected vs ℓ, corrected vs ℓ/JF], [plain vs ℓ, plain vs ℓ/JF]]
    pub fn tv_table(&self) -> Result<[[f64; 2]; 2]> {
        Ok([
            [
                self.tv(&self.corrected_angles, &self.target_ell)?,
                self.tv(&self.corrected_angles, &self.target_ell_over_jf)?,
            ],
            [
                self.tv(&self.plain_angles, &self.target_ell)?,
                self.tv(&self.plain_angles, &self.target_ell_over_jf)?,
            ],
        ])
    }
    /// Same layout as [`Self::tv_table`], with circular W₁ on angles.
    pub fn w1_table(&self) -> Result<[[f64; 2]; 2]> {
        Ok([
            [
                w1_circular(&self.corrected_angles, &self.target_ell)?,
                w1_circular(&self.corrected_angles, &self.target_ell_over_jf)?,
            ],
            [
                w1_circular(&self.plain_angles, &self.target_ell)?,
                w1_circular(&self.plain_angles, &self.target_ell_over_jf)?,
            ],
        ])
    }
    /// Per-bin empirical densities.
    pub fn histogram(&self, angles: &EmpiricalMeasure) -> Vec<f64> {
        let h = 2.0 * PI / self.bins as f64;
        let mut c = vec![0usize; self.bins];
        let v = angles.values().unwrap_or(&[]);
        for &t in v {
            c[(((t + PI) / h) as usize).min(self.bins - 1)] += 1;
        }
        c.iter().map(|&k| k as f64 / v.len() as f64 / h).collect()
    }
    pub fn target_histogram(&self, target: &AngleDensity) -> Vec<f64> {
        let h = 2.0 * PI / self.bins as f64;
        (0..self.bins)
            .map(|i| {
                let a = -PI + h * i as f64;
                (target.cdf_at(a + h) - target.cdf_at(a)) / h
            })
            .collect()
    }
}

/// Single plain and corrected ULA chains on the ellipse, pushed to angles.
pub fn fig3_run(p: &Params, seed: u64) -> Result<Fig3Result> {
    let (a1, a2) = (p.float("a1"), p.float("a2"));
    // long_run swaps in the long ellipse run: ε = 1e-3, γ = 1e-5, 9e7 steps.
    let long = p.flag("long_run");
    let eps = if long {
        1e-3
    } else {
        positive(p.float("eps"), "eps")?
    };
    let bins = p.count("bins")?;
    if bins == 0 {
        return Err(Error::InvalidParameter("`bins` must be >= 1".into()));
    }
    let map = SmoothMap::conic(a1, a2)?;
    let cfg = ChainConfig {
        step: if long { 1e-5 } else { p.float("step") },
        steps: if long { 90_000_000 } else { p.count("steps")? },
        burn_in: p.count("burn_in")?,
        thinning: p.count("thinning")?,
        seed,
        x0: p.floats("x0").to_vec(),
        tempering: None,
    };
    let plain = ula_chain(&GibbsSpec::new(map.clone(), 2, eps, Weight::One)?, &cfg)?;
    let corrected = corrected_ula_chain(&GibbsSpec::new(map, 2, eps, Weight::Jacobian)?, &cfg)?;
    let cells = bins * 100;
    let h = 2.0 * PI / bins as f64;
    Ok(Fig3Result {
        centers: (0..bins).map(|i| -PI + h * (i as f64 + 0.5)).collect(),
        target_ell: conic_limit_density(a1, a2, Weight::Jacobian, cells)?,
        target_ell_over_jf: conic_limit_density(a1, a2, Weight::One, cells)?,
        corrected_angles: angle_pushforward(&corrected.samples)?,
        plain_angles: angle_pushforward(&plain.samples)?,
        bins,
        max_norm: plain.max_norm.max(corrected.max_norm),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct W1RateResult {
    pub rows: Vec<(Weight, f64, f64)>,
    pub fits: Vec<(Weight, RateFit)>,
}

/// W₁(π_ε^Ψ, π₀^Ψ) on the quartic for Ψ ∈ {1, JF}, with log-log fits.
pub fn w1rate_run(eps_list: &[f64], grid_n: usize) -> Result<W1RateResult> {
    let map = quartic();
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for w in [Weight::One, Weight::Jacobian] {
        let limit = atomic_limit(&map, w, &ZeroFindingConfig::default())?;
        let mut pairs = Vec::new();
        for &eps in eps_list {
            let spec = GibbsSpec::new(map.clone(), 2, positive(eps, "eps")?, w)?;
            let dens = gibbs_cdf(&spec, grid_n, 1e-12)?;
            let d = w1_line(&dens, &limit)?;
            rows.push((w, eps, d));
            pairs.push((eps, d));
        }
        fits.push((w, rate_fit(&pairs)?));
    }
    Ok(W1RateResult { rows, fits })
}

/// (case, ε, report) for the circle and the ellipse.
pub fn coarea_run(eps_list: &[f64]) -> Result<Vec<(String, f64, CoareaReport)>> {
    let settings = CoareaSettings::default();
    let circle = SmoothMap::conic(1.0, 1.0)?;
    let ellipse = SmoothMap::conic(1.0, 4.0)?;
    let cases: [(&str, &SmoothMap, Observable, Weight); 4] = [
        ("circle_one_one", &circle, Observable::One, Weight::One),
        ("ellipse_one_one", &ellipse, Observable::One, Weight::One),
        (
            "ellipse_x1sq_jacobian",
            &ellipse,
            Observable::CoordPow(0, 2),
            Weight::Jacobian,
        ),
        (
            "ellipse_abs_x2_one_plus_sq_norm",
            &ellipse,
            Observable::AbsCoord(1),
            Weight::OnePlusSquaredNorm,
        ),
    ];
    let mut out = Vec::new();
    for &eps in eps_list {
        for (name, map, phi, w) in &cases {
            let r = coarea_residual(map, 2, positive(eps, "eps")?, *phi, *w, &settings)?;
            out.push((name.to_string(), eps, r));
        }
    }
    Ok(out)
}

/// (map, point, normal Hessian determinant, 2^p·JF²).
pub fn lemma_a1_run(a1: f64, a2: f64, points: usize) -> Result<Vec<(String, Vec<f64>, f64, f64)>> {
    let ellipse = SmoothMap::conic(a1, a2)?;
    let mut out = Vec::new();
    for j in 0..points {
        let theta = -PI + 2.0 * PI * (j as f64 + 0.5) / points as f64;
        let x = conic_point(a1, a2, theta).to_vec();
        let jf = generalized_jacobian(&ellipse, &x)?;
        let det = normal_hessian_det(&ellipse, &x, 1e-12)?;
        out.push(("conic".to_string(), x, det, 2.0 * jf * jf));
    }
    let q = quartic();
    for r in QUARTIC_ROOTS {
        let x = vec![r];
        let jf = generalized_jacobian(&q, &x)?;
        let p = q.dim_out() as i32;
        out.push((
            "quartic".to_string(),
            x.clone(),
            normal_hessian_det(&q, &x, 1e-12)?,
            2f64.powi(p) * jf * jf,
        ));
    }
    Ok(out)
}

/// π/(6√3)·n^{−1/2}
pub fn prop10_bound(n: usize) -> f64 {
    PI / (6.0 * 3f64.sqrt()) / (n as f64).sqrt()
}

pub fn prop10_run(n_list: &[i64], trials: usize, seed: u64) -> Result<Vec<(usize, Prop10Result)>> {
    n_list
        .iter()
        .map(|&n| {
            let n = usize::try_from(n).map_err(|_| Error::InvalidParameter(format!("n = {n}")))?;
            Ok((n, prop10_mc(n, trials, seed)?))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierResult {
    /// (k_index, z, ε, W₁)
    pub points: Vec<(u32, f64, f64, f64)>,
    /// (k_index, ε, W₁, lower bound)
    pub mixtures: Vec<(u32, f64, f64, f64)>,
    /// (k_index, fit over ε ≤ fit_eps_max)
    pub fits: Vec<(u32, RateFit)>,
}

pub fn barrier_run(
    k_list: &[i64],
    eps_list: &[f64],
    z_list: &[f64],
    fit_eps_max: f64,
) -> Result<BarrierResult> {
    let mut res = BarrierResult {
        points: Vec::new(),
        mixtures: Vec::new(),
        fits: Vec::new(),
    };
    for &k in k_list {
        let k = u32::try_from(k).map_err(|_| Error::InvalidParameter(format!("k_index = {k}")))?;
        let spec = BarrierSpec { k_index: k };
        let mut pairs = Vec::new();
        for &eps in eps_list {
            let eps = positive(eps, "eps")?;
            for &z in z_list {
                res.points.push((k, z, eps, barrier_w1_point(z, eps, spec)));
            }
            let (w1, lb) = barrier_w1_mixture(eps, spec, 256, 16)?;
            res.mixtures.push((k, eps, w1, lb));
            if eps <= fit_eps_max {
                pairs.push((eps, w1));
            }
        }
        res.fits.push((k, rate_fit(&pairs)?));
    }
    Ok(res)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgldResult {
    pub dataset: Vec<f64>,
    pub zbar: f64,
    /// (ε, W₁ to the Gibbs tabulation, W₁ to S₀, batch-means noise of the latter)
    pub rows: Vec<(f64, f64, f64, f64)>,
    pub max_norm: f64,
}

/// The fixed eq13 dataset: n draws from Uniform[−1/2, 1/2].
pub fn sgld_dataset(n: usize, data_seed: u64) -> Vec<f64> {
    let mut g = SeededGenerator::new(data_seed);
    (0..n).map(|_| g.uniform_range(-0.5, 0.5)).collect()
}

const NOISE_BATCHES: usize = 10;

pub fn sgld_run(p: &Params, seed: u64) -> Result<SgldResult> {
    let n = p.count("n")?;
    let data_seed = u64::try_from(p.int("data_seed"))
        .map_err(|_| Error::InvalidParameter("`data_seed` must be >= 0".into()))?;
    let dataset = sgld_dataset(n, data_seed);
    let fam = PotentialFamily::Eq13;
    let zbar = dataset.iter().sum::<f64>() / n.max(1) as f64;
    let s0 = s0_for_family(fam, zbar, &MinimizerSearch::default(), HESSIAN_FLOOR)?;
    let mut eps_all: Vec<f64> = p.floats("eps_list").to_vec();
    let main = p.float("eps");
    if !eps_all.contains(&main) {
        eps_all.push(main);
    }
    let mut rows = Vec::new();
    let mut max_norm: f64 = 0.0;
    for eps in eps_all {
        let cfg = SgldConfig {
            dataset: dataset.clone(),
            minibatch: p.count("minibatch")?,
            step: p.float("step"),
            eps: positive(eps, "eps")?,
            steps: p.count("steps")?,
            burn_in: p.count("burn_in")?,
            thinning: 1,
            seed,
            x0: p.float("x0"),
            tempering: None,
        };
        let (trace, run_max) = sgld_trace(fam, &cfg)?;
        max_norm = max_norm.max(run_max);
        let samples = EmpiricalMeasure::from_1d(trace.clone())?;
        let gibbs = family_gibbs_cdf(fam, &dataset, eps, p.count("grid_n")?)?;
        let w_gibbs = w1_line(&samples, &gibbs)?;
        let w_s0 = w1_line(&samples, &s0)?;
        let noise = batch_noise(&trace, &s0)?;
        rows.push((eps, w_gibbs, w_s0, noise));
    }
    Ok(SgldResult {
        dataset,
        zbar,
        rows,
        max_norm,
    })
}

/// Standard error of W₁ to `target` from batch means over contiguous
/// stretches of a chronological trace.
pub fn batch_noise(trace: &[f64], target: &AtomicMeasure) -> Result<f64> {
    let len = trace.len() / NOISE_BATCHES;
    if len == 0 {
        return Err(Error::InvalidParameter("trace too short for batch means".into()));
    }
    let vals = trace
        .chunks_exact(len)
        .take(NOISE_BATCHES)
        .map(|c| w1_line(&EmpiricalMeasure::from_1d(c.to_vec())?, target))
        .collect::<Result<Vec<f64>>>()?;
    let b = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / b;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    Ok((var / b).sqrt())
}
