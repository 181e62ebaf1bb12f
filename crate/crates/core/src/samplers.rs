//! Plain ULA, Jacobian-corrected ULA and SGLD.
//!
//! ULA:       X ← X − γ ∇‖F‖²(X)/ε + √(2γ) Z
//! corrected: Y ← Y − γ (∇‖F‖²(Y)/ε − ∇log JF(Y)) + √(2γ) Z
//! SGLD:      X ← X − γ g(X, B) + √(2γε) G,  g = minibatch mean of ∂ₓu(X, z_i)
//!
//! An optional tempered burn-in lowers the temperature geometrically from
//! `start_temperature` to ε over the burn-in steps. Retained samples are
//! always drawn at ε.

use crate::catalog::{PotentialFamily, Weight};
use crate::error::{Error, Result};
use crate::geometry::{local_geometry, JACOBIAN_FLOOR};
use crate::jets::{Jet, Scalar, VectorField};
use crate::measures::EmpiricalMeasure;
use crate::quadrature::{truncation_radius, GibbsSpec};
use crate::rng::{standard_normal, SeededGenerator};

/// Geometric temperature ramp over the burn-in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tempering {
    pub start_temperature: f64,
    /// Cap on the temperature-scaled step γ·τ/ε.
    pub max_step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub step: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub tempering: Option<Tempering>,
}

impl ChainConfig {
    /// Number of samples a run keeps.
    pub fn retained(&self) -> usize {
        (self.steps - self.burn_in).div_ceil(self.thinning)
    }

    fn validate(&self, dim: usize, eps: f64) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step γ = {} must be > 0",
                self.step
            )));
        }
        if self.burn_in >= self.steps {
            return Err(Error::InvalidParameter(format!(
                "burn_in {} must be < steps {}",
                self.burn_in, self.steps
            )));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidParameter("thinning must be >= 1".into()));
        }
        if self.x0.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.x0.len(),
            });
        }
        crate::error::ensure_finite(&self.x0, "x0")?;
        if let Some(t) = self.tempering {
            if !(t.start_temperature >= eps) || !(t.max_step > 0.0) {
                return Err(Error::InvalidParameter(
                    "tempering needs start_temperature >= eps and max_step > 0".into(),
                ));
            }
        }
        Ok(())
    }

    /// (temperature, step) used at iteration n.
    fn schedule(&self, n: usize, eps: f64) -> (f64, f64) {
        match self.tempering {
            Some(t) if n < self.burn_in => {
                let frac = n as f64 / self.burn_in as f64;
                let tau = t.start_temperature * (eps / t.start_temperature).powf(frac);
                let gamma = (self.step * tau / eps).min(t.max_step.max(self.step));
                (tau, gamma)
            }
            _ => (eps, self.step),
        }
    }

    fn keeps(&self, n: usize) -> bool {
        n >= self.burn_in && (n - self.burn_in) % self.thinning == 0
    }
}

/// Retained samples plus the largest ‖iterate‖ seen over the whole run.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainRun {
    pub samples: EmpiricalMeasure,
    pub max_norm: f64,
}

/// ∇‖F‖² = 2 DFᵀF with first-order jets, no allocation.
fn grad_sq_norm<M: VectorField, const N: usize>(map: &M, x: &[f64; N]) -> [f64; N] {
    let xs: [Jet<f64, N>; N] = std::array::from_fn(|i| Jet::variable(x[i], i));
    let p = map.dim_out();
    let mut out = [Jet::<f64, N>::cst(0.0); 2];
    map.eval_into(&xs, &mut out[..p]);
    let mut g = [0.0; N];
    for o in &out[..p] {
        for (gi, di) in g.iter_mut().zip(o.du) {
            *gi += 2.0 * o.v * di;
        }
    }
    g
}

fn run_map_chain<const N: usize>(spec: &GibbsSpec, cfg: &ChainConfig, corrected: bool) -> Result<ChainRun> {
    let map = &spec.map;
    let eps = spec.eps;
    let guard = 10.0 * truncation_radius(map.growth(), spec.k, eps, 1e-12);
    let mut x: [f64; N] = std::array::from_fn(|i| cfg.x0[i]);
    let mut gen = SeededGenerator::new(cfg.seed);
    let mut kept = Vec::with_capacity(cfg.retained() * N);
    let mut max_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for n in 0..cfg.steps {
        let (tau, gamma) = cfg.schedule(n, eps);
        let mut drift = [0.0; N];
        if corrected {
            let lg = local_geometry::<_, N>(map, &x);
            if !(lg.jf > JACOBIAN_FLOOR) {
                return Err(Error::DegenerateJacobian {
                    value: lg.jf,
                    floor: JACOBIAN_FLOOR,
                });
            }
            for i in 0..N {
                let mut g = 0.0;
                for j in 0..map.dim_out() {
                    g += 2.0 * lg.f[j] * lg.df[j][i];
                }
                drift[i] = g / tau - lg.grad_log_jf[i];
            }
        } else {
            let g = grad_sq_norm::<_, N>(map, &x);
            for i in 0..N {
                drift[i] = g[i] / tau;
            }
        }
        let noise = (2.0 * gamma).sqrt();
        for i in 0..N {
            x[i] += -gamma * drift[i] + noise * standard_normal(&mut gen);
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Divergence {
                step: n + 1,
                reason: "non-finite iterate".into(),
            });
        }
        if norm > guard {
            return Err(Error::Divergence {
                step: n + 1,
                reason: format!("‖x‖ = {norm:.3e} exceeds guard {guard:.3e}"),
            });
        }
        max_norm = max_norm.max(norm);
        if cfg.keeps(n) {
            kept.extend_from_slice(&x);
        }
    }
    Ok(ChainRun {
        samples: EmpiricalMeasure::new(N, kept)?,
        max_norm,
    })
}

fn check_map_chain(spec: &GibbsSpec, cfg: &ChainConfig, weight: Weight) -> Result<()> {
    if spec.k != 2 {
        return Err(Error::Unsupported(format!(
            "Langevin recursions use ‖F‖²; k = {} rejected",
            spec.k
        )));
    }
    if spec.weight != weight {
        return Err(Error::InvalidParameter(format!(
            "chain expects weight `{}`, spec has `{}`",
            weight.name(),
            spec.weight.name()
        )));
    }
    cfg.validate(spec.map.d(), spec.eps)
}

fn dispatch(spec: &GibbsSpec, cfg: &ChainConfig, corrected: bool) -> Result<ChainRun> {
    match spec.map.d() {
        1 => run_map_chain::<1>(spec, cfg, corrected),
        2 => run_map_chain::<2>(spec, cfg, corrected),
        d => Err(Error::Unsupported(format!("chains in dimension {d}"))),
    }
}

/// Plain ULA targeting π_ε ∝ exp(−‖F‖²/ε).
pub fn ula_chain(spec: &GibbsSpec, cfg: &ChainConfig) -> Result<ChainRun> {
    check_map_chain(spec, cfg, Weight::One)?;
    dispatch(spec, cfg, false)
}

/// Jacobian-corrected ULA targeting π_ε^{JF}.
pub fn corrected_ula_chain(spec: &GibbsSpec, cfg: &ChainConfig) -> Result<ChainRun> {
    check_map_chain(spec, cfg, Weight::Jacobian)?;
    dispatch(spec, cfg, true)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgldConfig {
    pub dataset: Vec<f64>,
    pub minibatch: usize,
    pub step: f64,
    pub eps: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub x0: f64,
    /// Raises the noise temperature during burn-in; the step is unchanged.
    pub tempering: Option<Tempering>,
}

impl SgldConfig {
    fn as_chain(&self) -> ChainConfig {
        ChainConfig {
            step: self.step,
            steps: self.steps,
            burn_in: self.burn_in,
            thinning: self.thinning,
            seed: self.seed,
            x0: vec![self.x0],
            tempering: self.tempering,
        }
    }
}

/// Minibatch estimate of ∇ₓU_n: the mean of ∂ₓu(x, z_i) over `batch`.
pub fn minibatch_gradient(family: PotentialFamily, x: f64, dataset: &[f64], batch: &[usize]) -> f64 {
    batch.iter().map(|&i| family.grad_x(x, dataset[i])).sum::<f64>() / batch.len() as f64
}

pub fn sgld_chain(family: PotentialFamily, cfg: &SgldConfig) -> Result<ChainRun> {
    let (kept, max_norm) = sgld_trace(family, cfg)?;
    Ok(ChainRun {
        samples: EmpiricalMeasure::from_1d(kept)?,
        max_norm,
    })
}

/// Retained SGLD iterates in chronological order, and the largest |iterate|.
pub fn sgld_trace(family: PotentialFamily, cfg: &SgldConfig) -> Result<(Vec<f64>, f64)> {
    let n = cfg.dataset.len();
    if n == 0 || cfg.minibatch == 0 || cfg.minibatch > n {
        return Err(Error::InvalidParameter(format!(
            "minibatch {} must lie in [1, {n}]",
            cfg.minibatch
        )));
    }
    if !(cfg.eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {} must be > 0", cfg.eps)));
    }
    crate::error::ensure_finite(&cfg.dataset, "dataset")?;
    let chain = cfg.as_chain();
    chain.validate(1, cfg.eps)?;
    let (lo, hi) = family.domain();
    let guard = 10.0 * lo.abs().max(hi.abs());
    let mut gen = SeededGenerator::new(cfg.seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let b = cfg.minibatch;
    let mut x = cfg.x0;
    let mut max_norm = x.abs();
    let mut kept = Vec::with_capacity(chain.retained());
    for step in 0..cfg.steps {
        let (tau, _) = chain.schedule(step, cfg.eps);
        if b < n {
            // partial Fisher–Yates: the first b entries are a uniform subset
            for i in 0..b {
                let j = i + gen.index(n - i);
                perm.swap(i, j);
            }
        }
        let g = minibatch_gradient(family, x, &cfg.dataset, &perm[..b]);
        x += -cfg.step * g + (2.0 * cfg.step * tau).sqrt() * standard_normal(&mut gen);
        if !x.is_finite() || x.abs() > guard {
            return Err(Error::Divergence {
                step: step + 1,
                reason: format!("iterate {x:e} left the guard region ±{guard:e}"),
            });
        }
        max_norm = max_norm.max(x.abs());
        if chain.keeps(step) {
            kept.push(x);
        }
    }
    Ok((kept, max_norm))
}

/// Evaluate `run(base_seed + j)` for j in 0..n on scoped worker threads and
/// return the results in ascending seed order.
pub fn run_parallel<T, F>(n: usize, base_seed: u64, run: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let workers = std::thread::available_parallelism()
        .map_or(1, |w| w.get())
        .min(n.max(1));
    let mut results: Vec<Option<T>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let run = &run;
                s.spawn(move || {
                    (w..n)
                        .step_by(workers)
                        .map(|j| (j, run(base_seed.wrapping_add(j as u64))))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (j, r) in h.join().expect("chain worker panicked") {
                results[j] = Some(r);
            }
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("every index is assigned"))
        .collect()
}

/// Run `chains` independent chains with seeds base_seed + j and merge them in
/// ascending seed order. The first failing chain (by seed) fails the ensemble.
pub fn run_ensemble<F>(chains: usize, base_seed: u64, run: F) -> Result<ChainRun>
where
    F: Fn(u64) -> Result<ChainRun> + Sync,
{
    if chains == 0 {
        return Err(Error::InvalidParameter(
            "ensemble needs at least one chain".into(),
        ));
    }
    let runs = run_parallel(chains, base_seed, run)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    merge_runs(&runs)
}

/// Concatenate samples in the given order; max_norm is the largest seen.
pub fn merge_runs(runs: &[ChainRun]) -> Result<ChainRun> {
    let parts: Vec<EmpiricalMeasure> = runs.iter().map(|r| r.samples.clone()).collect();
    Ok(ChainRun {
        samples: EmpiricalMeasure::concat(&parts)?,
        max_norm: runs.iter().map(|r| r.max_norm).fold(0.0, f64::max),
    })
}
