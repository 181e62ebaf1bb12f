//! Experiment runner: resolves a configuration, runs the experiment, writes
//! CSV and SVG outputs and finally a manifest with SHA-256 checksums.

pub mod config;
pub mod experiments;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
pub use config::{ExperimentConfig, ParamValue, DEFAULT_SEED, EXPERIMENT_IDS};
use config::{Params, DEFAULTS_VERSION};
use experiments as ex;
use svg::{render_svg, Series, SeriesKind};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "LEVELSET_GIBBS_OUT";

/// Every CSV the harness writes, with its header row.
pub const CSV_HEADERS: [(&str, &str); 16] = [
    ("fig1_scaling.csv", "eps,moment,ratio"),
    ("fig1_quartic.csv", "x,p"),
    (
        "fig2_roots.csv",
        "root,target_plain,target_corrected,plain,corrected",
    ),
    (
        "fig2_summary.csv",
        "chain,tv_uniform,tv_plain_weights,retained,diverged_chains",
    ),
    (
        "fig3_angles.csv",
        "bin_center,target_ell,target_ell_over_jf,corrected,plain",
    ),
    (
        "fig3_summary.csv",
        "chain,tv_ell,tv_ell_over_jf,w1_circular_ell,w1_circular_ell_over_jf",
    ),
    ("w1rate.csv", "weight,eps,w1"),
    ("w1rate_fit.csv", "weight,slope,intercept,r_squared"),
    ("coarea.csv", "case,eps,lhs,rhs,rel_residual"),
    ("lemma_a1.csv", "map,x1,x2,normal_hessian_det,expected,rel_error"),
    (
        "prop10.csv",
        "n,trials,mean_excess,bound,positive_side_fraction,u_star",
    ),
    ("barrier_point.csv", "k_index,z,eps,w1"),
    ("barrier_mixture.csv", "k_index,eps,w1,lower_bound"),
    ("barrier_fit.csv", "k_index,slope,expected,r_squared"),
    ("sgld.csv", "eps,w1_to_gibbs,w1_to_s0,noise"),
    ("sgld_dataset.csv", "index,z"),
];

pub fn csv_header(file: &str) -> &'static str {
    CSV_HEADERS
        .iter()
        .find(|(f, _)| *f == file)
        .map(|(_, h)| *h)
        .unwrap_or_else(|| panic!("no documented header for {file}"))
}

/// A CSV document with a documented header.
struct Csv {
    file: &'static str,
    body: String,
}

impl Csv {
    fn new(file: &'static str) -> Self {
        let mut body = String::new();
        body.push_str(csv_header(file));
        body.push('\n');
        Self { file, body }
    }

    fn row(&mut self, fields: &[String]) {
        self.body.push_str(&fields.join(","));
        self.body.push('\n');
    }
}

fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub seed: u64,
    pub defaults_version: u32,
    pub parameters: BTreeMap<String, toml::Value>,
    /// File name → SHA-256 hex digest, in write order.
    pub files: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn context(id: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Consistency(m) => Error::Consistency(format!("{id}: {m}")),
        Error::Unsupported(m) => Error::Unsupported(format!("{id}: {m}")),
        other => other,
    }
}

/// Produce the output files of an experiment in memory.
pub fn experiment_outputs(id: &str, p: &Params, seed: u64) -> Result<Vec<(String, String)>> {
    let mut files: Vec<(String, String)> = Vec::new();
    let push_csv = |c: Csv, files: &mut Vec<(String, String)>| files.push((c.file.to_string(), c.body));
    match id {
        "fig1" => {
            let rows = ex::fig1_scaling(p.floats("eps_list"))?;
            let mut c = Csv::new("fig1_scaling.csv");
            for (e, m, r) in &rows {
                c.row(&[num(*e), num(*m), num(*r)]);
            }
            push_csv(c, &mut files);
            let mut q = Csv::new("fig1_quartic.csv");
            let map = crate::catalog::build_map("quartic", &BTreeMap::new())?;
            let mut curve = Vec::new();
            for i in 0..=350 {
                let x = -0.5 + 0.01 * i as f64;
                let v = crate::jets::VectorField::eval(&map, &[x])[0];
                q.row(&[num(x), num(v)]);
                curve.push((x, v));
            }
            push_csv(q, &mut files);
            let pts = rows.iter().map(|(e, _, r)| (e.log10(), *r)).collect();
            files.push((
                "fig1_scaling.svg".into(),
                render_svg(
                    &[
                        Series::new("2 E[P^2]/eps vs log10 eps", SeriesKind::Line, pts),
                        Series::new(
                            "1",
                            SeriesKind::Line,
                            rows.iter().map(|(e, _, _)| (e.log10(), 1.0)).collect(),
                        ),
                    ],
                    "Quartic scaling ratio",
                )?,
            ));
            files.push((
                "fig1_quartic.svg".into(),
                render_svg(&[Series::new("P(x)", SeriesKind::Line, curve)], "Quartic P")?,
            ));
        }
        "fig2" => {
            let r = ex::fig2_run(p, seed)?;
            let mut c = Csv::new("fig2_roots.csv");
            for i in 0..r.roots.len() {
                c.row(&[
                    num(r.roots[i]),
                    num(r.target_plain[i]),
                    num(r.target_corrected[i]),
                    num(r.plain[i]),
                    num(r.corrected[i]),
                ]);
            }
            push_csv(c, &mut files);
            let mut s = Csv::new("fig2_summary.csv");
            s.row(&[
                "plain".into(),
                num(r.tv_plain_uniform()),
                num(r.tv_plain_weights()),
                r.retained_plain.to_string(),
                r.diverged_plain.to_string(),
            ]);
            s.row(&[
                "corrected".into(),
                num(r.tv_corrected_uniform()),
                num(r.tv_corrected_weights()),
                r.retained_corrected.to_string(),
                r.diverged_corrected.to_string(),
            ]);
            push_csv(s, &mut files);
            let bars = |v: &[f64]| r.roots.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
            files.push((
                "fig2_histogram.svg".into(),
                render_svg(
                    &[
                        Series::new("plain ULA", SeriesKind::Bars, bars(&r.plain)),
                        Series::new("corrected ULA", SeriesKind::Bars, bars(&r.corrected)),
                        Series::new("target (plain)", SeriesKind::Markers, bars(&r.target_plain)),
                        Series::new(
                            "target (corrected)",
                            SeriesKind::Markers,
                            bars(&r.target_corrected),
                        ),
                    ],
                    "Root histograms",
                )?,
            ));
        }
        "fig3" => {
            let r = ex::fig3_run(p, seed)?;
            let (te, tj) = (
                r.target_histogram(&r.target_ell),
                r.target_histogram(&r.target_ell_over_jf),
            );
            let (hc, hp) = (r.histogram(&r.corrected_angles), r.histogram(&r.plain_angles));
            let mut c = Csv::new("fig3_angles.csv");
            for i in 0..r.bins {
                c.row(&[num(r.centers[i]), num(te[i]), num(tj[i]), num(hc[i]), num(hp[i])]);
            }
            push_csv(c, &mut files);
            let tv = r.tv_table()?;
            let w = r.w1_table()?;
            let mut s = Csv::new("fig3_summary.csv");
            for (i, name) in ["corrected", "plain"].iter().enumerate() {
                s.row(&[
                    name.to_string(),
                    num(tv[i][0]),
                    num(tv[i][1]),
                    num(w[i][0]),
                    num(w[i][1]),
                ]);
            }
            push_csv(s, &mut files);
            let line = |v: &[f64]| {
                r.centers
                    .iter()
                    .copied()
                    .zip(v.iter().copied())
                    .collect::<Vec<_>>()
            };
            files.push((
                "fig3_angles.svg".into(),
                render_svg(
                    &[
                        Series::new("corrected", SeriesKind::Bars, line(&hc)),
                        Series::new("plain", SeriesKind::Bars, line(&hp)),
                        Series::new("l(theta)", SeriesKind::Line, line(&te)),
                        Series::new("l(theta)/JF", SeriesKind::Line, line(&tj)),
                    ],
                    "Ellipse angle densities",
                )?,
            ));
        }
        "w1rate" => {
            let r = ex::w1rate_run(p.floats("eps_list"), p.count("grid_n")?)?;
            let mut c = Csv::new("w1rate.csv");
            for (w, e, d) in &r.rows {
                c.row(&[w.name().into(), num(*e), num(*d)]);
            }
            push_csv(c, &mut files);
            let mut f = Csv::new("w1rate_fit.csv");
            for (w, fit) in &r.fits {
                f.row(&[
                    w.name().into(),
                    num(fit.slope),
                    num(fit.intercept),
                    num(fit.r_squared),
                ]);
            }
            push_csv(f, &mut files);
            let series: Vec<Series> = r
                .fits
                .iter()
                .map(|(w, _)| {
                    let pts = r
                        .rows
                        .iter()
                        .filter(|row| row.0 == *w)
                        .map(|row| (row.1.log10(), row.2.log10()))
                        .collect();
                    Series::new(&format!("log10 W1, weight {}", w.name()), SeriesKind::Line, pts)
                })
                .collect();
            files.push(("w1rate.svg".into(), render_svg(&series, "W1 rate")?));
        }
        "coarea" => {
            let mut c = Csv::new("coarea.csv");
            for (case, e, r) in ex::coarea_run(p.floats("eps_list"))? {
                c.row(&[case, num(e), num(r.lhs), num(r.rhs), num(r.rel_residual)]);
            }
            push_csv(c, &mut files);
        }
        "lemma_a1" => {
            let mut c = Csv::new("lemma_a1.csv");
            for (m, x, det, exp) in ex::lemma_a1_run(p.float("a1"), p.float("a2"), p.count("points")?)? {
                let x2 = x.get(1).map_or(String::new(), |v| num(*v));
                c.row(&[m, num(x[0]), x2, num(det), num(exp), num((det - exp).abs() / exp)]);
            }
            push_csv(c, &mut files);
        }
        "prop10" => {
            let trials = p.count("trials")?;
            let rows = ex::prop10_run(p.ints("n_list"), trials, seed)?;
            let mut c = Csv::new("prop10.csv");
            for (n, r) in &rows {
                c.row(&[
                    n.to_string(),
                    trials.to_string(),
                    num(r.mean_excess),
                    num(ex::prop10_bound(*n)),
                    num(r.positive_side_fraction),
                    num(r.u_star),
                ]);
            }
            push_csv(c, &mut files);
        }
        "barrier" => {
            let r = ex::barrier_run(
                p.ints("k_list"),
                p.floats("eps_list"),
                p.floats("z_list"),
                p.float("fit_eps_max"),
            )?;
            let mut a = Csv::new("barrier_point.csv");
            for (k, z, e, w) in &r.points {
                a.row(&[k.to_string(), num(*z), num(*e), num(*w)]);
            }
            push_csv(a, &mut files);
            let mut b = Csv::new("barrier_mixture.csv");
            for (k, e, w, lb) in &r.mixtures {
                b.row(&[k.to_string(), num(*e), num(*w), num(*lb)]);
            }
            push_csv(b, &mut files);
            let mut f = Csv::new("barrier_fit.csv");
            for (k, fit) in &r.fits {
                f.row(&[
                    k.to_string(),
                    num(fit.slope),
                    num(1.0 / (2 * k + 1) as f64),
                    num(fit.r_squared),
                ]);
            }
            push_csv(f, &mut files);
        }
        "sgld" => {
            let r = ex::sgld_run(p, seed)?;
            let mut c = Csv::new("sgld.csv");
            for (e, wg, ws, nz) in &r.rows {
                c.row(&[num(*e), num(*wg), num(*ws), num(*nz)]);
            }
            push_csv(c, &mut files);
            let mut d = Csv::new("sgld_dataset.csv");
            for (i, z) in r.dataset.iter().enumerate() {
                d.row(&[i.to_string(), num(*z)]);
            }
            push_csv(d, &mut files);
        }
        other => return Err(Error::UnknownId(other.to_string())),
    }
    Ok(files)
}

/// Run an experiment, write its outputs and then its manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let params = cfg.params()?;
    let outputs = experiment_outputs(&cfg.id, &params, cfg.seed).map_err(context(&cfg.id))?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut files = BTreeMap::new();
    for (name, body) in &outputs {
        std::fs::write(cfg.out_dir.join(name), body)?;
        files.insert(name.clone(), sha256_hex(body.as_bytes()));
    }
    let manifest = RunManifest {
        experiment: cfg.id.clone(),
        seed: cfg.seed,
        defaults_version: DEFAULTS_VERSION,
        parameters: params.0.iter().map(|(k, v)| (k.clone(), v.to_toml())).collect(),
        files,
    };
    std::fs::write(cfg.out_dir.join("manifest.toml"), manifest.to_toml()?)?;
    Ok(manifest)
}

/// Output directory: explicit flag, else `$LEVELSET_GIBBS_OUT/<id>`, else `results/<id>`.
pub fn default_out_dir(id: &str) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"))
        .join(id)
}
