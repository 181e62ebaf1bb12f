//! Experiment runner: output schema, determinism, configuration and the CLI.

use std::path::Path;
use std::process::Command;

use levelset_gibbs::harness::{
    csv_header, experiment_outputs, run_experiment, ExperimentConfig, ParamValue, CSV_HEADERS, EXPERIMENT_IDS,
};
use levelset_gibbs::Error;

mod common;
use common::small;

const BIN: &str = env!("CARGO_BIN_EXE_levelset-gibbs");

#[test]
fn csv_headers_are_documented() {
    let readme =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    for (file, header) in CSV_HEADERS {
        assert!(readme.contains(file), "{file} missing from README");
        assert!(
            readme.contains(&format!("`{header}`")),
            "header of {file} missing from README"
        );
    }
}

#[test]
fn every_experiment_writes_its_pinned_headers() {
    let mut seen = Vec::new();
    for id in EXPERIMENT_IDS {
        let c = small(id);
        let outputs = experiment_outputs(id, &c.params().unwrap(), c.seed).unwrap();
        assert!(!outputs.is_empty());
        for (name, body) in outputs {
            if name.ends_with(".csv") {
                let first = body.lines().next().unwrap();
                assert_eq!(first, csv_header(&name), "{name}");
                let cols = first.split(',').count();
                for line in body.lines().skip(1) {
                    assert_eq!(line.split(',').count(), cols, "{name}: {line}");
                }
                seen.push(name);
            } else {
                assert!(name.ends_with(".svg"), "{name}");
                assert!(
                    body.starts_with("<svg") && body.trim_end().ends_with("</svg>"),
                    "{name}"
                );
            }
        }
    }
    seen.sort();
    let mut all: Vec<String> = CSV_HEADERS.iter().map(|(f, _)| f.to_string()).collect();
    all.sort();
    assert_eq!(seen, all);
}

#[test]
fn fig1_ratio_column_tends_to_one() {
    let c = small("fig1");
    let outputs = experiment_outputs("fig1", &c.params().unwrap(), c.seed).unwrap();
    let body = &outputs.iter().find(|(n, _)| n == "fig1_scaling.csv").unwrap().1;
    let ratios: Vec<f64> = body
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 2);
    assert!((ratios[1] - 1.0).abs() < (ratios[0] - 1.0).abs());
}

#[test]
fn identical_runs_give_identical_checksums() {
    for id in ["fig2", "fig3", "prop10", "sgld"] {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(id);
        c.out_dir = dir.path().join("a");
        let a = run_experiment(&c).unwrap();
        c.out_dir = dir.path().join("b");
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b, "{id}");
        let ma = std::fs::read(dir.path().join("a/manifest.toml")).unwrap();
        let mb = std::fs::read(dir.path().join("b/manifest.toml")).unwrap();
        assert_eq!(ma, mb);
        for (name, sum) in &a.files {
            let bytes = std::fs::read(dir.path().join("a").join(name)).unwrap();
            assert_eq!(&levelset_gibbs::harness::sha256_hex(&bytes), sum);
        }
        c.seed += 1;
        c.out_dir = dir.path().join("c");
        assert_ne!(run_experiment(&c).unwrap().files, a.files, "{id}");
    }
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("fig2");
    c.out_dir = dir.path().join("first");
    let m = run_experiment(&c).unwrap();
    let text = std::fs::read_to_string(dir.path().join("first/manifest.toml")).unwrap();
    let parsed: toml::Table = toml::from_str(&text).unwrap();
    let mut again = ExperimentConfig::new("fig2").unwrap();
    again.seed = parsed["seed"].as_integer().unwrap() as u64;
    let params = parsed["parameters"].as_table().unwrap();
    let cfg_text = format!("[params]\n{}", toml::to_string(params).unwrap());
    let from_manifest = ExperimentConfig::from_toml_str(&cfg_text, Some("fig2")).unwrap();
    again.overrides = from_manifest.overrides;
    again.out_dir = dir.path().join("second");
    assert_eq!(run_experiment(&again).unwrap().files, m.files);
}

#[test]
fn prop10_with_no_trials_is_rejected() {
    let mut c = small("prop10");
    c.set("trials", ParamValue::Int(0)).unwrap();
    c.out_dir = tempfile::tempdir().unwrap().path().join("p");
    let e = run_experiment(&c).unwrap_err();
    assert!(e.to_string().contains("trials must be ≥ 1"), "{e}");
    assert!(!c.out_dir.join("manifest.toml").exists());
}

#[test]
fn overrides_are_type_checked() {
    assert!(matches!(ExperimentConfig::new("fig9"), Err(Error::UnknownId(_))));
    let mut c = ExperimentConfig::new("fig3").unwrap();
    assert!(c
        .set("eps", ParamValue::Str("small".into()))
        .unwrap_err()
        .is_config());
    assert!(c.set("nope", ParamValue::Float(1.0)).unwrap_err().is_config());
    assert!(c.set("steps", ParamValue::Float(1.5)).unwrap_err().is_config());
    c.set("eps", ParamValue::Int(1)).unwrap();
    assert_eq!(c.params().unwrap().float("eps"), 1.0);
    c.set("long_run", ParamValue::Bool(true)).unwrap();
    assert!(c.params().unwrap().flag("long_run"));

    let ok = "experiment = \"fig3\"\nseed = 7\nout = \"x\"\n[params]\neps = 0.05\nx0 = [0.5, 0.0]\n";
    let c = ExperimentConfig::from_toml_str(ok, None).unwrap();
    assert_eq!((c.seed, c.params().unwrap().float("eps")), (7, 0.05));
    for bad in [
        "experiment = \"fig3\"\n[params]\neps = \"a\"\n",
        "experiment = \"fig3\"\nspeed = 3\n",
        "[params]\neps = 0.1\n",
        "experiment = \"fig2\"\n",
        "experiment = \"fig3\"\n[params]\nx0 = 3\n",
    ] {
        let e = ExperimentConfig::from_toml_str(bad, Some("fig3")).err();
        let e = e.or_else(|| ExperimentConfig::from_toml_str(bad, None).err());
        assert!(e.is_some_and(|e| e.is_config()), "{bad}");
    }
}

#[test]
fn fig2_chart_overlays_targets_as_markers() {
    let c = small("fig2");
    let outputs = experiment_outputs("fig2", &c.params().unwrap(), c.seed).unwrap();
    let svg = &outputs.iter().find(|(n, _)| n == "fig2_histogram.svg").unwrap().1;
    assert_eq!(svg.matches("fill-opacity=\"0.7\"").count(), 2 * 4);
    // a star is three strokes; one star per root for each of the two targets
    assert_eq!(svg.matches("stroke-width=\"2\"").count(), 3 * 4 * 2);
}

fn cli(args: &[&str], env_out: Option<&Path>) -> (i32, String, String) {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    match env_out {
        Some(p) => cmd.env("LEVELSET_GIBBS_OUT", p),
        None => cmd.env_remove("LEVELSET_GIBBS_OUT"),
    };
    let o = cmd.output().unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["--help"], None).0, 0);
    let (code, out, _) = cli(&["catalog"], None);
    assert_eq!(code, 0);
    assert!(out.contains("quartic") && out.contains("conic"));

    assert_eq!(
        cli(&["run", "fig9", "--out", dir.path().to_str().unwrap()], None).0,
        1
    );
    assert_eq!(cli(&["frobnicate"], None).0, 1);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[params]\nsteps = \"many\"\n").unwrap();
    assert_eq!(
        cli(&["run", "fig3", "--config", bad.to_str().unwrap()], None).0,
        1
    );
    assert_eq!(
        cli(&["run", "fig3", "--config", "/nonexistent/cfg.toml"], None).0,
        1
    );

    // every chain blows up at this step size
    let diverge = dir.path().join("diverge.toml");
    let out = dir.path().join("diverged");
    std::fs::write(
        &diverge,
        format!(
            "out = {:?}\n[params]\nstep = 1.0\nmax_step = 1.0\nchains = 2\nburn_in = 10\nretained_per_chain = 2\nthinning = 1\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let (code, _, err) = cli(&["run", "fig2", "--config", diverge.to_str().unwrap()], None);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("fig2") || err.contains("diverged"), "{err}");
    assert!(!out.join("manifest.toml").exists());
}

#[test]
fn cli_honours_output_environment_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = cli(&["run", "lemma_a1"], Some(dir.path()));
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("lemma_a1"));
    assert!(dir.path().join("lemma_a1/manifest.toml").exists());
    assert!(dir.path().join("lemma_a1/lemma_a1.csv").exists());

    let explicit = dir.path().join("elsewhere");
    let code = cli(
        &[
            "run",
            "prop10",
            "--seed",
            "3",
            "--out",
            explicit.to_str().unwrap(),
        ],
        Some(dir.path()),
    )
    .0;
    assert_eq!(code, 0);
    let manifest: toml::Table =
        toml::from_str(&std::fs::read_to_string(explicit.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest["seed"].as_integer(), Some(3));
    assert!(!dir.path().join("prop10").exists());
}
