use levelset_gibbs::harness::{ExperimentConfig, ParamValue};

/// Overrides that keep every experiment to a fraction of a second.
pub fn small(id: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(id).unwrap();
    let f = ParamValue::Float;
    let i = ParamValue::Int;
    let fl = |v: &[f64]| ParamValue::FloatList(v.to_vec());
    let sets: Vec<(&str, ParamValue)> = match id {
        "fig1" => vec![("eps_list", fl(&[1e-2, 1e-3]))],
        "fig2" => vec![
            ("chains", i(4)),
            ("burn_in", i(2000)),
            ("retained_per_chain", i(20)),
            ("thinning", i(5)),
        ],
        "fig3" => vec![("steps", i(20_000)), ("burn_in", i(1000)), ("bins", i(12))],
        "w1rate" => vec![("eps_list", fl(&[1e-3, 3e-3, 1e-2])), ("grid_n", i(4096))],
        "coarea" => vec![("eps_list", fl(&[0.1]))],
        "prop10" => vec![("n_list", ParamValue::IntList(vec![10, 20])), ("trials", i(50))],
        "barrier" => vec![("eps_list", fl(&[1e-4, 1e-3, 1e-2])), ("fit_eps_max", f(1e-2))],
        "sgld" => vec![
            ("n", i(10)),
            ("eps_list", fl(&[0.2, 0.1])),
            ("steps", i(5000)),
            ("burn_in", i(500)),
            ("grid_n", i(4096)),
        ],
        _ => vec![],
    };
    for (k, v) in sets {
        c.set(k, v).unwrap();
    }
    c
}
