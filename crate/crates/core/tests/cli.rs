use std::path::{Path, PathBuf};

use translab::cli::{main_with_args, run, validate, ExperimentConfig, Kind};

const ALL: [Kind; 9] = [
    Kind::Forward,
    Kind::Subdomain,
    Kind::CarlemanVerify,
    Kind::ReconstructH,
    Kind::ReconstructP,
    Kind::StabilitySweep,
    Kind::EnergyCheck,
    Kind::CaseExperiment,
    Kind::DemoNonuniqueness,
];

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn example(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs().join(name)).unwrap()
}

fn cli(args: &[&str]) -> u8 {
    main_with_args(std::iter::once("translab").chain(args.iter().copied()))
}

#[test]
fn default_config_is_valid_except_for_subdomain() {
    let cfg = ExperimentConfig::default();
    for k in ALL {
        let v = validate(&cfg, k);
        if k == Kind::Subdomain {
            assert!(!v.is_empty());
        } else {
            assert!(v.is_empty(), "{}: {v:?}", k.name());
        }
    }
}

#[test]
fn default_config_round_trips_through_toml() {
    let cfg = ExperimentConfig::default();
    let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, back);
}

#[test]
fn example_configs_validate() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let cfg = ExperimentConfig::load(&path).unwrap();
        let v = validate(&cfg, cfg.kind.unwrap());
        assert_eq!(name.starts_with("invalid"), !v.is_empty(), "{name}: {v:?}");
    }
}

#[test]
fn validate_names_every_violation() {
    let v = validate(&example("invalid_eps0.toml"), Kind::Forward);
    assert!(v.iter().any(|s| s.starts_with("ε₀ < T/16")), "{v:?}");
    assert!(v.iter().any(|s| s.contains("dt * max|H|")), "{v:?}");

    let v = validate(&example("invalid_case_ii.toml"), Kind::CaseExperiment);
    assert!(v.iter().any(|s| s.contains("case II")), "{v:?}");

    // eps above beta T / (4M) but below the other branches
    let mut cfg = example("subdomain.toml");
    cfg.discretization.beta = 0.05;
    let v = validate(&cfg, Kind::Subdomain);
    assert_eq!(v.len(), 1, "{v:?}");
    assert!(v[0].contains("eps < beta T/(4 M)"));

    let mut cfg = ExperimentConfig::default();
    cfg.coefficients.family.truncate(1);
    let v = validate(&cfg, Kind::ReconstructH);
    assert!(v.iter().any(|s| s.starts_with("coefficients.family")), "{v:?}");

    cfg.coefficients.p = translab::cli::config::ScalarSpec::Affine { c: 0.0, g: vec![1.0] };
    let v = validate(&cfg, Kind::Forward);
    assert!(v.iter().any(|s| s.contains("coefficients.p.g")), "{v:?}");
}

#[test]
fn unknown_keys_are_rejected() {
    let e = ExperimentConfig::from_toml("[discretization]\nstep = 0.1\n").unwrap_err();
    assert!(e.to_string().contains("step"), "{e}");
}

#[test]
fn identical_runs_write_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["forward.toml", "stability_p.toml", "energy.toml"] {
        let cfg = example(name);
        let kind = cfg.kind.unwrap();
        let (a, b) = (dir.path().join(format!("{name}.a")), dir.path().join(format!("{name}.b")));
        let ra = run(&cfg, kind, &a).unwrap();
        run(&cfg, kind, &b).unwrap();
        assert!(ra.passed, "{name}");
        for art in ra.artifacts.iter().filter(|n| *n != "report.json") {
            let (x, y) = (std::fs::read(a.join(art)).unwrap(), std::fs::read(b.join(art)).unwrap());
            assert!(x == y, "{name}: {art} differs");
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cli(&["demo-nonuniqueness", "--out", out, "--quiet"]), 0);
    assert!(dir.path().join("report.json").exists());

    let bad = configs().join("invalid_eps0.toml");
    assert_eq!(cli(&["forward", "--config", bad.to_str().unwrap(), "--out", out, "--quiet"]), 2);
    assert_eq!(cli(&["validate", "--config", bad.to_str().unwrap()]), 2);
    assert_eq!(cli(&["subdomain", "--out", out, "--quiet"]), 2);
    assert_eq!(cli(&["no-such-kind"]), 2);

    // an assertion that cannot pass
    let strict = dir.path().join("strict.toml");
    std::fs::write(&strict, "[reconstruction]\ntolerance = 1e-30\n").unwrap();
    assert_eq!(cli(&["reconstruct-p", "--config", strict.to_str().unwrap(), "--out", out, "--quiet"]), 1);

    // config kind disagrees with the subcommand
    let sub = configs().join("subdomain.toml");
    assert_eq!(cli(&["forward", "--config", sub.to_str().unwrap(), "--out", out, "--quiet"]), 2);
    assert_eq!(cli(&["validate", "--config", sub.to_str().unwrap(), "--quiet"]), 0);
}

#[test]
fn resolution_scale_refines() {
    let cfg = ExperimentConfig::default();
    let fine = cfg.rescaled(0.5).unwrap();
    assert_eq!(fine.discretization.dt, cfg.discretization.dt * 0.5);
    match (&cfg.geometry, &fine.geometry) {
        (
            translab::cli::config::GeometrySpec::Box { cells: a, .. },
            translab::cli::config::GeometrySpec::Box { cells: b, .. },
        ) => assert_eq!(*b, 2 * a),
        _ => unreachable!(),
    }
    assert!(cfg.rescaled(0.0).is_err());
}
