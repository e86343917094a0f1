use std::collections::BTreeMap;

use qnpop::config::{ExperimentConfig, ExperimentKind, ModelRef, Tolerances};
use qnpop::HarnessError;

const FULL: &str = r#"
experiment = "generator_check"
n_list = [500, 4000]
replicas = 100
horizon = 2.0
seed = 9
threads = 1
h = 0.1
observable = "frequency"
frequencies = [[0.3, 0.7]]

[model]
family = "neutral_logistic"
params = { theta = [1.0], K = [2] }

[tolerances]
z_max = 2.5
"#;

#[test]
fn full_config_round_trips() {
    let c = ExperimentConfig::from_toml(FULL).unwrap();
    assert_eq!(c.experiment, ExperimentKind::GeneratorCheck);
    assert_eq!(c.n_list, [500, 4000]);
    assert_eq!(c.seed, Some(9));
    assert_eq!(c.tolerances.z_max, 2.5);
    assert_eq!(c.tolerances.r2_min, Tolerances::default().r2_min);
    let entry = c.model.build().unwrap();
    assert_eq!(entry.spec.k, 2);
    let back = toml::to_string(&c).unwrap();
    assert_eq!(ExperimentConfig::from_toml(&back).unwrap().n_list, c.n_list);
}

#[test]
fn defaults_fill_optional_fields() {
    let c = ExperimentConfig::from_toml("experiment = \"lln\"\nmodel = \"neutral_logistic\"\nn_list = [10]\nreplicas = 1\n").unwrap();
    assert_eq!(c.horizon, 1.0);
    assert_eq!(c.threads, 0);
    assert_eq!(c.seed, None);
    assert_eq!(c.tolerances, Tolerances::default());
}

#[test]
fn invalid_configs_are_config_errors() {
    let base = "experiment = \"lln\"\nmodel = \"neutral_logistic\"\n";
    for (extra, field) in [
        ("n_list = []\nreplicas = 3\n", "n_list"),
        ("n_list = [100, 100]\nreplicas = 3\n", "n_list"),
        ("n_list = [100]\nreplicas = 0\n", "replicas"),
        ("n_list = [100]\nreplicas = 3\nhorizon = -1.0\n", "horizon"),
        ("n_list = [100]\nreplicas = 3\ndelta = 0.5\n", "delta"),
        ("n_list = [100]\nreplicas = 3\n[tolerances]\nslope_band = [0.1, -0.1]\n", "slope_band"),
        ("n_list = [100]\nreplicas = 3\nunknown_key = 1\n", "unknown_key"),
        ("n_list = [100]\n", "replicas"),
    ] {
        match ExperimentConfig::from_toml(&format!("{base}{extra}")) {
            Err(HarnessError::Config(m)) => assert!(m.contains(field), "{field}: {m}"),
            other => panic!("{field}: expected a config error, got {other:?}"),
        }
    }
    let gen = "experiment = \"wf_reduction\"\nmodel = \"neutral_logistic\"\nn_list = [100]\nreplicas = 1\n";
    assert!(matches!(ExperimentConfig::from_toml(gen), Err(HarnessError::Config(_))));
}

#[test]
fn model_refs_parse_from_the_command_line_form() {
    let m: ModelRef = "gause_lotka_volterra:b=1.5;2.5,qn=1".parse().unwrap();
    let mut params = BTreeMap::new();
    params.insert("b".to_string(), vec![1.5, 2.5]);
    params.insert("qn".to_string(), vec![1.0]);
    assert_eq!(m, ModelRef::Inline { family: "gause_lotka_volterra".into(), params });
    assert_eq!("double_monod".parse::<ModelRef>().unwrap(), ModelRef::Name("double_monod".into()));
    assert!("neutral_logistic:theta".parse::<ModelRef>().is_err());
    assert!("neutral_logistic:theta=x".parse::<ModelRef>().is_err());
}

#[test]
fn unknown_models_and_parameters_fail_to_build() {
    for s in ["nope", "neutral_logistic:K=1.5", "neutral_logistic:zeta=1", "double_monod:b=1"] {
        let m: ModelRef = s.parse().unwrap();
        assert!(matches!(m.build(), Err(HarnessError::Config(_))), "{s}");
    }
}

#[test]
fn seed_priority_is_cli_then_config() {
    let mut c = ExperimentConfig::new(ExperimentKind::Lln, ModelRef::Name("neutral_logistic".into()), vec![10], 1);
    c.seed = Some(4);
    assert_eq!(c.resolve_seed(Some(8)).unwrap(), 8);
    assert_eq!(c.seed, Some(8));
    assert_eq!(c.resolve_seed(None).unwrap(), 8);
}

#[test]
fn load_prefixes_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    std::fs::write(&p, "experiment = \"lln\"\n").unwrap();
    match ExperimentConfig::load(&p) {
        Err(HarnessError::Config(m)) => assert!(m.contains("c.toml"), "{m}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(ExperimentConfig::load(&dir.path().join("missing.toml")), Err(HarnessError::Config(_))));
}
