use affordance::cli::resolve;
use affordance::config::RunConfig;

/// A file value and a flag value per key, both different from the default.
const VALUES: [(&str, &str, &str); 26] = [
    ("seed", "7", "8"),
    ("mode", "nonlinear", "linear"),
    ("records", "300", "400"),
    ("max_episodes", "90", "80"),
    ("min_inventory", "2", "3"),
    ("max_inventory", "6", "7"),
    ("val_fraction", "0.2", "0.3"),
    ("out_dir", "from-file", "from-flag"),
    ("dataset", "file.jsonl", "flag.jsonl"),
    ("model_dir", "file-models", "flag-models"),
    ("report_dir", "file-reports", "flag-reports"),
    ("epochs", "5", "6"),
    ("lr", "0.01", "0.02"),
    ("gamma", "0.5", "0.6"),
    ("lr_step", "3", "4"),
    ("lr_unit", "step", "step"),
    ("sign_weight", "0.5", "2.0"),
    ("workers", "1", "2"),
    ("ae_max_epochs", "11", "12"),
    ("ae_patience", "4", "5"),
    ("budget", "100", "200"),
    ("cutoff", "0.3", "0.7"),
    ("predictor", "oracle", "baseline"),
    ("task", "bridge", "occluded"),
    ("sizes", "2,3", "4"),
    ("samples", "3", "4"),
];

fn render(cfg: &RunConfig, key: &str) -> String {
    cfg.to_text().lines().find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string)).unwrap()
}

#[test]
fn every_key_is_covered() {
    let keys: Vec<&str> = VALUES.iter().map(|v| v.0).collect();
    assert_eq!(keys, RunConfig::KEYS.to_vec());
}

#[test]
fn flag_beats_file_beats_default() {
    let dir = tempfile::tempdir().unwrap();
    let defaults = RunConfig::default();
    for (key, file_value, flag_value) in VALUES {
        let path = dir.path().join(format!("{key}.conf"));
        std::fs::write(&path, format!("# only {key}\n{key} = {file_value}\n")).unwrap();

        let from_file = resolve(Some(&path), &[]).unwrap();
        let mut expected = defaults.clone();
        expected.set(key, file_value).unwrap();
        assert_eq!(from_file, expected, "{key} from file");
        assert_ne!(render(&from_file, key), render(&defaults, key), "{key} file value equals default");

        let from_flag = resolve(Some(&path), &[(key.to_string(), flag_value.to_string())]).unwrap();
        let mut expected = defaults.clone();
        expected.set(key, flag_value).unwrap();
        assert_eq!(from_flag, expected, "{key} from flag");

        let flag_only = resolve(None, &[(key.to_string(), flag_value.to_string())]).unwrap();
        assert_eq!(flag_only, expected, "{key} flag without file");
    }
    assert_eq!(resolve(None, &[]).unwrap(), defaults);
}
