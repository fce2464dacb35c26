use std::process::{Command, Output};

use relaysec_cli::validate::{self, Fault, SuiteOptions};

fn relaysec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaysec"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn same_spec_twice_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let path = dir.path().join(name);
        let out = relaysec(&[
            "sweep",
            "--relays",
            "3",
            "--snr-db",
            "0:20:10",
            "--trials",
            "30000",
            "--seed",
            "5",
            "--threads",
            threads,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "2");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("snr_db,strategy,metric,analytic,mc_mean,mc_stderr,trials,seed\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2);
}

#[test]
fn config_file_with_relay_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("relays.toml"),
        "[[relay]]\nmain_offset_db = 0\n[[relay]]\nmain_offset_db = -3\neve_offset_db = 2\n",
    )
    .unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        "strategy = \"saf\"\noutputs = \"asr\"\n[network]\nfile = \"relays.toml\"\n[sweep]\nstart = 5\nstop = 5\nstep = 1\n",
    )
    .unwrap();
    let out = relaysec(&["analytic", "--config", config.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[1..3], ["saf", "asr"]);
    assert!(row[3].parse::<f64>().unwrap() > 0.0);
    assert_eq!(row[4], "");
}

#[test]
fn config_errors_exit_2_and_name_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "trials = 0\ncolour = \"red\"\n[sweep]\nstep = 0\n").unwrap();
    let out = relaysec(&["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    for field in ["trials", "colour", "sweep.step"] {
        assert!(err.contains(field), "{field} missing from {err}");
    }

    let out = relaysec(&["analytic", "--relays", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = relaysec(&["analytic", "--snr-db", "0:x:1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_with_few_trials_passes() {
    let out = relaysec(&["validate", "--trials", "100"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.contains(" PASS ")).count(), 8);
}

#[test]
fn swapped_rates_fail_the_df_simulation_check() {
    let opts = SuiteOptions {
        fault: Some(Fault::SwapLambdas),
        ..SuiteOptions::default().with_trials(20_000)
    };
    let faulty = validate::criterion_2(&opts);
    assert!(!faulty.passed(), "{faulty}");
    let clean = validate::criterion_2(&SuiteOptions::default().with_trials(20_000));
    assert!(clean.passed(), "{clean}");
}

#[test]
fn bundled_configs_are_valid() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if let Err(e) = relaysec_cli::load_config(&path) {
            panic!("{}: {e}", path.display());
        }
        seen += 1;
    }
    assert!(seen >= 3);
}
