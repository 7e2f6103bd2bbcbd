use std::path::Path;
use std::process::{Command, Output};

fn pairsonic(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairsonic"))
        .args(args)
        .current_dir(dir)
        .env_remove("PAIRSONIC_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/transcript.schema.json");
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

#[test]
fn honest_default_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = pairsonic(&["run", "--n", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("ContactsImported").count(), 4);
    assert!(dir.path().join("transcript.jsonl").exists());
}

#[test]
fn attacked_run_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = pairsonic(
        &["run", "--n", "4", "--attack", "mitm_key_substitution"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!stdout(&o).contains("ContactsImported"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "--n", "1"][..],
        &["run", "--attack", "no_such_attack"],
        &["run", "--users", "sometimes"],
        &["run", "--noise", "awgn"],
        &["run", "--n", "3", "--out-of-range", "5"],
        &["frobnicate"],
        &["scaling-report", "--max-n", "1"],
    ] {
        let o = pairsonic(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn exit_codes_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    for attack in ["none", "message_drop", "oob_inject"] {
        let a = pairsonic(
            &["run", "--n", "3", "--attack", attack, "--seed", "11"],
            dir.path(),
        );
        let b = pairsonic(
            &["run", "--n", "3", "--attack", attack, "--seed", "11"],
            dir.path(),
        );
        assert_eq!(a.status.code(), b.status.code());
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: Option<&str>, extra: &[&str], out: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_pairsonic"));
        c.args(["run", "--n", "3", "-o", out])
            .args(extra)
            .current_dir(dir.path());
        match env {
            Some(v) => c.env("PAIRSONIC_SEED", v),
            None => c.env_remove("PAIRSONIC_SEED"),
        };
        assert!(c.output().unwrap().status.success());
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let from_env = run(Some("77"), &[], "a.jsonl");
    let from_flag = run(None, &["--seed", "77"], "b.jsonl");
    let default = run(None, &[], "c.jsonl");
    assert_eq!(from_env, from_flag);
    assert_ne!(from_env, default);
}

#[test]
fn transcripts_match_the_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let validator = schema();
    for (i, attack) in [
        "none",
        "mitm_key_substitution",
        "replay",
        "sybil_duplicate_id",
        "group_in_the_middle",
        "oob_inject",
    ]
    .iter()
    .enumerate()
    {
        let out = format!("t{i}.jsonl");
        let users = if i % 2 == 0 {
            "confirm-all"
        } else {
            "rushing:0.5"
        };
        pairsonic(
            &[
                "run", "--n", "4", "--attack", attack, "--users", users, "-o", &out,
            ],
            dir.path(),
        );
        let text = std::fs::read_to_string(dir.path().join(&out)).unwrap();
        assert!(text.lines().count() > 10);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
            assert!(errors.is_empty(), "{attack}: {line}: {errors:?}");
        }
    }
}

#[test]
fn schema_rejects_malformed_records() {
    let validator = schema();
    let good: serde_json::Value = serde_json::from_str(
        r#"{"seq":0,"tick":0,"endpoint":0,"honest":true,"direction":"out","channel":"inband","kind":"Join","bytes":"0a","phase_before":"Ready","phase_after":"Joining"}"#,
    )
    .unwrap();
    assert!(validator.is_valid(&good));
    for (field, bad) in [
        ("direction", serde_json::json!("sideways")),
        ("bytes", serde_json::json!("0g")),
        ("phase_after", serde_json::json!("Done")),
        ("seq", serde_json::json!(-1)),
    ] {
        let mut v = good.clone();
        v[field] = bad;
        assert!(!validator.is_valid(&v), "{field}");
    }
    let mut extra = good.clone();
    extra["note"] = serde_json::json!("x");
    assert!(!validator.is_valid(&extra));
}

#[test]
fn campaign_csv_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = pairsonic(
        &[
            "campaign",
            "--attack",
            "none,mitm_key_substitution",
            "--seeds",
            "5",
            "--n",
            "2,3",
            "--bench-trials",
            "0",
            "-o",
            "out.csv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 5 * 2);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows
        .iter()
        .filter(|r| r.contains(",none,"))
        .all(|r| r.contains("ContactsImported")));
    assert!(rows
        .iter()
        .filter(|r| r.contains("mitm"))
        .all(|r| !r.contains("ContactsImported")));
    assert!(stdout(&o).contains("zero-false-accept assertion: PASS"));
}

#[test]
fn campaign_reports_decode_success_per_noise() {
    let dir = tempfile::tempdir().unwrap();
    let o = pairsonic(
        &[
            "campaign",
            "--attack",
            "none",
            "--seeds",
            "1",
            "--n",
            "2",
            "--noise",
            "clean,awgn:10",
            "--bench-trials",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("awgn:10"));
    assert!(err.contains("zero-false-accept assertion: PASS"));
    assert!(stdout(&o).starts_with("seed,policy,n,noise"));
}

#[test]
fn modem_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for file in ["f.wav", "f.f32"] {
        let enc = pairsonic(
            &[
                "modem-encode",
                "--kind",
                "network-init",
                "--payload",
                "deadbeef00",
                "-o",
                file,
            ],
            dir.path(),
        );
        assert_eq!(enc.status.code(), Some(0));
        let dec = pairsonic(&["modem-decode", "-i", file], dir.path());
        assert_eq!(dec.status.code(), Some(0));
        assert!(
            stdout(&dec).contains("kind=NetworkInit payload=deadbeef00"),
            "{}",
            stdout(&dec)
        );
    }
    std::fs::write(dir.path().join("silence.f32"), vec![0u8; 4 * 48_000]).unwrap();
    let dec = pairsonic(&["modem-decode", "-i", "silence.f32"], dir.path());
    assert_eq!(dec.status.code(), Some(2));
    let bad = pairsonic(
        &["modem-encode", "--payload", "zz", "-o", "x.wav"],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn scaling_report_matches_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = pairsonic(&["scaling-report", "--max-n", "7", "--json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 6);
    let last = rows.last().unwrap();
    assert_eq!(last["n"], 7);
    assert_eq!(last["pairwise"], 21);
    assert_eq!(last["safeslinger"], 21);
    assert_eq!(last["pairsonic"], 8);
    let table = pairsonic(&["scaling-report", "--max-n", "3"], dir.path());
    assert!(stdout(&table).contains("safeslinger = 2n + n"));
}

#[test]
fn policy_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("drop.policy"),
        "inband kind=Disperse -> drop\n",
    )
    .unwrap();
    let o = pairsonic(
        &["run", "--n", "3", "--policy-file", "drop.policy"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("attack=drop"));
    std::fs::write(dir.path().join("bad.policy"), "inband kind=Nope -> drop\n").unwrap();
    let o = pairsonic(&["run", "--policy-file", "bad.policy"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}
