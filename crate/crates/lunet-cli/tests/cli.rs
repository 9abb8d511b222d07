//! End-to-end runs of the `lunet` binary: pipeline flows, determinism of
//! artifacts, JSON output shape, and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

use lunet::checkpoint::Checkpoint;
use lunet::dataio::{read_vector, write_vector};
use lunet::Vector;

const BIN: &str = env!("CARGO_BIN_EXE_lunet");

fn lunet(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--out")
        .arg(out_dir)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout should be one JSON document")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process should exit normally")
}

/// Small polynomial-task config: fast but still exercises every stage.
fn small_config(dir: &Path, seed: u64) -> String {
    let path = dir.join("run.json");
    let text = format!(
        r#"{{
  "task": {{"task": "function", "kind": "polynomial", "dim": 3,
           "domain": [-1.0, 1.0], "train_count": 256, "eval_count": 64,
           "seed": {seed}}},
  "train": {{"learning_rate": 0.001, "epochs": 3, "batch_size": 32,
            "optimizer": {{"kind": "adam", "beta1": 0.9, "beta2": 0.999,
                          "epsilon": 1e-8}},
            "seed": {seed}}}
}}"#
    );
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn pipeline_gen_train_eval_round_trip_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 7);

    let gen = stdout_json(&lunet(dir.path(), &["--config", &cfg, "gen-data"]));
    assert_eq!(gen["dim"], 3);
    assert_eq!(gen["train_count"], 256);
    assert_eq!(gen["eval_count"], 64);
    assert!(gen["oracle"].is_null(), "function task has no oracle");

    let train = stdout_json(&lunet(dir.path(), &["--config", &cfg, "train"]));
    let last = &train["final"];
    assert_eq!(train["epochs"], 3);

    // Evaluating the written checkpoint must reproduce the last training
    // record exactly: same network, same split, same code path.
    let eval = stdout_json(&lunet(dir.path(), &["--config", &cfg, "eval"]));
    for field in [
        "eval_mse",
        "eval_max_abs",
        "inversion_error",
        "inversion_max_abs",
        "round_trip_error",
    ] {
        assert_eq!(
            eval[field].as_f64().unwrap(),
            last[field].as_f64().unwrap(),
            "eval field {field} drifted from the final training record"
        );
    }
    assert_eq!(eval["determinant_product"].as_f64().unwrap(), 1.0);

    let rt = stdout_json(&lunet(dir.path(), &["round-trip", "--count", "500"]));
    assert!(rt["round_trip_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(rt["count"], 500);

    let inspect = stdout_json(&lunet(
        dir.path(),
        &[
            "inspect",
            "--checkpoint",
            dir.path().join("model.ckpt").to_str().unwrap(),
            "--dataset",
            dir.path().join("dataset.lds").to_str().unwrap(),
        ],
    ));
    assert_eq!(inspect["checkpoint"]["dim"], 3);
    assert_eq!(inspect["checkpoint"]["depth"], 3);
    assert_eq!(inspect["dataset"]["train_count"], 256);
    assert_eq!(inspect["checkpoint"]["provenance"]["seed"], 7);
}

#[test]
fn artifacts_are_deterministic_for_equal_seeds() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg_a = small_config(a.path(), 21);
    let cfg_b = small_config(b.path(), 21);

    stdout_json(&lunet(a.path(), &["--config", &cfg_a, "gen-data"]));
    stdout_json(&lunet(b.path(), &["--config", &cfg_b, "gen-data"]));
    assert_eq!(
        std::fs::read(a.path().join("dataset.lds")).unwrap(),
        std::fs::read(b.path().join("dataset.lds")).unwrap(),
        "same config must generate identical dataset bytes"
    );

    stdout_json(&lunet(a.path(), &["--config", &cfg_a, "train"]));
    stdout_json(&lunet(b.path(), &["--config", &cfg_b, "train"]));
    assert_eq!(
        std::fs::read(a.path().join("model.ckpt")).unwrap(),
        std::fs::read(b.path().join("model.ckpt")).unwrap(),
        "same config must train to identical checkpoint bytes"
    );
    assert_eq!(
        std::fs::read(a.path().join("metrics.jsonl")).unwrap(),
        std::fs::read(b.path().join("metrics.jsonl")).unwrap(),
        "same config must log identical metrics bytes"
    );
}

#[test]
fn seed_override_rewrites_every_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    // Different config-file seeds, forced to agree via --seed.
    let cfg_a = small_config(a.path(), 1);
    let cfg_b = small_config(b.path(), 2);

    stdout_json(&lunet(a.path(), &["--config", &cfg_a, "--seed", "9", "gen-data"]));
    stdout_json(&lunet(b.path(), &["--config", &cfg_b, "--seed", "9", "gen-data"]));
    assert_eq!(
        std::fs::read(a.path().join("dataset.lds")).unwrap(),
        std::fs::read(b.path().join("dataset.lds")).unwrap()
    );

    stdout_json(&lunet(a.path(), &["--config", &cfg_a, "--seed", "9", "train"]));
    stdout_json(&lunet(b.path(), &["--config", &cfg_b, "--seed", "9", "train"]));
    assert_eq!(
        std::fs::read(a.path().join("model.ckpt")).unwrap(),
        std::fs::read(b.path().join("model.ckpt")).unwrap()
    );

    // And without the override the differing seeds must show.
    let c = tempfile::tempdir().unwrap();
    let cfg_c = small_config(c.path(), 1);
    stdout_json(&lunet(c.path(), &["--config", &cfg_c, "gen-data"]));
    assert_ne!(
        std::fs::read(a.path().join("dataset.lds")).unwrap(),
        std::fs::read(c.path().join("dataset.lds")).unwrap()
    );
}

#[test]
fn invert_round_trips_through_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 5);
    stdout_json(&lunet(dir.path(), &["--config", &cfg, "gen-data"]));
    stdout_json(&lunet(dir.path(), &["--config", &cfg, "train"]));

    let target_path = dir.path().join("target.json");
    let target = Vector::new(vec![0.4, -1.3, 0.9]);
    write_vector(&target_path, &target).unwrap();

    let inv = stdout_json(&lunet(
        dir.path(),
        &["invert", "--target", target_path.to_str().unwrap()],
    ));
    assert_eq!(inv["noise_std"].as_f64().unwrap(), 0.0);

    // Forward through the same checkpoint returns to the target.
    let net = Checkpoint::load(&dir.path().join("model.ckpt"))
        .unwrap()
        .to_net()
        .unwrap();
    let x = read_vector(&dir.path().join("inverse.json")).unwrap();
    let y = net.forward(&x).unwrap();
    assert!(
        y.inf_dist(&target) <= 1e-9,
        "forward(inverse(target)) missed by {:.3e}",
        y.inf_dist(&target)
    );

    // The JSON report carries the same values as the written file.
    let reported: Vec<f64> = inv["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(reported, x.as_slice());
}

#[test]
fn invert_noise_is_seeded_and_optional() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 5);
    stdout_json(&lunet(dir.path(), &["--config", &cfg, "gen-data"]));
    stdout_json(&lunet(dir.path(), &["--config", &cfg, "train"]));

    let target_path = dir.path().join("target.json");
    write_vector(&target_path, &Vector::new(vec![0.1, 0.2, -0.3])).unwrap();
    let t = target_path.to_str().unwrap().to_string();

    let plain = stdout_json(&lunet(dir.path(), &["invert", "--target", &t]));
    let zero = stdout_json(&lunet(
        dir.path(),
        &["invert", "--target", &t, "--noise-std", "0.0"],
    ));
    assert_eq!(plain["values"], zero["values"], "zero noise must be a no-op");

    let noisy_a = stdout_json(&lunet(
        dir.path(),
        &["--seed", "3", "invert", "--target", &t, "--noise-std", "0.01"],
    ));
    let noisy_b = stdout_json(&lunet(
        dir.path(),
        &["--seed", "3", "invert", "--target", &t, "--noise-std", "0.01"],
    ));
    let noisy_c = stdout_json(&lunet(
        dir.path(),
        &["--seed", "4", "invert", "--target", &t, "--noise-std", "0.01"],
    ));
    assert_eq!(noisy_a["values"], noisy_b["values"], "same seed, same noise");
    assert_ne!(noisy_a["values"], noisy_c["values"], "new seed, new noise");
    assert_ne!(noisy_a["values"], plain["values"]);
}

#[test]
fn exit_codes_follow_the_documented_map() {
    let dir = tempfile::tempdir().unwrap();

    // 2: command that needs a config, given none.
    let out = lunet(dir.path(), &["gen-data"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));

    // 2: config file with an unknown field.
    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(
        &bad_cfg,
        r#"{"task": {"task": "function", "kind": "sine", "dim": 2,
            "domain": [-1.0, 1.0], "train_count": 8, "eval_count": 4, "seed": 1},
           "bananas": true}"#,
    )
    .unwrap();
    let out = lunet(dir.path(), &["--config", bad_cfg.to_str().unwrap(), "gen-data"]);
    assert_eq!(code(&out), 2);

    // 2: sine sampled outside its injective domain.
    let wide_sine = dir.path().join("wide.json");
    std::fs::write(
        &wide_sine,
        r#"{"task": {"task": "function", "kind": "sine", "dim": 2,
            "domain": [-3.0, 3.0], "train_count": 8, "eval_count": 4, "seed": 1}}"#,
    )
    .unwrap();
    let out = lunet(dir.path(), &["--config", wide_sine.to_str().unwrap(), "gen-data"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));

    // 3: numeric abort; an absurd learning rate overflows within an epoch.
    let cfg = small_config(dir.path(), 3);
    let explode = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("\"learning_rate\": 0.001", "\"learning_rate\": 1e300");
    std::fs::write(dir.path().join("run.json"), explode).unwrap();
    let out = lunet(dir.path(), &["--config", &cfg, "gen-data"]);
    assert_eq!(code(&out), 0);
    let out = lunet(dir.path(), &["--config", &cfg, "train"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));

    // 5: corrupt checkpoint.
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, "definitely not a checkpoint").unwrap();
    let out = lunet(
        dir.path(),
        &["inspect", "--checkpoint", junk.to_str().unwrap()],
    );
    assert_eq!(code(&out), 5);

    // 5: corrupt dataset.
    let bytes = std::fs::read(dir.path().join("dataset.lds")).unwrap();
    std::fs::write(dir.path().join("dataset.lds"), &bytes[..bytes.len() - 3]).unwrap();
    let out = lunet(
        dir.path(),
        &[
            "inspect",
            "--dataset",
            dir.path().join("dataset.lds").to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 5);

    // 1: plain missing file.
    let out = lunet(
        dir.path(),
        &["inspect", "--checkpoint", dir.path().join("nope.ckpt").to_str().unwrap()],
    );
    assert_eq!(code(&out), 1);

    // Successful commands print exactly one JSON document to stdout.
    let ok = lunet(dir.path(), &["--config", &cfg, "gen-data"]);
    assert_eq!(code(&ok), 0);
    let text = String::from_utf8(ok.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    serde_json::from_str::<serde_json::Value>(&text).unwrap();
}

#[test]
fn embedding_task_emits_consistent_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("emb.json");
    std::fs::write(
        &cfg_path,
        r#"{"task": {"task": "embedding", "dim": 4, "depth": 2,
            "train_count": 64, "eval_count": 16, "seed": 11}}"#,
    )
    .unwrap();
    let gen = stdout_json(&lunet(
        dir.path(),
        &["--config", cfg_path.to_str().unwrap(), "gen-data"],
    ));
    assert!(gen["oracle"].is_string());

    // The serialized oracle reproduces every target from its input.
    let oracle = Checkpoint::load(&dir.path().join("oracle.ckpt"))
        .unwrap()
        .to_net()
        .unwrap();
    let ds = lunet::dataio::read_dataset(&dir.path().join("dataset.lds")).unwrap();
    for (x, t) in ds.train.inputs().iter().zip(ds.train.targets()) {
        let y = oracle.forward(x).unwrap();
        assert_eq!(y.as_slice(), t.as_slice(), "oracle-target mismatch");
    }
}
