use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gam_bench::config::preset;
use gam_bench::output::Manifest;
use gam_bench::ExperimentConfig;
use gam_core::corrchan::RisGrid;
use gam_core::echelon::{DecompositionDump, Method};
use gam_core::hexlat::hex_count_oracle;
use tempfile::TempDir;

fn gam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gam")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn tiny_rre(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        grid: RisGrid::new(4, 4, 0.125).unwrap(),
        element_sweep: vec![16],
        spacing_sweep: vec![0.25, 0.125],
        realizations: 4,
        rotation_trials: 50,
        seed: 11,
        out_dir: out.to_path_buf(),
        ..preset("fig3-small").unwrap()
    }
}

fn tiny_ser(out: &Path) -> ExperimentConfig {
    ExperimentConfig { frames: 3000, out_dir: out.to_path_buf(), ..preset("small-example").unwrap() }
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rre_bench_is_deterministic_and_regenerates_from_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = tiny_rre(&tmp.path().join("a"));
    let config = write_config(tmp.path(), &cfg);
    for dir in ["a", "b"] {
        let o = gam(&["--config", path_str(&config), "--out", path_str(&tmp.path().join(dir)), "rre-bench"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read(tmp.path().join("a/rre.csv")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("b/rre.csv")).unwrap());
    assert_eq!(fs::read(tmp.path().join("a/rre_samples.csv")).unwrap(), fs::read(tmp.path().join("b/rre_samples.csv")).unwrap());

    let manifest = tmp.path().join("a/manifest_rre_bench.json");
    let m: Manifest = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m.files, ["rre.csv", "rre_samples.csv"]);
    assert_eq!(m.channel_seeds.len(), 2 * 4);
    assert_eq!(m.config_sha256.len(), 64);
    let o = gam(&["--config", path_str(&manifest), "--out", path_str(&tmp.path().join("c")), "rre-bench"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(a, fs::read(tmp.path().join("c/rre.csv")).unwrap());

    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(text.starts_with("n,d_over_lambda,method,realizations,rre_mean,rre_median,rre_p10,rre_p90,seconds_mean\n"));
}

#[test]
fn single_receiver_gives_zero_rre() {
    let tmp = TempDir::new().unwrap();
    let cfg = ExperimentConfig { n_r: 1, methods: vec![Method::Cp], ..tiny_rre(tmp.path()) };
    let config = write_config(tmp.path(), &cfg);
    let o = gam(&["--config", path_str(&config), "rre-bench"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("rre.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[2], "CP");
        for v in &f[4..8] {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{line}");
        }
    }
}

#[test]
fn ser_sim_small_run_has_monotone_theory() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &tiny_ser(tmp.path()));
    let o = gam(&["--config", path_str(&config), "ser-sim"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for file in ["ser_gam.csv", "ser_qrsic.csv"] {
        let csv = fs::read_to_string(tmp.path().join(file)).unwrap();
        let mut by_sub: std::collections::BTreeMap<String, Vec<(f64, f64)>> = Default::default();
        for line in csv.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            by_sub.entry(f[1].to_string()).or_default().push((f[0].parse().unwrap(), f[8].parse().unwrap()));
        }
        assert!(by_sub.contains_key("aggregate"));
        for (sub, pts) in by_sub {
            assert_eq!(pts.len(), 3, "{file} {sub}");
            for w in pts.windows(2) {
                assert!(w[0].0 < w[1].0);
                assert!(w[1].1 <= w[0].1 * (1.0 + 1e-12), "{file} {sub}: theory not monotone {pts:?}");
            }
        }
    }
    let m: Manifest = serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest_ser_sim.json")).unwrap()).unwrap();
    assert_eq!(m.command, "ser-sim");
    assert!(m.version.starts_with("gam-bench/"));
    assert_eq!(m.channel_seeds.len(), 1);
}

#[test]
fn averaged_ser_records_every_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = ExperimentConfig {
        mode: gam_bench::SerMode::Averaged,
        realizations: 10,
        frames: 500,
        snr_db: vec![25.0],
        ..tiny_ser(tmp.path())
    };
    let config = write_config(tmp.path(), &cfg);
    let o = gam(&["--config", path_str(&config), "ser-sim"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: Manifest = serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest_ser_sim.json")).unwrap()).unwrap();
    assert_eq!(m.channel_seeds.len(), 10);
    let mut seeds = m.channel_seeds.clone();
    seeds.dedup();
    assert_eq!(seeds.len(), 10);
}

#[test]
fn constellation_files_match_their_summary() {
    let tmp = TempDir::new().unwrap();
    let o = gam(&["--preset", "small-example", "--out", path_str(tmp.path()), "constellation-dump", "--channel-seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(tmp.path().join("constellation_summary.csv")).unwrap();
    let mut checked = 0;
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let scheme = if f[0] == "gam" { "gam" } else { "qrsic" };
        if f[1] == "total" {
            continue;
        }
        let cardinality: usize = f[3].parse().unwrap();
        let bits: f64 = f[4].parse().unwrap();
        assert!((bits - (cardinality as f64).log2()).abs() < 1e-6);
        let csv = fs::read_to_string(tmp.path().join(format!("constellation_{scheme}_{}.csv", f[1]))).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), cardinality, "{line}");
        if f[2] == "annular" {
            let ks: Vec<u64> = rows.iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
            let (lo, hi) = (*ks.iter().min().unwrap(), *ks.iter().max().unwrap());
            assert_eq!(rows.len() as u64, (lo..=hi).map(hex_count_oracle).sum::<u64>());
        }
        checked += 1;
    }
    assert!(checked >= 2);

    let product = |scheme: &str| -> (u128, f64) {
        let subs: Vec<Vec<&str>> = summary.lines().map(|l| l.split(',').collect::<Vec<_>>()).filter(|f| f[0] == scheme).collect();
        let total = subs.iter().find(|f| f[1] == "total").unwrap();
        let p: u128 = subs.iter().filter(|f| f[1] != "total").map(|f| f[3].parse::<u128>().unwrap()).product();
        assert_eq!(total[3].parse::<u128>().unwrap(), p);
        (p, total[4].parse().unwrap())
    };
    for scheme in ["gam", "qr-sic"] {
        let (p, bits) = product(scheme);
        assert!((bits - (p as f64).log2()).abs() < 1e-5);
    }
}

#[test]
fn decompose_identity_with_qr() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("eye.json");
    fs::write(&input, r#"{"matrix": [[[1,0],[0,0],[0,0]],[[0,0],[1,0],[0,0]]]}"#).unwrap();
    let output = tmp.path().join("dec.json");
    let o = gam(&["decompose", path_str(&input), "--method", "QR", "--output", path_str(&output)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("rre = 0.000000e0"));
    let dump: DecompositionDump = serde_json::from_str(&fs::read_to_string(&output).unwrap()).unwrap();
    for (i, row) in dump.b.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((z[0] - want).abs() < 1e-15 && z[1].abs() < 1e-15);
        }
    }
    for (i, row) in dump.c.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((z[0] - want).abs() < 1e-15 && z[1].abs() < 1e-15);
        }
    }
    assert_eq!(dump.rre, 0.0);

    // The dump itself is a valid input and reproduces the same matrix.
    let again = tmp.path().join("again.json");
    let o = gam(&["decompose", path_str(&output), "--method", "cp", "--output", path_str(&again)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn channel_gen_output_feeds_decompose() {
    let tmp = TempDir::new().unwrap();
    let o = gam(&["--preset", "small-example", "--out", path_str(tmp.path()), "channel-gen", "--channel-seed", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for input in ["channel.json", "equivalent.json"] {
        let out = tmp.path().join(format!("dec_{input}"));
        let o = gam(&["decompose", path_str(&tmp.path().join(input)), "--method", "GS", "--output", path_str(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(tmp.path().join("dec_channel.json")).unwrap(), fs::read(tmp.path().join("dec_equivalent.json")).unwrap());
}

#[test]
fn malformed_input_names_line_and_column() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("bad.json");
    fs::write(&input, "{\n  \"matrix\": [[[1, 0]],\n}").unwrap();
    let o = gam(&["decompose", path_str(&input)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("column"), "{err}");
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let o = gam(&["decompose", path_str(&tmp.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("missing.json"));

    let o = gam(&["--preset", "nope", "ser-sim"]);
    assert_eq!(o.status.code(), Some(2));

    let o = gam(&["--preset", "small-example", "--preset", "fig5", "ser-sim"]);
    assert_ne!(o.status.code(), Some(0));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = gam(&["--preset", "small-example", "--out", path_str(&blocker.join("sub")), "channel-gen"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("file/sub"));

    let config = tmp.path().join("extra.json");
    let mut v = serde_json::to_value(tiny_ser(tmp.path())).unwrap();
    v["surprise"] = serde_json::json!(1);
    fs::write(&config, v.to_string()).unwrap();
    let o = gam(&["--config", path_str(&config), "ser-sim"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("surprise"));
}

#[test]
fn too_many_receivers_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = ExperimentConfig { n_r: 8, ..tiny_ser(tmp.path()) };
    let config = write_config(tmp.path(), &cfg);
    let o = gam(&["--config", path_str(&config), "ser-sim"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("n_r") || err.contains("n_R"), "{err}");
}
