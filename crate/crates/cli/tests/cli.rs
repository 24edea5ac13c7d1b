use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cogmac::analytic::perfect_bound;
use cogmac::{AccessModel, AccessPolicy, SensingProfile, SystemParams, TrafficParams};
use cogmac_cli::parse_config;

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn cogmac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogmac")).args(args).output().unwrap()
}

/// fig1.cfg with `[sweep]` lines replaced.
fn variant_of_fig1(dir: &Path, sweep: &str, extra: &str) -> PathBuf {
    let base = fs::read_to_string(bundled("fig1.cfg")).unwrap();
    let head = &base[..base.find("[sweep]").unwrap()];
    let path = dir.join("run.cfg");
    fs::write(&path, format!("{head}[sweep]\n{sweep}\n{extra}")).unwrap();
    path
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn bundled_configs_validate() {
    for name in ["fig1.cfg", "fig2.cfg"] {
        let out = cogmac(&["validate-config", "--config", bundled(name).to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let canonical = String::from_utf8(out.stdout).unwrap();
        assert_eq!(parse_config(&canonical).unwrap(), parse_config(&fs::read_to_string(bundled(name)).unwrap()).unwrap());
    }
    let fig1 = parse_config(&fs::read_to_string(bundled("fig1.cfg")).unwrap()).unwrap();
    assert_eq!(fig1.system, SystemParams::reference());
    assert_eq!(fig1.profile, SensingProfile::table_one(10).unwrap());
    assert_eq!(fig1.delay_cap, 100.0);
    assert_eq!(fig1.lambda_grid.points().len(), 61);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "[system]\nnoise_density = \n").unwrap();
    let out = cogmac(&["validate-config", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = cogmac(&["validate-config", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let out = cogmac(&["sweep", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(1));

    let cfg = variant_of_fig1(dir.path(), "delay_cap = 100\nlambda_start = 0\nlambda_stop = 0\nlambda_step = 0.1\nvariants = [\"perfect\"]", "");
    let blocked = dir.path().join("no-such-dir").join("out.csv");
    let out = cogmac(&["sweep", "--config", cfg.to_str().unwrap(), "--output", blocked.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn single_point_perfect_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant_of_fig1(
        dir.path(),
        "delay_cap = 100\nlambda_start = 0.2\nlambda_stop = 0.2\nlambda_step = 0.01\nvariants = [\"perfect\"]",
        "",
    );
    let out_path = dir.path().join("out.csv");
    let out = cogmac(&["sweep", "--config", cfg.to_str().unwrap(), "--output", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_rows(&out_path);
    assert_eq!(rows.len(), 1);
    assert_eq!(&header[..4], ["lambda_p", "variant", "feasible", "mu_s"]);
    assert_eq!(header.len(), 8 + 20);
    let expected = perfect_bound(&TrafficParams::new(0.2).unwrap(), &SystemParams::reference(), 100.0).unwrap().unwrap();
    assert_eq!(rows[0][1], "perfect");
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), expected);

    let text = fs::read_to_string(&out_path).unwrap();
    let hash = text.lines().nth(1).unwrap();
    assert!(hash.starts_with("# config_sha256 = ") && hash.len() == "# config_sha256 = ".len() + 64);
}

#[test]
fn csv_policies_reproduce_their_throughput() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant_of_fig1(
        dir.path(),
        "delay_cap = 4\nlambda_start = 0\nlambda_stop = 0.4\nlambda_step = 0.05\nvariants = [\"proposed\", \"sp-hat\", \"s1\", \"s2\", \"s3\", \"s4\"]",
        "[optimizer]\nmultistarts = 8\n",
    );
    let out_path = dir.path().join("out.csv");
    let out = cogmac(&["sweep", "--config", cfg.to_str().unwrap(), "--output", out_path.to_str().unwrap(), "--jobs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_rows(&out_path);
    assert_eq!(rows.len(), 9 * 6);
    let params = SystemParams::reference();
    let profile = SensingProfile::table_one(10).unwrap();
    let model = AccessModel::new(&params, &profile).unwrap();
    for row in rows.iter().filter(|r| r[2] == "true") {
        let num = |i: usize| row[i].parse::<f64>().unwrap();
        let flat: Vec<f64> = (7..28).map(num).collect();
        let policy = AccessPolicy::from_flat(&flat).unwrap();
        let m = model.metrics(&policy, &TrafficParams::new(num(0)).unwrap()).unwrap();
        assert!((m.mu_s - num(3)).abs() <= 1e-12, "{row:?}");
        assert!((m.mu_p - num(4)).abs() <= 1e-12, "{row:?}");
    }
}

#[test]
fn sweep_with_simulation_adds_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant_of_fig1(
        dir.path(),
        "delay_cap = 100\nlambda_start = 0.1\nlambda_stop = 0.2\nlambda_step = 0.1\nvariants = [\"s1\", \"perfect\"]",
        "[optimizer]\nmultistarts = 4\n\n[simulation]\nn_slots = 200000\nseed = 5\n",
    );
    let out_path = dir.path().join("out.csv");
    let out = cogmac(&["sweep", "--config", cfg.to_str().unwrap(), "--output", out_path.to_str().unwrap()]);
    let code = out.status.code();
    assert!(code == Some(0) || code == Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_rows(&out_path);
    assert!(header.iter().any(|h| h == "z_mu_s"));
    assert_eq!(rows.len(), 4);
    let z = header.iter().position(|h| h == "z_mu_p").unwrap();
    assert!(!rows[0][z].is_empty(), "s1 row is simulated");
    assert!(rows[1][z].is_empty(), "bound row is not");
}

#[test]
fn optimize_and_simulate_subcommands() {
    let fig1 = bundled("fig1.cfg");
    let out = cogmac(&["optimize", "--config", fig1.to_str().unwrap(), "--lambda", "0.3", "--variant", "s4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("variant    s4") && text.contains("feasible   true"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let policy = format!("0.1,{}", ["0"; 20].join(","));
    let out = cogmac(&[
        "simulate", "--config", fig1.to_str().unwrap(), "--lambda", "0.2", "--policy", &policy,
        "--slots", "20000", "--trace", trace.to_str().unwrap(),
    ]);
    let code = out.status.code();
    assert!(code == Some(0) || code == Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 20_001);

    let out = cogmac(&["simulate", "--config", fig1.to_str().unwrap(), "--lambda", "0.2", "--policy", "0.1,0.2"]);
    assert_eq!(out.status.code(), Some(1));
}
