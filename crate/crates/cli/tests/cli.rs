use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

use splitgap::scaling::{fit_stretched, FitModel, ScalingDataset};
use splitgap_cli::record::canonicalize_line;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_splitgap"));
    c.env_remove("SPLITGAP_CACHE");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn lines(out: &Output) -> Vec<String> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

fn json_lines(out: &Output) -> Vec<Value> {
    lines(out).iter().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn cache_files(dir: &Path) -> Vec<String> {
    let mut names = Vec::new();
    for shard in std::fs::read_dir(dir).unwrap() {
        for f in std::fs::read_dir(shard.unwrap().path()).unwrap() {
            names.push(f.unwrap().file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    names
}

#[test]
fn unperturbed_chain_record() {
    let out = run(&["ed", "--L", "8", "--lambda", "0", "--alpha", "0.5", "--coupling", "all-to-all"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let recs = json_lines(&out);
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert_eq!(r["command"], "ed");
    assert_eq!(r["cached"], false);
    assert!(r["outputs"]["delta"].as_f64().unwrap().abs() <= 1e-12);
    for key in ["hash", "inputs", "outputs", "timestamp", "version"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn second_identical_run_hits_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let args = ["ed", "--L", "10", "--lambda", "0.4", "--alpha", "0.3", "--cache-dir", cache];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success() && second.status.success());
    let (a, b) = (&lines(&first)[0], &lines(&second)[0]);
    assert!(a.contains("\"cached\":false"));
    assert!(b.contains("\"cached\":true"));
    assert_eq!(a.replace("\"cached\":false", "\"cached\":true"), *b, "byte-identical apart from the flag");

    // the environment key selects the same cache
    let third = bin()
        .args(&args[..7])
        .env("SPLITGAP_CACHE", cache)
        .output()
        .unwrap();
    assert_eq!(lines(&third)[0], *b);

    // --no-cache bypasses it
    let fresh = run(&[&args[..], &["--no-cache"]].concat());
    assert!(lines(&fresh)[0].contains("\"cached\":false"));
}

#[test]
fn changed_tolerance_is_a_miss() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let a = json_lines(&run(&["ed", "--L", "8", "--lambda", "0.4", "--cache-dir", cache]));
    let b = json_lines(&run(&["ed", "--L", "8", "--lambda", "0.4", "--tol", "1e-10", "--cache-dir", cache]));
    assert_ne!(a[0]["hash"], b[0]["hash"]);
    assert_eq!(b[0]["cached"], false);
    assert_eq!(cache_files(dir.path()).len(), 2);
}

#[test]
fn corrupt_entry_is_recomputed_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let args = ["toy", "--L", "8", "--lambda", "1", "--cache-dir", cache];
    let first = json_lines(&run(&args));
    let hash = first[0]["hash"].as_str().unwrap();
    let path = dir.path().join(&hash[..2]).join(format!("{hash}.json"));
    std::fs::write(&path, "not json").unwrap();
    let second = run(&args);
    assert!(second.status.success());
    assert!(stderr(&second).contains("corrupt cache entry"));
    let rec = &json_lines(&second)[0];
    assert_eq!(rec["cached"], false);
    assert_eq!(rec["outputs"], first[0]["outputs"]);
    let third = json_lines(&run(&args));
    assert_eq!(third[0]["cached"], true);
}

#[test]
fn concurrent_sweeps_share_points() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let spawn = |axis: &str| {
        bin()
            .args(["sweep", "--cmd", "toy", "--lambda", "1", "--axis", axis, "--cache-dir", cache, "--jobs", "4"])
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap()
    };
    let a = spawn("L=4:40:2");
    let b = spawn("L=20:60:2");
    let (a, b) = (a.wait_with_output().unwrap(), b.wait_with_output().unwrap());
    assert!(a.status.success() && b.status.success(), "{} {}", stderr(&a), stderr(&b));
    let (ra, rb) = (json_lines(&a), json_lines(&b));
    assert_eq!(ra.len(), 19);
    assert_eq!(rb.len(), 21);
    for x in &ra {
        for y in &rb {
            if x["hash"] == y["hash"] {
                assert_eq!(x["outputs"], y["outputs"]);
            }
        }
    }
    let files = cache_files(dir.path());
    assert_eq!(files.len(), 29, "one entry per distinct point");
    assert!(files.iter().all(|f| f.ends_with(".json") && !f.starts_with('.')));
}

#[test]
fn records_round_trip_byte_identically() {
    let out = run(&["sweep", "--cmd", "toy", "--lambda", "0.7", "--axis", "L=6,8", "--axis", "choice=sigma-x,mixed:1/3", "--route", "all"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let ls = lines(&out);
    assert_eq!(ls.len(), 4);
    for l in &ls {
        assert_eq!(&canonicalize_line(l).unwrap(), l);
        let rec: splitgap_cli::record::RunRecord = serde_json::from_str(l).unwrap();
        assert_eq!(&rec.to_json_line(), l);
    }
    // product order, last axis fastest
    let recs = json_lines(&out);
    let order: Vec<(u64, String)> = recs
        .iter()
        .map(|r| (r["inputs"]["L"].as_u64().unwrap(), r["inputs"]["choice"].as_str().unwrap().to_string()))
        .collect();
    assert_eq!(
        order,
        [(6, "sigma-x".into()), (6, "mixed:1/3".into()), (8, "sigma-x".into()), (8, "mixed:1/3".into())]
    );
}

#[test]
fn exit_codes() {
    let usage = run(&["ed", "--lambda", "0.3"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(run(&["ed", "--L", "8", "--lambda", "0.3", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["ed", "--L", "8", "--lambda", "0.3", "--alpha", "2"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--suite", "nope"]).status.code(), Some(2));

    let compute = run(&["ed", "--L", "30", "--lambda", "1", "--method", "dense"]);
    assert_eq!(compute.status.code(), Some(1));
    let err: Value = serde_json::from_str(stderr(&compute).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "TooLarge");
    assert_eq!(err["command"], "ed");

    let mass = run(&["rotor", "--L", "64", "--lambda", "5", "--alpha", "0.5"]);
    assert_eq!(mass.status.code(), Some(1));
    let err: Value = serde_json::from_str(stderr(&mass).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "NonPositiveMass");

    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_reports_size_and_respects_cap() {
    let out = run(&["sweep", "--cmd", "ed", "--lambda", "0.2", "--axis", "L=4,8", "--axis", "alpha=0.3,0.5,0.7"]);
    assert!(out.status.success());
    assert!(stderr(&out).starts_with("sweep: 6 points"));
    assert_eq!(lines(&out).len(), 6);
    let capped = run(&["sweep", "--cmd", "ed", "--lambda", "0.2", "--axis", "L=4:40:2", "--max-points", "5"]);
    assert_eq!(capped.status.code(), Some(2));
    assert!(lines(&capped).is_empty(), "nothing runs past the cap");
}

#[test]
fn sweep_piped_into_fit() {
    let sweep = run(&["sweep", "--axis", "L=8,12,16", "--cmd", "ed", "--lambda", "1", "--alpha", "0.5"]);
    assert!(sweep.status.success());
    let mut fit = bin()
        .arg("fit")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    {
        use std::io::Write;
        fit.stdin.take().unwrap().write_all(&sweep.stdout).unwrap();
    }
    let out = fit.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let fits = json_lines(&out);
    assert_eq!(fits.len(), 1);
    let f = &fits[0];
    assert_eq!(f["sizes"], serde_json::json!([8, 12, 16]));
    // the piped fit is the library fit of the same points
    let pairs: Vec<(usize, f64)> = json_lines(&sweep)
        .iter()
        .map(|r| (r["inputs"]["L"].as_u64().unwrap() as usize, r["outputs"]["log_delta"].as_f64().unwrap()))
        .collect();
    let direct = fit_stretched(&ScalingDataset::from_pairs(&pairs, "x").unwrap(), FitModel::Auto).unwrap();
    assert_eq!(f["fit"]["p"].as_f64().unwrap(), direct.p);
    assert_eq!(f["expected_p"].as_f64().unwrap(), 0.75);
}

#[test]
fn csv_tables_parse() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("t.csv");
    let jl_path = dir.path().join("t.jsonl");
    let out = run(&[
        "sweep", "--cmd", "rotor", "--lambda", "0.2", "--axis", "L=16,32,64,128",
        "--csv", csv_path.to_str().unwrap(), "--output", jl_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(lines(&out).is_empty(), "records went to --output");
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "outputs.log_delta").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let jl = std::fs::read_to_string(&jl_path).unwrap();
    for (row, line) in rows.iter().zip(jl.lines()) {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(row[col].parse::<f64>().unwrap(), v["outputs"]["log_delta"].as_f64().unwrap());
    }

    let plot = dir.path().join("plot.csv");
    let fit = run(&["fit", "--input", jl_path.to_str().unwrap(), "--csv", plot.to_str().unwrap()]);
    assert!(fit.status.success(), "{}", stderr(&fit));
    let mut rdr = csv::Reader::from_path(&plot).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["L", "fit", "minus_log_delta", "series"]);
    assert_eq!(rdr.records().count(), 4);
}

#[test]
fn config_file_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("point.cfg");
    std::fs::write(&cfg, "# chain point\nL = 8\nlambda = 0.3\nalpha = 0.7\ncoupling = power-law\ntol = 1e-11\n").unwrap();
    let a = json_lines(&run(&["ed", "--config", cfg.to_str().unwrap()]));
    assert_eq!(a[0]["inputs"]["alpha"], 0.7);
    assert_eq!(a[0]["inputs"]["tol"], 1e-11);
    assert_eq!(a[0]["inputs"]["coupling"], "power-law");
    let b = json_lines(&run(&["ed", "--config", cfg.to_str().unwrap(), "--alpha", "0.5"]));
    assert_eq!(b[0]["inputs"]["alpha"], 0.5);
    assert_eq!(b[0]["inputs"]["L"], 8);
}

#[test]
fn sign_alternation_warning() {
    let out = run(&["ed", "--L", "10", "--lambda", "1"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("not a multiple of 4"));
    let rec = &json_lines(&out)[0];
    assert!(rec["outputs"]["delta"].as_f64().unwrap() < 0.0);
    assert!(rec["outputs"]["log_delta"].as_f64().is_some());
}

#[test]
fn toy_routes_in_one_record() {
    let out = run(&["toy", "--L", "10", "--lambda", "1", "--route", "all"]);
    let o = &json_lines(&out)[0]["outputs"];
    let (s, d) = (o["delta_secular"].as_f64().unwrap(), o["delta_dense"].as_f64().unwrap());
    assert!(((s - d) / d).abs() < 1e-8);
    // L = 10 sits in the negative half of the sign alternation on every route
    assert!(d < 0.0);
    assert!(o["delta_timedomain"].as_f64().unwrap() < 0.0);
    assert!(o["log_delta_asymptotic"].as_f64().unwrap() < 0.0);

    let odd = json_lines(&run(&["toy", "--L", "9", "--lambda", "1", "--choice", "sigma-xx", "--route", "all"]));
    assert_eq!(odd[0]["outputs"]["delta"], 0.0);
    assert_eq!(odd[0]["outputs"]["kramers"], true);
}

#[test]
fn verify_exit_status_follows_checks() {
    let ok = run(&["verify", "--suite", "kernel"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stderr(&ok).contains("PASS"));
    let rec = &json_lines(&ok)[0];
    assert_eq!(rec["criterion"], 9);
    assert_eq!(rec["pass"], true);

    let ad = run(&["verify", "--suite", "appendix-d", "--beta", "50", "--nmax", "10000"]);
    assert_eq!(ad.status.code(), Some(0), "{}", stderr(&ad));
    let bad_range = run(&["verify", "--suite", "appendix-d", "--beta", "5"]);
    assert_eq!(bad_range.status.code(), Some(1));
}
