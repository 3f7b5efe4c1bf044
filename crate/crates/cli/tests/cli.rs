use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::CommandFactory;
use nvdephase::budget::{bundled_samples, SampleSet};
use nvdephase::fitkit::{synth_zero_field_odmr, OdmrSynthParams};
use nvdephase::PhysicalConstants;
use nvdephase_cli::{ingest_decay_csv, ingest_samples_json, ingest_spectrum_csv, Cli};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nvdephase"));
    c.env_remove("NVDEPHASE_CONSTANTS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_exp_curve(dir: &Path, rate_khz: f64) -> PathBuf {
    let p = dir.join("curve.csv");
    let mut text = String::from("t_us,signal\n");
    for i in 0..40 {
        let t = 0.5 * 1.12f64.powi(i);
        text.push_str(&format!("{t},{}\n", (-(rate_khz * 1e-3) * t).exp()));
    }
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn p1_spectrum_has_a_line_near_152_mhz() {
    let d = tmp();
    let out = d.path().join("spec.csv");
    assert!(run(&["p1-spectrum", "--b-gauss", "9.5", "--out", s(&out)]).status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("B_gauss,freq_MHz,strength,n,m,orientation\n"));
    let near = text.lines().skip(1).any(|l| {
        let f: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        (f - 152.0).abs() < 2.0
    });
    assert!(near);
}

#[test]
fn meanfield_rate_prints_141() {
    let v = ok_json(&["meanfield-rate", "--species", "electron", "--aligned", "--out", "-"]);
    let r = v["rate_khz_per_ppm"].as_f64().unwrap();
    assert!((r / 141.0 - 1.0).abs() < 0.01, "{r}");
    assert!((v["closed_form_khz_per_ppm"].as_f64().unwrap() - 141.0).abs() < 0.01);
}

#[test]
fn meanfield_rate_table_for_several_fields() {
    let o = run(&["meanfield-rate", "--species", "p1", "--b-gauss", "5,50"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    // Six levels for the on-axis class and for the three equivalent off-axis classes.
    assert!(text.starts_with("B_gauss,level_index,orientation,rate_kHz_per_ppm,total\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 12);
}

#[test]
fn fit_auto_on_exponential_reports_unit_stretch() {
    let d = tmp();
    let curve = write_exp_curve(d.path(), 30.0);
    let v = ok_json(&["fit", "--model", "auto", "--in", s(&curve)]);
    assert_eq!(v["model"], "exp");
    assert!((v["stretch"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["rate_khz"].as_f64().unwrap() / 30.0 - 1.0).abs() < 1e-6);
    let v = ok_json(&["fit", "--model", "stretched_exp", "--in", s(&curve)]);
    assert!((v["stretch"].as_f64().unwrap() - 1.0).abs() < 1e-4);
}

#[test]
fn decay_csv_round_trips_with_metadata() {
    let d = tmp();
    let a = d.path().join("a.csv");
    let b = d.path().join("b.csv");
    let args = ["dd-sim", "--sequence", "xy8", "--n-reps", "2", "--tau-ns", "100,300,1000,3000", "--draws", "50"];
    assert!(bin().args(args).args(["--out", s(&a)]).status().unwrap().success());
    let curve = ingest_decay_csv(&a).unwrap();
    assert_eq!(curve.metadata["sequence"], "xy8");
    fs::write(&b, nvdephase_cli::io::decay_csv(&curve)).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ingest_decay_csv(&b).unwrap(), curve);
}

#[test]
fn spectrum_csv_round_trips() {
    let d = tmp();
    let p = d.path().join("zf.csv");
    assert!(run(&["zf-odmr", "--synthesize", "12941", "--out", s(&p)]).status.success());
    let k = PhysicalConstants::default();
    let direct = synth_zero_field_odmr(&OdmrSynthParams { sigma_e: 12941.0, ..Default::default() }, &k).unwrap();
    assert_eq!(ingest_spectrum_csv(&p).unwrap(), direct);
    let v = ok_json(&["zf-odmr", "--in", s(&p)]);
    let nu = v["nu_dip_khz"].as_f64().unwrap();
    assert!((nu / 220.0 - 1.0).abs() < 0.05, "{nu}");
}

#[test]
fn sample_json_round_trips_and_bundle_has_eleven_records() {
    let d = tmp();
    let p = d.path().join("samples.json");
    assert!(run(&["budget", "--emit-samples", "--out", s(&p)]).status.success());
    let set = ingest_samples_json(&p).unwrap();
    assert_eq!(set.samples, bundled_samples());
    let names: Vec<String> = set.samples.iter().map(|r| r.name.clone()).collect();
    assert_eq!(names, ["H1", "H2", "H3", "H4", "H5", "H6", "C1", "C2", "C3", "C4", "C5"]);
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/samples_rates.json");
    let t1: SampleSet = ingest_samples_json(&fixture).unwrap();
    assert_eq!(t1.samples.len(), 11);
}

#[test]
fn simulations_are_byte_identical_for_a_fixed_seed() {
    let args = ["dd-sim", "--sequence", "cpmg", "--n-reps", "4", "--pi-ns", "40", "--pulse-error", "0.1", "--draws", "80"];
    let a = bin().args(args).output().unwrap();
    let b = bin().args(args).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = bin().args(args).args(["--seed", "5"]).output().unwrap();
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn single_spin_sequences_use_the_spin_one_model() {
    let o = run(&["dd-sim", "--sequence", "dq-ramsey", "--sz-mhz", "0", "--tau-ns", "100,1000", "--draws", "20"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for l in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let sig: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!((sig - 1.0).abs() < 0.05 || sig < 1.0);
    }
    assert_eq!(run(&["dd-sim", "--sequence", "deer-pulse-sweep"]).status.code(), Some(1));
}

#[test]
fn convergence_mode_reports_a_table() {
    let v = ok_json(&[
        "dd-sim", "--sequence", "xy8", "--convergence", "--n-reps", "1,2", "--draws", "40", "--total-us", "2,60,12",
    ]);
    assert_eq!(v["points"].as_array().unwrap().len(), 2);
}

#[test]
fn malformed_csv_gives_line_numbered_errors() {
    let d = tmp();
    let p = d.path().join("bad.csv");
    fs::write(&p, "t_us,signal\n1,0.9\n2,abc\n").unwrap();
    let o = run(&["fit", "--in", s(&p)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.csv:3") && err.contains("signal"), "{err}");

    fs::write(&p, "# sequence: x\nt_us,signal\n1,0.9\n2,0.8,0.1,7\n").unwrap();
    let err = String::from_utf8_lossy(&run(&["fit", "--in", s(&p)]).stderr).to_string();
    assert!(err.contains("bad.csv:4") && err.contains("columns"), "{err}");

    fs::write(&p, "time,signal\n1,0.9\n").unwrap();
    assert!(String::from_utf8_lossy(&run(&["fit", "--in", s(&p)]).stderr).contains("header"));
}

#[test]
fn empty_and_unsorted_inputs_are_rejected() {
    let d = tmp();
    let p = d.path().join("x.csv");
    fs::write(&p, "").unwrap();
    assert!(ingest_decay_csv(&p).is_err());
    fs::write(&p, "t_us,signal\n2,0.9\n1,0.95\n").unwrap();
    assert!(ingest_decay_csv(&p).is_err());
    let j = d.path().join("x.json");
    fs::write(&j, "").unwrap();
    assert!(ingest_samples_json(&j).is_err());
    fs::write(&j, r#"{"samples":[{"name":"a","gamma2":{"value":1,"bogus":2}}]}"#).unwrap();
    let o = run(&["budget", "--in", s(&j)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn numerical_failures_exit_with_two() {
    let d = tmp();
    let j = d.path().join("same.json");
    let rec = |n: &str| format!(r#"{{"name":"{n}","gamma2":{{"value":5}},"gamma_nvnv":{{"value":2}},"dose_e_per_cm2":1e17,"initial_n_ppm":1}}"#);
    fs::write(&j, format!(r#"{{"samples":[{},{},{}]}}"#, rec("a"), rec("b"), rec("c"))).unwrap();
    assert_eq!(run(&["convert", "--in", s(&j)]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["meanfield-rate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&["meanfield-rate", "--b-gauss", "-3"]).status.code(), Some(1));
    assert_eq!(run(&["dd-sim", "--sequence", "nope"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn constants_override_from_flag_and_environment() {
    let d = tmp();
    let c = d.path().join("k.json");
    let half = PhysicalConstants { mu0_hbar_prefactor: 0.5 * PhysicalConstants::default().mu0_hbar_prefactor, ..Default::default() };
    fs::write(&c, serde_json::to_string(&half).unwrap()).unwrap();
    let base = ok_json(&["meanfield-rate"])["rate_khz_per_ppm"].as_f64().unwrap();
    let flag = ok_json(&["meanfield-rate", "--constants", s(&c)])["rate_khz_per_ppm"].as_f64().unwrap();
    let o = bin().args(["meanfield-rate"]).env("NVDEPHASE_CONSTANTS", &c).output().unwrap();
    let env: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((flag / base - 0.5).abs() < 1e-9);
    assert_eq!(env["rate_khz_per_ppm"].as_f64().unwrap(), flag);
    fs::write(&c, r#"{"d_gs": 2870, "unknown_key": 1}"#).unwrap();
    assert_eq!(run(&["meanfield-rate", "--constants", s(&c)]).status.code(), Some(1));
}

#[test]
fn outputs_replace_files_atomically() {
    let d = tmp();
    let out = d.path().join("r.json");
    fs::write(&out, "x".repeat(100_000)).unwrap();
    assert!(run(&["meanfield-rate", "--out", s(&out)]).status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["rate_khz_per_ppm"].is_f64());
    let missing = d.path().join("nope/r.json");
    assert_eq!(run(&["meanfield-rate", "--out", s(&missing)]).status.code(), Some(1));
    assert!(!missing.exists());
    assert_eq!(fs::read_dir(d.path()).unwrap().count(), 1, "no temp files left behind");
}

#[test]
fn budget_sensitivity_and_convert_on_bundled_data() {
    let b = ok_json(&["budget", "--sample", "H2"]);
    let elec = b[0]["budget"]["elec"]["value"].as_f64().unwrap();
    assert!((elec - 4.53).abs() < 0.01);
    let sens = ok_json(&["sensitivity"]);
    for row in sens.as_array().unwrap() {
        let r = row["ramsey"]["eta_pt"].as_f64().unwrap();
        assert!(row["cw"]["eta_pt"].as_f64().unwrap() >= r);
    }
    let one = ok_json(&["sensitivity", "--gamma2star-khz", "100", "--density-ppm", "0.1"]);
    assert!((one["ramsey"]["tau_us"].as_f64().unwrap() - 5.0).abs() < 0.01);
    let conv = ok_json(&["convert"]);
    assert!(conv["slope"].as_f64().unwrap() > 0.0);
    assert_eq!(run(&["budget", "--sample", "Z9"]).status.code(), Some(1));
}

#[test]
fn deer_and_bath_driving_subcommands() {
    let v = ok_json(&["deer", "--b-gauss", "9.5", "--freq-mhz", "152"]);
    assert!((v["line_mhz"].as_f64().unwrap() - 152.0).abs() < 2.0);
    let nv = ok_json(&["deer", "--species", "nv-offaxis"]);
    assert!((nv["rate_khz_per_ppm"].as_f64().unwrap() / 10.1 - 1.0).abs() < 0.1);
    let o = run(&["bath-driving", "--b-gauss", "10"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let sup: f64 = text.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(sup > 1.0);
}

#[test]
fn help_documents_every_flag_of_every_subcommand() {
    let mut root = Cli::command();
    root.build();
    let stable = [
        "b-gauss", "density-ppm", "sequence", "n-reps", "tau-ns", "pi-ns", "pulse-error", "draws", "seed", "model", "in",
        "out", "constants",
    ];
    let mut seen = std::collections::BTreeSet::new();
    for sub in root.get_subcommands() {
        let name = sub.get_name().to_string();
        if name == "help" {
            continue;
        }
        let o = run(&[&name, "--help"]);
        assert!(o.status.success());
        let help = String::from_utf8(o.stdout).unwrap();
        for arg in sub.get_arguments() {
            if let Some(long) = arg.get_long() {
                assert!(help.contains(&format!("--{long}")), "{name} --help misses --{long}");
                assert!(arg.get_help().is_some() || long == "help" || long == "version", "{name} --{long} has no description");
                seen.insert(long.to_string());
            }
        }
    }
    for f in stable {
        assert!(seen.contains(f), "flag --{f} missing");
    }
}
