mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::Command;

use clap::CommandFactory;
use serde_json::Value;
use tracksplit::cli::{dispatch, Cli, OP_REGISTRY};
use tracksplit::tracks::PEACOCK;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["tracksplit".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = dispatch(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tracksplit-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

const M1: &str = "matrix\n0 0 1 0 0\n0 0 0 1 0\n0 0 0 1 1\n1 2 0 0 0\n1 1 0 0 0\n";

#[test]
fn family_matrix_rows() {
    let (code, out, _) = run(&["family", "--n", "0", "--emit", "matrix"]);
    assert_eq!(code, 0);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(out.lines().next(), Some("labels o g p b r"));
    assert_eq!(rows, ["o 0 0 2 1 0", "g 0 0 0 0 1", "p 1 0 0 0 0", "b 0 1 0 0 0", "r 0 0 3 2 0"]);
}

#[test]
fn spectral_with_pin() {
    let dir = scratch("spectral");
    let path = dir.join("m1.txt");
    fs::write(&path, M1).unwrap();
    let (code, out, err) = run(&["spectral", path.to_str().unwrap(), "--pin", "e5=3"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("charpoly t^5 - 2t^3 - 2t^2 + 1"), "{out}");
    assert!(out.contains("lambda 1.72208\n"), "{out}");
    assert!(out.contains("mu 2.53788 2.62837 4.37045 4.52627 3.00000"), "{out}");
    let (_, out, _) = run(&["--digits", "3", "spectral", path.to_str().unwrap()]);
    assert!(out.contains("lambda 1.72\n"), "{out}");
}

#[test]
fn validate_exit_codes() {
    let dir = scratch("validate");
    let good = dir.join("peacock.track");
    fs::write(&good, PEACOCK).unwrap();
    let (code, out, _) = run(&["validate", good.to_str().unwrap()]);
    assert_eq!((code, out.as_str()), (0, "valid\n"));

    let unknown_edge = PEACOCK.replace("order T.1 o g", "order T.1 o q");
    let bad = dir.join("bad.track");
    fs::write(&bad, unknown_edge).unwrap();
    let (code, _, err) = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");

    let (code, _, _) = run(&["validate", dir.join("missing.track").to_str().unwrap()]);
    assert_eq!(code, 3);
    let (code, _, err) = run(&["frobnicate"]);
    assert_eq!(code, 2);
    assert!(err.contains("frobnicate"));
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("Usage"));
}

#[test]
fn map_files_resolve_their_track() {
    let dir = scratch("maps");
    let (_, text, _) = run(&["family", "--n", "2", "--emit", "map"]);
    fs::write(dir.join("f2.map"), &text).unwrap();
    let f2 = dir.join("f2.map");
    let f2 = f2.to_str().unwrap();
    let (code, out, _) = run(&["validate", f2]);
    assert_eq!((code, out.as_str()), (0, "valid\n"));
    let (code, out, _) = run(&["fpf", f2]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("verdict TraceZero"));
    let (code, out, _) = run(&["lift", f2, "--emit-matrix", "--census"]);
    assert_eq!(code, 0);
    assert!(out.contains("trace 0"));
    assert!(out.contains("lifted stratum (4;∅;3^2) chi -2"), "{out}");
    let (code, out, _) = run(&["matrix", f2, "--order", "o,g,p,b,r"]);
    assert_eq!(code, 0);
    assert!(out.contains("r 0 0 5 4 0"), "{out}");
    let (code, out, _) = run(&["family", "--map", f2, "--emit", "absorption"]);
    assert_eq!((code, out.as_str()), (0, "no absorption violations\n"));
    let (code, _, _) = run(&["matrix", f2, "--order", "o,g,p"]);
    assert_eq!(code, 3);
}

#[test]
fn fpf_reports_nonzero_and_unsupported() {
    let dir = scratch("fpf");
    let mut seen = BTreeSet::new();
    for (track, seeds) in [("peacock", 0..40u64), ("d4bigon", 0..3)] {
        let track_path = if track == "peacock" {
            PathBuf::from("peacock")
        } else {
            let p = dir.join("d4bigon.track");
            fs::write(&p, common::D4BI).unwrap();
            p
        };
        for seed in seeds {
            let prefix = dir.join(format!("{track}-{seed}"));
            let (code, _, err) = run(&[
                "enumerate",
                "--generate",
                track_path.to_str().unwrap(),
                "--seed",
                &seed.to_string(),
                "--length",
                "6",
                "--out",
                prefix.to_str().unwrap(),
            ]);
            assert_eq!(code, 0, "{err}");
            let (code, _, _) = run(&["fpf", prefix.with_extension("map").to_str().unwrap()]);
            seen.insert((track, code));
        }
    }
    assert!(seen.contains(&("peacock", 1)), "{seen:?}");
    assert!(seen.contains(&("d4bigon", 2)), "{seen:?}");
}

#[test]
fn arithmetic_commands() {
    let (code, out, _) = run(&["rykken", "7", "8", "4", "0"]);
    assert_eq!((code, out.as_str()), (1, "bound 3 verdict Contradiction\n"));
    let (code, out, _) = run(&["rykken", "1", "8", "4", "0"]);
    assert_eq!((code, out.as_str()), (0, "bound -3 verdict Consistent\n"));
    let (_, out, _) = run(&["alexander", "--trace", "1"]);
    assert!(out.contains("candidate t^4 - t^3 - t^2 - t + 1 selected"), "{out}");
    let (_, out, _) = run(&["alexander", "--indices", "1"]);
    assert!(out.starts_with("trace 1\n"));
    let (_, out, _) = run(&["fdtc", "--interval", "(0,1]"]);
    assert_eq!(out, "interval (0,1] m -1 0\n");
    let (code, _, _) = run(&["fdtc", "--interval", "(1,0]"]);
    assert_eq!(code, 3);
    let (_, out, _) = run(&["braid", "--word", "s1 s2 s3 s4 s1 s2", "--strands", "5", "--stats"]);
    assert!(out.ends_with("exponent_sum 6 self_linking 1\n"), "{out}");
    let (_, out, _) = run(&["braid", "--word", "s1 s2 s3 s4 s1 s2", "--strands", "5", "--stats", "--inverse", "--twist", "1"]);
    assert!(out.ends_with("self_linking 9\n"), "{out}");
}

#[test]
fn census_writes_survivors() {
    let dir = scratch("census");
    let out_dir = dir.join("survivors");
    let (code, out, _) = run(&["census", "--max-len", "9", "--out", out_dir.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(code, 0);
    assert!(out.contains("survivors 3"), "{out}");
    let files: BTreeSet<String> = fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(files.len(), 3);
    let (_, out, _) = run(&["census", "peacock"]);
    assert!(out.ends_with("stratum (2;1^5;3)\n"), "{out}");
    let (_, out, _) = run(&["enumerate", "--depth-one", "r"]);
    assert_eq!(out, "Df(r) g- g0 o- o0\n");
}

#[test]
fn reduce_log_records() {
    let dir = scratch("reduce");
    let prefix = dir.join("jointed");
    let jp = dir.join("jp.track");
    fs::write(&jp, common::jointed_peacock().serialize()).unwrap();
    let mut found = false;
    for seed in 0..20 {
        run(&["enumerate", "--generate", jp.to_str().unwrap(), "--seed", &seed.to_string(), "--length", "8", "--out", prefix.to_str().unwrap()]);
        let log = dir.join(format!("log-{seed}.jsonl"));
        let (code, out, _) = run(&["reduce", prefix.with_extension("map").to_str().unwrap(), "--log", log.to_str().unwrap()]);
        if code != 0 {
            continue;
        }
        assert!(out.contains("J 1 -> 0"), "{out}");
        let recs: Vec<Value> = fs::read_to_string(&log).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        let steps: Vec<&Value> = recs.iter().filter(|r| r["kind"] == "split_step").collect();
        assert!(!steps.is_empty());
        for s in steps {
            for key in ["step", "switch", "side", "P", "matrix"] {
                assert!(!s[key].is_null(), "{key} missing in {s}");
            }
        }
        assert_eq!(recs.last().unwrap()["kind"], "manifest");
        found = true;
        break;
    }
    assert!(found);
}

#[test]
fn repeated_runs_are_identical() {
    let dir = scratch("determinism");
    let mut digests = Vec::new();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let log = dir.join(format!("run{k}.jsonl"));
        let (code, out, _) = run(&["--format", "records", "--log", log.to_str().unwrap(), "family", "--n", "3", "--emit", "map,matrix,reverse,strands"]);
        assert_eq!(code, 0);
        outputs.push(out);
        let last: Value = serde_json::from_str(fs::read_to_string(&log).unwrap().lines().last().unwrap()).unwrap();
        digests.push(last["manifest"]["result_digest"].clone());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(digests[0], digests[1]);
    for line in outputs[0].lines() {
        let _: Value = serde_json::from_str(line).unwrap();
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_tracksplit");
    let st = Command::new(bin).args(["rykken", "7", "8", "4", "0"]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let st = Command::new(bin).args(["family", "--n", "0", "--emit", "matrix"]).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&st.stdout).contains("r 0 0 3 2 0"));
    let st = Command::new(bin).args(["spectral"]).output().unwrap();
    assert_eq!(st.status.code(), Some(3));
    let st = Command::new(bin).args(["family", "--bogus"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn every_operation_has_one_subcommand() {
    let cmd = Cli::command();
    let subs: BTreeSet<String> = cmd.get_subcommands().map(|c| c.get_name().to_string()).collect();
    let mut ops = BTreeSet::new();
    for (op, sub) in OP_REGISTRY {
        assert!(ops.insert(*op), "{op} listed twice");
        assert!(subs.contains(*sub), "{op} routes to missing subcommand {sub}");
    }
    let used: BTreeSet<String> = OP_REGISTRY.iter().map(|(_, s)| s.to_string()).collect();
    assert_eq!(used, subs, "subcommands without an operation");
    assert_eq!(ops.len(), 27);
}
