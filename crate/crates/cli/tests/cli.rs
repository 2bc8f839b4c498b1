use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use airway_core::config::Config;
use airway_core::volume::{load_volume, save_volume, Grid, ScalarVolume};

fn airway(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airway")).args(args).env_remove("AIRWAY_THREADS").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small phantom written to `dir`; returns its seed argument.
fn make_phantom(dir: &Path, generations: usize) -> String {
    let spec = dir.join("spec.txt");
    fs::write(&spec, format!("generations = {generations}\n")).unwrap();
    let o = airway(&["phantom", "--spec", s(&spec), "--out", s(&dir.join("ph"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    fs::read_to_string(dir.join("ph/seed.txt")).unwrap().trim().to_string()
}

#[test]
fn phantom_segment_eval_end_to_end() {
    let t = tempfile::tempdir().unwrap();
    let seed = make_phantom(t.path(), 2);
    let vol = t.path().join("ph/volume.mhd");
    let out = t.path().join("run");
    let o = airway(&["segment", "--volume", s(&vol), "--seed", &seed, "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["mask.mhd", "mask.raw", "tree.json", "summary.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let o = airway(&["eval", "--result", s(&out), "--truth", s(&t.path().join("ph"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("Method"));
    assert!(out.join("eval.json").is_file());
}

#[test]
fn eval_of_truth_against_itself() {
    let t = tempfile::tempdir().unwrap();
    make_phantom(t.path(), 2);
    let res = t.path().join("res");
    fs::create_dir(&res).unwrap();
    fs::copy(t.path().join("ph/truth.raw"), res.join("truth.raw")).unwrap();
    fs::copy(t.path().join("ph/truth.mhd"), res.join("mask.mhd")).unwrap();
    let o = airway(&["eval", "--result", s(&res), "--truth", s(&t.path().join("ph"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row, ["Result", "3.00", "100.00", "0.00"]);
}

#[test]
fn missing_volume_exits_two() {
    let t = tempfile::tempdir().unwrap();
    let o = airway(&["segment", "--volume", "/no/such/volume.mhd", "--seed", "1,2,3", "--out", s(t.path())]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("file not found") && e.lines().count() == 1, "{e}");
}

#[test]
fn misspelled_config_key_exits_three() {
    let t = tempfile::tempdir().unwrap();
    let seed = make_phantom(t.path(), 1);
    let cfg = t.path().join("bad.cfg");
    fs::write(&cfg, "gvf.mu = 0.1\ntube.tl = 400\n").unwrap();
    let vol = t.path().join("ph/volume.mhd");
    let o = airway(&["segment", "--volume", s(&vol), "--seed", &seed, "--config", s(&cfg), "--out", s(&t.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("tube.tl"));
    assert!(!t.path().join("o").exists());
}

#[test]
fn bad_arguments_are_usage_errors() {
    let o = airway(&["segment", "--volume", "v.mhd", "--seed", "1,2", "--out", "o"]);
    assert_eq!(o.status.code(), Some(64));
    let o = airway(&["debug", "--volume", "v.mhd", "--voi", "0,0,0,0,0,0,5,5", "--dump", "gvf", "--out", "o.mhd"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn help_lists_every_config_key_with_default() {
    for args in [&["--help"][..], &["segment", "--help"][..]] {
        let o = airway(args);
        assert!(o.status.success());
        let text = String::from_utf8(o.stdout).unwrap();
        for (k, v) in Config::default().entries() {
            assert!(text.contains(&format!("{k} = {v}")), "{k} missing from {args:?}");
        }
    }
}

#[test]
fn debug_gvf_of_constant_volume_is_zero() {
    let t = tempfile::tempdir().unwrap();
    let vol = t.path().join("flat.mhd");
    let grid = Grid::new([24, 24, 24], [0.5; 3], [-6.0; 3]).unwrap();
    save_volume(&ScalarVolume::filled(grid, -500.0), &vol).unwrap();
    let out = t.path().join("dump/gvf.mhd");
    let o = airway(&["debug", "--volume", s(&vol), "--voi", "0,0,-4,0,0,1,6,8", "--dump", "gvf", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["gvf.mhd", "gvf_x.mhd", "gvf_y.mhd", "gvf_z.mhd"] {
        let d = load_volume(t.path().join("dump").join(f)).unwrap();
        assert!(!d.data.is_empty());
        assert!(d.data.iter().all(|&x| x == 0.0), "{f}");
    }
}

#[test]
fn debug_dumps_every_kind() {
    let t = tempfile::tempdir().unwrap();
    make_phantom(t.path(), 1);
    let vol = t.path().join("ph/volume.mhd");
    for kind in ["cef", "gvf", "tubeness", "centerline"] {
        let out = t.path().join(format!("{kind}.mhd"));
        let o = airway(&["debug", "--volume", s(&vol), "--voi", "0,0,-3,0,0,-1,12,10", "--dump", kind, "--out", s(&out)]);
        assert!(o.status.success(), "{kind}: {}", stderr(&o));
        assert_eq!(load_volume(&out).unwrap().grid.dims, [24, 24, 20], "{kind}");
    }
}

fn files(dir: &Path, names: &[&str]) -> Vec<Vec<u8>> {
    names.iter().map(|n| fs::read(dir.join(n)).unwrap()).collect()
}

#[test]
fn phantom_is_reproducible() {
    let t = tempfile::tempdir().unwrap();
    let names = ["volume.mhd", "volume.raw", "truth.mhd", "truth.raw", "tree.json", "seed.txt"];
    let spec = t.path().join("spec.txt");
    fs::write(&spec, "generations = 2\nnoise_sigma = 25\nrng_seed = 9\n").unwrap();
    for out in ["a", "b"] {
        assert!(airway(&["phantom", "--spec", s(&spec), "--out", s(&t.path().join(out))]).status.success());
    }
    assert_eq!(files(&t.path().join("a"), &names), files(&t.path().join("b"), &names));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let t = tempfile::tempdir().unwrap();
    let seed = make_phantom(t.path(), 3);
    let vol = t.path().join("ph/volume.mhd");
    let one = t.path().join("one");
    let eight = t.path().join("eight");
    let o = airway(&["segment", "--threads", "1", "--volume", s(&vol), "--seed", &seed, "--out", s(&one)]);
    assert!(o.status.success(), "{}", stderr(&o));
    // the environment variable stands in for the flag
    let o = Command::new(env!("CARGO_BIN_EXE_airway"))
        .args(["segment", "--volume", s(&vol), "--seed", &seed, "--out", s(&eight)])
        .env("AIRWAY_THREADS", "8")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let names = ["mask.mhd", "mask.raw", "tree.json", "summary.json"];
    assert_eq!(files(&one, &names), files(&eight, &names));
}
