use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use mdl_harness::{run, ExperimentSpec, Overrides};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BERNOULLI: &str = "kind = \"bernoulli-canonical\"\nlo = -2.0\nhi = 2.0\n";
const MIXTURE: &str = "kind = \"mixture\"\ntau = 0.2\ncomponents = [[0.8, 0.2], [0.3, 0.7]]\n";
const MIXTURE3: &str = "kind = \"mixture\"\ntau = 0.2\ncomponents = [[0.8, 0.1, 0.1], [0.1, 0.1, 0.8]]\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mdl"))
}

fn setup(dir: &Path, family: &str, spec: &str) -> PathBuf {
    fs::write(dir.join("family.toml"), family).unwrap();
    let p = dir.join("spec.toml");
    fs::write(&p, format!("family = \"family.toml\"\n{spec}")).unwrap();
    p
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(2).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn kraft_sweep_on_bernoulli() {
    let dir = tempfile::tempdir().unwrap();
    let p = setup(dir.path(), BERNOULLI, "kind = \"kraft-sweep\"\nn = [1,2,3,4,5,6,7,8,9,10]\n");
    let spec = ExperimentSpec::load(&p, &Overrides::default()).unwrap();
    let out = run(&spec).unwrap();
    assert!(out.manifest.passed);
    let csv = fs::read_to_string(dir.path().join("out/kraft-sweep.csv")).unwrap();
    assert!(csv.starts_with("# mdl-csv schema=1 kind=kraft-sweep\n"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 10);
    for r in rows {
        assert!(r[2].parse::<f64>().unwrap() <= 1.0 + 1e-9);
        assert!(r[3].parse::<f64>().unwrap() <= 1.0 + 1e-9);
    }
}

#[test]
fn nml_compare_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = setup(dir.path(), MIXTURE, "kind = \"nml-compare\"\nn = [4, 8, 12]\n");
    let spec = ExperimentSpec::load(&p, &Overrides::default()).unwrap();
    assert!(run(&spec).unwrap().manifest.passed);
    let csv = fs::read_to_string(dir.path().join("out/nml-compare.csv")).unwrap();
    assert_eq!(
        csv.lines().nth(1).unwrap(),
        "n,shtarkov,max_regret_plain,max_regret_combined,bound,asymptotic_minimax,passed"
    );
    for r in data_rows(&csv) {
        let nml: f64 = r[1].parse().unwrap();
        assert!(r[2].parse::<f64>().unwrap() >= nml);
        assert!(r[3].parse::<f64>().unwrap() >= nml);
        assert!(r[4].parse::<f64>().is_ok());
    }
}

#[test]
fn regret_curve_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = setup(dir.path(), MIXTURE, "kind = \"regret-curve\"\nn = [10, 40, 160]\nsamples = 50\nseed = 5\n");
    let read = |sub: &str| {
        let o = Overrides {
            out: Some(dir.path().join(sub)),
            ..Overrides::default()
        };
        run(&ExperimentSpec::load(&p, &o).unwrap()).unwrap();
        fs::read(dir.path().join(sub).join("regret-curve.csv")).unwrap()
    };
    let (a, b) = (read("a"), read("b"));
    assert_eq!(a, b);
    let o = Overrides {
        out: Some(dir.path().join("c")),
        seed: Some(6),
        ..Overrides::default()
    };
    run(&ExperimentSpec::load(&p, &o).unwrap()).unwrap();
    assert_ne!(a, fs::read(dir.path().join("c/regret-curve.csv")).unwrap());
}

#[test]
fn bound_audit_and_risk_cert() {
    let dir = tempfile::tempdir().unwrap();
    let p = setup(dir.path(), MIXTURE3, "kind = \"bound-audit\"\nn = [6, 10]\n");
    let out = run(&ExperimentSpec::load(&p, &Overrides::default()).unwrap()).unwrap();
    assert!(out.manifest.passed, "{:?}", out.manifest.certificates);

    let p = setup(dir.path(), BERNOULLI, "kind = \"bound-audit\"\nn = [4, 12]\n");
    assert!(run(&ExperimentSpec::load(&p, &Overrides::default()).unwrap()).unwrap().manifest.passed);

    let p = setup(dir.path(), MIXTURE, "kind = \"risk-cert\"\nn = [8, 20]\ntheta = [0.5]\ntrials = 1000\n");
    let out = run(&ExperimentSpec::load(&p, &Overrides::default()).unwrap()).unwrap();
    assert!(out.manifest.passed);
    for f in ["theorem1-n8.json", "theorem1-n20.json", "theorem2-n8.json", "theorem2-n20.json"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out.manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["seed"], 0);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = setup(dir.path(), MIXTURE, "kind = \"kraft-sweep\"\nn = [5, 3]\n");
    assert_eq!(bin().args(["run", p.to_str().unwrap()]).output().unwrap().status.code(), Some(2));
    let p = setup(dir.path(), MIXTURE, "kind = \"kraft-sweep\"\nn = [3]\n");
    let bad = bin()
        .args(["run", p.to_str().unwrap(), "--alpha", "0.5"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let missing = bin().args(["run", "/nonexistent/spec.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let ok = bin().args(["run", p.to_str().unwrap(), "--no-bundle", "--seed", "3"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
}

#[test]
fn failed_certificate_exits_one() {
    // a negative tolerance makes every Kraft sum fail
    let dir = tempfile::tempdir().unwrap();
    let p = setup(dir.path(), BERNOULLI, "kind = \"kraft-sweep\"\nn = [3]\ntolerance = -1.0\n");
    let o = bin().args(["run", p.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAILED"));
}

#[test]
fn compress_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("family.toml");
    fs::write(&fam, MIXTURE3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data: Vec<u8> = (0..10_000).map(|_| if rng.gen_bool(0.7) { 0 } else { rng.gen_range(1..3) }).collect();
    let input = dir.path().join("data.bin");
    fs::write(&input, &data).unwrap();
    let packed = dir.path().join("data.mdl");
    let restored = dir.path().join("data.out");
    let c = bin()
        .args(["compress", "--family"])
        .args([&fam, &input, &packed])
        .output()
        .unwrap();
    assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
    let line = String::from_utf8_lossy(&c.stdout).to_string();
    assert!(line.contains("ideal") && line.contains("achieved"));
    let d = bin()
        .args(["decompress", "--family"])
        .args([&fam, &packed, &restored])
        .output()
        .unwrap();
    assert!(d.status.success());
    assert_eq!(fs::read(&restored).unwrap(), data);
    assert!(fs::read(&packed).unwrap().len() < data.len() / 4);
}

#[test]
fn compress_reports_ideal_and_achieved() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("family.toml"), MIXTURE).unwrap();
    let symbols: Vec<String> = (0..500).map(|i| ((i * 7 % 5 == 0) as u8).to_string()).collect();
    fs::write(dir.path().join("syms.txt"), symbols.join(" ")).unwrap();
    let p = dir.path().join("spec.toml");
    fs::write(
        &p,
        "family = \"family.toml\"\nkind = \"compress\"\ninput = \"syms.txt\"\nformat = \"text\"\n",
    )
    .unwrap();
    let out = run(&ExperimentSpec::load(&p, &Overrides::default()).unwrap()).unwrap();
    assert!(out.manifest.passed);
    let csv = fs::read_to_string(dir.path().join("out/compress.csv")).unwrap();
    let r = &data_rows(&csv)[0];
    let (achieved, ideal): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
    assert!(achieved <= ideal + 32.0);
}

#[test]
fn empty_and_bad_symbol_files() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("family.toml");
    fs::write(&fam, MIXTURE).unwrap();
    let empty = dir.path().join("empty.bin");
    fs::write(&empty, b"").unwrap();
    let packed = dir.path().join("empty.mdl");
    let back = dir.path().join("empty.out");
    assert!(bin().args(["compress", "--family"]).args([&fam, &empty, &packed]).status().unwrap().success());
    assert_eq!(fs::read(&packed).unwrap().len(), 6);
    assert!(bin().args(["decompress", "--family"]).args([&fam, &packed, &back]).status().unwrap().success());
    assert!(fs::read(&back).unwrap().is_empty());

    let bad = dir.path().join("bad.bin");
    fs::write(&bad, [0u8, 1, 2]).unwrap();
    let code = bin()
        .args(["compress", "--family"])
        .args([&fam, &bad, &packed])
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));
}
