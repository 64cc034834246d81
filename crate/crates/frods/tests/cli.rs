use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use frods::cli::{CsvTable, RunConfig};

fn frods(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frods"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = r#"
[model]
kind = "spin-boson"
epsilon = 0.3
delta = 1.0

[bath]
xi = 0.5
beta = 2.0
omega_c = 2.5

[numerics]
dt = 0.1
n_steps = 12
order = 2
k_max = 4
d_max = 3
"#;

#[test]
fn run_writes_csv_and_logs_steps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("out.csv");
    let o = frods(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = String::from_utf8(o.stderr).unwrap();
    assert_eq!(log.lines().count(), 12);
    assert!(log.lines().last().unwrap().starts_with("step=12 keys="));

    let table = CsvTable::load(&out).unwrap();
    assert_eq!(table.header, ["t", "sigma_z", "trace_re", "trace_im", "herm_defect"]);
    assert_eq!(table.rows.len(), 13);
    assert_eq!(table.rows[0], [0.0, 1.0, 1.0, 0.0, 0.0]);
    let t = table.column("t").unwrap();
    assert!((t[12] - 1.2).abs() < 1e-12);
    for z in table.column("sigma_z").unwrap() {
        assert!(z.abs() <= 1.0 + 1e-9);
    }
}

#[test]
fn run_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let mut bytes = Vec::new();
    for threads in ["1", "1", "3"] {
        let o = frods(&["run", "--config", cfg.to_str().unwrap(), "--threads", threads], dir.path());
        assert!(o.status.success());
        bytes.push(o.stdout);
    }
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[0], bytes[2]);
}

#[test]
fn free_spin_boson_oscillates() {
    let dir = tempfile::tempdir().unwrap();
    let o = frods(&["run", "--config", config("spin_boson_free.toml").to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let table = CsvTable::parse(&String::from_utf8(o.stdout).unwrap(), "stdout").unwrap();
    let t = table.column("t").unwrap();
    let z = table.column("sigma_z").unwrap();
    for (t, z) in t.iter().zip(&z) {
        assert!((z - (2.0 * t).cos()).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn output_path_from_config_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}\n[output]\npath = \"from_config.csv\"\nobservables = [\"populations\"]\n");
    let cfg = write_config(dir.path(), "with_out.toml", &body);
    let o = frods(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let table = CsvTable::load(&dir.path().join("from_config.csv")).unwrap();
    assert_eq!(&table.header[1..3], ["P_1", "P_2"]);
}

#[test]
fn bad_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("negative_dt.toml", SMALL.replace("dt = 0.1", "dt = -0.1")),
        ("order_three.toml", SMALL.replace("order = 2", "order = 3")),
        ("unknown_key.toml", SMALL.replace("k_max = 4", "k_max = 4\nkmax = 4")),
        ("zero_dmax.toml", SMALL.replace("d_max = 3", "d_max = 0")),
    ] {
        let cfg = write_config(dir.path(), name, &body);
        let o = frods(&["run", "--config", cfg.to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{name}");
    }
    let o = frods(&["run"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = frods(&["count", "--dmax", "2", "--kmax", "64"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = frods(&["run", "--config", "nope.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_passes_on_small_runs() {
    let dir = tempfile::tempdir().unwrap();
    let first = write_config(dir.path(), "first.toml", &SMALL.replace("order = 2", "order = 1").replace("d_max = 3\n", ""));
    let o = frods(&["oracle", "--config", first.to_str().unwrap(), "--steps", "3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("step=")).count(), 3);
    assert!(text.lines().last().unwrap().ends_with("ok"));

    let second = write_config(dir.path(), "second.toml", SMALL);
    let o = frods(&["oracle", "--config", second.to_str().unwrap(), "--steps", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8(o.stdout).unwrap().contains("pruned_gap="));
}

#[test]
fn order_recovers_rate_from_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    // error of size c dt^2 on one column, exact elsewhere
    for (name, dt) in [("f.csv", 0.025f64), ("m.csv", 0.05), ("c.csv", 0.1)] {
        let steps = (0.8 / dt).round() as usize;
        let mut s = String::from("t,x,trace_re,trace_im,herm_defect\n");
        for k in 0..=steps {
            let t = k as f64 * dt;
            s += &format!("{t},{},1,0,0\n", t.sin() + 3.0 * dt * dt * t);
        }
        fs::write(dir.path().join(name), s).unwrap();
    }
    let o = frods(&["order", "f.csv", "m.csv", "c.csv"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let p: f64 = text.trim().strip_prefix("x p=").unwrap().parse().unwrap();
    assert!((p - 2.0).abs() < 1e-3);
}

#[test]
fn order_of_identical_runs_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let s = "t,x,trace_re,trace_im,herm_defect\n0,1,1,0,0\n0.1,2,1,0,0\n";
    let s_mid = "t,x,trace_re,trace_im,herm_defect\n0,1,1,0,0\n0.05,1.5,1,0,0\n0.1,2,1,0,0\n";
    let s_fine = "t,x,trace_re,trace_im,herm_defect\n0,1,1,0,0\n0.025,1,1,0,0\n0.05,1.5,1,0,0\n0.075,1,1,0,0\n0.1,2,1,0,0\n";
    fs::write(dir.path().join("c.csv"), s).unwrap();
    fs::write(dir.path().join("m.csv"), s_mid).unwrap();
    fs::write(dir.path().join("f.csv"), s_fine).unwrap();
    let o = frods(&["order", "f.csv", "m.csv", "c.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn count_lists_every_cap() {
    let dir = tempfile::tempdir().unwrap();
    let o = frods(&["count", "--dmax", "4", "--kmax", "10"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d_max,k_max,n_diag,n_first_order");
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[5], "4,10,10016,6196");
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
        cfg.run_spec(1).unwrap();
        n += 1;
    }
    assert!(n >= 10);
}
