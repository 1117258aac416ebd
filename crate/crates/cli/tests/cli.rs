use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bossamp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bossamp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const SNR: &str = r#"
family = "variable-snr"
algorithm = "bossamp_group"
prior = "sparse_binary"
n = 120
k = 12
m = 60
snr_db = { start = 10.0, stop = 30.0, step = 10.0 }
group_size = 2
realizations = 3
master_seed = 11
"#;

#[test]
fn variable_snr_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "snr.toml", SNR);
    let out = dir.path().join("snr.csv");
    let res = bossamp(&["variable-snr", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "snr_db,m,mean_nmse_db,mean_fanmse_db,mean_iterations,avg_success,realizations,master_seed"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("10.0000000000,60,"));
    for row in &lines[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        let iterations: f64 = cols[4].parse().unwrap();
        let success: f64 = cols[5].parse().unwrap();
        assert!(iterations <= 100.0 && (0.0..=1.0).contains(&success));
        assert_eq!(cols[6], "3");
        assert_eq!(cols[7], "11");
    }
}

#[test]
fn output_is_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "snr.toml", SNR);
    let mut files = Vec::new();
    for (i, threads) in ["1", "2", "1"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}.csv"));
        let res = bossamp(&["variable-snr", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(res.status.code(), Some(0));
        files.push(fs::read(out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "snr.toml", SNR);
    let out = dir.path().join("seeded.csv");
    let res = bossamp(&["variable-snr", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "99"]);
    assert_eq!(res.status.code(), Some(0));
    let text = fs::read_to_string(out).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",99")));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = out.to_str().unwrap();

    let typo = write(dir.path(), "typo.toml", &format!("{SNR}\nrealisations = 4\n"));
    let res = bossamp(&["variable-snr", "--config", &typo, "--out", out]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("realisations"));

    let res = bossamp(&["variable-m", "--config", &typo.replace("typo", "missing"), "--out", out]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("missing.toml"));

    let cfg = write(dir.path(), "snr.toml", SNR);
    let res = bossamp(&["variable-m", "--config", &cfg, "--out", out]);
    assert_eq!(res.status.code(), Some(1));

    let odd = write(dir.path(), "odd.toml", &SNR.replace("k = 12", "k = 13"));
    let res = bossamp(&["variable-snr", "--config", &odd, "--out", out]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!Path::new(out).exists());

    let res = bossamp(&["variable-snr", "--out", out]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn phase_transition_writes_grid_and_contour() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "pt.toml",
        r#"
family = "phase-transition"
algorithm = "bossamp_group"
prior = "sparse_binary"
n = 64
group_size = 2
realizations = 3
master_seed = 5
undersampling = [0.25, 0.5, 0.75]
sparsity = { start = 0.1, stop = 0.9, step = 0.4 }
"#,
    );
    let out = dir.path().join("grid.csv");
    let res = bossamp(&["phase-transition", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let grid = fs::read_to_string(&out).unwrap();
    assert!(grid.starts_with("undersampling,sparsity,m,k,mean_nmse_db,"));
    assert_eq!(grid.lines().count(), 10);
    let contour = fs::read_to_string(dir.path().join("grid.contour.csv")).unwrap();
    assert!(contour.starts_with("polyline,point,undersampling,sparsity\n"));
}
