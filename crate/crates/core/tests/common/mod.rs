//! Synthetic data and CLI helpers shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

/// Class 0 is a fixed-frequency sine, class 1 a linear chirp; both get a
/// random phase and Gaussian noise. Labels alternate "1", "2".
pub fn sine_chirp(n: usize, len: usize, noise: f64, seed: u64) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).unwrap();
    let mut labels = Vec::with_capacity(n);
    let mut series = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let phase = rng.gen_range(0.0..2.0 * PI);
        let x = (0..len)
            .map(|k| {
                let t = k as f64 / (len - 1) as f64;
                let arg = if class == 0 { 4.0 * t } else { t + 3.0 * t * t };
                (2.0 * PI * arg + phase).sin() + rng.sample(normal)
            })
            .collect();
        labels.push((class + 1).to_string());
        series.push(x);
    }
    (labels, series)
}

pub fn shuffled(labels: &[String], seed: u64) -> Vec<String> {
    let mut out = labels.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

pub fn ucr_text(labels: &[String], series: &[Vec<f64>]) -> String {
    let mut s = String::new();
    for (l, x) in labels.iter().zip(series) {
        s.push_str(l);
        for v in x {
            write!(s, "\t{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Writes `<name>_TRAIN.tsv` and `<name>_TEST.tsv` into `dir`.
pub fn write_ucr(dir: &Path, name: &str, train: (&[String], &[Vec<f64>]), test: (&[String], &[Vec<f64>])) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join(format!("{name}_TRAIN.tsv")), ucr_text(train.0, train.1)).unwrap();
    fs::write(dir.join(format!("{name}_TEST.tsv")), ucr_text(test.0, test.1)).unwrap();
    dir.to_path_buf()
}

/// Sine-vs-chirp dataset in UCR layout.
pub fn toy_ucr(dir: &Path, n_train: usize, n_test: usize, len: usize, seed: u64) -> PathBuf {
    let (tl, ts) = sine_chirp(n_train, len, 0.1, seed);
    let (el, es) = sine_chirp(n_test, len, 0.1, seed + 1);
    write_ucr(dir, "Toy", (&tl, &ts), (&el, &es))
}

pub fn geostat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geostat"))
}

/// Runs the binary and returns (success, stderr).
pub fn run(args: &[&str]) -> (bool, String) {
    let out = geostat().args(args).output().expect("binary runs");
    (out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())
}

pub fn run_ok(args: &[&str]) {
    let (ok, err) = run(args);
    assert!(ok, "geostat {args:?} failed:\n{err}");
}

/// Records of a CSV file as string vectors, header included.
pub fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

/// Column `name` of every data row.
pub fn column(path: &Path, name: &str) -> Vec<String> {
    let rows = read_csv(path);
    let idx = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[idx].clone()).collect()
}

/// Synthetic AIS-style CSV: `n` vessels, half "trawlers" that loiter in
/// slow zigzags and half "cargo" ships that run straight, each with a
/// stationary stretch and a long reporting gap.
pub fn vessel_csv(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::from("mmsi,timestamp,lat,lon,speed,distance_from_shore,distance_from_port,label\n");
    for v in 0..n {
        let label = if v % 2 == 0 { "trawlers" } else { "cargo" };
        let (mut lat, mut lon) = (rng.gen_range(-40.0..40.0), rng.gen_range(-170.0..170.0));
        let mut t = 0.0;
        let mut heading: f64 = rng.gen_range(0.0..2.0 * PI);
        let points = 160;
        for k in 0..points {
            let (speed, turn) = match (v % 2, k) {
                (_, 40..=59) => (0.1, 0.0),
                (0, _) => (3.0 + rng.gen_range(-0.5..0.5), rng.gen_range(-0.6..0.6)),
                _ => (12.0 + rng.gen_range(-0.5..0.5), rng.gen_range(-0.02..0.02)),
            };
            heading += turn;
            let dt = if k == 100 { 4.0 * 3600.0 } else { 300.0 };
            t += dt;
            let nm = if k == 100 { 0.0 } else { speed * dt / 3600.0 };
            lat += nm / 60.0 * heading.cos();
            lon += nm / 60.0 * heading.sin() / lat.to_radians().cos();
            let shore = 5.0 + 0.01 * k as f64 + if v % 2 == 0 { 0.0 } else { 20.0 };
            writeln!(s, "{v},{t},{lat:.6},{lon:.6},{speed:.3},{shore:.3},{:.3},{label}", shore * 2.0).unwrap();
        }
    }
    s
}
