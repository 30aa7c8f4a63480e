//! Loader for UCR-archive style text files: one series per line, class
//! label first, tab / comma / whitespace separated.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Labeled series of one split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub labels: Vec<String>,
    pub series: Vec<Vec<f64>>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Whether every series has the same number of samples.
    pub fn equal_length(&self) -> bool {
        self.series.windows(2).all(|w| w[0].len() == w[1].len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcrDataset {
    pub name: String,
    pub train: Split,
    pub test: Split,
}

impl UcrDataset {
    /// Distinct training labels.
    pub fn classes(&self) -> Vec<String> {
        let mut c = self.train.labels.clone();
        c.sort();
        c.dedup();
        c
    }

    pub fn max_len(&self) -> usize {
        self.train
            .series
            .iter()
            .chain(&self.test.series)
            .map(Vec::len)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Delimiter {
    Tab,
    Comma,
    Whitespace,
}

fn detect(line: &str) -> Delimiter {
    if line.contains('\t') {
        Delimiter::Tab
    } else if line.contains(',') {
        Delimiter::Comma
    } else {
        Delimiter::Whitespace
    }
}

fn fields(line: &str, d: Delimiter) -> Vec<&str> {
    match d {
        Delimiter::Tab => line.split('\t').map(str::trim).collect(),
        Delimiter::Comma => line.split(',').map(str::trim).collect(),
        Delimiter::Whitespace => line.split_whitespace().collect(),
    }
}

fn is_missing(f: &str) -> bool {
    f.is_empty() || f == "?" || f.eq_ignore_ascii_case("nan") || f.eq_ignore_ascii_case("na")
}

/// Old archive files write labels as floats ("1.0000000e+00"); integral
/// values are normalized to plain integers.
fn normalize_label(raw: &str) -> String {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 => format!("{}", v as i64),
        _ => raw.to_string(),
    }
}

/// Fills missing samples: leading gaps take the first observed value,
/// interior gaps are linearly interpolated, trailing gaps shorten the series.
fn fill_missing(raw: &[Option<f64>]) -> Option<Vec<f64>> {
    let last = raw.iter().rposition(Option::is_some)?;
    let raw = &raw[..=last];
    let first = raw.iter().position(Option::is_some)?;
    let mut out = vec![0.0; raw.len()];
    let first_val = raw[first].unwrap();
    out[..first].fill(first_val);
    let mut prev = first;
    out[first] = first_val;
    for k in first + 1..raw.len() {
        if let Some(v) = raw[k] {
            let (a, b) = (out[prev], v);
            for (m, o) in out.iter_mut().enumerate().take(k).skip(prev + 1) {
                let s = (m - prev) as f64 / (k - prev) as f64;
                *o = a + s * (b - a);
            }
            out[k] = v;
            prev = k;
        }
    }
    Some(out)
}

/// Parses one split. `path` is only used in error messages.
pub fn parse_ucr<R: Read>(reader: R, path: &Path) -> Result<Split> {
    let mut split = Split::default();
    let mut delim = None;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let d = *delim.get_or_insert_with(|| detect(trimmed));
        let parts = fields(trimmed, d);
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg,
        };
        let (label, rest) = parts.split_first().ok_or_else(|| parse_err("empty row".into()))?;
        if is_missing(label) {
            return Err(parse_err("missing class label".into()));
        }
        let raw = rest
            .iter()
            .map(|f| {
                if is_missing(f) {
                    Ok(None)
                } else {
                    f.parse::<f64>()
                        .map(|v| v.is_finite().then_some(v))
                        .map_err(|_| parse_err(format!("invalid value {f:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let series = fill_missing(&raw).ok_or_else(|| parse_err("row has no values".into()))?;
        split.labels.push(normalize_label(label));
        split.series.push(series);
    }
    Ok(split)
}

pub fn load_split(path: &Path) -> Result<Split> {
    let f = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    parse_ucr(f, path)
}

fn find_split(dir: &Path, tag: &str) -> Result<(PathBuf, String)> {
    let mut hits = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(pos) = name.find(tag) {
            let stem_ok = name[pos + tag.len()..].is_empty() || name[pos + tag.len()..].starts_with('.');
            if stem_ok && entry.path().is_file() {
                hits.push((entry.path(), name[..pos].to_string()));
            }
        }
    }
    hits.sort();
    match hits.len() {
        1 => Ok(hits.pop().unwrap()),
        0 => Err(Error::Config(format!("no *{tag} file in {}", dir.display()))),
        _ => Err(Error::Config(format!("several *{tag} files in {}", dir.display()))),
    }
}

/// Loads `<name>_TRAIN[.ext]` and `<name>_TEST[.ext]` from a dataset directory.
/// Test labels must all occur in the training split.
pub fn load_ucr(dir: &Path) -> Result<UcrDataset> {
    let (train_path, name) = find_split(dir, "_TRAIN")?;
    let (test_path, _) = find_split(dir, "_TEST")?;
    let train = load_split(&train_path)?;
    let test = load_split(&test_path)?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    if let Some(bad) = test.labels.iter().find(|l| !train.labels.contains(l)) {
        return Err(Error::Vocabulary(format!("test label {bad:?} does not occur in training data")));
    }
    Ok(UcrDataset { name, train, test })
}
