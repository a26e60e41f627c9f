//! Dataset files.
//!
//! `chosen-set-v1` is UTF-8 text with one observation per line,
//! `<chosen>,<id> <id> ...`, using zero-based item ids. An optional
//! `# n=<int>` header fixes the universe size; otherwise it is one more than
//! the largest id seen. Other lines starting with `#` and blank lines are
//! ignored. Item labels live in a sidecar `<file>.labels.json` holding a JSON
//! array of strings.
//!
//! `sf-matrix` holds one observation per row as `2n` integer columns
//! (comma- or whitespace-separated): `n` availability flags followed by `n`
//! one-hot flags marking the chosen alternative.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pcmc_core::data::Observation;
use pcmc_core::ChoiceDataset;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: chosen item {chosen} is not in its choice set")]
    InvalidChoice { line: usize, chosen: usize },
    #[error("labels file {}: {message}", path.display())]
    Labels { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] pcmc_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    ChosenSetV1,
    SfMatrix,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chosen-set-v1" => Ok(Format::ChosenSetV1),
            "sf-matrix" => Ok(Format::SfMatrix),
            other => Err(format!(
                "unknown dataset format '{other}' (expected chosen-set-v1 or sf-matrix)"
            )),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> DataError {
    DataError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(rest: &str) -> Option<&str> {
    rest.trim().strip_prefix("n=").map(str::trim)
}

fn finish(
    line: usize,
    chosen: usize,
    set: Vec<usize>,
) -> Result<(usize, usize, Vec<usize>), DataError> {
    let mut sorted = set.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(parse_err(line, "choice set lists an item twice"));
    }
    if sorted.len() < 2 {
        return Err(parse_err(line, "choice set needs at least two items"));
    }
    if !sorted.contains(&chosen) {
        return Err(DataError::InvalidChoice { line, chosen });
    }
    Ok((line, chosen, sorted))
}

fn build(
    declared_n: Option<usize>,
    rows: Vec<(usize, usize, Vec<usize>)>,
) -> Result<ChoiceDataset, DataError> {
    let max_id = rows.iter().flat_map(|(_, _, s)| s.iter().copied()).max();
    let n = match (declared_n, max_id) {
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => 0,
    };
    let mut observations = Vec::with_capacity(rows.len());
    for (line, chosen, set) in rows {
        if let Some(&bad) = set.iter().find(|&&i| i >= n) {
            return Err(parse_err(
                line,
                format!("item {bad} exceeds declared n={n}"),
            ));
        }
        observations.push(Observation::new(n, chosen, set)?);
    }
    Ok(ChoiceDataset::new(n, observations)?)
}

/// Parses `chosen-set-v1` text.
pub fn parse_chosen_set(text: &str) -> Result<ChoiceDataset, DataError> {
    let mut declared_n = None;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some(value) = parse_header(rest) {
                if !rows.is_empty() || declared_n.is_some() {
                    return Err(parse_err(
                        line,
                        "the n= header must come before any observation",
                    ));
                }
                declared_n = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| parse_err(line, format!("bad universe size '{value}'")))?,
                );
            }
            continue;
        }
        let (chosen, members) = trimmed
            .split_once(',')
            .ok_or_else(|| parse_err(line, "expected '<chosen>,<id> <id> ...'"))?;
        let chosen = chosen
            .trim()
            .parse::<usize>()
            .map_err(|_| parse_err(line, format!("bad chosen id '{}'", chosen.trim())))?;
        let set = members
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| parse_err(line, format!("bad item id '{t}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(finish(line, chosen, set)?);
    }
    build(declared_n, rows)
}

/// Parses `sf-matrix` text.
pub fn parse_sf_matrix(text: &str) -> Result<ChoiceDataset, DataError> {
    let mut width = None;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cells = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| match t {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(parse_err(line, format!("expected 0 or 1, found '{other}'"))),
            })
            .collect::<Result<Vec<bool>, _>>()?;
        let w = *width.get_or_insert(cells.len());
        if cells.len() != w || w % 2 != 0 || w == 0 {
            return Err(parse_err(
                line,
                format!("expected {w} columns (2n), found {}", cells.len()),
            ));
        }
        let n = w / 2;
        let set: Vec<usize> = (0..n).filter(|&i| cells[i]).collect();
        let picked: Vec<usize> = (0..n).filter(|&i| cells[n + i]).collect();
        let &[chosen] = picked.as_slice() else {
            return Err(parse_err(
                line,
                format!("expected exactly one chosen flag, found {}", picked.len()),
            ));
        };
        rows.push(finish(line, chosen, set)?);
    }
    build(width.map(|w| w / 2), rows)
}

/// Renders `chosen-set-v1` text with an `n=` header.
pub fn write_chosen_set(d: &ChoiceDataset) -> String {
    let mut out = format!("# n={}\n", d.n());
    for obs in d.observations() {
        let _ = write!(out, "{},", obs.chosen);
        for (k, i) in obs.set.iter().enumerate() {
            let _ = write!(out, "{}{i}", if k == 0 { "" } else { " " });
        }
        out.push('\n');
    }
    out
}

/// Path of the labels sidecar for a dataset file.
pub fn labels_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels.json");
    PathBuf::from(s)
}

fn read(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), DataError> {
    fs::write(path, contents).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Loads a dataset and, when present, its labels sidecar.
pub fn load(path: &Path, format: Format) -> Result<ChoiceDataset, DataError> {
    let text = read(path)?;
    let d = match format {
        Format::ChosenSetV1 => parse_chosen_set(&text)?,
        Format::SfMatrix => parse_sf_matrix(&text)?,
    };
    let sidecar = labels_path(path);
    if !sidecar.exists() {
        return Ok(d);
    }
    let labels: Vec<String> =
        serde_json::from_str(&read(&sidecar)?).map_err(|e| DataError::Labels {
            path: sidecar.clone(),
            message: e.to_string(),
        })?;
    d.with_labels(labels).map_err(|e| DataError::Labels {
        path: sidecar,
        message: e.to_string(),
    })
}

/// Writes `chosen-set-v1` text, plus the labels sidecar when labels are set.
pub fn save(d: &ChoiceDataset, path: &Path) -> Result<(), DataError> {
    write_file(path, &write_chosen_set(d))?;
    if let Some(labels) = d.labels() {
        let json = serde_json::to_string_pretty(labels).expect("strings serialize");
        write_file(&labels_path(path), &(json + "\n"))?;
    }
    Ok(())
}
