//! Reading cause-effect corpora from disk.
//!
//! Two layouts are understood:
//!
//! * `two_column_csv_dir`: one file per pair (`*.csv`, `*.txt`, `*.dat`),
//!   comma or whitespace separated, optional header row. Ground truth comes
//!   from an optional `labels.csv` (`pair_id,direction`); pairs without a
//!   label are taken to be oriented cause first.
//! * `tuebingen_meta`: `pairNNNN.txt` files plus a `pairmeta.txt` table of
//!   `id cause_start cause_end effect_start effect_end weight` rows.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::LabeledPair;
use crate::data::SamplePair;
use crate::error::{Error, Result};
use crate::features::count_distinct;
use crate::inference::Direction;

/// Columns with at most this many distinct values mark a pair as discrete.
pub const DISCRETE_MAX_DISTINCT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    TwoColumnCsvDir,
    TuebingenMeta,
}

impl CorpusFormat {
    pub const TAGS: &'static [&'static str] = &["two_column_csv_dir", "tuebingen_meta"];
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::TwoColumnCsvDir => "two_column_csv_dir",
            CorpusFormat::TuebingenMeta => "tuebingen_meta",
        })
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_column_csv_dir" => Ok(CorpusFormat::TwoColumnCsvDir),
            "tuebingen_meta" => Ok(CorpusFormat::TuebingenMeta),
            other => Err(Error::Config(format!("unknown corpus format '{other}'; valid: {}", Self::TAGS.join(", ")))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub pair_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestedCorpus {
    pub pairs: Vec<LabeledPair>,
    /// Excluded on purpose (multivariate or discrete).
    pub skipped: Vec<SkippedPair>,
    /// Files that could not be read or parsed.
    pub errors: Vec<SkippedPair>,
}

/// Numeric table from a text file; the first line may be a header.
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    parse_table(&text, &path.display().to_string())
}

pub fn parse_table(text: &str, file: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c == ';' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some(first) = rows.first() {
                    if values.len() != first.len() {
                        return Err(Error::Parse {
                            file: file.into(),
                            line: i + 1,
                            msg: format!("expected {} columns, found {}", first.len(), values.len()),
                        });
                    }
                }
                if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Parse { file: file.into(), line: i + 1, msg: format!("non-finite value in column {}", bad + 1) });
                }
                rows.push(values);
            }
            Err(e) if rows.is_empty() && i == 0 => {
                log::debug!("{file}: treating line 1 as header ({e})");
            }
            Err(e) => {
                return Err(Error::Parse { file: file.into(), line: i + 1, msg: e.to_string() });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse { file: file.into(), line: 0, msg: "no numeric rows".into() });
    }
    Ok(rows)
}

/// Read a file that must contain exactly two numeric columns.
pub fn read_pair_file(path: &Path) -> Result<SamplePair> {
    let rows = read_table(path)?;
    let file = path.display().to_string();
    if rows[0].len() != 2 {
        return Err(Error::Parse {
            file,
            line: 1,
            msg: format!("expected exactly 2 columns (cause candidate x, effect candidate y), found {}", rows[0].len()),
        });
    }
    SamplePair::new(rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect())
}

/// Parse a direction label such as `x_to_y`, `1 -> 2`, `2 → 1`, `1` or `-1`.
pub fn parse_direction(label: &str) -> Option<Direction> {
    let s: String = label.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    match s.as_str() {
        "x_to_y" | "x->y" | "x→y" | "1->2" | "1→2" | "->" | "1" | "+1" => Some(Direction::XToY),
        "y_to_x" | "y->x" | "y→x" | "2->1" | "2→1" | "<-" | "-1" | "1<-2" | "1←2" => Some(Direction::YToX),
        _ => None,
    }
}

fn pair_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "txt" | "dat")))
        .collect();
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string()
}

fn dataset_name(dir: &Path) -> String {
    dir.file_name().and_then(|s| s.to_str()).unwrap_or("corpus").to_string()
}

fn is_discrete(pair: &SamplePair) -> bool {
    count_distinct(&pair.x) <= DISCRETE_MAX_DISTINCT || count_distinct(&pair.y) <= DISCRETE_MAX_DISTINCT
}

fn read_labels(path: &Path) -> Result<BTreeMap<String, Direction>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((id, label)) = line.split_once(',') else {
            return Err(Error::Parse { file: path.display().to_string(), line: i + 1, msg: "expected pair_id,direction".into() });
        };
        match parse_direction(label) {
            Some(d) if d != Direction::Undecided => {
                out.insert(id.trim().to_string(), d);
            }
            _ if i == 0 => {}
            _ => {
                return Err(Error::Parse {
                    file: path.display().to_string(),
                    line: i + 1,
                    msg: format!("unrecognized direction '{}'", label.trim()),
                })
            }
        }
    }
    Ok(out)
}

fn ingest_csv_dir(dir: &Path) -> Result<IngestedCorpus> {
    let labels_path = dir.join("labels.csv");
    let labels = if labels_path.exists() { read_labels(&labels_path)? } else { BTreeMap::new() };
    let dataset = dataset_name(dir);
    let mut corpus = IngestedCorpus { pairs: Vec::new(), skipped: Vec::new(), errors: Vec::new() };
    for path in pair_files(dir)? {
        if path == labels_path {
            continue;
        }
        let id = stem(&path);
        match read_pair_file(&path) {
            Ok(pair) => corpus.pairs.push(LabeledPair {
                pair,
                true_direction: labels.get(&id).copied().unwrap_or(Direction::XToY),
                dataset: dataset.clone(),
                pair_id: id,
                weight: 1.0,
            }),
            Err(e) => {
                warn!("skipping {id}: {e}");
                corpus.errors.push(SkippedPair { pair_id: id, reason: e.to_string() });
            }
        }
    }
    Ok(corpus)
}

struct MetaRow {
    direction: Option<Direction>,
    multivariate: bool,
    weight: f64,
}

fn parse_meta_line(line: &str) -> Option<(String, MetaRow)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let id = format!("pair{:0>4}", fields.first()?.trim_start_matches("pair"));
    let numeric: Option<Vec<f64>> = fields[1..].iter().map(|s| s.parse::<f64>().ok()).collect();
    let by_columns = |cause: f64, effect: f64| match (cause as i64, effect as i64) {
        (1, 2) => Some(Direction::XToY),
        (2, 1) => Some(Direction::YToX),
        _ => None,
    };
    match (fields.len(), numeric) {
        (6, Some(v)) => {
            let multivariate = v[0] != v[1] || v[2] != v[3];
            Some((id, MetaRow { direction: by_columns(v[0], v[2]), multivariate, weight: v[4] }))
        }
        (4, Some(v)) => Some((id, MetaRow { direction: by_columns(v[0], v[1]), multivariate: false, weight: v[2] })),
        (n, _) if n >= 2 => {
            let weight = fields.last().and_then(|s| s.parse::<f64>().ok()).filter(|_| n >= 3);
            let label_end = if weight.is_some() { n - 1 } else { n };
            let label = fields[1..label_end].join(" ");
            Some((id, MetaRow { direction: parse_direction(&label), multivariate: false, weight: weight.unwrap_or(1.0) }))
        }
        _ => None,
    }
}

fn ingest_tuebingen(dir: &Path) -> Result<IngestedCorpus> {
    let meta_path = dir.join("pairmeta.txt");
    let meta_text = fs::read_to_string(&meta_path)?;
    let dataset = dataset_name(dir);
    let mut corpus = IngestedCorpus { pairs: Vec::new(), skipped: Vec::new(), errors: Vec::new() };
    for (i, line) in meta_text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let Some((id, row)) = parse_meta_line(line) else {
            corpus.errors.push(SkippedPair { pair_id: format!("pairmeta.txt:{}", i + 1), reason: "malformed metadata row".into() });
            continue;
        };
        if row.multivariate {
            info!("skipping {id}: multivariate (metadata)");
            corpus.skipped.push(SkippedPair { pair_id: id, reason: "multivariate".into() });
            continue;
        }
        let path = dir.join(format!("{id}.txt"));
        let table = match read_table(&path) {
            Ok(t) => t,
            Err(e) => {
                warn!("skipping {id}: {e}");
                corpus.errors.push(SkippedPair { pair_id: id, reason: e.to_string() });
                continue;
            }
        };
        if table[0].len() != 2 {
            info!("skipping {id}: multivariate ({} columns)", table[0].len());
            corpus.skipped.push(SkippedPair { pair_id: id, reason: format!("multivariate ({} columns)", table[0].len()) });
            continue;
        }
        let pair = match SamplePair::new(table.iter().map(|r| r[0]).collect(), table.iter().map(|r| r[1]).collect()) {
            Ok(p) => p,
            Err(e) => {
                corpus.errors.push(SkippedPair { pair_id: id, reason: e.to_string() });
                continue;
            }
        };
        if is_discrete(&pair) {
            info!("skipping {id}: discrete");
            corpus.skipped.push(SkippedPair { pair_id: id, reason: "discrete".into() });
            continue;
        }
        let Some(direction) = row.direction else {
            corpus.errors.push(SkippedPair { pair_id: id, reason: "no usable ground-truth direction".into() });
            continue;
        };
        corpus.pairs.push(LabeledPair { pair, true_direction: direction, dataset: dataset.clone(), pair_id: id, weight: row.weight });
    }
    Ok(corpus)
}

/// Load every pair under `path`. Per-pair problems are collected in the
/// result; an empty corpus is an error.
pub fn ingest_pairs(path: &Path, format: CorpusFormat) -> Result<IngestedCorpus> {
    if !path.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("corpus directory {} does not exist", path.display()),
        )));
    }
    let corpus = match format {
        CorpusFormat::TwoColumnCsvDir => ingest_csv_dir(path)?,
        CorpusFormat::TuebingenMeta => ingest_tuebingen(path)?,
    };
    if corpus.pairs.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "no usable pairs in {} ({} skipped, {} errors)",
            path.display(),
            corpus.skipped.len(),
            corpus.errors.len()
        )));
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::File::create(dir.join(name)).unwrap().write_all(body.as_bytes()).unwrap();
    }

    fn column_text(n: usize, cols: usize, sep: &str) -> String {
        (0..n)
            .map(|i| (0..cols).map(|c| format!("{}", (i * (c + 2)) as f64 * 0.37 + c as f64)).collect::<Vec<_>>().join(sep))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn csv_dir_with_labels_and_header() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.csv", &format!("x,y\n{}", column_text(30, 2, ",")));
        write(dir.path(), "b.txt", &column_text(30, 2, " "));
        write(dir.path(), "c.csv", &column_text(30, 2, "\t"));
        write(dir.path(), "labels.csv", "pair_id,direction\nb,y_to_x\n");
        let c = ingest_pairs(dir.path(), CorpusFormat::TwoColumnCsvDir).unwrap();
        assert_eq!(c.pairs.len(), 3);
        assert_eq!(c.pairs[1].pair_id, "b");
        assert_eq!(c.pairs[1].true_direction, Direction::YToX);
        assert_eq!(c.pairs[0].true_direction, Direction::XToY);
    }

    #[test]
    fn malformed_file_is_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "good.csv", &column_text(25, 2, ","));
        write(dir.path(), "bad.csv", "1,2\n3,oops\n");
        let c = ingest_pairs(dir.path(), CorpusFormat::TwoColumnCsvDir).unwrap();
        assert_eq!(c.pairs.len(), 1);
        assert_eq!(c.errors.len(), 1);
        assert!(c.errors[0].reason.contains("line 2"));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ingest_pairs(dir.path(), CorpusFormat::TwoColumnCsvDir), Err(Error::EmptyCorpus(_))));
    }

    #[test]
    fn tuebingen_layout() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "pairmeta.txt", "0001 1 1 2 2 0.5\n0002 2 2 1 1 1\n0003 1 1 2 2 1\n0004 1 2 3 3 1\n0005 1 1 2 2 1\n");
        write(dir.path(), "pair0001.txt", &column_text(40, 2, " "));
        write(dir.path(), "pair0002.txt", &column_text(40, 2, " "));
        write(dir.path(), "pair0003.txt", &column_text(40, 3, " "));
        write(dir.path(), "pair0004.txt", &column_text(40, 3, " "));
        let discrete: String = (0..40).map(|i| format!("{} {}\n", i % 3, i as f64 * 0.1)).collect();
        write(dir.path(), "pair0005.txt", &discrete);
        let c = ingest_pairs(dir.path(), CorpusFormat::TuebingenMeta).unwrap();
        assert_eq!(c.pairs.len(), 2);
        assert_eq!(c.pairs[0].weight, 0.5);
        assert_eq!(c.pairs[0].true_direction, Direction::XToY);
        assert_eq!(c.pairs[1].true_direction, Direction::YToX);
        let reasons: Vec<&str> = c.skipped.iter().map(|s| s.reason.as_str()).collect();
        assert_eq!(c.skipped.len(), 3, "{reasons:?}");
        assert!(reasons.iter().any(|r| r.starts_with("multivariate (3")));
        assert!(reasons.contains(&"discrete"));
    }

    #[test]
    fn arrow_labels() {
        assert_eq!(parse_direction("1 → 2"), Some(Direction::XToY));
        assert_eq!(parse_direction("2 -> 1"), Some(Direction::YToX));
        assert_eq!(parse_direction("x_to_y"), Some(Direction::XToY));
        assert_eq!(parse_direction("maybe"), None);
        let (_, row) = parse_meta_line("0007 1 → 2 0.25").unwrap();
        assert_eq!(row.direction, Some(Direction::XToY));
        assert_eq!(row.weight, 0.25);
    }

    #[test]
    fn single_column_names_requirement() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "one.csv", "1\n2\n3\n");
        let err = read_pair_file(&dir.path().join("one.csv")).unwrap_err().to_string();
        assert!(err.contains("expected exactly 2 columns"), "{err}");
    }
}
