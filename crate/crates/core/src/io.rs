//! Model files (JSON) and line-record datasets (JSON Lines).
//!
//! A model file holds `format_version`, the `states` and `symbols` label
//! lists, and the `init_logw`, `trans_logw`, `emit_logw` tables. A log-weight
//! of `-inf` is written as the string `"-inf"`. A dataset holds one record
//! per line with an `obs` label list and an optional `states` label list.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::model::{ChainModel, LabeledSequence, ObservationAlphabet, StateSpace, Vocabulary};

pub const FORMAT_VERSION: u32 = 1;

/// A log-weight that serializes `-inf` as the string `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogWeight(pub f64);

impl Serialize for LogWeight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for LogWeight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(LogWeight(v)),
            Raw::Str(s) if s == "-inf" => Ok(LogWeight(f64::NEG_INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"-inf\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    states: Vec<String>,
    symbols: Vec<String>,
    init_logw: Vec<LogWeight>,
    trans_logw: Vec<Vec<LogWeight>>,
    emit_logw: Vec<Vec<LogWeight>>,
}

fn unwrap_row(row: &[LogWeight]) -> Vec<f64> {
    row.iter().map(|w| w.0).collect()
}

fn wrap_rows(table: &[f64], width: usize) -> Vec<Vec<LogWeight>> {
    table
        .chunks(width)
        .map(|r| r.iter().copied().map(LogWeight).collect())
        .collect()
}

pub fn model_to_json(model: &ChainModel) -> String {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        states: model.states().labels().to_vec(),
        symbols: model.alphabet().labels().to_vec(),
        init_logw: model.init_table().iter().copied().map(LogWeight).collect(),
        trans_logw: wrap_rows(model.trans_table(), model.num_states()),
        emit_logw: wrap_rows(model.emit_table(), model.num_symbols()),
    };
    serde_json::to_string(&file).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<ChainModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("malformed model file: {e}")))?;
    if file.format_version != FORMAT_VERSION {
        return invalid(format!(
            "unsupported model format_version {} (expected {FORMAT_VERSION})",
            file.format_version
        ));
    }
    ChainModel::from_rows(
        Vocabulary::new(file.states)?,
        Vocabulary::new(file.symbols)?,
        unwrap_row(&file.init_logw),
        file.trans_logw.iter().map(|r| unwrap_row(r)).collect(),
        file.emit_logw.iter().map(|r| unwrap_row(r)).collect(),
    )
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_model(path: impl AsRef<Path>, model: &ChainModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model) + "\n").map_err(io_err(path))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ChainModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    model_from_json(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })
}

/// One dataset line, with labels as strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub obs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
}

/// A dataset line with only its observations; label fields are never parsed.
#[derive(Debug, Clone, Deserialize)]
struct ObservationRecord {
    obs: Vec<String>,
}

/// Reads a JSON Lines file, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Writes one JSON record per line.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("record serializes");
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn resolve_labels(labels: &[String], vocab: &Vocabulary, what: &str, n: usize) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            vocab
                .index_of(l)
                .ok_or_else(|| Error::InvalidArgument(format!("record {n}: unknown {what} label {l:?}")))
        })
        .collect()
}

/// Maps string records onto index sequences.
pub fn resolve_records(
    records: &[SequenceRecord],
    states: &StateSpace,
    alphabet: &ObservationAlphabet,
) -> Result<Vec<LabeledSequence>> {
    records
        .iter()
        .enumerate()
        .map(|(n, r)| {
            let obs = resolve_labels(&r.obs, alphabet, "observation", n)?;
            if obs.is_empty() {
                return invalid(format!("record {n} has no observations"));
            }
            match &r.states {
                None => Ok(LabeledSequence::unlabeled(obs)),
                Some(s) => LabeledSequence::labeled(obs, resolve_labels(s, states, "state", n)?),
            }
        })
        .collect()
}

pub fn to_records(
    data: &[LabeledSequence],
    states: &StateSpace,
    alphabet: &ObservationAlphabet,
) -> Result<Vec<SequenceRecord>> {
    let name = |v: &Vocabulary, i: usize| {
        v.label(i)
            .map(str::to_owned)
            .ok_or_else(|| Error::InvalidArgument(format!("index {i} has no label")))
    };
    data.iter()
        .map(|s| {
            Ok(SequenceRecord {
                obs: s.obs.iter().map(|&x| name(alphabet, x)).collect::<Result<_>>()?,
                states: s
                    .states
                    .as_ref()
                    .map(|ys| ys.iter().map(|&y| name(states, y)).collect::<Result<_>>())
                    .transpose()?,
            })
        })
        .collect()
}

pub fn read_dataset(
    path: impl AsRef<Path>,
    states: &StateSpace,
    alphabet: &ObservationAlphabet,
) -> Result<Vec<LabeledSequence>> {
    resolve_records(&read_jsonl(path)?, states, alphabet)
}

pub fn write_dataset(
    path: impl AsRef<Path>,
    data: &[LabeledSequence],
    states: &StateSpace,
    alphabet: &ObservationAlphabet,
) -> Result<()> {
    write_jsonl(path, &to_records(data, states, alphabet)?)
}

/// Reads only the observation field of each dataset line.
pub fn read_observations(path: impl AsRef<Path>, alphabet: &ObservationAlphabet) -> Result<Vec<Vec<usize>>> {
    let records: Vec<ObservationRecord> = read_jsonl(path)?;
    records
        .iter()
        .enumerate()
        .map(|(n, r)| {
            let obs = resolve_labels(&r.obs, alphabet, "observation", n)?;
            if obs.is_empty() {
                return invalid(format!("record {n} has no observations"));
            }
            Ok(obs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_infinity_is_a_string() {
        let model = ChainModel::from_rows(
            Vocabulary::new(["a", "b"]).unwrap(),
            Vocabulary::new(["x"]).unwrap(),
            vec![0.0, f64::NEG_INFINITY],
            vec![vec![-0.5, 1.25], vec![f64::NEG_INFINITY, 0.0]],
            vec![vec![0.0], vec![-3.0]],
        )
        .unwrap();
        let text = model_to_json(&model);
        assert!(text.contains("\"-inf\""));
        assert!(text.contains("\"format_version\":1"));
        assert_eq!(model_from_json(&text).unwrap(), model);
    }

    #[test]
    fn rejects_bad_model_files() {
        let ok = r#"{"format_version":1,"states":["a"],"symbols":["x"],"init_logw":[0],"trans_logw":[[0]],"emit_logw":[[0]]}"#;
        assert!(model_from_json(ok).is_ok());
        assert!(model_from_json(&ok.replace("\"format_version\":1", "\"format_version\":2")).is_err());
        assert!(model_from_json(&ok.replace("[[0]],\"emit", "[[\"inf\"]],\"emit")).is_err());
        assert!(model_from_json(&ok.replace("\"trans_logw\":[[0]]", "\"trans_logw\":[[0,1]]")).is_err());
    }

    #[test]
    fn dataset_labels_resolve_against_spaces() {
        let states = Vocabulary::new(["A", "B"]).unwrap();
        let alphabet = Vocabulary::new(["x", "y"]).unwrap();
        let rec = SequenceRecord {
            obs: vec!["y".into(), "x".into()],
            states: Some(vec!["B".into(), "A".into()]),
        };
        let seqs = resolve_records(std::slice::from_ref(&rec), &states, &alphabet).unwrap();
        assert_eq!(seqs[0].obs, vec![1, 0]);
        assert_eq!(to_records(&seqs, &states, &alphabet).unwrap(), vec![rec]);
        let bad = SequenceRecord {
            obs: vec!["z".into()],
            states: None,
        };
        let err = resolve_records(&[bad], &states, &alphabet).unwrap_err().to_string();
        assert!(err.contains("\"z\""), "{err}");
    }

    #[test]
    fn jsonl_round_trip_and_observation_only_reads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let states = Vocabulary::new(["A", "B"]).unwrap();
        let alphabet = Vocabulary::new(["x", "y"]).unwrap();
        let data = vec![
            LabeledSequence::labeled(vec![0, 1, 1], vec![0, 0, 1]).unwrap(),
            LabeledSequence::unlabeled(vec![1]),
        ];
        write_dataset(&path, &data, &states, &alphabet).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.lines().nth(1).unwrap().contains("states"));
        assert_eq!(read_dataset(&path, &states, &alphabet).unwrap(), data);
        assert_eq!(
            read_observations(&path, &alphabet).unwrap(),
            vec![vec![0, 1, 1], vec![1]]
        );
    }

    #[test]
    fn format_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        fs::write(&path, "{\"obs\":[\"x\"]}\n\n{\"obs\": 3}\n").unwrap();
        match read_jsonl::<SequenceRecord>(&path) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_model(dir.path().join("missing.json")),
            Err(Error::Io { .. })
        ));
    }
}
