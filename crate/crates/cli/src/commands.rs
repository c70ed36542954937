use std::fmt;
use std::fs;
use std::hint::black_box;
use std::io::ErrorKind;
use std::path::Path;
use std::time::Instant;

use compressed_inference::datagen::{robot_dataset, GridWorld, RobotConfig};
use compressed_inference::io::{self, SequenceRecord};
use compressed_inference::oracle::{oracle_compressed_decode, OracleBudget};
use compressed_inference::{
    baseline_compressed, compressed_decode, default_c_max, estimate_counts, evaluate, length_distribution, Baseline,
    ChainModel, Error, PairScore, Result, Vocabulary,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{sidecar_path, BenchArgs, EvaluateArgs, FitArgs, GenRobotArgs, InferArgs, Method};

fn not_found(path: &Path, what: &str) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(ErrorKind::NotFound, format!("{what} not found")),
    }
}

fn check_input(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(not_found(path, "input file"))
    }
}

fn check_output(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(not_found(dir, "output directory")),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("metadata serializes") + "\n";
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Sidecar written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub world_sha256: String,
    pub world: String,
    pub n: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub accuracy: f64,
    pub move_prob: f64,
    pub on_block: String,
    pub seed: u64,
    pub states: Vec<String>,
    pub symbols: Vec<String>,
}

pub fn cmd_gen_robot(args: &GenRobotArgs) -> Result<DatasetMeta> {
    let world = match &args.world {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            GridWorld::parse(&text)?
        }
        None => GridWorld::default_world(),
    };
    check_output(&args.out)?;
    let config = RobotConfig {
        accuracy: args.accuracy,
        move_prob: args.move_prob,
        on_block: args.on_block.into(),
    };
    let data = robot_dataset(&world, args.n, (args.min_len, args.max_len), &config, args.seed)?;
    let (states, symbols) = (world.state_space(), GridWorld::alphabet());
    io::write_dataset(&args.out, &data, &states, &symbols)?;
    let map = world.to_string();
    let meta = DatasetMeta {
        world_sha256: hex::encode(Sha256::digest(map.as_bytes())),
        world: map,
        n: args.n,
        min_len: args.min_len,
        max_len: args.max_len,
        accuracy: args.accuracy,
        move_prob: args.move_prob,
        on_block: format!("{:?}", args.on_block).to_lowercase(),
        seed: args.seed,
        states: states.labels().to_vec(),
        symbols: symbols.labels().to_vec(),
    };
    write_json(&sidecar_path(&args.out), &meta)?;
    Ok(meta)
}

#[derive(Debug, Deserialize)]
struct SpaceMeta {
    states: Vec<String>,
    symbols: Vec<String>,
}

/// Label spaces from the dataset's sidecar, or in order of first appearance.
fn label_spaces(data: &Path, records: &[SequenceRecord]) -> Result<(Vocabulary, Vocabulary)> {
    let meta = sidecar_path(data);
    if meta.is_file() {
        let text = fs::read_to_string(&meta).map_err(|source| Error::Io {
            path: meta.clone(),
            source,
        })?;
        let spaces: SpaceMeta = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: meta.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        return Ok((Vocabulary::new(spaces.states)?, Vocabulary::new(spaces.symbols)?));
    }
    let mut states: Vec<&String> = Vec::new();
    let mut symbols: Vec<&String> = Vec::new();
    for r in records {
        for s in r.states.iter().flatten() {
            if !states.contains(&s) {
                states.push(s);
            }
        }
        for x in &r.obs {
            if !symbols.contains(&x) {
                symbols.push(x);
            }
        }
    }
    Ok((Vocabulary::new(states)?, Vocabulary::new(symbols)?))
}

/// Entropy range over the rows of one table, in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyRange {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

fn row_entropies(table: &[f64], width: usize) -> EntropyRange {
    let rows: Vec<f64> = table
        .chunks(width)
        .map(|row| -row.iter().filter(|w| w.is_finite()).map(|&w| w.exp() * w).sum::<f64>())
        .collect();
    EntropyRange {
        min: rows.iter().copied().fold(f64::INFINITY, f64::min),
        mean: rows.iter().sum::<f64>() / rows.len() as f64,
        max: rows.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub num_states: usize,
    pub num_symbols: usize,
    pub init: EntropyRange,
    pub trans: EntropyRange,
    pub emit: EntropyRange,
    pub neg_inf_entries: usize,
}

impl fmt::Display for FitSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "M = {}, V = {}", self.num_states, self.num_symbols)?;
        writeln!(f, "row entropy (nats)     min    mean     max")?;
        for (name, e) in [("init", self.init), ("trans", self.trans), ("emit", self.emit)] {
            writeln!(f, "{name:<18} {:>7.3} {:>7.3} {:>7.3}", e.min, e.mean, e.max)?;
        }
        Ok(())
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<FitSummary> {
    check_input(&args.data)?;
    check_output(&args.out)?;
    let records: Vec<SequenceRecord> = io::read_jsonl(&args.data)?;
    if let Some(n) = records.iter().position(|r| r.states.is_none()) {
        return Err(Error::InvalidArgument(format!("sequence {n} has no state labels")));
    }
    let (states, symbols) = label_spaces(&args.data, &records)?;
    let data = io::resolve_records(&records, &states, &symbols)?;
    let model = estimate_counts(&data, &states, &symbols, args.smoothing)?;
    io::write_model(&args.out, &model)?;
    let (m, v) = (model.num_states(), model.num_symbols());
    Ok(FitSummary {
        num_states: m,
        num_symbols: v,
        init: row_entropies(model.init_table(), m),
        trans: row_entropies(model.trans_table(), m),
        emit: row_entropies(model.emit_table(), v),
        neg_inf_entries: [model.init_table(), model.trans_table(), model.emit_table()]
            .iter()
            .flat_map(|t| t.iter())
            .filter(|w| **w == f64::NEG_INFINITY)
            .count(),
    })
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub seq: usize,
    pub method: String,
    pub prediction: Vec<String>,
    /// Decoded length; compressed and oracle methods only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_hat: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Timing {
    seq: usize,
    method: &'static str,
    micros: u128,
}

#[derive(Debug, Serialize)]
struct InferMeta<'a> {
    seed: u64,
    methods: Vec<&'static str>,
    cmax: Option<usize>,
    norm: String,
    timings: &'a [Timing],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferSummary {
    pub records: usize,
    pub adjacent_duplicates: usize,
}

fn decode(model: &ChainModel, obs: &[usize], method: Method, args: &InferArgs) -> Result<(Vec<usize>, Option<usize>)> {
    let c_max = match args.cmax {
        Some(0) => return Err(Error::InvalidArgument("--cmax must be at least 1".into())),
        Some(c) => c.min(obs.len()),
        None => default_c_max(obs.len()),
    };
    Ok(match method {
        Method::Viterbi => (baseline_compressed(model, obs, Baseline::Joint)?.into_inner(), None),
        Method::Marginal => (baseline_compressed(model, obs, Baseline::Marginal)?.into_inner(), None),
        Method::Compressed => {
            let d = compressed_decode(model, obs, c_max, args.norm.into())?;
            (d.states, Some(d.c_hat))
        }
        Method::Oracle => {
            let budget = OracleBudget {
                max_enumerations: args.oracle_budget,
            };
            let (states, c_hat) = oracle_compressed_decode(model, obs, c_max, budget)?;
            (states, Some(c_hat))
        }
    })
}

pub fn cmd_infer(args: &InferArgs) -> Result<InferSummary> {
    check_input(&args.model)?;
    check_input(&args.data)?;
    check_output(&args.out)?;
    let model = io::read_model(&args.model)?;
    let observations = io::read_observations(&args.data, model.alphabet())?;
    let mut methods = args.method.clone();
    methods.dedup();
    let mut records = Vec::with_capacity(observations.len() * methods.len());
    let mut timings = Vec::with_capacity(records.capacity());
    for (seq, obs) in observations.iter().enumerate() {
        for &method in &methods {
            let start = Instant::now();
            let (states, c_hat) = decode(&model, obs, method, args)?;
            timings.push(Timing {
                seq,
                method: method.name(),
                micros: start.elapsed().as_micros(),
            });
            let prediction = states
                .iter()
                .map(|&s| model.states().label(s).expect("decoded state in range").to_owned())
                .collect();
            records.push(PredictionRecord {
                seq,
                method: method.name().to_owned(),
                prediction,
                c_hat,
            });
        }
    }
    io::write_jsonl(&args.out, &records)?;
    let meta = InferMeta {
        seed: args.seed,
        methods: methods.iter().map(|m| m.name()).collect(),
        cmax: args.cmax,
        norm: format!("{:?}", args.norm).to_lowercase(),
        timings: &timings,
    };
    write_json(&sidecar_path(&args.out), &meta)?;
    Ok(InferSummary {
        records: records.len(),
        adjacent_duplicates: records
            .iter()
            .filter(|r| has_adjacent_duplicates(&r.prediction))
            .count(),
    })
}

fn has_adjacent_duplicates(labels: &[String]) -> bool {
    labels.windows(2).any(|w| w[0] == w[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Predictions with two equal neighbors.
    pub adjacent_duplicates: usize,
}

/// One line of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub sequences: usize,
    pub exact_score: f64,
    pub eds: f64,
    pub per_sequence: Vec<PairScore>,
    pub diagnostics: Diagnostics,
    pub seed: u64,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<Vec<MethodReport>> {
    check_input(&args.predictions)?;
    check_input(&args.data)?;
    check_output(&args.out)?;
    let truths = io::read_jsonl::<SequenceRecord>(&args.data)?
        .into_iter()
        .enumerate()
        .map(|(n, r)| {
            let mut s = r
                .states
                .ok_or_else(|| Error::InvalidArgument(format!("sequence {n} has no state labels")))?;
            s.dedup();
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let predictions: Vec<PredictionRecord> = io::read_jsonl(&args.predictions)?;

    let mut methods: Vec<&str> = Vec::new();
    for p in &predictions {
        if !methods.contains(&p.method.as_str()) {
            methods.push(&p.method);
        }
    }
    let mut reports = Vec::with_capacity(methods.len());
    for method in methods {
        let mut preds: Vec<Option<&Vec<String>>> = vec![None; truths.len()];
        for p in predictions.iter().filter(|p| p.method == method) {
            match preds.get_mut(p.seq) {
                Some(slot @ None) => *slot = Some(&p.prediction),
                Some(Some(_)) => {
                    return Err(Error::InvalidArgument(format!(
                        "method {method} predicts sequence {} twice",
                        p.seq
                    )))
                }
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "method {method} predicts sequence {} but the dataset has {}",
                        p.seq,
                        truths.len()
                    )))
                }
            }
        }
        let preds = preds
            .into_iter()
            .enumerate()
            .map(|(n, p)| {
                p.cloned().ok_or_else(|| {
                    Error::InvalidArgument(format!("method {method} has no prediction for sequence {n}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let report = evaluate(&preds, &truths)?;
        reports.push(MethodReport {
            method: method.to_owned(),
            sequences: truths.len(),
            exact_score: report.exact_score,
            eds: report.eds,
            per_sequence: report.per_sequence,
            diagnostics: Diagnostics {
                adjacent_duplicates: preds.iter().filter(|p| has_adjacent_duplicates(p)).count(),
            },
            seed: args.seed,
        });
    }
    io::write_jsonl(&args.out, &reports)?;
    Ok(reports)
}

pub(crate) fn report_table(reports: &[MethodReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.method.len())
        .max()
        .unwrap_or(0)
        .max("method".len());
    let mut out = format!(
        "{:<width$} {:>6} {:>8} {:>8} {:>8}\n",
        "method", "n", "exact", "eds", "adj-dup"
    );
    for r in reports {
        out += &format!(
            "{:<width$} {:>6} {:>8.2} {:>8.2} {:>8}\n",
            r.method, r.sequences, r.exact_score, r.eds, r.diagnostics.adjacent_duplicates
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub c_max: usize,
    /// Median over repetitions of one pass over the whole dataset.
    pub median_seconds: f64,
    pub seconds_per_cmax: f64,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    check_input(&args.model)?;
    check_input(&args.data)?;
    if let Some(out) = &args.out {
        check_output(out)?;
    }
    if args.cmax.is_empty() || args.reps == 0 {
        return Err(Error::InvalidArgument(
            "need at least one c_max value and one repetition".into(),
        ));
    }
    let model = io::read_model(&args.model)?;
    let observations = io::read_observations(&args.data, model.alphabet())?;
    let shortest = observations
        .iter()
        .map(Vec::len)
        .min()
        .ok_or_else(|| Error::InvalidArgument("benchmark dataset is empty".into()))?;
    if let Some(&c) = args.cmax.iter().find(|&&c| c == 0 || c > shortest) {
        return Err(Error::InvalidArgument(format!(
            "c_max {c} outside 1..={shortest} (shortest sequence)"
        )));
    }
    let norm = args.norm.into();
    let pass = |c_max: usize| -> Result<f64> {
        let start = Instant::now();
        for obs in &observations {
            black_box(length_distribution(&model, obs, c_max, norm)?);
        }
        Ok(start.elapsed().as_secs_f64())
    };
    pass(args.cmax[0])?;
    let mut rows = Vec::with_capacity(args.cmax.len());
    for &c_max in &args.cmax {
        let mut times = (0..args.reps).map(|_| pass(c_max)).collect::<Result<Vec<_>>>()?;
        times.sort_by(f64::total_cmp);
        let median = times[times.len() / 2];
        rows.push(BenchRow {
            c_max,
            median_seconds: median,
            seconds_per_cmax: median / c_max as f64,
        });
    }
    if let Some(out) = &args.out {
        io::write_jsonl(out, &rows)?;
    }
    Ok(rows)
}

pub(crate) fn bench_table(rows: &[BenchRow]) -> String {
    let mut out = format!("{:>6} {:>12} {:>14}\n", "c_max", "median ms", "ms per c_max");
    for r in rows {
        out += &format!(
            "{:>6} {:>12.3} {:>14.4}\n",
            r.c_max,
            r.median_seconds * 1e3,
            r.seconds_per_cmax * 1e3
        );
    }
    out
}
