//! Chain model, sequences, and the run-collapsing `compress` map.

use std::collections::HashMap;

use crate::error::{invalid, Result};

/// An ordered list of distinct labels with a label ↔ index bijection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

/// The hidden states of a chain model.
pub type StateSpace = Vocabulary;
/// The observation symbols of a chain model.
pub type ObservationAlphabet = Vocabulary;

impl Vocabulary {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return invalid("a vocabulary needs at least one label");
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return invalid(format!("duplicate label {l:?}"));
            }
        }
        Ok(Self { labels, index })
    }

    /// Labels `"{prefix}0"`, `"{prefix}1"`, ... .
    pub fn numbered(prefix: &str, n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| format!("{prefix}{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.get(i).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// Context of the factor at time `t`: the previous state, or the start of
/// the sequence for `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prev {
    Start,
    State(usize),
}

/// A linear-chain model with tabular log-potentials.
///
/// The factor at time `t` is
/// `ln Ψ(y_t, y_{t-1}, x_t) = trans[y_{t-1}][y_t] + emit[y_t][x_t]`, with
/// `init[y_0]` standing in for the transition term at `t = 0`. Weights need
/// not be normalized; `-inf` marks a forbidden entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    states: StateSpace,
    alphabet: ObservationAlphabet,
    init: Vec<f64>,
    trans: Vec<f64>,
    emit: Vec<f64>,
}

fn check_weights(name: &str, w: &[f64]) -> Result<()> {
    for (i, &v) in w.iter().enumerate() {
        if v.is_nan() || v == f64::INFINITY {
            return invalid(format!("{name}[{i}] = {v} is not a log-weight"));
        }
    }
    Ok(())
}

impl ChainModel {
    /// Builds a model from row-major tables: `trans` is `M×M` with the
    /// previous state as row, `emit` is `M×V`.
    pub fn new(
        states: StateSpace,
        alphabet: ObservationAlphabet,
        init: Vec<f64>,
        trans: Vec<f64>,
        emit: Vec<f64>,
    ) -> Result<Self> {
        let (m, v) = (states.len(), alphabet.len());
        if init.len() != m {
            return invalid(format!("init has {} entries, expected {m}", init.len()));
        }
        if trans.len() != m * m {
            return invalid(format!("trans has {} entries, expected {m}×{m}", trans.len()));
        }
        if emit.len() != m * v {
            return invalid(format!("emit has {} entries, expected {m}×{v}", emit.len()));
        }
        check_weights("init", &init)?;
        check_weights("trans", &trans)?;
        check_weights("emit", &emit)?;
        Ok(Self {
            states,
            alphabet,
            init,
            trans,
            emit,
        })
    }

    /// Builds a model from nested rows.
    pub fn from_rows(
        states: StateSpace,
        alphabet: ObservationAlphabet,
        init: Vec<f64>,
        trans: Vec<Vec<f64>>,
        emit: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let (m, v) = (states.len(), alphabet.len());
        if trans.len() != m || trans.iter().any(|r| r.len() != m) {
            return invalid(format!("trans must be {m}×{m}"));
        }
        if emit.len() != m || emit.iter().any(|r| r.len() != v) {
            return invalid(format!("emit must be {m}×{v}"));
        }
        Self::new(states, alphabet, init, trans.concat(), emit.concat())
    }

    /// Every weight zero, i.e. every potential equal to one.
    pub fn uniform(m: usize, v: usize) -> Result<Self> {
        Self::new(
            Vocabulary::numbered("s", m)?,
            Vocabulary::numbered("o", v)?,
            vec![0.0; m],
            vec![0.0; m * m],
            vec![0.0; m * v],
        )
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_symbols(&self) -> usize {
        self.alphabet.len()
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn alphabet(&self) -> &ObservationAlphabet {
        &self.alphabet
    }

    #[inline]
    pub fn init(&self, j: usize) -> f64 {
        self.init[j]
    }

    #[inline]
    pub fn trans(&self, i: usize, j: usize) -> f64 {
        self.trans[i * self.states.len() + j]
    }

    #[inline]
    pub fn emit(&self, j: usize, x: usize) -> f64 {
        self.emit[j * self.alphabet.len() + x]
    }

    pub fn init_table(&self) -> &[f64] {
        &self.init
    }

    /// Row-major `M×M`.
    pub fn trans_table(&self) -> &[f64] {
        &self.trans
    }

    /// Row-major `M×V`.
    pub fn emit_table(&self) -> &[f64] {
        &self.emit
    }

    /// `ln Ψ(y_t = j, y_{t-1} = prev, x_t = x)` with 0-based `t`.
    ///
    /// `Prev::Start` is required at `t = 0` and rejected afterwards.
    pub fn log_potential(&self, t: usize, j: usize, prev: Prev, x: usize) -> Result<f64> {
        let m = self.num_states();
        if j >= m {
            return invalid(format!("state {j} out of range (M = {m})"));
        }
        if x >= self.num_symbols() {
            return invalid(format!("observation {x} out of range (V = {})", self.num_symbols()));
        }
        match (t, prev) {
            (0, Prev::Start) => Ok(self.init(j) + self.emit(j, x)),
            (0, Prev::State(_)) => invalid("t = 0 has no previous state; use Prev::Start"),
            (_, Prev::Start) => invalid(format!("Prev::Start is only valid at t = 0, got t = {t}")),
            (_, Prev::State(i)) if i >= m => invalid(format!("state {i} out of range (M = {m})")),
            (_, Prev::State(i)) => Ok(self.trans(i, j) + self.emit(j, x)),
        }
    }

    /// Checks that every observation index is in range.
    pub fn check_obs(&self, obs: &[usize]) -> Result<()> {
        if obs.is_empty() {
            return invalid("observation sequence is empty");
        }
        let v = self.num_symbols();
        if let Some((t, &x)) = obs.iter().enumerate().find(|(_, &x)| x >= v) {
            return invalid(format!("observation {x} at t = {t} out of range (V = {v})"));
        }
        Ok(())
    }

    /// Unnormalized log-score `Σ_t ln Ψ(y_t, y_{t-1}, x_t)` of one labeling.
    pub fn path_log_score(&self, obs: &[usize], states: &[usize]) -> Result<f64> {
        self.check_obs(obs)?;
        if states.len() != obs.len() {
            return invalid(format!("{} states for {} observations", states.len(), obs.len()));
        }
        let mut score = 0.0;
        let mut prev = Prev::Start;
        for (t, (&x, &y)) in obs.iter().zip(states).enumerate() {
            score += self.log_potential(t, y, prev, x)?;
            prev = Prev::State(y);
        }
        Ok(score)
    }

    /// The same model with state `k` renamed to `perm[k]`.
    pub fn permute_states(&self, perm: &[usize]) -> Result<Self> {
        let m = self.num_states();
        let v = self.num_symbols();
        let mut seen = vec![false; m];
        if perm.len() != m || perm.iter().any(|&p| p >= m || std::mem::replace(&mut seen[p], true)) {
            return invalid("not a permutation of the state indices");
        }
        let mut labels = vec![String::new(); m];
        let mut init = vec![0.0; m];
        let mut trans = vec![0.0; m * m];
        let mut emit = vec![0.0; m * v];
        for k in 0..m {
            labels[perm[k]] = self.states.labels[k].clone();
            init[perm[k]] = self.init(k);
            for l in 0..m {
                trans[perm[k] * m + perm[l]] = self.trans(k, l);
            }
            for x in 0..v {
                emit[perm[k] * v + x] = self.emit(k, x);
            }
        }
        Self::new(Vocabulary::new(labels)?, self.alphabet.clone(), init, trans, emit)
    }
}

/// Observations with an optional state labeling of the same length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledSequence {
    pub obs: Vec<usize>,
    pub states: Option<Vec<usize>>,
}

impl LabeledSequence {
    pub fn unlabeled(obs: Vec<usize>) -> Self {
        Self { obs, states: None }
    }

    pub fn labeled(obs: Vec<usize>, states: Vec<usize>) -> Result<Self> {
        if obs.len() != states.len() {
            return invalid(format!("{} states for {} observations", states.len(), obs.len()));
        }
        Ok(Self {
            obs,
            states: Some(states),
        })
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    /// Checks index ranges against a model's spaces.
    pub fn validate(&self, model: &ChainModel) -> Result<()> {
        model.check_obs(&self.obs)?;
        if let Some(states) = &self.states {
            if states.len() != self.obs.len() {
                return invalid("state and observation lengths differ");
            }
            let m = model.num_states();
            if let Some(&y) = states.iter().find(|&&y| y >= m) {
                return invalid(format!("state {y} out of range (M = {m})"));
            }
        }
        Ok(())
    }
}

/// Unnormalized log-score of a labeled sequence under `model`.
pub fn sequence_log_score(model: &ChainModel, seq: &LabeledSequence) -> Result<f64> {
    match &seq.states {
        Some(states) => model.path_log_score(&seq.obs, states),
        None => invalid("sequence has no state labels"),
    }
}

/// A state string with no two equal adjacent entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompressedSequence(Vec<usize>);

impl CompressedSequence {
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        if entries.is_empty() {
            return invalid("a compressed sequence has at least one entry");
        }
        if let Some(w) = entries.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("adjacent duplicate state {} in compressed sequence", w[0]));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl AsRef<[usize]> for CompressedSequence {
    fn as_ref(&self) -> &[usize] {
        &self.0
    }
}

/// Collapses every maximal run of equal adjacent states to a single entry.
pub fn compress(states: &[usize]) -> Result<CompressedSequence> {
    if states.is_empty() {
        return invalid("cannot compress an empty state sequence");
    }
    let mut out = states.to_vec();
    out.dedup();
    Ok(CompressedSequence(out))
}

/// Count-based estimate of the model tables with additive smoothing.
///
/// Every table row is `ln((count + smoothing) / (row total + smoothing · width))`.
/// With `smoothing = 0` an unseen event gets `-inf`; a row with no
/// observations at all falls back to uniform.
pub fn estimate_counts(
    dataset: &[LabeledSequence],
    states: &StateSpace,
    alphabet: &ObservationAlphabet,
    smoothing: f64,
) -> Result<ChainModel> {
    if dataset.is_empty() {
        return invalid("cannot estimate a model from an empty dataset");
    }
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return invalid(format!(
            "smoothing must be a finite nonnegative number, got {smoothing}"
        ));
    }
    let (m, v) = (states.len(), alphabet.len());
    let mut init = vec![0.0; m];
    let mut trans = vec![0.0; m * m];
    let mut emit = vec![0.0; m * v];
    for (n, seq) in dataset.iter().enumerate() {
        let ys = seq
            .states
            .as_ref()
            .ok_or_else(|| crate::Error::InvalidArgument(format!("sequence {n} is unlabeled")))?;
        if seq.obs.is_empty() || ys.len() != seq.obs.len() {
            return invalid(format!("sequence {n} is empty or has mismatched lengths"));
        }
        for (&y, &x) in ys.iter().zip(&seq.obs) {
            if y >= m || x >= v {
                return invalid(format!("sequence {n} has an index out of range"));
            }
            emit[y * v + x] += 1.0;
        }
        init[ys[0]] += 1.0;
        for w in ys.windows(2) {
            trans[w[0] * m + w[1]] += 1.0;
        }
    }
    let normalize = |row: &mut [f64]| {
        let total: f64 = row.iter().sum::<f64>() + smoothing * row.len() as f64;
        if total == 0.0 {
            let u = -(row.len() as f64).ln();
            row.fill(u);
            return;
        }
        for c in row.iter_mut() {
            *c = ((*c + smoothing) / total).ln();
        }
    };
    normalize(&mut init);
    trans.chunks_mut(m).for_each(normalize);
    emit.chunks_mut(v).for_each(normalize);
    ChainModel::new(states.clone(), alphabet.clone(), init, trans, emit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln(x: f64) -> f64 {
        x.ln()
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_empty() {
        assert!(Vocabulary::new(["a", "b", "a"]).is_err());
        assert!(Vocabulary::new(Vec::<String>::new()).is_err());
        let v = Vocabulary::new(["a", "b"]).unwrap();
        assert_eq!(v.index_of("b"), Some(1));
        assert_eq!(v.label(0), Some("a"));
    }

    #[test]
    fn uniform_potential_is_zero() {
        let model = ChainModel::uniform(3, 2).unwrap();
        assert_eq!(model.log_potential(0, 2, Prev::Start, 1).unwrap(), 0.0);
        assert_eq!(model.log_potential(4, 0, Prev::State(1), 0).unwrap(), 0.0);
    }

    #[test]
    fn log_potential_is_additive() {
        let mut trans = vec![0.0; 4];
        trans[1] = ln(2.0);
        let mut emit = vec![0.0; 4];
        emit[2] = ln(3.0);
        let model = ChainModel::new(
            Vocabulary::numbered("s", 2).unwrap(),
            Vocabulary::numbered("o", 2).unwrap(),
            vec![0.0; 2],
            trans,
            emit,
        )
        .unwrap();
        let got = model.log_potential(1, 1, Prev::State(0), 0).unwrap();
        assert!((got - ln(6.0)).abs() < 1e-15);
    }

    #[test]
    fn log_potential_rejects_bad_context() {
        let model = ChainModel::uniform(2, 2).unwrap();
        assert!(model.log_potential(1, 0, Prev::Start, 0).is_err());
        assert!(model.log_potential(0, 0, Prev::State(0), 0).is_err());
        assert!(model.log_potential(1, 2, Prev::State(0), 0).is_err());
        assert!(model.log_potential(1, 0, Prev::State(5), 0).is_err());
        assert!(model.log_potential(1, 0, Prev::State(0), 2).is_err());
    }

    #[test]
    fn model_rejects_nan_and_positive_infinity() {
        let s = Vocabulary::numbered("s", 1).unwrap();
        let o = Vocabulary::numbered("o", 1).unwrap();
        assert!(ChainModel::new(s.clone(), o.clone(), vec![f64::NAN], vec![0.0], vec![0.0]).is_err());
        assert!(ChainModel::new(s.clone(), o.clone(), vec![0.0], vec![f64::INFINITY], vec![0.0]).is_err());
        assert!(ChainModel::new(s, o, vec![0.0], vec![f64::NEG_INFINITY], vec![0.0]).is_ok());
    }

    #[test]
    fn single_step_score_is_the_start_factor() {
        let model = ChainModel::from_rows(
            Vocabulary::numbered("s", 2).unwrap(),
            Vocabulary::numbered("o", 1).unwrap(),
            vec![0.25, -1.0],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![vec![0.5], vec![2.0]],
        )
        .unwrap();
        let seq = LabeledSequence::labeled(vec![0], vec![1]).unwrap();
        assert_eq!(sequence_log_score(&model, &seq).unwrap(), 1.0);
        assert!(sequence_log_score(&model, &LabeledSequence::unlabeled(vec![0])).is_err());
    }

    #[test]
    fn compress_examples() {
        // s, j, w, r
        let y = [0, 0, 1, 1, 1, 2, 2, 3, 3];
        assert_eq!(compress(&y).unwrap().entries(), &[0, 1, 2, 3]);
        let y2 = [0, 0, 1, 1, 2, 1, 2, 3, 3];
        assert_eq!(compress(&y2).unwrap().entries(), &[0, 1, 2, 1, 2, 3]);
        assert_eq!(compress(&[7]).unwrap().entries(), &[7]);
        assert!(compress(&[]).is_err());
    }

    #[test]
    fn compressed_sequence_rejects_adjacent_duplicates() {
        assert!(CompressedSequence::new(vec![0, 1, 1]).is_err());
        assert!(CompressedSequence::new(vec![]).is_err());
        assert!(CompressedSequence::new(vec![0, 1, 0]).is_ok());
    }

    #[test]
    fn counting_without_smoothing_gives_ratios() {
        let states = Vocabulary::new(["A", "B"]).unwrap();
        let alphabet = Vocabulary::new(["x"]).unwrap();
        let data = [LabeledSequence::labeled(vec![0, 0, 0], vec![0, 0, 1]).unwrap()];
        let model = estimate_counts(&data, &states, &alphabet, 0.0).unwrap();
        assert!((model.trans(0, 0).exp() - 0.5).abs() < 1e-15);
        assert!((model.trans(0, 1).exp() - 0.5).abs() < 1e-15);
        assert_eq!(model.init(1), f64::NEG_INFINITY);
    }

    #[test]
    fn add_one_smoothing_on_an_unseen_row_is_uniform() {
        let states = Vocabulary::new(["A", "B"]).unwrap();
        let alphabet = Vocabulary::new(["x"]).unwrap();
        let data = [LabeledSequence::labeled(vec![0, 0, 0], vec![0, 0, 1]).unwrap()];
        let model = estimate_counts(&data, &states, &alphabet, 1.0).unwrap();
        assert!((model.trans(1, 0).exp() - 0.5).abs() < 1e-15);
        assert!((model.trans(1, 1).exp() - 0.5).abs() < 1e-15);
        for &w in model
            .trans_table()
            .iter()
            .chain(model.emit_table())
            .chain(model.init_table())
        {
            assert!(w.is_finite());
        }
    }

    #[test]
    fn estimate_counts_errors() {
        let states = Vocabulary::new(["A"]).unwrap();
        let alphabet = Vocabulary::new(["x"]).unwrap();
        assert!(estimate_counts(&[], &states, &alphabet, 1.0).is_err());
        let unlabeled = [LabeledSequence::unlabeled(vec![0])];
        assert!(estimate_counts(&unlabeled, &states, &alphabet, 1.0).is_err());
    }

    #[test]
    fn permutation_moves_every_table() {
        let model = ChainModel::from_rows(
            Vocabulary::new(["a", "b"]).unwrap(),
            Vocabulary::numbered("o", 1).unwrap(),
            vec![0.1, 0.2],
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![vec![5.0], vec![6.0]],
        )
        .unwrap();
        let p = model.permute_states(&[1, 0]).unwrap();
        assert_eq!(p.init_table(), &[0.2, 0.1]);
        assert_eq!(p.trans_table(), &[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(p.emit_table(), &[6.0, 5.0]);
        assert_eq!(p.states().labels(), &["b", "a"]);
        assert!(model.permute_states(&[0, 0]).is_err());
    }
}
