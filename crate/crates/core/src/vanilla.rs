//! Standard chain decoders: Viterbi, forward–backward, and the constrained
//! forward pass, plus their run-collapsed outputs used as baselines.
//!
//! Time indices are 0-based throughout.

use crate::error::{invalid, Result};
use crate::logspace::{argmax, log_sum_exp};
use crate::model::{compress, ChainModel, CompressedSequence};

/// Forward and backward log-variables with the log partition value.
#[derive(Debug, Clone)]
pub struct ForwardBackward {
    /// `log_alpha[t][j]`: log-sum of prefix scores ending in `j` at `t`.
    pub log_alpha: Vec<Vec<f64>>,
    /// `log_beta[t][j]`: log-sum of suffix scores after `t` given `j` at `t`.
    pub log_beta: Vec<Vec<f64>>,
    pub log_z: f64,
}

impl ForwardBackward {
    /// `p(y_t = j | x)` for every `t`, `j`.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        self.log_alpha
            .iter()
            .zip(&self.log_beta)
            .map(|(a, b)| a.iter().zip(b).map(|(a, b)| (a + b - self.log_z).exp()).collect())
            .collect()
    }
}

/// Most likely labeling and its unnormalized log-score.
///
/// Ties resolve to the lowest state index, both in the final argmax and at
/// every backpointer.
pub fn viterbi(model: &ChainModel, obs: &[usize]) -> Result<(Vec<usize>, f64)> {
    model.check_obs(obs)?;
    let m = model.num_states();
    let t_len = obs.len();
    let mut delta: Vec<f64> = (0..m).map(|j| model.init(j) + model.emit(j, obs[0])).collect();
    let mut back = vec![0usize; t_len * m];
    let mut next = vec![0.0; m];
    for t in 1..t_len {
        for j in 0..m {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (i, &d) in delta.iter().enumerate() {
                let s = d + model.trans(i, j);
                if s > best {
                    best = s;
                    arg = i;
                }
            }
            next[j] = best + model.emit(j, obs[t]);
            back[t * m + j] = arg;
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let last = argmax(&delta).unwrap_or(0);
    let score = delta[last];
    let mut path = vec![last; t_len];
    for t in (1..t_len).rev() {
        path[t - 1] = back[t * m + path[t]];
    }
    Ok((path, score))
}

pub fn forward_backward(model: &ChainModel, obs: &[usize]) -> Result<ForwardBackward> {
    model.check_obs(obs)?;
    let m = model.num_states();
    let t_len = obs.len();
    let mut log_alpha = Vec::with_capacity(t_len);
    log_alpha.push(
        (0..m)
            .map(|j| model.init(j) + model.emit(j, obs[0]))
            .collect::<Vec<_>>(),
    );
    for t in 1..t_len {
        let prev = &log_alpha[t - 1];
        let row = (0..m)
            .map(|j| log_sum_exp((0..m).map(|i| prev[i] + model.trans(i, j))) + model.emit(j, obs[t]))
            .collect();
        log_alpha.push(row);
    }
    let mut log_beta = vec![vec![0.0; m]; t_len];
    for t in (0..t_len - 1).rev() {
        let (head, tail) = log_beta.split_at_mut(t + 1);
        let next = &tail[0];
        for (i, b) in head[t].iter_mut().enumerate() {
            *b = log_sum_exp((0..m).map(|j| model.trans(i, j) + model.emit(j, obs[t + 1]) + next[j]));
        }
    }
    let log_z = log_sum_exp(log_alpha[t_len - 1].iter().copied());
    Ok(ForwardBackward {
        log_alpha,
        log_beta,
        log_z,
    })
}

/// `T×M` table of `p(y_t = j | x)`.
pub fn posterior_marginals(model: &ChainModel, obs: &[usize]) -> Result<Vec<Vec<f64>>> {
    Ok(forward_backward(model, obs)?.marginals())
}

/// Per-position argmax of the posterior marginals, ties to the lowest index.
pub fn marginal_decode(model: &ChainModel, obs: &[usize]) -> Result<Vec<usize>> {
    let marginals = posterior_marginals(model, obs)?;
    Ok(decode_rows(&marginals))
}

pub(crate) fn decode_rows(rows: &[Vec<f64>]) -> Vec<usize> {
    rows.iter().map(|r| argmax(r).unwrap_or(0)).collect()
}

/// Required states at selected times, with strictly increasing times.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintList(Vec<(usize, usize)>);

impl ConstraintList {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 >= w[1].0) {
            return invalid(format!(
                "constraint times must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            ));
        }
        Ok(Self(pairs))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

/// Log of the summed score of every labeling that agrees with all
/// constraints: a forward pass where, at a constrained time, every cell but
/// the required state is zeroed.
pub fn constrained_log_z(model: &ChainModel, obs: &[usize], constraints: &ConstraintList) -> Result<f64> {
    model.check_obs(obs)?;
    let m = model.num_states();
    let t_len = obs.len();
    let mut required = vec![None; t_len];
    for &(t, j) in constraints.pairs() {
        if t >= t_len {
            return invalid(format!("constraint time {t} out of range (T = {t_len})"));
        }
        if j >= m {
            return invalid(format!("constraint state {j} out of range (M = {m})"));
        }
        required[t] = Some(j);
    }
    let conforms = |t: usize, j: usize| required[t].is_none_or(|r| r == j);
    let mut alpha: Vec<f64> = (0..m)
        .map(|j| {
            if conforms(0, j) {
                model.init(j) + model.emit(j, obs[0])
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    for (t, &x) in obs.iter().enumerate().skip(1) {
        alpha = (0..m)
            .map(|j| {
                if conforms(t, j) {
                    log_sum_exp((0..m).map(|i| alpha[i] + model.trans(i, j))) + model.emit(j, x)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
    }
    Ok(log_sum_exp(alpha))
}

/// Which vanilla decoder feeds the run-collapsing baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Viterbi (joint MAP) labeling.
    Joint,
    /// Per-position posterior argmax.
    Marginal,
}

pub fn baseline_compressed(model: &ChainModel, obs: &[usize], method: Baseline) -> Result<CompressedSequence> {
    let states = match method {
        Baseline::Joint => viterbi(model, obs)?.0,
        Baseline::Marginal => marginal_decode(model, obs)?,
    };
    compress(&states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Vocabulary;

    fn small_model() -> ChainModel {
        ChainModel::from_rows(
            Vocabulary::numbered("s", 2).unwrap(),
            Vocabulary::numbered("o", 2).unwrap(),
            vec![0.3, -0.2],
            vec![vec![0.5, -1.0], vec![-0.7, 0.2]],
            vec![vec![1.0, -0.5], vec![-0.3, 0.8]],
        )
        .unwrap()
    }

    #[test]
    fn single_state_viterbi_is_constant() {
        let model = ChainModel::uniform(1, 3).unwrap();
        let (path, _) = viterbi(&model, &[2, 0, 1, 1]).unwrap();
        assert_eq!(path, vec![0; 4]);
    }

    #[test]
    fn uniform_viterbi_breaks_ties_low() {
        let model = ChainModel::uniform(2, 1).unwrap();
        let (path, score) = viterbi(&model, &[0, 0, 0]).unwrap();
        assert_eq!(path, vec![0, 0, 0]);
        assert_eq!(score, 0.0);
    }

    #[test]
    fn uniform_partition_is_m_to_the_t() {
        let model = ChainModel::uniform(2, 1).unwrap();
        let fb = forward_backward(&model, &[0, 0, 0]).unwrap();
        assert!((fb.log_z - 8f64.ln()).abs() < 1e-15);
        for row in fb.marginals() {
            for p in row {
                assert!((p - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_step_partition() {
        let model = small_model();
        let fb = forward_backward(&model, &[1]).unwrap();
        let want = log_sum_exp([0.3 - 0.5, -0.2 + 0.8]);
        assert!((fb.log_z - want).abs() < 1e-15);
    }

    #[test]
    fn viterbi_score_matches_path_score() {
        let model = small_model();
        let obs = [0, 1, 1, 0, 1];
        let (path, score) = viterbi(&model, &obs).unwrap();
        assert!((model.path_log_score(&obs, &path).unwrap() - score).abs() < 1e-12);
    }

    #[test]
    fn row_argmax_decode() {
        assert_eq!(decode_rows(&[vec![0.9, 0.1], vec![0.4, 0.6]]), vec![0, 1]);
    }

    #[test]
    fn out_of_range_observation_is_rejected() {
        let model = small_model();
        assert!(viterbi(&model, &[0, 2]).is_err());
        assert!(forward_backward(&model, &[]).is_err());
    }

    #[test]
    fn empty_constraints_give_the_partition() {
        let model = small_model();
        let obs = [0, 1, 1, 0];
        let z = forward_backward(&model, &obs).unwrap().log_z;
        let zc = constrained_log_z(&model, &obs, &ConstraintList::empty()).unwrap();
        assert!((z - zc).abs() < 1e-12);
    }

    #[test]
    fn full_constraints_give_the_path_score() {
        let model = small_model();
        let obs = [0, 1, 1, 0];
        let y = [1, 0, 0, 1];
        let c = ConstraintList::new(y.iter().copied().enumerate().collect()).unwrap();
        let zc = constrained_log_z(&model, &obs, &c).unwrap();
        assert!((zc - model.path_log_score(&obs, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn constraint_validation() {
        assert!(ConstraintList::new(vec![(2, 0), (2, 1)]).is_err());
        assert!(ConstraintList::new(vec![(3, 0), (1, 1)]).is_err());
        let model = small_model();
        let c = ConstraintList::new(vec![(4, 0)]).unwrap();
        assert!(constrained_log_z(&model, &[0, 1], &c).is_err());
    }

    #[test]
    fn baseline_collapses_the_decoder_output() {
        let model = ChainModel::uniform(1, 1).unwrap();
        let s = baseline_compressed(&model, &[0, 0, 0], Baseline::Marginal).unwrap();
        assert_eq!(s.entries(), &[0]);
    }
}
