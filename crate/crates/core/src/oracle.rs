//! Brute-force reference: enumerate all `M^T` labelings.
//!
//! Every compressed quantity is obtained by scoring each labeling, grouping
//! by `compress(y)`, and summing. Only usable on tiny instances; the budget
//! refuses anything larger instead of truncating.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::logspace::{argmax, log_sum_exp};
use crate::model::{compress, ChainModel, CompressedSequence};

/// Cap on the number of labelings the oracle will enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_enumerations: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_enumerations: 10_000_000,
        }
    }
}

impl OracleBudget {
    fn check(&self, m: usize, t_len: usize) -> Result<usize> {
        let count = u32::try_from(t_len).ok().and_then(|t| (m as u128).checked_pow(t));
        match count {
            Some(n) if n <= self.max_enumerations as u128 => Ok(n as usize),
            Some(n) => Err(Error::ResourceLimit {
                required: format!("M^T = {m}^{t_len} = {n}"),
                cap: self.max_enumerations,
            }),
            None => Err(Error::ResourceLimit {
                required: format!("M^T = {m}^{t_len}"),
                cap: self.max_enumerations,
            }),
        }
    }
}

/// Every labeling with its posterior probability, in lexicographic order.
pub fn enumerate_posterior(model: &ChainModel, obs: &[usize], budget: OracleBudget) -> Result<Vec<(Vec<usize>, f64)>> {
    model.check_obs(obs)?;
    let m = model.num_states();
    let t_len = obs.len();
    let count = budget.check(m, t_len)?;
    let mut labelings = Vec::with_capacity(count);
    let mut scores = Vec::with_capacity(count);
    let mut y = vec![0usize; t_len];
    loop {
        scores.push(model.path_log_score(obs, &y)?);
        labelings.push(y.clone());
        // Odometer increment, last position fastest.
        let mut pos = t_len;
        loop {
            if pos == 0 {
                let log_z = log_sum_exp(scores.iter().copied());
                return Ok(labelings
                    .into_iter()
                    .zip(scores)
                    .map(|(y, s)| {
                        let p = if log_z == f64::NEG_INFINITY {
                            0.0
                        } else {
                            (s - log_z).exp()
                        };
                        (y, p)
                    })
                    .collect());
            }
            pos -= 1;
            y[pos] += 1;
            if y[pos] < m {
                break;
            }
            y[pos] = 0;
        }
    }
}

/// `p(s = s0 | x)` for every compressed sequence with nonzero preimage.
pub fn oracle_compressed_distribution(
    model: &ChainModel,
    obs: &[usize],
    budget: OracleBudget,
) -> Result<BTreeMap<CompressedSequence, f64>> {
    let mut dist = BTreeMap::new();
    for (y, p) in enumerate_posterior(model, obs, budget)? {
        *dist.entry(compress(&y)?).or_insert(0.0) += p;
    }
    Ok(dist)
}

/// `p(c = c0 | x)` at index `c0 - 1`, for `c0 = 1..=T`.
pub fn oracle_length_distribution(model: &ChainModel, obs: &[usize], budget: OracleBudget) -> Result<Vec<f64>> {
    let mut probs = vec![0.0; obs.len()];
    for (s, p) in oracle_compressed_distribution(model, obs, budget)? {
        probs[s.len() - 1] += p;
    }
    Ok(probs)
}

fn marginal_from_distribution(
    dist: &BTreeMap<CompressedSequence, f64>,
    m: usize,
    c: usize,
    i: usize,
) -> Result<Vec<f64>> {
    let mut row = vec![0.0; m];
    for (s, &p) in dist.iter().filter(|(s, _)| s.len() == c) {
        row[s.entries()[i]] += p;
    }
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedConditional(format!(
            "no probability mass at compressed length {c}"
        )));
    }
    row.iter_mut().for_each(|p| *p /= total);
    Ok(row)
}

/// `p(s_i = j | x, c)` for every `j`, by conditioning the enumerated
/// distribution on length `c`. `i` is a 0-based position.
pub fn oracle_compressed_marginal(
    model: &ChainModel,
    obs: &[usize],
    c: usize,
    i: usize,
    budget: OracleBudget,
) -> Result<Vec<f64>> {
    if c == 0 || c > obs.len() || i >= c {
        return invalid(format!("position {i} / length {c} out of range for T = {}", obs.len()));
    }
    let dist = oracle_compressed_distribution(model, obs, budget)?;
    marginal_from_distribution(&dist, model.num_states(), c, i)
}

/// The two-step compressed decoder evaluated on the enumerated distribution.
pub fn oracle_compressed_decode(
    model: &ChainModel,
    obs: &[usize],
    c_max: usize,
    budget: OracleBudget,
) -> Result<(Vec<usize>, usize)> {
    if c_max == 0 || c_max > obs.len() {
        return invalid(format!("c_max {c_max} outside 1..={}", obs.len()));
    }
    let dist = oracle_compressed_distribution(model, obs, budget)?;
    let mut lengths = vec![0.0; c_max];
    for (s, p) in &dist {
        if s.len() <= c_max {
            lengths[s.len() - 1] += p;
        }
    }
    let c_hat = argmax(&lengths).map_or(1, |i| i + 1);
    let states = (0..c_hat)
        .map(|i| marginal_from_distribution(&dist, model.num_states(), c_hat, i).map(|row| argmax(&row).unwrap_or(0)))
        .collect::<Result<Vec<_>>>()?;
    Ok((states, c_hat))
}
