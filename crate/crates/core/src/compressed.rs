//! Inference over compressed state sequences.
//!
//! A labeling `y` compresses to `s = compress(y)`, its run-collapsed state
//! string. This module computes, in polynomial time, quantities that would
//! otherwise need a sum over all `M^T` labelings:
//!
//! * the summed score `Z(s0)` of the labelings that compress to a given
//!   `s0`, by a forward recursion over the `c = |s0|` compressed positions;
//! * the same recursion run on a `c × M` table whose admissible cells are
//!   given by a [`ConstraintSet`], which yields every length factor
//!   `Z(S_c)` in one pass and, with the partition `Z`, the distribution of
//!   the compressed length;
//! * per-position marginals `p(s_i = j | x, c)` from tables restricted to
//!   one state at row `i`;
//! * a two-step decoder: the most probable length, then the most probable
//!   state at each compressed position.
//!
//! At time `t` the table cell `(i, j)` holds the log-sum of all prefix
//! scores `y_0..y_t` that end in state `j` after exactly `i` changes of
//! state. A cell either keeps its state (a self-loop) or is entered from
//! row `i - 1` in a *different* state, so two adjacent compressed entries
//! never coincide. Rows and positions are 0-based; lengths (`c`, `c_max`,
//! `c_hat`) are counts.

use crate::error::{invalid, Error, Result};
use crate::logspace::{argmax, log_add, log_sum_exp, ColumnKernel};
use crate::model::{ChainModel, CompressedSequence};

/// Largest compressed length considered by default.
pub const DEFAULT_C_MAX_CEILING: usize = 128;

/// `min(T, 128)`.
pub fn default_c_max(t_len: usize) -> usize {
    t_len.min(DEFAULT_C_MAX_CEILING)
}

/// The admissible `(row, state)` cells of a `height × M` table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSet {
    height: usize,
    num_states: usize,
    allowed: Vec<bool>,
}

impl ConstraintSet {
    /// Builds a set from explicit cells.
    pub fn from_cells(
        height: usize,
        num_states: usize,
        cells: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut q = Self::empty(height, num_states)?;
        for (i, j) in cells {
            if i >= height || j >= num_states {
                return invalid(format!("cell ({i}, {j}) outside a {height}×{num_states} table"));
            }
            q.allowed[i * num_states + j] = true;
        }
        Ok(q)
    }

    fn empty(height: usize, num_states: usize) -> Result<Self> {
        if height == 0 || num_states == 0 {
            return invalid("constraint table needs a positive height and state count");
        }
        Ok(Self {
            height,
            num_states,
            allowed: vec![false; height * num_states],
        })
    }

    /// Every cell of a `height × M` table: all compressed sequences of
    /// length at most `height`.
    pub fn full_table(height: usize, num_states: usize) -> Result<Self> {
        let mut q = Self::empty(height, num_states)?;
        q.allowed.fill(true);
        Ok(q)
    }

    /// The single path `(0, s_0), (1, s_1), ...` of one compressed sequence.
    pub fn fixed_sequence(s0: &CompressedSequence, num_states: usize) -> Result<Self> {
        Self::from_cells(s0.len(), num_states, s0.entries().iter().copied().enumerate())
    }

    /// Every cell of a `height × M` table except row `row`, where only
    /// `state` is admitted: sequences of length `height` with `s_row = state`.
    pub fn fixed_cell(height: usize, num_states: usize, row: usize, state: usize) -> Result<Self> {
        if row >= height || state >= num_states {
            return invalid(format!("cell ({row}, {state}) outside a {height}×{num_states} table"));
        }
        let mut q = Self::full_table(height, num_states)?;
        for j in 0..num_states {
            q.allowed[row * num_states + j] = j == state;
        }
        Ok(q)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn contains(&self, row: usize, state: usize) -> bool {
        row < self.height && state < self.num_states && self.allowed[row * self.num_states + state]
    }
}

/// The forward table of log-values `α̂_t(i, j)` for every time step.
#[derive(Debug, Clone)]
pub struct LatticeTable {
    len: usize,
    height: usize,
    num_states: usize,
    log_cells: Vec<f64>,
}

impl LatticeTable {
    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Table height, i.e. the largest compressed length it tracks.
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn cell(&self, t: usize, row: usize, state: usize) -> f64 {
        self.log_cells[(t * self.height + row) * self.num_states + state]
    }

    /// The `height × M` slice at time `t`, row-major.
    pub fn slice(&self, t: usize) -> &[f64] {
        let w = self.height * self.num_states;
        &self.log_cells[t * w..(t + 1) * w]
    }

    /// `ln Σ_j α̂_t(row, j)`.
    pub fn row_log_sum(&self, t: usize, row: usize) -> f64 {
        let m = self.num_states;
        log_sum_exp(self.slice(t)[row * m..(row + 1) * m].iter().copied())
    }

    /// Log of the summed score over every admissible cell at the last step.
    pub fn total_log_sum(&self) -> f64 {
        log_sum_exp(self.slice(self.len - 1).iter().copied())
    }
}

/// Runs the table recursion and hands each time slice to `visit`.
///
/// Row `i` can only be reached once `i` state changes have happened, so at
/// time `t` rows above `t` stay at `-inf` and are skipped.
fn sweep(model: &ChainModel, obs: &[usize], q: &ConstraintSet, mut visit: impl FnMut(usize, &[f64])) {
    let m = model.num_states();
    let height = q.height();
    let kernel = ColumnKernel::new(m, model.trans_table());
    let mut prev = vec![f64::NEG_INFINITY; height * m];
    let mut cur = vec![f64::NEG_INFINITY; height * m];
    let mut off = vec![0.0; m];
    let mut scratch = vec![0.0; m];

    for (j, cell) in prev[..m].iter_mut().enumerate() {
        if q.contains(0, j) {
            *cell = model.init(j) + model.emit(j, obs[0]);
        }
    }
    visit(0, &prev);

    for (t, &x) in obs.iter().enumerate().skip(1) {
        for row in 0..height.min(t + 1) {
            if row > 0 {
                kernel.off_diagonal(&prev[(row - 1) * m..row * m], &mut off, &mut scratch);
            } else {
                off.fill(f64::NEG_INFINITY);
            }
            let stay = &prev[row * m..(row + 1) * m];
            let out = &mut cur[row * m..(row + 1) * m];
            for j in 0..m {
                out[j] = if q.contains(row, j) {
                    log_add(stay[j] + kernel.self_loop(j), off[j]) + model.emit(j, x)
                } else {
                    f64::NEG_INFINITY
                };
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        visit(t, &prev);
    }
}

fn check_table_args(model: &ChainModel, obs: &[usize], q: &ConstraintSet) -> Result<()> {
    model.check_obs(obs)?;
    if q.num_states() != model.num_states() {
        return invalid(format!(
            "constraint set has {} states, model has {}",
            q.num_states(),
            model.num_states()
        ));
    }
    if q.height() > obs.len() {
        return invalid(format!(
            "table height {} exceeds sequence length {}",
            q.height(),
            obs.len()
        ));
    }
    Ok(())
}

/// Last time slice of the table recursion (`height × M`).
fn final_slice(model: &ChainModel, obs: &[usize], q: &ConstraintSet) -> Vec<f64> {
    let last = obs.len() - 1;
    let mut out = Vec::new();
    sweep(model, obs, q, |t, s| {
        if t == last {
            out = s.to_vec();
        }
    });
    out
}

fn row_sums(slice: &[f64], m: usize) -> Vec<f64> {
    slice.chunks(m).map(|r| log_sum_exp(r.iter().copied())).collect()
}

/// Runs the table recursion under `q` and keeps every time slice.
pub fn table_forward(model: &ChainModel, obs: &[usize], q: &ConstraintSet) -> Result<LatticeTable> {
    check_table_args(model, obs, q)?;
    let m = model.num_states();
    let mut log_cells = Vec::with_capacity(obs.len() * q.height() * m);
    sweep(model, obs, q, |_, s| log_cells.extend_from_slice(s));
    Ok(LatticeTable {
        len: obs.len(),
        height: q.height(),
        num_states: m,
        log_cells,
    })
}

/// `ln Z(Q)`: the row-`c0` sum of the last slice, `c0` a length in `1..=height`.
pub fn constraint_log_z(model: &ChainModel, obs: &[usize], q: &ConstraintSet, target_len: usize) -> Result<f64> {
    check_table_args(model, obs, q)?;
    if target_len == 0 || target_len > q.height() {
        return invalid(format!("target length {target_len} outside 1..={}", q.height()));
    }
    let m = model.num_states();
    let slice = final_slice(model, obs, q);
    Ok(log_sum_exp(slice[(target_len - 1) * m..target_len * m].iter().copied()))
}

/// `ln Z(s0)`: the summed score of all labelings that compress to `s0`.
///
/// Runs the `c`-dimensional recursion in which position `i` either stays in
/// `s_i` or advances from `s_{i-1}`. A sequence longer than `T` has no
/// preimage and yields `-inf`.
pub fn compressed_sequence_log_lattice(model: &ChainModel, obs: &[usize], s0: &CompressedSequence) -> Result<f64> {
    model.check_obs(obs)?;
    let m = model.num_states();
    let s = s0.entries();
    if let Some(&bad) = s.iter().find(|&&j| j >= m) {
        return invalid(format!("state {bad} out of range (M = {m})"));
    }
    let c = s.len();
    if c > obs.len() {
        return Ok(f64::NEG_INFINITY);
    }
    let mut alpha = vec![f64::NEG_INFINITY; c];
    alpha[0] = model.init(s[0]) + model.emit(s[0], obs[0]);
    for (t, &x) in obs.iter().enumerate().skip(1) {
        // Descending so alpha[i - 1] still holds the previous step.
        for i in (0..c.min(t + 1)).rev() {
            let stay = alpha[i] + model.trans(s[i], s[i]);
            let advance = if i > 0 {
                alpha[i - 1] + model.trans(s[i - 1], s[i])
            } else {
                f64::NEG_INFINITY
            };
            alpha[i] = log_add(stay, advance) + model.emit(s[i], x);
        }
    }
    Ok(alpha[c - 1])
}

/// `ln Z` as the sum of the full height-`T` table at the last step.
pub fn log_partition_via_table(model: &ChainModel, obs: &[usize]) -> Result<f64> {
    model.check_obs(obs)?;
    let q = ConstraintSet::full_table(obs.len(), model.num_states())?;
    Ok(log_sum_exp(final_slice(model, obs, &q)))
}

/// How the length distribution is normalized when `c_max < T`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Normalization {
    /// Divide by the exact partition, from a height-`T` table.
    #[default]
    Exact,
    /// Divide by the mass of lengths `1..=c_max` only, from a height-`c_max`
    /// table. Cheaper; exact when no mass lies beyond `c_max`.
    Truncated,
}

/// `p(c = c0 | x)` for `c0 = 1..=c_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthDistribution {
    /// `probs[c0 - 1] = p(c = c0 | x)`.
    pub probs: Vec<f64>,
    /// Log of the normalizer used.
    pub log_z: f64,
}

impl LengthDistribution {
    pub fn c_max(&self) -> usize {
        self.probs.len()
    }

    /// Zero outside `1..=c_max`.
    pub fn prob(&self, c0: usize) -> f64 {
        if c0 == 0 {
            return 0.0;
        }
        self.probs.get(c0 - 1).copied().unwrap_or(0.0)
    }

    /// Most probable length; ties go to the shorter one.
    pub fn most_likely(&self) -> usize {
        argmax(&self.probs).map_or(1, |i| i + 1)
    }
}

/// Distribution of the compressed length from a single table run.
pub fn length_distribution(
    model: &ChainModel,
    obs: &[usize],
    c_max: usize,
    norm: Normalization,
) -> Result<LengthDistribution> {
    model.check_obs(obs)?;
    let t_len = obs.len();
    if c_max == 0 || c_max > t_len {
        return invalid(format!("c_max {c_max} outside 1..={t_len}"));
    }
    let height = match norm {
        Normalization::Exact => t_len,
        Normalization::Truncated => c_max,
    };
    let m = model.num_states();
    let q = ConstraintSet::full_table(height, m)?;
    let factors = row_sums(&final_slice(model, obs, &q), m);
    let log_z = log_sum_exp(factors.iter().copied());
    let probs = factors[..c_max]
        .iter()
        .map(|&f| {
            if log_z == f64::NEG_INFINITY {
                0.0
            } else {
                (f - log_z).exp()
            }
        })
        .collect();
    Ok(LengthDistribution { probs, log_z })
}

fn check_position(model: &ChainModel, obs: &[usize], c: usize, i: usize) -> Result<()> {
    model.check_obs(obs)?;
    if c == 0 || c > obs.len() {
        return invalid(format!("length {c} outside 1..={}", obs.len()));
    }
    if i >= c {
        return invalid(format!("position {i} outside 0..{c}"));
    }
    Ok(())
}

fn normalize_log_row(log_z: &[f64], what: impl FnOnce() -> String) -> Result<Vec<f64>> {
    let total = log_sum_exp(log_z.iter().copied());
    if total == f64::NEG_INFINITY {
        return Err(Error::UndefinedConditional(what()));
    }
    Ok(log_z.iter().map(|&z| (z - total).exp()).collect())
}

/// `p(s_i = j | x, c)` for every state `j`, built literally: one table run
/// per `j` under [`ConstraintSet::fixed_cell`].
pub fn compressed_marginal_row(model: &ChainModel, obs: &[usize], c: usize, i: usize) -> Result<Vec<f64>> {
    check_position(model, obs, c, i)?;
    let m = model.num_states();
    let mut log_z = Vec::with_capacity(m);
    for j in 0..m {
        let q = ConstraintSet::fixed_cell(c, m, i, j)?;
        log_z.push(constraint_log_z(model, obs, &q, c)?);
    }
    normalize_log_row(&log_z, || format!("no labeling compresses to length {c}"))
}

/// `p(s_i = j | x, c)`.
pub fn compressed_marginal(model: &ChainModel, obs: &[usize], c: usize, i: usize, j: usize) -> Result<f64> {
    if j >= model.num_states() {
        return invalid(format!("state {j} out of range (M = {})", model.num_states()));
    }
    Ok(compressed_marginal_row(model, obs, c, i)?[j])
}

/// `ln Z(Q_{i,j})` for every position `i < c` and state `j`.
///
/// Equivalent to running [`constraint_log_z`] under
/// `ConstraintSet::fixed_cell(c, M, i, j)` for each pair, but rows above
/// `i` are the same in every one of those tables (a row only feeds the row
/// below it), so they are taken from a single full-table run and only rows
/// `i..c` are recomputed.
pub fn marginal_log_factors(model: &ChainModel, obs: &[usize], c: usize) -> Result<Vec<Vec<f64>>> {
    check_position(model, obs, c, 0)?;
    let m = model.num_states();
    let t_len = obs.len();
    let full = table_forward(model, obs, &ConstraintSet::full_table(c, m)?)?;
    let kernel = ColumnKernel::new(m, model.trans_table());
    let mut scratch = vec![0.0; m];
    let mut out = vec![vec![f64::NEG_INFINITY; m]; c];

    for (i, out_row) in out.iter_mut().enumerate() {
        // Entry into row i from the full table's row i - 1, for every t.
        let mut entry = vec![f64::NEG_INFINITY; t_len * m];
        if i > 0 {
            for t in 1..t_len {
                let above = &full.slice(t - 1)[(i - 1) * m..i * m];
                kernel.off_diagonal(above, &mut entry[t * m..(t + 1) * m], &mut scratch);
            }
        }
        let rows = c - i;
        let mut prev = vec![f64::NEG_INFINITY; rows * m];
        let mut cur = vec![f64::NEG_INFINITY; rows * m];
        let mut off = vec![0.0; m];
        for (j, log_z) in out_row.iter_mut().enumerate() {
            prev.fill(f64::NEG_INFINITY);
            cur.fill(f64::NEG_INFINITY);
            if i == 0 {
                prev[j] = model.init(j) + model.emit(j, obs[0]);
            }
            for (t, &x) in obs.iter().enumerate().skip(1) {
                if t < i {
                    continue;
                }
                // Row i admits only state j.
                cur[j] = log_add(prev[j] + kernel.self_loop(j), entry[t * m + j]) + model.emit(j, x);
                for r in 1..rows.min(t + 1 - i) {
                    kernel.off_diagonal(&prev[(r - 1) * m..r * m], &mut off, &mut scratch);
                    let (stay, out) = (&prev[r * m..(r + 1) * m], &mut cur[r * m..(r + 1) * m]);
                    for k in 0..m {
                        out[k] = log_add(stay[k] + kernel.self_loop(k), off[k]) + model.emit(k, x);
                    }
                }
                std::mem::swap(&mut prev, &mut cur);
            }
            *log_z = log_sum_exp(prev[(rows - 1) * m..rows * m].iter().copied());
        }
    }
    Ok(out)
}

/// `c × M` table of `p(s_i = j | x, c)`.
pub fn compressed_marginal_table(model: &ChainModel, obs: &[usize], c: usize) -> Result<Vec<Vec<f64>>> {
    marginal_log_factors(model, obs, c)?
        .iter()
        .enumerate()
        .map(|(i, row)| normalize_log_row(row, || format!("no labeling compresses to length {c} (position {i})")))
        .collect()
}

/// Result of the two-step compressed decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedDecode {
    /// Per-position argmax states; adjacent entries may coincide.
    pub states: Vec<usize>,
    pub c_hat: usize,
    pub length_dist: LengthDistribution,
    /// `marginals[i][j] = p(s_i = j | x, c_hat)`.
    pub marginals: Vec<Vec<f64>>,
}

impl CompressedDecode {
    /// Whether the per-position argmax produced two equal neighbors, which
    /// no labeling can compress to.
    pub fn has_adjacent_duplicates(&self) -> bool {
        self.states.windows(2).any(|w| w[0] == w[1])
    }
}

/// Picks `c_hat = argmax_c p(c | x)`, then `s_i = argmax_j p(s_i = j | x, c_hat)`.
///
/// Ties go to the shorter length and the lower state index. The state list
/// is returned as computed, even when neighbors coincide.
pub fn compressed_decode(
    model: &ChainModel,
    obs: &[usize],
    c_max: usize,
    norm: Normalization,
) -> Result<CompressedDecode> {
    let length_dist = length_distribution(model, obs, c_max, norm)?;
    if length_dist.log_z == f64::NEG_INFINITY {
        return Err(Error::UndefinedConditional("every labeling has zero score".into()));
    }
    let c_hat = length_dist.most_likely();
    let marginals = compressed_marginal_table(model, obs, c_hat)?;
    let states = marginals.iter().map(|r| argmax(r).unwrap_or(0)).collect();
    Ok(CompressedDecode {
        states,
        c_hat,
        length_dist,
        marginals,
    })
}
