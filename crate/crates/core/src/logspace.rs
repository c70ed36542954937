//! Log-domain arithmetic shared by the decoders.
//!
//! `f64::NEG_INFINITY` stands for log 0 everywhere. Every reduction here
//! accepts all-`-inf` input and returns `-inf` rather than NaN.

/// `ln(exp(a) + exp(b))`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ exp(x)` over an iterator; empty or all `-inf` gives `-inf`.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = iter.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Index of the largest element; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ if v.is_nan() => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Exponentiated, column-normalized copy of a log transition matrix.
///
/// Computing `ln Σ_k exp(prev[k] + trans[k][j])` directly costs one `exp` per
/// term. Shifting each column by its maximum lets the inner sum run on
/// precomputed linear weights, so a full row costs `M` exponentials and `M²`
/// multiply-adds. When the shifted sum is so small that underflowed weights
/// could matter, the cell falls back to an exact log-sum-exp.
#[derive(Debug, Clone)]
pub(crate) struct ColumnKernel {
    m: usize,
    log_trans: Vec<f64>,
    col_max: Vec<f64>,
    // Column-major: weights[j * m + k] = exp(trans[k][j] - col_max[j]).
    weights: Vec<f64>,
}

const FALLBACK_BELOW: f64 = 1e-200;

impl ColumnKernel {
    pub(crate) fn new(m: usize, log_trans: &[f64]) -> Self {
        debug_assert_eq!(log_trans.len(), m * m);
        let mut col_max = vec![f64::NEG_INFINITY; m];
        for k in 0..m {
            for j in 0..m {
                col_max[j] = col_max[j].max(log_trans[k * m + j]);
            }
        }
        let mut weights = vec![0.0; m * m];
        for j in 0..m {
            if col_max[j] == f64::NEG_INFINITY {
                continue;
            }
            for k in 0..m {
                weights[j * m + k] = (log_trans[k * m + j] - col_max[j]).exp();
            }
        }
        Self {
            m,
            log_trans: log_trans.to_vec(),
            col_max,
            weights,
        }
    }

    /// Writes `out[j] = ln Σ_{k ≠ j} exp(prev[k] + trans[k][j])` for every `j`.
    ///
    /// `scratch` must hold `m` values.
    pub(crate) fn off_diagonal(&self, prev: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let m = self.m;
        let shift = prev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            out.fill(f64::NEG_INFINITY);
            return;
        }
        for (s, &p) in scratch.iter_mut().zip(prev) {
            *s = (p - shift).exp();
        }
        for (j, o) in out.iter_mut().enumerate() {
            if self.col_max[j] == f64::NEG_INFINITY {
                *o = f64::NEG_INFINITY;
                continue;
            }
            let col = &self.weights[j * m..(j + 1) * m];
            let mut sum = 0.0;
            for k in 0..m {
                if k != j {
                    sum += scratch[k] * col[k];
                }
            }
            *o = if sum >= FALLBACK_BELOW {
                shift + self.col_max[j] + sum.ln()
            } else {
                self.exact(prev, j)
            };
        }
    }

    fn exact(&self, prev: &[f64], j: usize) -> f64 {
        let m = self.m;
        log_sum_exp(
            (0..m)
                .filter(move |&k| k != j)
                .map(move |k| prev[k] + self.log_trans[k * m + j]),
        )
    }

    #[inline]
    pub(crate) fn self_loop(&self, j: usize) -> f64 {
        self.log_trans[j * self.m + j]
    }
}
