//! Log-space accumulation and deterministic parallel reduction.

use std::ops::Range;

use rayon::prelude::*;

/// Streaming `log Σ exp(x_i)` with a running maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max <= self.max {
            self.sum += other.sum * (other.max - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = LogSumExp::new();
    for x in xs {
        acc.push(x);
    }
    acc.value()
}

/// Fixed chunk length for parallel enumeration. Independent of the thread
/// count so reductions are bit-for-bit reproducible.
pub const CHUNK: u64 = 1 << 14;

/// Maps `f` over fixed-size consecutive chunks of `0..total` in parallel and
/// returns the per-chunk results in order.
pub fn par_chunks<T, F>(total: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
{
    let nchunks = total.div_ceil(CHUNK);
    (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            f(start..(start + CHUNK).min(total))
        })
        .collect()
}

/// Binomial coefficient as a float (exact for the small arguments used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// `C(n+m, k) - C(n, k) - C(m, k)`: the number of k-subsets of `[n+m]`
/// meeting both `[n]` and its complement.
pub fn cross_exponent(n: usize, m: usize, k: usize) -> f64 {
    binomial(n + m, k) - binomial(n, k) - binomial(m, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_naive() {
        let xs = [0.1, -3.0, 2.5, 700.0, 699.0];
        let naive = {
            let m = 700.0f64;
            m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
        };
        assert!((log_sum_exp(xs) - naive).abs() < 1e-12);
        assert_eq!(log_sum_exp([]), f64::NEG_INFINITY);
    }

    #[test]
    fn merge_equals_push() {
        let mut a = LogSumExp::new();
        let mut b = LogSumExp::new();
        let mut all = LogSumExp::new();
        for (i, x) in [1.0, 5.0, -2.0, 3.0, 9.0, 0.5].iter().enumerate() {
            all.push(*x);
            if i % 2 == 0 {
                a.push(*x)
            } else {
                b.push(*x)
            }
        }
        a.merge(&b);
        assert!((a.value() - all.value()).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(2, 3), 0.0);
        assert_eq!(binomial(5, 3), 10.0);
        assert_eq!(cross_exponent(2, 2, 2), 4.0);
        assert_eq!(cross_exponent(7, 3, 1), 0.0);
    }

    #[test]
    fn chunks_cover_range_in_order() {
        let parts = par_chunks(3 * CHUNK + 5, |r| (r.start, r.end));
        assert_eq!(parts.len(), 4);
        assert_eq!(parts[0], (0, CHUNK));
        assert_eq!(parts[3], (3 * CHUNK, 3 * CHUNK + 5));
    }
}
