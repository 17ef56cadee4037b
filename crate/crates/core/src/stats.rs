//! Monte Carlo accumulators, estimates, and deterministic parallel reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A Monte Carlo estimate together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub seed: u64,
}

impl McEstimate {
    /// An estimate known without sampling error.
    pub fn exact(value: f64, n_paths: u64, seed: u64) -> Self {
        Self { value, std_error: 0.0, n_paths, seed }
    }

    /// z-score of `self - other` assuming independent errors.
    pub fn z_score(&self, other: &McEstimate) -> f64 {
        z_score(self.value - other.value, self.std_error.hypot(other.std_error))
    }
}

/// `diff / se`, with `0/0 = 0` so that two exact, equal values pass.
pub fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Running mean and variance (Welford), mergeable with Chan's rule.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.n as f64 * w;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self, seed: u64) -> Result<McEstimate> {
        if self.n == 0 {
            return Err(Error::EmptyBatch);
        }
        Ok(McEstimate {
            value: self.mean,
            std_error: self.std_error(),
            n_paths: self.n,
            seed,
        })
    }
}

/// Running mean vector and covariance matrix of `N` jointly sampled quantities.
///
/// Used wherever several estimators share paths (common random numbers) and
/// the error of a linear combination is needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovAccumulator<const N: usize> {
    n: u64,
    mean: [f64; N],
    comoment: [[f64; N]; N],
}

impl<const N: usize> Default for CovAccumulator<N> {
    fn default() -> Self {
        Self { n: 0, mean: [0.0; N], comoment: [[0.0; N]; N] }
    }
}

impl<const N: usize> CovAccumulator<N> {
    pub fn push(&mut self, x: &[f64; N]) {
        self.n += 1;
        let n = self.n as f64;
        let mut delta = [0.0; N];
        for i in 0..N {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / n;
        }
        for i in 0..N {
            for j in 0..N {
                self.comoment[i][j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let (na, nb) = (self.n as f64, other.n as f64);
        let mut delta = [0.0; N];
        for i in 0..N {
            delta[i] = other.mean[i] - self.mean[i];
        }
        for i in 0..N {
            for j in 0..N {
                self.comoment[i][j] +=
                    other.comoment[i][j] + delta[i] * delta[j] * na * nb / n as f64;
            }
        }
        for i in 0..N {
            self.mean[i] += delta[i] * nb / n as f64;
        }
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> [f64; N] {
        self.mean
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.comoment[i][j] / (self.n - 1) as f64
        }
    }

    /// Standard error of the sample mean of `w . x`.
    pub fn std_error_of(&self, weights: &[f64; N]) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let mut var = 0.0;
        for i in 0..N {
            for j in 0..N {
                var += weights[i] * weights[j] * self.covariance(i, j);
            }
        }
        (var.max(0.0) / self.n as f64).sqrt()
    }

    /// Estimate of `E[w . x]`.
    pub fn estimate_of(&self, weights: &[f64; N], seed: u64) -> Result<McEstimate> {
        if self.n == 0 {
            return Err(Error::EmptyBatch);
        }
        let value = weights.iter().zip(self.mean.iter()).map(|(w, m)| w * m).sum();
        Ok(McEstimate {
            value,
            std_error: self.std_error_of(weights),
            n_paths: self.n,
            seed,
        })
    }

    pub fn marginal(&self, i: usize, seed: u64) -> Result<McEstimate> {
        let mut w = [0.0; N];
        w[i] = 1.0;
        self.estimate_of(&w, seed)
    }
}

/// Paths per work unit. Fixed so that the reduction tree does not depend on
/// the number of workers.
pub const CHUNK: u64 = 1024;

/// Maps `f` over `0..n` in fixed-size chunks and folds the per-chunk results
/// in index order.
///
/// Each chunk is evaluated sequentially in index order and chunks are merged
/// left to right, so the result is bit-identical for any worker count.
pub fn chunked_reduce<A, S, F, M>(n: u64, init: S, f: F, merge: M) -> Result<A>
where
    A: Default + Send,
    S: Fn() -> A + Sync + Send,
    F: Fn(&mut A, u64) -> Result<()> + Sync + Send,
    M: Fn(&mut A, &A),
{
    let n_chunks = n.div_ceil(CHUNK);
    let run_chunk = |c: u64| -> Result<A> {
        let mut acc = init();
        for i in (c * CHUNK)..((c + 1) * CHUNK).min(n) {
            f(&mut acc, i)?;
        }
        Ok(acc)
    };

    #[cfg(feature = "parallel")]
    let partials: Vec<Result<A>> = {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(run_chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Result<A>> = (0..n_chunks).map(run_chunk).collect();

    let mut total = A::default();
    for p in partials {
        merge(&mut total, &p?);
    }
    Ok(total)
}

/// Like [`chunked_reduce`] but collects one output per index, in order.
pub fn chunked_map<T, F>(n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let n_chunks = n.div_ceil(CHUNK);
    let run_chunk =
        |c: u64| -> Result<Vec<T>> { ((c * CHUNK)..((c + 1) * CHUNK).min(n)).map(&f).collect() };

    #[cfg(feature = "parallel")]
    let parts: Vec<Result<Vec<T>>> = {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(run_chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<Vec<T>>> = (0..n_chunks).map(run_chunk).collect();

    let mut out = Vec::with_capacity(n as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Value with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueSe {
    pub value: f64,
    pub se: f64,
}

/// Two-point Richardson extrapolation to `gap -> 0`, assuming the leading
/// error term is linear in the gap. Inputs are treated as independent.
pub fn richardson_linear(g1: f64, v1: ValueSe, g2: f64, v2: ValueSe) -> Result<ValueSe> {
    if !(g1 > 0.0 && g2 > 0.0) || g1 == g2 {
        return Err(Error::InvalidInput(format!(
            "Richardson extrapolation needs two distinct positive gaps, got {g1} and {g2}"
        )));
    }
    let d = g1 - g2;
    let w1 = -g2 / d;
    let w2 = g1 / d;
    Ok(ValueSe {
        value: w1 * v1.value + w2 * v2.value,
        se: (w1 * v1.se).hypot(w2 * v2.se),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_matches_two_pass_formulas() {
        let xs = [1.0, 4.0, -2.0, 7.5, 3.25, 0.0];
        let mut acc = Accumulator::default();
        xs.iter().for_each(|&x| acc.push(x));
        let mean = xs.iter().sum::<f64>() / 6.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((acc.mean() - mean).abs() < 1e-14);
        assert!((acc.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn merge_equals_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let mut whole = Accumulator::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = Accumulator::default();
        let mut b = Accumulator::default();
        xs[..33].iter().for_each(|&x| a.push(x));
        xs[33..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count(), whole.count());
        assert!((a.mean() - whole.mean()).abs() < 1e-13);
        assert!((a.variance() - whole.variance()).abs() < 1e-12);
    }

    #[test]
    fn cov_accumulator_combination_se() {
        let mut acc = CovAccumulator::<2>::default();
        let mut diff = Accumulator::default();
        for i in 0..500 {
            let a = ((i * 7919) % 101) as f64 / 101.0;
            let b = a * 0.5 + ((i * 104_729) % 13) as f64 / 13.0;
            acc.push(&[a, b]);
            diff.push(a - 2.0 * b);
        }
        let est = acc.estimate_of(&[1.0, -2.0], 0).unwrap();
        assert!((est.value - diff.mean()).abs() < 1e-12);
        assert!((est.std_error - diff.std_error()).abs() < 1e-12);

        let mut halves = CovAccumulator::<2>::default();
        let mut second = CovAccumulator::<2>::default();
        for i in 0..500 {
            let a = ((i * 7919) % 101) as f64 / 101.0;
            let b = a * 0.5 + ((i * 104_729) % 13) as f64 / 13.0;
            if i < 200 {
                halves.push(&[a, b]);
            } else {
                second.push(&[a, b]);
            }
        }
        halves.merge(&second);
        assert!((halves.covariance(0, 1) - acc.covariance(0, 1)).abs() < 1e-12);
    }

    #[test]
    fn empty_accumulator_is_an_error() {
        assert_eq!(Accumulator::default().estimate(1), Err(Error::EmptyBatch));
    }

    #[test]
    fn richardson_removes_linear_error() {
        let f = |g: f64| 0.3 + 2.0 * g;
        let r = richardson_linear(
            0.05,
            ValueSe { value: f(0.05), se: 0.01 },
            0.025,
            ValueSe { value: f(0.025), se: 0.01 },
        )
        .unwrap();
        assert!((r.value - 0.3).abs() < 1e-14);
        assert!((r.se - 0.01 * 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn chunked_reduce_is_ordered() {
        let n = 3 * CHUNK + 17;
        let total = chunked_reduce(
            n,
            Vec::new,
            |v: &mut Vec<u64>, i| {
                v.push(i);
                Ok(())
            },
            |a: &mut Vec<u64>, b: &Vec<u64>| a.extend_from_slice(b),
        )
        .unwrap();
        assert_eq!(total, (0..n).collect::<Vec<_>>());
        let mapped = chunked_map(n, |i| Ok(i * 2)).unwrap();
        assert_eq!(mapped.len() as u64, n);
        assert_eq!(mapped[2000], 4000);
    }
}
