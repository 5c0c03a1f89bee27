//! Ulam discretization of transfer operators of full-branch maps.
//!
//! The interval `[lo, hi]` is cut into `m` equal bins. A map is described by
//! its inverse branches: for every branch, the preimages of the `m + 1` bin
//! edges. Entry `(a, b)` of the matrix is the fraction of bin `a` sent into
//! bin `b`. Mass of bin `a` not covered by any listed branch goes to an
//! overflow cell that is spread uniformly over all bins, so every row sums
//! to one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-stochastic transition matrix on equal bins of `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct UlamMatrix {
    lo: f64,
    hi: f64,
    m: usize,
    data: Vec<f64>,
    /// Fraction of `[lo, hi]` covered by the listed branches.
    coverage: f64,
}

impl UlamMatrix {
    /// Assemble from the preimages of the bin edges under every branch. Each
    /// entry of `branches` has `m + 1` monotone values.
    pub fn assemble(lo: f64, hi: f64, m: usize, branches: &[Vec<f64>]) -> Result<Self> {
        if m == 0 || !(hi > lo) {
            return Err(Error::InvalidInput("Ulam grid needs m >= 1 and lo < hi".into()));
        }
        if let Some(b) = branches.iter().find(|b| b.len() != m + 1) {
            return Err(Error::InvalidInput(format!("branch has {} edge preimages, expected {}", b.len(), m + 1)));
        }
        let h = (hi - lo) / m as f64;
        let bin_of = |x: f64| (((x - lo) / h).floor().max(0.0) as usize).min(m - 1);

        // Overlap lengths, accumulated per worker and then merged.
        let mut data = branches
            .par_iter()
            .fold(
                || vec![0.0; m * m],
                |mut rows, pre| {
                    for b in 0..m {
                        let (mut s, mut t) = (pre[b], pre[b + 1]);
                        if s > t {
                            std::mem::swap(&mut s, &mut t);
                        }
                        let (s, t) = (s.max(lo), t.min(hi));
                        if !(t > s) {
                            continue;
                        }
                        for a in bin_of(s)..=bin_of(t) {
                            let (l, r) = (lo + a as f64 * h, lo + (a + 1) as f64 * h);
                            let len = t.min(r) - s.max(l);
                            if len > 0.0 {
                                rows[a * m + b] += len;
                            }
                        }
                    }
                    rows
                },
            )
            .reduce(
                || vec![0.0; m * m],
                |mut x, y| {
                    x.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
                    x
                },
            );
        let mut covered = 0.0;
        for a in 0..m {
            let row = &mut data[a * m..(a + 1) * m];
            let sum: f64 = row.iter().sum::<f64>().min(h);
            covered += sum;
            let spread = (h - sum) / m as f64;
            for v in row.iter_mut() {
                *v = (*v + spread) / h;
            }
            // Rounding can leave the row off by a few ulps; renormalize.
            let total: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        Ok(UlamMatrix { lo, hi, m, data, coverage: covered / (hi - lo) })
    }

    pub fn bins(&self) -> usize {
        self.m
    }

    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.data[a * self.m..(a + 1) * self.m]
    }

    /// Stationary density by relaxed power iteration
    /// `pi <- (1 - w) pi + w pi P`, stopped when `|pi P - pi|_1 < tol`.
    pub fn stationary(&self, relaxation: f64, max_iter: usize, tol: f64) -> Result<UlamDensity> {
        let m = self.m;
        let mut pi = vec![1.0 / m as f64; m];
        let mut next = vec![0.0; m];
        let mut residual = f64::INFINITY;
        for it in 1..=max_iter {
            next.iter_mut().for_each(|v| *v = 0.0);
            for a in 0..m {
                let w = pi[a];
                if w == 0.0 {
                    continue;
                }
                for (n, p) in next.iter_mut().zip(self.row(a)) {
                    *n += w * p;
                }
            }
            residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            if residual < tol {
                let total: f64 = next.iter().sum();
                let h = (self.hi - self.lo) / m as f64;
                return Ok(UlamDensity {
                    lo: self.lo,
                    hi: self.hi,
                    density: next.iter().map(|v| v / total / h).collect(),
                    coverage: self.coverage,
                    iterations: it,
                    residual,
                });
            }
            for (p, n) in pi.iter_mut().zip(&next) {
                *p = (1.0 - relaxation) * *p + relaxation * n;
            }
        }
        Err(Error::NoConvergence { iterations: max_iter, residual })
    }
}

/// Piecewise-constant probability density on equal bins of `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UlamDensity {
    pub lo: f64,
    pub hi: f64,
    pub density: Vec<f64>,
    pub coverage: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl UlamDensity {
    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn edges(&self, a: usize) -> (f64, f64) {
        let h = self.bin_width();
        (self.lo + a as f64 * h, self.lo + (a + 1) as f64 * h)
    }

    pub fn bin_of(&self, x: f64) -> usize {
        let a = ((x - self.lo) / self.bin_width()).floor().max(0.0) as usize;
        a.min(self.bins() - 1)
    }

    /// Density at `x`; zero outside `[lo, hi]`.
    pub fn value(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            0.0
        } else {
            self.density[self.bin_of(x)]
        }
    }

    /// Integral of the density over `[a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(self.lo), b.min(self.hi));
        if !(b > a) {
            return 0.0;
        }
        let (i0, i1) = (self.bin_of(a), self.bin_of(b));
        let mut total = 0.0;
        for i in i0..=i1 {
            let (l, r) = self.edges(i);
            let len = b.min(r) - a.max(l);
            if len > 0.0 {
                total += len * self.density[i];
            }
        }
        total
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    /// L1 distance between two densities on the same interval, computed on
    /// the common refinement of their bins.
    pub fn l1_distance(&self, other: &UlamDensity) -> f64 {
        let mut cuts: Vec<f64> = (0..=self.bins()).map(|i| self.lo + i as f64 * self.bin_width()).collect();
        cuts.extend((0..=other.bins()).map(|i| other.lo + i as f64 * other.bin_width()));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                (self.value(mid) - other.value(mid)).abs() * (w[1] - w[0])
            })
            .sum()
    }

    pub fn sup_inf_ratio(&self) -> f64 {
        let max = self.density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.density.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }
}
