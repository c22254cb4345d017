//! Cholesky factorization of symmetric positive definite band matrices.

/// Lower band stored row by row: entry `(i, j)` with `i - bw <= j <= i` lives at
/// `i * (bw + 1) + (j + bw - i)`.
#[derive(Debug, Clone)]
pub(crate) struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub(crate) fn empty() -> Self {
        Self { n: 0, bw: 0, l: Vec::new() }
    }

    /// `entries` lists `(i, j, a_ij)` for `j <= i`; duplicates are summed.
    /// Returns `None` if the matrix is not numerically positive definite.
    pub(crate) fn factor(n: usize, entries: &[(usize, usize, f64)]) -> Option<Self> {
        let bw = entries.iter().map(|&(i, j, _)| i - j).max().unwrap_or(0);
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for &(i, j, a) in entries {
            debug_assert!(j <= i);
            l[i * w + (j + bw - i)] += a;
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = l[i * w + (j + bw - i)];
                for k in jlo..j {
                    s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (j + bw - i)] = s / l[j * w + bw];
                }
            }
        }
        Some(Self { n, bw, l })
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.l[i * w + (k + bw - i)] * x[k];
            }
            x[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            x[i] /= self.l[i * w + bw];
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                x[k] -= self.l[i * w + (k + bw - i)] * xi;
            }
        }
    }
}
