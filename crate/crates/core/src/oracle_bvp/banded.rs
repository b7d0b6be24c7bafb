//! Banded LU with partial pivoting.

/// Square matrix with `kl` sub- and `ku` super-diagonals. Rows carry `kl`
/// extra slots on the right for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl, "({i}, {j}) outside the band");
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` at `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + self.kl + 1).min(self.n);
                (lo..hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Factorizes in place; `Err(k)` reports a zero pivot in column `k`.
    pub fn factorize(mut self) -> Result<BandedLu, usize> {
        let n = self.n;
        let reach = self.ku + self.kl;
        let mut perm = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for i in k + 1..=last {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= f64::EPSILON * scale * 1e-3 || best == 0.0 {
                return Err(k);
            }
            perm[k] = p;
            let end = (k + reach + 1).min(n);
            if p != k {
                for j in k..end {
                    let a = self.slot(k, j);
                    let b = self.slot(p, j);
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[self.slot(k, k)];
            for i in k + 1..=last {
                let sik = self.slot(i, k);
                let l = self.data[sik] / piv;
                self.data[sik] = l;
                if l != 0.0 {
                    for j in k + 1..end {
                        let u = self.data[self.slot(k, j)];
                        let s = self.slot(i, j);
                        self.data[s] -= l * u;
                    }
                }
            }
        }
        Ok(BandedLu { m: self, perm })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
    perm: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            b.swap(k, self.perm[k]);
            let bk = b[k];
            for (i, bi) in b.iter_mut().enumerate().take((k + m.kl).min(n - 1) + 1).skip(k + 1) {
                *bi -= m.data[m.slot(i, k)] * bk;
            }
        }
        let reach = m.ku + m.kl;
        for k in (0..n).rev() {
            let end = (k + reach + 1).min(n);
            let mut s = b[k];
            for (j, bj) in b.iter().enumerate().take(end).skip(k + 1) {
                s -= m.data[m.slot(k, j)] * bj;
            }
            b[k] = s / m.data[m.slot(k, k)];
        }
    }
}
