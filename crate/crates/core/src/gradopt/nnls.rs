//! Lawson–Hanson non-negative least squares with an updated QR factorization.
//!
//! Columns enter the passive set through a Householder reflection on the
//! trailing rows and leave it through Givens re-triangularization, so each
//! active-set change costs `O(rows²)` instead of a fresh factorization.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct NnlsResult {
    pub x: DVector<f64>,
    /// Residual `f − E x`.
    pub residual: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit.
    pub converged: bool,
}

struct Factor {
    rows: usize,
    /// Rows of `Qᵀ`, stored row-major.
    qt: Vec<f64>,
    /// Upper-triangular factor of the passive columns, column `k` holds the
    /// `k`-th passive column.
    r: Vec<Vec<f64>>,
    qtf: Vec<f64>,
}

impl Factor {
    fn new(rows: usize, f: &DVector<f64>) -> Self {
        let mut qt = vec![0.0; rows * rows];
        for i in 0..rows {
            qt[i * rows + i] = 1.0;
        }
        Factor { rows, qt, r: Vec::new(), qtf: f.iter().copied().collect() }
    }

    fn passive(&self) -> usize {
        self.r.len()
    }

    /// Append column `a`. Returns false (leaving the factor unchanged) when
    /// `a` is numerically dependent on the current passive columns.
    fn push(&mut self, a: &[f64]) -> bool {
        let n = self.rows;
        let p = self.passive();
        if p >= n {
            return false;
        }
        let mut v = vec![0.0; n];
        for (i, vi) in v.iter_mut().enumerate() {
            let row = &self.qt[i * n..(i + 1) * n];
            *vi = row.iter().zip(a).map(|(q, x)| q * x).sum();
        }
        let anorm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let tail = v[p..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if tail <= 1e-12 * anorm.max(f64::MIN_POSITIVE) {
            return false;
        }
        // Householder reflection sending v[p..] to (-sign·tail) e_p.
        let alpha = if v[p] > 0.0 { -tail } else { tail };
        let mut u = v[p..].to_vec();
        u[0] -= alpha;
        let unorm2: f64 = u.iter().map(|x| x * x).sum();
        if unorm2 > 0.0 {
            let apply = |vec: &mut [f64]| {
                let dot: f64 = u.iter().zip(vec.iter()).map(|(a, b)| a * b).sum();
                let s = 2.0 * dot / unorm2;
                for (x, ui) in vec.iter_mut().zip(&u) {
                    *x -= s * ui;
                }
            };
            apply(&mut self.qtf[p..]);
            // Reflect the trailing rows of Qᵀ column by column.
            let mut col = vec![0.0; n - p];
            for j in 0..n {
                for (k, c) in col.iter_mut().enumerate() {
                    *c = self.qt[(p + k) * n + j];
                }
                apply(&mut col);
                for (k, c) in col.iter().enumerate() {
                    self.qt[(p + k) * n + j] = *c;
                }
            }
        }
        let mut rcol = v[..p].to_vec();
        rcol.push(alpha);
        self.r.push(rcol);
        true
    }

    /// Drop passive column at position `pos` and restore triangularity.
    fn remove(&mut self, pos: usize) {
        let n = self.rows;
        self.r.remove(pos);
        let p = self.passive();
        for j in pos..p {
            // Column j now has length j+2: zero entry j+1 against entry j.
            let (a, b) = (self.r[j][j], self.r[j][j + 1]);
            let h = a.hypot(b);
            let (c, s) = if h == 0.0 { (1.0, 0.0) } else { (a / h, b / h) };
            self.r[j][j] = h;
            self.r[j].pop();
            for col in self.r.iter_mut().skip(j + 1) {
                let (x, y) = (col[j], col[j + 1]);
                col[j] = c * x + s * y;
                col[j + 1] = -s * x + c * y;
            }
            let (x, y) = (self.qtf[j], self.qtf[j + 1]);
            self.qtf[j] = c * x + s * y;
            self.qtf[j + 1] = -s * x + c * y;
            for k in 0..n {
                let (x, y) = (self.qt[j * n + k], self.qt[(j + 1) * n + k]);
                self.qt[j * n + k] = c * x + s * y;
                self.qt[(j + 1) * n + k] = -s * x + c * y;
            }
        }
    }

    /// Least-squares coefficients of the passive columns.
    fn solve(&self) -> Vec<f64> {
        let p = self.passive();
        let mut z = self.qtf[..p].to_vec();
        for i in (0..p).rev() {
            let mut s = z[i];
            for j in i + 1..p {
                s -= self.r[j][i] * z[j];
            }
            z[i] = s / self.r[i][i];
        }
        z
    }
}

/// Solve `min ‖E x − f‖₂` subject to `x ≥ 0`.
pub fn nnls(e: &DMatrix<f64>, f: &DVector<f64>) -> NnlsResult {
    let (rows, cols) = e.shape();
    assert_eq!(f.len(), rows, "nnls: right-hand side length");
    let max_iter = 3 * cols.max(1) + 10;
    let mut x = DVector::zeros(cols);
    let mut in_passive = vec![false; cols];
    let mut order: Vec<usize> = Vec::new();
    let mut factor = Factor::new(rows, f);
    let scale = e.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0) * f.norm().max(1.0);
    let wtol = 1e-13 * scale * (rows.max(cols) as f64);
    let mut iterations = 0;
    let mut converged = false;

    'outer: loop {
        let residual = f - e * &x;
        let w = e.tr_mul(&residual);
        let mut rejected = vec![false; cols];
        loop {
            if iterations >= max_iter {
                break 'outer;
            }
            let mut best = None;
            let mut best_w = wtol;
            for j in 0..cols {
                if !in_passive[j] && !rejected[j] && w[j] > best_w {
                    best_w = w[j];
                    best = Some(j);
                }
            }
            let Some(t) = best else {
                converged = true;
                break 'outer;
            };
            iterations += 1;
            if !factor.push(e.column(t).as_slice()) {
                rejected[t] = true;
                continue;
            }
            let z = factor.solve();
            if z[z.len() - 1] <= 0.0 {
                factor.remove(factor.passive() - 1);
                rejected[t] = true;
                continue;
            }
            in_passive[t] = true;
            order.push(t);
            break;
        }

        loop {
            let z = factor.solve();
            if z.iter().all(|v| *v > 0.0) {
                for (k, &j) in order.iter().enumerate() {
                    x[j] = z[k];
                }
                continue 'outer;
            }
            iterations += 1;
            let mut alpha = f64::INFINITY;
            for (k, &j) in order.iter().enumerate() {
                if z[k] <= 0.0 {
                    let a = x[j] / (x[j] - z[k]);
                    alpha = alpha.min(a);
                }
            }
            for (k, &j) in order.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
            }
            let mut pos = 0;
            while pos < order.len() {
                let j = order[pos];
                if x[j] <= 1e-14 * scale {
                    x[j] = 0.0;
                    in_passive[j] = false;
                    order.remove(pos);
                    factor.remove(pos);
                } else {
                    pos += 1;
                }
            }
            if iterations >= max_iter {
                break 'outer;
            }
        }
    }
    let residual = f - e * &x;
    NnlsResult { residual_norm: residual.norm(), x, residual, iterations, converged }
}
