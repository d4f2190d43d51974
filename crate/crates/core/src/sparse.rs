//! Compressed sparse row storage and a Jacobi-preconditioned conjugate
//! gradient solver.
//!
//! Both the flow and mechanics systems are symmetric positive definite once
//! boundary conditions are applied, so a single CG routine serves both. The
//! summation order inside every kernel is fixed, which makes repeated solves
//! bit-identical for identical inputs.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("right-hand side has length {got}, matrix has {expected} rows")]
    SizeMismatch { expected: usize, got: usize },
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    Diverged { iterations: usize, residual: f64 },
    #[error("matrix is not positive definite (search direction with p^T A p = {curvature:e})")]
    Indefinite { curvature: f64 },
    #[error("zero or negative diagonal entry {value:e} in row {row}")]
    BadDiagonal { row: usize, value: f64 },
}

/// Accumulates `(row, col, value)` entries; duplicates are summed in
/// insertion order when converted to CSR.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CsrMatrix {
        // stable sort keeps insertion order among duplicates
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Square sparse matrix in CSR layout with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of `row` as `(col, value)`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[span.clone()].binary_search(&col) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Largest absolute difference between the matrix and its transpose.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        dense
    }
}

/// Stopping rule and iteration cap for [`cg_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    pub rel_tol: f64,
    /// `None` means `10 * n`.
    pub max_iter: Option<usize>,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual(a: &CsrMatrix, x: &[f64], b: &[f64], r: &mut [f64]) {
    a.matvec(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Solves `A x = b` for SPD `A` with diagonal preconditioning, starting from
/// `x0` (zero when `None`). Converged means `‖b − A x‖ ≤ rel_tol · ‖b‖`,
/// checked against the true residual before returning.
pub fn cg_solve(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    settings: CgSettings,
) -> Result<CgOutcome, SolveError> {
    let n = a.nrows();
    if b.len() != n {
        return Err(SolveError::SizeMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(SolveError::SizeMismatch {
                expected: n,
                got: x0.len(),
            });
        }
    }
    let inv_diag = a
        .diagonal()
        .into_iter()
        .enumerate()
        .map(|(row, d)| {
            if d > 0.0 && d.is_finite() {
                Ok(1.0 / d)
            } else {
                Err(SolveError::BadDiagonal { row, value: d })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let target = settings.rel_tol * b_norm;
    let max_iter = settings.max_iter.unwrap_or(10 * n.max(1));

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    // Outer loop restarts from the true residual whenever the recurrence
    // claims convergence that the true residual does not confirm.
    loop {
        true_residual(a, &x, b, &mut r);
        let mut r_norm = norm2(&r);
        if r_norm <= target {
            return Ok(CgOutcome {
                x,
                iterations,
                rel_residual: r_norm / b_norm,
            });
        }
        if iterations >= max_iter {
            return Err(SolveError::Diverged {
                iterations,
                residual: r_norm / b_norm,
            });
        }
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            a.matvec(&p, &mut ap);
            let curvature = dot(&p, &ap);
            if curvature <= 0.0 || !curvature.is_finite() {
                return Err(SolveError::Indefinite { curvature });
            }
            let alpha = rz / curvature;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            r_norm = norm2(&r);
            if r_norm <= target {
                break;
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicates_are_summed() {
        let mut t = TripletBuilder::new(2);
        t.add(1, 0, 1.0);
        t.add(0, 0, 2.0);
        t.add(1, 0, 0.5);
        let m = t.build();
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(1, 0), 1.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.5, 0.0, 7.0];
        let out = cg_solve(&a, &b, None, CgSettings::default()).unwrap();
        assert_eq!(out.x, b);
    }

    #[test]
    fn two_by_two_hand_solution() {
        let mut t = TripletBuilder::new(2);
        t.add(0, 0, 2.0);
        t.add(0, 1, -1.0);
        t.add(1, 0, -1.0);
        t.add(1, 1, 2.0);
        let out = cg_solve(&t.build(), &[1.0, 0.0], None, CgSettings::default()).unwrap();
        assert!((out.x[0] - 2.0 / 3.0).abs() < 1e-10);
        assert!((out.x[1] - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn random_spd_meets_residual_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10;
        let g: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut t = TripletBuilder::new(n);
        for i in 0..n {
            for j in 0..n {
                let mut v: f64 = (0..n).map(|k| g[k][i] * g[k][j]).sum();
                if i == j {
                    v += 0.1;
                }
                t.add(i, j, v);
            }
        }
        let a = t.build();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = cg_solve(&a, &b, None, CgSettings::default()).unwrap();
        let ax = a.mul(&out.x);
        let res: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&res) <= 1e-10 * norm2(&b));
        let again = cg_solve(&a, &b, None, CgSettings::default()).unwrap();
        assert_eq!(out.x, again.x);
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let mut t = TripletBuilder::new(2);
        t.add(0, 0, 1.0);
        t.add(0, 1, 2.0);
        t.add(1, 0, 2.0);
        t.add(1, 1, 1.0);
        let err = cg_solve(&t.build(), &[1.0, -1.0], None, CgSettings::default()).unwrap_err();
        assert!(matches!(err, SolveError::Indefinite { .. }));
    }

    #[test]
    fn iteration_cap_is_enforced() {
        let n = 50;
        let mut t = TripletBuilder::new(n);
        for i in 0..n {
            t.add(i, i, 2.0 + i as f64);
            if i + 1 < n {
                t.add(i, i + 1, -1.0);
                t.add(i + 1, i, -1.0);
            }
        }
        let b = vec![1.0; n];
        let settings = CgSettings {
            rel_tol: 1e-14,
            max_iter: Some(2),
        };
        let err = cg_solve(&t.build(), &b, None, settings).unwrap_err();
        assert!(matches!(err, SolveError::Diverged { iterations: 2, .. }));
    }
}
