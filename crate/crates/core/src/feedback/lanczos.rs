//! Sparse symmetric matrices and a Lanczos solver for their largest
//! eigenpairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FeedbackError;

/// Symmetric matrix stored as per-row `(column, value)` lists, each list
/// sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSymmetric {
    pub fn zeros(dim: usize) -> Self {
        Self {
            rows: vec![Vec::new(); dim],
        }
    }

    /// Builds from upper-or-lower triangle entries; each `(i, j, x)` sets
    /// both `(i, j)` and `(j, i)`. Zeros are dropped, duplicates summed.
    pub fn from_entries(
        dim: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut rows = vec![Vec::new(); dim];
        for (i, j, x) in entries {
            assert!(i < dim && j < dim, "entry ({i}, {j}) outside {dim}x{dim}");
            if x == 0.0 {
                continue;
            }
            rows[i].push((j, x));
            if i != j {
                rows[j].push((i, x));
            }
        }
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            row.retain(|&(_, x)| x != 0.0);
        }
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => self.rows[i][k].1,
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .map(|&(_, x)| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (yi, row) in y.iter_mut().zip(&self.rows) {
            *yi = row.iter().map(|&(c, a)| a * x[c]).sum();
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = vec![vec![0.0; n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, x) in row {
                out[i][j] = x;
            }
        }
        out
    }
}

/// Eigenvalues in descending order with matching unit eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Default Lanczos iteration cap for `r` requested modes.
pub fn default_lanczos_cap(r: usize, dim: usize) -> usize {
    (2 * r + 30).min(dim)
}

/// Relative residual accepted for a returned eigenpair.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

const START_SEED: u64 = 0x1a2c_205e_ed00_0001;

/// Residual the restart loop aims for; only pairs worse than
/// [`RESIDUAL_TOLERANCE`] count as failures.
const CONVERGENCE_TARGET: f64 = 1e-10;

/// Restart cycles before giving up on convergence.
const MAX_RESTARTS: usize = 200;

/// The `r` algebraically largest eigenpairs of `a`.
///
/// Lanczos with full reorthogonalization and thick restarts: the Krylov
/// basis holds at most `iters` vectors; when the top Ritz pairs have not
/// converged, the basis is shrunk to the best Ritz vectors and regrown from
/// the leading residual. The start vector is a fixed pseudo-random vector,
/// and invariant subspaces found early are extended with fresh random
/// directions, so `iters = dim` yields the full spectrum in one cycle.
///
/// Iteration continues until the top residuals drop below `1e-10 |A|_F`;
/// a pair left above `1e-6 |A|_F` is reported as a convergence failure.
/// Vectors are sign-normalized so their largest-magnitude component
/// (lowest index on ties) is positive.
pub fn top_eigenpairs(
    a: &SparseSymmetric,
    r: usize,
    iters: usize,
) -> Result<SpectralResult, FeedbackError> {
    let n = a.dim();
    let r = r.min(n);
    if r == 0 {
        return Ok(SpectralResult {
            values: vec![],
            vectors: vec![],
        });
    }
    let m = iters.max(r + 1).min(n);
    let keep = (m / 2).max(r).min(m.saturating_sub(1)).max(1);
    let norm = a.frobenius_norm();
    let tol = RESIDUAL_TOLERANCE * norm;
    let target = CONVERGENCE_TARGET * norm;
    let breakdown = 1e-12 * norm.max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);

    let apply = |q: &[f64]| {
        let mut y = vec![0.0; n];
        a.mul_vec(q, &mut y);
        y
    };
    let q0 = fresh_direction(&[], n, &mut rng).expect("nonempty space");
    let mut basis = vec![q0];
    let mut images = vec![apply(&basis[0])];
    let mut pending: Option<Vec<f64>> = None;

    for cycle in 0..=MAX_RESTARTS {
        // Grow the basis: each new direction is A times the newest vector
        // (or the restart residual), orthogonalized against everything.
        while basis.len() < m {
            let mut w = pending
                .take()
                .unwrap_or_else(|| images.last().unwrap().clone());
            orthogonalize(&basis, &mut w);
            let len = norm2(&w);
            let q = if len > breakdown {
                w.iter().map(|x| x / len).collect()
            } else {
                match fresh_direction(&basis, n, &mut rng) {
                    Some(q) => q,
                    None => break,
                }
            };
            images.push(apply(&q));
            basis.push(q);
        }

        let k = basis.len();
        let mut h = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i..k {
                let x = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                h[i][j] = x;
                h[j][i] = x;
            }
        }
        let (theta, y) = jacobi_eigen(h);
        let mut idx: Vec<usize> = (0..k).collect();
        idx.sort_by(|&p, &q| theta[q].total_cmp(&theta[p]).then(p.cmp(&q)));

        let ritz = |c: usize| {
            let mut x = vec![0.0; n];
            let mut ax = vec![0.0; n];
            for row in 0..k {
                axpy(y[row][c], &basis[row], &mut x);
                axpy(y[row][c], &images[row], &mut ax);
            }
            (x, ax)
        };
        let mut vectors = Vec::with_capacity(keep);
        let mut first_open = None;
        for (rank, &c) in idx.iter().take(keep.max(r)).enumerate() {
            let (x, ax) = ritz(c);
            if rank < r && first_open.is_none() {
                let res: Vec<f64> = ax.iter().zip(&x).map(|(p, q)| p - theta[c] * q).collect();
                if norm2(&res) > target {
                    first_open = Some(res);
                }
            }
            vectors.push((theta[c], x, ax));
        }

        let exhausted = k == n || cycle == MAX_RESTARTS;
        if first_open.is_none() || exhausted {
            return finish(a, vectors.into_iter().take(r), tol);
        }
        basis = vectors
            .iter()
            .take(keep)
            .map(|(_, x, _)| x.clone())
            .collect();
        images = vectors
            .into_iter()
            .take(keep)
            .map(|(_, _, ax)| ax)
            .collect();
        // Re-orthonormalize the kept Ritz vectors against rounding drift.
        for i in 0..basis.len() {
            let (done, rest) = basis.split_at_mut(i);
            orthogonalize(done, &mut rest[0]);
            let len = norm2(&rest[0]);
            rest[0].iter_mut().for_each(|x| *x /= len);
            images[i] = apply(&basis[i]);
        }
        pending = first_open;
    }
    unreachable!("the final cycle always returns")
}

/// Checks residuals directly, normalizes signs and packs the result.
fn finish(
    a: &SparseSymmetric,
    pairs: impl Iterator<Item = (f64, Vec<f64>, Vec<f64>)>,
    tol: f64,
) -> Result<SpectralResult, FeedbackError> {
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    let mut av = vec![0.0; a.dim()];
    for (lambda, mut v, _) in pairs {
        let len = norm2(&v);
        v.iter_mut().for_each(|x| *x /= len);
        a.mul_vec(&v, &mut av);
        let residual = av
            .iter()
            .zip(&v)
            .map(|(p, q)| (p - lambda * q).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual > tol {
            return Err(FeedbackError::ConvergenceFailure(values.len()));
        }
        normalize_sign(&mut v);
        values.push(lambda);
        vectors.push(v);
    }
    Ok(SpectralResult { values, vectors })
}

/// Two passes of classical Gram-Schmidt.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

/// Random unit vector orthogonal to `basis`, or `None` once the basis spans
/// the space.
fn fresh_direction(basis: &[Vec<f64>], n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    if basis.len() >= n {
        return None;
    }
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(basis, &mut v);
        let len = norm2(&v);
        if len > 1e-8 {
            v.iter_mut().for_each(|x| *x /= len);
            return Some(v);
        }
    }
    None
}

fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Cyclic Jacobi eigendecomposition of a small dense symmetric matrix.
/// Returns eigenvalues and the eigenvector matrix (eigenvectors in columns).
pub(crate) fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_two_by_two() {
        let a = SparseSymmetric::from_entries(2, [(0, 0, 2.0), (1, 1, 1.0)]);
        let res = top_eigenpairs(&a, 1, 2).unwrap();
        assert!((res.values[0] - 2.0).abs() < 1e-12);
        assert!((res.vectors[0][0].abs() - 1.0).abs() < 1e-12);
        assert!(res.vectors[0][1].abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_gives_zero_eigenvalue() {
        let a = SparseSymmetric::zeros(5);
        let res = top_eigenpairs(&a, 2, 5).unwrap();
        assert_eq!(res.values, vec![0.0, 0.0]);
        let len: f64 = res.vectors[0].iter().map(|x| x * x).sum();
        assert!((len - 1.0).abs() < 1e-9);
    }

    #[test]
    fn off_diagonal_pair() {
        // [[0, d], [d, 0]] has eigenvalues +-d with v1 = (1, 1) / sqrt 2.
        let a = SparseSymmetric::from_entries(3, [(0, 2, 4.0)]);
        let res = top_eigenpairs(&a, 1, 3).unwrap();
        assert!((res.values[0] - 4.0).abs() < 1e-10);
        let h = 0.5f64.sqrt();
        assert!((res.vectors[0][0] - h).abs() < 1e-9);
        assert!(res.vectors[0][1].abs() < 1e-9);
        assert!((res.vectors[0][2] - h).abs() < 1e-9);
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = vec![
            vec![4.0, 1.0, -2.0],
            vec![1.0, 2.0, 0.0],
            vec![-2.0, 0.0, 3.0],
        ];
        let (w, v) = jacobi_eigen(a.clone());
        for i in 0..3 {
            for j in 0..3 {
                let x: f64 = (0..3).map(|k| v[i][k] * w[k] * v[j][k]).sum();
                assert!((x - a[i][j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn entries_are_symmetrized_and_merged() {
        let a = SparseSymmetric::from_entries(3, [(0, 1, 1.0), (1, 0, 2.0), (2, 2, 0.0)]);
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.get(1, 0), 3.0);
        assert_eq!(a.nnz(), 2);
        assert!(!a.is_zero());
    }
}
