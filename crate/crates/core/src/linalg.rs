//! Dense spectral routines for small matrices and connectivity validation.
//!
//! Perron roots of quasi-positive matrices are computed by power iteration on
//! a diagonally shifted nonnegative matrix, bracketed by Collatz–Wielandt
//! bounds and, when the plain iteration is slow, finished with Noda's
//! shifted inverse iteration. General (non quasi-positive) spectra go through
//! nalgebra's real Schur decomposition.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Absolute tolerance on the column sums of a connectivity matrix.
pub const COLUMN_SUM_TOL: f64 = 1e-12;
/// Relative tolerance on eigen-residuals.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

const POWER_MAX_ITER: usize = 20_000;
const POWER_WARMUP: usize = 400;
const NODA_MAX_ITER: usize = 200;
const BRACKET_TOL: f64 = 1e-14;

/// A validated movement matrix `L` with its normalized Perron vector.
///
/// Off-diagonal entries are nonnegative, every column sums to zero and the
/// movement digraph is strongly connected.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    matrix: DMatrix<f64>,
    alpha: DVector<f64>,
}

impl ConnectivityMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Perron vector: `L alpha = 0`, entries positive, summing to one.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// The principal submatrix on the given patch indices.
    pub fn submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.matrix[(idx[a], idx[b])])
    }
}

/// Builds a connectivity matrix from its off-diagonal movement rates.
///
/// The supplied diagonal is ignored: `L_ii = -sum_{j != i} L_ji`.
pub fn validate_connectivity(off_diagonal: &DMatrix<f64>) -> Result<ConnectivityMatrix> {
    let n = off_diagonal.nrows();
    if n != off_diagonal.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "connectivity matrix must be square, got {}x{}",
            n,
            off_diagonal.ncols()
        )));
    }
    if n < 2 {
        return Err(Error::DimensionMismatch(format!("at least two patches are required, got {n}")));
    }
    let mut matrix = off_diagonal.clone();
    for j in 0..n {
        for i in 0..n {
            if i == j {
                continue;
            }
            let v = matrix[(i, j)];
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("L[{i}][{j}] is not finite")));
            }
            if v < 0.0 {
                return Err(Error::NegativeOffDiagonal { row: i, col: j, value: v });
            }
        }
    }
    for i in 0..n {
        matrix[(i, i)] = 0.0;
        let out: f64 = (0..n).filter(|&j| j != i).map(|j| matrix[(j, i)]).sum();
        matrix[(i, i)] = -out;
    }
    if let Some((from, unreachable)) = reachability_failure(&matrix) {
        return Err(Error::NotIrreducible { from, unreachable });
    }
    for j in 0..n {
        let s: f64 = matrix.column(j).sum();
        debug_assert!(s.abs() <= COLUMN_SUM_TOL * (1.0 + matrix[(j, j)].abs()));
    }
    let alpha = perron_vector(&matrix)?;
    Ok(ConnectivityMatrix { matrix, alpha })
}

/// Checks strong connectivity of the support digraph (edge `j -> i` when
/// `M_ij > 0`, `i != j`) with a forward and a transposed search from patch 0.
///
/// Returns the first `(from, unreachable)` pair found, or `None` when the
/// graph is strongly connected.
pub fn reachability_failure(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    let n = m.nrows();
    // forward: j -> i when m[(i, j)] > 0
    let forward = search(n, |from, to| from != to && m[(to, from)] > 0.0);
    if let Some(u) = forward.iter().position(|&seen| !seen) {
        return Some((0, u));
    }
    let backward = search(n, |from, to| from != to && m[(from, to)] > 0.0);
    if let Some(u) = backward.iter().position(|&seen| !seen) {
        return Some((u, 0));
    }
    None
}

pub fn is_irreducible(m: &DMatrix<f64>) -> bool {
    reachability_failure(m).is_none()
}

fn search(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    search_from(n, 0, edge)
}

#[allow(clippy::needless_range_loop)]
fn search_from(n: usize, start: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for w in 0..n {
            if !seen[w] && edge(v, w) {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Strongly connected components of the directed graph of `m`.
fn strong_components(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let reach: Vec<Vec<bool>> =
        (0..n).map(|s| search_from(n, s, |from, to| from != to && m[(to, from)] > 0.0)).collect();
    let mut assigned = vec![false; n];
    let mut blocks = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let block: Vec<usize> = (i..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &block {
            assigned[j] = true;
        }
        blocks.push(block);
    }
    blocks
}

/// Spectral bound of a reducible quasi-positive matrix as the largest Perron
/// root over its irreducible diagonal blocks.
fn block_spectral_bound(m: &DMatrix<f64>) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for block in strong_components(m) {
        let k = block.len();
        let root = if k == 1 {
            m[(block[0], block[0])]
        } else {
            let sub = DMatrix::from_fn(k, k, |a, b| m[(block[a], block[b])]);
            perron_pair(&sub)?.0
        };
        best = best.max(root);
    }
    Ok(best)
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "expected a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Spectral bound: the largest real part over the spectrum of `m`.
///
/// With `quasi_positive` set the Perron root of the shifted nonnegative matrix
/// is used; otherwise the full spectrum is computed by a dense Schur
/// decomposition.
pub fn spectral_bound(m: &DMatrix<f64>, quasi_positive: bool) -> Result<f64> {
    check_square(m)?;
    if quasi_positive {
        let n = m.nrows();
        for j in 0..n {
            for i in 0..n {
                if i != j && m[(i, j)] < 0.0 {
                    return Err(Error::NegativeOffDiagonal { row: i, col: j, value: m[(i, j)] });
                }
            }
        }
        Ok(perron_pair(m)?.0)
    } else {
        Ok(dense_spectral_bound(m))
    }
}

/// Largest real part of the eigenvalues, from nalgebra's Schur form.
pub fn dense_spectral_bound(m: &DMatrix<f64>) -> f64 {
    m.clone().complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral radius of an entrywise nonnegative matrix (its Perron root).
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    check_square(m)?;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] < 0.0 {
                return Err(Error::NegativeEntry { row: i, col: j, value: m[(i, j)] });
            }
        }
    }
    Ok(perron_pair(m)?.0.max(0.0))
}

/// Normalized positive null vector of a raw connectivity matrix.
///
/// Requires zero column sums, quasi-positivity and irreducibility.
pub fn perron_vector(l: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_square(l)?;
    if let Some((from, unreachable)) = reachability_failure(l) {
        return Err(Error::NotIrreducible { from, unreachable });
    }
    let (_, mut v) = perron_pair(l)?;
    // Null vector is known exactly; one inverse step at zero shift removes the
    // residual left by the bracket tolerance.
    polish_null_vector(l, &mut v);
    let norm = max_abs(l);
    let resid = (l * &v).amax();
    if resid > EIGEN_RESIDUAL_TOL * norm.max(f64::MIN_POSITIVE) || v.iter().any(|&a| a <= 0.0) {
        return Err(Error::NoConvergence { routine: "perron_vector", iterations: POWER_MAX_ITER });
    }
    Ok(v)
}

fn polish_null_vector(l: &DMatrix<f64>, v: &mut DVector<f64>) {
    // Replace the last equation by the normalization sum(v) = 1.
    let n = l.nrows();
    let mut a = l.clone();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    if let Some(x) = a.lu().solve(&rhs) {
        if x.iter().all(|&t| t > 0.0) && (l * &x).amax() <= (l * &*v).amax() {
            *v = x;
        }
    }
}

/// Perron root and vector (normalized to sum one) of a quasi-positive matrix.
pub fn perron_pair(m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let n = m.nrows();
    let scale = max_abs(m);
    if scale == 0.0 {
        return Ok((0.0, DVector::from_element(n, 1.0 / n as f64)));
    }
    let max_diag = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    let shift = max_diag + scale;
    let mut b = m.clone();
    for i in 0..n {
        b[(i, i)] += shift;
    }
    let tol = BRACKET_TOL * scale.max(shift);
    let irreducible = is_irreducible(m);

    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut history = [f64::NAN; 4];
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for it in 0..POWER_MAX_ITER {
        let y = &b * &x;
        let (clo, chi) = collatz_wielandt(&x, &y);
        lo = lo.max(clo);
        hi = hi.min(chi);
        let est = y.sum() / x.sum();
        history.rotate_left(1);
        history[3] = est;
        let s = y.sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NoConvergence { routine: "power iteration", iterations: it });
        }
        x = y / s;
        if hi - lo <= tol {
            return Ok(((0.5 * (lo + hi)) - shift, x));
        }
        let stalled = history.windows(2).all(|w| (w[1] - w[0]).abs() <= 1e-12 * w[1].abs());
        if stalled && it >= 3 {
            // Reducible inputs may never close the bracket; relative stagnation
            // over three consecutive iterates is accepted instead.
            if !irreducible {
                return Ok((block_spectral_bound(m)?, x));
            }
        }
        if it == POWER_WARMUP && irreducible {
            return noda(m, x, hi - shift, tol);
        }
    }
    if !irreducible {
        return Ok((block_spectral_bound(m)?, x));
    }
    Err(Error::NoConvergence { routine: "power iteration", iterations: POWER_MAX_ITER })
}

fn collatz_wielandt(x: &DVector<f64>, y: &DVector<f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (xi, yi) in x.iter().zip(y.iter()) {
        if *xi > 0.0 {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        } else {
            lo = f64::NEG_INFINITY;
        }
    }
    (lo, hi)
}

/// Noda iteration for irreducible quasi-positive `m`: inverse iteration with
/// the shift updated to the current Collatz–Wielandt upper bound.
fn noda(m: &DMatrix<f64>, mut x: DVector<f64>, mut upper: f64, tol: f64) -> Result<(f64, DVector<f64>)> {
    let n = m.nrows();
    let mut lower = f64::NEG_INFINITY;
    for _ in 0..NODA_MAX_ITER {
        let mu = upper + tol;
        let mut a = -m.clone();
        for i in 0..n {
            a[(i, i)] += mu;
        }
        let y = match a.lu().solve(&x) {
            Some(y) => y,
            None => break,
        };
        let s = y.sum();
        if !(s > 0.0) || y.iter().any(|&v| v <= 0.0) {
            break;
        }
        x = y / s;
        let mx = m * &x;
        let (lo, hi) = collatz_wielandt(&x, &mx);
        lower = lower.max(lo);
        upper = upper.min(hi);
        if upper - lower <= tol {
            return Ok((0.5 * (lower + upper), x));
        }
    }
    if upper - lower <= 1e3 * tol {
        return Ok((0.5 * (lower + upper), x));
    }
    Err(Error::NoConvergence { routine: "noda iteration", iterations: NODA_MAX_ITER })
}

/// Solves `a x = b` by LU; a zero pivot is reported as a singular system.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, context: &'static str) -> Result<DVector<f64>> {
    let x = a.clone().lu().solve(b).ok_or(Error::SingularSystem(context))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::SingularSystem(context))
    }
}

/// Solves `a X = B` column by column.
pub fn solve_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    let x = a.clone().lu().solve(b).ok_or(Error::SingularSystem(context))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::SingularSystem(context))
    }
}
