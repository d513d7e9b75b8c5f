//! Seeded random instances for property suites and default initial data.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{build_model, Model};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

/// Random irreducible off-diagonal rate matrix: a directed cycle through every
/// patch plus sparse extra links.
pub fn random_connectivity<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut raw = DMatrix::zeros(n, n);
    for j in 0..n {
        let next = (j + 1) % n;
        if next != j {
            raw[(next, j)] = rng.random_range(0.1..2.0);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(0.4) {
                raw[(i, j)] += rng.random_range(0.0..2.0);
            }
        }
    }
    raw
}

/// Random model with `n` patches. Rates are drawn so that both sides of the
/// invasion threshold occur with comparable frequency.
pub fn random_model<R: Rng>(rng: &mut R, n: usize) -> Model {
    let raw = random_connectivity(rng, n);
    let beta = DVector::from_fn(n, |_, _| rng.random_range(0.5..3.0));
    let gamma = DVector::from_fn(n, |_, _| rng.random_range(0.5..3.0));
    let ds = log_uniform(rng, 1e-2, 1e1);
    let di = log_uniform(rng, 1e-2, 1e1);
    let total = log_uniform(rng, 0.2, 5.0);
    build_model(&raw, beta, gamma, ds, di, total).expect("random instance is valid")
}

/// Random model with `R0 > 1`, obtained by raising `N` until the threshold is
/// crossed.
pub fn random_supercritical_model<R: Rng>(rng: &mut R, n: usize) -> Model {
    let m = random_model(rng, n);
    let r0 = crate::model::r0(&m).expect("R0 of a valid model");
    if r0 > 1.2 {
        m
    } else {
        // R0 is linear in N
        let factor = rng.random_range(1.5..4.0) / r0;
        m.with_total(m.total() * factor)
    }
}

/// Random `(S0, I0)` with strictly positive entries and total `N`.
pub fn random_interior_state<R: Rng>(rng: &mut R, m: &Model) -> (DVector<f64>, DVector<f64>) {
    let n = m.n();
    let mut s = DVector::from_fn(n, |_, _| rng.random_range(0.05..1.0));
    let mut i = DVector::from_fn(n, |_, _| rng.random_range(0.05..1.0));
    let scale = m.total() / (s.sum() + i.sum());
    s *= scale;
    i *= scale;
    (s, i)
}
