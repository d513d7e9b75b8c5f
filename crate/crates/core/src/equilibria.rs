//! Endemic equilibria through the scalar reduction in `l`.
//!
//! For every `l > 1/R0` the logistic-type system
//!
//! ```text
//! dI L U + (l beta ∘ (N alpha - dI U) - gamma) ∘ U = 0
//! ```
//!
//! has a unique positive solution `U^l`. Endemic equilibria are exactly the
//! points `(S, I) = (l (N alpha - dI U^l), dS l U^l)` where the balance
//! function `F(dS, l) = sum_j l (N alpha_j - dI U_j^l) + dS l sum_j U_j^l`
//! equals `N`, so enumerating equilibria reduces to scalar root finding.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, EquilibriumKind, Model};

/// Default number of scan points for the balance function.
pub const DEFAULT_SCAN_POINTS: usize = 400;
/// Relative tolerance of the bisection refinement in `l`.
pub const ROOT_REL_TOL: f64 = 1e-12;
/// Roots closer than this (relative, in `l`) are merged.
pub const MERGE_REL_TOL: f64 = 1e-8;
/// Accepted `|F(dS, l) - N| / N` at a root.
pub const BALANCE_TOL: f64 = 1e-9;
/// Jacobian spectral bounds within this band are reported as marginal.
pub const STABILITY_BAND: f64 = 1e-8;

const FAMILY_MAX_ITER: usize = 3000;
const SCAN_T_MIN: f64 = 1e-6;

/// Positive solution of the family equation at a given `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySolution {
    pub l: f64,
    pub u: DVector<f64>,
    /// `Z^l = l (N alpha - dI U^l)`.
    pub z: DVector<f64>,
    /// Infinity norm of the family-equation residual.
    pub residual: f64,
}

impl FamilySolution {
    /// `N(l) = sum_j Z_j^l`.
    pub fn capital_n(&self) -> f64 {
        self.z.sum()
    }

    /// `F(dS, l) = N(l) + dS l sum_j U_j^l`.
    pub fn balance(&self, ds: f64) -> f64 {
        self.capital_n() + ds * self.l * self.u.sum()
    }
}

/// Local stability of an equilibrium on the invariant simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn from_bound(sigma: f64) -> Stability {
        if sigma < -STABILITY_BAND {
            Stability::Stable
        } else if sigma > STABILITY_BAND {
            Stability::Unstable
        } else {
            Stability::Marginal
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        }
    }
}

/// An equilibrium `(S, I)` together with its scalar coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    pub s: DVector<f64>,
    pub i: DVector<f64>,
    /// Scalar coordinate `l = kappa* / dS`; absent for the DFE.
    pub l: Option<f64>,
    /// `kappa*` with `kappa* N alpha = dS S + dI I`.
    pub kappa_star: f64,
    pub kind: EquilibriumKind,
    pub stability: Stability,
    /// Spectral bound of the Jacobian restricted to the invariant hyperplane.
    pub jacobian_bound: f64,
    /// Root found as a tangential touch of `F = N` rather than a sign change.
    pub marginal_root: bool,
}

fn family_residual(m: &Model, l: f64, u: &DVector<f64>) -> DVector<f64> {
    let mut f = m.l() * u * m.di();
    let (a, b, g) = (m.alpha(), m.beta(), m.gamma());
    let n_total = m.total();
    for j in 0..m.n() {
        f[j] += (l * b[j] * (n_total * a[j] - m.di() * u[j]) - g[j]) * u[j];
    }
    f
}

fn family_jacobian(m: &Model, l: f64, u: &DVector<f64>) -> DMatrix<f64> {
    let mut j = m.l() * m.di();
    let (a, b, g) = (m.alpha(), m.beta(), m.gamma());
    for k in 0..m.n() {
        j[(k, k)] += l * b[k] * (m.total() * a[k] - 2.0 * m.di() * u[k]) - g[k];
    }
    j
}

fn family_scale(m: &Model, l: f64) -> f64 {
    1.0 + m.gamma().amax() + l * m.beta().amax() * m.total() * m.alpha().amax() + m.di() * m.l().amax()
}

/// Residual bound a family solution must satisfy.
pub fn family_residual_bound(m: &Model, u: &DVector<f64>) -> f64 {
    1e-9 * (1.0 + m.gamma().amax()) * u.amax()
}

/// Starting vector for the family solve.
///
/// Uses the subsolution `(lN - (r/alpha)_M) / (l dI) alpha` when it is
/// positive; otherwise the small-amplitude bifurcation estimate `c phi`,
/// where `phi` is the Perron vector of the linearization at zero.
fn initial_guess(m: &Model, l: f64) -> DVector<f64> {
    let sub = (l * m.total() - m.max_risk_ratio()) / (l * m.di());
    let cap = m.total() / m.di();
    let eps = 1e-6 * cap;
    if sub > eps {
        return m.alpha() * sub;
    }
    let a = m.infection_operator(l * m.total());
    let guess = (|| {
        let (sigma, phi) = linalg::perron_pair(&a).ok()?;
        let (_, psi) = linalg::perron_pair(&a.transpose()).ok()?;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..m.n() {
            num += psi[j] * phi[j];
            den += psi[j] * l * m.beta()[j] * m.di() * phi[j] * phi[j];
        }
        let c = sigma * num / den;
        if c.is_finite() && c > 0.0 {
            let mut g = phi * c;
            for j in 0..m.n() {
                g[j] = g[j].min(0.9 * cap * m.alpha()[j]).max(eps * m.alpha()[j]);
            }
            Some(g)
        } else {
            None
        }
    })();
    guess.unwrap_or_else(|| m.alpha() * eps)
}

/// Solves the family equation at `l`.
pub fn solve_family(m: &Model, l: f64) -> Result<FamilySolution> {
    solve_family_from(m, l, None)
}

/// Solves the family equation at `l`, optionally warm-started.
///
/// A positive solution exists iff `sigma*(dI L + diag(l N alpha ∘ beta - gamma)) > 0`.
/// The solve marches the cooperative flow with linearly implicit
/// (pseudo-transient) steps whose step length grows as the residual falls,
/// so the iteration turns into Newton's method near the solution. Steps that
/// would leave the positive cone are rejected and retried with a shorter
/// pseudo-time step.
pub fn solve_family_from(m: &Model, l: f64, guess: Option<&DVector<f64>>) -> Result<FamilySolution> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidArgument(format!("l must be positive, got {l}")));
    }
    let a0 = m.infection_operator(l * m.total());
    let sigma0 = linalg::spectral_bound(&a0, true)?;
    if sigma0 <= 0.0 {
        let r0 = model::r0(m).unwrap_or(f64::NAN);
        return Err(Error::NoPositiveSolution { l, l_r0: l * r0 });
    }

    let n = m.n();
    let n_alpha = m.alpha() * m.total();
    let cap = m.total() / m.di();
    let (start, warm) = match guess {
        Some(g) if g.len() == n && g.iter().all(|&x| x > 0.0 && x.is_finite()) => {
            let mut g = g.clone();
            for j in 0..n {
                g[j] = g[j].min(cap * m.alpha()[j] * (1.0 - 1e-12));
            }
            (g, true)
        }
        _ => (initial_guess(m, l), false),
    };

    // Near saturation (dI U close to N alpha) the slack W = N alpha - dI U is
    // the well-conditioned unknown; near the threshold U itself is.
    let saturated = |u: &DVector<f64>| (0..n).any(|j| m.di() * u[j] > 0.5 * n_alpha[j]);
    let scale = family_scale(m, l);
    let u_flow = |u: &DVector<f64>| family_residual(m, l, u);
    let u_jac = |u: &DVector<f64>| family_jacobian(m, l, u);
    let u_ok = |u: &DVector<f64>| u.iter().all(|&x| x > 0.0);
    let mut u = pseudo_transient(start, warm, scale, 1e-15 * scale, u_flow, u_jac, u_ok);

    let (w, residual) = if saturated(&u) {
        let w0 = (&n_alpha - &u * m.di()).map(|x| x.max(f64::MIN_POSITIVE));
        let w = pseudo_transient(
            w0,
            true,
            scale,
            1e-15 * scale,
            |w| slack_flow(m, l, w),
            |w| slack_jacobian(m, l, w),
            |w| (0..n).all(|j| w[j] > 0.0 && w[j] < n_alpha[j]),
        );
        u = (&n_alpha - &w) / m.di();
        let res = slack_flow(m, l, &w).amax() / m.di();
        (w, res)
    } else {
        let res = family_residual(m, l, &u).amax();
        (&n_alpha - &u * m.di(), res)
    };

    if !(residual <= family_residual_bound(m, &u)) || u.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NoConvergence { routine: "family solve", iterations: FAMILY_MAX_ITER });
    }
    Ok(FamilySolution { l, u, z: w * l, residual })
}

/// `W' = dI L W - (l beta ∘ W - gamma) ∘ (N alpha - W)`: the family flow in the
/// slack variable `W = N alpha - dI U`.
fn slack_flow(m: &Model, l: f64, w: &DVector<f64>) -> DVector<f64> {
    let mut f = m.l() * w * m.di();
    for j in 0..m.n() {
        let na = m.total() * m.alpha()[j];
        f[j] -= (l * m.beta()[j] * w[j] - m.gamma()[j]) * (na - w[j]);
    }
    f
}

fn slack_jacobian(m: &Model, l: f64, w: &DVector<f64>) -> DMatrix<f64> {
    let mut j = m.l() * m.di();
    for k in 0..m.n() {
        let na = m.total() * m.alpha()[k];
        j[(k, k)] -= l * m.beta()[k] * (na - 2.0 * w[k]) + m.gamma()[k];
    }
    j
}

/// Pseudo-transient continuation for `x' = f(x)` towards a stable steady state.
///
/// Each step solves `(I/tau - J) dx = f`; `tau` grows as the relative
/// residual falls so the iteration becomes Newton's method, and shrinks when
/// a step leaves the admissible set. A `warm` start begins with pure Newton
/// steps. Returns the last accepted iterate.
pub(crate) fn pseudo_transient(
    mut x: DVector<f64>,
    warm: bool,
    scale: f64,
    target: f64,
    flow: impl Fn(&DVector<f64>) -> DVector<f64>,
    jac: impl Fn(&DVector<f64>) -> DMatrix<f64>,
    admissible: impl Fn(&DVector<f64>) -> bool,
) -> DVector<f64> {
    let n = x.len();
    let mut f = flow(&x);
    let mut rel = f.amax() / x.amax();
    let tau_max = 1e30 / scale;
    let mut tau = if warm { tau_max } else { 1.0 / scale };
    let mut stalls = 0;
    for _ in 0..FAMILY_MAX_ITER {
        if rel <= target {
            break;
        }
        let mut a = -jac(&x);
        let inv_tau = if tau >= tau_max { 0.0 } else { 1.0 / tau };
        for k in 0..n {
            a[(k, k)] += inv_tau;
        }
        let step = match a.lu().solve(&f) {
            Some(d) if d.iter().all(|v| v.is_finite()) => d,
            _ => {
                tau *= 0.25;
                continue;
            }
        };
        let trial = &x + &step;
        if !admissible(&trial) {
            tau *= 0.25;
            if tau < 1e-30 / scale {
                break;
            }
            continue;
        }
        let f_new = flow(&trial);
        let rel_new = f_new.amax() / trial.amax();
        if rel_new > 4.0 * rel && inv_tau == 0.0 {
            // Newton overshoot: fall back to a finite pseudo-time step.
            tau = 1.0 / scale.max(rel);
            continue;
        }
        // Keep growing through transient phases where the relative residual
        // plateaus (exponential growth away from a subsolution).
        let growth = if rel_new < rel {
            (rel / rel_new).clamp(2.0, 1e3)
        } else if rel_new < 2.0 * rel {
            1.2
        } else {
            0.5
        };
        tau = (tau * growth).min(tau_max);
        // at the rounding floor the residual stops improving
        if inv_tau == 0.0 && rel_new >= 0.5 * rel {
            stalls += 1;
        } else {
            stalls = 0;
        }
        x = trial;
        f = f_new;
        rel = rel_new;
        if stalls >= 3 {
            break;
        }
    }
    x
}

/// `N(l) = l sum_j (N alpha_j - dI U_j^l)`.
pub fn capital_n(m: &Model, l: f64) -> Result<f64> {
    Ok(solve_family(m, l)?.capital_n())
}

/// `F(dS, l) = N(l) + dS l sum_j U_j^l`, strictly increasing in `dS`.
pub fn balance_f(m: &Model, ds: f64, l: f64) -> Result<f64> {
    Ok(solve_family(m, l)?.balance(ds))
}

/// Steady-state residual of the full model at `(S, I)` in the infinity norm.
pub fn steady_state_residual(m: &Model, s: &DVector<f64>, i: &DVector<f64>) -> f64 {
    let infection = m.beta().component_mul(s).component_mul(i);
    let recovery = m.gamma().component_mul(i);
    let ds_eq = m.l() * s * m.ds() - &infection + &recovery;
    let di_eq = m.l() * i * m.di() + &infection - &recovery;
    ds_eq.amax().max(di_eq.amax())
}

/// Bound on [`steady_state_residual`] accepted for an equilibrium.
pub fn steady_state_bound(m: &Model) -> f64 {
    let n = m.total();
    1e-9 * n * (1.0 + m.beta().amax() * n + m.gamma().amax())
}

/// Jacobian of the full model at `(S, I)`, ordered `(S, I)`.
pub fn jacobian(m: &Model, s: &DVector<f64>, i: &DVector<f64>) -> DMatrix<f64> {
    let n = m.n();
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    let l = m.l();
    for r in 0..n {
        for c in 0..n {
            j[(r, c)] = m.ds() * l[(r, c)];
            j[(n + r, n + c)] = m.di() * l[(r, c)];
        }
        let (b, g) = (m.beta()[r], m.gamma()[r]);
        j[(r, r)] -= b * i[r];
        j[(r, n + r)] = g - b * s[r];
        j[(n + r, r)] = b * i[r];
        j[(n + r, n + r)] += b * s[r] - g;
    }
    j
}

/// Local stability from the Jacobian restricted to `sum (S + I) = N`.
///
/// The conserved total makes `1` a left null vector of the Jacobian, so the
/// hyperplane `1^T x = 0` is invariant; the spectrum on it is obtained from
/// `Q^T J Q` with `Q` an orthonormal basis of the hyperplane.
pub fn jacobian_stability(m: &Model, s: &DVector<f64>, i: &DVector<f64>) -> (Stability, f64) {
    let j = jacobian(m, s, i);
    let dim = j.nrows();
    // Householder reflector mapping e_1 onto 1/sqrt(dim); its remaining
    // columns span the hyperplane orthogonal to the ones vector.
    let mut v = DVector::from_element(dim, -1.0 / (dim as f64).sqrt());
    v[0] += 1.0;
    let h = DMatrix::identity(dim, dim) - (&v * v.transpose()) * (2.0 / v.norm_squared());
    let q = h.columns(1, dim - 1).into_owned();
    let restricted = q.transpose() * j * &q;
    let sigma = linalg::dense_spectral_bound(&restricted);
    (Stability::from_bound(sigma), sigma)
}

/// Assembles the endemic equilibrium at a root `l` of `F(dS, l) = N`.
pub fn ee_from_l(m: &Model, l: f64) -> Result<EquilibriumSolution> {
    let fam = solve_family(m, l)?;
    ee_from_family(m, &fam, false)
}

fn ee_from_family(m: &Model, fam: &FamilySolution, marginal_root: bool) -> Result<EquilibriumSolution> {
    let defect = (fam.balance(m.ds()) - m.total()).abs();
    if defect > BALANCE_TOL * m.total() {
        return Err(Error::NotARoot { l: fam.l, defect });
    }
    let s = fam.z.clone();
    let i = &fam.u * (m.ds() * fam.l);
    let res = steady_state_residual(m, &s, &i);
    if res > steady_state_bound(m) {
        return Err(Error::NoConvergence { routine: "equilibrium assembly", iterations: 0 });
    }
    let (stability, jacobian_bound) = jacobian_stability(m, &s, &i);
    Ok(EquilibriumSolution {
        s,
        i,
        l: Some(fam.l),
        kappa_star: fam.l * m.ds(),
        kind: EquilibriumKind::Ee,
        stability,
        jacobian_bound,
        marginal_root,
    })
}

/// The disease-free equilibrium with its local stability.
pub fn dfe_solution(m: &Model) -> EquilibriumSolution {
    let (s, i) = model::dfe(m);
    let (stability, jacobian_bound) = jacobian_stability(m, &s, &i);
    EquilibriumSolution {
        s,
        i,
        l: None,
        kappa_star: m.ds(),
        kind: EquilibriumKind::Dfe,
        stability,
        jacobian_bound,
        marginal_root: false,
    }
}

/// Options for the root scan of the balance function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub points: usize,
    /// Upper end of the scanned `l` interval; derived from a lower bound on
    /// `F` when absent.
    pub l_cap: Option<f64>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { points: DEFAULT_SCAN_POINTS, l_cap: None }
    }
}

/// `l` beyond which `F(dS, l) > N` is guaranteed.
///
/// Follows from `Z^l >= (r/alpha)_m alpha` and the subsolution
/// `U^l >= (lN - (r/alpha)_M) / (l dI) alpha`.
pub fn balance_upper_l(m: &Model) -> f64 {
    let n = m.total();
    ((n - m.min_risk_ratio()).max(0.0) * m.di() / m.ds() + m.max_risk_ratio()) / n
}

/// Sample of the balance function on the scan grid.
#[derive(Debug, Clone)]
pub struct BalanceScan {
    pub r0: f64,
    pub l_cap: f64,
    pub samples: Vec<FamilySolution>,
}

/// Evaluates the family on `points` values `l = (1 + t)/R0`, `t` log-spaced on
/// `[1e-6, l_cap R0 - 1]`, warm-starting each solve from the previous one.
pub fn scan_balance(m: &Model, opts: &ScanOptions) -> Result<BalanceScan> {
    let r0 = model::r0(m)?;
    let l_min = 1.0 / r0;
    let mut l_cap = opts.l_cap.unwrap_or_else(|| (1.05 * balance_upper_l(m)).max(2.0 * l_min));
    if l_cap <= l_min * (1.0 + 2.0 * SCAN_T_MIN) {
        return Err(Error::InvalidArgument(format!(
            "l cap {l_cap} does not exceed the existence threshold 1/R0 = {l_min}"
        )));
    }
    if opts.l_cap.is_none() {
        let mut grow = 0;
        while solve_family(m, l_cap)?.balance(m.ds()) <= m.total() && grow < 60 {
            l_cap *= 2.0;
            grow += 1;
        }
    }
    let points = opts.points.max(2);
    let (t_lo, t_hi) = (SCAN_T_MIN.ln(), (l_cap * r0 - 1.0).ln());
    let mut samples = Vec::with_capacity(points);
    let mut prev: Option<DVector<f64>> = None;
    for k in 0..points {
        let t = (t_lo + (t_hi - t_lo) * k as f64 / (points - 1) as f64).exp();
        let l = (1.0 + t) * l_min;
        let fam = match solve_family_from(m, l, prev.as_ref()) {
            Ok(f) => f,
            // first points sit on the existence threshold; rounding may put
            // the spectral bound on the wrong side
            Err(Error::NoPositiveSolution { .. }) if k < 3 => continue,
            Err(e) => return Err(e),
        };
        prev = Some(fam.u.clone());
        samples.push(fam);
    }
    Ok(BalanceScan { r0, l_cap, samples })
}

fn bisect_root(m: &Model, lo: &FamilySolution, hi: &FamilySolution) -> Result<FamilySolution> {
    let target = m.total();
    let mut a = lo.clone();
    let mut b = hi.clone();
    let ga = a.balance(m.ds()) - target;
    for _ in 0..200 {
        if b.l - a.l <= ROOT_REL_TOL * b.l {
            break;
        }
        let mid = 0.5 * (a.l + b.l);
        if mid <= a.l || mid >= b.l {
            break;
        }
        let fm = solve_family_from(m, mid, Some(&a.u))?;
        let gm = fm.balance(m.ds()) - target;
        if gm == 0.0 {
            return Ok(fm);
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = fm;
        } else {
            b = fm;
        }
    }
    let (da, db) = ((a.balance(m.ds()) - target).abs(), (b.balance(m.ds()) - target).abs());
    Ok(if da <= db { a } else { b })
}

/// Golden-section minimization of `|F - N|` on `[lo, hi]`.
fn touch_point(m: &Model, lo: &FamilySolution, hi: &FamilySolution) -> Result<FamilySolution> {
    let target = m.total();
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo.l, hi.l);
    let guess = lo.u.clone();
    let eval = |l: f64| -> Result<(f64, FamilySolution)> {
        let f = solve_family_from(m, l, Some(&guess))?;
        Ok(((f.balance(m.ds()) - target).abs(), f))
    };
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut sc) = eval(c)?;
    let (mut fd, mut sd) = eval(d)?;
    for _ in 0..80 {
        if b - a <= ROOT_REL_TOL * b {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            sd = sc;
            c = b - phi * (b - a);
            (fc, sc) = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            sc = sd;
            d = a + phi * (b - a);
            (fd, sd) = eval(d)?;
        }
    }
    Ok(if fc < fd { sc } else { sd })
}

/// All roots of `F(dS, l) = N` located on the scan, sorted by `l`.
pub fn balance_roots(m: &Model, opts: &ScanOptions) -> Result<Vec<(FamilySolution, bool)>> {
    let scan = scan_balance(m, opts)?;
    let target = m.total();
    let g: Vec<f64> = scan.samples.iter().map(|f| f.balance(m.ds()) - target).collect();
    let mut roots: Vec<(FamilySolution, bool)> = Vec::new();
    for k in 0..g.len() {
        if g[k] == 0.0 {
            roots.push((scan.samples[k].clone(), false));
            continue;
        }
        if k + 1 < g.len() && g[k + 1] != 0.0 && (g[k] > 0.0) != (g[k + 1] > 0.0) {
            roots.push((bisect_root(m, &scan.samples[k], &scan.samples[k + 1])?, false));
        }
        // tangential touch: local minimum of |g| with no sign change around it
        if k > 0 && k + 1 < g.len() {
            let same = (g[k - 1] > 0.0) == (g[k] > 0.0) && (g[k] > 0.0) == (g[k + 1] > 0.0);
            let local_min = g[k].abs() < g[k - 1].abs() && g[k].abs() < g[k + 1].abs();
            if same && local_min && g[k].abs() <= 1e-3 * target {
                let best = touch_point(m, &scan.samples[k - 1], &scan.samples[k + 1])?;
                if (best.balance(m.ds()) - target).abs() <= BALANCE_TOL * target {
                    roots.push((best, true));
                }
            }
        }
    }
    roots.sort_by(|a, b| a.0.l.total_cmp(&b.0.l));
    roots.dedup_by(|b, a| (b.0.l - a.0.l).abs() <= MERGE_REL_TOL * a.0.l.max(b.0.l));
    Ok(roots)
}

/// Every endemic equilibrium found by the balance scan, sorted by `l`.
pub fn find_endemic_equilibria(m: &Model) -> Result<Vec<EquilibriumSolution>> {
    find_endemic_equilibria_with(m, &ScanOptions::default())
}

pub fn find_endemic_equilibria_with(m: &Model, opts: &ScanOptions) -> Result<Vec<EquilibriumSolution>> {
    balance_roots(m, opts)?.iter().map(|(fam, marginal)| ee_from_family(m, fam, *marginal)).collect()
}

/// `K(l) = sum_j (V_j^l + U_j^l)` with `V^l = l dU^l/dl`.
///
/// `V^l` solves the linear system obtained by differentiating the family
/// equation in `l`; its matrix is the family Jacobian at `U^l`, which has a
/// negative spectral bound.
pub fn sensitivity_k(m: &Model, l: f64) -> Result<f64> {
    let fam = solve_family(m, l)?;
    sensitivity_k_at(m, &fam)
}

fn sensitivity_k_at(m: &Model, fam: &FamilySolution) -> Result<f64> {
    let jac = family_jacobian(m, fam.l, &fam.u);
    let mut rhs = DVector::zeros(m.n());
    for j in 0..m.n() {
        let slack = m.total() * m.alpha()[j] - m.di() * fam.u[j];
        rhs[j] = -fam.l * m.beta()[j] * slack * fam.u[j];
    }
    let v = linalg::solve(&jac, &rhs, "sensitivity system")?;
    Ok(v.sum() + fam.u.sum())
}

/// Central finite-difference estimate of `K(l)` (step `1e-6 l`).
pub fn sensitivity_k_fd(m: &Model, l: f64) -> Result<f64> {
    let h = 1e-6 * l;
    let mid = solve_family(m, l)?;
    let up = solve_family_from(m, l + h, Some(&mid.u))?;
    let down = solve_family_from(m, l - h, Some(&mid.u))?;
    let deriv = (up.u.sum() - down.u.sum()) / (2.0 * h);
    Ok(l * deriv + mid.u.sum())
}

/// Estimate of the uniqueness margin `N / (dI sup_l K(l))` for this `N`.
///
/// Exactly one when `gamma` is proportional to `beta ∘ alpha`.
pub fn uniqueness_margin(m: &Model) -> Result<f64> {
    if m.proportionality_constant().is_some() {
        return Ok(1.0);
    }
    let r0 = model::r0(m)?;
    let (lo, hi) = ((1.0 + 1e-6) / r0, 1e4 / r0);
    let points = 200;
    let mut sup = 0.0f64;
    let mut prev: Option<DVector<f64>> = None;
    for k in 0..points {
        let l = lo * (hi / lo).powf(k as f64 / (points - 1) as f64);
        let fam = solve_family_from(m, l, prev.as_ref())?;
        sup = sup.max(sensitivity_k_at(m, &fam)?);
        prev = Some(fam.u);
    }
    Ok((m.total() / (m.di() * sup)).min(1.0))
}

/// Endemic equilibrium for `dS = dI`: `(N alpha - I0, I0)` with
/// `I0 = dI U^1` the positive solution of
/// `dI L I + (beta ∘ (N alpha - I) - gamma) ∘ I = 0`.
pub fn special_ee_equal_dispersal(m: &Model) -> Result<EquilibriumSolution> {
    if (m.ds() - m.di()).abs() > 1e-12 * m.di().max(m.ds()) {
        return Err(Error::InvalidArgument(format!("requires dS = dI, got dS = {} and dI = {}", m.ds(), m.di())));
    }
    let fam = solve_family(m, 1.0)?;
    let i0 = &fam.u * m.di();
    let s = m.alpha() * m.total() - &i0;
    let (stability, jacobian_bound) = jacobian_stability(m, &s, &i0);
    Ok(EquilibriumSolution {
        s,
        i: i0,
        l: Some(1.0),
        kappa_star: m.ds(),
        kind: EquilibriumKind::Ee,
        stability,
        jacobian_bound,
        marginal_root: false,
    })
}

/// One grid point of a `dS` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub ds: f64,
    pub count: usize,
    pub l_roots: Vec<f64>,
    pub stability: Vec<Stability>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Largest `dS` found with at least two endemic equilibria.
    pub d1_star: Option<f64>,
    /// Largest `dS` found with at least one endemic equilibrium.
    pub d2_star: Option<f64>,
}

/// Relative width at which threshold bisection stops.
pub const THRESHOLD_REL_TOL: f64 = 1e-4;

fn sweep_point(m: &Model, ds: f64, opts: &ScanOptions) -> Result<SweepPoint> {
    let eqs = find_endemic_equilibria_with(&m.with_ds(ds), opts)?;
    Ok(SweepPoint {
        ds,
        count: eqs.len(),
        l_roots: eqs.iter().filter_map(|e| e.l).collect(),
        stability: eqs.iter().map(|e| e.stability).collect(),
    })
}

/// Counts endemic equilibria along an increasing `dS` grid and estimates the
/// thresholds below which at least two (resp. one) equilibria exist.
pub fn bifurcation_sweep_ds(m: &Model, grid: &[f64]) -> Result<SweepResult> {
    bifurcation_sweep_ds_with(m, grid, &ScanOptions::default())
}

pub fn bifurcation_sweep_ds_with(m: &Model, grid: &[f64], opts: &ScanOptions) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty dS grid".into()));
    }
    if grid.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::InvalidArgument("dS grid values must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("dS grid must be strictly increasing".into()));
    }
    let points = evaluate_grid(m, grid, opts)?;
    let d1_star = refine_threshold(m, &points, 2, opts)?;
    let d2_star = refine_threshold(m, &points, 1, opts)?;
    Ok(SweepResult { points, d1_star, d2_star })
}

#[cfg(feature = "parallel")]
fn evaluate_grid(m: &Model, grid: &[f64], opts: &ScanOptions) -> Result<Vec<SweepPoint>> {
    use rayon::prelude::*;
    grid.par_iter().map(|&ds| sweep_point(m, ds, opts)).collect()
}

#[cfg(not(feature = "parallel"))]
fn evaluate_grid(m: &Model, grid: &[f64], opts: &ScanOptions) -> Result<Vec<SweepPoint>> {
    grid.iter().map(|&ds| sweep_point(m, ds, opts)).collect()
}

fn refine_threshold(m: &Model, points: &[SweepPoint], at_least: usize, opts: &ScanOptions) -> Result<Option<f64>> {
    let Some(k) = points.iter().rposition(|p| p.count >= at_least) else {
        return Ok(None);
    };
    if k + 1 == points.len() {
        return Ok(Some(points[k].ds));
    }
    let (mut a, mut b) = (points[k].ds, points[k + 1].ds);
    while b - a > THRESHOLD_REL_TOL * b {
        let mid = 0.5 * (a + b);
        if find_endemic_equilibria_with(&m.with_ds(mid), opts)?.len() >= at_least {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Some(a))
}
