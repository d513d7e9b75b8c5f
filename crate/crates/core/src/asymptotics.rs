//! Limiting profiles of endemic equilibria for small dispersal rates, and
//! the critical population size above which the susceptible-limit profile
//! holds for every small `dS`.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{integrate, Tolerances};
use crate::equilibria::{pseudo_transient, solve_family_from};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, Model};

/// Relative tolerance for ties in `r_i / alpha_i`.
pub const OMEGA_TIE_TOL: f64 = 1e-9;
/// Ratios within this relative band of the minimum, but outside the tie
/// tolerance, are flagged as near-ties.
pub const OMEGA_NEAR_TIE_TOL: f64 = 1e-6;
/// Relative tolerance deciding `N = sum r`.
pub const BORDERLINE_TOL: f64 = 1e-9;

/// Patches where `r_i / alpha_i` attains its minimum (0-based).
pub fn omega_star(m: &Model) -> Vec<usize> {
    within_band(m, OMEGA_TIE_TOL)
}

fn within_band(m: &Model, tol: f64) -> Vec<usize> {
    let ratio = m.risk_ratio();
    let min = ratio.min();
    (0..m.n()).filter(|&j| ratio[j] - min <= tol * min).collect()
}

fn require_spread(m: &Model) -> Result<()> {
    if m.risk_proportional_to_alpha() {
        Err(Error::DegenerateOmegaStar)
    } else {
        Ok(())
    }
}

/// Which side of `sum r` the population lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopulationCase {
    /// `N < sum r`: infection vanishes in the limit.
    Below,
    /// `N = sum r`: either limit may occur.
    Borderline,
    /// `N > sum r`: the limit is `(r, (N - sum r) alpha)`.
    Above,
}

impl PopulationCase {
    pub fn of(m: &Model) -> PopulationCase {
        let sum_r = m.risk_sum();
        if (m.total() - sum_r).abs() <= BORDERLINE_TOL * sum_r {
            PopulationCase::Borderline
        } else if m.total() < sum_r {
            PopulationCase::Below
        } else {
            PopulationCase::Above
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PopulationCase::Below => "N<sum(r)",
            PopulationCase::Borderline => "N=sum(r)",
            PopulationCase::Above => "N>sum(r)",
        }
    }
}

/// One admissible limit `(S*, I*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitState {
    pub s: DVector<f64>,
    pub i: DVector<f64>,
    /// Rescaled infection `I / dS` in the vanishing case.
    pub bar_i: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsZeroProfile {
    pub case: PopulationCase,
    /// One limit, or both when `N = sum r`.
    pub limits: Vec<LimitState>,
}

fn endemic_limit(m: &Model) -> LimitState {
    LimitState { s: m.r().clone(), i: m.alpha() * (m.total() - m.risk_sum()), bar_i: None }
}

fn vanishing_limit(m: &Model) -> Result<LimitState> {
    let bar_i = solve_bar_i(m)?;
    let s = m.alpha() * (m.total() + m.di() * bar_i.sum()) - &bar_i * m.di();
    Ok(LimitState { s, i: DVector::zeros(m.n()), bar_i: Some(bar_i) })
}

/// Limit of endemic equilibria as `dS -> 0` (the model's `dS` is ignored).
pub fn profile_ds_to_zero(m: &Model) -> Result<DsZeroProfile> {
    let case = PopulationCase::of(m);
    let limits = match case {
        PopulationCase::Above => vec![endemic_limit(m)],
        PopulationCase::Below => vec![vanishing_limit(m)?],
        PopulationCase::Borderline => vec![endemic_limit(m), vanishing_limit(m)?],
    };
    Ok(DsZeroProfile { case, limits })
}

/// Right-hand side of the rescaled-infection equation
/// `dI L X + beta ∘ (N alpha - r + dI alpha sum(X) - dI X) ∘ X`.
pub fn bar_i_residual(m: &Model, x: &DVector<f64>) -> DVector<f64> {
    let mut f = m.l() * x * m.di();
    let total = x.sum();
    for j in 0..m.n() {
        let a = m.alpha()[j];
        f[j] += m.beta()[j] * (a * m.total() - m.r()[j] + m.di() * a * total - m.di() * x[j]) * x[j];
    }
    f
}

fn bar_i_jacobian(m: &Model, x: &DVector<f64>) -> DMatrix<f64> {
    let n = m.n();
    let mut j = m.l() * m.di();
    let total = x.sum();
    for r in 0..n {
        let (a, b) = (m.alpha()[r], m.beta()[r]);
        j[(r, r)] += b * (a * m.total() - m.r()[r] + m.di() * a * total - 2.0 * m.di() * x[r]);
        for c in 0..n {
            j[(r, c)] += m.di() * b * a * x[r];
        }
    }
    j
}

/// Nonnegative solution of the rescaled-infection equation, reached by
/// marching the associated evolution from `N alpha`.
///
/// Returns zero when the march collapses onto the trivial solution and
/// fails with `NoConvergence` when it grows without bound.
pub fn solve_bar_i(m: &Model) -> Result<DVector<f64>> {
    let n = m.n();
    let total = m.total();
    let rate = m.beta().amax() * total + m.gamma().amax() + m.di() * m.l().amax();
    let blowup = 1e6 * (total + m.risk_sum()) / m.di();
    let tol = Tolerances { rtol: 1e-10, atol: 1e-14 * total };
    let mut x = m.alpha() * total;
    let mut chunk = 10.0 / rate;
    for _ in 0..60 {
        let run = integrate(|y| bar_i_residual(m, y), x, chunk, 2, tol, true)?;
        x = run.states.into_iter().last().expect("final state");
        let size = x.amax();
        if size <= 1e-12 * total {
            return Ok(DVector::zeros(n));
        }
        if size > blowup {
            return Err(Error::NoConvergence { routine: "rescaled-infection march (unbounded growth)", iterations: 0 });
        }
        if bar_i_residual(m, &x).amax() <= 1e-6 * rate * size {
            let scale = rate + m.beta().amax() * m.di() * size;
            let polished = pseudo_transient(
                x,
                true,
                scale,
                1e-15 * scale,
                |y| bar_i_residual(m, y),
                |y| bar_i_jacobian(m, y),
                |y| y.iter().all(|&v| v > 0.0),
            );
            let res = bar_i_residual(m, &polished).amax();
            if res <= 1e-9 * total.max(1.0) {
                return Ok(polished);
            }
            return Err(Error::NoConvergence { routine: "rescaled-infection polish", iterations: 0 });
        }
        chunk *= 2.0;
    }
    Err(Error::NoConvergence { routine: "rescaled-infection march", iterations: 60 })
}

/// Limit of the endemic equilibrium as `dI -> 0` with `dS` fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct DiZeroProfile {
    pub omega_star: Vec<usize>,
    /// Patches whose ratio is within `1e-6` of the minimum without tying it.
    pub near_ties: Vec<usize>,
    pub s_limit: DVector<f64>,
    pub i_total: f64,
    /// Infection on `omega_star`, in the order of `omega_star`.
    pub i_star: DVector<f64>,
    /// Full-length infection limit, zero off `omega_star`.
    pub i_limit: DVector<f64>,
    pub c_star: f64,
    pub c_bracket: (f64, f64),
}

/// Solves `0 = dS L' I + beta' ∘ (c alpha' - I) ∘ I` on the sub-network,
/// marching down from the supersolution `c alpha'`. Returns `None` if no
/// positive solution is reached.
fn reduced_solution(
    sub_l: &DMatrix<f64>,
    beta: &DVector<f64>,
    alpha: &DVector<f64>,
    ds: f64,
    c: f64,
) -> Option<DVector<f64>> {
    let k = alpha.len();
    let flow = |x: &DVector<f64>| {
        let mut f = sub_l * x * ds;
        for j in 0..k {
            f[j] += beta[j] * (c * alpha[j] - x[j]) * x[j];
        }
        f
    };
    let jac = |x: &DVector<f64>| {
        let mut j = sub_l * ds;
        for r in 0..k {
            j[(r, r)] += beta[r] * (c * alpha[r] - 2.0 * x[r]);
        }
        j
    };
    let mut lin = sub_l * ds;
    for r in 0..k {
        lin[(r, r)] += beta[r] * c * alpha[r];
    }
    if linalg::spectral_bound(&lin, true).ok()? <= 0.0 {
        return None;
    }
    let scale = 1.0 + ds * sub_l.amax() + c * (beta.component_mul(alpha)).amax();
    let x = pseudo_transient(alpha * c, false, scale, 1e-15 * scale, flow, jac, |x| x.iter().all(|&v| v > 0.0));
    let res = flow(&x).amax();
    (res <= 1e-12 * scale * x.amax() && x.iter().all(|&v| v > 0.0)).then_some(x)
}

/// Profile of the endemic equilibrium as `dI -> 0`.
pub fn profile_di_to_zero(m: &Model) -> Result<DiZeroProfile> {
    require_spread(m)?;
    let min_ratio = m.min_risk_ratio();
    let t = m.total() - min_ratio;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("requires N > min(r/alpha) = {min_ratio}, got N = {}", m.total())));
    }
    let omega = omega_star(m);
    let near_ties: Vec<usize> = within_band(m, OMEGA_NEAR_TIE_TOL).into_iter().filter(|j| !omega.contains(j)).collect();
    let sub_l = m.conn().submatrix(&omega);
    let alpha: DVector<f64> = DVector::from_iterator(omega.len(), omega.iter().map(|&j| m.alpha()[j]));
    let beta: DVector<f64> = DVector::from_iterator(omega.len(), omega.iter().map(|&j| m.beta()[j]));
    let ds = m.ds();

    let alpha_min = alpha.min();
    let beta_min = beta.min();
    let l1_norm = (0..sub_l.ncols()).map(|c| sub_l.column(c).abs().sum()).fold(0.0, f64::max);
    let lo = t / alpha.sum();
    let hi = (t * beta_min + ds * l1_norm) / (alpha_min * beta_min);

    let (c_star, i_star) = if omega.len() == 1 {
        let k = omega[0];
        let c = (t - ds * m.l()[(k, k)] / m.beta()[k]) / m.alpha()[k];
        (c, DVector::from_element(1, t))
    } else {
        let defect = |c: f64| -> (f64, Option<DVector<f64>>) {
            match reduced_solution(&sub_l, &beta, &alpha, ds, c) {
                Some(x) => (x.sum() - t, Some(x)),
                None => (-t, None),
            }
        };
        let (d_lo, _) = defect(lo);
        let hi_eval = hi * (1.0 + 1e-9);
        let (d_hi, x_hi) = defect(hi_eval);
        if d_lo > 0.0 || d_hi < -1e-9 * t {
            return Err(Error::NoBracket { lo, hi, target: t });
        }
        let (mut a, mut b) = (lo, hi_eval);
        let mut best = (hi_eval, x_hi, d_hi.abs());
        for _ in 0..200 {
            if b - a <= 1e-14 * b {
                break;
            }
            let mid = 0.5 * (a + b);
            let (d, x) = defect(mid);
            if d.abs() < best.2 && x.is_some() {
                best = (mid, x.clone(), d.abs());
            }
            if d.abs() <= 1e-13 * t {
                break;
            }
            if d < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let x = best.1.ok_or(Error::NoBracket { lo, hi, target: t })?;
        (best.0, x)
    };

    let mut i_limit = DVector::zeros(m.n());
    for (pos, &j) in omega.iter().enumerate() {
        i_limit[j] = i_star[pos];
    }
    Ok(DiZeroProfile {
        omega_star: omega,
        near_ties,
        s_limit: m.alpha() * min_ratio,
        i_total: t,
        i_star,
        i_limit,
        c_star,
        c_bracket: (lo, hi),
    })
}

/// Joint limit `dI, dS -> 0` with `dI / dS -> sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaProfile {
    pub sigma: f64,
    pub l_sigma: f64,
    pub s_limit: DVector<f64>,
    pub i_limit: DVector<f64>,
}

fn require_sigma_shape(m: &Model) -> Result<()> {
    require_spread(m)?;
    if !(m.total() > m.min_risk_ratio()) {
        return Err(Error::InvalidArgument(format!(
            "requires N > min(r/alpha) = {}, got N = {}",
            m.min_risk_ratio(),
            m.total()
        )));
    }
    Ok(())
}

/// `G(l) = sum_j [min(l N alpha_j, r_j) + w (l N alpha_j - r_j)_+]`.
pub fn g_sigma(m: &Model, w: f64, l: f64) -> f64 {
    (0..m.n())
        .map(|j| {
            let x = l * m.total() * m.alpha()[j];
            x.min(m.r()[j]) + w * (x - m.r()[j]).max(0.0)
        })
        .sum()
}

/// Inverts the piecewise-linear, nondecreasing `G` with excess weight `w`
/// (`w = 1/sigma`, or `0` for the `sigma -> infinity` equation) at `N`.
fn invert_breakpoints(m: &Model, w: f64) -> Option<f64> {
    let total = m.total();
    let mut pts: Vec<f64> = (0..m.n()).map(|j| m.r()[j] / (total * m.alpha()[j])).collect();
    pts.sort_by(f64::total_cmp);
    let mut prev = 0.0;
    let mut g_prev = 0.0;
    for &b in &pts {
        let g_b = g_sigma(m, w, b);
        if g_b >= total {
            let slope = (g_b - g_prev) / (b - prev);
            return Some(prev + (total - g_prev) / slope);
        }
        prev = b;
        g_prev = g_b;
    }
    // beyond every breakpoint the slope is w N sum(alpha) = w N
    (w > 0.0).then(|| prev + (total - g_prev) / (w * total))
}

/// Limit profile for dispersal ratio `dI / dS -> sigma`.
pub fn sigma_profile(m: &Model, sigma: f64) -> Result<SigmaProfile> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveParameter { name: "sigma".into(), value: sigma });
    }
    require_sigma_shape(m)?;
    let l = invert_breakpoints(m, 1.0 / sigma).expect("positive excess weight always crosses N");
    let (s, i) = split_at_level(m, l, sigma);
    Ok(SigmaProfile { sigma, l_sigma: l, s_limit: s, i_limit: i })
}

fn split_at_level(m: &Model, l: f64, sigma: f64) -> (DVector<f64>, DVector<f64>) {
    let x = m.alpha() * (l * m.total());
    let s = x.zip_map(m.r(), f64::min);
    let i = x.zip_map(m.r(), |a, r| (a - r).max(0.0) / sigma);
    (s, i)
}

/// Root `l` of `N = sum_j min(l N alpha_j, r_j)`; exists only for `N < sum r`.
pub fn l_infinity_interior(m: &Model) -> Result<f64> {
    if m.total() >= m.risk_sum() {
        return Err(Error::NoInteriorRoot(format!("N = {} is not below sum(r) = {}", m.total(), m.risk_sum())));
    }
    invert_breakpoints(m, 0.0).ok_or_else(|| Error::NoInteriorRoot("no crossing".into()))
}

/// Closed-form endpoints of the sigma family.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSublimits {
    /// `sigma -> 0`: `S = min(r/alpha) alpha`, infection on `omega_star`.
    pub zero: (DVector<f64>, DVector<f64>),
    pub omega_star: Vec<usize>,
    pub infinity_case: PopulationCase,
    /// Limit of `l^sigma` as `sigma -> infinity`; unbounded when `N > sum r`.
    pub l_infinity: Option<f64>,
    pub infinity: (DVector<f64>, DVector<f64>),
}

pub fn sigma_sublimits(m: &Model) -> Result<SigmaSublimits> {
    require_sigma_shape(m)?;
    let n = m.n();
    let omega = omega_star(m);
    let min_ratio = m.min_risk_ratio();
    let mass: f64 = omega.iter().map(|&j| m.alpha()[j]).sum();
    let mut i0 = DVector::zeros(n);
    for &j in &omega {
        i0[j] = (m.total() - min_ratio) / mass * m.alpha()[j];
    }
    let zero = (m.alpha() * min_ratio, i0);

    let case = PopulationCase::of(m);
    let (l_inf, infinity) = match case {
        PopulationCase::Below => {
            let l = l_infinity_interior(m)?;
            let s = (m.alpha() * (l * m.total())).zip_map(m.r(), f64::min);
            (Some(l), (s, DVector::zeros(n)))
        }
        PopulationCase::Borderline => (Some(m.max_risk_ratio() / m.total()), (m.r().clone(), DVector::zeros(n))),
        PopulationCase::Above => (None, (m.r().clone(), m.alpha() * (m.total() - m.risk_sum()))),
    };
    Ok(SigmaSublimits { zero, omega_star: omega, infinity_case: case, l_infinity: l_inf, infinity })
}

/// Where the supremum defining the critical population was attained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalRegime {
    /// Strict interior maximum on the grid.
    Interior,
    /// Approached as `lN` falls to the existence threshold.
    ThresholdLimit,
    /// Approached as `lN -> infinity`, where the value tends to `sum r`.
    LargeLimit,
}

impl CriticalRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            CriticalRegime::Interior => "interior",
            CriticalRegime::ThresholdLimit => "threshold-limit",
            CriticalRegime::LargeLimit => "large-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalN {
    pub estimate: f64,
    /// Analytic bracket `[max(sum r, R*), max(r/alpha))`.
    pub bracket: (f64, f64),
    /// Threshold `R* = 1 / rho(diag(alpha ∘ beta) V^-1)` for the product `lN`.
    pub r_star: f64,
    /// Maximizing `lN` (for the limit regimes, the grid end it was approached from).
    pub argmax: f64,
    pub regime: CriticalRegime,
}

const CRITICAL_GRID: usize = 200;
const CRITICAL_SPAN: f64 = 1e4;

/// Estimates the critical population `N*` as the supremum of
/// `lambda - dI sum(U)` over `lambda > R*`, where `U` solves the family
/// equation at `l = 1` with total population `lambda`.
pub fn critical_n_estimate(m: &Model) -> Result<CriticalN> {
    require_spread(m)?;
    let r_star = 1.0 / model::next_generation_radius(m, &m.alpha().component_mul(m.beta()))?;
    let sum_r = m.risk_sum();
    let eval = |lambda: f64, guess: Option<&DVector<f64>>| -> Result<(f64, DVector<f64>)> {
        let fam = solve_family_from(&m.with_total(lambda), 1.0, guess)?;
        Ok((fam.capital_n(), fam.u))
    };

    let (lo, hi) = (r_star * (1.0 + 1e-6), r_star * CRITICAL_SPAN);
    let mut values = Vec::with_capacity(CRITICAL_GRID);
    let mut prev: Option<DVector<f64>> = None;
    for k in 0..CRITICAL_GRID {
        let lambda = lo * (hi / lo).powf(k as f64 / (CRITICAL_GRID - 1) as f64);
        let (v, u) = eval(lambda, prev.as_ref())?;
        values.push((lambda, v));
        prev = Some(u);
    }
    let (k_best, &(mut arg, mut best)) =
        values.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).expect("nonempty grid");
    if k_best > 0 && k_best + 1 < values.len() {
        // golden-section refinement in log(lambda)
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (values[k_best - 1].0.ln(), values[k_best + 1].0.ln());
        let f = |x: f64| eval(x.exp(), None).map(|(v, _)| v);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (f(c)?, f(d)?);
        for _ in 0..60 {
            if b - a < 1e-10 {
                break;
            }
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = f(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = f(d)?;
            }
        }
        let (x, v) = if fc > fd { (c, fc) } else { (d, fd) };
        if v > best {
            best = v;
            arg = x.exp();
        }
    }

    let mut regime = CriticalRegime::Interior;
    let mut estimate = best;
    if r_star >= estimate {
        estimate = r_star;
        arg = r_star;
        regime = CriticalRegime::ThresholdLimit;
    }
    if sum_r >= estimate {
        estimate = sum_r;
        arg = hi;
        regime = CriticalRegime::LargeLimit;
    }
    Ok(CriticalN { estimate, bracket: (sum_r.max(r_star), m.max_risk_ratio()), r_star, argmax: arg, regime })
}
