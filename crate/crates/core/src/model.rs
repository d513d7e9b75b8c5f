//! Model parameters, reproduction numbers and closed-form threshold checks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, ConnectivityMatrix};

/// Dead-band around `R0 = 1` (and `sigma* = 0`) treated as the threshold.
pub const THRESHOLD_DEADBAND: f64 = 1e-10;
/// Relative tolerance for detecting `gamma = m * beta ∘ alpha`.
pub const PROPORTIONALITY_TOL: f64 = 1e-9;

/// Full parameter set of the patch model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    conn: ConnectivityMatrix,
    beta: DVector<f64>,
    gamma: DVector<f64>,
    ds: f64,
    di: f64,
    total: f64,
    r: DVector<f64>,
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveParameter { name: name.to_string(), value })
    }
}

fn check_vector(name: &str, v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!("`{name}` has length {}, expected {n}", v.len())));
    }
    for (j, &x) in v.iter().enumerate() {
        check_positive(&format!("{name}[{j}]"), x)?;
    }
    Ok(())
}

/// Validates the raw connectivity rates and parameters and assembles a [`Model`].
pub fn build_model(
    conn_raw: &DMatrix<f64>,
    beta: DVector<f64>,
    gamma: DVector<f64>,
    ds: f64,
    di: f64,
    total: f64,
) -> Result<Model> {
    let n = conn_raw.nrows();
    if conn_raw.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "connectivity matrix must be square, got {}x{}",
            n,
            conn_raw.ncols()
        )));
    }
    check_vector("beta", &beta, n)?;
    check_vector("gamma", &gamma, n)?;
    check_positive("dS", ds)?;
    check_positive("dI", di)?;
    check_positive("N", total)?;
    let conn = linalg::validate_connectivity(conn_raw)?;
    Ok(Model::from_parts(conn, beta, gamma, ds, di, total))
}

impl Model {
    /// Assembles a model from an already validated connectivity matrix.
    ///
    /// Panics if vector lengths disagree with the network size; use
    /// [`build_model`] for untrusted input.
    pub fn from_parts(
        conn: ConnectivityMatrix,
        beta: DVector<f64>,
        gamma: DVector<f64>,
        ds: f64,
        di: f64,
        total: f64,
    ) -> Model {
        assert_eq!(beta.len(), conn.n());
        assert_eq!(gamma.len(), conn.n());
        let r = gamma.component_div(&beta);
        Model { conn, beta, gamma, ds, di, total, r }
    }

    pub fn n(&self) -> usize {
        self.conn.n()
    }
    pub fn conn(&self) -> &ConnectivityMatrix {
        &self.conn
    }
    pub fn l(&self) -> &DMatrix<f64> {
        self.conn.matrix()
    }
    pub fn alpha(&self) -> &DVector<f64> {
        self.conn.alpha()
    }
    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }
    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }
    pub fn ds(&self) -> f64 {
        self.ds
    }
    pub fn di(&self) -> f64 {
        self.di
    }
    /// Total population `N`.
    pub fn total(&self) -> f64 {
        self.total
    }
    /// Risk vector `r = gamma / beta`.
    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn with_ds(&self, ds: f64) -> Model {
        Model { ds, ..self.clone() }
    }
    pub fn with_di(&self, di: f64) -> Model {
        Model { di, ..self.clone() }
    }
    pub fn with_total(&self, total: f64) -> Model {
        Model { total, ..self.clone() }
    }

    /// `r_j / alpha_j` for every patch.
    pub fn risk_ratio(&self) -> DVector<f64> {
        self.r.component_div(self.alpha())
    }

    /// `(r/alpha)_m`, the smallest risk ratio.
    pub fn min_risk_ratio(&self) -> f64 {
        self.risk_ratio().min()
    }

    /// `(r/alpha)_M`, the largest risk ratio.
    pub fn max_risk_ratio(&self) -> f64 {
        self.risk_ratio().max()
    }

    /// `sum_j r_j`.
    pub fn risk_sum(&self) -> f64 {
        self.r.sum()
    }

    /// `V = diag(gamma) - dI * L`.
    pub fn v_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.gamma) - self.l() * self.di
    }

    /// `dI * L + diag(c ∘ beta ∘ alpha - gamma)`; with `c = l N` this is the
    /// linearization of the family equation at zero.
    pub fn infection_operator(&self, c: f64) -> DMatrix<f64> {
        let mut m = self.l() * self.di;
        for j in 0..self.n() {
            m[(j, j)] += c * self.alpha()[j] * self.beta[j] - self.gamma[j];
        }
        m
    }

    /// Returns `m` when `gamma = m * beta ∘ alpha` within the relative tolerance.
    pub fn proportionality_constant(&self) -> Option<f64> {
        let ratio = self.gamma.component_div(&self.beta.component_mul(self.alpha()));
        let (lo, hi) = (ratio.min(), ratio.max());
        if hi - lo <= PROPORTIONALITY_TOL * hi {
            Some(ratio.mean())
        } else {
            None
        }
    }

    /// True when `r` is a multiple of `alpha` (same test as the proportionality check).
    pub fn risk_proportional_to_alpha(&self) -> bool {
        self.proportionality_constant().is_some()
    }
}

/// Where a reproduction number sits relative to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSide {
    Below,
    Threshold,
    Above,
}

impl ThresholdSide {
    pub fn of_r0(r0: f64) -> ThresholdSide {
        Self::of_sign(r0 - 1.0)
    }

    pub fn of_sign(x: f64) -> ThresholdSide {
        if x > THRESHOLD_DEADBAND {
            ThresholdSide::Above
        } else if x < -THRESHOLD_DEADBAND {
            ThresholdSide::Below
        } else {
            ThresholdSide::Threshold
        }
    }
}

/// Next-generation quantities at the disease-free equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproductionAnalysis {
    /// Diagonal of `F = diag(N alpha ∘ beta)`.
    pub f_diag: DVector<f64>,
    pub v: DMatrix<f64>,
    pub r0: f64,
    /// `sigma*(F - V)`.
    pub sigma_star: f64,
    /// `lim_{dI -> 0} R0 = max_j N alpha_j beta_j / gamma_j`.
    pub limit_di_zero: f64,
    /// `lim_{dI -> inf} R0 = sum N alpha_j^2 beta_j / sum alpha_j gamma_j`.
    pub limit_di_inf: f64,
    pub side: ThresholdSide,
}

/// `rho(diag(w) V^-1)` computed through `V^-1 diag(w)` (same spectrum).
///
/// The product is formed by solving `V X = diag(w)` column by column.
pub fn next_generation_radius(m: &Model, w: &DVector<f64>) -> Result<f64> {
    let v = m.v_matrix();
    let f = DMatrix::from_diagonal(w);
    let k = linalg::solve_matrix(&v, &f, "V^-1 F").map_err(|_| Error::SingularV)?;
    let scale = k.amax();
    let mut k = k;
    for x in k.iter_mut() {
        if *x < 0.0 {
            if *x < -1e-12 * scale {
                return Err(Error::SingularV);
            }
            *x = 0.0;
        }
    }
    linalg::spectral_radius(&k)
}

pub fn reproduction_analysis(m: &Model) -> Result<ReproductionAnalysis> {
    let n_alpha_beta = m.alpha().component_mul(m.beta()) * m.total();
    let r0 = next_generation_radius(m, &n_alpha_beta)?;
    let sigma_star = linalg::spectral_bound(&m.infection_operator(m.total()), true)?;
    let limit_di_zero = n_alpha_beta.component_div(m.gamma()).max();
    let num: f64 = (0..m.n()).map(|j| m.total() * m.alpha()[j].powi(2) * m.beta()[j]).sum();
    let den = m.alpha().dot(m.gamma());
    Ok(ReproductionAnalysis {
        v: m.v_matrix(),
        f_diag: n_alpha_beta,
        r0,
        sigma_star,
        limit_di_zero,
        limit_di_inf: num / den,
        side: ThresholdSide::of_r0(r0),
    })
}

/// Basic reproduction number `rho(F V^-1)`.
pub fn r0(m: &Model) -> Result<f64> {
    next_generation_radius(m, &(m.alpha().component_mul(m.beta()) * m.total()))
}

/// Equilibrium kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumKind {
    Dfe,
    Ee,
}

/// Sufficient conditions for global stability of the DFE that hold for a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfeClassification {
    pub r0: f64,
    /// `N * rho(diag(beta) V^-1)`.
    pub n_rho_beta_vinv: f64,
    /// `N rho(diag(beta) V^-1) <= 1`.
    pub condition_i: bool,
    /// `R0 < 1`: the large-dS regime applies for some unknown threshold in dS.
    pub condition_ii_possible: bool,
    /// `R0 <= 1` and `dS = dI`.
    pub condition_iii: bool,
    /// `R0 <= 1` and `gamma = m beta ∘ alpha`; holds the constant `m`.
    pub condition_iv: Option<f64>,
    /// True when (i), (iii) or (iv) holds.
    pub globally_stable: bool,
    pub inconclusive: bool,
}

/// Disease-free equilibrium `(N alpha, 0)`.
pub fn dfe(m: &Model) -> (DVector<f64>, DVector<f64>) {
    (m.alpha() * m.total(), DVector::zeros(m.n()))
}

pub fn classify_dfe_global_stability(m: &Model) -> Result<DfeClassification> {
    let r0 = r0(m)?;
    let n_rho = m.total() * next_generation_radius(m, m.beta())?;
    let at_most_one = r0 <= 1.0 + THRESHOLD_DEADBAND;
    let condition_i = n_rho <= 1.0 + THRESHOLD_DEADBAND;
    let condition_ii_possible = r0 < 1.0 - THRESHOLD_DEADBAND;
    let condition_iii = at_most_one && (m.ds() - m.di()).abs() <= 1e-12 * m.di().max(m.ds());
    let condition_iv = if at_most_one { m.proportionality_constant() } else { None };
    let globally_stable = condition_i || condition_iii || condition_iv.is_some();
    Ok(DfeClassification {
        r0,
        n_rho_beta_vinv: n_rho,
        condition_i,
        condition_ii_possible,
        condition_iii,
        condition_iv,
        globally_stable,
        inconclusive: !globally_stable && !condition_ii_possible,
    })
}

/// Sufficient conditions for the absence of endemic equilibria.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonexistenceCheck {
    pub r0: f64,
    /// `R0 <= 1` and `dS >= dI R0`.
    pub condition_i: bool,
    /// `N <= (r/alpha)_m`.
    pub condition_ii: bool,
    pub no_endemic_equilibrium: bool,
}

pub fn ee_nonexistence_check(m: &Model, r0: f64) -> NonexistenceCheck {
    let condition_i = r0 <= 1.0 + THRESHOLD_DEADBAND && m.ds() >= m.di() * r0;
    let condition_ii = m.total() <= m.min_risk_ratio();
    NonexistenceCheck { r0, condition_i, condition_ii, no_endemic_equilibrium: condition_i || condition_ii }
}
