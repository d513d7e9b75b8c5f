//! Command-line front end: JSON scenario in, JSON/CSV analyses out.
//!
//! Exit codes: 0 on success, 2 for invalid input (including bad flags and
//! malformed configs), 3 for numerical failure. Errors are reported as one
//! line on stderr: `error kind=<Kind>: <message>`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::asymptotics::{self, PopulationCase};
use crate::dynamics::{self, SimulationOptions, Tolerances};
use crate::equilibria::{self, EquilibriumSolution, ScanOptions, Stability};
use crate::error::Error;
use crate::model::{self, build_model, EquilibriumKind, Model};
use crate::sampling;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "patchsis", version, about = "SIS patch model analyses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (JSON).
    config: PathBuf,
    /// Directory for output files; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative tolerance of the time integrator.
    #[arg(long)]
    tol_rel: Option<f64>,
    /// Absolute tolerance of the time integrator.
    #[arg(long)]
    tol_abs: Option<f64>,
    /// Upper end of the l interval scanned for equilibria.
    #[arg(long)]
    lmax_cap: Option<f64>,
    /// Resolution: sweep grid size, equilibrium scan size, or stored samples.
    #[arg(long)]
    points: Option<usize>,
    /// Seed for randomized defaults (overrides the config seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    #[value(name = "dS")]
    Ds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Limit {
    #[value(name = "dS0")]
    Ds0,
    #[value(name = "dI0")]
    Di0,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Basic reproduction number and its limits.
    R0(Common),
    /// Disease-free equilibrium and global-stability conditions.
    Dfe(Common),
    /// All endemic equilibria with local stability.
    Equilibria(Common),
    /// Integrate the model from (S0, I0).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Final time (default 500).
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Equilibrium counts along a log-spaced dispersal grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
    },
    /// Limit profiles for vanishing dispersal.
    Asymptotics {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        limit: Limit,
    },
    /// Joint limit with dI/dS -> sigma.
    SigmaProfile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sigma: f64,
    },
    /// Critical population size estimate.
    CriticalN(Common),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub rel: Option<f64>,
    pub abs: Option<f64>,
}

/// Scenario file contents.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(rename = "dS")]
    pub ds: f64,
    #[serde(rename = "dI")]
    pub di: f64,
    #[serde(rename = "N")]
    pub total: f64,
    #[serde(rename = "S0", default)]
    pub s0: Option<Vec<f64>>,
    #[serde(rename = "I0", default)]
    pub i0: Option<Vec<f64>>,
    #[serde(default)]
    pub tolerances: Option<ToleranceConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<ScenarioConfig, Error> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn model(&self) -> Result<Model, Error> {
        let n = self.n;
        if self.l.len() != n || self.l.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(format!("L must be {n}x{n}")));
        }
        for (name, v) in [("beta", &self.beta), ("gamma", &self.gamma)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!("{name} has length {}, expected {n}", v.len())));
            }
        }
        let raw = DMatrix::from_fn(n, n, |i, j| self.l[i][j]);
        build_model(
            &raw,
            DVector::from_vec(self.beta.clone()),
            DVector::from_vec(self.gamma.clone()),
            self.ds,
            self.di,
            self.total,
        )
    }

    /// Initial data: taken from the config when given; a missing half is
    /// filled with the remaining mass distributed along `alpha`; with neither
    /// present a seeded random interior state is drawn.
    pub fn initial_state(&self, m: &Model, seed: u64) -> Result<(DVector<f64>, DVector<f64>), Error> {
        let n = m.n();
        let vec = |name: &str, v: &Vec<f64>| {
            if v.len() == n {
                Ok(DVector::from_vec(v.clone()))
            } else {
                Err(Error::InvalidInitialData(format!("{name} has length {}, expected {n}", v.len())))
            }
        };
        let rest = |v: &DVector<f64>| m.alpha() * (m.total() - v.sum());
        match (&self.s0, &self.i0) {
            (Some(s), Some(i)) => Ok((vec("S0", s)?, vec("I0", i)?)),
            (Some(s), None) => {
                let s = vec("S0", s)?;
                let i = rest(&s);
                Ok((s, i))
            }
            (None, Some(i)) => {
                let i = vec("I0", i)?;
                Ok((rest(&i), i))
            }
            (None, None) => Ok(sampling::random_interior_state(&mut sampling::rng(seed), m)),
        }
    }
}

/// Output record for one equilibrium; also accepted back as input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumRecord {
    #[serde(rename = "S")]
    pub s: Vec<f64>,
    #[serde(rename = "I")]
    pub i: Vec<f64>,
    pub l: Option<f64>,
    pub kappa_star: f64,
    pub kind: EquilibriumKind,
    pub stability: Stability,
    pub jacobian_bound: f64,
    pub marginal_root: bool,
}

impl From<&EquilibriumSolution> for EquilibriumRecord {
    fn from(e: &EquilibriumSolution) -> Self {
        EquilibriumRecord {
            s: e.s.as_slice().to_vec(),
            i: e.i.as_slice().to_vec(),
            l: e.l,
            kappa_star: e.kappa_star,
            kind: e.kind,
            stability: e.stability,
            jacobian_bound: e.jacobian_bound,
            marginal_root: e.marginal_root,
        }
    }
}

impl From<EquilibriumRecord> for EquilibriumSolution {
    fn from(r: EquilibriumRecord) -> Self {
        EquilibriumSolution {
            s: DVector::from_vec(r.s),
            i: DVector::from_vec(r.i),
            l: r.l,
            kappa_star: r.kappa_star,
            kind: r.kind,
            stability: r.stability,
            jacobian_bound: r.jacobian_bound,
            marginal_root: r.marginal_root,
        }
    }
}

/// Equilibria listed in an `equilibria` JSON output.
pub fn read_equilibria(text: &str) -> Result<Vec<EquilibriumSolution>, Error> {
    #[derive(Deserialize)]
    struct Doc {
        equilibria: Vec<EquilibriumRecord>,
    }
    let doc: Doc = serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("equilibria file: {e}")))?;
    Ok(doc.equilibria.into_iter().map(Into::into).collect())
}

/// JSON formatter writing every float with 17 significant digits.
struct Precise;

impl serde_json::ser::Formatter for Precise {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
}

/// Float with 17 significant digits; non-finite values become `null`
/// (JSON) or `NaN`/`inf` text in CSV.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

fn csv_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Pretty JSON with 17-significant-digit floats.
pub fn to_json_string(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise);
    value.serialize(&mut ser).expect("serializing a JSON value cannot fail");
    let mut s = String::from_utf8(buf).expect("JSON is UTF-8");
    s.push('\n');
    s
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.as_slice())
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|i| json!(m.row(i).iter().copied().collect::<Vec<_>>())).collect())
}

fn record_json(e: &EquilibriumSolution) -> Value {
    serde_json::to_value(EquilibriumRecord::from(e)).expect("record serializes")
}

fn equilibria_csv(eqs: &[EquilibriumSolution], n: usize) -> String {
    let mut out = String::from("l,kappa_star,stability,jacobian_bound,marginal_root");
    for j in 1..=n {
        let _ = write!(out, ",S_{j}");
    }
    for j in 1..=n {
        let _ = write!(out, ",I_{j}");
    }
    out.push('\n');
    for e in eqs {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            e.l.map(csv_f64).unwrap_or_default(),
            csv_f64(e.kappa_star),
            e.stability.as_str(),
            csv_f64(e.jacobian_bound),
            e.marginal_root
        );
        for v in e.s.iter().chain(e.i.iter()) {
            let _ = write!(out, ",{}", csv_f64(*v));
        }
        out.push('\n');
    }
    out
}

fn trajectory_csv(traj: &dynamics::Trajectory, n: usize) -> String {
    let mut out = String::from("t");
    for j in 1..=n {
        let _ = write!(out, ",S_{j}");
    }
    for j in 1..=n {
        let _ = write!(out, ",I_{j}");
    }
    out.push('\n');
    for (t, (s, i)) in traj.times.iter().zip(&traj.states) {
        out.push_str(&csv_f64(*t));
        for v in s.iter().chain(i.iter()) {
            let _ = write!(out, ",{}", csv_f64(*v));
        }
        out.push('\n');
    }
    out
}

fn sweep_csv(sweep: &equilibria::SweepResult) -> String {
    let mut out = String::from("dS,count,l_roots,stability\n");
    for p in &sweep.points {
        let roots: Vec<String> = p.l_roots.iter().map(|&l| csv_f64(l)).collect();
        let tags: Vec<&str> = p.stability.iter().map(|s| s.as_str()).collect();
        let _ = writeln!(out, "{},{},{},{}", csv_f64(p.ds), p.count, roots.join(";"), tags.join(";"));
    }
    out
}

/// Files produced by one subcommand: (file name, contents). The first entry
/// is what goes to stdout when no output directory is given.
type Outputs = Vec<(&'static str, String)>;

fn scan_options(c: &Common, use_points: bool) -> ScanOptions {
    let mut opts = ScanOptions::default();
    if let Some(p) = c.points.filter(|_| use_points) {
        opts.points = p.max(2);
    }
    opts.l_cap = c.lmax_cap;
    opts
}

fn load(c: &Common) -> Result<(ScenarioConfig, Model), Error> {
    let text = fs::read_to_string(&c.config)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", c.config.display())))?;
    let cfg = ScenarioConfig::from_json(&text)?;
    let m = cfg.model()?;
    Ok((cfg, m))
}

fn check_flags(c: &Common) -> Result<(), Error> {
    for (name, v) in [("--tol-rel", c.tol_rel), ("--tol-abs", c.tol_abs), ("--lmax-cap", c.lmax_cap)] {
        if let Some(x) = v {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {x}")));
            }
        }
    }
    if c.points == Some(0) {
        return Err(Error::InvalidArgument("--points must be positive".into()));
    }
    Ok(())
}

fn cmd_r0(c: &Common) -> Result<Outputs, Error> {
    let (_, m) = load(c)?;
    let a = model::reproduction_analysis(&m)?;
    let v = json!({
        "r0": a.r0,
        "sigma_star": a.sigma_star,
        "side": format!("{:?}", a.side).to_lowercase(),
        "limit_dI_to_0": a.limit_di_zero,
        "limit_dI_to_inf": a.limit_di_inf,
        "F_diag": vec_json(&a.f_diag),
        "V": matrix_json(&a.v),
    });
    Ok(vec![("r0.json", to_json_string(&v))])
}

fn cmd_dfe(c: &Common) -> Result<Outputs, Error> {
    let (_, m) = load(c)?;
    let dfe = equilibria::dfe_solution(&m);
    let cls = model::classify_dfe_global_stability(&m)?;
    let none = model::ee_nonexistence_check(&m, cls.r0);
    let v = json!({
        "equilibrium": record_json(&dfe),
        "classification": {
            "r0": cls.r0,
            "n_rho_beta_vinv": cls.n_rho_beta_vinv,
            "condition_i": cls.condition_i,
            "condition_ii_possible": cls.condition_ii_possible,
            "condition_iii": cls.condition_iii,
            "condition_iv": cls.condition_iv,
            "globally_stable": cls.globally_stable,
            "inconclusive": cls.inconclusive,
        },
        "nonexistence": {
            "condition_i": none.condition_i,
            "condition_ii": none.condition_ii,
            "no_endemic_equilibrium": none.no_endemic_equilibrium,
        },
    });
    Ok(vec![("dfe.json", to_json_string(&v))])
}

fn cmd_equilibria(c: &Common) -> Result<Outputs, Error> {
    let (_, m) = load(c)?;
    let r0 = model::r0(&m)?;
    let eqs = equilibria::find_endemic_equilibria_with(&m, &scan_options(c, true))?;
    let v = json!({
        "r0": r0,
        "count": eqs.len(),
        "equilibria": eqs.iter().map(record_json).collect::<Vec<_>>(),
    });
    Ok(vec![("equilibria.json", to_json_string(&v)), ("equilibria.csv", equilibria_csv(&eqs, m.n()))])
}

fn cmd_simulate(c: &Common, horizon: Option<f64>) -> Result<Outputs, Error> {
    let (cfg, m) = load(c)?;
    let seed = c.seed.or(cfg.seed).unwrap_or(0);
    let (s0, i0) = cfg.initial_state(&m, seed)?;
    let mut opts = SimulationOptions::new(horizon.unwrap_or_else(|| dynamics::default_horizon(None)));
    let file_tol = cfg.tolerances.clone().unwrap_or(ToleranceConfig { rel: None, abs: None });
    opts.tolerances = Tolerances {
        rtol: c.tol_rel.or(file_tol.rel).unwrap_or(dynamics::DEFAULT_RTOL),
        atol: c.tol_abs.or(file_tol.abs).unwrap_or(dynamics::DEFAULT_ATOL),
    };
    if let Some(p) = c.points {
        opts.samples = p.max(2);
    }
    let traj = dynamics::simulate(&m, &s0, &i0, &opts)?;
    let summary = json!({
        "horizon": opts.horizon,
        "samples": traj.times.len(),
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
        "max_conservation_drift": traj.max_conservation_drift,
    });
    Ok(vec![("trajectory.csv", trajectory_csv(&traj, m.n())), ("trajectory.json", to_json_string(&summary))])
}

fn cmd_sweep(c: &Common, from: f64, to: f64) -> Result<Outputs, Error> {
    let (_, m) = load(c)?;
    if !(from > 0.0) || !(to > from) || !to.is_finite() {
        return Err(Error::InvalidArgument(format!("need 0 < --from < --to, got {from} and {to}")));
    }
    let k = c.points.unwrap_or(20).max(2);
    let grid: Vec<f64> =
        (0..k).map(|i| if i + 1 == k { to } else { from * (to / from).powf(i as f64 / (k - 1) as f64) }).collect();
    let sweep = equilibria::bifurcation_sweep_ds_with(&m, &grid, &scan_options(c, false))?;
    let v = json!({
        "param": "dS",
        "d1_star": sweep.d1_star,
        "d2_star": sweep.d2_star,
        "points": sweep.points.len(),
    });
    Ok(vec![("sweep.csv", sweep_csv(&sweep)), ("sweep.json", to_json_string(&v))])
}

fn case_str(c: PopulationCase) -> &'static str {
    c.as_str()
}

fn cmd_asymptotics(c: &Common, limit: Limit) -> Result<Outputs, Error> {
    let (_, m) = load(c)?;
    let v = match limit {
        Limit::Ds0 => {
            let p = asymptotics::profile_ds_to_zero(&m)?;
            json!({
                "limit": "dS0",
                "case": case_str(p.case),
                "limits": p.limits.iter().map(|l| json!({
                    "S": vec_json(&l.s),
                    "I": vec_json(&l.i),
                    "bar_I": l.bar_i.as_ref().map(vec_json),
                })).collect::<Vec<_>>(),
            })
        }
        Limit::Di0 => {
            let p = asymptotics::profile_di_to_zero(&m)?;
            json!({
                "limit": "dI0",
                "omega_star": p.omega_star,
                "near_ties": p.near_ties,
                "S_limit": vec_json(&p.s_limit),
                "I_limit": vec_json(&p.i_limit),
                "I_star": vec_json(&p.i_star),
                "I_total": p.i_total,
                "C_star": p.c_star,
                "C_bracket": [p.c_bracket.0, p.c_bracket.1],
            })
        }
    };
    Ok(vec![("asymptotics.json", to_json_string(&v))])
}

fn cmd_sigma(c: &Common, sigma: f64) -> Result<Outputs, Error> {
    let (_, m) = load(c)?;
    let p = asymptotics::sigma_profile(&m, sigma)?;
    let sub = asymptotics::sigma_sublimits(&m)?;
    let v = json!({
        "sigma": p.sigma,
        "l_sigma": p.l_sigma,
        "S_limit": vec_json(&p.s_limit),
        "I_limit": vec_json(&p.i_limit),
        "sublimits": {
            "sigma_to_0": { "S": vec_json(&sub.zero.0), "I": vec_json(&sub.zero.1), "omega_star": sub.omega_star },
            "sigma_to_inf": {
                "case": case_str(sub.infinity_case),
                "l_infinity": sub.l_infinity,
                "S": vec_json(&sub.infinity.0),
                "I": vec_json(&sub.infinity.1),
            },
        },
    });
    Ok(vec![("sigma_profile.json", to_json_string(&v))])
}

fn cmd_critical(c: &Common) -> Result<Outputs, Error> {
    let (_, m) = load(c)?;
    let est = asymptotics::critical_n_estimate(&m)?;
    let v = json!({
        "estimate": est.estimate,
        "bracket": [est.bracket.0, est.bracket.1],
        "r_star": est.r_star,
        "argmax": est.argmax,
        "regime": est.regime.as_str(),
    });
    Ok(vec![("critical_n.json", to_json_string(&v))])
}

fn emit(outputs: &Outputs, out_dir: Option<&Path>) -> Result<(), Error> {
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| Error::InvalidArgument(format!("cannot create {}: {e}", dir.display())))?;
            for (name, body) in outputs {
                let path = dir.join(name);
                fs::write(&path, body)
                    .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?;
            }
        }
        None => {
            let mut stdout = io::stdout().lock();
            let _ = stdout.write_all(outputs[0].1.as_bytes());
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    let (common, result) = match &cli.command {
        Command::R0(c) => (c, check_flags(c).and_then(|_| cmd_r0(c))),
        Command::Dfe(c) => (c, check_flags(c).and_then(|_| cmd_dfe(c))),
        Command::Equilibria(c) => (c, check_flags(c).and_then(|_| cmd_equilibria(c))),
        Command::Simulate { common, horizon } => {
            (common, check_flags(common).and_then(|_| cmd_simulate(common, *horizon)))
        }
        Command::Sweep { common, param: SweepParam::Ds, from, to } => {
            (common, check_flags(common).and_then(|_| cmd_sweep(common, *from, *to)))
        }
        Command::Asymptotics { common, limit } => {
            (common, check_flags(common).and_then(|_| cmd_asymptotics(common, *limit)))
        }
        Command::SigmaProfile { common, sigma } => {
            (common, check_flags(common).and_then(|_| cmd_sigma(common, *sigma)))
        }
        Command::CriticalN(c) => (c, check_flags(c).and_then(|_| cmd_critical(c))),
    };
    emit(&result?, common.out.as_deref())
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error kind={}: {msg}", e.kind());
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HOMOGENEOUS: &str = r#"{
        "n": 2, "L": [[0, 1], [1, 0]], "beta": [1, 1], "gamma": [1, 1],
        "dS": 1, "dI": 1, "N": 4
    }"#;

    #[test]
    fn config_rejects_unknown_fields() {
        let text = HOMOGENEOUS.replace("\"N\": 4", "\"N\": 4, \"Nn\": 3");
        assert!(ScenarioConfig::from_json(&text).is_err());
        assert!(ScenarioConfig::from_json(HOMOGENEOUS).unwrap().model().is_ok());
    }

    #[test]
    fn config_shape_errors() {
        let text = HOMOGENEOUS.replace("\"beta\": [1, 1]", "\"beta\": [1, 1, 1]");
        let err = ScenarioConfig::from_json(&text).unwrap().model().unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn initial_state_fills_missing_half() {
        let text = HOMOGENEOUS.replace("\"N\": 4", "\"N\": 4, \"I0\": [0, 0]");
        let cfg = ScenarioConfig::from_json(&text).unwrap();
        let m = cfg.model().unwrap();
        let (s, i) = cfg.initial_state(&m, 0).unwrap();
        assert_eq!(s, DVector::from_vec(vec![2.0, 2.0]));
        assert_eq!(i, DVector::zeros(2));
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "null");
        let v: f64 = fmt_f64(1.0 / 3.0).parse().unwrap();
        assert_eq!(v, 1.0 / 3.0);
        let doc = to_json_string(&json!({"x": 2.5}));
        assert!(doc.contains("2.5000000000000000e0"));
    }

    #[test]
    fn equilibrium_record_round_trips() {
        let m = ScenarioConfig::from_json(HOMOGENEOUS).unwrap().model().unwrap();
        let eqs = equilibria::find_endemic_equilibria(&m).unwrap();
        let doc = to_json_string(&json!({ "equilibria": eqs.iter().map(record_json).collect::<Vec<_>>() }));
        let back = read_equilibria(&doc).unwrap();
        assert_eq!(back, eqs);
    }
}
