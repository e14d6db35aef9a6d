//! Scenario-driven front end: load a JSON scenario, run both pipelines,
//! run named checks, and list the catalog.

pub mod format;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate_geodesic_to_u, integrate_herglotz, lift_state, reduce_trajectory,
    u_equation_residual, uniform_grid, w_equation_residual, GeodesicTrajectory, ReducedState,
    ReducedTrajectory,
};
use crate::geometry::{conformal_pullback_check, BrinkmannMetric};
use crate::ode::IntegratorConfig;
use crate::symmetry::{
    affine_charge, degreewise_identities, killing_residual, noether_charge, nonlocal_charge,
    symmetry_condition_residual, transform_rule_check, SymmetryGenerator,
};
use crate::systems::{self, CatalogEntry, CustomSpec};
use crate::{cloud, Error};
use format::Table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Output samples per trajectory when the scenario does not say.
pub const DEFAULT_SAMPLES: usize = 200;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(Error),
    CheckFailed(Vec<String>),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::CheckFailed(names) => write!(f, "checks failed: {}", names.join(", ")),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Errors raised while building the scenario are configuration errors;
/// everything afterwards is numerical.
fn build_error(context: &str, e: Error) -> CliError {
    config(format!("{context}: {e}"))
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub x: Vec<f64>,
    pub xp: Vec<f64>,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub w: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpanSpec {
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub max_steps: Option<usize>,
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Potential for the damped entries, default `0.5*x1^2`.
    pub potential: Option<String>,
    /// Field expressions when `system` is `custom`.
    pub custom: Option<CustomSpec>,
    pub initial: InitialSpec,
    pub udot0: Option<f64>,
    pub span: SpanSpec,
    pub integrator: Option<IntegratorSpec>,
    #[serde(default)]
    pub checks: Vec<String>,
    /// Generators whose charges are written as extra CSV columns.
    #[serde(default)]
    pub charges: Vec<String>,
    /// Coordinate box `[lo, hi]` for point-cloud checks.
    pub bounds: Option<[f64; 2]>,
    /// Rows per trajectory file.
    pub samples: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn param(&self, key: &str) -> Result<f64, CliError> {
        self.params.get(key).copied().ok_or_else(|| {
            config(format!(
                "missing parameter `params.{key}` for system `{}`",
                self.system
            ))
        })
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig, CliError> {
        let mut cfg = IntegratorConfig::default();
        if let Some(spec) = &self.integrator {
            if let Some(v) = spec.rtol {
                cfg.rtol = v;
            }
            if let Some(v) = spec.atol {
                cfg.atol = v;
            }
            if let Some(v) = spec.max_steps {
                cfg.max_steps = v;
            }
            if let Some(v) = spec.max_step {
                cfg.max_step = v;
            }
        }
        cfg.validate().map_err(|e| build_error("integrator", e))?;
        Ok(cfg)
    }

    pub fn initial_state(&self) -> ReducedState {
        ReducedState::new(
            self.initial.x.clone(),
            self.initial.xp.clone(),
            self.initial.u,
            self.initial.w,
        )
    }

    fn potential(&self) -> &str {
        self.potential
            .as_deref()
            .unwrap_or(systems::DEFAULT_POTENTIAL)
    }

    /// Catalog entry selected by the scenario.
    pub fn entry(&self) -> Result<CatalogEntry, CliError> {
        if self.system != "custom" && self.custom.is_some() {
            return Err(config("`custom` is only allowed with system \"custom\""));
        }
        if self.potential.is_some() && !self.system.starts_with("damped-") {
            return Err(config(
                "`potential` is only allowed with the damped systems",
            ));
        }
        let ctx = |e| build_error(&format!("system `{}`", self.system), e);
        let entry = match self.system.as_str() {
            "free" => systems::free_particle(self.initial.x.len()).map_err(ctx)?,
            "harmonic" => systems::harmonic_oscillator(self.param("omega")?).map_err(ctx)?,
            "damped-time" => systems::damped_time_dependent_with(
                self.param("gamma")?,
                self.potential(),
                &self.params,
            )
            .map_err(ctx)?,
            "damped-action" => systems::damped_action_dependent_with(
                self.param("gamma")?,
                self.potential(),
                &self.params,
            )
            .map_err(ctx)?,
            "custom" => {
                let spec = self
                    .custom
                    .as_ref()
                    .ok_or_else(|| config("system \"custom\" requires a `custom` object"))?;
                systems::custom_system(spec, &self.params).map_err(ctx)?
            }
            other => {
                return Err(config(format!(
                    "unknown system `{other}`; expected one of {}",
                    systems::CATALOG.join(", ")
                )))
            }
        };
        Ok(entry)
    }

    /// Validate everything that can be checked before running.
    pub fn validate(&self) -> Result<CatalogEntry, CliError> {
        let entry = self.entry()?;
        let n = entry.system.n();
        if self.initial.x.len() != n || self.initial.xp.len() != n {
            return Err(config(format!(
                "`initial.x` and `initial.xp` must have {n} entries for system `{}`",
                self.system
            )));
        }
        if !self.initial_state().is_finite() {
            return Err(config("`initial` must be finite"));
        }
        if !(self.span.to > self.span.from) {
            return Err(config("`span.to` must exceed `span.from`"));
        }
        if self.span.from != self.initial.u {
            return Err(config("`span.from` must equal `initial.u`"));
        }
        if let Some(ud) = self.udot0 {
            if !(ud > 0.0) {
                return Err(config(format!("`udot0` must be positive, got {ud}")));
            }
        }
        if let Some([lo, hi]) = self.bounds {
            if !(hi > lo) {
                return Err(config("`bounds` must be [lo, hi] with hi > lo"));
            }
        }
        if self.samples == Some(0) {
            return Err(config("`samples` must be positive"));
        }
        for c in &self.charges {
            if entry.generator(c).is_none() {
                return Err(config(format!(
                    "`charges` names unknown generator `{c}`; known: {}",
                    entry.generator_names().join(", ")
                )));
            }
        }
        self.integrator_config()?;
        Ok(entry)
    }

    pub fn udot0(&self) -> f64 {
        self.udot0.unwrap_or(1.0)
    }

    pub fn bounds(&self) -> (f64, f64) {
        let [lo, hi] = self.bounds.unwrap_or([-1.0, 1.0]);
        (lo, hi)
    }

    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(
            self.span.from,
            self.span.to,
            self.samples.unwrap_or(DEFAULT_SAMPLES),
        )
    }
}

/// One report line.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportRow {
    pub check: String,
    /// `pass`, `fail` or `info`.
    pub status: String,
    pub residual: f64,
    pub tol: f64,
    pub seconds: f64,
    /// Identifier of the property this row certifies.
    pub certifies: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

impl ReportRow {
    pub fn passed(&self) -> bool {
        self.status != "fail"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report rows serialise")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
}

impl RunReport {
    pub fn json_lines(&self) -> String {
        self.rows.iter().map(|r| r.to_json() + "\n").collect()
    }

    pub fn failures(&self) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| !r.passed())
            .map(|r| r.check.clone())
            .collect()
    }

    pub fn summary(&self) -> String {
        self.rows
            .iter()
            .map(|r| {
                let detail = r
                    .detail
                    .as_deref()
                    .map(|d| format!("  {d}"))
                    .unwrap_or_default();
                format!(
                    "{:<28} {:<4} residual {:>10.3e}  tol {:>8.1e}  [{}]{detail}\n",
                    r.check, r.status, r.residual, r.tol, r.certifies
                )
            })
            .collect()
    }
}

fn row(
    check: &str,
    certifies: &str,
    residual: f64,
    tol: f64,
    start: Instant,
    detail: Option<String>,
) -> ReportRow {
    ReportRow {
        check: check.to_string(),
        status: if residual <= tol { "pass" } else { "fail" }.to_string(),
        residual,
        tol,
        seconds: start.elapsed().as_secs_f64(),
        certifies: certifies.to_string(),
        detail,
    }
}

/// Both pipelines for one scenario.
pub struct Runs {
    pub metric: BrinkmannMetric,
    pub geodesic: GeodesicTrajectory,
    pub reduced: ReducedTrajectory,
    pub herglotz: ReducedTrajectory,
}

pub fn run_pipelines(sc: &Scenario, entry: &CatalogEntry) -> Result<Runs, CliError> {
    let cfg = sc.integrator_config()?;
    let metric = BrinkmannMetric::new(entry.system.clone());
    let rs0 = sc.initial_state();
    let num = CliError::Numerical;
    let gs0 = lift_state(&entry.system, &rs0, sc.udot0()).map_err(num)?;
    let geodesic = integrate_geodesic_to_u(&metric, &gs0, sc.span.to, &cfg).map_err(num)?;
    let reduced = reduce_trajectory(&metric, &geodesic, &sc.grid()).map_err(num)?;
    let herglotz = integrate_herglotz(&entry.system, &rs0, sc.span.to, &cfg).map_err(num)?;
    Ok(Runs {
        metric,
        geodesic,
        reduced,
        herglotz,
    })
}

fn trajectory_table(
    entry: &CatalogEntry,
    traj: &ReducedTrajectory,
    grid: &[f64],
    charges: &[String],
) -> Result<Table, CliError> {
    let n = entry.system.n();
    let mut header = vec!["u".to_string(), "sigma".to_string()];
    header.extend((1..=n).map(|k| format!("x{k}")));
    header.extend((1..=n).map(|k| format!("xp{k}")));
    header.push("w".into());
    header.push("null_residual".into());
    for c in charges {
        header.push(format!("Q_{c}"));
        header.push(format!("Qnl_{c}"));
    }
    let mut table = Table::new(header);
    let num = CliError::Numerical;
    // resample onto the grid so both files share rows
    let samples: Vec<ReducedState> = grid
        .iter()
        .map(|&u| {
            traj.at(u).ok_or(CliError::Numerical(Error::OutOfRange {
                u,
                from: traj.u_range().0,
                to: traj.u_range().1,
            }))
        })
        .collect::<Result<_, _>>()?;
    let sigma_at = |k: usize| -> f64 {
        match traj.sigma() {
            Some(s) if s.len() == grid.len() => s[k],
            _ => grid[k],
        }
    };
    let series = charges
        .iter()
        .map(|c| {
            let g = entry.generator(c).expect("validated generator");
            nonlocal_charge_on(entry, g, traj, &samples)
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (k, rs) in samples.iter().enumerate() {
        let null = if traj.sigma().is_some() {
            traj.inner().samples()[k].monitor
        } else {
            let gs = lift_state(&entry.system, rs, 1.0).map_err(num)?;
            crate::dynamics::null_residual(&BrinkmannMetric::new(entry.system.clone()), &gs)
                .map_err(num)?
        };
        let mut cells = vec![rs.u, sigma_at(k)];
        cells.extend(&rs.x);
        cells.extend(&rs.xp);
        cells.push(rs.w);
        cells.push(null);
        for (q, qnl) in &series {
            cells.push(q[k]);
            cells.push(qnl[k]);
        }
        table.push(&cells);
    }
    Ok(table)
}

/// `Q` and its nonlocal form at the grid rows. The integrating factor uses
/// Simpson's rule between rows with the midpoint read from `traj`.
fn nonlocal_charge_on(
    entry: &CatalogEntry,
    gen: &SymmetryGenerator,
    traj: &ReducedTrajectory,
    states: &[ReducedState],
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let num = CliError::Numerical;
    let n = entry.system.n();
    let dlw = |rs: &ReducedState| -> Result<f64, CliError> {
        let jet = entry.system.jet(&rs.point().coords()).map_err(num)?;
        let xp = nalgebra::DVector::from_column_slice(&rs.xp);
        Ok(0.5 * xp.dot(&(&jet.dh[n + 1] * &xp)) + jet.da[n + 1].dot(&xp) - jet.dv[n + 1])
    };
    let mut q = Vec::with_capacity(states.len());
    let mut qnl = Vec::with_capacity(states.len());
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for rs in states {
        let f = dlw(rs)?;
        if let Some((u0, f0)) = prev {
            let mid = 0.5 * (u0 + rs.u);
            let fm = match traj.at(mid) {
                Some(m) => dlw(&m)?,
                None => 0.5 * (f0 + f),
            };
            integral += (rs.u - u0) / 6.0 * (f0 + 4.0 * fm + f);
        }
        prev = Some((rs.u, f));
        let local = noether_charge(&entry.system, gen, rs).map_err(CliError::Numerical)?;
        q.push(local);
        qnl.push((-integral).exp() * local);
    }
    Ok((q, qnl))
}

/// Resolve the output directory: explicit override, else the scenario's
/// `out_dir` relative to the scenario file, else `<scenario dir>/out`.
pub fn output_dir(sc: &Scenario, scenario_path: &Path, override_dir: Option<&Path>) -> PathBuf {
    if let Some(d) = override_dir {
        return d.to_path_buf();
    }
    let base = scenario_path.parent().unwrap_or(Path::new("."));
    match &sc.out_dir {
        Some(d) if d.is_absolute() => d.clone(),
        Some(d) => base.join(d),
        None => base.join("out"),
    }
}

/// Lift, integrate, reduce, integrate the reduced system directly, write
/// `geodesic.csv`, `herglotz.csv` and `report.jsonl`.
pub fn cmd_run(scenario_path: &Path, out_override: Option<&Path>) -> Result<RunReport, CliError> {
    let sc = Scenario::load(scenario_path)?;
    let entry = sc.validate()?;
    let start = Instant::now();
    let runs = run_pipelines(&sc, &entry)?;
    let grid = sc.grid();
    let geo_table = trajectory_table(&entry, &runs.reduced, &grid, &sc.charges)?;
    let her_table = trajectory_table(&entry, &runs.herglotz, &grid, &sc.charges)?;

    let mut report = RunReport::default();
    let gap = runs
        .reduced
        .sup_gap_x(&runs.herglotz, &grid)
        .ok_or_else(|| CliError::Numerical(Error::InvalidConfig("grid outside runs".into())))?;
    report.rows.push(row(
        "equivalence",
        "lift-reduce-equivalence",
        gap,
        1e-6,
        start,
        Some(format!("max |dx| over {} rows", grid.len())),
    ));
    let t = Instant::now();
    report.rows.push(row(
        "null",
        "null-constraint-conservation",
        runs.geodesic.max_null_residual(),
        1e-8,
        t,
        Some(format!(
            "max |L|/udot^2 = {:.3e}",
            runs.geodesic.max_scaled_null_residual()
        )),
    ));

    let dir = output_dir(&sc, scenario_path, out_override);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("geodesic.csv"), geo_table.render())?;
    std::fs::write(dir.join("herglotz.csv"), her_table.render())?;
    std::fs::write(dir.join("report.jsonl"), report.json_lines())?;
    log::info!("wrote trajectories to {}", dir.display());
    Ok(report)
}

/// Names accepted by `cmd_check`. Generator checks take `:<generator>`.
pub const CHECKS: [&str; 14] = [
    "killing:<gen>",
    "degreewise:<gen>",
    "symmetry:<gen>",
    "charge:<gen>",
    "nonlocal-charge:<gen>",
    "affine-charge:<gen>",
    "conformal-pair",
    "transform-rule",
    "homogeneity",
    "null",
    "u-equation",
    "w-equation",
    "equivalence",
    "reparametrization",
];

struct CheckContext<'a> {
    sc: &'a Scenario,
    entry: &'a CatalogEntry,
    runs: Option<Runs>,
}

impl CheckContext<'_> {
    fn runs(&mut self) -> Result<&Runs, CliError> {
        if self.runs.is_none() {
            self.runs = Some(run_pipelines(self.sc, self.entry)?);
        }
        Ok(self.runs.as_ref().expect("just set"))
    }

    fn generator(&self, name: &str) -> Result<&SymmetryGenerator, CliError> {
        self.entry.generator(name).ok_or_else(|| {
            config(format!(
                "unknown generator `{name}` for system `{}`; known: {}",
                self.sc.system,
                self.entry.generator_names().join(", ")
            ))
        })
    }

    fn damped_pair(&self) -> Result<(CatalogEntry, CatalogEntry, f64), CliError> {
        if !self.sc.system.starts_with("damped-") {
            return Err(config(
                "this check needs system damped-time or damped-action",
            ));
        }
        let gamma = self.sc.param("gamma")?;
        let pot = self.sc.potential();
        let a = systems::damped_time_dependent_with(gamma, pot, &self.sc.params)
            .map_err(|e| build_error("damped-time", e))?;
        let b = systems::damped_action_dependent_with(gamma, pot, &self.sc.params)
            .map_err(|e| build_error("damped-action", e))?;
        Ok((a, b, gamma))
    }
}

fn split_check(name: &str) -> (&str, Option<&str>) {
    match name.split_once(':') {
        Some((k, g)) => (k, Some(g)),
        None => (name, None),
    }
}

fn known_check(name: &str) -> bool {
    let (kind, gen) = split_check(name);
    CHECKS.iter().any(|c| {
        let (ck, cg) = split_check(c);
        ck == kind && cg.is_some() == gen.is_some()
    })
}

fn run_check(ctx: &mut CheckContext<'_>, name: &str) -> Result<ReportRow, CliError> {
    let start = Instant::now();
    let num = CliError::Numerical;
    let (lo, hi) = ctx.sc.bounds();
    let n = ctx.entry.system.n();
    let system = ctx.entry.system.clone();
    let (kind, gen_name) = split_check(name);
    let gen = match gen_name {
        Some(g) => Some(ctx.generator(g)?.clone()),
        None => None,
    };
    let out = match kind {
        "killing" => {
            let gen = gen.expect("generator check");
            let metric = BrinkmannMetric::new(system);
            let (mut worst, mut lmin, mut lmax) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
            for p in cloud::points(n, lo, hi, cloud::CLOUD_SIZE) {
                let (r, l) = killing_residual(&metric, &gen, &p).map_err(num)?;
                worst = worst.max(r);
                lmin = lmin.min(l);
                lmax = lmax.max(l);
            }
            row(
                name,
                "conformal-killing-equation",
                worst,
                1e-8,
                start,
                Some(format!("lambda in [{lmin:.6e}, {lmax:.6e}]")),
            )
        }
        "degreewise" => {
            let gen = gen.expect("generator check");
            let mut worst = [0.0f64; 5];
            for p in cloud::points(n, lo, hi, cloud::CLOUD_SIZE) {
                let r = degreewise_identities(&system, &gen, &p).map_err(num)?;
                for (w, v) in worst.iter_mut().zip(r) {
                    *w = w.max(v);
                }
            }
            let max = worst.iter().fold(0.0f64, |m, v| m.max(*v));
            row(
                name,
                "degree-split-symmetry-identities",
                max,
                1e-10,
                start,
                Some(format!("per identity {worst:.3?}")),
            )
        }
        "symmetry" => {
            let gen = gen.expect("generator check");
            let mut worst = 0.0f64;
            for rs in cloud::states(n, lo, hi, cloud::CLOUD_SIZE) {
                worst = worst.max(symmetry_condition_residual(&system, &gen, &rs).map_err(num)?);
            }
            row(
                name,
                "herglotz-symmetry-condition",
                worst,
                1e-10,
                start,
                None,
            )
        }
        "charge" | "nonlocal-charge" => {
            let gen = gen.expect("generator check");
            let runs = ctx.runs()?;
            let series = nonlocal_charge(&system, &gen, &runs.herglotz).map_err(num)?;
            if kind == "charge" {
                row(
                    name,
                    "noether-charge-conservation",
                    series.local_drift(),
                    1e-6,
                    start,
                    None,
                )
            } else {
                row(
                    name,
                    "nonlocal-noether-charge",
                    series.nonlocal_drift(),
                    1e-6,
                    start,
                    Some(format!("plain charge drift {:.3e}", series.local_drift())),
                )
            }
        }
        "affine-charge" => {
            let gen = gen.expect("generator check");
            let runs = ctx.runs()?;
            let mut worst = 0.0f64;
            for k in 0..runs.geodesic.len() {
                let gs = runs.geodesic.state(k);
                let ud = gs.udot();
                let rs = ReducedState::new(
                    gs.point.x.clone(),
                    gs.velocity[..n].iter().map(|v| v / ud).collect(),
                    gs.point.u,
                    gs.point.w,
                );
                let lhs = affine_charge(&runs.metric, &gen, &gs).map_err(num)?;
                let rhs = ud * noether_charge(&system, &gen, &rs).map_err(num)?;
                worst = worst.max((lhs - rhs).abs());
            }
            row(
                name,
                "affine-charge-equals-udot-times-q",
                worst,
                1e-10,
                start,
                None,
            )
        }
        "conformal-pair" => {
            let (a, b, gamma) = ctx.damped_pair()?;
            let (map, factor) = systems::damped_conformal_map(gamma, a.system.n()).map_err(num)?;
            let (ma, mb) = (
                BrinkmannMetric::new(a.system.clone()),
                BrinkmannMetric::new(b.system),
            );
            let mut worst = 0.0f64;
            for p in cloud::points(a.system.n(), lo, hi, cloud::CLOUD_SIZE) {
                worst =
                    worst.max(conformal_pullback_check(&ma, &mb, &map, &p, &factor).map_err(num)?);
            }
            row(
                name,
                "conformal-equivalence-of-damped-metrics",
                worst,
                1e-12,
                start,
                Some("factor exp(-gamma*u)".into()),
            )
        }
        "transform-rule" => {
            let (a, b, gamma) = ctx.damped_pair()?;
            let (map, _) = systems::damped_conformal_map(gamma, a.system.n()).map_err(num)?;
            let mut worst = 0.0f64;
            for rs in cloud::states(a.system.n(), lo, hi, cloud::CLOUD_SIZE) {
                worst =
                    worst.max(transform_rule_check(&a.system, &b.system, &map, &rs).map_err(num)?);
            }
            row(
                name,
                "herglotz-transformation-rule",
                worst,
                1e-12,
                start,
                None,
            )
        }
        "homogeneity" => {
            let mut worst = 0.0f64;
            for (k, rs) in cloud::states(n, lo, hi, cloud::CLOUD_SIZE)
                .iter()
                .enumerate()
            {
                let udot = 0.5 + (k % 7) as f64 * 0.25;
                worst = worst
                    .max(crate::dynamics::homogeneity_residual(&system, rs, udot).map_err(num)?);
            }
            row(
                name,
                "velocity-homogeneity-identity",
                worst,
                1e-12,
                start,
                None,
            )
        }
        "null" => {
            let runs = ctx.runs()?;
            row(
                name,
                "null-constraint-conservation",
                runs.geodesic.max_null_residual(),
                1e-8,
                start,
                Some(format!(
                    "max |L|/udot^2 = {:.3e}",
                    runs.geodesic.max_scaled_null_residual()
                )),
            )
        }
        "u-equation" => {
            let runs = ctx.runs()?;
            let r = u_equation_residual(&runs.metric, &runs.geodesic).map_err(num)?;
            row(name, "u-acceleration-relation", r, 1e-8, start, None)
        }
        "w-equation" => {
            let runs = ctx.runs()?;
            let r = w_equation_residual(&runs.metric, &runs.geodesic).map_err(num)?;
            row(name, "w-equation-redundancy", r, 1e-7, start, None)
        }
        "equivalence" => {
            let grid = ctx.sc.grid();
            let runs = ctx.runs()?;
            let gap = runs
                .reduced
                .sup_gap_x(&runs.herglotz, &grid)
                .unwrap_or(f64::INFINITY);
            row(name, "lift-reduce-equivalence", gap, 1e-6, start, None)
        }
        "reparametrization" => {
            let cfg = ctx.sc.integrator_config()?;
            let grid = ctx.sc.grid();
            let metric = BrinkmannMetric::new(system.clone());
            let rs0 = ctx.sc.initial_state();
            let mut reduced = Vec::new();
            for ud in [0.5, 1.0, 2.0] {
                let gs = lift_state(&system, &rs0, ud).map_err(num)?;
                let g = integrate_geodesic_to_u(&metric, &gs, ctx.sc.span.to, &cfg).map_err(num)?;
                reduced.push(reduce_trajectory(&metric, &g, &grid).map_err(num)?);
            }
            let gap = reduced[1..]
                .iter()
                .map(|r| r.sup_gap_x(&reduced[0], &grid).unwrap_or(f64::INFINITY))
                .fold(0.0f64, f64::max);
            row(
                name,
                "reparametrization-invariance",
                gap,
                1e-9,
                start,
                Some("udot0 in {0.5, 1, 2}".into()),
            )
        }
        _ => return Err(config(format!("unknown check `{name}`"))),
    };
    Ok(out)
}

/// Run the named checks (or the scenario's `checks` when `names` is empty).
pub fn cmd_check(scenario_path: &Path, names: &[String]) -> Result<RunReport, CliError> {
    let sc = Scenario::load(scenario_path)?;
    let entry = sc.validate()?;
    let names: Vec<String> = if names.is_empty() {
        sc.checks.clone()
    } else {
        names.to_vec()
    };
    if names.is_empty() {
        return Err(config("no checks requested"));
    }
    if let Some(bad) = names.iter().find(|c| !known_check(c)) {
        return Err(config(format!(
            "unknown check `{bad}`; available: {}",
            CHECKS.join(", ")
        )));
    }
    let mut ctx = CheckContext {
        sc: &sc,
        entry: &entry,
        runs: None,
    };
    let mut report = RunReport::default();
    for name in &names {
        report.rows.push(run_check(&mut ctx, name)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ListingEntry {
    pub name: String,
    pub generators: Vec<String>,
    pub params: Vec<String>,
    pub notes: String,
}

/// The catalog with the parameters each entry needs.
pub fn cmd_list() -> Vec<ListingEntry> {
    let sample = |name: &str, entry: Option<CatalogEntry>, params: &[&str], notes: &str| {
        let generators = entry
            .as_ref()
            .map(CatalogEntry::generator_names)
            .unwrap_or_default();
        ListingEntry {
            name: name.to_string(),
            generators,
            params: params.iter().map(|s| s.to_string()).collect(),
            notes: entry.map(|e| e.notes).unwrap_or_else(|| notes.to_string()),
        }
    };
    vec![
        sample("free", systems::free_particle(1).ok(), &[], ""),
        sample(
            "harmonic",
            systems::harmonic_oscillator(1.0).ok(),
            &["omega"],
            "",
        ),
        sample(
            "damped-time",
            systems::damped_time_dependent(0.2, systems::DEFAULT_POTENTIAL).ok(),
            &["gamma"],
            "",
        ),
        sample(
            "damped-action",
            systems::damped_action_dependent(0.2, systems::DEFAULT_POTENTIAL).ok(),
            &["gamma"],
            "",
        ),
        sample(
            "custom",
            None,
            &[],
            "h, A, V and generators from expressions",
        ),
    ]
}

pub fn render_listing(entries: &[ListingEntry], json: bool) -> String {
    if json {
        return serde_json::to_string_pretty(entries).expect("listing serialises") + "\n";
    }
    let mut out = String::new();
    for e in entries {
        let gens = if e.generators.is_empty() {
            "-".to_string()
        } else {
            e.generators.join(", ")
        };
        let params = if e.params.is_empty() {
            String::new()
        } else {
            format!(" (params: {})", e.params.join(", "))
        };
        out += &format!(
            "{}{params}\n    generators: {gens}\n    {}\n",
            e.name, e.notes
        );
    }
    out
}
