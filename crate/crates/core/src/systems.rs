//! Ready-made systems with their known symmetry generators and reference
//! solutions.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;

use crate::expr::{self, Field};
use crate::geometry::{CoordinateMap, HerglotzSystem};
use crate::symmetry::SymmetryGenerator;
use crate::{Error, Result};

/// Names addressable from scenario files.
pub const CATALOG: [&str; 5] = ["free", "harmonic", "damped-time", "damped-action", "custom"];

/// Potential used when a damped entry is built without one.
pub const DEFAULT_POTENTIAL: &str = "0.5*x1^2";

/// Exact reduced solutions `x(u)` for one-dimensional entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    Free,
    Harmonic { omega: f64 },
    Damped { gamma: f64 },
}

impl ClosedForm {
    /// `x(u)` for `x(u0) = x0`, `x'(u0) = v0`.
    pub fn x(&self, x0: f64, v0: f64, u0: f64, u: f64) -> Result<f64> {
        let s = u - u0;
        match *self {
            ClosedForm::Free | ClosedForm::Harmonic { omega: 0.0 } => Ok(x0 + v0 * s),
            ClosedForm::Harmonic { omega } => {
                Ok(x0 * (omega * s).cos() + v0 / omega * (omega * s).sin())
            }
            ClosedForm::Damped { gamma } => closed_form_damped(x0, v0, gamma, s),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub system: Arc<HerglotzSystem>,
    pub generators: Vec<SymmetryGenerator>,
    pub closed_form: Option<ClosedForm>,
    pub params: BTreeMap<String, f64>,
    pub notes: String,
}

impl CatalogEntry {
    pub fn generator(&self, name: &str) -> Option<&SymmetryGenerator> {
        self.generators.iter().find(|g| g.name() == name)
    }

    pub fn generator_names(&self) -> Vec<String> {
        self.generators
            .iter()
            .map(|g| g.name().to_string())
            .collect()
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn diagonal(n: usize, entry: &str) -> Vec<Vec<String>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        entry.to_string()
                    } else {
                        "0".to_string()
                    }
                })
                .collect()
        })
        .collect()
}

fn zeros(n: usize) -> Vec<String> {
    vec!["0".to_string(); n]
}

fn generator(
    name: &str,
    n: usize,
    dx: &[(usize, &str)],
    du: &str,
    dw: &str,
    p: &BTreeMap<String, f64>,
) -> SymmetryGenerator {
    let mut comps = zeros(n);
    for &(i, e) in dx {
        comps[i] = e.to_string();
    }
    SymmetryGenerator::from_expressions(name, &comps, du, dw, p)
        .expect("catalog generator compiles")
}

fn time_translation(n: usize) -> SymmetryGenerator {
    generator("du", n, &[], "1", "0", &BTreeMap::new())
}

fn action_shift(n: usize) -> SymmetryGenerator {
    generator("dw", n, &[], "0", "1", &BTreeMap::new())
}

/// Free particle in `n` dimensions: `h = δ`, `A = 0`, `V = 0`.
pub fn free_particle(n: usize) -> Result<CatalogEntry> {
    if n == 0 {
        return Err(Error::InvalidConfig("free particle needs n >= 1".into()));
    }
    let system = HerglotzSystem::from_expressions(
        "free",
        &diagonal(n, "1"),
        &zeros(n),
        "0",
        &BTreeMap::new(),
    )?;
    let mut generators: Vec<SymmetryGenerator> = (0..n)
        .map(|i| {
            generator(
                &format!("dx{}", i + 1),
                n,
                &[(i, "1")],
                "0",
                "0",
                &BTreeMap::new(),
            )
        })
        .collect();
    generators.push(time_translation(n));
    generators.push(action_shift(n));
    Ok(CatalogEntry {
        system: Arc::new(system),
        generators,
        closed_form: Some(ClosedForm::Free),
        params: BTreeMap::new(),
        notes: "flat lift; translations, time translation and action shift".into(),
    })
}

/// One-dimensional oscillator `V = ½ ω² x²`.
pub fn harmonic_oscillator(omega: f64) -> Result<CatalogEntry> {
    if !(omega >= 0.0) || !omega.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "omega must be non-negative, got {omega}"
        )));
    }
    let p = params(&[("omega", omega)]);
    let system = HerglotzSystem::from_expressions(
        "harmonic",
        &diagonal(1, "1"),
        &zeros(1),
        "0.5*omega^2*x1^2",
        &p,
    )?;
    Ok(CatalogEntry {
        system: Arc::new(system),
        generators: vec![time_translation(1), action_shift(1)],
        closed_form: Some(ClosedForm::Harmonic { omega }),
        params: p,
        notes: "standard lift; the du charge is minus the energy".into(),
    })
}

fn potential_dim(v_expr: &str) -> Result<usize> {
    let ast = expr::parse(v_expr)?;
    Ok(ast.max_coordinate_index().max(1))
}

fn is_default_potential(v_expr: &str) -> bool {
    v_expr.split_whitespace().collect::<String>() == DEFAULT_POTENTIAL
}

fn merged(gamma: f64, extra: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut p = extra.clone();
    p.insert("gamma".into(), gamma);
    p
}

/// `𝓛 = e^{γu}(½ x'² − V(x))`: `h = e^{γu} δ`, `V_lift = e^{γu} V`.
pub fn damped_time_dependent(gamma: f64, v_expr: &str) -> Result<CatalogEntry> {
    damped_time_dependent_with(gamma, v_expr, &BTreeMap::new())
}

/// As [`damped_time_dependent`], with extra parameters visible to `v_expr`.
pub fn damped_time_dependent_with(
    gamma: f64,
    v_expr: &str,
    extra: &BTreeMap<String, f64>,
) -> Result<CatalogEntry> {
    let n = potential_dim(v_expr)?;
    let p = merged(gamma, extra);
    let system = HerglotzSystem::from_expressions(
        "damped-time",
        &diagonal(n, "exp(gamma*u)"),
        &zeros(n),
        &format!("exp(gamma*u)*({v_expr})"),
        &p,
    )?;
    let generators = vec![
        generator("du-rescale", n, &[], "1", "gamma*w", &p),
        action_shift(n),
    ];
    Ok(CatalogEntry {
        system: Arc::new(system),
        generators,
        closed_form: (n == 1 && is_default_potential(v_expr))
            .then_some(ClosedForm::Damped { gamma }),
        params: p,
        notes: "time-dependent damping; du-rescale is conformal Killing with factor gamma".into(),
    })
}

/// `𝓛 = ½ x'² − V(x) − γ w`: `h = δ`, `V_lift = V + γ w`.
pub fn damped_action_dependent(gamma: f64, v_expr: &str) -> Result<CatalogEntry> {
    damped_action_dependent_with(gamma, v_expr, &BTreeMap::new())
}

/// As [`damped_action_dependent`], with extra parameters visible to `v_expr`.
pub fn damped_action_dependent_with(
    gamma: f64,
    v_expr: &str,
    extra: &BTreeMap<String, f64>,
) -> Result<CatalogEntry> {
    let n = potential_dim(v_expr)?;
    let p = merged(gamma, extra);
    let system = HerglotzSystem::from_expressions(
        "damped-action",
        &diagonal(n, "1"),
        &zeros(n),
        &format!("{v_expr} + gamma*w"),
        &p,
    )?;
    Ok(CatalogEntry {
        system: Arc::new(system),
        generators: vec![time_translation(n)],
        closed_form: (n == 1 && is_default_potential(v_expr))
            .then_some(ClosedForm::Damped { gamma }),
        params: p,
        notes:
            "action-dependent damping; the du charge is conserved only with its integrating factor"
                .into(),
    })
}

/// `Φ(x, u, w) = (x, u, e^{−γu} w)` and `Ω = e^{−γu}`, taking the
/// time-dependent damped metric to the action-dependent one.
pub fn damped_conformal_map(gamma: f64, n: usize) -> Result<(CoordinateMap, Field)> {
    let p = params(&[("gamma", gamma)]);
    let x: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
    let map = CoordinateMap::from_expressions(&x, "u", "exp(-gamma*u)*w", &p)?;
    let factor = Field::compile("Omega", "exp(-gamma*u)", n, &p)?;
    Ok((map, factor))
}

/// Underdamped solution of `x'' + γ x' + x = 0` with `x(0) = x0`,
/// `x'(0) = v0`.
pub fn closed_form_damped(x0: f64, v0: f64, gamma: f64, u: f64) -> Result<f64> {
    if gamma >= 2.0 {
        return Err(Error::OverdampedUnsupported(gamma));
    }
    if !(gamma > -2.0) {
        return Err(Error::InvalidConfig(format!(
            "gamma = {gamma} is outside (-2, 2)"
        )));
    }
    let wd = (1.0 - 0.25 * gamma * gamma).sqrt();
    Ok((-0.5 * gamma * u).exp()
        * (x0 * (wd * u).cos() + (v0 + 0.5 * gamma * x0) / wd * (wd * u).sin()))
}

/// User-declared generator in a custom system.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub name: String,
    pub dx: Vec<String>,
    #[serde(default = "zero_text")]
    pub du: String,
    #[serde(default = "zero_text")]
    pub dw: String,
}

fn zero_text() -> String {
    "0".into()
}

/// Expressions for a custom system. `A` defaults to zero.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CustomSpec {
    pub h: Vec<Vec<String>>,
    #[serde(default)]
    pub a: Option<Vec<String>>,
    #[serde(default = "zero_text")]
    pub v: String,
    #[serde(default)]
    pub generators: Vec<GeneratorSpec>,
}

pub fn custom_system(spec: &CustomSpec, params: &BTreeMap<String, f64>) -> Result<CatalogEntry> {
    let n = spec.h.len();
    if n == 0 {
        return Err(Error::InvalidConfig(
            "custom h must have at least one row".into(),
        ));
    }
    let a = spec.a.clone().unwrap_or_else(|| zeros(n));
    let system = HerglotzSystem::from_expressions("custom", &spec.h, &a, &spec.v, params)?;
    let generators = spec
        .generators
        .iter()
        .map(|g| {
            if g.dx.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: g.dx.len(),
                });
            }
            SymmetryGenerator::from_expressions(g.name.clone(), &g.dx, &g.du, &g.dw, params)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CatalogEntry {
        system: Arc::new(system),
        generators,
        closed_form: None,
        params: params.clone(),
        notes: "user-declared fields".into(),
    })
}
