//! Brinkmann metric assembled from a Herglotz system, and the metric
//! algebra built on it.
//!
//! With coordinates `(x1..xn, u, w)` the metric has the block form
//!
//! ```text
//!        x      u     w
//! x  [  h_ij   A_i    0 ]
//! u  [  A_j   -2V    -1 ]
//! w  [  0     -1      0 ]
//! ```
//!
//! All partial derivatives come from forward-mode autodiff of the
//! assembled components.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::expr::Field;
use crate::scalar::{seed, Dual, Scalar};
use crate::symmetry::SymmetryGenerator;
use crate::{Error, Result};

/// Relative asymmetry of `h` tolerated before assembly fails.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Smallest |eigenvalue| of `h` below which a warning is logged.
pub const NEAR_SINGULAR_EIGENVALUE: f64 = 1e-8;

/// Condition numbers beyond this are treated as singular.
const MAX_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Vec<f64>,
    /// Time of the reduced dynamics.
    pub u: f64,
    /// Action of the reduced dynamics.
    pub w: f64,
}

impl Point {
    pub fn new(x: Vec<f64>, u: f64, w: f64) -> Self {
        Self { x, u, w }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// `(x1..xn, u, w)`.
    pub fn coords(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.x.len() + 2);
        c.extend_from_slice(&self.x);
        c.push(self.u);
        c.push(self.w);
        c
    }

    pub fn from_coords(coords: &[f64]) -> Self {
        let n = coords.len() - 2;
        Self {
            x: coords[..n].to_vec(),
            u: coords[n],
            w: coords[n + 1],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite()) && self.u.is_finite() && self.w.is_finite()
    }
}

/// Reduced data `(h, A, V)`, each a field over `(x, u, w)`.
#[derive(Debug, Clone)]
pub struct HerglotzSystem {
    name: String,
    n: usize,
    /// Row-major `n × n`.
    h: Vec<Field>,
    a: Vec<Field>,
    v: Field,
}

/// Field values at one point, `h` row-major and symmetrised.
#[derive(Debug, Clone)]
pub struct FieldValues<S> {
    pub h: Vec<S>,
    pub a: Vec<S>,
    pub v: S,
}

/// Values and first partials of `h`, `A`, `V` at a real point.
/// `dh[μ]`, `da[μ]`, `dv[μ]` are derivatives along coordinate `μ`.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub n: usize,
    pub h: DMatrix<f64>,
    pub dh: Vec<DMatrix<f64>>,
    pub a: DVector<f64>,
    pub da: Vec<DVector<f64>>,
    pub v: f64,
    pub dv: DVector<f64>,
}

impl FieldJet {
    pub fn u_index(&self) -> usize {
        self.n
    }

    pub fn w_index(&self) -> usize {
        self.n + 1
    }
}

impl HerglotzSystem {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        h: Vec<Field>,
        a: Vec<Field>,
        v: Field,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        if h.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: h.len(),
            });
        }
        if a.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.len(),
            });
        }
        if let Some(f) = h.iter().chain(&a).chain([&v]).find(|f| f.dim() != n + 2) {
            return Err(Error::DimensionMismatch {
                expected: n + 2,
                found: f.dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            n,
            h,
            a,
            v,
        })
    }

    /// Build from expression text. `h` is given row by row.
    pub fn from_expressions(
        name: impl Into<String>,
        h: &[Vec<String>],
        a: &[String],
        v: &str,
        params: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        let n = h.len();
        if h.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidConfig("h must be a square matrix".into()));
        }
        if a.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.len(),
            });
        }
        let mut hf = Vec::with_capacity(n * n);
        for (i, row) in h.iter().enumerate() {
            for (j, text) in row.iter().enumerate() {
                hf.push(Field::compile(
                    format!("h{}{}", i + 1, j + 1),
                    text,
                    n,
                    params,
                )?);
            }
        }
        let af = a
            .iter()
            .enumerate()
            .map(|(i, t)| Field::compile(format!("A{}", i + 1), t, n, params))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let vf = Field::compile("V", v, n, params)?;
        Self::new(name, n, hf, af, vf)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n + 2
    }

    pub fn h_field(&self, i: usize, j: usize) -> &Field {
        &self.h[i * self.n + j]
    }

    pub fn a_field(&self, i: usize) -> &Field {
        &self.a[i]
    }

    pub fn v_field(&self) -> &Field {
        &self.v
    }

    /// Evaluate `h`, `A`, `V` at `coords`, symmetrising `h`.
    pub fn fields<S: Scalar>(&self, coords: &[S]) -> Result<FieldValues<S>> {
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: coords.len(),
            });
        }
        let eval = |f: &Field| {
            f.eval_at(coords).map_err(|source| Error::FieldEval {
                field: f.label().to_string(),
                source,
            })
        };
        let n = self.n;
        let raw = self.h.iter().map(eval).collect::<Result<Vec<S>>>()?;
        let mut h = raw.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let (hij, hji) = (raw[i * n + j].value(), raw[j * n + i].value());
                let diff = (hij - hji).abs();
                if diff > SYMMETRY_TOLERANCE * hij.abs().max(hji.abs()).max(1.0) {
                    return Err(Error::AsymmetricMetric { i, j, diff });
                }
                let sym = (raw[i * n + j].clone() + raw[j * n + i].clone()).scale(0.5);
                h[i * n + j] = sym.clone();
                h[j * n + i] = sym;
            }
        }
        let a = self.a.iter().map(eval).collect::<Result<Vec<S>>>()?;
        let v = eval(&self.v)?;
        Ok(FieldValues { h, a, v })
    }

    pub fn jet(&self, coords: &[f64]) -> Result<FieldJet> {
        let d = self.dim();
        let n = self.n;
        let vals = self.fields(&seed(coords)?)?;
        let h = DMatrix::from_fn(n, n, |i, j| vals.h[i * n + j].value());
        let dh = (0..d)
            .map(|mu| DMatrix::from_fn(n, n, |i, j| vals.h[i * n + j].partial(mu)))
            .collect();
        let a = DVector::from_fn(n, |i, _| vals.a[i].value());
        let da = (0..d)
            .map(|mu| DVector::from_fn(n, |i, _| vals.a[i].partial(mu)))
            .collect();
        let dv = DVector::from_fn(d, |mu, _| vals.v.partial(mu));
        Ok(FieldJet {
            n,
            h,
            dh,
            a,
            da,
            v: vals.v.value(),
            dv,
        })
    }

    /// Reduced Lagrangian `½ h x'x' + A x' − V` at `(x, x', u, w)`.
    pub fn lagrangian(&self, point: &Point, xp: &[f64]) -> Result<f64> {
        let f = self.fields(&point.coords())?;
        Ok(lagrangian_from(&f, xp))
    }
}

/// `½ h x'x' + A x' − V` for already evaluated fields.
pub(crate) fn lagrangian_from<S: Scalar>(f: &FieldValues<S>, xp: &[f64]) -> S {
    let n = xp.len();
    let mut acc = -f.v.clone();
    for i in 0..n {
        acc = acc + f.a[i].scale(xp[i]);
        for j in 0..n {
            acc = acc + f.h[i * n + j].scale(0.5 * xp[i] * xp[j]);
        }
    }
    acc
}

fn condition_estimate(h: &DMatrix<f64>) -> f64 {
    let sv = h.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub(crate) fn invert_h(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let singular = || Error::SingularMetric {
        condition: condition_estimate(h),
    };
    let inv = h.clone().try_inverse().ok_or_else(singular)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(singular());
    }
    if h.nrows() > 1 && condition_estimate(h) > MAX_CONDITION {
        return Err(singular());
    }
    if h.nrows() == 1 && h[(0, 0)].abs() < f64::MIN_POSITIVE {
        return Err(singular());
    }
    Ok(inv)
}

/// Inverse of the Brinkmann block form given `h⁻¹`, `A`, `V`:
/// `g^{ij} = h^{ij}`, `g^{iw} = h^{ij}A_j`, `g^{uw} = −1`,
/// `g^{ww} = 2V + A h⁻¹ A`, everything else zero.
fn block_inverse(h_inv: &DMatrix<f64>, a: &DVector<f64>, v: f64) -> DMatrix<f64> {
    let n = a.len();
    let d = n + 2;
    let (iu, iw) = (n, n + 1);
    let ha = h_inv * a;
    let mut g = DMatrix::zeros(d, d);
    g.view_mut((0, 0), (n, n)).copy_from(h_inv);
    for i in 0..n {
        g[(i, iw)] = ha[i];
        g[(iw, i)] = ha[i];
    }
    g[(iu, iw)] = -1.0;
    g[(iw, iu)] = -1.0;
    g[(iw, iw)] = 2.0 * v + a.dot(&ha);
    g
}

/// Christoffel symbols of the second kind, `Γ^μ_{νρ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, mu: usize, nu: usize, rho: usize) -> f64 {
        self.data[(mu * self.dim + nu) * self.dim + rho]
    }

    /// `Γ^μ_{νρ} v^ν v^ρ`.
    pub fn contract(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|mu| {
                let mut acc = 0.0;
                for nu in 0..d {
                    for rho in 0..d {
                        acc += self.get(mu, nu, rho) * v[nu] * v[rho];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Metric and its first partial derivatives at one point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `dg[ρ] = ∂_ρ g`.
    pub dg: Vec<DMatrix<f64>>,
}

impl MetricJet {
    pub fn christoffel(&self) -> Christoffel {
        let d = self.g.nrows();
        // first kind, Γ_{σνρ}
        let mut first = vec![0.0; d * d * d];
        for s in 0..d {
            for nu in 0..d {
                for rho in nu..d {
                    let val = 0.5
                        * (self.dg[nu][(s, rho)] + self.dg[rho][(s, nu)] - self.dg[s][(nu, rho)]);
                    first[(s * d + nu) * d + rho] = val;
                    first[(s * d + rho) * d + nu] = val;
                }
            }
        }
        let mut data = vec![0.0; d * d * d];
        for mu in 0..d {
            for nu in 0..d {
                for rho in nu..d {
                    let mut acc = 0.0;
                    for s in 0..d {
                        let gi = self.g_inv[(mu, s)];
                        if gi != 0.0 {
                            acc += gi * first[(s * d + nu) * d + rho];
                        }
                    }
                    data[(mu * d + nu) * d + rho] = acc;
                    data[(mu * d + rho) * d + nu] = acc;
                }
            }
        }
        Christoffel { dim: d, data }
    }
}

/// The lifted `(n+2)`-dimensional metric.
#[derive(Debug, Clone)]
pub struct BrinkmannMetric {
    system: Arc<HerglotzSystem>,
}

impl BrinkmannMetric {
    pub fn new(system: Arc<HerglotzSystem>) -> Self {
        Self { system }
    }

    pub fn system(&self) -> &HerglotzSystem {
        &self.system
    }

    pub fn shared_system(&self) -> Arc<HerglotzSystem> {
        Arc::clone(&self.system)
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Components `g_{μν}` (row-major) over any scalar.
    pub fn components<S: Scalar>(&self, coords: &[S]) -> Result<Vec<S>> {
        let f = self.system.fields(coords)?;
        Ok(assemble(&f))
    }

    pub fn metric_eval(&self, point: &Point) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let g = self.components(&point.coords())?;
        Ok(DMatrix::from_row_slice(d, d, &g))
    }

    /// Inverse metric. Logs a warning when `h` is close to singular.
    pub fn metric_inverse(&self, point: &Point) -> Result<DMatrix<f64>> {
        let f = self.system.fields(&point.coords())?;
        let n = self.system.n();
        let h = DMatrix::from_row_slice(n, n, &f.h);
        let min_eig = h
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, e| m.min(e.abs()));
        if min_eig < NEAR_SINGULAR_EIGENVALUE {
            log::warn!(
                "h is nearly singular at {:?} (smallest |eigenvalue| {min_eig:.3e})",
                point.coords()
            );
        }
        let h_inv = invert_h(&h)?;
        Ok(block_inverse(&h_inv, &DVector::from_vec(f.a), f.v))
    }

    pub fn jet(&self, coords: &[f64]) -> Result<MetricJet> {
        let d = self.dim();
        let n = self.system.n();
        let comps: Vec<Dual> = self.components(&seed(coords)?)?;
        let g = DMatrix::from_fn(d, d, |i, j| comps[i * d + j].value());
        let dg = (0..d)
            .map(|rho| DMatrix::from_fn(d, d, |i, j| comps[i * d + j].partial(rho)))
            .collect();
        let h = g.view((0, 0), (n, n)).into_owned();
        let h_inv = invert_h(&h)?;
        let a = DVector::from_fn(n, |i, _| g[(i, n)]);
        let v = -0.5 * g[(n, n)];
        Ok(MetricJet {
            g_inv: block_inverse(&h_inv, &a, v),
            g,
            dg,
        })
    }

    pub fn christoffel(&self, point: &Point) -> Result<Christoffel> {
        Ok(self.jet(&point.coords())?.christoffel())
    }

    /// `∇_μK_ν + ∇_νK_μ` with `∇_μK_ν = ∂_μ(g_{νσ}K^σ) − Γ^σ_{μν} g_{σρ}K^ρ`.
    pub fn covariant_sym_grad(
        &self,
        gen: &SymmetryGenerator,
        point: &Point,
    ) -> Result<DMatrix<f64>> {
        let coords = point.coords();
        let d = self.dim();
        let seeded = seed(&coords)?;
        let g: Vec<Dual> = self.components(&seeded)?;
        let k: Vec<Dual> = gen.components(&seeded)?;
        let lowered: Vec<Dual> = (0..d)
            .map(|nu| {
                (0..d).fold(Dual::constant(0.0), |acc, s| {
                    acc + g[nu * d + s].clone() * k[s].clone()
                })
            })
            .collect();
        let gamma = self.christoffel(point)?;
        let nabla = DMatrix::from_fn(d, d, |mu, nu| {
            let conn: f64 = (0..d)
                .map(|s| gamma.get(s, mu, nu) * lowered[s].value())
                .sum();
            lowered[nu].partial(mu) - conn
        });
        Ok(&nabla + nabla.transpose())
    }

    /// `λ = (2/(n+2)) g^{μν} ∇_μK_ν`, extracted from the trace.
    pub fn conformal_factor(&self, gen: &SymmetryGenerator, point: &Point) -> Result<f64> {
        let sym = self.covariant_sym_grad(gen, point)?;
        let g_inv = self.metric_inverse(point)?;
        Ok(g_inv.component_mul(&sym).sum() / self.dim() as f64)
    }
}

fn assemble<S: Scalar>(f: &FieldValues<S>) -> Vec<S> {
    let n = f.a.len();
    let d = n + 2;
    let (iu, iw) = (n, n + 1);
    let mut g = vec![S::constant(0.0); d * d];
    for i in 0..n {
        for j in 0..n {
            g[i * d + j] = f.h[i * n + j].clone();
        }
        g[i * d + iu] = f.a[i].clone();
        g[iu * d + i] = f.a[i].clone();
    }
    g[iu * d + iu] = f.v.scale(-2.0);
    g[iu * d + iw] = S::constant(-1.0);
    g[iw * d + iu] = S::constant(-1.0);
    g
}

/// Closed form `λ = ∂_uδu + ∂_wδw − A_i ∂_wδx^i`, valid when the
/// generator satisfies the symmetry identities.
pub fn conformal_factor_closed_form(
    system: &HerglotzSystem,
    gen: &SymmetryGenerator,
    point: &Point,
) -> Result<f64> {
    let n = system.n();
    let coords = point.coords();
    let k = gen.components(&seed(&coords)?)?;
    let f = system.fields(&coords)?;
    let (iu, iw) = (n, n + 1);
    let mut lambda = k[iu].partial(iu) + k[iw].partial(iw);
    for i in 0..n {
        lambda -= f.a[i] * k[i].partial(iw);
    }
    Ok(lambda)
}

/// A smooth map of `(x, u, w)` coordinates, one field per output coordinate.
#[derive(Debug, Clone)]
pub struct CoordinateMap {
    components: Vec<Field>,
}

impl CoordinateMap {
    pub fn new(components: Vec<Field>) -> Result<Self> {
        let d = components.len();
        if let Some(f) = components.iter().find(|f| f.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: f.dim(),
            });
        }
        Ok(Self { components })
    }

    /// `n` coordinate-map expressions for `x`, then `u`, then `w`.
    pub fn from_expressions(
        x: &[String],
        u: &str,
        w: &str,
        params: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        let n = x.len();
        let mut comps = x
            .iter()
            .enumerate()
            .map(|(i, t)| Field::compile(format!("x{}'", i + 1), t, n, params))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        comps.push(Field::compile("u'", u, n, params)?);
        comps.push(Field::compile("w'", w, n, params)?);
        Self::new(comps)
    }

    pub fn identity(n: usize) -> Self {
        let x: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
        Self::from_expressions(&x, "u", "w", &BTreeMap::new()).expect("identity map compiles")
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, k: usize) -> &Field {
        &self.components[k]
    }

    pub fn eval<S: Scalar>(&self, coords: &[S]) -> Result<Vec<S>> {
        self.components
            .iter()
            .map(|f| {
                f.eval_at(coords).map_err(|source| Error::FieldEval {
                    field: f.label().to_string(),
                    source,
                })
            })
            .collect()
    }

    /// Image and Jacobian `J[a][b] = ∂Φ^a/∂x^b`.
    pub fn jacobian(&self, coords: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let d = self.dim();
        let out = self.eval(&seed(coords)?)?;
        let values = out.iter().map(Dual::value).collect();
        let jac = DMatrix::from_fn(d, d, |a, b| out[a].partial(b));
        Ok((values, jac))
    }
}

/// `max |DΦᵀ g_B(Φ(p)) DΦ − Ω(p) g_A(p)|`.
pub fn conformal_pullback_check(
    metric_a: &BrinkmannMetric,
    metric_b: &BrinkmannMetric,
    map: &CoordinateMap,
    point: &Point,
    factor: &Field,
) -> Result<f64> {
    let coords = point.coords();
    let (image, jac) = map.jacobian(&coords)?;
    let g_b = metric_b.metric_eval(&Point::from_coords(&image))?;
    let g_a = metric_a.metric_eval(point)?;
    let omega = factor.eval_at(&coords).map_err(|source| Error::FieldEval {
        field: factor.label().to_string(),
        source,
    })?;
    let pulled = jac.transpose() * g_b * &jac;
    Ok((pulled - g_a * omega).amax())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn system(h: &[&[&str]], a: &[&str], v: &str, p: &[(&str, f64)]) -> HerglotzSystem {
        let h: Vec<Vec<String>> = h
            .iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect();
        let a: Vec<String> = a.iter().map(|s| s.to_string()).collect();
        HerglotzSystem::from_expressions("test", &h, &a, v, &params(p)).unwrap()
    }

    fn metric(s: HerglotzSystem) -> BrinkmannMetric {
        BrinkmannMetric::new(Arc::new(s))
    }

    #[test]
    fn flat_lift_metric_and_inverse() {
        let m = metric(system(&[&["1"]], &["0"], "0", &[]));
        let p = Point::new(vec![0.3], 1.0, -2.0);
        let g = m.metric_eval(&p).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, -1.0, 0.0]);
        assert_eq!(g, expected);
        assert_eq!(m.metric_inverse(&p).unwrap(), expected);
        assert_eq!(m.christoffel(&p).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn scaled_h_inverse() {
        let m = metric(system(&[&["2"]], &["0"], "0", &[]));
        let inv = m.metric_inverse(&Point::new(vec![0.0], 0.0, 0.0)).unwrap();
        assert_eq!(inv[(0, 0)], 0.5);
    }

    #[test]
    fn damped_metrics() {
        let time = metric(system(
            &[&["exp(gamma*u)"]],
            &["0"],
            "exp(gamma*u)*(0.5*x1^2)",
            &[("gamma", 0.2)],
        ));
        let g = time.metric_eval(&Point::new(vec![1.0], 1.0, 0.0)).unwrap();
        assert_eq!(g[(0, 0)], 0.2f64.exp());
        assert!((g[(1, 1)] + 0.2f64.exp()).abs() < 1e-15);

        let action = metric(system(
            &[&["1"]],
            &["0"],
            "0.5*x1^2 + gamma*w",
            &[("gamma", 0.2)],
        ));
        let g = action
            .metric_eval(&Point::new(vec![0.0], 0.0, 3.0))
            .unwrap();
        assert!((g[(1, 1)] + 1.2).abs() < 1e-15);
        assert_eq!(g[(1, 2)], -1.0);
        assert_eq!(g[(2, 2)], 0.0);
    }

    #[test]
    fn general_inverse_residual() {
        let m = metric(system(
            &[&["2 + sin(x1*u)", "0.3*w"], &["0.3*w", "1.5 + x2^2"]],
            &["x2*u", "cos(w)"],
            "x1^2 + w*u",
            &[],
        ));
        let p = Point::new(vec![0.4, -0.7], 0.9, 0.5);
        let g = m.metric_eval(&p).unwrap();
        let gi = m.metric_inverse(&p).unwrap();
        let resid = (&g * &gi - DMatrix::identity(4, 4)).amax();
        assert!(resid < 1e-12, "{resid}");
    }

    #[test]
    fn asymmetric_h_is_rejected() {
        let s = system(&[&["1", "x1"], &["0", "1"]], &["0", "0"], "0", &[]);
        let err = s.fields(&[0.5, 0.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::AsymmetricMetric { i: 0, j: 1, .. }));
        // agreeing off-diagonals are fine
        assert!(s.fields(&[0.0, 0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn singular_h_is_rejected() {
        let m = metric(system(&[&["x1"]], &["0"], "0", &[]));
        let err = m
            .metric_inverse(&Point::new(vec![0.0], 0.0, 0.0))
            .unwrap_err();
        assert!(matches!(err, Error::SingularMetric { .. }));
        let m2 = metric(system(&[&["1", "1"], &["1", "1"]], &["0", "0"], "0", &[]));
        assert!(m2
            .christoffel(&Point::new(vec![0.0, 0.0], 0.0, 0.0))
            .is_err());
    }

    #[test]
    fn harmonic_christoffel() {
        // Γ^x_{uu} = ∂_x V = x
        let m = metric(system(&[&["1"]], &["0"], "0.5*x1^2", &[]));
        let gamma = m.christoffel(&Point::new(vec![2.0], 0.0, 0.0)).unwrap();
        assert_eq!(gamma.get(0, 1, 1), 2.0);
    }

    #[test]
    fn time_dependent_christoffel() {
        // Γ^x_{xu} = ½ h^{xx} ∂_u h_xx = γ/2
        let m = metric(system(
            &[&["exp(gamma*u)"]],
            &["0"],
            "exp(gamma*u)*(0.5*x1^2)",
            &[("gamma", 0.2)],
        ));
        let gamma = m.christoffel(&Point::new(vec![0.7], 1.3, 0.4)).unwrap();
        assert!((gamma.get(0, 0, 1) - 0.1).abs() < 1e-15);
        assert_eq!(gamma.get(0, 0, 1), gamma.get(0, 1, 0));
    }

    #[test]
    fn identity_pullback() {
        let m = metric(system(&[&["1 + x1^2"]], &["0.2*x1"], "0.5*x1^2", &[]));
        let r = conformal_pullback_check(
            &m,
            &m,
            &CoordinateMap::identity(1),
            &Point::new(vec![0.3], 0.2, 0.1),
            &Field::constant("one", 1.0, 1),
        )
        .unwrap();
        assert_eq!(r, 0.0);
    }
}
