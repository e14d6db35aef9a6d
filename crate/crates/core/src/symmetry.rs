//! Infinitesimal point symmetries, conformal Killing checks and the
//! associated (local and nonlocal) Noether charges.

use std::collections::BTreeMap;

use crate::dynamics::{reduced_lagrangian, GeodesicState, ReducedState, ReducedTrajectory};
use crate::expr::Field;
use crate::geometry::{lagrangian_from, BrinkmannMetric, CoordinateMap, HerglotzSystem, Point};
use crate::ode;
use crate::scalar::{seed, Dual, Scalar};
use crate::{Error, Result};

/// A point transformation of `(x, u, w)`, read as `(q, t, S)`.
pub type TransformSpec = CoordinateMap;

/// Candidate generator `δx^i ∂_i + δu ∂_u + δw ∂_w`.
#[derive(Debug, Clone)]
pub struct SymmetryGenerator {
    name: String,
    dx: Vec<Field>,
    du: Field,
    dw: Field,
}

impl SymmetryGenerator {
    pub fn new(name: impl Into<String>, dx: Vec<Field>, du: Field, dw: Field) -> Result<Self> {
        let d = dx.len() + 2;
        if let Some(f) = dx.iter().chain([&du, &dw]).find(|f| f.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: f.dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            dx,
            du,
            dw,
        })
    }

    pub fn from_expressions(
        name: impl Into<String>,
        dx: &[String],
        du: &str,
        dw: &str,
        params: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        let n = dx.len();
        let name = name.into();
        let dxf = dx
            .iter()
            .enumerate()
            .map(|(i, t)| Field::compile(format!("{name}.dx{}", i + 1), t, n, params))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let duf = Field::compile(format!("{name}.du"), du, n, params)?;
        let dwf = Field::compile(format!("{name}.dw"), dw, n, params)?;
        Self::new(name, dxf, duf, dwf)
    }

    /// The zero generator in dimension `n`.
    pub fn zero(n: usize) -> Self {
        Self::from_expressions(
            "zero",
            &vec!["0".to_string(); n],
            "0",
            "0",
            &BTreeMap::new(),
        )
        .expect("zero generator compiles")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.dx.len()
    }

    /// `(δx¹..δxⁿ, δu, δw)` at `coords`.
    pub fn components<S: Scalar>(&self, coords: &[S]) -> Result<Vec<S>> {
        self.dx
            .iter()
            .chain([&self.du, &self.dw])
            .map(|f| {
                f.eval_at(coords).map_err(|source| Error::FieldEval {
                    field: f.label().to_string(),
                    source,
                })
            })
            .collect()
    }

    /// Values and first partials: `(K, ∂K)` with `dk[a][μ] = ∂_μ K^a`.
    fn jet(&self, coords: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let d = coords.len();
        let k: Vec<Dual> = self.components(&seed(coords)?)?;
        Ok((
            k.iter().map(Dual::value).collect(),
            k.iter().map(|c| c.gradient(d)).collect(),
        ))
    }
}

/// `(max |∇_μK_ν + ∇_νK_μ − λ g_{μν}|, λ)` with `λ` from the trace.
pub fn killing_residual(
    metric: &BrinkmannMetric,
    gen: &SymmetryGenerator,
    point: &Point,
) -> Result<(f64, f64)> {
    let sym = metric.covariant_sym_grad(gen, point)?;
    let lambda = metric.conformal_factor(gen, point)?;
    let g = metric.metric_eval(point)?;
    Ok(((sym - g * lambda).amax(), lambda))
}

/// Left side of the symmetry condition for the reduced Lagrangian at
/// `(x, x', u, w)`, with `w' = 𝓛` substituted. Zero for a symmetry.
pub fn symmetry_condition_residual(
    system: &HerglotzSystem,
    gen: &SymmetryGenerator,
    rs: &ReducedState,
) -> Result<f64> {
    let n = system.n();
    let (iu, iw) = (n, n + 1);
    let coords = rs.point().coords();
    let f = system.fields(&seed(&coords)?)?;
    let l: Dual = lagrangian_from(&f, &rs.xp);
    let (k, dk) = gen.jet(&coords)?;
    let wdot = l.value();
    let total = |grad: &[f64]| -> f64 {
        let along: f64 = (0..n).map(|l| rs.xp[l] * grad[l]).sum();
        along + grad[iu] + wdot * grad[iw]
    };
    let du_dot = total(&dk[iu]);
    let dw_dot = total(&dk[iw]);

    let mut res = 0.0;
    for kk in 0..n {
        let p = (0..n)
            .map(|i| f.h[kk * n + i].value() * rs.xp[i])
            .sum::<f64>()
            + f.a[kk].value();
        res += l.partial(kk) * k[kk];
        res += p * (total(&dk[kk]) - rs.xp[kk] * du_dot);
    }
    res += l.partial(iu) * k[iu] + l.partial(iw) * k[iw];
    res += wdot * du_dot - dw_dot;
    Ok(res.abs())
}

/// Residuals of the five identities obtained by splitting the symmetry
/// condition by degree in velocity. Entries are, in order:
/// `∂_wδu`; `h_il ∂_wδx^l − ∂_iδu`; then the second, first and zero
/// degree identities. Each entry is a max-abs over its free indices.
pub fn degreewise_identities(
    system: &HerglotzSystem,
    gen: &SymmetryGenerator,
    point: &Point,
) -> Result<[f64; 5]> {
    let n = system.n();
    let (iu, iw) = (n, n + 1);
    let coords = point.coords();
    let jet = system.jet(&coords)?;
    let (k, dk) = gen.jet(&coords)?;
    let (h, a, v) = (&jet.h, &jet.a, jet.v);
    let (du, dw) = (k[iu], k[iw]);
    let ddu = &dk[iu];
    let ddw = &dk[iw];
    // A_k ∂_wδx^k
    let a_dwx: f64 = (0..n).map(|kk| a[kk] * dk[kk][iw]).sum();

    let r1 = ddu[iw].abs();

    let r2 = (0..n).fold(0.0f64, |m, i| {
        let lhs: f64 = (0..n).map(|l| h[(i, l)] * dk[l][iw]).sum();
        m.max((lhs - ddu[i]).abs())
    });

    let mut r3: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut e = du * jet.dh[iu][(i, j)] - ddu[iu] * h[(i, j)];
            e += dw * jet.dh[iw][(i, j)] - ddw[iw] * h[(i, j)];
            e += a_dwx * h[(i, j)];
            e += ddu[i] * a[j] + ddu[j] * a[i];
            for kk in 0..n {
                e += h[(i, kk)] * dk[kk][j] + h[(j, kk)] * dk[kk][i];
                e += k[kk] * jet.dh[kk][(i, j)];
            }
            r3 = r3.max(e.abs());
        }
    }

    let mut r4: f64 = 0.0;
    for i in 0..n {
        let mut e = dw * jet.da[iw][i] - ddw[iw] * a[i];
        e += du * jet.da[iu][i] - 2.0 * v * ddu[i] - ddw[i];
        for kk in 0..n {
            e += jet.da[kk][i] * k[kk] + a[kk] * dk[kk][i];
            e += h[(i, kk)] * dk[kk][iu];
            e += a[i] * a[kk] * dk[kk][iw];
        }
        r4 = r4.max(e.abs());
    }

    let mut e5 = -du * jet.dv[iu] - ddu[iu] * v - dw * jet.dv[iw] - ddw[iu] + v * ddw[iw];
    for kk in 0..n {
        e5 += -k[kk] * jet.dv[kk] + a[kk] * dk[kk][iu] - a[kk] * dk[kk][iw] * v;
    }
    Ok([r1, r2, r3, r4, e5.abs()])
}

/// `g_{μν} K^μ ẋ^ν`, conserved along affinely parametrised null geodesics
/// when `K` is conformal Killing.
pub fn affine_charge(
    metric: &BrinkmannMetric,
    gen: &SymmetryGenerator,
    gs: &GeodesicState,
) -> Result<f64> {
    let g = metric.metric_eval(&gs.point)?;
    let k = gen.components(&gs.point.coords())?;
    let kv = nalgebra::DVector::from_vec(k);
    let xd = nalgebra::DVector::from_column_slice(&gs.velocity);
    Ok(kv.dot(&(g * xd)))
}

/// `Q = (h x' + A)·δx − (½ h x'x' + V) δu − δw`.
pub fn noether_charge(
    system: &HerglotzSystem,
    gen: &SymmetryGenerator,
    rs: &ReducedState,
) -> Result<f64> {
    let n = system.n();
    let coords = rs.point().coords();
    let f = system.fields(&coords)?;
    let k = gen.components(&coords)?;
    let mut q = -k[n + 1];
    let mut kinetic = 0.0;
    for i in 0..n {
        let mut p = f.a[i];
        for j in 0..n {
            p += f.h[i * n + j] * rs.xp[j];
            kinetic += 0.5 * f.h[i * n + j] * rs.xp[i] * rs.xp[j];
        }
        q += p * k[i];
    }
    q -= (kinetic + f.v) * k[n];
    Ok(q)
}

/// Local and nonlocal charges along a reduced trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeSeries {
    pub u: Vec<f64>,
    /// `Q` at each sample.
    pub local: Vec<f64>,
    /// `∫_{u₀}^{u} ∂𝓛/∂w du'`.
    pub integral: Vec<f64>,
    /// `exp(−∫ ∂𝓛/∂w) Q`.
    pub nonlocal: Vec<f64>,
}

fn drift(series: &[f64]) -> f64 {
    let q0 = series[0];
    let worst = series.iter().fold(0.0f64, |m, q| m.max((q - q0).abs()));
    if q0 != 0.0 {
        worst / q0.abs()
    } else {
        worst
    }
}

impl ChargeSeries {
    /// `max |Q_nl(u) − Q_nl(u₀)| / |Q_nl(u₀)|` (absolute when `Q_nl(u₀) = 0`).
    pub fn nonlocal_drift(&self) -> f64 {
        drift(&self.nonlocal)
    }

    /// Same measure for the plain charge `Q`.
    pub fn local_drift(&self) -> f64 {
        drift(&self.local)
    }
}

fn dl_dw(system: &HerglotzSystem, rs: &ReducedState) -> Result<f64> {
    let coords = rs.point().coords();
    let f = system.fields(&seed(&coords)?)?;
    let l: Dual = lagrangian_from(&f, &rs.xp);
    Ok(l.partial(system.n() + 1))
}

/// `Q` and `exp(−∫ ∂𝓛/∂w du) Q` at every sample of `traj`. The integral is
/// accumulated with Simpson's rule per step, the midpoint taken from the
/// trajectory's cubic Hermite interpolant.
pub fn nonlocal_charge(
    system: &HerglotzSystem,
    gen: &SymmetryGenerator,
    traj: &ReducedTrajectory,
) -> Result<ChargeSeries> {
    let samples = traj.inner().samples();
    let mut out = ChargeSeries {
        u: Vec::with_capacity(samples.len()),
        local: Vec::with_capacity(samples.len()),
        integral: Vec::with_capacity(samples.len()),
        nonlocal: Vec::with_capacity(samples.len()),
    };
    let mut acc = 0.0;
    let mut prev = dl_dw(system, &traj.state(0))?;
    for k in 0..samples.len() {
        let rs = traj.state(k);
        let here = dl_dw(system, &rs)?;
        if k > 0 {
            let (u0, u1) = (traj.u(k - 1), rs.u);
            let um = 0.5 * (u0 + u1);
            let (y, _) = ode::hermite(&samples[k - 1], &samples[k], um);
            let n = traj.n();
            let mid = ReducedState::new(y[..n].to_vec(), y[n..2 * n].to_vec(), um, y[2 * n]);
            let fm = dl_dw(system, &mid)?;
            acc += (u1 - u0) / 6.0 * (prev + 4.0 * fm + here);
        }
        prev = here;
        let q = noether_charge(system, gen, &rs)?;
        out.u.push(rs.u);
        out.local.push(q);
        out.integral.push(acc);
        out.nonlocal.push((-acc).exp() * q);
    }
    Ok(out)
}

/// Residual of `L'·dt'/dt = ∂_S S'·L + ∂_q S'·q̇ + ∂_t S'` for the map
/// `(q, t, S) → (q', t', S')` at the state `rs` of `src`. `L'` is the
/// Lagrangian of `dst` evaluated at the image state.
pub fn transform_rule_check(
    src: &HerglotzSystem,
    dst: &HerglotzSystem,
    map: &TransformSpec,
    rs: &ReducedState,
) -> Result<f64> {
    let n = src.n();
    if dst.n() != n || map.dim() != n + 2 {
        return Err(Error::DimensionMismatch {
            expected: n + 2,
            found: map.dim(),
        });
    }
    let coords = rs.point().coords();
    let (image, jac) = map.jacobian(&coords)?;
    let det = jac.determinant();
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return Err(Error::SingularJacobian { det });
    }
    let l = reduced_lagrangian(src, rs)?;
    // total t-derivative of each image coordinate along the state
    let mut xi = rs.xp.clone();
    xi.push(1.0);
    xi.push(l);
    let rate = &jac * nalgebra::DVector::from_vec(xi);
    let dt = rate[n];
    if dt == 0.0 || !dt.is_finite() {
        return Err(Error::SingularJacobian { det: dt });
    }
    let image_state = ReducedState::new(
        image[..n].to_vec(),
        (0..n).map(|i| rate[i] / dt).collect(),
        image[n],
        image[n + 1],
    );
    let l_new = reduced_lagrangian(dst, &image_state)?;
    Ok((l_new * dt - rate[n + 1]).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::conformal_factor_closed_form;
    use std::sync::Arc;

    fn params(p: &[(&str, f64)]) -> BTreeMap<String, f64> {
        p.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn sys1(h: &str, v: &str, p: &[(&str, f64)]) -> HerglotzSystem {
        HerglotzSystem::from_expressions("t", &[vec![h.into()]], &["0".into()], v, &params(p))
            .unwrap()
    }

    fn gen1(dx: &str, du: &str, dw: &str, p: &[(&str, f64)]) -> SymmetryGenerator {
        SymmetryGenerator::from_expressions("g", &[dx.into()], du, dw, &params(p)).unwrap()
    }

    fn damped_action() -> HerglotzSystem {
        sys1("1", "0.5*x1^2 + gamma*w", &[("gamma", 0.2)])
    }

    fn damped_time() -> HerglotzSystem {
        sys1("exp(gamma*u)", "exp(gamma*u)*0.5*x1^2", &[("gamma", 0.2)])
    }

    #[test]
    fn killing_examples() {
        let p = Point::new(vec![0.4], 0.7, -0.3);
        let m = BrinkmannMetric::new(Arc::new(damped_action()));
        let (res, lambda) = killing_residual(&m, &gen1("0", "1", "0", &[]), &p).unwrap();
        assert!(res <= 1e-10 && lambda.abs() <= 1e-12);

        let osc = BrinkmannMetric::new(Arc::new(sys1("1", "0.5*x1^2", &[])));
        let (res, lambda) = killing_residual(&osc, &gen1("0", "0", "1", &[]), &p).unwrap();
        assert!(res <= 1e-10 && lambda.abs() <= 1e-12);

        let (res, _) = killing_residual(
            &osc,
            &gen1("x1", "0", "0", &[]),
            &Point::new(vec![1.0], 0.0, 0.0),
        )
        .unwrap();
        assert!(res > 0.1);
    }

    #[test]
    fn conformal_factor_examples() {
        let p = Point::new(vec![0.4], 0.7, -0.3);
        let m = BrinkmannMetric::new(Arc::new(damped_time()));
        let g = gen1("0", "0", "-gamma*w", &[("gamma", 0.2)]);
        let closed = conformal_factor_closed_form(m.system(), &g, &p).unwrap();
        assert!((closed + 0.2).abs() < 1e-15);

        let rescale = gen1("0", "1", "gamma*w", &[("gamma", 0.2)]);
        let trace = m.conformal_factor(&rescale, &p).unwrap();
        let closed = conformal_factor_closed_form(m.system(), &rescale, &p).unwrap();
        assert!((trace - closed).abs() < 1e-12);
        assert!((trace - 0.2).abs() < 1e-12);
        assert!(killing_residual(&m, &rescale, &p).unwrap().0 < 1e-12);
    }

    #[test]
    fn symmetry_condition_examples() {
        let r = ReducedState::new(vec![0.3], vec![-0.8], 0.5, 1.2);
        let tt = gen1("0", "1", "0", &[]);
        assert!(symmetry_condition_residual(&damped_action(), &tt, &r).unwrap() <= 1e-12);
        assert!(symmetry_condition_residual(&damped_time(), &tt, &r).unwrap() > 1e-3);
        let shift = gen1("0", "0", "1", &[]);
        assert!(
            symmetry_condition_residual(&sys1("1", "0.5*x1^2", &[]), &shift, &r).unwrap() <= 1e-12
        );
    }

    #[test]
    fn degreewise_examples() {
        let p = Point::new(vec![0.3], 0.5, 1.2);
        let tt = gen1("0", "1", "0", &[]);
        assert!(degreewise_identities(&damped_action(), &tt, &p)
            .unwrap()
            .iter()
            .all(|r| *r <= 1e-12));
        let bad = gen1("0", "w", "0", &[]);
        assert_eq!(
            degreewise_identities(&damped_action(), &bad, &p).unwrap()[0],
            1.0
        );
        let random = gen1("sin(u)*x1", "x1^2", "u*w", &[]);
        assert!(degreewise_identities(&damped_action(), &random, &p)
            .unwrap()
            .iter()
            .any(|r| *r > 1e-3));
    }

    #[test]
    fn charges() {
        let osc = sys1("1", "0.5*x1^2", &[]);
        let r = ReducedState::new(vec![0.6], vec![0.8], 0.0, 0.0);
        let q = noether_charge(&osc, &gen1("0", "1", "0", &[]), &r).unwrap();
        assert!((q + 0.5).abs() < 1e-15);
        let free = sys1("1", "0", &[]);
        assert_eq!(
            noether_charge(&free, &gen1("1", "0", "0", &[]), &r).unwrap(),
            0.8
        );

        let m = BrinkmannMetric::new(Arc::new(osc));
        let gs = crate::dynamics::lift_state(m.system(), &r, 1.5).unwrap();
        let kw = gen1("0", "0", "1", &[]);
        assert_eq!(affine_charge(&m, &kw, &gs).unwrap(), -1.5);
        assert_eq!(
            affine_charge(&m, &SymmetryGenerator::zero(1), &gs).unwrap(),
            0.0
        );
        let tt = gen1("0", "1", "0", &[]);
        let lhs = affine_charge(&m, &tt, &gs).unwrap();
        let rhs = 1.5 * noether_charge(m.system(), &tt, &r).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn transform_rule_examples() {
        let r = ReducedState::new(vec![0.3], vec![-0.8], 0.5, 1.2);
        let id = CoordinateMap::identity(1);
        assert!(transform_rule_check(&damped_action(), &damped_action(), &id, &r).unwrap() < 1e-15);
        let p = params(&[("gamma", 0.2)]);
        let map =
            CoordinateMap::from_expressions(&["x1".into()], "u", "exp(-gamma*u)*w", &p).unwrap();
        assert!(transform_rule_check(&damped_time(), &damped_action(), &map, &r).unwrap() <= 1e-12);
        let wrong =
            CoordinateMap::from_expressions(&["x1".into()], "u", "exp(gamma*u)*w", &p).unwrap();
        assert!(transform_rule_check(&damped_time(), &damped_action(), &wrong, &r).unwrap() > 1e-2);
        let singular = CoordinateMap::from_expressions(&["x1".into()], "u", "0*w", &p).unwrap();
        assert!(matches!(
            transform_rule_check(&damped_time(), &damped_action(), &singular, &r),
            Err(Error::SingularJacobian { .. })
        ));
    }
}
