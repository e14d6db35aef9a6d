//! Null geodesics of the lifted metric, the reduced Herglotz flow, and the
//! maps and residuals relating the two.

use nalgebra::DVector;

use crate::geometry::{
    invert_h, lagrangian_from, BrinkmannMetric, FieldJet, HerglotzSystem, Point,
};
use crate::ode::{self, IntegratorConfig, Sample, Trajectory};
use crate::scalar::{Dual, Scalar};
use crate::{Error, Result};

/// Tolerance in σ for locating `u(σ) = u_target` during reduction.
pub const ROOT_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub point: Point,
    /// `(ẋ¹..ẋⁿ, u̇, ẇ)`, dots are `d/dσ`.
    pub velocity: Vec<f64>,
    pub sigma: f64,
}

impl GeodesicState {
    pub fn n(&self) -> usize {
        self.point.n()
    }

    pub fn udot(&self) -> f64 {
        self.velocity[self.n()]
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut y = self.point.coords();
        y.extend_from_slice(&self.velocity);
        y
    }

    fn from_slice(n: usize, sigma: f64, y: &[f64]) -> Self {
        let d = n + 2;
        Self {
            point: Point::from_coords(&y[..d]),
            velocity: y[d..].to_vec(),
            sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub x: Vec<f64>,
    /// `dx/du`
    pub xp: Vec<f64>,
    pub u: f64,
    pub w: f64,
}

impl ReducedState {
    pub fn new(x: Vec<f64>, xp: Vec<f64>, u: f64, w: f64) -> Self {
        assert_eq!(x.len(), xp.len(), "x and x' must have equal length");
        Self { x, xp, u, w }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn point(&self) -> Point {
        Point::new(self.x.clone(), self.u, self.w)
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.xp).all(|v| v.is_finite())
            && self.u.is_finite()
            && self.w.is_finite()
    }
}

/// `𝓛 = ½ h x'x' + A x' − V` at the reduced state.
pub fn reduced_lagrangian(system: &HerglotzSystem, rs: &ReducedState) -> Result<f64> {
    system.lagrangian(&rs.point(), &rs.xp)
}

/// `(𝓛, ∂_μ𝓛)` at fixed `x'`, for every coordinate `μ`.
fn lagrangian_partials(
    system: &HerglotzSystem,
    coords: &[f64],
    xp: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let f = system.fields(&crate::scalar::seed(coords)?)?;
    let l: Dual = lagrangian_from(&f, xp);
    Ok((l.value(), l.gradient(coords.len())))
}

/// Lift a reduced state to a null geodesic state with `u̇ = udot0`.
pub fn lift_state(system: &HerglotzSystem, rs: &ReducedState, udot0: f64) -> Result<GeodesicState> {
    if !(udot0 > 0.0) {
        return Err(Error::NonPositiveUdot(udot0));
    }
    if rs.n() != system.n() {
        return Err(Error::DimensionMismatch {
            expected: system.n(),
            found: rs.n(),
        });
    }
    let l = reduced_lagrangian(system, rs)?;
    let mut velocity: Vec<f64> = rs.xp.iter().map(|v| v * udot0).collect();
    velocity.push(udot0);
    velocity.push(udot0 * l);
    Ok(GeodesicState {
        point: rs.point(),
        velocity,
        sigma: 0.0,
    })
}

fn null_residual_at(system: &HerglotzSystem, coords: &[f64], vel: &[f64]) -> Result<f64> {
    let n = system.n();
    let f = system.fields(coords)?;
    let (ud, wd) = (vel[n], vel[n + 1]);
    let mut l = -f.v * ud * ud - ud * wd;
    for i in 0..n {
        l += f.a[i] * vel[i] * ud;
        for j in 0..n {
            l += 0.5 * f.h[i * n + j] * vel[i] * vel[j];
        }
    }
    Ok(l)
}

/// `L = ½ h ẋẋ + A ẋ u̇ − V u̇² − u̇ ẇ`.
pub fn null_residual(metric: &BrinkmannMetric, gs: &GeodesicState) -> Result<f64> {
    null_residual_at(metric.system(), &gs.point.coords(), &gs.velocity)
}

/// `ẍ^μ = −Γ^μ_{νρ} ẋ^ν ẋ^ρ`.
pub fn geodesic_rhs(metric: &BrinkmannMetric, gs: &GeodesicState) -> Result<Vec<f64>> {
    acceleration(metric, &gs.point.coords(), &gs.velocity)
}

fn acceleration(metric: &BrinkmannMetric, coords: &[f64], vel: &[f64]) -> Result<Vec<f64>> {
    let gamma = metric.jet(coords)?.christoffel();
    Ok(gamma.contract(vel).into_iter().map(|a| -a).collect())
}

/// Integrated null geodesic. State layout is `(x, u, w, ẋ, u̇, ẇ)` and each
/// sample's monitor holds the null residual `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicTrajectory {
    n: usize,
    traj: Trajectory,
}

impl GeodesicTrajectory {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn inner(&self) -> &Trajectory {
        &self.traj
    }

    /// Mutable access, used to build corrupted trajectories in checks.
    pub fn inner_mut(&mut self) -> &mut Trajectory {
        &mut self.traj
    }

    pub fn len(&self) -> usize {
        self.traj.samples().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, k: usize) -> GeodesicState {
        let s = &self.traj.samples()[k];
        GeodesicState::from_slice(self.n, s.t, &s.y)
    }

    /// Acceleration stored at sample `k`.
    pub fn acceleration(&self, k: usize) -> &[f64] {
        &self.traj.samples()[k].dy[self.n + 2..]
    }

    pub fn u(&self, k: usize) -> f64 {
        self.traj.samples()[k].y[self.n]
    }

    pub fn udot(&self, k: usize) -> f64 {
        self.traj.samples()[k].y[2 * self.n + 2]
    }

    pub fn null_residuals(&self) -> impl Iterator<Item = f64> + '_ {
        self.traj.samples().iter().map(|s| s.monitor)
    }

    /// Largest `|L|` over the run.
    pub fn max_null_residual(&self) -> f64 {
        self.null_residuals().fold(0.0, |m, l| m.max(l.abs()))
    }

    /// Largest `|L| / u̇²`, the null residual in units of the reduced
    /// Lagrangian. Unlike `L` itself it does not scale with `u̇`.
    pub fn max_scaled_null_residual(&self) -> f64 {
        (0..self.len()).fold(0.0, |m, k| {
            let ud = self.udot(k);
            m.max((self.traj.samples()[k].monitor / (ud * ud)).abs())
        })
    }

    /// `max |u̇ − u̇₀|`.
    pub fn udot_variation(&self) -> f64 {
        let u0 = self.udot(0);
        (0..self.len()).fold(0.0, |m, k| m.max((self.udot(k) - u0).abs()))
    }
}

fn geodesic_run<S>(
    metric: &BrinkmannMetric,
    gs0: &GeodesicState,
    sigma_end: f64,
    config: &IntegratorConfig,
    stop: S,
) -> Result<GeodesicTrajectory>
where
    S: FnMut(f64, &[f64]) -> bool,
{
    let n = metric.system().n();
    if gs0.n() != n || gs0.velocity.len() != n + 2 {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: gs0.n(),
        });
    }
    let d = n + 2;
    let y0 = gs0.to_vec();
    let system = metric.system();
    let traj = ode::integrate(
        |_, y, dy| {
            let acc = acceleration(metric, &y[..d], &y[d..])?;
            dy[..d].copy_from_slice(&y[d..]);
            dy[d..].copy_from_slice(&acc);
            Ok(())
        },
        gs0.sigma,
        &y0,
        sigma_end,
        config,
        |_, y| null_residual_at(system, &y[..d], &y[d..]),
        stop,
    )?;
    Ok(GeodesicTrajectory { n, traj })
}

/// Integrate the geodesic equations over `σ ∈ [gs0.sigma, sigma_end]`.
pub fn integrate_geodesic(
    metric: &BrinkmannMetric,
    gs0: &GeodesicState,
    sigma_end: f64,
    config: &IntegratorConfig,
) -> Result<GeodesicTrajectory> {
    geodesic_run(metric, gs0, sigma_end, config, |_, _| false)
}

/// Integrate until `u` first reaches `u_end`. The final step may overshoot.
pub fn integrate_geodesic_to_u(
    metric: &BrinkmannMetric,
    gs0: &GeodesicState,
    u_end: f64,
    config: &IntegratorConfig,
) -> Result<GeodesicTrajectory> {
    let n = gs0.n();
    if !(u_end > gs0.point.u) {
        return Err(Error::InvalidConfig(format!(
            "u_end = {u_end} must exceed the initial u = {}",
            gs0.point.u
        )));
    }
    let sigma_end = gs0.sigma + 1e9;
    let traj = geodesic_run(metric, gs0, sigma_end, config, |_, y| y[n] >= u_end)?;
    let reached = traj.u(traj.len() - 1);
    if reached < u_end {
        return Err(Error::OutOfRange {
            u: u_end,
            from: gs0.point.u,
            to: reached,
        });
    }
    Ok(traj)
}

/// Trajectory of the reduced system parametrised by `u`. The underlying
/// state is `(x, x', w)` with derivative `(x', x'', w')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    n: usize,
    traj: Trajectory,
    sigma: Option<Vec<f64>>,
}

impl ReducedTrajectory {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn inner(&self) -> &Trajectory {
        &self.traj
    }

    pub fn len(&self) -> usize {
        self.traj.samples().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn u_range(&self) -> (f64, f64) {
        self.traj.t_range()
    }

    pub fn u(&self, k: usize) -> f64 {
        self.traj.samples()[k].t
    }

    /// Geodesic parameter at each sample, for reduced geodesics.
    pub fn sigma(&self) -> Option<&[f64]> {
        self.sigma.as_deref()
    }

    pub fn state(&self, k: usize) -> ReducedState {
        let s = &self.traj.samples()[k];
        self.unpack(s.t, &s.y)
    }

    /// `(x'', w')` stored at sample `k`.
    pub fn derivative(&self, k: usize) -> (&[f64], f64) {
        let dy = &self.traj.samples()[k].dy;
        (&dy[self.n..2 * self.n], dy[2 * self.n])
    }

    fn unpack(&self, u: f64, y: &[f64]) -> ReducedState {
        let n = self.n;
        ReducedState {
            x: y[..n].to_vec(),
            xp: y[n..2 * n].to_vec(),
            u,
            w: y[2 * n],
        }
    }

    /// Dense-output state at `u`.
    pub fn at(&self, u: f64) -> Option<ReducedState> {
        self.traj.interpolate(u).map(|y| self.unpack(u, &y))
    }

    /// `sup |x_self(u) − x_other(u)|` over `grid`.
    pub fn sup_gap_x(&self, other: &ReducedTrajectory, grid: &[f64]) -> Option<f64> {
        let mut gap: f64 = 0.0;
        for &u in grid {
            let (a, b) = (self.at(u)?, other.at(u)?);
            for (p, q) in a.x.iter().zip(&b.x) {
                gap = gap.max((p - q).abs());
            }
        }
        Some(gap)
    }
}

/// `n + 1` evenly spaced values covering `[from, to]`.
pub fn uniform_grid(from: f64, to: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            if k == n {
                to
            } else {
                from + (to - from) * k as f64 / n as f64
            }
        })
        .collect()
}

fn check_monotone(traj: &GeodesicTrajectory) -> Result<()> {
    for k in 0..traj.len() {
        let ud = traj.udot(k);
        if !(ud > 0.0) {
            return Err(Error::MonotonicityViolation {
                sigma: traj.inner().samples()[k].t,
                udot: ud,
            });
        }
    }
    Ok(())
}

/// σ at which the dense output on step `k` has `u = target`.
fn solve_sigma(traj: &GeodesicTrajectory, k: usize, target: f64) -> f64 {
    let samples = traj.inner().samples();
    let (a, b) = (&samples[k], &samples[k + 1]);
    let n = traj.n();
    let (mut lo, mut hi) = (a.t, b.t);
    let mut s = lo + (hi - lo) * (target - a.y[n]) / (b.y[n] - a.y[n]);
    for _ in 0..100 {
        let (y, dy) = ode::hermite(a, b, s);
        let f = y[n] - target;
        if f == 0.0 {
            return s;
        }
        if f < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - f / dy[n];
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done = (next - s).abs() <= ROOT_TOLERANCE * s.abs().max(1.0);
        s = next;
        if done || hi - lo <= ROOT_TOLERANCE * s.abs().max(1.0) {
            break;
        }
    }
    s
}

/// Locate `u` inside step `k` with the dense output, then replace the
/// interpolant by a fifth-order step from the sample and polish `σ` with
/// Newton on `u(σ) = target`.
fn land_on_u(
    metric: &BrinkmannMetric,
    traj: &GeodesicTrajectory,
    k: usize,
    target: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = traj.n();
    let d = n + 2;
    let a = &traj.inner().samples()[k];
    let rhs = |_: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let acc = acceleration(metric, &y[..d], &y[d..])?;
        dy[..d].copy_from_slice(&y[d..]);
        dy[d..].copy_from_slice(&acc);
        Ok(())
    };
    let mut s = solve_sigma(traj, k, target);
    let mut y = ode::single_step(rhs, a.t, &a.y, &a.dy, s - a.t)?;
    for _ in 0..3 {
        let f = y[n] - target;
        if f == 0.0 {
            break;
        }
        s -= f / y[d + n];
        y = ode::single_step(rhs, a.t, &a.y, &a.dy, s - a.t)?;
    }
    // remove the last rounding-level mismatch
    y[n] = target;
    Ok((s, y))
}

fn reduced_sample(metric: &BrinkmannMetric, y: &[f64], acc: &[f64], monitor: f64) -> Sample {
    let n = metric.system().n();
    let d = n + 2;
    let (u, w) = (y[n], y[n + 1]);
    let ud = y[d + n];
    let xp: Vec<f64> = y[d..d + n].iter().map(|v| v / ud).collect();
    let udd = acc[n];
    let xpp: Vec<f64> = (0..n).map(|i| (acc[i] - xp[i] * udd) / (ud * ud)).collect();
    let mut state = y[..n].to_vec();
    state.extend_from_slice(&xp);
    state.push(w);
    let mut deriv = xp.clone();
    deriv.extend_from_slice(&xpp);
    deriv.push(y[d + n + 1] / ud);
    Sample {
        t: u,
        y: state,
        dy: deriv,
        step: 0.0,
        rejected: 0,
        monitor,
    }
}

/// Reparametrise a null geodesic by `u` and project to `(x, x', w)` at
/// each value of `u_grid` (increasing, inside the run).
pub fn reduce_trajectory(
    metric: &BrinkmannMetric,
    traj: &GeodesicTrajectory,
    u_grid: &[f64],
) -> Result<ReducedTrajectory> {
    check_monotone(traj)?;
    let n = traj.n();
    let d = n + 2;
    let samples = traj.inner().samples();
    let (u_lo, u_hi) = (traj.u(0), traj.u(traj.len() - 1));
    if u_grid.is_empty() {
        return Err(Error::InvalidConfig("empty u grid".into()));
    }
    let mut out = Vec::with_capacity(u_grid.len());
    let mut sigmas = Vec::with_capacity(u_grid.len());
    let mut prev = f64::NEG_INFINITY;
    for &u in u_grid {
        if !(u >= u_lo && u <= u_hi) {
            return Err(Error::OutOfRange {
                u,
                from: u_lo,
                to: u_hi,
            });
        }
        if u <= prev {
            return Err(Error::InvalidConfig(
                "u grid must be strictly increasing".into(),
            ));
        }
        prev = u;
        let k = samples.partition_point(|s| s.y[n] <= u);
        let (sigma, y) = if k > 0 && samples[k - 1].y[n] == u {
            (samples[k - 1].t, samples[k - 1].y.clone())
        } else {
            let k = k.saturating_sub(1).min(samples.len() - 2);
            land_on_u(metric, traj, k, u)?
        };
        let acc = acceleration(metric, &y[..d], &y[d..])?;
        let l = null_residual_at(metric.system(), &y[..d], &y[d..])?;
        out.push(reduced_sample(metric, &y, &acc, l));
        sigmas.push(sigma);
    }
    Ok(ReducedTrajectory {
        n,
        traj: Trajectory::from_samples(out),
        sigma: Some(sigmas),
    })
}

/// Reduce at the geodesic's own accepted samples, without root finding.
pub fn reduce_at_samples(
    metric: &BrinkmannMetric,
    traj: &GeodesicTrajectory,
) -> Result<ReducedTrajectory> {
    check_monotone(traj)?;
    let d = traj.n() + 2;
    let mut out = Vec::with_capacity(traj.len());
    let mut sigmas = Vec::with_capacity(traj.len());
    for s in traj.inner().samples() {
        out.push(reduced_sample(metric, &s.y, &s.dy[d..], s.monitor));
        sigmas.push(s.t);
    }
    Ok(ReducedTrajectory {
        n: traj.n(),
        traj: Trajectory::from_samples(out),
        sigma: Some(sigmas),
    })
}

fn herglotz_accel(jet: &FieldJet, xp: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = jet.n;
    let (iu, iw) = (jet.u_index(), jet.w_index());
    let xpv = DVector::from_column_slice(xp);
    let dl = |mu: usize| 0.5 * xpv.dot(&(&jet.dh[mu] * &xpv)) + jet.da[mu].dot(&xpv) - jet.dv[mu];
    let l = 0.5 * xpv.dot(&(&jet.h * &xpv)) + jet.a.dot(&xpv) - jet.v;
    let dl_w = dl(iw);
    let p = &jet.h * &xpv + &jet.a;
    let dp_u = &jet.dh[iu] * &xpv + &jet.da[iu];
    let dp_w = &jet.dh[iw] * &xpv + &jet.da[iw];
    let mut b = DVector::zeros(n);
    for k in 0..n {
        // Γ_{kij} x'^i x'^j = ∂_i h_kj x'^i x'^j − ½ ∂_k h_ij x'^i x'^j
        let mut gamma = -0.5 * xpv.dot(&(&jet.dh[k] * &xpv));
        let mut force = 0.0;
        for i in 0..n {
            gamma += xp[i] * (0..n).map(|j| jet.dh[i][(k, j)] * xp[j]).sum::<f64>();
            force += (jet.da[i][k] - jet.da[k][i]) * xp[i];
        }
        b[k] = -gamma - jet.dv[k] - force - dp_u[k] - dp_w[k] * l + p[k] * dl_w;
    }
    let xpp = invert_h(&jet.h)? * b;
    Ok((xpp.iter().copied().collect(), l))
}

/// `(x'', w')` of the Herglotz equations for `𝓛`.
pub fn herglotz_rhs(system: &HerglotzSystem, rs: &ReducedState) -> Result<(Vec<f64>, f64)> {
    let jet = system.jet(&rs.point().coords())?;
    herglotz_accel(&jet, &rs.xp)
}

/// Integrate the Herglotz system in `u` from `rs0.u` to `u_end`. Each
/// sample's monitor holds `∂𝓛/∂w` at that state.
pub fn integrate_herglotz(
    system: &HerglotzSystem,
    rs0: &ReducedState,
    u_end: f64,
    config: &IntegratorConfig,
) -> Result<ReducedTrajectory> {
    let n = system.n();
    if rs0.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rs0.n(),
        });
    }
    let mut y0 = rs0.x.clone();
    y0.extend_from_slice(&rs0.xp);
    y0.push(rs0.w);
    let coords = |u: f64, y: &[f64]| {
        let mut c = y[..n].to_vec();
        c.push(u);
        c.push(y[2 * n]);
        c
    };
    let traj = ode::integrate(
        |u, y, dy| {
            let jet = system.jet(&coords(u, y))?;
            let (xpp, l) = herglotz_accel(&jet, &y[n..2 * n])?;
            dy[..n].copy_from_slice(&y[n..2 * n]);
            dy[n..2 * n].copy_from_slice(&xpp);
            dy[2 * n] = l;
            Ok(())
        },
        rs0.u,
        &y0,
        u_end,
        config,
        |u, y| Ok(lagrangian_partials(system, &coords(u, y), &y[n..2 * n])?.1[n + 1]),
        |_, _| false,
    )?;
    Ok(ReducedTrajectory {
        n,
        traj,
        sigma: None,
    })
}

/// `max |ü/u̇² + ∂𝓛/∂w|` over the samples, using the stored accelerations.
pub fn u_equation_residual(metric: &BrinkmannMetric, traj: &GeodesicTrajectory) -> Result<f64> {
    let n = traj.n();
    let d = n + 2;
    let mut worst: f64 = 0.0;
    for s in traj.inner().samples() {
        let ud = s.y[d + n];
        let udd = s.dy[d + n];
        let xp: Vec<f64> = s.y[d..d + n].iter().map(|v| v / ud).collect();
        let (_, dl) = lagrangian_partials(metric.system(), &s.y[..d], &xp)?;
        worst = worst.max((udd / (ud * ud) + dl[n + 1]).abs());
    }
    Ok(worst)
}

/// Residual of the w-geodesic equation when `ẅ` is not taken from that
/// equation but from differentiating the null constraint
/// `ẇ = ½ h ẋẋ/u̇ + A ẋ − V u̇` along the flow of the x- and u-equations.
/// Vanishes when the trajectory is null.
pub fn w_equation_residual_at(metric: &BrinkmannMetric, gs: &GeodesicState) -> Result<f64> {
    let system = metric.system();
    let n = system.n();
    let iu = n;
    let coords = gs.point.coords();
    let v = &gs.velocity;
    let acc = acceleration(metric, &coords, v)?;
    let jet = system.jet(&coords)?;
    let xd = DVector::from_column_slice(&v[..n]);
    let xdd = DVector::from_column_slice(&acc[..n]);
    let (ud, udd) = (v[iu], acc[iu]);

    // total σ-derivatives of the fields along the actual velocity
    let mut dh = nalgebra::DMatrix::zeros(n, n);
    let mut da = DVector::zeros(n);
    let mut dv = 0.0;
    for (mu, vel) in v.iter().enumerate() {
        dh += &jet.dh[mu] * *vel;
        da += &jet.da[mu] * *vel;
        dv += jet.dv[mu] * vel;
    }
    let hxx = xd.dot(&(&jet.h * &xd));
    let wdd_constraint = 0.5 * xd.dot(&(&dh * &xd)) / ud + xdd.dot(&(&jet.h * &xd)) / ud
        - 0.5 * hxx * udd / (ud * ud)
        + da.dot(&xd)
        + jet.a.dot(&xdd)
        - dv * ud
        - jet.v * udd;
    let d_au = da.dot(&xd) + jet.a.dot(&xdd) - 2.0 * dv * ud - 2.0 * jet.v * udd;
    let residual = wdd_constraint + 0.5 * xd.dot(&(&jet.dh[iu] * &xd)) + jet.da[iu].dot(&xd) * ud
        - jet.dv[iu] * ud * ud
        - d_au;
    Ok(residual.abs())
}

/// `max` of [`w_equation_residual_at`] over the samples.
pub fn w_equation_residual(metric: &BrinkmannMetric, traj: &GeodesicTrajectory) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..traj.len() {
        worst = worst.max(w_equation_residual_at(metric, &traj.state(k))?);
    }
    Ok(worst)
}

/// `𝓛̃ = ½ h ẋẋ/u̇ + A ẋ − V u̇` with velocities `(ẋ, u̇)` over any scalar.
pub fn velocity_lagrangian<S: Scalar>(
    system: &HerglotzSystem,
    point: &Point,
    vel: &[S],
) -> Result<S> {
    let n = system.n();
    let f = system.fields(&point.coords())?;
    let ud = vel[n].clone();
    let mut quad = S::constant(0.0);
    let mut lin = S::constant(0.0);
    for i in 0..n {
        lin = lin + vel[i].scale(f.a[i]);
        for j in 0..n {
            quad = quad + (vel[i].clone() * vel[j].clone()).scale(0.5 * f.h[i * n + j]);
        }
    }
    Ok(quad / ud.clone() + lin - ud.scale(f.v))
}

/// `|v^k ∂f/∂v^k − f|` at `vel`, the defect of degree-one homogeneity.
pub fn euler_homogeneity_defect<F>(f: F, vel: &[f64]) -> Result<f64>
where
    F: Fn(&[Dual]) -> Result<Dual>,
{
    let seeded = crate::scalar::seed(vel)?;
    let out = f(&seeded)?;
    let euler: f64 = vel
        .iter()
        .enumerate()
        .map(|(k, v)| v * out.partial(k))
        .sum();
    Ok((euler - out.value()).abs())
}

/// Homogeneity defect of `𝓛̃` at `ẋ = x'·u̇`.
pub fn homogeneity_residual(system: &HerglotzSystem, rs: &ReducedState, udot: f64) -> Result<f64> {
    if udot == 0.0 {
        return Err(Error::ZeroUdot);
    }
    let mut vel: Vec<f64> = rs.xp.iter().map(|v| v * udot).collect();
    vel.push(udot);
    let point = rs.point();
    euler_homogeneity_defect(|v| velocity_lagrangian(system, &point, v), &vel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn sys(h: &str, v: &str, p: &[(&str, f64)]) -> HerglotzSystem {
        let params: BTreeMap<String, f64> = p.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        HerglotzSystem::from_expressions(
            "t",
            &[vec![h.to_string()]],
            &["0".to_string()],
            v,
            &params,
        )
        .unwrap()
    }

    fn rs(x: f64, xp: f64, u: f64, w: f64) -> ReducedState {
        ReducedState::new(vec![x], vec![xp], u, w)
    }

    fn damped_action() -> HerglotzSystem {
        sys("1", "0.5*x1^2 + gamma*w", &[("gamma", 0.2)])
    }

    #[test]
    fn lagrangian_examples() {
        assert_eq!(
            reduced_lagrangian(&sys("1", "0", &[]), &rs(0.0, 2.0, 0.0, 0.0)).unwrap(),
            2.0
        );
        assert_eq!(
            reduced_lagrangian(&damped_action(), &rs(1.0, 0.0, 0.0, 0.0)).unwrap(),
            -0.5
        );
        assert_eq!(
            reduced_lagrangian(&sys("1", "0.5*x1^2", &[]), &rs(0.0, 1.0, 0.0, 0.0)).unwrap(),
            0.5
        );
    }

    #[test]
    fn lift_examples() {
        let free = sys("1", "0", &[]);
        let gs = lift_state(&free, &rs(0.0, 1.0, 0.0, 0.0), 1.0).unwrap();
        assert_eq!(gs.velocity, vec![1.0, 1.0, 0.5]);
        let gs2 = lift_state(&free, &rs(0.0, 1.0, 0.0, 0.0), 2.0).unwrap();
        assert_eq!(gs2.velocity[2], 2.0 * gs.velocity[2]);
        let gs = lift_state(&damped_action(), &rs(1.0, 0.0, 0.0, 0.0), 1.0).unwrap();
        assert_eq!(gs.velocity, vec![0.0, 1.0, -0.5]);
        assert!(matches!(
            lift_state(&free, &rs(0.0, 1.0, 0.0, 0.0), 0.0),
            Err(Error::NonPositiveUdot(_))
        ));
        let m = BrinkmannMetric::new(Arc::new(damped_action()));
        let gs = lift_state(m.system(), &rs(0.3, -0.7, 0.2, 0.4), 1.3).unwrap();
        assert!(null_residual(&m, &gs).unwrap().abs() < 1e-14);
    }

    #[test]
    fn null_residual_examples() {
        let m = BrinkmannMetric::new(Arc::new(sys("1", "0", &[])));
        let gs = |v: Vec<f64>| GeodesicState {
            point: Point::new(vec![0.0], 0.0, 0.0),
            velocity: v,
            sigma: 0.0,
        };
        assert_eq!(null_residual(&m, &gs(vec![1.0, 1.0, 0.0])).unwrap(), 0.5);
        assert_eq!(null_residual(&m, &gs(vec![0.0, 1.0, 1.0])).unwrap(), -1.0);
    }

    #[test]
    fn geodesic_rhs_examples() {
        let flat = BrinkmannMetric::new(Arc::new(sys("1", "0", &[])));
        let gs = lift_state(flat.system(), &rs(0.2, 1.0, 0.0, 0.0), 1.0).unwrap();
        assert!(geodesic_rhs(&flat, &gs).unwrap().iter().all(|a| *a == 0.0));

        let osc = BrinkmannMetric::new(Arc::new(sys("1", "0.5*x1^2", &[])));
        let gs = lift_state(osc.system(), &rs(1.0, 0.0, 0.0, 0.0), 1.0).unwrap();
        assert!((geodesic_rhs(&osc, &gs).unwrap()[0] + 1.0).abs() < 1e-15);

        let damped = BrinkmannMetric::new(Arc::new(damped_action()));
        let gs = lift_state(damped.system(), &rs(0.4, 0.3, 0.0, 0.1), 1.7).unwrap();
        let acc = geodesic_rhs(&damped, &gs).unwrap();
        assert!((acc[1] - 0.2 * 1.7 * 1.7).abs() < 1e-14);
    }

    #[test]
    fn herglotz_rhs_examples() {
        let (xpp, wp) = herglotz_rhs(&damped_action(), &rs(0.7, -0.4, 0.3, 0.9)).unwrap();
        assert!((xpp[0] - (-0.7 + 0.2 * 0.4)).abs() < 1e-15);
        assert!((wp - (0.5 * 0.16 - 0.5 * 0.49 - 0.2 * 0.9)).abs() < 1e-15);

        let (xpp, _) = herglotz_rhs(&sys("1", "0.5*x1^2", &[]), &rs(0.7, -0.4, 0.3, 0.9)).unwrap();
        assert!((xpp[0] + 0.7).abs() < 1e-15);

        let (xpp, wp) = herglotz_rhs(&sys("1", "0", &[]), &rs(0.7, 3.0, 0.3, 0.9)).unwrap();
        assert_eq!(xpp, vec![0.0]);
        assert_eq!(wp, 4.5);
    }

    #[test]
    fn flat_geodesic_is_straight() {
        let flat = BrinkmannMetric::new(Arc::new(sys("1", "0", &[])));
        let gs = lift_state(flat.system(), &rs(0.5, 1.0, 0.0, 0.25), 1.0).unwrap();
        let traj = integrate_geodesic(&flat, &gs, 5.0, &IntegratorConfig::default()).unwrap();
        for k in 0..traj.len() {
            let s = traj.state(k);
            assert!((s.point.x[0] - (0.5 + s.sigma)).abs() < 1e-10);
            assert!((s.point.w - (0.25 + 0.5 * s.sigma)).abs() < 1e-10);
        }
    }

    #[test]
    fn reduction_of_harmonic_run() {
        let osc = BrinkmannMetric::new(Arc::new(sys("1", "0.5*x1^2", &[])));
        let gs = lift_state(osc.system(), &rs(1.0, 0.0, 0.0, 0.0), 1.0).unwrap();
        let traj = integrate_geodesic_to_u(&osc, &gs, 10.0, &IntegratorConfig::default()).unwrap();
        assert!(traj.udot_variation() <= 1e-12);
        let grid = uniform_grid(0.0, 10.0, 100);
        let red = reduce_trajectory(&osc, &traj, &grid).unwrap();
        for k in 0..red.len() {
            let u = red.u(k);
            assert!((red.state(k).x[0] - u.cos()).abs() < 1e-8);
            assert!((red.sigma().unwrap()[k] - u).abs() < 1e-12);
        }
    }

    #[test]
    fn monotonicity_violation_is_reported() {
        let flat = BrinkmannMetric::new(Arc::new(sys("1", "0", &[])));
        let gs = GeodesicState {
            point: Point::new(vec![0.0], 0.0, 0.0),
            velocity: vec![1.0, -1.0, -0.5],
            sigma: 0.0,
        };
        let traj = integrate_geodesic(&flat, &gs, 1.0, &IntegratorConfig::default()).unwrap();
        assert!(matches!(
            reduce_trajectory(&flat, &traj, &[0.0]),
            Err(Error::MonotonicityViolation { .. })
        ));
    }

    #[test]
    fn u_equation_and_corruption() {
        let m = BrinkmannMetric::new(Arc::new(damped_action()));
        let gs = lift_state(m.system(), &rs(1.0, 0.0, 0.0, 0.0), 1.0).unwrap();
        let mut traj =
            integrate_geodesic_to_u(&m, &gs, 10.0, &IntegratorConfig::default()).unwrap();
        assert!(u_equation_residual(&m, &traj).unwrap() <= 1e-8);
        assert!(w_equation_residual(&m, &traj).unwrap() <= 1e-7);
        for s in traj.inner_mut().samples_mut() {
            s.y[4] += 1e-3;
        }
        assert!(u_equation_residual(&m, &traj).unwrap() > 1e-4);
    }

    #[test]
    fn non_null_data_breaks_w_equation() {
        let m = BrinkmannMetric::new(Arc::new(damped_action()));
        let mut gs = lift_state(m.system(), &rs(1.0, 0.0, 0.0, 0.0), 1.0).unwrap();
        gs.velocity[2] -= 0.1;
        assert!((null_residual(&m, &gs).unwrap() - 0.1).abs() < 1e-14);
        assert!(w_equation_residual_at(&m, &gs).unwrap() > 1e-4);
    }

    #[test]
    fn homogeneity() {
        let s = damped_action();
        let r = rs(0.3, -1.1, 0.4, 0.2);
        assert!(homogeneity_residual(&s, &r, 1.7).unwrap() <= 1e-12);
        assert!(matches!(
            homogeneity_residual(&s, &r, 0.0),
            Err(Error::ZeroUdot)
        ));
        let p = r.point();
        let l1 = velocity_lagrangian(&s, &p, &[-1.1, 1.0]).unwrap();
        let l2 = velocity_lagrangian(&s, &p, &[-2.2, 2.0]).unwrap();
        assert!((l2 - 2.0 * l1).abs() <= 1e-12);
        let bad = euler_homogeneity_defect(
            |v| Ok(velocity_lagrangian(&s, &p, v)? + v[1].clone() * v[1].clone()),
            &[-1.1, 1.0],
        )
        .unwrap();
        assert!(bad > 0.5);
    }
}
