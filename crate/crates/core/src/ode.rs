//! Adaptive Dormand–Prince 5(4) integrator with PI step control and cubic
//! Hermite dense output.

use crate::{Error, Result};

/// State norm (max-abs) above which integration aborts.
pub const BLOW_UP_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub max_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 1_000_000,
            max_step: f64::INFINITY,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerances must be positive (rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidConfig("max_step must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub y: Vec<f64>,
    /// Right-hand side at `(t, y)`.
    pub dy: Vec<f64>,
    /// Size of the step that ended here (0 for the initial sample).
    pub step: f64,
    /// Rejected attempts before this step was accepted.
    pub rejected: usize,
    /// Caller-defined scalar diagnostic.
    pub monitor: f64,
}

/// Accepted steps of one integration, with Hermite dense output between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Sample>,
}

impl Trajectory {
    pub fn from_samples(samples: Vec<Sample>) -> Self {
        assert!(!samples.is_empty());
        Self { samples }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Sample] {
        &mut self.samples
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("non-empty trajectory")
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.first().t, self.last().t)
    }

    pub fn rejected_steps(&self) -> usize {
        self.samples.iter().map(|s| s.rejected).sum()
    }

    /// Index `k` of the step `[t_k, t_{k+1}]` containing `t`.
    pub fn locate(&self, t: f64) -> Option<usize> {
        let (t0, t1) = self.t_range();
        if !(t0..=t1).contains(&t) {
            return None;
        }
        if self.samples.len() == 1 {
            return Some(0);
        }
        let k = self.samples.partition_point(|s| s.t <= t);
        Some(k.saturating_sub(1).min(self.samples.len() - 2))
    }

    /// Interpolated state and its derivative on step `k` at `t`.
    pub fn hermite(&self, k: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
        let a = &self.samples[k];
        if self.samples.len() == 1 {
            return (a.y.clone(), a.dy.clone());
        }
        let b = &self.samples[k + 1];
        hermite(a, b, t)
    }

    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        self.locate(t).map(|k| self.hermite(k, t).0)
    }
}

/// Cubic Hermite interpolant between two samples; returns value and
/// derivative. Reproduces both endpoints exactly.
pub fn hermite(a: &Sample, b: &Sample, t: f64) -> (Vec<f64>, Vec<f64>) {
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    // derivatives with respect to s
    let d00 = 6.0 * s2 - 6.0 * s;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = -6.0 * s2 + 6.0 * s;
    let d11 = 3.0 * s2 - 2.0 * s;
    let n = a.y.len();
    let mut y = Vec::with_capacity(n);
    let mut dy = Vec::with_capacity(n);
    for i in 0..n {
        y.push(h00 * a.y[i] + h10 * h * a.dy[i] + h01 * b.y[i] + h11 * h * b.dy[i]);
        dy.push((d00 * a.y[i] + d01 * b.y[i]) / h + d10 * a.dy[i] + d11 * b.dy[i]);
    }
    (y, dy)
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

fn scaled_norm(v: &[f64], y0: &[f64], y1: &[f64], cfg: &IntegratorConfig) -> f64 {
    let sum: f64 = v
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = cfg.atol + cfg.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / v.len() as f64).sqrt()
}

fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    cfg: &IntegratorConfig,
    span: f64,
) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let d0 = scaled_norm(y0, y0, y0, cfg);
    let d1 = scaled_norm(f0, y0, y0, cfg);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(span)
    .min(cfg.max_step);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    rhs(t0 + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled_norm(&diff, y0, y0, cfg) / h0;
    let big = d1.max(d2);
    let h1 = if big <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / big).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span).min(cfg.max_step))
}

/// Integrate `y' = rhs(t, y)` from `t0` towards `t_end` (`t_end > t0`).
///
/// `monitor` is evaluated at every accepted sample and stored alongside
/// it. Integration also ends early, after the first accepted step for
/// which `stop` returns true.
pub fn integrate<F, M, S>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    mut monitor: M,
    mut stop: S,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    M: FnMut(f64, &[f64]) -> Result<f64>,
    S: FnMut(f64, &[f64]) -> bool,
{
    cfg.validate()?;
    if !(t_end > t0) {
        return Err(Error::InvalidConfig(format!(
            "integration span must be increasing, got [{t0}, {t_end}]"
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(crate::scalar::ScalarError::NonFinite("initial state").into());
    }
    let dim = y0.len();
    let mut f0 = vec![0.0; dim];
    rhs(t0, y0, &mut f0)?;
    let mut samples = vec![Sample {
        t: t0,
        y: y0.to_vec(),
        dy: f0.clone(),
        step: 0.0,
        rejected: 0,
        monitor: monitor(t0, y0)?,
    }];

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = initial_step(&mut rhs, t0, y0, &f0, cfg, t_end - t0)?;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    k[0].copy_from_slice(&f0);
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let mut rejected_here = 0;
    let mut steps = 0;

    while t < t_end {
        if steps >= cfg.max_steps {
            return Err(Error::StepLimitExceeded {
                max_steps: cfg.max_steps,
                t,
            });
        }
        steps += 1;
        h = h.min(cfg.max_step);
        let mut last = false;
        if t + h >= t_end || t + 1.01 * h >= t_end {
            h = t_end - t;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h });
        }

        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            rhs(t + C[s] * h, &stage, &mut tail[0])?;
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
        }
        for i in 0..dim {
            err[i] = h * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>();
        }
        let err_norm = scaled_norm(&err, &y, &y_new, cfg);
        if !err_norm.is_finite() {
            h *= MIN_FACTOR;
            last_rejected = true;
            rejected_here += 1;
            continue;
        }

        let fac11 = err_norm.powf(EXPO);
        if err_norm <= 1.0 {
            let fac =
                (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR);
            let mut h_new = h / fac;
            fac_old = err_norm.max(1e-4);
            if last_rejected {
                h_new = h_new.min(h);
            }
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            let f_last = k[6].clone();
            k[0].copy_from_slice(&f_last);
            if y.iter().fold(0.0f64, |m, v| m.max(v.abs())) > BLOW_UP_NORM
                || y.iter().any(|v| !v.is_finite())
            {
                return Err(Error::BlowUp { t });
            }
            samples.push(Sample {
                t,
                y: y.clone(),
                dy: f_last,
                step: h,
                rejected: rejected_here,
                monitor: monitor(t, &y)?,
            });
            rejected_here = 0;
            last_rejected = false;
            if stop(t, &y) {
                break;
            }
            h = h_new;
        } else {
            h /= (fac11 / SAFETY).min(1.0 / MIN_FACTOR);
            last_rejected = true;
            rejected_here += 1;
        }
    }
    Ok(Trajectory { samples })
}

/// One fifth-order step of size `h` from `(t, y)` with slope `f`, no error
/// control. Used to land on points inside an accepted step more accurately
/// than the cubic dense output.
pub fn single_step<F>(mut rhs: F, t: f64, y: &[f64], f: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let dim = y.len();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 6];
    k[0].copy_from_slice(f);
    let mut stage = vec![0.0; dim];
    for s in 1..7 {
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(s.min(6)) {
                acc += A[s][j] * kj[i];
            }
            stage[i] = y[i] + h * acc;
        }
        if s == 6 {
            break;
        }
        rhs(t + C[s] * h, &stage, &mut k[s])?;
    }
    Ok(stage)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = y[1];
        dy[1] = -y[0];
        Ok(())
    }

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let cfg = IntegratorConfig::default();
        let traj = integrate(
            oscillator,
            0.0,
            &[1.0, 0.0],
            10.0,
            &cfg,
            |_, _| Ok(0.0),
            |_, _| false,
        )
        .unwrap();
        let end = traj.last();
        assert_eq!(end.t, 10.0);
        assert!((end.y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((end.y[1] + 10f64.sin()).abs() < 1e-9);
        for w in traj.samples().windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn exponential_growth_with_loose_tolerance() {
        let cfg = IntegratorConfig {
            rtol: 1e-6,
            atol: 1e-9,
            ..Default::default()
        };
        let traj = integrate(
            |_, y, dy| {
                dy[0] = y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            2.0,
            &cfg,
            |_, _| Ok(0.0),
            |_, _| false,
        )
        .unwrap();
        let rel = (traj.last().y[0] - 2f64.exp()).abs() / 2f64.exp();
        assert!(rel < 1e-5, "{rel}");
    }

    #[test]
    fn dense_output_matches_endpoints_and_is_accurate() {
        let cfg = IntegratorConfig::default();
        let traj = integrate(
            oscillator,
            0.0,
            &[1.0, 0.0],
            5.0,
            &cfg,
            |_, _| Ok(0.0),
            |_, _| false,
        )
        .unwrap();
        for (k, pair) in traj.samples().windows(2).enumerate() {
            assert_eq!(traj.hermite(k, pair[0].t).0, pair[0].y);
            assert_eq!(traj.hermite(k, pair[1].t).0, pair[1].y);
        }
        for i in 0..=50 {
            let t = 0.1 * i as f64;
            let y = traj.interpolate(t).unwrap();
            assert!((y[0] - t.cos()).abs() < 1e-8, "t={t}");
        }
        assert!(traj.interpolate(5.1).is_none());
    }

    #[test]
    fn stop_predicate_ends_early() {
        let cfg = IntegratorConfig::default();
        let traj = integrate(
            |_, _, dy| {
                dy[0] = 1.0;
                Ok(())
            },
            0.0,
            &[0.0],
            100.0,
            &cfg,
            |_, _| Ok(0.0),
            |_, y| y[0] >= 3.0,
        )
        .unwrap();
        assert!(traj.last().y[0] >= 3.0);
        assert!(traj.last().t < 100.0);
    }

    #[test]
    fn step_limit_and_blow_up() {
        let cfg = IntegratorConfig {
            max_steps: 3,
            max_step: 0.01,
            ..Default::default()
        };
        let err = integrate(
            oscillator,
            0.0,
            &[1.0, 0.0],
            10.0,
            &cfg,
            |_, _| Ok(0.0),
            |_, _| false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepLimitExceeded { max_steps: 3, .. }));

        let err = integrate(
            |_, y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            2.0,
            &IntegratorConfig::default(),
            |_, _| Ok(0.0),
            |_, _| false,
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::BlowUp { .. } | Error::StepSizeUnderflow { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn single_step_matches_exact_solution() {
        let y0 = [1.0, 0.0];
        let mut f0 = [0.0; 2];
        oscillator(0.0, &y0, &mut f0).unwrap();
        let err = |h: f64| {
            let y = single_step(oscillator, 0.0, &y0, &f0, h).unwrap();
            (y[0] - h.cos()).abs().max((y[1] + h.sin()).abs())
        };
        assert!(err(0.05) < 1e-10);
        // local error is sixth order in h
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 40.0 && ratio < 90.0, "ratio {ratio}");
    }

    #[test]
    fn invalid_configs() {
        let bad = IntegratorConfig {
            rtol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let err = integrate(
            oscillator,
            1.0,
            &[1.0, 0.0],
            0.0,
            &IntegratorConfig::default(),
            |_, _| Ok(0.0),
            |_, _| false,
        );
        assert!(err.is_err());
    }
}
