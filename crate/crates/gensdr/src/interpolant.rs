//! Interpolation schedules and training-batch construction for conditional
//! stochastic interpolation.
//!
//! A schedule supplies coefficients `alpha_t`, `beta_t` with
//! `alpha_0 = beta_1 = 1` and `alpha_1 = beta_0 = 0`. The interpolated state
//! is `Y_t = alpha_t * eta + beta_t * Y` and the regression target for the
//! velocity field is `dalpha_t * eta + dbeta_t * Y`.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::real::Real;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// `alpha = 1 - t`, `beta = t`.
    StraightLine,
    /// `alpha = cos(pi t / 2)`, `beta = sin(pi t / 2)`.
    Trigonometric,
}

/// Schedule coefficients with first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeffs<R> {
    pub alpha: R,
    pub beta: R,
    pub dalpha: R,
    pub dbeta: R,
    pub ddalpha: R,
    pub ddbeta: R,
}

impl Schedule {
    pub fn eval<R: Real>(&self, t: R) -> Result<Coeffs<R>> {
        if t < R::zero() || t > R::one() || !t.is_finite() {
            return Err(Error::Config(format!("time {t} outside [0, 1]")));
        }
        Ok(match self {
            Schedule::StraightLine => Coeffs {
                alpha: R::one() - t,
                beta: t,
                dalpha: -R::one(),
                dbeta: R::one(),
                ddalpha: R::zero(),
                ddbeta: R::zero(),
            },
            Schedule::Trigonometric => {
                let half_pi = R::of(std::f64::consts::FRAC_PI_2);
                let a = half_pi * t;
                Coeffs {
                    alpha: a.cos(),
                    beta: a.sin(),
                    dalpha: -half_pi * a.sin(),
                    dbeta: half_pi * a.cos(),
                    ddalpha: -half_pi * half_pi * a.cos(),
                    ddbeta: -half_pi * half_pi * a.sin(),
                }
            }
        })
    }
}

/// `alpha_t * y0 + beta_t * y1`.
pub fn interpolate<R: Real>(sched: Schedule, y0: &[R], y1: &[R], t: R) -> Result<Vec<R>> {
    if y0.len() != y1.len() {
        return Err(Error::shape("interpolate", y0.len(), y1.len()));
    }
    let c = sched.eval(t)?;
    Ok(y0
        .iter()
        .zip(y1)
        .map(|(&a, &b)| c.alpha * a + c.beta * b)
        .collect())
}

/// `dalpha_t * y0 + dbeta_t * y1`, the velocity-field regression target.
pub fn velocity_target<R: Real>(sched: Schedule, y0: &[R], y1: &[R], t: R) -> Result<Vec<R>> {
    if y0.len() != y1.len() {
        return Err(Error::shape("velocity_target", y0.len(), y1.len()));
    }
    let c = sched.eval(t)?;
    Ok(y0
        .iter()
        .zip(y1)
        .map(|(&a, &b)| c.dalpha * a + c.dbeta * b)
        .collect())
}

/// `psi(tau) = max over [0, 1-tau] of 1/alpha_t`, the singularity gauge.
/// Errors if `alpha` vanishes (or goes negative) inside the interval.
pub fn schedule_psi<R: Real>(sched: Schedule, tau: R) -> Result<R> {
    if tau <= R::zero() || tau >= R::of(0.5) {
        return Err(Error::Config(format!("tau {tau} outside (0, 1/2)")));
    }
    // Both built-in schedules have nonincreasing alpha, but scan a dense grid
    // (endpoints included) so any future schedule is handled the same way.
    let steps = 10_000usize;
    let hi = R::one() - tau;
    let mut min_alpha = R::infinity();
    for k in 0..=steps {
        let t = hi * R::of(k as f64 / steps as f64);
        let a = sched.eval(t)?.alpha;
        if a <= R::zero() {
            return Err(Error::VanishingAlpha);
        }
        min_alpha = min_alpha.min(a);
    }
    Ok(R::one() / min_alpha)
}

/// A training batch for conditional stochastic interpolation.
#[derive(Debug, Clone)]
pub struct CsiBatch<R> {
    pub x: Matrix<R>,
    pub y: Matrix<R>,
    /// Standard normal noise, one row per observation.
    pub eta: Matrix<R>,
    /// Times in `[0, 1-tau]`.
    pub t: Vec<R>,
    /// `alpha_{t_i} eta_i + beta_{t_i} y_i` rowwise.
    pub y_t: Matrix<R>,
    /// `dalpha_{t_i} eta_i + dbeta_{t_i} y_i` rowwise.
    pub target: Matrix<R>,
    pub tau: R,
    pub sched: Schedule,
}

/// Draw noise and times and assemble the interpolated states and targets.
pub fn make_batch<R: Real>(
    x: &Matrix<R>,
    y: &Matrix<R>,
    sched: Schedule,
    tau: R,
    rng: &mut Stream,
) -> Result<CsiBatch<R>> {
    if x.rows() != y.rows() {
        return Err(Error::shape("make_batch rows", x.rows(), y.rows()));
    }
    if tau < R::zero() || tau > R::of(0.5) {
        return Err(Error::Config(format!("tau {tau} outside [0, 1/2]")));
    }
    let n = y.rows();
    let d_y = y.cols();
    let mut eta = Matrix::zeros(n, d_y);
    for v in eta.data_mut() {
        *v = rng.normal();
    }
    let hi = R::one() - tau;
    let t: Vec<R> = (0..n).map(|_| rng.uniform_in(R::zero(), hi)).collect();
    let mut y_t = Matrix::zeros(n, d_y);
    let mut target = Matrix::zeros(n, d_y);
    for i in 0..n {
        let c = sched.eval(t[i])?;
        let (er, yr) = (eta.row(i), y.row(i));
        for j in 0..d_y {
            y_t[(i, j)] = c.alpha * er[j] + c.beta * yr[j];
            target[(i, j)] = c.dalpha * er[j] + c.dbeta * yr[j];
        }
    }
    Ok(CsiBatch {
        x: x.clone(),
        y: y.clone(),
        eta,
        t,
        y_t,
        target,
        tau,
        sched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_endpoints() {
        let c = Schedule::StraightLine.eval(0.0f64).unwrap();
        assert_eq!((c.alpha, c.beta, c.dalpha, c.dbeta), (1.0, 0.0, -1.0, 1.0));
        let c = Schedule::StraightLine.eval(0.5f64).unwrap();
        assert_eq!((c.alpha, c.beta, c.dalpha, c.dbeta), (0.5, 0.5, -1.0, 1.0));
        assert!(Schedule::StraightLine.eval(1.5f64).is_err());
    }

    #[test]
    fn trig_midpoint() {
        let c = Schedule::Trigonometric.eval(0.5f64).unwrap();
        let s2 = std::f64::consts::SQRT_2 / 2.0;
        let pi = std::f64::consts::PI;
        assert!((c.alpha - s2).abs() < 1e-15);
        assert!((c.beta - s2).abs() < 1e-15);
        assert!((c.dalpha + pi * s2 / 2.0).abs() < 1e-15);
        assert!((c.dbeta - pi * s2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn interpolate_examples() {
        let y0 = [1.0, 0.0];
        let y1 = [0.0, 2.0];
        assert_eq!(interpolate(Schedule::StraightLine, &y0, &y1, 0.0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(interpolate(Schedule::StraightLine, &y0, &y1, 1.0).unwrap(), vec![0.0, 2.0]);
        assert_eq!(
            interpolate(Schedule::StraightLine, &y0, &y1, 0.25).unwrap(),
            vec![0.75, 0.5]
        );
        assert!(interpolate(Schedule::StraightLine, &y0, &[1.0], 0.5).is_err());
    }

    #[test]
    fn velocity_target_examples() {
        let y0 = [1.0, -1.0];
        let y1 = [0.5, 2.0];
        for t in [0.0, 0.3, 0.9] {
            let v = velocity_target(Schedule::StraightLine, &y0, &y1, t).unwrap();
            assert_eq!(v, vec![y1[0] - y0[0], y1[1] - y0[1]]);
        }
        let same = [0.7, 0.7];
        assert_eq!(
            velocity_target(Schedule::StraightLine, &same, &same, 0.4).unwrap(),
            vec![0.0, 0.0]
        );
        // trig at t=0: dalpha=0, dbeta=pi/2; with y0=(1,), y1=(0,) the target is 0.
        let v = velocity_target(Schedule::Trigonometric, &[1.0f64], &[0.0], 0.0).unwrap();
        assert!(v[0].abs() < 1e-15);
    }

    #[test]
    fn psi_examples() {
        let p = schedule_psi::<f64>(Schedule::StraightLine, 1.0 / 3.0).unwrap();
        assert!((p - 3.0).abs() < 1e-9, "{p}");
        let p = schedule_psi::<f64>(Schedule::StraightLine, 0.001).unwrap();
        assert!((p - 1000.0).abs() < 1e-6, "{p}");
        assert!(schedule_psi::<f64>(Schedule::StraightLine, 0.5).is_err());
        assert!(schedule_psi::<f64>(Schedule::StraightLine, 0.0).is_err());
    }

    #[test]
    fn batch_respects_tau_and_determinism() {
        let x = Matrix::<f64>::zeros(64, 3);
        let mut y = Matrix::<f64>::zeros(64, 2);
        let mut r = Stream::new(2);
        for v in y.data_mut() {
            *v = r.normal::<f64>();
        }
        let b1 = make_batch(&x, &y, Schedule::StraightLine, 0.5, &mut Stream::new(7)).unwrap();
        let b2 = make_batch(&x, &y, Schedule::StraightLine, 0.5, &mut Stream::new(7)).unwrap();
        assert!(b1.t.iter().all(|&t| (0.0..=0.5).contains(&t)));
        assert_eq!(b1.t, b2.t);
        assert_eq!(b1.eta, b2.eta);
        assert!(make_batch(&x, &y, Schedule::StraightLine, 0.6, &mut Stream::new(0)).is_err());
    }

    #[test]
    fn batch_noise_moments() {
        let n = 100_000;
        let x = Matrix::<f64>::zeros(n, 1);
        let y = Matrix::<f64>::zeros(n, 1);
        let b = make_batch(&x, &y, Schedule::StraightLine, 0.0, &mut Stream::new(3)).unwrap();
        let mean: f64 = b.eta.data().iter().sum::<f64>() / n as f64;
        let var: f64 = b.eta.data().iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn batch_fields_are_consistent() {
        let mut rng = Stream::new(4);
        let x = Matrix::<f64>::zeros(32, 2);
        let mut y = Matrix::<f64>::zeros(32, 3);
        for v in y.data_mut() {
            *v = rng.normal::<f64>();
        }
        let b = make_batch(&x, &y, Schedule::Trigonometric, 0.1, &mut Stream::new(5)).unwrap();
        for i in 0..32 {
            let yt = interpolate(b.sched, b.eta.row(i), b.y.row(i), b.t[i]).unwrap();
            let tg = velocity_target(b.sched, b.eta.row(i), b.y.row(i), b.t[i]).unwrap();
            assert_eq!(yt.as_slice(), b.y_t.row(i));
            assert_eq!(tg.as_slice(), b.target.row(i));
        }
    }
}
