//! Closed-form ground truth for the Gaussian warm-up model `Y = f0(X) * eps`.
//!
//! In this model every conditional moment of the interpolation path is
//! available in closed form, so the velocity field, its gradients, and the
//! transport equation can all be checked numerically against independent
//! routes. This module is the crate's verification anchor.

use crate::error::{Error, Result};
use crate::interpolant::Schedule;
use crate::numerics::Matrix;
use crate::real::Real;
use crate::rng::Stream;

/// The warm-up generative model: `f0` maps covariates to a scale in
/// `[c1, c2]` with `c2 >= c1 > 0`, and `Y = f0(X) * eps` with standard
/// Gaussian `eps` of dimension `d_y`.
pub struct WarmUpSpec<R> {
    pub f0: Box<dyn Fn(&[R]) -> R + Send + Sync>,
    pub c1: R,
    pub c2: R,
    pub d_y: usize,
    pub sched: Schedule,
}

/// Conditional moments of `Y` given `Y_t = y` and scale `z`:
/// mean `beta z^2 / (alpha^2 + beta^2 z^2) * y`, covariance
/// `z^2 alpha^2 / (alpha^2 + beta^2 z^2) * I`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianConditional<R> {
    pub mean_coeff: R,
    pub cov_scalar: R,
}

pub fn gaussian_conditional<R: Real>(z: R, t: R, sched: Schedule) -> Result<GaussianConditional<R>> {
    let c = sched.eval(t)?;
    let denom = c.alpha * c.alpha + c.beta * c.beta * z * z;
    if denom <= R::zero() {
        return Err(Error::Config(format!("degenerate denominator at t={t}, z={z}")));
    }
    Ok(GaussianConditional {
        mean_coeff: c.beta * z * z / denom,
        cov_scalar: z * z * c.alpha * c.alpha / denom,
    })
}

/// The closed-form velocity coefficient
/// `c(z, t) = (dalpha alpha + dbeta beta z^2) / (alpha^2 + beta^2 z^2)`.
pub fn coefficient<R: Real>(z: R, t: R, sched: Schedule) -> Result<R> {
    let c = sched.eval(t)?;
    let denom = c.alpha * c.alpha + c.beta * c.beta * z * z;
    if denom <= R::zero() {
        return Err(Error::Config(format!("denominator 0 at t={t}, z={z}")));
    }
    Ok((c.dalpha * c.alpha + c.dbeta * c.beta * z * z) / denom)
}

/// Closed-form velocity field `g0(z, y, t) = c(z, t) * y`.
pub fn closed_form_g0<R: Real>(z: R, y: &[R], t: R, sched: Schedule) -> Result<Vec<R>> {
    let coef = coefficient(z, t, sched)?;
    Ok(y.iter().map(|&v| coef * v).collect())
}

/// The same velocity computed by the independent joint-Gaussian route:
/// `dalpha * E[eta | Y_t=y] + dbeta * E[Y | Y_t=y]` with
/// `E[eta | Y_t=y] = alpha / (alpha^2 + beta^2 z^2) * y` and the conditional
/// mean from [`gaussian_conditional`]. Serves as the anti-drift oracle.
pub fn gaussian_conditional_velocity<R: Real>(
    z: R,
    y: &[R],
    t: R,
    sched: Schedule,
) -> Result<Vec<R>> {
    let c = sched.eval(t)?;
    let denom = c.alpha * c.alpha + c.beta * c.beta * z * z;
    if denom <= R::zero() {
        return Err(Error::Config(format!("denominator 0 at t={t}, z={z}")));
    }
    let e_eta = c.alpha / denom;
    let e_y = c.beta * z * z / denom;
    Ok(y.iter().map(|&v| (c.dalpha * e_eta + c.dbeta * e_y) * v).collect())
}

/// Algebraic residual of the velocity y-gradient identity: the analytic
/// gradient is `c(z, t) * I`; the right-hand side expresses it through the
/// conditional covariance as
/// `(beta / alpha^3)(alpha dbeta - dalpha beta) Cov + dalpha / alpha`.
pub fn check_lemma3<R: Real>(z: R, t: R, sched: Schedule) -> Result<R> {
    if t <= R::zero() || t >= R::one() {
        return Err(Error::Config(format!("t={t} not interior to (0, 1)")));
    }
    let c = sched.eval(t)?;
    let cond = gaussian_conditional(z, t, sched)?;
    let wronskian = c.alpha * c.dbeta - c.dalpha * c.beta;
    let rhs = c.beta / (c.alpha * c.alpha * c.alpha) * wronskian * cond.cov_scalar
        + c.dalpha / c.alpha;
    Ok((rhs - coefficient(z, t, sched)?).abs())
}

/// For `Y | Y_t = y ~ N(mu, s I)`: `Cov[\|Y\|^2, Y] = 2 s mu`.
fn cov_norm2_y<R: Real>(cond: GaussianConditional<R>, y_j: R) -> R {
    R::of(2.0) * cond.cov_scalar * cond.mean_coeff * y_j
}

/// Relative residual between the central finite difference of
/// `t -> g0(z, y, t)` and the analytic time-gradient expressed through the
/// conditional moments.
pub fn check_lemma4<R: Real>(z: R, y: &[R], t: R, sched: Schedule, h: R) -> Result<R> {
    if h <= R::zero() || t <= h || t + h >= R::one() {
        return Err(Error::Config(format!("fd step h={h} invalid at t={t}")));
    }
    let c = sched.eval(t)?;
    let cond = gaussian_conditional(z, t, sched)?;
    let w = c.alpha * c.dbeta - c.dalpha * c.beta;
    let w2 = c.alpha * c.ddbeta - c.ddalpha * c.beta;
    let mut max_rel = R::zero();
    for &yj in y {
        let e_y = cond.mean_coeff * yj;
        let term1 = (w2 / c.alpha - c.dalpha / (c.alpha * c.alpha) * w) * e_y;
        let term2 = (c.ddalpha / c.alpha - c.dalpha * c.dalpha / (c.alpha * c.alpha)) * yj;
        let term3 = -c.beta / c.alpha.powi(4) * w * w * cov_norm2_y(cond, yj);
        let term4 = w * (c.alpha * c.dbeta - R::of(2.0) * c.dalpha * c.beta) / c.alpha.powi(4)
            * cond.cov_scalar
            * yj;
        let analytic = term1 + term2 + term3 + term4;
        let fd = (coefficient(z, t + h, sched)? - coefficient(z, t - h, sched)?)
            / (R::of(2.0) * h)
            * yj;
        let denom = analytic.abs().max(R::one());
        max_rel = max_rel.max((analytic - fd).abs() / denom);
    }
    Ok(max_rel)
}

/// Relative residual between the central finite difference of
/// `z -> g0(z, y, t)` and the analytic z-gradient, which in the Gaussian
/// case uses the potential `U(xi, z) = |xi|^2 / (2 z^2) + d_y ln(z sqrt(2 pi))`
/// with `grad_z U = -|xi|^2 / z^3 + d_y / z`.
pub fn check_lemma5<R: Real>(z: R, y: &[R], t: R, sched: Schedule, h: R) -> Result<R> {
    if h <= R::zero() || t <= R::zero() || t >= R::one() {
        return Err(Error::Config(format!("fd step h={h} invalid at t={t}")));
    }
    let c = sched.eval(t)?;
    let cond = gaussian_conditional(z, t, sched)?;
    let w = c.alpha * c.dbeta - c.dalpha * c.beta;
    let mut max_rel = R::zero();
    for &yj in y {
        // Cov{Y, grad_z U(Y, z)} = -(1/z^3) Cov(Y, |Y|^2) = -(2 s mu_j)/z^3.
        let cov_term = -cov_norm2_y(cond, yj) / (z * z * z);
        let analytic = -(w / c.alpha) * cov_term;
        let fd = (coefficient(z + h, t, sched)? - coefficient(z - h, t, sched)?)
            / (R::of(2.0) * h)
            * yj;
        let denom = analytic.abs().max(R::one());
        max_rel = max_rel.max((analytic - fd).abs() / denom);
    }
    Ok(max_rel)
}

/// Gaussian density of `N(0, s I)` at `y`, where `s = alpha^2 + beta^2 z^2`
/// is the marginal variance of `Y_t` given scale `z`.
fn path_density<R: Real>(z: R, y: &[R], t: R, sched: Schedule) -> Result<R> {
    let c = sched.eval(t)?;
    let s = c.alpha * c.alpha + c.beta * c.beta * z * z;
    let d = y.len() as f64;
    let norm2: R = y.iter().map(|&v| v * v).sum();
    let tau = R::of(std::f64::consts::TAU);
    Ok((tau * s).powf(R::of(-d / 2.0)) * (-norm2 / (R::of(2.0) * s)).exp())
}

/// Finite-difference residual of the transport equation
/// `d_t rho + div_y (g0 rho) = 0` for the warm-up path density, normalized
/// by the largest term magnitude.
pub fn transport_residual<R: Real>(z: R, y: &[R], t: R, sched: Schedule, h: R) -> Result<R> {
    if h <= R::zero() || t <= h || t + h >= R::one() {
        return Err(Error::Config(format!("fd step h={h} invalid at t={t}")));
    }
    let dt_rho = (path_density(z, y, t + h, sched)? - path_density(z, y, t - h, sched)?)
        / (R::of(2.0) * h);
    let mut div = R::zero();
    let mut yp = y.to_vec();
    for j in 0..y.len() {
        let flux = |yj: R, yp: &mut [R]| -> Result<R> {
            let orig = yp[j];
            yp[j] = yj;
            let rho = path_density(z, yp, t, sched)?;
            let g = coefficient(z, t, sched)? * yj;
            yp[j] = orig;
            Ok(g * rho)
        };
        let plus = flux(y[j] + h, &mut yp)?;
        let minus = flux(y[j] - h, &mut yp)?;
        div += (plus - minus) / (R::of(2.0) * h);
    }
    let scale = dt_rho
        .abs()
        .max(div.abs())
        .max(path_density(z, y, t, sched)?);
    Ok((dt_rho + div).abs() / scale)
}

/// Measured suprema of `|c|`, `|d_t c|`, `|d_z c|` over a dense grid
/// `t in [0, 1] x z in [c1, c2]`. Because `g0 = c(z, t) y`, these bound the
/// velocity field and its gradients on any `|y| <= A` box up to the factor A.
#[derive(Debug, Clone, Copy)]
pub struct Prop2Bounds<R> {
    pub sup_coeff: R,
    pub sup_dt: R,
    pub sup_dz: R,
}

impl<R: Real> Prop2Bounds<R> {
    pub fn max(&self) -> R {
        self.sup_coeff.max(self.sup_dt).max(self.sup_dz)
    }

    pub fn is_finite(&self) -> bool {
        self.max().is_finite()
    }
}

pub fn prop2_coefficient_bound<R: Real>(c1: R, c2: R, sched: Schedule) -> Result<Prop2Bounds<R>> {
    if c1 <= R::zero() || c2 < c1 {
        return Err(Error::Config(format!("need 0 < c1 <= c2, got [{c1}, {c2}]")));
    }
    let t_steps = 2000usize;
    let z_steps = if c1 == c2 { 0 } else { 200usize };
    let h = R::of(1e-6);
    let mut b = Prop2Bounds {
        sup_coeff: R::zero(),
        sup_dt: R::zero(),
        sup_dz: R::zero(),
    };
    for zi in 0..=z_steps {
        let z = if z_steps == 0 {
            c1
        } else {
            c1 + (c2 - c1) * R::of(zi as f64 / z_steps as f64)
        };
        for ti in 0..=t_steps {
            let t = R::of(ti as f64 / t_steps as f64);
            let c = coefficient(z, t, sched)?;
            b.sup_coeff = b.sup_coeff.max(c.abs());
            // One-sided differences at the time endpoints.
            let (tp, tm) = if t < h {
                (t + h, t)
            } else if t + h > R::one() {
                (t, t - h)
            } else {
                (t + h, t - h)
            };
            let dt = (coefficient(z, tp, sched)? - coefficient(z, tm, sched)?) / (tp - tm);
            b.sup_dt = b.sup_dt.max(dt.abs());
            let dz = (coefficient(z + h, t, sched)? - coefficient(z - h, t, sched)?)
                / (R::of(2.0) * h);
            b.sup_dz = b.sup_dz.max(dz.abs());
        }
    }
    Ok(b)
}

/// `n` draws from `N(0, z^2 I_{d_y})`.
pub fn warmup_sample<R: Real>(z: R, d_y: usize, n: usize, rng: &mut Stream) -> Matrix<R> {
    let mut out = Matrix::zeros(n, d_y);
    for v in out.data_mut() {
        *v = z * rng.normal();
    }
    out
}

/// Result of one named oracle check: the measured maximum residual against
/// its threshold.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_residual: f64,
    pub threshold: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_residual.is_finite() && self.max_residual < self.threshold
    }
}

fn t_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

/// Run the full verification suite on a schedule and report per-check
/// residuals. Used by the `oracle-verify` CLI and the acceptance tests.
pub fn verify_all(sched: Schedule) -> Result<Vec<CheckResult>> {
    let zs = [0.5, 1.0, 2.0, 5.0];
    let axes: [Vec<f64>; 2] = [vec![1.0, 0.0], vec![0.0, 1.0]];
    let h = 1e-5;

    let mut prop1: f64 = 0.0;
    let mut lem3: f64 = 0.0;
    let mut lem4: f64 = 0.0;
    let mut lem5: f64 = 0.0;
    for &z in &zs {
        for t in t_grid() {
            lem3 = lem3.max(check_lemma3(z, t, sched)?);
            for y in &axes {
                let a = closed_form_g0(z, y, t, sched)?;
                let b = gaussian_conditional_velocity(z, y, t, sched)?;
                for (u, v) in a.iter().zip(&b) {
                    prop1 = prop1.max((u - v).abs());
                }
                lem4 = lem4.max(check_lemma4(z, y, t, sched, h)?);
                lem5 = lem5.max(check_lemma5(z, y, t, sched, h)?);
            }
        }
    }

    let mut transport: f64 = 0.0;
    for &z in &[0.5, 1.0, 2.0] {
        for k in 1..=9 {
            let t = k as f64 * 0.1;
            for y in [vec![0.0, 0.0], vec![1.0, 1.0]] {
                transport = transport.max(transport_residual(z, &y, t, sched, h)?);
            }
        }
    }

    let prop2 = prop2_coefficient_bound(0.5, 2.0, sched)?;

    Ok(vec![
        CheckResult {
            name: "prop1-closed-form-vs-conditioning",
            max_residual: prop1,
            threshold: 1e-10,
        },
        CheckResult {
            name: "lemma3-y-gradient-identity",
            max_residual: lem3,
            threshold: 1e-10,
        },
        CheckResult {
            name: "lemma4-t-gradient-fd",
            max_residual: lem4,
            threshold: 1e-6,
        },
        CheckResult {
            name: "lemma5-z-gradient-fd",
            max_residual: lem5,
            threshold: 1e-6,
        },
        CheckResult {
            name: "transport-equation-fd",
            max_residual: transport,
            threshold: 1e-6,
        },
        CheckResult {
            name: "prop2-coefficient-sup-finite",
            max_residual: if prop2.is_finite() { 0.0 } else { f64::INFINITY },
            threshold: 1.0,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    const SL: Schedule = Schedule::StraightLine;

    #[test]
    fn coefficient_hand_values() {
        // t = 0: c = (dalpha * alpha) / alpha^2 = -1 for any z.
        for z in [0.5f64, 1.0, 2.0, 7.0] {
            assert!((coefficient(z, 0.0, SL).unwrap() + 1.0).abs() < 1e-15);
        }
        // z = 1, t = 0.5: numerator -0.5 + 0.5 = 0.
        assert_eq!(coefficient(1.0, 0.5, SL).unwrap(), 0.0);
        // z = 2, t = 0.5: (-0.5 + 1*0.5*4) / (0.25 + 0.25*4) = 1.5 / 1.25 = 1.2
        assert!((coefficient(2.0f64, 0.5, SL).unwrap() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_conditioning_route() {
        let g = closed_form_g0(2.0f64, &[1.0, 0.0], 0.5, SL).unwrap();
        let h = gaussian_conditional_velocity(2.0, &[1.0, 0.0], 0.5, SL).unwrap();
        assert!((g[0] - 1.2).abs() < 1e-15);
        assert!((g[0] - h[0]).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
        // t -> 0: E[eta | Y_0 = y] = y so the velocity is -y.
        let g = gaussian_conditional_velocity(3.0f64, &[2.0], 0.0, SL).unwrap();
        assert!((g[0] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn lemma3_identity_on_grid() {
        for z in [0.5, 1.0, 2.0, 5.0] {
            for t in t_grid() {
                let r = check_lemma3(z, t, SL).unwrap();
                assert!(r < 1e-10, "z={z} t={t} residual={r}");
            }
        }
        assert!(check_lemma3(1.0, 0.0, SL).is_err());
    }

    #[test]
    fn lemma4_oddness_in_y() {
        // Both sides are linear in y, so negation flips sign; the residual is
        // unchanged.
        let a = check_lemma4(2.0f64, &[1.0, 0.5], 0.4, SL, 1e-5).unwrap();
        let b = check_lemma4(2.0, &[-1.0, -0.5], 0.4, SL, 1e-5).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(a < 1e-6);
    }

    #[test]
    fn lemma45_fd_residuals() {
        let h = 1e-5;
        for z in [0.5, 1.0, 2.0] {
            for t in [0.2, 0.5, 0.8] {
                assert!(check_lemma4(z, &[1.0, 0.0], t, SL, h).unwrap() < 1e-6);
                assert!(check_lemma5(z, &[1.0, 0.0], t, SL, h).unwrap() < 1e-6);
            }
        }
    }

    #[test]
    fn transport_residuals() {
        assert!(transport_residual(1.0, &[0.0, 0.0], 0.5, SL, 1e-5).unwrap() < 1e-8);
        assert!(transport_residual(2.0, &[1.0, 1.0], 0.3, SL, 1e-5).unwrap() < 1e-6);
    }

    #[test]
    fn prop2_bounds() {
        let b = prop2_coefficient_bound(1.0f64, 1.0, SL).unwrap();
        assert!((b.sup_coeff - 1.0).abs() < 1e-6, "{}", b.sup_coeff);
        let b = prop2_coefficient_bound(0.5, 2.0, SL).unwrap();
        assert!(b.is_finite());
        assert!(prop2_coefficient_bound(0.0, 1.0, SL).is_err());
    }

    #[test]
    fn warmup_sample_moments() {
        let m = warmup_sample(2.0, 1, 10_000, &mut Stream::new(8));
        let mean: f64 = m.data().iter().sum::<f64>() / 10_000.0;
        let var: f64 = m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.1);
        assert!((var - 4.0).abs() < 0.2, "{var}");
        let a = warmup_sample::<f64>(1.0, 2, 5, &mut Stream::new(3));
        let b = warmup_sample::<f64>(1.0, 2, 5, &mut Stream::new(3));
        assert_eq!(a, b);
    }

    #[test]
    fn verify_all_passes_for_both_schedules() {
        for sched in [Schedule::StraightLine, Schedule::Trigonometric] {
            for check in verify_all(sched).unwrap() {
                assert!(
                    check.passed(),
                    "{} failed on {:?}: {}",
                    check.name,
                    sched,
                    check.max_residual
                );
            }
        }
    }
}
