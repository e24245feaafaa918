//! Probability-flow ODE integration by the Euler scheme: advance Gaussian
//! initial draws along the fitted (or supplied) velocity field from `t = 0`
//! to `t = 1 - tau`.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::real::Real;
use crate::rng::Stream;
use crate::trainer::GenSdrModel;

/// Strictly increasing time grid with exact endpoints `0` and `1 - tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeGrid<R> {
    times: Vec<R>,
}

impl<R: Real> OdeGrid<R> {
    pub fn times(&self) -> &[R] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Largest step size.
    pub fn max_step(&self) -> R {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(R::zero(), |a, b| a.max(b))
    }
}

/// Uniform grid of `k` steps on `[0, 1 - tau]`.
pub fn make_grid<R: Real>(k: usize, tau: R) -> Result<OdeGrid<R>> {
    if k == 0 {
        return Err(Error::Config("grid needs at least one step".into()));
    }
    if tau < R::zero() || tau >= R::of(0.5) {
        return Err(Error::Config(format!("tau {tau} outside [0, 1/2)")));
    }
    let hi = R::one() - tau;
    let mut times: Vec<R> = (0..=k)
        .map(|i| hi * R::of(i as f64 / k as f64))
        .collect();
    // Endpoints must be exact regardless of rounding in the interior.
    times[0] = R::zero();
    times[k] = hi;
    Ok(OdeGrid { times })
}

/// Forward Euler: `z_{k+1} = z_k + (t_{k+1} - t_k) * field(z_k, t_k)`.
/// The field is never evaluated past `1 - tau`.
pub fn euler_integrate<R: Real>(
    field: impl Fn(&[R], R) -> Result<Vec<R>>,
    z0: &[R],
    grid: &OdeGrid<R>,
) -> Result<Vec<R>> {
    let mut z = z0.to_vec();
    for (step, w) in grid.times.windows(2).enumerate() {
        let v = field(&z, w[0])?;
        if v.len() != z.len() {
            return Err(Error::shape("euler field output", z.len(), v.len()));
        }
        let dt = w[1] - w[0];
        for (zi, vi) in z.iter_mut().zip(&v) {
            *zi += dt * *vi;
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::OdeBlowup { step });
        }
    }
    Ok(z)
}

/// Draw `n_samples` approximate conditional samples at covariate `x`:
/// `N(0, I)` initial states advanced jointly through the fitted field.
/// The representation is computed once and shared by all trajectories.
pub fn generate<R: Real>(
    model: &GenSdrModel<R>,
    x: &[R],
    n_samples: usize,
    grid: &OdeGrid<R>,
    rng: &mut Stream,
) -> Result<Matrix<R>> {
    if x.len() != model.d_x {
        return Err(Error::shape("generate covariate", model.d_x, x.len()));
    }
    let last = *grid.times.last().expect("nonempty grid");
    if (last - (R::one() - model.tau)).abs() > R::of(1e-12) {
        return Err(Error::Config(format!(
            "grid endpoint {last} does not match model early stop 1 - tau"
        )));
    }
    let r_single = model.represent(&Matrix::from_rows(&[x.to_vec()])?)?;
    let mut r = Matrix::zeros(n_samples, model.d);
    for i in 0..n_samples {
        r.row_mut(i).copy_from_slice(r_single.row(0));
    }
    let mut state = Matrix::zeros(n_samples, model.d_y);
    for v in state.data_mut() {
        *v = rng.normal();
    }
    for (step, w) in grid.times.windows(2).enumerate() {
        let v = model.velocity(&r, &state, w[0])?;
        let dt = w[1] - w[0];
        for (s, vi) in state.data_mut().iter_mut().zip(v.data()) {
            *s += dt * *vi;
        }
        if !state.is_finite() {
            return Err(Error::OdeBlowup { step });
        }
    }
    Ok(state)
}
