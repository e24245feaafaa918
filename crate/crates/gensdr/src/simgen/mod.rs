//! Synthetic data mechanisms for the benchmark settings A through F, plus the
//! covariate samplers they share. Everything here is a pure function of the
//! seeded stream, so datasets regenerate bit for bit.

pub mod dists;
pub mod spd;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::real::Real;
use crate::rng::Stream;

use dists::{sample_one, DistKind};
use spd::{spd_exp, spd_log, sym_matrix_normal2, SpdMatrix2, Sym2};

/// Covariate distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum XDist {
    /// `U([0, 1]^{d_x})`.
    Uniform,
    /// `N(mean * 1, I)`.
    IsoGauss { mean: f64 },
    /// `N(mean * 1, H H^T)` with `H = I - (1 + d_x)^{-1} 1 1^T`.
    AnisoGauss { mean: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SettingTag {
    A,
    B,
    C,
    D,
    E,
    F,
}

/// One benchmark configuration. Only the parameters relevant to the tag are
/// meaningful: `gamma` for B, `d_y` for C, `x_dist` for A and E.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSetting {
    pub tag: SettingTag,
    pub x_dist: XDist,
    pub gamma: f64,
    pub d_y: usize,
    pub n: usize,
    pub d_x: usize,
}

impl SimSetting {
    pub fn a(x_dist: XDist, n: usize, d_x: usize) -> Self {
        SimSetting { tag: SettingTag::A, x_dist, gamma: 0.0, d_y: 2, n, d_x }
    }

    pub fn b(gamma: f64, n: usize, d_x: usize) -> Self {
        SimSetting { tag: SettingTag::B, x_dist: XDist::Uniform, gamma, d_y: 2, n, d_x }
    }

    pub fn c(d_y: usize, n: usize, d_x: usize) -> Self {
        SimSetting { tag: SettingTag::C, x_dist: XDist::Uniform, gamma: 0.0, d_y, n, d_x }
    }

    pub fn d(n: usize, d_x: usize) -> Self {
        SimSetting { tag: SettingTag::D, x_dist: XDist::Uniform, gamma: 0.0, d_y: 2, n, d_x }
    }

    pub fn e(x_dist: XDist, n: usize, d_x: usize) -> Self {
        SimSetting { tag: SettingTag::E, x_dist, gamma: 0.0, d_y: 3, n, d_x }
    }

    pub fn f(n: usize, d_x: usize) -> Self {
        SimSetting { tag: SettingTag::F, x_dist: XDist::Uniform, gamma: 0.0, d_y: 3, n, d_x }
    }

    /// Dimension of the true sufficient representation.
    pub fn true_dim(&self) -> usize {
        match self.tag {
            SettingTag::A | SettingTag::E | SettingTag::F => 1,
            SettingTag::B | SettingTag::D => 2,
            SettingTag::C => 3,
        }
    }

    pub fn is_spd(&self) -> bool {
        matches!(self.tag, SettingTag::E | SettingTag::F)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d_x == 0 {
            return Err(Error::Config(format!("n={} d_x={} must be positive", self.n, self.d_x)));
        }
        let min_dx = match self.tag {
            SettingTag::A | SettingTag::E | SettingTag::F => 2,
            SettingTag::B | SettingTag::D => 4,
            SettingTag::C => 6,
        };
        if self.d_x < min_dx {
            return Err(Error::Config(format!(
                "setting {:?} needs d_x >= {min_dx}, got {}",
                self.tag, self.d_x
            )));
        }
        match self.tag {
            SettingTag::B if self.gamma < 0.0 => {
                Err(Error::Config(format!("gamma {} must be >= 0", self.gamma)))
            }
            SettingTag::C if self.d_y < 2 => {
                Err(Error::Config(format!("setting C needs d_y >= 2, got {}", self.d_y)))
            }
            _ => Ok(()),
        }
    }
}

/// Responses: either a dense matrix (one row per observation) or a list of
/// SPD 2x2 matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum ResponseSet<R> {
    Euclidean(Matrix<R>),
    Spd(Vec<SpdMatrix2<R>>),
}

impl<R: Real> ResponseSet<R> {
    pub fn len(&self) -> usize {
        match self {
            ResponseSet::Euclidean(m) => m.rows(),
            ResponseSet::Spd(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_euclidean(&self) -> Result<&Matrix<R>> {
        match self {
            ResponseSet::Euclidean(m) => Ok(m),
            ResponseSet::Spd(_) => Err(Error::Config("expected Euclidean responses".into())),
        }
    }

    pub fn as_spd(&self) -> Result<&[SpdMatrix2<R>]> {
        match self {
            ResponseSet::Spd(v) => Ok(v),
            ResponseSet::Euclidean(_) => Err(Error::Config("expected SPD responses".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<R> {
    pub x: Matrix<R>,
    pub y: ResponseSet<R>,
    /// Ground-truth sufficient representation, for evaluation only.
    pub r_true: Matrix<R>,
}

/// In-place `H xi` with `H = I - (1 + d)^{-1} 1 1^T`.
fn apply_h<R: Real>(xi: &mut [R]) {
    let d = xi.len();
    let s: R = xi.iter().copied().sum();
    let shift = s / R::of((1 + d) as f64);
    for v in xi {
        *v -= shift;
    }
}

pub fn sample_x<R: Real>(dist: XDist, n: usize, d_x: usize, rng: &mut Stream) -> Result<Matrix<R>> {
    if d_x == 0 {
        return Err(Error::Config("d_x must be positive".into()));
    }
    let mut x = Matrix::zeros(n, d_x);
    match dist {
        XDist::Uniform => {
            for v in x.data_mut() {
                *v = rng.uniform();
            }
        }
        XDist::IsoGauss { mean } => {
            for v in x.data_mut() {
                *v = R::of(mean) + rng.normal();
            }
        }
        XDist::AnisoGauss { mean } => {
            for i in 0..n {
                let row = x.row_mut(i);
                for v in row.iter_mut() {
                    *v = rng.normal();
                }
                apply_h(row);
                for v in row.iter_mut() {
                    *v += R::of(mean);
                }
            }
        }
    }
    Ok(x)
}

// Representation functions of the individual mechanisms; x indexing follows
// the 1-based subscripts of the display formulas.

fn h0_a<R: Real>(x: &[R]) -> R {
    let b = R::one() + x[1].abs();
    x[0].exp() / (b * b)
}

fn h0_b<R: Real>(x: &[R]) -> Result<(R, R)> {
    let first = x[0] * x[0] * (R::of(2.0) * x[3] * x[3]).exp();
    let u = R::one() + R::of(3.0) * x[1] - x[2];
    if u < R::zero() {
        // Impossible for x in [0,1]^d; guards nonstandard covariates.
        return Err(Error::Config(format!("setting B base {u} negative")));
    }
    let ind = if x[0].sqrt() > R::of(0.8) { R::one() } else { R::zero() };
    Ok((first, u.powf(R::of(4.0 / 3.0)) * ind))
}

fn r_true_c<R: Real>(x: &[R]) -> (R, R, R) {
    let pi = R::of(std::f64::consts::PI);
    let s: R = x[..6].iter().copied().sum::<R>() / R::of(6.0);
    (
        R::of(4.0) * (pi * x[2]).cos(),
        R::of(5.0) * s.powi(3),
        (R::one() + R::of(3.0) * x[1]).ln(),
    )
}

fn indicators_d<R: Real>(x: &[R]) -> (R, R) {
    let pi = R::of(std::f64::consts::PI);
    let h3 = (R::of(2.0) * x[0] * x[1] - R::one()).max((pi * (x[2] + x[3])).sin());
    let h4 = x[1].min(x[2]);
    let h0 = if h3 > R::zero() { R::one() } else { R::zero() };
    let h1 = if h3 > h4 { R::one() } else { R::zero() };
    (h0, h1)
}

fn h0_e<R: Real>(x: &[R]) -> R {
    let e = (x[0] + x[1]).exp();
    (e - R::one()) / (e + R::one())
}

fn h0_f<R: Real>(x: &[R]) -> R {
    x[0] * x[1]
}

/// SPD response `exp(scale * Z + log D)`.
fn spd_response<R: Real>(log_d: Sym2<R>, scale: R, rng: &mut Stream) -> SpdMatrix2<R> {
    let z = sym_matrix_normal2::<R>(rng);
    spd_exp(&z.scale(scale).add(log_d))
}

/// Generate one dataset under the tagged mechanism.
///
/// Distribution conventions (logged in CLI metadata): the Gamma noise in
/// setting A is rate-parameterized, `Ga(3, 5)` meaning shape 3 and rate 5
/// (mean 0.6); Laplace(1, 2) is location 1, scale 2; N(-1, 1) is mean -1,
/// variance 1.
pub fn generate<R: Real>(setting: &SimSetting, rng: &mut Stream) -> Result<Dataset<R>> {
    setting.validate()?;
    let (n, d) = (setting.n, setting.true_dim());
    let x = sample_x::<R>(setting.x_dist, n, setting.d_x, rng)?;
    let mut r_true = Matrix::zeros(n, d);
    let y = match setting.tag {
        SettingTag::A => {
            let mut y = Matrix::zeros(n, 2);
            for i in 0..n {
                let h0 = h0_a(x.row(i));
                let w1: R = sample_one(DistKind::Gamma { shape: 3.0, scale: 0.2 }, rng);
                let w2: R = sample_one(DistKind::StudentT { df: 3.0 }, rng);
                let w3: R = sample_one(DistKind::StudentT { df: 3.0 }, rng);
                let w4: R = sample_one(DistKind::Bernoulli { p: 0.5 }, rng);
                let second = w2 * w4 + (w3 + R::of(10.0)) * (R::one() - w4) - w1.exp();
                y[(i, 0)] = h0 * w1;
                y[(i, 1)] = h0 * second;
                r_true[(i, 0)] = h0;
            }
            ResponseSet::Euclidean(y)
        }
        SettingTag::B => {
            let g = R::of(setting.gamma);
            let mut y = Matrix::zeros(n, 2);
            for i in 0..n {
                let (a, b) = h0_b(x.row(i))?;
                let w1: R = sample_one(DistKind::ChiSquared { k: 3.0 }, rng);
                let w2: R = sample_one(DistKind::ChiSquared { k: 5.0 }, rng);
                y[(i, 0)] = a + g * w1;
                y[(i, 1)] = b + g * w2;
                r_true[(i, 0)] = a;
                r_true[(i, 1)] = b;
            }
            ResponseSet::Euclidean(y)
        }
        SettingTag::C => {
            let d_y = setting.d_y;
            let mut y = Matrix::zeros(n, d_y);
            for i in 0..n {
                let (c0, c1, c2) = r_true_c(x.row(i));
                for j in 0..d_y {
                    let h0 = if j == 0 { c0 } else { R::one() };
                    let h1 = match j {
                        0 => c1,
                        1 => c2,
                        _ => R::one(),
                    };
                    let w: R = sample_one(DistKind::Gamma { shape: 3.0, scale: 1.0 }, rng);
                    y[(i, j)] = h0 + h1 * w;
                }
                r_true[(i, 0)] = c0;
                r_true[(i, 1)] = c1;
                r_true[(i, 2)] = c2;
            }
            ResponseSet::Euclidean(y)
        }
        SettingTag::D => {
            let mut y = Matrix::zeros(n, 2);
            for i in 0..n {
                let (h0, h1) = indicators_d(x.row(i));
                let w1: R = sample_one(DistKind::Laplace { loc: 1.0, scale: 2.0 }, rng);
                let w2: R = sample_one(DistKind::Normal { mu: -1.0, sigma2: 1.0 }, rng);
                y[(i, 0)] = w1 * h0 + w2 * (R::one() - h0);
                y[(i, 1)] = w1 * h1 + w2 * (R::one() - h1);
                r_true[(i, 0)] = h0;
                r_true[(i, 1)] = h1;
            }
            ResponseSet::Euclidean(y)
        }
        SettingTag::E => {
            let mut ys = Vec::with_capacity(n);
            for i in 0..n {
                let h0 = h0_e(x.row(i));
                // D(X) = [[1, h0], [h0, 1]] is PD since |tanh| < 1.
                let log_d = spd_log(&SpdMatrix2::new(R::one(), h0, R::one())?)?;
                ys.push(spd_response(log_d, R::of(0.1), rng));
                r_true[(i, 0)] = h0;
            }
            ResponseSet::Spd(ys)
        }
        SettingTag::F => {
            let log_d = spd_log(&SpdMatrix2::new(R::one(), R::of(-0.5), R::one())?)?;
            let mut ys = Vec::with_capacity(n);
            for i in 0..n {
                let h0 = h0_f(x.row(i));
                ys.push(spd_response(log_d, h0, rng));
                r_true[(i, 0)] = h0;
            }
            ResponseSet::Spd(ys)
        }
    };
    Ok(Dataset { x, y, r_true })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_transform_matches_hand_product() {
        // d_x = 2: H = I - (1/3) 1 1^T, so H e1 = (2/3, -1/3) and
        // HH^T = [[5/9, -4/9], [-4/9, 5/9]].
        let mut e1 = [1.0f64, 0.0];
        apply_h(&mut e1);
        assert!((e1[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((e1[1] + 1.0 / 3.0).abs() < 1e-15);
        let mut e2 = [0.0f64, 1.0];
        apply_h(&mut e2);
        let cov00 = e1[0] * e1[0] + e2[0] * e2[0];
        let cov01 = e1[0] * e1[1] + e2[0] * e2[1];
        assert!((cov00 - 5.0 / 9.0).abs() < 1e-15);
        assert!((cov01 + 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_x_in_unit_cube() {
        let x = sample_x::<f64>(XDist::Uniform, 500, 7, &mut Stream::new(1)).unwrap();
        assert!(x.data().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn iso_gauss_column_means() {
        let x = sample_x::<f64>(XDist::IsoGauss { mean: 1.0 }, 100_000, 2, &mut Stream::new(2))
            .unwrap();
        for j in 0..2 {
            let m: f64 = (0..x.rows()).map(|i| x[(i, j)]).sum::<f64>() / x.rows() as f64;
            assert!((m - 1.0).abs() < 0.02, "{m}");
        }
    }

    #[test]
    fn aniso_gauss_sample_covariance() {
        let n = 200_000;
        let x =
            sample_x::<f64>(XDist::AnisoGauss { mean: 1.0 }, n, 2, &mut Stream::new(3)).unwrap();
        let mut c = [[0.0f64; 2]; 2];
        let means: Vec<f64> = (0..2)
            .map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64)
            .collect();
        for i in 0..n {
            for a in 0..2 {
                for b in 0..2 {
                    c[a][b] += (x[(i, a)] - means[a]) * (x[(i, b)] - means[b]);
                }
            }
        }
        assert!((c[0][0] / n as f64 - 5.0 / 9.0).abs() < 0.01);
        assert!((c[0][1] / n as f64 + 4.0 / 9.0).abs() < 0.01);
    }

    #[test]
    fn setting_a_representation_at_origin() {
        assert_eq!(h0_a(&[0.0f64, 0.0]), 1.0);
        let d = generate::<f64>(&SimSetting::a(XDist::Uniform, 50, 5), &mut Stream::new(4)).unwrap();
        assert_eq!(d.r_true.cols(), 1);
        assert_eq!(d.y.as_euclidean().unwrap().cols(), 2);
        for i in 0..50 {
            assert!((d.r_true[(i, 0)] - h0_a(d.x.row(i))).abs() < 1e-15);
        }
    }

    #[test]
    fn setting_b_indicator_and_guard() {
        // x1 = 0.9 > 0.64 switches the indicator on.
        let (a, b) = h0_b(&[0.9f64, 0.5, 0.2, 0.1]).unwrap();
        assert!((a - 0.81 * (2.0 * 0.01f64).exp()).abs() < 1e-12);
        assert!((b - 2.3f64.powf(4.0 / 3.0)).abs() < 1e-12);
        let (_, b) = h0_b(&[0.5f64, 0.5, 0.2, 0.1]).unwrap();
        assert_eq!(b, 0.0);
        assert!(h0_b(&[0.5f64, -1.0, 0.9, 0.1]).is_err());
    }

    #[test]
    fn setting_d_two_point_responses() {
        let d = generate::<f64>(&SimSetting::d(200, 4), &mut Stream::new(5)).unwrap();
        let y = d.y.as_euclidean().unwrap();
        for i in 0..200 {
            let (h0, h1) = (d.r_true[(i, 0)], d.r_true[(i, 1)]);
            assert!(h0 == 0.0 || h0 == 1.0);
            assert!(h1 == 0.0 || h1 == 1.0);
            // Both coordinates draw from the same (W1, W2) pair, so they
            // coincide exactly when the indicators agree.
            assert_eq!(y[(i, 0)] == y[(i, 1)], h0 == h1);
        }
    }

    #[test]
    fn spd_settings_produce_pd_responses() {
        for setting in [
            SimSetting::e(XDist::Uniform, 100, 3),
            SimSetting::f(100, 3),
        ] {
            let d = generate::<f64>(&setting, &mut Stream::new(6)).unwrap();
            assert!(d.y.as_spd().unwrap().iter().all(SpdMatrix2::is_pd));
        }
    }

    #[test]
    fn setting_f_zero_amplitude_recovers_d() {
        // h0 = x1 x2 = 0 makes log Y = log D exactly.
        let log_d = spd_log(&SpdMatrix2::new(1.0f64, -0.5, 1.0).unwrap()).unwrap();
        let y = spd_response(log_d, 0.0, &mut Stream::new(7));
        assert!((y.a - 1.0).abs() < 1e-12);
        assert!((y.b + 0.5).abs() < 1e-12);
        assert!((y.c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        for setting in [
            SimSetting::a(XDist::AnisoGauss { mean: 1.0 }, 40, 6),
            SimSetting::b(0.3, 40, 6),
            SimSetting::c(5, 40, 6),
            SimSetting::d(40, 6),
            SimSetting::e(XDist::IsoGauss { mean: 0.0 }, 40, 6),
            SimSetting::f(40, 6),
        ] {
            let a = generate::<f64>(&setting, &mut Stream::new(8)).unwrap();
            let b = generate::<f64>(&setting, &mut Stream::new(8)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn invalid_settings_rejected() {
        assert!(SimSetting::c(1, 100, 10).validate().is_err());
        assert!(SimSetting::b(-0.1, 100, 10).validate().is_err());
        assert!(SimSetting::c(5, 100, 4).validate().is_err());
        assert!(generate::<f64>(&SimSetting::d(0, 10), &mut Stream::new(0)).is_err());
    }
}
