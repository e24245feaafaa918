//! 2x2 symmetric positive definite matrices and their log/exp maps via
//! closed-form eigendecomposition.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::Stream;

/// Symmetric 2x2 matrix `[[a, b], [b, c]]` (not necessarily PD).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2<R> {
    pub a: R,
    pub b: R,
    pub c: R,
}

/// Symmetric positive definite 2x2 matrix: `a > 0` and `a c - b^2 > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdMatrix2<R> {
    pub a: R,
    pub b: R,
    pub c: R,
}

impl<R: Real> Sym2<R> {
    pub fn zero() -> Self {
        Sym2 {
            a: R::zero(),
            b: R::zero(),
            c: R::zero(),
        }
    }

    pub fn scale(self, s: R) -> Self {
        Sym2 {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
        }
    }

    pub fn add(self, o: Sym2<R>) -> Self {
        Sym2 {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
        }
    }

    /// Eigendecomposition of a symmetric 2x2: returns `(l1, l2, theta)` where
    /// the eigenvector for `l1` is `(cos theta, sin theta)`.
    fn eigen(self) -> (R, R, R) {
        let half = R::of(0.5);
        let tr = self.a + self.c;
        let diff = self.a - self.c;
        let disc = (diff * diff + R::of(4.0) * self.b * self.b).sqrt();
        let l1 = half * (tr + disc);
        let l2 = half * (tr - disc);
        let theta = if self.b == R::zero() && diff >= R::zero() {
            R::zero()
        } else if self.b == R::zero() {
            R::of(std::f64::consts::FRAC_PI_2)
        } else {
            // atan2(l1 - a, b) gives the angle of the first eigenvector.
            (l1 - self.a).atan2(self.b)
        };
        (l1, l2, theta)
    }

    /// Apply a scalar function to the eigenvalues.
    fn map_eigen(self, f: impl Fn(R) -> R) -> Sym2<R> {
        let (l1, l2, theta) = self.eigen();
        let (f1, f2) = (f(l1), f(l2));
        let (ct, st) = (theta.cos(), theta.sin());
        Sym2 {
            a: f1 * ct * ct + f2 * st * st,
            b: (f1 - f2) * ct * st,
            c: f1 * st * st + f2 * ct * ct,
        }
    }
}

impl<R: Real> SpdMatrix2<R> {
    pub fn new(a: R, b: R, c: R) -> Result<Self> {
        if !(a > R::zero() && a * c - b * b > R::zero()) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(SpdMatrix2 { a, b, c })
    }

    pub fn identity() -> Self {
        SpdMatrix2 {
            a: R::one(),
            b: R::zero(),
            c: R::one(),
        }
    }

    pub fn is_pd(&self) -> bool {
        self.a > R::zero() && self.a * self.c - self.b * self.b > R::zero()
    }

    /// Frobenius distance to another SPD matrix.
    pub fn frobenius_distance(&self, o: &SpdMatrix2<R>) -> R {
        let (da, db, dc) = (self.a - o.a, self.b - o.b, self.c - o.c);
        (da * da + R::of(2.0) * db * db + dc * dc).sqrt()
    }

    pub fn as_sym(&self) -> Sym2<R> {
        Sym2 {
            a: self.a,
            b: self.b,
            c: self.c,
        }
    }
}

/// Matrix logarithm of an SPD 2x2.
pub fn spd_log<R: Real>(m: &SpdMatrix2<R>) -> Result<Sym2<R>> {
    if !m.is_pd() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(m.as_sym().map_eigen(|l| l.ln()))
}

/// Matrix exponential of a symmetric 2x2; the result is always SPD.
pub fn spd_exp<R: Real>(s: &Sym2<R>) -> SpdMatrix2<R> {
    let e = s.map_eigen(|l| l.exp());
    SpdMatrix2 {
        a: e.a,
        b: e.b,
        c: e.c,
    }
}

/// Draw from the standard symmetric matrix variate normal: independent
/// `N(0, 1)` diagonal entries and `N(0, 1/2)` off-diagonal entries.
pub fn sym_matrix_normal2<R: Real>(rng: &mut Stream) -> Sym2<R> {
    let a = rng.normal();
    let b: R = rng.normal::<R>() * R::of(0.5f64.sqrt());
    let c = rng.normal();
    Sym2 { a, b, c }
}

/// General r x r symmetric matrix variate normal draw, row-major entries.
pub fn sym_matrix_normal<R: Real>(r: usize, rng: &mut Stream) -> Vec<R> {
    let mut m = vec![R::zero(); r * r];
    let off = R::of(0.5f64.sqrt());
    for i in 0..r {
        for j in i..r {
            let v = if i == j {
                rng.normal()
            } else {
                rng.normal::<R>() * off
            };
            m[i * r + j] = v;
            m[j * r + i] = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_identity_is_zero() {
        let l = spd_log(&SpdMatrix2::<f64>::identity()).unwrap();
        assert_eq!((l.a, l.b, l.c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn exp_zero_is_identity() {
        let e = spd_exp(&Sym2::<f64>::zero());
        assert_eq!((e.a, e.b, e.c), (1.0, 0.0, 1.0));
    }

    #[test]
    fn log_of_known_matrix() {
        // D = [[1, -0.5], [-0.5, 1]]: eigenvalues 0.5 and 1.5 with
        // eigenvectors (1, 1)/sqrt(2) and (1, -1)/sqrt(2).
        let d = SpdMatrix2::new(1.0, -0.5, 1.0).unwrap();
        let l = spd_log(&d).unwrap();
        let expected_a = (0.5f64.ln() + 1.5f64.ln()) / 2.0;
        let expected_b = (1.5f64.ln() - 0.5f64.ln()) / 2.0;
        // log D = V diag(ln l) V^T with the eigvecs above: diagonal entries
        // average the logs, off-diagonal carries half the difference with the
        // sign fixed by the (1, -1) eigenvector of the larger eigenvalue.
        assert!((l.a - expected_a).abs() < 1e-12, "{}", l.a);
        assert!((l.c - expected_a).abs() < 1e-12);
        assert!((l.b + expected_b).abs() < 1e-12, "{}", l.b);
    }

    #[test]
    fn exp_log_roundtrip() {
        let mut rng = Stream::new(10);
        for _ in 0..200 {
            let s = sym_matrix_normal2::<f64>(&mut rng);
            let m = spd_exp(&s);
            assert!(m.is_pd());
            let back = spd_log(&m).unwrap();
            assert!((back.a - s.a).abs() < 1e-12);
            assert!((back.b - s.b).abs() < 1e-12);
            assert!((back.c - s.c).abs() < 1e-12);
        }
    }

    #[test]
    fn log_rejects_non_pd() {
        assert!(spd_log(&SpdMatrix2 { a: 1.0, b: 2.0, c: 1.0 }).is_err());
    }

    #[test]
    fn sym_normal_moments() {
        let mut rng = Stream::new(11);
        let n = 100_000;
        let (mut sd, mut so) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let s = sym_matrix_normal2::<f64>(&mut rng);
            sd += s.a * s.a;
            so += s.b * s.b;
        }
        assert!((sd / n as f64 - 1.0).abs() < 0.02);
        assert!((so / n as f64 - 0.5).abs() < 0.02);
        let m = sym_matrix_normal::<f64>(3, &mut rng);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i * 3 + j], m[j * 3 + i]);
            }
        }
    }
}
