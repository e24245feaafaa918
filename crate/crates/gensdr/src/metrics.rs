//! Evaluation statistics: distance correlation, one-dimensional and sliced
//! 2-Wasserstein distances, and replication aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::real::Real;
use crate::rng::Stream;

/// Pairwise Euclidean distance matrix of the rows, double-centered in place:
/// `A_ij = a_ij - rowmean_i - colmean_j + grandmean`.
fn centered_distances<R: Real>(m: &Matrix<R>) -> Matrix<R> {
    let n = m.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = R::zero();
            for (a, b) in m.row(i).iter().zip(m.row(j)) {
                let diff = *a - *b;
                s += diff * diff;
            }
            let dist = s.sqrt();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    let nf = R::of(n as f64);
    let row_means: Vec<R> = (0..n).map(|i| d.row(i).iter().copied().sum::<R>() / nf).collect();
    let grand = row_means.iter().copied().sum::<R>() / nf;
    for i in 0..n {
        for j in 0..n {
            d[(i, j)] = d[(i, j)] - row_means[i] - row_means[j] + grand;
        }
    }
    d
}

/// Distance correlation (the original V-statistic form): double-centered
/// distance matrices, `dcor = dCov / sqrt(dVar_A dVar_B)`, in `[0, 1]`.
/// Returns 0 when either argument is degenerate (constant rows).
pub fn distance_correlation<R: Real>(a: &Matrix<R>, b: &Matrix<R>) -> Result<f64> {
    if a.rows() != b.rows() {
        return Err(Error::shape("distance_correlation rows", a.rows(), b.rows()));
    }
    if a.rows() < 2 {
        return Err(Error::Config("need at least 2 observations".into()));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite { what: "distance_correlation input".into() });
    }
    let ca = centered_distances(a);
    let cb = centered_distances(b);
    let n2 = (a.rows() * a.rows()) as f64;
    let mut cov = 0.0f64;
    let mut va = 0.0f64;
    let mut vb = 0.0f64;
    for (x, y) in ca.data().iter().zip(cb.data()) {
        let (x, y) = (x.as_f64(), y.as_f64());
        cov += x * y;
        va += x * x;
        vb += y * y;
    }
    cov /= n2;
    va /= n2;
    vb /= n2;
    if va <= 0.0 || vb <= 0.0 {
        return Ok(0.0);
    }
    Ok((cov.max(0.0) / (va * vb).sqrt()).sqrt().min(1.0))
}

/// Exact 1-D 2-Wasserstein distance between equal-size empirical laws via the
/// sorted coupling.
pub fn w2_1d<R: Real>(a: &[R], b: &[R]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Config("w2_1d on empty sample".into()));
    }
    if a.len() != b.len() {
        return Err(Error::shape("w2_1d lengths", a.len(), b.len()));
    }
    let mut sa: Vec<f64> = a.iter().map(|x| x.as_f64()).collect();
    let mut sb: Vec<f64> = b.iter().map(|x| x.as_f64()).collect();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    let s: f64 = sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / sa.len() as f64;
    Ok(s.sqrt())
}

/// Sliced 2-Wasserstein distance: root mean square of `w2_1d` over random
/// unit projection directions. Deterministic given the stream.
pub fn sliced_w2<R: Real>(
    a: &Matrix<R>,
    b: &Matrix<R>,
    n_proj: usize,
    rng: &mut Stream,
) -> Result<f64> {
    if a.cols() != b.cols() {
        return Err(Error::shape("sliced_w2 cols", a.cols(), b.cols()));
    }
    if a.cols() == 0 {
        return Err(Error::Config("sliced_w2 on zero columns".into()));
    }
    if n_proj == 0 {
        return Err(Error::Config("sliced_w2 needs n_proj >= 1".into()));
    }
    let d = a.cols();
    let mut acc = 0.0f64;
    for _ in 0..n_proj {
        // Normalized Gaussian vector: uniform on the sphere.
        let mut u: Vec<R> = (0..d).map(|_| rng.normal()).collect();
        let norm = u.iter().map(|x| *x * *x).sum::<R>().sqrt();
        if norm == R::zero() {
            continue;
        }
        for v in &mut u {
            *v /= norm;
        }
        let project = |m: &Matrix<R>| -> Vec<R> {
            (0..m.rows())
                .map(|i| m.row(i).iter().zip(&u).map(|(x, w)| *x * *w).sum())
                .collect()
        };
        let w = w2_1d(&project(a), &project(b))?;
        acc += w * w;
    }
    Ok((acc / n_proj as f64).sqrt())
}

/// One replication of a benchmark configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepRecord {
    pub setting: String,
    pub param_key: String,
    pub param_value: String,
    pub rep: usize,
    pub seed: u64,
    pub dcor: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: Vec<RepRecord>,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single record.
    pub std: f64,
}

pub fn aggregate(records: Vec<RepRecord>) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::Config("aggregate on empty record list".into()));
    }
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.dcor).sum::<f64>() / n;
    let std = if records.len() > 1 {
        (records.iter().map(|r| (r.dcor - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(MetricsReport { records, mean, std })
}
