//! PCA projection of learned embeddings via power iteration with deflation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor};

const TOLERANCE: f64 = 1e-8;
const MAX_ITERS: usize = 1000;

/// Project n×d data onto its top-k principal components.
///
/// Returns the n×k coordinates and the k leading eigenvalues of the
/// population covariance. Sign convention: each component's
/// largest-magnitude loading is positive.
pub fn pca_project(data: &Tensor, components: usize) -> Result<(Tensor, Vec<f64>)> {
    if data.shape().len() != 2 {
        return Err(Error::InvalidDimension {
            op: "pca_project",
            detail: format!("expected n×d matrix, got {:?}", data.shape()),
        });
    }
    let (n, d) = (data.shape()[0], data.shape()[1]);
    if n < 2 {
        return Err(Error::InvalidDimension {
            op: "pca_project",
            detail: format!("need at least 2 rows, got {n}"),
        });
    }
    if components == 0 || components > d {
        return Err(Error::InvalidDimension {
            op: "pca_project",
            detail: format!("components {components} outside 1..={d}"),
        });
    }

    // mean-center
    let mut centered = vec![0.0; n * d];
    for j in 0..d {
        let mut mean = 0.0;
        for i in 0..n {
            mean += data.at(i, j);
        }
        mean /= n as f64;
        for i in 0..n {
            centered[i * d + j] = data.at(i, j) - mean;
        }
    }

    // population covariance C = XᵀX / n
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        let row = &centered[i * d..(i + 1) * d];
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += row[a] * row[b];
            }
        }
    }
    for v in cov.iter_mut() {
        *v /= n as f64;
    }
    let total_variance: f64 = (0..d).map(|j| cov[j * d + j]).sum();
    if total_variance <= 0.0 {
        return Err(Error::data(
            "rank-0 data: all rows identical, PCA undefined",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b9);
    let mut eigvecs: Vec<Vec<f64>> = Vec::with_capacity(components);
    let mut eigvals = Vec::with_capacity(components);
    for _ in 0..components {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        normalize(&mut v);
        let mut converged = false;
        for _ in 0..MAX_ITERS {
            let mut w = matvec(&cov, &v, d);
            let norm = normalize(&mut w);
            if norm == 0.0 {
                // data has fewer directions than requested components
                break;
            }
            let drift = v
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let flip = v
                .iter()
                .zip(&w)
                .map(|(a, b)| (a + b).abs())
                .fold(0.0, f64::max);
            v = w;
            if drift < TOLERANCE || flip < TOLERANCE {
                converged = true;
                break;
            }
        }
        let _ = converged;

        // largest-magnitude loading positive
        let mut max_idx = 0;
        for j in 1..d {
            if v[j].abs() > v[max_idx].abs() {
                max_idx = j;
            }
        }
        if v[max_idx] < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        let cv = matvec(&cov, &v, d);
        let lambda: f64 = v.iter().zip(&cv).map(|(a, b)| a * b).sum();
        // deflate
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] -= lambda * v[a] * v[b];
            }
        }
        eigvals.push(lambda.max(0.0));
        eigvecs.push(v);
    }

    let mut coords = vec![0.0; n * components];
    for i in 0..n {
        let row = &centered[i * d..(i + 1) * d];
        for (k, v) in eigvecs.iter().enumerate() {
            coords[i * components + k] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
    Ok((
        Tensor::from_f64(&[n, components], &coords, DType::F64)?,
        eigvals,
    ))
}

fn matvec(m: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}
