use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::FeatureMatrix;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-8;

/// Principal square root of a symmetric positive semi-definite matrix via
/// its eigendecomposition; slightly negative eigenvalues are clamped to 0.
pub fn sqrtm_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::shape("sqrtm_psd", format!("{}x{} matrix", a.nrows(), a.ncols())));
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::InvalidArgument("sqrtm_psd input is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(a.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

fn moments(f: &FeatureMatrix) -> (DVector<f64>, DMatrix<f64>) {
    let x = DMatrix::from_row_slice(f.rows, f.dim, &f.data);
    let mean = x.row_mean().transpose();
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (f.rows as f64 - 1.0);
    (mean, cov)
}

/// `‖μa − μb‖² + Tr(Σa + Σb − 2·(Σa^½ Σb Σa^½)^½)` with unbiased covariances.
pub fn frechet_distance(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::shape("frechet_distance", format!("dims {} vs {}", a.dim, b.dim)));
    }
    if a.rows <= a.dim || b.rows <= b.dim {
        return Err(Error::InvalidArgument(format!(
            "Fréchet distance needs more rows than feature dims ({}): got {} and {}",
            a.dim, a.rows, b.rows
        )));
    }
    let (mu_a, cov_a) = moments(a);
    let (mu_b, cov_b) = moments(b);
    // Tr((Σa^½ Σb Σa^½)^½) as the nuclear norm of Σa^½ Σb^½.
    let cross = (sqrtm_psd(&cov_a)? * sqrtm_psd(&cov_b)?).singular_values().sum();
    let d = (mu_a - mu_b).norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}
