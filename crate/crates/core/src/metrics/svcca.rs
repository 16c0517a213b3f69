use nalgebra::DMatrix;

use super::center_columns;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvccaOptions {
    /// Fraction of squared-singular-value mass the kept directions must cover.
    pub variance_keep: f64,
    /// Added to the diagonal of each covariance block before whitening.
    pub ridge: f64,
}

impl Default for SvccaOptions {
    fn default() -> Self {
        SvccaOptions {
            variance_keep: 0.99,
            ridge: 1e-12,
        }
    }
}

/// Centred data projected on its leading singular directions, scaled by the
/// singular values (`U_k Σ_k`).
fn reduce(m: &DMatrix<f64>, keep: f64) -> Result<DMatrix<f64>> {
    let centered = center_columns(m);
    let svd = centered.svd(true, false);
    let u = svd.u.expect("u requested");
    let sigma = svd.singular_values;

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let top = order.first().map_or(0.0, |&i| sigma[i]);
    let tol = top * f64::EPSILON * m.nrows().max(m.ncols()) as f64;
    let order: Vec<usize> = order.into_iter().filter(|&i| sigma[i] > tol).collect();
    if order.is_empty() {
        return Err(Error::Numerical("matrix has rank 0 after centring".into()));
    }

    let total: f64 = order.iter().map(|&i| sigma[i] * sigma[i]).sum();
    let mut acc = 0.0;
    let mut kept = Vec::new();
    for &i in &order {
        kept.push(i);
        acc += sigma[i] * sigma[i];
        if acc >= keep * total {
            break;
        }
    }
    Ok(DMatrix::from_fn(m.nrows(), kept.len(), |r, c| {
        u[(r, kept[c])] * sigma[kept[c]]
    }))
}

/// `(Σ + ridge·I)^(-1/2)` for a symmetric positive semi-definite block.
fn inv_sqrt(cov: DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let dim = cov.nrows();
    let eig = (cov + DMatrix::identity(dim, dim) * ridge).symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::Numerical("covariance block is not positive definite".into()));
    }
    let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * scale * eig.eigenvectors.transpose())
}

/// Canonical correlations between the columns of two centred matrices.
fn canonical_correlations(a: &DMatrix<f64>, b: &DMatrix<f64>, ridge: f64) -> Result<Vec<f64>> {
    let scale = 1.0 / (a.nrows() - 1) as f64;
    let saa = a.transpose() * a * scale;
    let sbb = b.transpose() * b * scale;
    let sab = a.transpose() * b * scale;
    let whitened = inv_sqrt(saa, ridge)? * sab * inv_sqrt(sbb, ridge)?;
    let mut rho: Vec<f64> = whitened.singular_values().iter().map(|s| s.clamp(0.0, 1.0)).collect();
    rho.sort_by(|x, y| y.total_cmp(x));
    rho.truncate(a.ncols().min(b.ncols()));
    Ok(rho)
}

/// SVCCA similarity: mean canonical correlation between the SVD-reduced,
/// centred representations.
pub fn svcca(x: &DMatrix<f64>, y: &DMatrix<f64>, opts: &SvccaOptions) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!(
            "row counts differ: {} vs {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() < 2 {
        return Err(Error::Shape("SVCCA needs at least two rows".into()));
    }
    if !(opts.variance_keep > 0.0 && opts.variance_keep <= 1.0) {
        return Err(Error::Config(format!(
            "variance_keep must be in (0, 1], got {}",
            opts.variance_keep
        )));
    }
    if opts.ridge.is_nan() || opts.ridge < 0.0 {
        return Err(Error::Config(format!("ridge must be >= 0, got {}", opts.ridge)));
    }
    let a = reduce(x, opts.variance_keep)?;
    let b = reduce(y, opts.variance_keep)?;
    let rho = canonical_correlations(&a, &b, opts.ridge)?;
    Ok((rho.iter().sum::<f64>() / rho.len() as f64).clamp(0.0, 1.0))
}
