//! Planar vectors and the handful of helpers every module needs.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

#[inline]
pub fn vec2(x1: f64, x2: f64) -> Vec2 {
    Vector2::new(x1, x2)
}

/// Unit vector `x/|x|`; `n(0)` is left undefined and reported as an error.
pub fn unit(x: &Vec2) -> Result<Vec2> {
    let norm = x.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::invalid(format!(
            "cannot normalize ({}, {})",
            x[0], x[1]
        )));
    }
    Ok(x / norm)
}

pub fn ensure_finite(x: &Vec2) -> Result<()> {
    if x.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "non-finite point ({}, {})",
            x[0], x[1]
        )))
    }
}

/// Symmetric square root of a symmetric positive definite matrix.
///
/// Fails when the smallest eigenvalue is below `eig_tol`.
pub fn spd_sqrt(m: &Mat2, eig_tol: f64) -> Result<Mat2> {
    if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-12 * (1.0 + m.abs().max()) {
        return Err(Error::invalid("shape matrix is not symmetric"));
    }
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > eig_tol)) {
        return Err(Error::invalid(format!(
            "shape matrix is not positive definite (eigenvalues {}, {})",
            eig.eigenvalues[0], eig.eigenvalues[1]
        )));
    }
    let sqrt_diag = Mat2::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let s = eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
    // Symmetrize away the rounding asymmetry.
    Ok((s + s.transpose()) * 0.5)
}

/// Parses `"a,b"` into a point.
pub fn parse_point(s: &str) -> Result<Vec2> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::invalid(format!("expected `x1,x2`, got `{s}`")));
    }
    let p = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| Error::invalid(format!("not a number: `{t}`")))
    };
    let x = vec2(p(parts[0])?, p(parts[1])?);
    ensure_finite(&x)?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let m = Mat2::new(2.0, 0.3, 0.3, 1.0);
        let s = spd_sqrt(&m, 1e-12).unwrap();
        assert!((s * s - m).abs().max() < 1e-14);
        assert_eq!(s[(0, 1)], s[(1, 0)]);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(spd_sqrt(&Mat2::new(1.0, 2.0, 2.0, 1.0), 1e-12).is_err());
    }

    #[test]
    fn unit_of_zero_is_an_error() {
        assert!(unit(&Vec2::zeros()).is_err());
        assert_eq!(unit(&vec2(3.0, 4.0)).unwrap(), vec2(0.6, 0.8));
    }
}
