//! Small dense linear-algebra and scalar root-finding helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense real vector used for every point and gradient in the crate.
pub type Vector = DVector<f64>;
/// Dense real matrix (Hessians, problem data).
pub type Matrix = DMatrix<f64>;

/// Returns an error unless every coordinate is finite and the vector is non-empty.
pub fn check_finite(v: &Vector, what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::contract(format!("{what}: empty vector")));
    }
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what}: non-finite entry")))
    }
}

/// Eigendecomposition of a symmetric matrix, `a = basis * diag(values) * basis^T`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vector,
    pub basis: Matrix,
}

impl SymEigen {
    pub fn new(a: &Matrix) -> Self {
        // symmetrize first: oracles are only symmetric to rounding
        let sym = (a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        SymEigen {
            values: eig.eigenvalues,
            basis: eig.eigenvectors,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    /// Largest eigenvalue magnitude, i.e. the spectral norm.
    pub fn spectral_norm(&self) -> f64 {
        self.values.amax()
    }

    /// Coordinates of `v` in the eigenbasis.
    pub fn to_eigen(&self, v: &Vector) -> Vector {
        self.basis.tr_mul(v)
    }

    pub fn from_eigen(&self, w: &Vector) -> Vector {
        &self.basis * w
    }
}

/// Finds the root of a continuous, nonincreasing scalar function on `[lo, hi]`.
///
/// Requires `f(lo) >= 0 >= f(hi)`. Newton steps on `df` are taken when they stay
/// inside the current bracket, bisection otherwise.
pub fn decreasing_root<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (flo, _) = f(lo);
    if flo <= 0.0 {
        return Ok(lo);
    }
    let (fhi, _) = f(hi);
    if fhi >= 0.0 {
        if fhi == 0.0 {
            return Ok(hi);
        }
        return Err(Error::Numerical(format!(
            "root not bracketed on [{lo:.3e}, {hi:.3e}]"
        )));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= tol * (1.0 + hi.abs()) {
            return Ok(0.5 * (lo + hi));
        }
        let newton = if dfx < 0.0 { x - fx / dfx } else { f64::NAN };
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Numerical(format!(
        "scalar root finder exhausted {max_iter} iterations on [{lo:.3e}, {hi:.3e}]"
    )))
}

/// Expands `hi` geometrically until `f(hi) <= 0`, for a nonincreasing `f`.
pub fn bracket_upper<F>(mut f: F, start: f64, max_doublings: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut hi = if start > 0.0 { start } else { 1.0 };
    for _ in 0..max_doublings {
        let v = f(hi);
        if v.is_nan() {
            return Err(Error::Numerical("NaN while bracketing root".into()));
        }
        if v <= 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::Numerical(format!(
        "root not bracketed after {max_doublings} expansions"
    )))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(a: &Matrix) -> f64 {
    SymEigen::new(a).min()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(a: &Matrix) -> f64 {
    SymEigen::new(a).max()
}

/// Least-squares line fit; returns `(slope, intercept, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_root_cubic() {
        // r^3 + r - 10 = 0 has root 2
        let r = decreasing_root(|r| (10.0 - r * r * r - r, -3.0 * r * r - 1.0), 0.0, 5.0, 1e-14, 200)
            .unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unbracketed_root_is_an_error() {
        let r = decreasing_root(|r| (1.0 + r, 1.0), 0.0, 1.0, 1e-12, 10);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn eigen_roundtrip() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = SymEigen::new(&a);
        assert!((e.min() - 1.0).abs() < 1e-12);
        assert!((e.max() - 3.0).abs() < 1e-12);
        let v = Vector::from_vec(vec![0.3, -1.2]);
        let back = e.from_eigen(&e.to_eigen(&v));
        assert!((back - v).norm() < 1e-14);
    }

    #[test]
    fn line_fit_exact() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [1.0, 3.0, 5.0];
        let (s, b, r2) = linear_fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }
}
