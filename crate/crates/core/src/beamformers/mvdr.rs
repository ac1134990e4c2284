use nalgebra::{DVector, SymmetricEigen};

use super::CovarianceEstimate;
use crate::error::{Error, Result};

/// Covariances whose (estimated) condition number exceeds this are rejected.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

/// Capon weights `w = R^-1 1 / (1^T R^-1 1)`.
///
/// The condition number is estimated from the Cholesky factor as
/// `(max L_ii / min L_ii)^2`, a lower bound on the true value.
pub fn mvdr_weights(cov: &CovarianceEstimate) -> Result<DVector<f64>> {
    let l = cov.r.nrows();
    let chol = cov.r.clone().cholesky().ok_or_else(|| {
        Error::Numerical("covariance is not positive definite; increase diagonal loading".into())
    })?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &d| (lo.min(d.abs()), hi.max(d.abs())));
    let cond = (hi / lo).powi(2);
    if !(cond <= MAX_CONDITION_NUMBER) {
        return Err(Error::Numerical(format!(
            "covariance condition number ~{cond:.3e} exceeds {MAX_CONDITION_NUMBER:.0e}; increase diagonal loading"
        )));
    }
    let a = chol.solve(&DVector::from_element(l, 1.0));
    let denom = a.sum();
    if !(denom.abs() > 0.0) || !denom.is_finite() {
        return Err(Error::Numerical("degenerate MVDR normalization".into()));
    }
    Ok(a / denom)
}

/// Mean over subarrays of `w^T z_sub`.
pub fn mvdr_output(z: &[f64], w: &[f64]) -> f64 {
    let l = w.len();
    let subarrays = z.len() + 1 - l;
    let mut acc = 0.0;
    for s in 0..subarrays {
        acc += z[s..s + l].iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    }
    acc / subarrays as f64
}

/// Projects `w_mv` onto the eigenvectors of `R` whose eigenvalues are at
/// least `fraction * lambda_max`.
pub fn eigenspace_mv(cov: &CovarianceEstimate, w_mv: &DVector<f64>, fraction: f64) -> Result<DVector<f64>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("subspace fraction must lie in (0, 1], got {fraction}")));
    }
    if w_mv.len() != cov.r.nrows() {
        return Err(Error::shape("weight vector does not match covariance size"));
    }
    let eig = SymmetricEigen::new(cov.r.clone());
    let lambda_max = eig.eigenvalues.max();
    let mut out = DVector::zeros(w_mv.len());
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda >= fraction * lambda_max {
            let v = eig.eigenvectors.column(k);
            out += v * v.dot(w_mv);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn cov(r: DMatrix<f64>) -> CovarianceEstimate {
        CovarianceEstimate {
            subarray_len: r.nrows(),
            r,
            loading: 0.0,
            degenerate: false,
        }
    }

    #[test]
    fn identity_gives_uniform_weights() {
        let w = mvdr_weights(&cov(DMatrix::identity(5, 5))).unwrap();
        for &v in w.iter() {
            assert_eq!(v, 0.2);
        }
    }

    #[test]
    fn diagonal_covariance_closed_form() {
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0]));
        let w = mvdr_weights(&cov(r)).unwrap();
        let expect = [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn ill_conditioned_covariance_is_rejected() {
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-14]));
        assert!(matches!(mvdr_weights(&cov(r)), Err(Error::Numerical(_))));
        let singular = DMatrix::from_element(3, 3, 1.0);
        assert!(mvdr_weights(&cov(singular)).is_err());
    }

    #[test]
    fn eigenspace_keeps_dominant_direction() {
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 0.1, 0.1]));
        let c = cov(r);
        let w = mvdr_weights(&c).unwrap();
        let p = eigenspace_mv(&c, &w, 0.5).unwrap();
        assert!((p[0] - w[0]).abs() < 1e-14);
        assert!(p[1].abs() < 1e-14 && p[2].abs() < 1e-14);
        // tiny fraction keeps the full space
        let full = eigenspace_mv(&c, &w, 1e-9).unwrap();
        assert!((&full - &w).amax() < 1e-14);
        assert!(eigenspace_mv(&c, &w, 0.0).is_err());
    }

    fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
            let a = DMatrix::from_vec(n, n, v);
            &a * a.transpose() + DMatrix::identity(n, n) * 0.05
        })
    }

    proptest! {
        #[test]
        fn weights_are_distortionless(r in spd(6)) {
            let w = mvdr_weights(&cov(r)).unwrap();
            prop_assert!((w.sum() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn mvdr_power_never_exceeds_uniform(r in spd(5)) {
            let w = mvdr_weights(&cov(r.clone())).unwrap();
            let u = DVector::from_element(5, 0.2);
            let p_mv = (w.transpose() * &r * &w)[(0, 0)];
            let p_u = (u.transpose() * &r * &u)[(0, 0)];
            prop_assert!(p_mv <= p_u * (1.0 + 1e-12));
        }

        #[test]
        fn eigenspace_projection_is_idempotent(r in spd(4), frac in 0.05f64..1.0) {
            let c = cov(r);
            let w = mvdr_weights(&c).unwrap();
            let once = eigenspace_mv(&c, &w, frac).unwrap();
            let twice = eigenspace_mv(&c, &once, frac).unwrap();
            prop_assert!((&once - &twice).amax() < 1e-10);
        }
    }
}
