//! Weighted ridge regression with incremental rank-one updates.
//!
//! The state tracks `precision = λI + Σ xxᵀ/σ̄²`, `moment = Σ y·x/σ̄²` and the
//! point estimate `precision⁻¹ · moment`. A Cholesky factor of the precision
//! is updated in place so each observation costs O(d²); the factor is rebuilt
//! from the assembled matrix every [`REFRESH_INTERVAL`] updates.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, domain, Error, Result};

/// Number of rank-one updates between full refactorizations.
pub const REFRESH_INTERVAL: u64 = 10_000;

/// One weighted observation `(x, y, σ̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: DVector<f64>,
    pub y: f64,
    pub sigma_bar: f64,
}

impl Observation {
    pub fn new(x: DVector<f64>, y: f64, sigma_bar: f64) -> Self {
        Self { x, y, sigma_bar }
    }
}

#[derive(Debug, Clone)]
pub struct RegressorState {
    dim: usize,
    lambda: f64,
    precision: DMatrix<f64>,
    moment: DVector<f64>,
    estimate: DVector<f64>,
    count: u64,
    factor: Cholesky<f64, Dyn>,
    since_refresh: u64,
}

impl RegressorState {
    /// Fresh state with `precision = λI` and zero moment/estimate.
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(domain("regressor dimension must be at least 1"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(domain(format!(
                "ridge lambda must be positive, got {lambda}"
            )));
        }
        let precision = DMatrix::identity(dim, dim) * lambda;
        let factor = Cholesky::new(precision.clone())
            .ok_or_else(|| Error::Numerical("λI is not positive definite".into()))?;
        Ok(Self {
            dim,
            lambda,
            precision,
            moment: DVector::zeros(dim),
            estimate: DVector::zeros(dim),
            count: 0,
            factor,
            since_refresh: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }

    pub fn estimate(&self) -> &DVector<f64> {
        &self.estimate
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Absorbs `(x, y)` with weight `1/σ̄²`.
    pub fn update(&mut self, x: &DVector<f64>, y: f64, sigma_bar: f64) -> Result<()> {
        check_len("regression feature", self.dim, x.len())?;
        if !(sigma_bar > 0.0 && sigma_bar.is_finite()) {
            return Err(domain(format!(
                "sigma_bar must be positive, got {sigma_bar}"
            )));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(domain("observation contains non-finite values"));
        }
        let w = 1.0 / (sigma_bar * sigma_bar);
        self.count += 1;
        if x.iter().all(|&v| v == 0.0) {
            return Ok(());
        }

        self.precision.ger(w, x, x, 1.0);
        symmetrize(&mut self.precision);
        self.moment.axpy(w * y, x, 1.0);

        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_INTERVAL {
            self.refresh()?;
        } else {
            self.factor.rank_one_update(x, w);
            self.estimate = self.factor.solve(&self.moment);
        }
        Ok(())
    }

    /// Rebuilds the factorization and estimate from the assembled precision.
    pub fn refresh(&mut self) -> Result<()> {
        symmetrize(&mut self.precision);
        self.factor = Cholesky::new(self.precision.clone())
            .ok_or_else(|| Error::Numerical("precision lost positive definiteness".into()))?;
        self.estimate = self.factor.solve(&self.moment);
        self.since_refresh = 0;
        Ok(())
    }

    /// `‖x‖_{Σ̂⁻¹} = √(xᵀ Σ̂⁻¹ x)`, computed as `‖L⁻¹x‖₂`.
    pub fn mahalanobis_inv(&self, x: &DVector<f64>) -> Result<f64> {
        check_len("mahalanobis feature", self.dim, x.len())?;
        Ok(self.mahalanobis_inv_unchecked(x))
    }

    pub(crate) fn mahalanobis_inv_unchecked(&self, x: &DVector<f64>) -> f64 {
        match self.factor.l_dirty().solve_lower_triangular(x) {
            Some(z) => z.norm(),
            None => f64::INFINITY,
        }
    }

    /// `‖v‖_{Σ̂} = √(vᵀ Σ̂ v)`.
    pub fn mahalanobis(&self, v: &DVector<f64>) -> Result<f64> {
        check_len("mahalanobis vector", self.dim, v.len())?;
        Ok(self.precision.dot(&(v * v.transpose())).max(0.0).sqrt())
    }

    /// `log det Σ̂` from the Cholesky diagonal.
    pub fn log_det(&self) -> f64 {
        let l = self.factor.l_dirty();
        (0..self.dim).map(|i| 2.0 * l[(i, i)].ln()).sum()
    }

    /// `‖precision · estimate − moment‖ / max(‖moment‖, tiny)`.
    pub fn relative_residual(&self) -> f64 {
        let r = &self.precision * &self.estimate - &self.moment;
        r.norm() / self.moment.norm().max(f64::MIN_POSITIVE)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Solves the weighted ridge normal equations for `history` in one shot.
///
/// This assembles `λI + Σ xxᵀ/σ̄²` and factors it with LU; it exists as an
/// independent check on the incremental path.
pub fn direct_solve(history: &[Observation], dim: usize, lambda: f64) -> Result<DVector<f64>> {
    if dim == 0 {
        return Err(domain("regressor dimension must be at least 1"));
    }
    if !(lambda > 0.0) {
        return Err(domain(format!(
            "ridge lambda must be positive, got {lambda}"
        )));
    }
    let mut a = DMatrix::<f64>::identity(dim, dim) * lambda;
    let mut b = DVector::<f64>::zeros(dim);
    for obs in history {
        check_len("regression feature", dim, obs.x.len())?;
        if !(obs.sigma_bar > 0.0) {
            return Err(domain(format!(
                "sigma_bar must be positive, got {}",
                obs.sigma_bar
            )));
        }
        let w = 1.0 / (obs.sigma_bar * obs.sigma_bar);
        for i in 0..dim {
            b[i] += w * obs.y * obs.x[i];
            for j in 0..dim {
                a[(i, j)] += w * obs.x[i] * obs.x[j];
            }
        }
    }
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("assembled normal equations are singular".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn random_history(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Observation> {
        (0..n)
            .map(|_| {
                let x = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
                Observation::new(x, rng.gen_range(-2.0..2.0), rng.gen_range(0.01..10.0))
            })
            .collect()
    }

    #[test]
    fn init_is_scaled_identity() {
        let s = RegressorState::new(2, 1.0).unwrap();
        assert_eq!(s.precision(), &DMatrix::identity(2, 2));
        assert_eq!(s.estimate(), &v(&[0.0, 0.0]));
        assert_eq!(s.count(), 0);

        let s = RegressorState::new(4, 4.0).unwrap();
        assert_eq!(s.precision(), &(DMatrix::identity(4, 4) * 4.0));
    }

    #[test]
    fn init_rejects_bad_parameters() {
        assert!(matches!(RegressorState::new(0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(RegressorState::new(2, 0.0), Err(Error::Domain(_))));
        assert!(matches!(
            RegressorState::new(2, -1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn single_update_matches_hand_solve() {
        let mut s = RegressorState::new(2, 1.0).unwrap();
        s.update(&v(&[1.0, 0.0]), 2.0, 1.0).unwrap();
        assert_eq!(s.precision(), &DMatrix::from_diagonal(&v(&[2.0, 1.0])));
        assert_relative_eq!(s.estimate()[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.estimate()[1], 0.0, epsilon = 1e-15);
        assert_eq!(s.count(), 1);
    }

    #[test]
    fn zero_feature_only_counts() {
        let mut s = RegressorState::new(2, 1.0).unwrap();
        s.update(&v(&[0.0, 0.0]), 7.5, 1.0).unwrap();
        assert_eq!(s.count(), 1);
        assert_eq!(s.precision(), &DMatrix::identity(2, 2));
        assert_eq!(s.moment(), &v(&[0.0, 0.0]));
        assert_eq!(s.estimate(), &v(&[0.0, 0.0]));
    }

    #[test]
    fn update_rejects_bad_inputs() {
        let mut s = RegressorState::new(2, 1.0).unwrap();
        assert!(matches!(
            s.update(&v(&[1.0, 0.0]), 1.0, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            s.update(&v(&[1.0, 0.0]), 1.0, -2.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            s.update(&v(&[1.0, 0.0, 0.0]), 1.0, 1.0),
            Err(Error::Shape { .. })
        ));
        assert_eq!(s.count(), 0);
    }

    #[test]
    fn direct_solve_small_cases() {
        assert_eq!(direct_solve(&[], 3, 1.0).unwrap(), DVector::zeros(3));
        let h = [Observation::new(v(&[1.0, 0.0]), 2.0, 1.0)];
        let th = direct_solve(&h, 2, 1.0).unwrap();
        assert_relative_eq!(th[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(th[1], 0.0, epsilon = 1e-15);
        assert!(matches!(direct_solve(&h, 3, 1.0), Err(Error::Shape { .. })));
    }

    #[test]
    fn incremental_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hist = random_history(&mut rng, 50, 6);
        let mut s = RegressorState::new(6, 0.7).unwrap();
        for o in &hist {
            s.update(&o.x, o.y, o.sigma_bar).unwrap();
        }
        let direct = direct_solve(&hist, 6, 0.7).unwrap();
        let rel = (s.estimate() - &direct).norm() / direct.norm();
        assert!(rel <= 1e-8, "relative error {rel}");
        assert!(s.relative_residual() <= 1e-10);
    }

    #[test]
    fn refresh_boundary_is_seamless() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hist = random_history(&mut rng, REFRESH_INTERVAL as usize + 37, 3);
        let mut s = RegressorState::new(3, 1.0).unwrap();
        for o in &hist {
            s.update(&o.x, o.y, o.sigma_bar).unwrap();
        }
        let direct = direct_solve(&hist, 3, 1.0).unwrap();
        assert!((s.estimate() - &direct).norm() / direct.norm() <= 1e-8);
    }

    #[test]
    fn mahalanobis_inv_examples() {
        let s = RegressorState::new(2, 1.0).unwrap();
        assert_relative_eq!(s.mahalanobis_inv(&v(&[1.0, 0.0])).unwrap(), 1.0);
        let s = RegressorState::new(2, 4.0).unwrap();
        assert_relative_eq!(s.mahalanobis_inv(&v(&[1.0, 0.0])).unwrap(), 0.5);
        assert!(matches!(
            s.mahalanobis_inv(&v(&[1.0])),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn mahalanobis_inv_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = RegressorState::new(5, 0.5).unwrap();
        for o in random_history(&mut rng, 40, 5) {
            s.update(&o.x, o.y, o.sigma_bar).unwrap();
        }
        let inv = s.precision().clone().try_inverse().unwrap();
        for _ in 0..20 {
            let x = DVector::from_fn(5, |_, _| rng.gen_range(-1.0..1.0));
            let dense = (x.transpose() * &inv * &x)[(0, 0)].sqrt();
            assert_relative_eq!(s.mahalanobis_inv(&x).unwrap(), dense, epsilon = 1e-10);
        }
    }

    fn arb_history(d: usize) -> impl Strategy<Value = Vec<(Vec<f64>, f64, f64)>> {
        prop::collection::vec(
            (
                prop::collection::vec(-1.0f64..1.0, d),
                -2.0f64..2.0,
                0.05f64..5.0,
            ),
            0..60,
        )
    }

    proptest! {
        #[test]
        fn state_invariants_hold(hist in arb_history(4), lambda in 0.1f64..5.0) {
            let mut s = RegressorState::new(4, lambda).unwrap();
            let mut prev_logdet = s.log_det();
            for (x, y, sb) in &hist {
                s.update(&v(x), *y, *sb).unwrap();
                let ld = s.log_det();
                prop_assert!(ld >= prev_logdet - 1e-12);
                prev_logdet = ld;
            }
            let p = s.precision();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((p[(i, j)] - p[(j, i)]).abs() <= 1e-12);
                }
            }
            let shifted = p - DMatrix::identity(4, 4) * lambda + DMatrix::identity(4, 4) * 1e-9;
            prop_assert!(Cholesky::new(shifted).is_some());
            prop_assert!(s.relative_residual() <= 1e-10 || s.moment().norm() == 0.0);
            prop_assert_eq!(s.count(), hist.len() as u64);
        }

        #[test]
        fn repeated_direction_shrinks_uncertainty(x in prop::collection::vec(-1.0f64..1.0, 3), sb in 0.1f64..3.0) {
            let x = v(&x);
            let mut s = RegressorState::new(3, 1.0).unwrap();
            let before = s.mahalanobis_inv(&x).unwrap();
            s.update(&x, 0.3, sb).unwrap();
            prop_assert!(s.mahalanobis_inv(&x).unwrap() <= before + 1e-15);
        }

        #[test]
        fn weight_scaling_is_equivalent(hist in arb_history(3)) {
            let mut a = RegressorState::new(3, 1.0).unwrap();
            let mut b = RegressorState::new(3, 1.0).unwrap();
            for (x, y, sb) in &hist {
                a.update(&v(x), *y, *sb).unwrap();
                b.update(&(v(x) / *sb), *y / *sb, 1.0).unwrap();
            }
            let scale = 1.0 + a.precision().norm();
            prop_assert!((a.precision() - b.precision()).norm() <= 1e-10 * scale);
            let es = 1.0 + a.estimate().norm();
            prop_assert!((a.estimate() - b.estimate()).norm() <= 1e-9 * es);
        }

        #[test]
        fn fold_equals_direct(hist in arb_history(3), lambda in 0.1f64..5.0) {
            let obs: Vec<Observation> = hist.iter().map(|(x, y, sb)| Observation::new(v(x), *y, *sb)).collect();
            let mut s = RegressorState::new(3, lambda).unwrap();
            for o in &obs {
                s.update(&o.x, o.y, o.sigma_bar).unwrap();
            }
            let d = direct_solve(&obs, 3, lambda).unwrap();
            prop_assert!((s.estimate() - &d).norm() <= 1e-8 * (1.0 + d.norm()));
        }
    }
}
