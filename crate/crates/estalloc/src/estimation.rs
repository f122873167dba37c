//! Linear plant models and the steady-state Kalman error covariance.
//!
//! Each sensor runs a local Kalman filter whose posterior error covariance
//! converges to a fixed point `P_bar`. When the fusion center has not heard
//! from a sensor for `tau` slots, its remote estimation error is
//! `f^tau(P_bar)` with `f(X) = A X A' + W`, so the trace of that power of the
//! age map prices every age of information once, up front.

use crate::error::{Error, Result};
use crate::stability::spectral_radius;
use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

/// Convergence tolerance for the covariance fixed-point iteration.
pub const RICCATI_TOL: f64 = 1e-10;
/// Iteration budget for the covariance fixed-point iteration.
pub const RICCATI_MAX_ITER: usize = 1_000_000;
/// Retry budget when a random draw produces a near-nilpotent dynamics matrix.
const PLANT_DRAW_RETRIES: usize = 100;
/// Smallest usable spectral radius of a raw random dynamics draw.
const MIN_RAW_RADIUS: f64 = 1e-9;

/// A discrete-time linear plant `x+ = A x + w`, observed as `y = C x + v`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlantModel {
    /// State dynamics matrix A (square).
    pub a: DMatrix<f64>,
    /// Observation matrix C.
    pub c: DMatrix<f64>,
    /// Process noise covariance W (symmetric PSD).
    pub w: DMatrix<f64>,
    /// Measurement noise covariance V (symmetric positive definite).
    pub v: DMatrix<f64>,
}

impl PlantModel {
    /// Plant dimension (rows of A).
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Validates shapes and noise covariance structure.
    pub fn validate(&self) -> Result<()> {
        let d = self.a.nrows();
        if self.a.ncols() != d {
            return Err(Error::DimensionMismatch("A must be square".into()));
        }
        let r = self.c.nrows();
        if self.c.ncols() != d {
            return Err(Error::DimensionMismatch("C must have one column per state".into()));
        }
        if self.w.nrows() != d || self.w.ncols() != d {
            return Err(Error::DimensionMismatch("W must match the state dimension".into()));
        }
        if self.v.nrows() != r || self.v.ncols() != r {
            return Err(Error::DimensionMismatch("V must match the observation dimension".into()));
        }
        check_symmetric(&self.w, "W")?;
        check_symmetric(&self.v, "V")?;
        if self.w.clone().symmetric_eigenvalues().min() < -1e-9 {
            return Err(Error::NotPsd("W has a negative eigenvalue".into()));
        }
        if Cholesky::new(self.v.clone()).is_none() {
            return Err(Error::NotPsd("V must be positive definite".into()));
        }
        Ok(())
    }

    /// One application of the age map `f(X) = A X A' + W`.
    pub fn age_step(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a * x * self.a.transpose() + &self.w
    }
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if (m - m.transpose()).abs().max() > 1e-9 {
        return Err(Error::NotPsd(format!("{name} is not symmetric")));
    }
    Ok(())
}

/// Steady-state posterior error covariance of the local Kalman filter.
///
/// Iterates the measurement-updated Riccati recursion
/// `P -> (I - K C)(A P A' + W)` with the optimal gain `K`, starting from `W`,
/// symmetrizing each iterate, until the max-abs difference between successive
/// iterates falls below `tol`.
pub fn steady_posterior_covariance(plant: &PlantModel, tol: f64, max_iter: usize) -> Result<DMatrix<f64>> {
    plant.validate()?;
    let d = plant.dim();
    let identity = DMatrix::<f64>::identity(d, d);
    let mut p = plant.w.clone();
    let mut last_delta = f64::INFINITY;
    for _ in 0..max_iter {
        let prior = plant.age_step(&p);
        let innovation = &plant.c * &prior * plant.c.transpose() + &plant.v;
        let chol = Cholesky::new(innovation)
            .ok_or_else(|| Error::LinearSolve("innovation covariance not positive definite".into()))?;
        // K = prior C' S^-1, computed as (S^-1 (C prior'))' to reuse the solve
        let gain = chol.solve(&(&plant.c * prior.transpose())).transpose();
        let mut next = (&identity - gain * &plant.c) * prior;
        next = (&next + next.transpose()) * 0.5;
        last_delta = (&next - &p).abs().max();
        p = next;
        if last_delta < tol {
            return Ok(p);
        }
    }
    Err(Error::NonConvergence { max_iter, last_delta })
}

/// A plant bundled with its steady covariance and precomputed age costs.
#[derive(Debug, Clone)]
pub struct SteadyEstimator {
    plant: PlantModel,
    p_bar: DMatrix<f64>,
    cost_by_age: Vec<f64>,
}

impl SteadyEstimator {
    /// Solves the steady covariance and tabulates `tr f^tau(P_bar)` for
    /// `tau = 0..=tau_cap`. Ages beyond the cap saturate at the last entry.
    pub fn new(plant: PlantModel, tau_cap: u32) -> Result<Self> {
        let p_bar = steady_posterior_covariance(&plant, RICCATI_TOL, RICCATI_MAX_ITER)?;
        let mut cost_by_age = Vec::with_capacity(tau_cap as usize + 1);
        let mut x = p_bar.clone();
        cost_by_age.push(x.trace());
        for _ in 1..=tau_cap {
            x = plant.age_step(&x);
            cost_by_age.push(x.trace());
        }
        Ok(SteadyEstimator { plant, p_bar, cost_by_age })
    }

    /// The underlying plant.
    pub fn plant(&self) -> &PlantModel {
        &self.plant
    }

    /// Steady-state posterior covariance `P_bar`.
    pub fn p_bar(&self) -> &DMatrix<f64> {
        &self.p_bar
    }

    /// Remote estimation cost at the given age, saturating at the cap.
    pub fn cost_at_age(&self, tau: u32) -> f64 {
        let idx = (tau as usize).min(self.cost_by_age.len() - 1);
        self.cost_by_age[idx]
    }

    /// Largest tabulated age.
    pub fn tau_cap(&self) -> u32 {
        (self.cost_by_age.len() - 1) as u32
    }
}

/// Draws a random plant with prescribed spectral radius.
///
/// The target radius is uniform over `rho_range`; A is filled with standard
/// normal entries and rescaled onto that radius (redrawing near-nilpotent
/// samples); C, W, V are identities. Returns the plant and the drawn radius.
pub fn generate_random_plant<R: Rng>(
    dim: usize,
    rho_range: (f64, f64),
    rng: &mut R,
) -> Result<(PlantModel, f64)> {
    if dim == 0 {
        return Err(Error::InvalidConfig("plant dimension must be positive".into()));
    }
    if !(rho_range.0 > 0.0 && rho_range.1 >= rho_range.0) {
        return Err(Error::InvalidConfig(format!(
            "invalid spectral radius range {rho_range:?}"
        )));
    }
    let rho_star = rng.gen_range(rho_range.0..=rho_range.1);
    for _ in 0..PLANT_DRAW_RETRIES {
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let raw = spectral_radius(&a, 1e-12)?;
        if raw < MIN_RAW_RADIUS {
            continue;
        }
        let plant = PlantModel {
            a: a * (rho_star / raw),
            c: DMatrix::identity(dim, dim),
            w: DMatrix::identity(dim, dim),
            v: DMatrix::identity(dim, dim),
        };
        return Ok((plant, rho_star));
    }
    Err(Error::DegenerateDraw(format!(
        "no usable dynamics draw in {PLANT_DRAW_RETRIES} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, STREAM_INSTANCE};

    /// Scalar plant a=1.2, c=w=v=1 used throughout the tests.
    pub(crate) fn scalar_plant() -> PlantModel {
        PlantModel {
            a: DMatrix::from_element(1, 1, 1.2),
            c: DMatrix::identity(1, 1),
            w: DMatrix::identity(1, 1),
            v: DMatrix::identity(1, 1),
        }
    }

    // Root of X^2 - 1.44 X - 1 = 0 (steady prior) and its update.
    const STEADY_PRIOR: f64 = 1.952233744059949;
    const STEADY_POST: f64 = 0.66127343337496461;

    #[test]
    fn scalar_riccati_matches_quadratic_root() {
        let p = steady_posterior_covariance(&scalar_plant(), RICCATI_TOL, RICCATI_MAX_ITER).unwrap();
        assert!((p[(0, 0)] - STEADY_POST).abs() < 1e-9, "got {}", p[(0, 0)]);
    }

    #[test]
    fn one_more_update_barely_moves_the_fixed_point() {
        let plant = scalar_plant();
        let p = steady_posterior_covariance(&plant, RICCATI_TOL, RICCATI_MAX_ITER).unwrap();
        let prior = plant.age_step(&p);
        let s = prior[(0, 0)] + 1.0;
        let next = prior[(0, 0)] * (1.0 - prior[(0, 0)] / s);
        assert!((next - p[(0, 0)]).abs() <= 10.0 * RICCATI_TOL);
    }

    #[test]
    fn cost_table_starts_at_posterior_and_grows_by_the_age_map() {
        let est = SteadyEstimator::new(scalar_plant(), 50).unwrap();
        assert!((est.cost_at_age(0) - STEADY_POST).abs() < 1e-9);
        assert!((est.cost_at_age(1) - STEADY_PRIOR).abs() < 1e-9);
        // recursion check: cost[tau+1] = tr(A f^tau(P_bar) A' + W)
        let mut x = est.p_bar().clone();
        for tau in 0..50u32 {
            x = est.plant().age_step(&x);
            let rel = (est.cost_at_age(tau + 1) - x.trace()).abs() / x.trace().abs().max(1.0);
            assert!(rel < 1e-12, "age {tau}: table {} vs direct {}", est.cost_at_age(tau + 1), x.trace());
        }
        // saturation beyond the cap
        assert_eq!(est.cost_at_age(1000), est.cost_at_age(50));
    }

    #[test]
    fn cost_is_monotone_in_age_for_expanding_plants() {
        let est = SteadyEstimator::new(scalar_plant(), 50).unwrap();
        for tau in 0..50 {
            assert!(est.cost_at_age(tau + 1) > est.cost_at_age(tau));
        }
    }

    #[test]
    fn random_plants_hit_their_drawn_radius() {
        let mut rng = stream(11, STREAM_INSTANCE);
        for dim in 1..=4usize {
            for _ in 0..5 {
                let (plant, rho_star) = generate_random_plant(dim, (1.0, 1.3), &mut rng).unwrap();
                let rho = spectral_radius(&plant.a, 1e-12).unwrap();
                assert!((rho - rho_star).abs() < 1e-8, "dim {dim}: {rho} vs {rho_star}");
                plant.validate().unwrap();
            }
        }
    }

    #[test]
    fn rejects_malformed_covariances() {
        let mut plant = scalar_plant();
        plant.v = DMatrix::from_element(1, 1, 0.0);
        assert!(matches!(plant.validate(), Err(Error::NotPsd(_))));
        let mut plant = scalar_plant();
        plant.w = DMatrix::from_element(1, 1, -1.0);
        assert!(matches!(plant.validate(), Err(Error::NotPsd(_))));
    }
}
