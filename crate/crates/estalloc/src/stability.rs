//! Estimation-stability certification.
//!
//! A sensor's remote error stays bounded when its dynamics expansion is beaten
//! by how often the network can reach it. With `rho_n` the spectral radius of
//! plant n's dynamics and `lambda_n` the spectral radius of `Psi * M_n` —
//! where `M_n` is the sensor's joint channel transition matrix and `Psi` the
//! diagonal of best-channel full-power decoding-failure probabilities — the
//! certificate reports:
//!
//! * sufficient condition: `(max_n rho_n)^2 * (max_n lambda_n) < 1`;
//! * necessary condition: `max_n rho_n^2 * lambda_n < 1`.
//!
//! The gap between the two is real: the sufficient test pairs the worst plant
//! with the worst channel even when they belong to different sensors.

use crate::channel::{ChannelStateSpace, GainKind, MarkovChannelModel};
use crate::error::{Error, Result};
use crate::estimation::PlantModel;
use crate::phy::{decode_failure_prob, LinkBudget};
use nalgebra::DMatrix;

/// Largest dimension handled by the Schur path of [`spectral_radius`].
const SCHUR_DIM_LIMIT: usize = 64;
/// Squaring budget for the Gelfand path of [`spectral_radius`].
const GELFAND_MAX_SQUARINGS: usize = 64;

/// Spectral radius of a square matrix.
///
/// Dimensions up to 64 go through a real Schur decomposition; larger
/// matrices use the Gelfand iteration `||A^(2^k)||^(1/2^k)` with normalized
/// repeated squaring, stopping when successive estimates differ by less
/// than `tol`.
pub fn spectral_radius(matrix: &DMatrix<f64>, tol: f64) -> Result<f64> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::DimensionMismatch("spectral radius needs a square matrix".into()));
    }
    if n == 0 {
        return Err(Error::DimensionMismatch("spectral radius of an empty matrix".into()));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateDraw("matrix has non-finite entries".into()));
    }
    if n <= SCHUR_DIM_LIMIT {
        if let Some(schur) = nalgebra::linalg::Schur::try_new(matrix.clone(), 1e-14, 100_000) {
            let radius = schur.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max);
            return Ok(radius);
        }
        // fall through to Gelfand on the rare QR non-convergence
    }
    gelfand_radius(matrix, tol)
}

/// Gelfand's formula with norm-doubling: after k normalized squarings the
/// estimate is `exp(sum_j 2^-j ln ||D_j||)` for the running normalized powers.
fn gelfand_radius(matrix: &DMatrix<f64>, tol: f64) -> Result<f64> {
    let norm0 = inf_norm(matrix);
    if norm0 == 0.0 {
        return Ok(0.0);
    }
    let mut d = matrix / norm0;
    let mut log_sum = norm0.ln();
    let mut estimate = norm0;
    for k in 1..=GELFAND_MAX_SQUARINGS {
        d = &d * &d;
        let norm = inf_norm(&d);
        if norm == 0.0 {
            return Ok(0.0); // nilpotent
        }
        d /= norm;
        log_sum += norm.ln() / 2f64.powi(k as i32);
        let next = log_sum.exp();
        let delta = (next - estimate).abs();
        estimate = next;
        if delta < tol {
            return Ok(estimate);
        }
    }
    Err(Error::NonConvergence { max_iter: GELFAND_MAX_SQUARINGS, last_delta: f64::NAN })
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Diagonal of best-channel full-power decoding-failure probabilities over
/// the joint channel space: entry i is the failure probability of a packet
/// sent at `p_max` on joint state i's strongest channel.
///
/// Amplitude-kind values are squared into power gains first.
pub fn psi_matrix(
    space: &ChannelStateSpace,
    kind: GainKind,
    budget: &LinkBudget,
    cap: usize,
) -> Result<Vec<f64>> {
    let size = space.joint_size_capped(cap)?;
    let mut psi = Vec::with_capacity(size);
    for joint in 0..size {
        let best = space
            .gains_of(joint)?
            .into_iter()
            .map(|g| kind.power_gain(g))
            .fold(0.0, f64::max);
        psi.push(decode_failure_prob(budget, best * budget.p_max_mw / budget.sigma2_mw));
    }
    Ok(psi)
}

/// Per-sensor certificate entries.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SensorStability {
    /// Spectral radius of the plant dynamics.
    pub rho: f64,
    /// Spectral radius of `Psi * M_n`.
    pub lambda: f64,
    /// The necessary-condition product `rho^2 * lambda`.
    pub rho_sq_lambda: f64,
}

/// Certificate for a full instance.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StabilityReport {
    pub per_sensor: Vec<SensorStability>,
    /// `(max rho)^2 * (max lambda) < 1`.
    pub sufficient_holds: bool,
    /// `max rho^2 * lambda < 1`.
    pub necessary_holds: bool,
    /// `1 - (max rho)^2 * (max lambda)`; positive when sufficient holds.
    pub sufficient_margin: f64,
    /// `1 - max rho^2 * lambda`; positive when necessary holds.
    pub necessary_margin: f64,
}

/// Assembles a report from per-sensor spectral radii. Split out so the
/// boolean/margin logic is testable on bare numbers.
pub fn report_from_radii(rhos: &[f64], lambdas: &[f64]) -> Result<StabilityReport> {
    if rhos.len() != lambdas.len() || rhos.is_empty() {
        return Err(Error::DimensionMismatch("need one (rho, lambda) pair per sensor".into()));
    }
    let per_sensor: Vec<SensorStability> = rhos
        .iter()
        .zip(lambdas)
        .map(|(&rho, &lambda)| SensorStability { rho, lambda, rho_sq_lambda: rho * rho * lambda })
        .collect();
    let max_rho = rhos.iter().copied().fold(0.0, f64::max);
    let max_lambda = lambdas.iter().copied().fold(0.0, f64::max);
    let sufficient_product = max_rho * max_rho * max_lambda;
    let necessary_product = per_sensor.iter().map(|s| s.rho_sq_lambda).fold(0.0, f64::max);
    Ok(StabilityReport {
        per_sensor,
        sufficient_holds: sufficient_product < 1.0,
        necessary_holds: necessary_product < 1.0,
        sufficient_margin: 1.0 - sufficient_product,
        necessary_margin: 1.0 - necessary_product,
    })
}

/// Evaluates the certificate for one instance.
///
/// Materializes each sensor's joint transition matrix (refusing joint spaces
/// beyond `cap`), row-scales it by `Psi`, and takes spectral radii.
pub fn check_stability(
    plants: &[PlantModel],
    channels: &[MarkovChannelModel],
    space: &ChannelStateSpace,
    kind: GainKind,
    budget: &LinkBudget,
    cap: usize,
) -> Result<StabilityReport> {
    if plants.len() != channels.len() || plants.is_empty() {
        return Err(Error::DimensionMismatch("need one channel model per plant".into()));
    }
    let psi = psi_matrix(space, kind, budget, cap)?;
    let mut rhos = Vec::with_capacity(plants.len());
    let mut lambdas = Vec::with_capacity(plants.len());
    for (plant, chain) in plants.iter().zip(channels) {
        rhos.push(spectral_radius(&plant.a, 1e-12)?);
        let mut scaled = chain.joint_transition(cap)?;
        if scaled.nrows() != psi.len() {
            return Err(Error::DimensionMismatch(format!(
                "joint space {} vs psi length {}",
                scaled.nrows(),
                psi.len()
            )));
        }
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= psi[i];
        }
        lambdas.push(spectral_radius(&scaled, 1e-10)?);
    }
    report_from_radii(&rhos, &lambdas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, STREAM_INSTANCE};
    use rand::Rng;

    #[test]
    fn spectral_radius_of_known_matrices() {
        let rotation_scaled = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        assert!((spectral_radius(&rotation_scaled, 1e-12).unwrap() - 2.0).abs() < 1e-10);
        let diag = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.0, 0.0, -1.25, 0.0, 0.0, 0.0, 0.75]);
        assert!((spectral_radius(&diag, 1e-12).unwrap() - 1.25).abs() < 1e-10);
        let nilpotent = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(spectral_radius(&nilpotent, 1e-12).unwrap() < 1e-7);
    }

    #[test]
    fn gelfand_path_agrees_with_schur_path() {
        let mut rng = stream(21, STREAM_INSTANCE);
        for _ in 0..10 {
            let n = rng.gen_range(2..8usize);
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.3);
            let schur = spectral_radius(&m, 1e-12).unwrap();
            let gelfand = super::gelfand_radius(&m, 1e-12).unwrap();
            assert!(
                (schur - gelfand).abs() < 1e-8 * schur.max(1.0),
                "schur {schur} vs gelfand {gelfand}"
            );
        }
    }

    #[test]
    fn psi_entries_are_probabilities_and_monotone_in_power() {
        let budget = LinkBudget { p_max_mw: 10.0, sigma2_mw: 1.0, bits: 400, block_len: 200 };
        let strong = LinkBudget { p_max_mw: 40.0, ..budget.clone() };
        let space = ChannelStateSpace::new(vec![0.05, 0.2, 0.6], 2).unwrap();
        let weak_psi = psi_matrix(&space, GainKind::Power, &budget, 64).unwrap();
        let strong_psi = psi_matrix(&space, GainKind::Power, &strong, 64).unwrap();
        for (w, s) in weak_psi.iter().zip(&strong_psi) {
            assert!((0.0..=1.0).contains(w));
            assert!(s <= w, "more power must not raise the failure probability");
        }
    }

    #[test]
    fn static_single_sensor_reduces_to_rho_squared_epsilon() {
        // One channel state, so Psi * M = [eps] and lambda = eps exactly.
        let budget = LinkBudget { p_max_mw: 1.0, sigma2_mw: 1.0, bits: 400, block_len: 200 };
        let gain = 2.8; // SNR 2.8 below the rate knee: eps well inside (0,1)
        let eps = decode_failure_prob(&budget, gain);
        assert!(eps > 0.5 && eps < 1.0);
        let space = ChannelStateSpace::new(vec![gain], 1).unwrap();
        let chain = MarkovChannelModel::new(vec![DMatrix::from_element(1, 1, 1.0)]).unwrap();
        let plant = PlantModel {
            a: DMatrix::from_element(1, 1, 1.1),
            c: DMatrix::identity(1, 1),
            w: DMatrix::identity(1, 1),
            v: DMatrix::identity(1, 1),
        };
        let report =
            check_stability(&[plant], &[chain], &space, GainKind::Power, &budget, 64).unwrap();
        let s = &report.per_sensor[0];
        assert!((s.lambda - eps).abs() < 1e-12);
        assert!((s.rho - 1.1).abs() < 1e-10);
        let product = 1.1f64.powi(2) * eps;
        assert_eq!(report.sufficient_holds, product < 1.0);
        assert_eq!(report.necessary_holds, product < 1.0);
        assert!((report.necessary_margin - (1.0 - product)).abs() < 1e-10);
    }

    #[test]
    fn report_reproduces_the_sufficiency_gap() {
        // Worst plant paired with worst channel fails the sufficient test while
        // every per-sensor product still passes the necessary one.
        let report = report_from_radii(&[1.29, 1.01], &[0.4, 0.7]).unwrap();
        assert!(!report.sufficient_holds);
        assert!(report.necessary_holds);
        assert!((report.sufficient_margin - (1.0 - 1.29f64 * 1.29 * 0.7)).abs() < 1e-12);
        let worst = 1.01f64 * 1.01 * 0.7;
        assert!((report.necessary_margin - (1.0 - worst)).abs() < 1e-12);
    }

    #[test]
    fn lambda_never_exceeds_max_psi() {
        let mut rng = stream(22, STREAM_INSTANCE);
        let budget = LinkBudget { p_max_mw: 5.0, sigma2_mw: 1.0, bits: 400, block_len: 200 };
        for _ in 0..50 {
            let h = rng.gen_range(1..4usize);
            let m = rng.gen_range(1..3usize);
            let mut values: Vec<f64> = (0..h).map(|_| rng.gen::<f64>() * 3.0 + 1e-3).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            let space = match ChannelStateSpace::new(values, m) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let chain = MarkovChannelModel::generate_random(space.h(), m, &mut rng).unwrap();
            let psi = psi_matrix(&space, GainKind::Power, &budget, 4096).unwrap();
            let max_psi = psi.iter().copied().fold(0.0, f64::max);
            let mut scaled = chain.joint_transition(4096).unwrap();
            for (i, mut row) in scaled.row_iter_mut().enumerate() {
                row *= psi[i];
            }
            let lambda = spectral_radius(&scaled, 1e-10).unwrap();
            assert!(lambda <= max_psi + 1e-9, "lambda {lambda} vs max psi {max_psi}");
        }
    }
}
