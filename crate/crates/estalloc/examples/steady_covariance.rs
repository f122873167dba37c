//! Steady-state Kalman filtering and the age-of-information cost ladder.
//!
//! Builds a scalar plant and a 2x2 plant, solves for the steady posterior
//! error covariance, and prints how the estimation cost grows as the fusion
//! center's information ages.
//!
//! Run with: cargo run --example steady_covariance

use estalloc::estimation::{steady_posterior_covariance, PlantModel, SteadyEstimator};
use nalgebra::DMatrix;

fn main() -> estalloc::Result<()> {
    // Scalar plant x' = 1.2 x + w with unit noises: the steady prior solves
    // X^2 - 1.44 X - 1 = 0.
    let scalar = PlantModel {
        a: DMatrix::from_element(1, 1, 1.2),
        c: DMatrix::identity(1, 1),
        w: DMatrix::identity(1, 1),
        v: DMatrix::identity(1, 1),
    };
    let post = steady_posterior_covariance(&scalar, 1e-10, 1_000_000)?;
    println!("scalar plant (a = 1.2, unit noises)");
    println!("  steady posterior variance: {:.12}", post[(0, 0)]);

    let estimator = SteadyEstimator::new(scalar, 50)?;
    println!("  cost by age (trace of the propagated covariance):");
    for tau in 0..6 {
        println!("    age {tau}: {:.6}", estimator.cost_at_age(tau));
    }
    println!("  age 50 (cap): {:.3e}", estimator.cost_at_age(50));
    println!("  age 60 saturates at the cap: {:.3e}", estimator.cost_at_age(60));

    // A rotating, slightly unstable 2D plant.
    let spin = 0.1f64;
    let rho = 1.05;
    let planar = PlantModel {
        a: DMatrix::from_row_slice(
            2,
            2,
            &[
                rho * spin.cos(),
                -rho * spin.sin(),
                rho * spin.sin(),
                rho * spin.cos(),
            ],
        ),
        c: DMatrix::identity(2, 2),
        w: DMatrix::identity(2, 2),
        v: DMatrix::identity(2, 2),
    };
    let post2 = steady_posterior_covariance(&planar, 1e-10, 1_000_000)?;
    println!("\nplanar rotation plant (spectral radius {rho})");
    println!("  steady posterior covariance:\n{post2:.6}");
    let estimator2 = SteadyEstimator::new(planar, 50)?;
    for tau in 0..4 {
        println!("  cost at age {tau}: {:.6}", estimator2.cost_at_age(tau));
    }
    Ok(())
}
