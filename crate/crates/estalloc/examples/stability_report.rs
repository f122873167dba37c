//! The estimator stability certificate.
//!
//! For each sensor the certificate multiplies the joint fading transition
//! matrix row-wise by the best-channel decoding failure probability and takes
//! the spectral radius lambda; the scheme can stabilize every plant if
//! (max rho)^2 * (max lambda) < 1 (sufficient), and can only work at all if
//! rho_n^2 * lambda_n < 1 for each sensor (necessary).
//!
//! Draws instances from a config, showing how the generator resamples until
//! the sufficient condition holds, then sharpens the per-sensor picture.
//!
//! Run with: cargo run --example stability_report

use estalloc::actions::Scenario;
use estalloc::harness::{gen_instance, recheck_stability, ExperimentConfig};

fn main() -> estalloc::Result<()> {
    let mut cfg: ExperimentConfig = toml::from_str(
        "n_sensors = 4\nm_channels = 2\ninstance_seed = 3\ntrain_seed = 4\n",
    )
    .map_err(estalloc::Error::from)?;
    cfg.channel_states = 4; // joint space 4^2 = 16 per sensor: cheap to certify
    cfg.rho_range = (1.0, 1.3);
    // Starve the budget so the weakest fading state actually threatens
    // decoding; at the default 23 dBm every lambda underflows to zero.
    cfg.p_max_dbm = -17.0;

    let instance = gen_instance(&cfg, Scenario::Oma)?;
    println!(
        "kept a draw after {} resamples (gate: {:?})",
        instance.resamples, instance.stability_gate
    );

    let report = recheck_stability(&instance)?;
    println!("\nper-sensor certificate:");
    println!("  sensor   rho (plant)   lambda (fading)   rho^2 * lambda");
    for (n, s) in report.per_sensor.iter().enumerate() {
        println!(
            "  {n:>6}   {:>11.6}   {:>15.3e}   {:>14.3e}",
            s.rho, s.lambda, s.rho_sq_lambda
        );
    }
    println!(
        "\nsufficient condition (max rho)^2 (max lambda) < 1: {} (margin {:.6})",
        report.sufficient_holds, report.sufficient_margin
    );
    println!(
        "necessary condition max rho^2 lambda < 1:          {} (margin {:.6})",
        report.necessary_holds, report.necessary_margin
    );

    // Starve the link budget and the same draw fails the certificate.
    let mut starved = instance.clone();
    starved.budget.p_max_mw = starved.budget.p_max_mw * 1e-9;
    let weak = recheck_stability(&starved)?;
    println!(
        "\nsame instance at one-billionth power: sufficient = {}, necessary = {}",
        weak.sufficient_holds, weak.necessary_holds
    );
    println!("(with a dead link every lambda approaches 1 and unstable plants cannot be tracked)");
    Ok(())
}
