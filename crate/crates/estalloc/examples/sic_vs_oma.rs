//! Orthogonal access versus superposition with successive interference
//! cancellation, on one shared channel.
//!
//! Two sensors with fixed gains transmit at full power. Orthogonal access
//! serves one sensor per slot; SIC lets both transmit at once — the receiver
//! decodes the stronger signal treating the weaker as noise, strips it, then
//! decodes the weaker at full SNR. A decoding failure breaks the chain.
//!
//! Run with: cargo run --example sic_vs_oma

use estalloc::phy::{decode_failure_prob, oma_receive, sic_receive, LinkBudget};
use estalloc::rng::{stream, STREAM_ENV_DECODE};
use nalgebra::DMatrix;

fn main() -> estalloc::Result<()> {
    let budget = LinkBudget::from_dbm(23.0, -60.0, 400, 200)?;
    // Gains chosen so the strong link decodes through interference almost
    // surely and the weak link fails at a visible rate once stripped.
    let g_strong = 9.0e-8;
    let g_weak = 1.75e-8;
    let gains = DMatrix::from_row_slice(2, 1, &[g_strong, g_weak]);
    let p = budget.p_max_mw;
    let sigma2 = budget.sigma2_mw;

    let sinr_strong_vs_weak = p * g_strong / (p * g_weak + sigma2);
    let snr_strong_alone = p * g_strong / sigma2;
    let snr_weak_alone = p * g_weak / sigma2;
    println!("analytic failure probabilities:");
    println!(
        "  strong through interference (sinr {:.3}): {:.4}",
        sinr_strong_vs_weak,
        decode_failure_prob(&budget, sinr_strong_vs_weak)
    );
    println!(
        "  strong alone (snr {:.3}): {:.4}",
        snr_strong_alone,
        decode_failure_prob(&budget, snr_strong_alone)
    );
    println!(
        "  weak alone (snr {:.3}): {:.4}",
        snr_weak_alone,
        decode_failure_prob(&budget, snr_weak_alone)
    );

    let trials = 100_000;

    // Orthogonal: alternate the channel between the sensors.
    let mut rng = stream(7, STREAM_ENV_DECODE);
    let mut oma_success = [0usize; 2];
    for t in 0..trials {
        let channel_of = if t % 2 == 0 {
            vec![Some(0), None]
        } else {
            vec![None, Some(0)]
        };
        let outcome = oma_receive(&budget, &channel_of, &gains, &mut rng)?;
        for s in 0..2 {
            if outcome.success[s] {
                oma_success[s] += 1;
            }
        }
    }

    // SIC: both transmit every slot at full power.
    let mut rng = stream(7, STREAM_ENV_DECODE);
    let mut sic_success = [0usize; 2];
    let channel_of = vec![Some(0), Some(0)];
    for _ in 0..trials {
        let outcome = sic_receive(&budget, &channel_of, &[p, p], &gains, &mut rng)?;
        for s in 0..2 {
            if outcome.success[s] {
                sic_success[s] += 1;
            }
        }
    }

    println!("\ndeliveries per slot over {trials} slots:");
    println!(
        "  orthogonal (alternating): sensor 0 {:.4}, sensor 1 {:.4}, total {:.4}",
        oma_success[0] as f64 / trials as f64,
        oma_success[1] as f64 / trials as f64,
        (oma_success[0] + oma_success[1]) as f64 / trials as f64
    );
    println!(
        "  superposed with SIC:      sensor 0 {:.4}, sensor 1 {:.4}, total {:.4}",
        sic_success[0] as f64 / trials as f64,
        sic_success[1] as f64 / trials as f64,
        (sic_success[0] + sic_success[1]) as f64 / trials as f64
    );
    println!("\n(the weak sensor only decodes after the strong one is stripped,");
    println!(" so its success rate is the product of both links' survival)");
    Ok(())
}
