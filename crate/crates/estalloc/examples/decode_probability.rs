//! Finite-blocklength decoding failure: probability versus SNR.
//!
//! Short packets fail with probability Q((C(snr) - r) / sqrt(V(snr) / l))
//! where C is Shannon capacity, V channel dispersion, r = bits / l the rate.
//! Prints the failure curve for the default budget (400 bits over 200
//! symbols, so the knee sits at C(snr) = 2, i.e. snr = 3) and shows what the
//! gain ladder implies at full transmit power.
//!
//! Run with: cargo run --example decode_probability

use estalloc::phy::{decode_failure_prob, LinkBudget};

fn main() -> estalloc::Result<()> {
    let budget = LinkBudget::from_dbm(23.0, -60.0, 400, 200)?;
    println!(
        "budget: p_max = {:.6} mW, noise = {:.0e} mW, rate = {} bits / {} symbols",
        budget.p_max_mw,
        budget.sigma2_mw,
        budget.bits,
        budget.block_len
    );

    println!("\n  snr      failure probability");
    for snr in [0.0, 1.0, 2.0, 2.9, 3.0, 3.1, 4.0, 6.0, 10.0] {
        println!("{snr:>6.2}   {:.12e}", decode_failure_prob(&budget, snr));
    }
    println!("(snr = 3 sits exactly at capacity = rate, so failure = 1/2)");

    println!("\ngain ladder at full power:");
    println!("  gain      snr          failure probability");
    for k in 1..=8 {
        let gain = 10f64.powi(k - 9);
        let snr = gain * budget.p_max_mw / budget.sigma2_mw;
        println!("  1e{:>3}   {snr:>10.4e}   {:.6e}", k - 9, decode_failure_prob(&budget, snr));
    }
    println!("(only the weakest state is unreliable; scheduling around it is the game)");
    Ok(())
}
