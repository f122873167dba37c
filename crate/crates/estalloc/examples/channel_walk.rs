//! Markov block fading: per-channel chains, the joint state, and long-run
//! occupancy.
//!
//! One sensor with two channels, each a 3-state chain. Walks the joint chain,
//! compares empirical occupancy to the stationary distribution of the
//! materialized joint transition matrix, and shows the mixed-radix encoding.
//!
//! Run with: cargo run --example channel_walk

use estalloc::channel::{ChannelStateSpace, MarkovChannelModel};
use estalloc::rng::{stream, STREAM_ENV_CHANNEL, STREAM_INSTANCE};

fn main() -> estalloc::Result<()> {
    let space = ChannelStateSpace::new(vec![1e-3, 1e-2, 1e-1], 2)?;
    let mut gen_rng = stream(42, STREAM_INSTANCE);
    let mut chain = MarkovChannelModel::generate_random(space.h(), space.m_channels, &mut gen_rng)?;

    println!("per-channel transition matrices:");
    for (m, t) in chain.per_channel().iter().enumerate() {
        println!("channel {m}:\n{t:.4}");
    }

    let joint = chain.joint_transition(4096)?;
    println!("joint space size: {} states", joint.nrows());
    println!("joint state index = digit(channel 1) + 3 * digit(channel 2)");

    // Stationary distribution by power iteration on the transpose.
    let h_joint = joint.nrows();
    let mut pi = vec![1.0 / h_joint as f64; h_joint];
    for _ in 0..10_000 {
        let mut next = vec![0.0; h_joint];
        for (i, &p) in pi.iter().enumerate() {
            for j in 0..h_joint {
                next[j] += p * joint[(i, j)];
            }
        }
        pi = next;
    }

    // Empirical occupancy along one long walk.
    let mut walk_rng = stream(42, STREAM_ENV_CHANNEL);
    chain.reset_uniform(&mut walk_rng);
    let steps = 200_000;
    let mut counts = vec![0usize; h_joint];
    for _ in 0..steps {
        chain.step(&mut walk_rng);
        counts[space.encode(chain.state())?] += 1;
    }

    println!("\njoint state   gains (ch1, ch2)    stationary    empirical");
    for s in 0..h_joint {
        let gains = space.gains_of(s)?;
        println!(
            "{s:>11}   ({:>6.0e}, {:>6.0e})   {:>9.5}    {:>9.5}",
            gains[0],
            gains[1],
            pi[s],
            counts[s] as f64 / steps as f64
        );
    }
    Ok(())
}
