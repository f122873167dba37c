//! From actor outputs to resource allocations.
//!
//! The actor emits one unconstrained "virtual action" vector; a fixed
//! per-scenario decoder turns it into a legal allocation. This example walks
//! the three decoders on hand-picked vectors.
//!
//! Run with: cargo run --example action_mapping

use estalloc::actions::{
    actor_output_dim, bits_per_sensor, map_scenario1, map_scenario2, map_scenario3, virtual_dim,
    Scenario,
};

fn main() -> estalloc::Result<()> {
    let (n, m) = (4, 2);
    let p_max = 100.0;

    println!("virtual widths for N = {n}, M = {m}:");
    for s in [Scenario::Oma, Scenario::SicNoma, Scenario::IrcNoma] {
        println!(
            "  scenario {}: virtual dim {:>2}, actor output {:>2} (means + stds)",
            s.number(),
            virtual_dim(s, n, m),
            actor_output_dim(s, n, m)
        );
    }

    // Scenario 1: one score per sensor; the top M scores claim channels in
    // rank order. Only relative order matters.
    let v1 = [0.3, 0.9, 0.3, -0.5];
    println!("\nscenario 1, scores {v1:?}:");
    println!("  {:?}", map_scenario1(&v1, n, m)?);
    println!("  (sensor 1 ranks first -> channel 0; the 0.3 tie breaks to sensor 0)");

    // Scenario 2: per sensor, ceil(log2(M+1)) sign bits select idle or a
    // channel, then one power entry per sensor.
    let bits = bits_per_sensor(m);
    println!("\nscenario 2 uses {bits} selection bits per sensor (idle or channel 1..{m})");
    let v2 = [
        0.7, 0.2, // sensor 0: bits (+,+) -> 3 > M -> idle
        -0.4, 0.8, // sensor 1: bits (-,+) -> channel 1
        0.5, -0.1, // sensor 2: bits (+,-) -> channel 2
        -0.2, -0.9, // sensor 3: bits (-,-) -> 0 -> idle
        1.0, 0.0, -1.0, 0.5, // powers: full, half, zero, three-quarter
    ];
    println!("scenario 2, {v2:?}:");
    println!("  {:?}", map_scenario2(&v2, n, m, p_max)?);

    // Scenario 3: per sensor, M channel weights and one total-power entry;
    // the row spreads the total proportionally to the weights.
    let v3 = [
        1.0, 0.0, 1.0, // sensor 0: weights 1.0 and 0.5 of a full budget
        -1.0, 1.0, 0.0, // sensor 1: everything on channel 2, half budget
        1.0, 1.0, -1.0, // sensor 2: equal weights but zero total -> idle
        -1.0, -1.0, 1.0, // sensor 3: zero weights -> idle despite full total
    ];
    println!("\nscenario 3, {v3:?}:");
    match map_scenario3(&v3, n, m, p_max)? {
        estalloc::ResourceAction::PowerMatrix { power_mw } => {
            println!("  power matrix (mW):\n{power_mw:.3}")
        }
        other => println!("  {other:?}"),
    }
    println!("  (rows never exceed the {p_max} mW budget; zero-weight rows stay silent)");
    Ok(())
}
