//! How many bold diagrams the engine keeps per step, and what that costs.
//!
//! `cargo run --release --example diagram_counts`

use frods::bath::OhmicBathSpec;
use frods::dyson::Order;
use frods::engine::{diagram_count, first_order_count, projected_max_keys};
use frods::sim::{simulate, Numerics, RunSpec};
use frods::system::spin_boson;

fn main() -> frods::Result<()> {
    println!("d_max  k_max  second order  first order");
    for d in 1..=5 {
        for k in [5, 10, 20] {
            println!("{d:>5}  {k:>5}  {:>12}  {:>11}", diagram_count(d, k), first_order_count(d, k));
        }
    }

    let spec = RunSpec {
        model: spin_boson(0.0, 1.0),
        bath: OhmicBathSpec::new(0.4, 2.5, 5.0),
        numerics: Numerics {
            dt: 0.1,
            n_steps: 16,
            order: Order::Second,
            k_max: 6,
            d_max: Some(3),
            threads: 1,
        },
    };
    println!("\nprojected keys: {}", projected_max_keys(&spec.numerics.settings(), 16)?);
    simulate(&spec, &[], |s| println!("{s}"))?;
    Ok(())
}
