//! Observed time-step order of <sigma_z>(T) from runs at dt, 2 dt and 4 dt.
//!
//! `cargo run --release --example convergence_order`

use frods::bath::OhmicBathSpec;
use frods::dyson::Order;
use frods::sim::{order_from_runs, simulate, Numerics, ObservableKind, RunResult, RunSpec};
use frods::system::spin_boson;

fn run(order: Order, dt: f64) -> frods::Result<RunResult> {
    let spec = RunSpec {
        model: spin_boson(0.0, 1.0),
        bath: OhmicBathSpec::new(0.2, 2.5, 5.0),
        numerics: Numerics {
            dt,
            n_steps: (0.8 / dt).round() as usize,
            order,
            k_max: 0,
            d_max: Some(4),
            threads: 1,
        },
    };
    simulate(&spec, &[ObservableKind::SigmaZ], |_| {})
}

fn main() -> frods::Result<()> {
    for order in [Order::First, Order::Second] {
        let runs = [0.05, 0.1, 0.2].map(|dt| run(order, dt));
        let [fine, mid, coarse] = runs;
        let (fine, mid, coarse) = (fine?, mid?, coarse?);
        let z = |r: &RunResult| *r.series("sigma_z").unwrap().last().unwrap();
        println!(
            "order {}: sigma_z(0.8) = {:.8} / {:.8} / {:.8},  p = {:.3}",
            order.as_int(),
            z(&coarse),
            z(&mid),
            z(&fine),
            order_from_runs(&fine, &mid, &coarse, "sigma_z")?
        );
    }
    Ok(())
}
