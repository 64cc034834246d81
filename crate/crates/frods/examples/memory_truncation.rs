//! Effect of the memory length K on <sigma_z>(t).
//!
//! `cargo run --release --example memory_truncation`

use frods::bath::OhmicBathSpec;
use frods::dyson::Order;
use frods::sim::{truncation_sweep, Numerics, ObservableKind, RunSpec};
use frods::system::spin_boson;

fn main() -> frods::Result<()> {
    let base = RunSpec {
        model: spin_boson(0.0, 1.0),
        bath: OhmicBathSpec::new(0.4, 2.5, 5.0),
        numerics: Numerics {
            dt: 0.1,
            n_steps: 40,
            order: Order::Second,
            k_max: 0,
            d_max: Some(3),
            threads: 1,
        },
    };
    let ks = [3, 5, 7, 9];
    let sweep = truncation_sweep(&base, &ks, &[ObservableKind::SigmaZ], "sigma_z")?;
    for (k, run) in sweep.k_max.iter().zip(&sweep.runs) {
        println!("K={k:<2} sigma_z(4.0) = {:.6}", run.series("sigma_z").unwrap().last().unwrap());
    }
    for (w, d) in ks.windows(2).zip(&sweep.sup_diffs) {
        println!("sup |K={} - K={}| = {d:.3e}", w[1], w[0]);
    }
    Ok(())
}
