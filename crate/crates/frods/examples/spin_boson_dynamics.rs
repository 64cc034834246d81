//! Spin-boson relaxation at weak and strong coupling, printed as CSV.
//!
//! `cargo run --release --example spin_boson_dynamics [threads]`

use frods::bath::OhmicBathSpec;
use frods::cli::write_csv;
use frods::dyson::Order;
use frods::sim::{simulate, Numerics, ObservableKind, RunSpec};
use frods::system::spin_boson;

fn main() -> frods::Result<()> {
    let threads = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    for xi in [0.1, 0.6] {
        let spec = RunSpec {
            model: spin_boson(0.0, 1.0),
            bath: OhmicBathSpec::new(xi, 2.5, 5.0),
            numerics: Numerics {
                dt: 0.1,
                n_steps: 40,
                order: Order::Second,
                k_max: 8,
                d_max: Some(4),
                threads,
            },
        };
        let result = simulate(&spec, &[ObservableKind::SigmaZ], |s| {
            if s.step % 10 == 0 {
                eprintln!("xi={xi} {s}");
            }
        })?;
        println!("# xi = {xi}");
        write_csv(&mut std::io::stdout().lock(), &result)?;
    }
    Ok(())
}
