//! Seven-level chain started in an equal mixture of its two ends.
//!
//! `cargo run --release --example multilevel_symmetry`

use frods::bath::OhmicBathSpec;
use frods::dyson::Order;
use frods::sim::{simulate, Numerics, ObservableKind, RunSpec};
use frods::system::{multilevel, symmetric_end_mixture};

fn main() -> frods::Result<()> {
    let m = 7;
    let spec = RunSpec {
        model: multilevel(m, 1.0)?.with_rho0(symmetric_end_mixture(m))?,
        bath: OhmicBathSpec::new(0.4, 5.0, 5.0),
        numerics: Numerics {
            dt: 0.1,
            n_steps: 30,
            order: Order::Second,
            k_max: 8,
            d_max: Some(3),
            threads: 1,
        },
    };
    let result = simulate(&spec, &[ObservableKind::Populations], |_| {})?;
    let pops: Vec<&[f64]> = (1..=m).map(|i| result.series(&format!("P_{i}")).unwrap()).collect();
    for k in (0..result.times.len()).step_by(5) {
        let row: Vec<String> = pops.iter().map(|p| format!("{:.4}", p[k])).collect();
        let mirror = (0..m).map(|i| (pops[i][k] - pops[m - 1 - i][k]).abs()).fold(0.0, f64::max);
        println!("t={:.1}  {}  mirror defect {mirror:.1e}", result.times[k], row.join(" "));
    }
    println!("largest Hermiticity defect {:.2e}", result.max_herm_defect());
    Ok(())
}
