//! Truncated Dyson series of a closed four-level system against the exact propagator.
//!
//! `cargo run --release --example closed_system_orders`

use frods::dyson::{closed_un_factored, ClosedSystem, Order};
use frods::linops::ComplexMatrix;
use num_complex::Complex64;

fn main() -> frods::Result<()> {
    let n = 4;
    let h0 = ComplexMatrix::from_fn(n, |i, j| match (i as i64 - j as i64).abs() {
        0 => Complex64::new(0.3 * i as f64 - 0.45, 0.0),
        1 => Complex64::new(0.2, 0.0),
        _ => Complex64::new(0.0, 0.0),
    });
    let w = ComplexMatrix::from_fn(n, |i, j| {
        if i == j {
            Complex64::new(if i % 2 == 0 { 0.5 } else { -0.5 }, 0.0)
        } else if i + 1 == j {
            Complex64::new(0.0, 0.1)
        } else if j + 1 == i {
            Complex64::new(0.0, -0.1)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });

    for (order, pruned, label) in [
        (Order::First, false, "first order"),
        (Order::Second, false, "second order, all terms"),
        (Order::Second, true, "second order, pruned"),
    ] {
        println!("{label}");
        let mut last: Option<f64> = None;
        for dt in [0.2, 0.1, 0.05, 0.025] {
            let steps = (1.0 / dt as f64).round() as usize;
            let sys = ClosedSystem::new(h0.clone(), w.clone(), dt, order)?;
            let err = (&closed_un_factored(&sys, steps, pruned)? - &sys.exact(1.0)?).op_norm_estimate();
            match last {
                Some(prev) => println!("  dt={dt:<6} error={err:.3e}  p={:.3}", (prev / err).log2()),
                None => println!("  dt={dt:<6} error={err:.3e}"),
            }
            last = Some(err);
        }
    }
    Ok(())
}
