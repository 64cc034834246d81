//! Wick expansion of the bath influence on the lattice of half-step midpoints.
//!
//! `cargo run --release --example wick_expansions`

use frods::bath::{build_table, discretize, LatticeCorrelation, OhmicBathSpec, Site};
use frods::wick::{influence_lattice, lattice_sequence, pairing_count};

fn show(sites: &[Site]) -> String {
    let names: Vec<String> = sites
        .iter()
        .map(|s| format!("{}{}", s.step, if *s == Site::minus(s.step) { "-" } else { "+" }))
        .collect();
    names.join(" ")
}

fn main() -> frods::Result<()> {
    let spec = OhmicBathSpec::new(0.5, 2.5, 5.0);
    let table = build_table(&discretize(&spec)?, &spec, 0.1, 0, 4)?;
    for d in 0..=3 {
        println!("B[d={d}] = {:.6}", table.value(d));
    }
    println!();

    let cases: [(&[u8], &[u8]); 5] = [
        (&[1, 0], &[1, 0]),
        (&[1, 0, 1], &[0, 1, 1]),
        (&[1, 1], &[0, 2]),
        (&[2, 1, 0], &[0, 1, 0]),
        (&[0, 2, 1], &[1, 0, 2]),
    ];
    for (jm, jp) in cases {
        let seq = lattice_sequence(jm, jp);
        let value = influence_lattice(jm, jp, &table, 12)?;
        println!(
            "L({jm:?};{jp:?})  points [{}]  pairings {}  value {value:.6}",
            show(&seq),
            pairing_count(seq.len())
        );
    }

    // a doubled point pairs with itself or splits across two partners
    let (m, p) = (Site::minus, Site::plus);
    let by_hand = 2.0 * table.pair(m(3), m(2)) * table.pair(m(3), p(2))
        + table.pair(m(3), m(3)) * table.pair(m(2), p(2));
    println!("\nby hand: {by_hand:.6}");
    Ok(())
}
