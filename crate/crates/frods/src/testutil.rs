//! Random instances shared by the unit tests.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bath::{BathTable, Branch, LatticeCorrelation, Site};
use crate::linops::ComplexMatrix;
use crate::system::{build_propagators, PropagatorSet, SystemModel};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let a = random_matrix(rng, n);
    (&a + &a.adjoint()).scale(c(0.5, 0.0))
}

pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let a = random_matrix(rng, n);
    let r = &a * &a.adjoint();
    let tr = r.trace();
    r.scale(tr.inv())
}

/// Stationary table with `value(-d) = conj(value(d))` and a real `value(0)`.
pub fn random_table(rng: &mut ChaCha8Rng, span: usize, k_max: usize) -> BathTable {
    let mut half: Vec<Complex64> = (0..=span)
        .map(|_| c(rng.gen_range(-0.5..1.0), rng.gen_range(-0.5..0.5)))
        .collect();
    half[0].im = 0.0;
    let mut values: Vec<Complex64> = half[1..].iter().rev().map(|v| v.conj()).collect();
    values.extend_from_slice(&half);
    BathTable::from_values(0.1, k_max, values).unwrap()
}

pub struct Setup {
    pub model: SystemModel,
    pub props: PropagatorSet,
    pub table: BathTable,
}

pub fn random_setup(seed: u64, dim: usize, dt: f64, span: usize) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_hermitian(&mut rng, dim);
    let w = random_hermitian(&mut rng, dim);
    let rho = random_density(&mut rng, dim);
    let model = SystemModel::custom(h, w, rho).unwrap();
    let props = build_propagators(&model, dt).unwrap();
    let table = random_table(&mut rng, span, 0);
    Setup { model, props, table }
}

/// Unrelated random weight for every ordered pair of lattice points.
pub struct Scrambled(pub u64);

impl LatticeCorrelation for Scrambled {
    fn pair(&self, a: Site, b: Site) -> Complex64 {
        let code = |s: Site| 2 * s.step as u64 + u64::from(s.branch == Branch::Plus);
        let mut rng = ChaCha8Rng::seed_from_u64(self.0 ^ (code(a) * 1_000_003 + code(b) * 7919));
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }
}
