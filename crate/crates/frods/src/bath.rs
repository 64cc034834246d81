//! Ohmic harmonic bath: mode discretization, the two-point correlation
//! function and its midpoint-lattice table.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FrodsError, Result};

/// Which half of the Keldysh contour a lattice point sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    /// Negative times, the `U` side.
    Minus,
    /// Positive times, the `U†` side.
    Plus,
}

/// Midpoint lattice point `±(step - 1/2) Δt`, `step >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Site {
    pub step: usize,
    pub branch: Branch,
}

impl Site {
    pub fn minus(step: usize) -> Self {
        Site {
            step,
            branch: Branch::Minus,
        }
    }

    pub fn plus(step: usize) -> Self {
        Site {
            step,
            branch: Branch::Plus,
        }
    }

    pub fn time(&self, dt: f64) -> f64 {
        let t = (self.step as f64 - 0.5) * dt;
        match self.branch {
            Branch::Minus => -t,
            Branch::Plus => t,
        }
    }
}

/// Arc weight between two lattice points.
///
/// `first` is the point that comes first in operator order (minus branch from
/// the latest step down, then plus branch from the earliest step up).
pub trait LatticeCorrelation: Sync {
    fn pair(&self, first: Site, second: Site) -> Complex64;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OhmicBathSpec {
    /// Kondo parameter.
    pub xi: f64,
    pub omega_c: f64,
    pub beta: f64,
    pub n_modes: usize,
    pub omega_max: f64,
}

impl OhmicBathSpec {
    /// Bath with the default discretization `omega_max = 10 omega_c`, 400 modes.
    pub fn new(xi: f64, omega_c: f64, beta: f64) -> Self {
        OhmicBathSpec {
            xi,
            omega_c,
            beta,
            n_modes: 400,
            omega_max: 10.0 * omega_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(FrodsError::invalid(format!("bath.{field}"), reason))
            }
        };
        check(self.xi.is_finite() && self.xi >= 0.0, "xi", "must be finite and >= 0")?;
        check(self.omega_c.is_finite() && self.omega_c > 0.0, "omega_c", "must be > 0")?;
        check(self.beta.is_finite() && self.beta > 0.0, "beta", "must be > 0")?;
        check(self.n_modes >= 1, "n_modes", "must be >= 1")?;
        check(self.omega_max.is_finite() && self.omega_max > 0.0, "omega_max", "must be > 0")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedBath {
    pub omegas: Vec<f64>,
    pub couplings: Vec<f64>,
}

pub fn discretize(spec: &OhmicBathSpec) -> Result<DiscretizedBath> {
    spec.validate()?;
    let l = spec.n_modes as f64;
    let span = 1.0 - (-spec.omega_max / spec.omega_c).exp();
    let cscale = (spec.xi * spec.omega_c * span / l).sqrt();
    let mut omegas = Vec::with_capacity(spec.n_modes);
    let mut couplings = Vec::with_capacity(spec.n_modes);
    for j in 1..=spec.n_modes {
        let w = if j == spec.n_modes {
            spec.omega_max
        } else {
            -spec.omega_c * (1.0 - (j as f64 / l) * span).ln()
        };
        omegas.push(w);
        couplings.push(w * cscale);
    }
    Ok(DiscretizedBath { omegas, couplings })
}

fn coth_half(beta: f64, w: f64) -> f64 {
    let x = 0.5 * beta * w;
    // tanh(x) == 1 in double precision well before this
    if x > 20.0 {
        1.0
    } else {
        1.0 / x.tanh()
    }
}

impl DiscretizedBath {
    /// `B` as a function of `Δτ = |τ1| - |τ2|`.
    pub fn correlation_at(&self, beta: f64, dtau: f64) -> Result<Complex64> {
        let mut re = 0.0;
        let mut im = 0.0;
        for (&w, &c) in self.omegas.iter().zip(&self.couplings) {
            if w == 0.0 {
                return Err(FrodsError::invalid("bath.omegas", "zero-frequency mode"));
            }
            let amp = c * c / w;
            let (s, co) = (w * dtau).sin_cos();
            re += amp * coth_half(beta, w) * co;
            im -= amp * s;
        }
        Ok(Complex64::new(0.5 * re, 0.5 * im))
    }
}

pub fn correlation(
    bath: &DiscretizedBath,
    spec: &OhmicBathSpec,
    tau1: f64,
    tau2: f64,
) -> Result<Complex64> {
    bath.correlation_at(spec.beta, tau1.abs() - tau2.abs())
}

/// Correlation values on the midpoint lattice, indexed by `d = |r| - |r'|`.
#[derive(Clone, Debug, PartialEq)]
pub struct BathTable {
    pub dt: f64,
    /// Memory length in steps; 0 disables truncation.
    pub k_max: usize,
    span: usize,
    values: Vec<Complex64>,
}

impl BathTable {
    /// Table from explicit values for `d = -span..=span`.
    pub fn from_values(dt: f64, k_max: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() % 2 != 1 {
            return Err(FrodsError::invalid("table", "needs an odd number of offsets"));
        }
        let span = values.len() / 2;
        let mut t = BathTable {
            dt,
            k_max,
            span,
            values,
        };
        if k_max > 0 {
            for d in (k_max + 1)..=span {
                t.values[span + d] = Complex64::new(0.0, 0.0);
                t.values[span - d] = Complex64::new(0.0, 0.0);
            }
        }
        Ok(t)
    }

    /// Largest stored `|d|`.
    pub fn span(&self) -> usize {
        self.span
    }

    pub fn value(&self, d: i64) -> Complex64 {
        let a = d.unsigned_abs() as usize;
        if self.k_max > 0 && a > self.k_max {
            return Complex64::new(0.0, 0.0);
        }
        assert!(
            a <= self.span,
            "offset {d} outside the table span {}",
            self.span
        );
        self.values[(self.span as i64 + d) as usize]
    }

    /// Same values with a (new) memory cut applied.
    pub fn truncated(&self, k_max: usize) -> BathTable {
        BathTable::from_values(self.dt, k_max, self.values.clone()).expect("odd length")
    }
}

impl LatticeCorrelation for BathTable {
    fn pair(&self, first: Site, second: Site) -> Complex64 {
        // the three sign cases coincide for a stationary bath: only |τ1| - |τ2| enters
        self.value(first.step as i64 - second.step as i64)
    }
}

/// Tabulates `B` for offsets `|d| <= max_offset` (capped at `k_max` when truncating).
pub fn build_table(
    bath: &DiscretizedBath,
    spec: &OhmicBathSpec,
    dt: f64,
    k_max: usize,
    max_offset: usize,
) -> Result<BathTable> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(FrodsError::invalid("numerics.dt", "must be > 0"));
    }
    let span = if k_max > 0 {
        k_max.min(max_offset)
    } else {
        max_offset
    };
    let mut values = Vec::with_capacity(2 * span + 1);
    for d in -(span as i64)..=(span as i64) {
        values.push(bath.correlation_at(spec.beta, d as f64 * dt)?);
    }
    BathTable::from_values(dt, k_max, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_spec() -> OhmicBathSpec {
        OhmicBathSpec {
            xi: 0.4,
            omega_c: 2.5,
            beta: 5.0,
            n_modes: 400,
            omega_max: 25.0,
        }
    }

    #[derive(Default)]
    struct Neumaier {
        sum: f64,
        comp: f64,
    }

    impl Neumaier {
        fn add(&mut self, x: f64) {
            let t = self.sum + x;
            if self.sum.abs() >= x.abs() {
                self.comp += (self.sum - t) + x;
            } else {
                self.comp += (x - t) + self.sum;
            }
            self.sum = t;
        }
        fn value(&self) -> f64 {
            self.sum + self.comp
        }
    }

    fn compensated_correlation(spec: &OhmicBathSpec, dtau: f64) -> Complex64 {
        let b = discretize(spec).unwrap();
        let (mut re, mut im) = (Neumaier::default(), Neumaier::default());
        for (&w, &c) in b.omegas.iter().zip(&b.couplings) {
            let coth = (0.5 * spec.beta * w).cosh() / (0.5 * spec.beta * w).sinh();
            re.add(0.5 * c * c / w * coth * (w * dtau).cos());
            im.add(-0.5 * c * c / w * (w * dtau).sin());
        }
        Complex64::new(re.value(), im.value())
    }

    #[test]
    fn last_mode_is_omega_max() {
        let b = discretize(&reference_spec()).unwrap();
        assert_relative_eq!(*b.omegas.last().unwrap(), 25.0, max_relative = 1e-15);
        let spec = OhmicBathSpec {
            n_modes: 37,
            omega_max: 3.3,
            ..reference_spec()
        };
        assert_relative_eq!(*discretize(&spec).unwrap().omegas.last().unwrap(), 3.3);
    }

    #[test]
    fn zero_coupling_bath() {
        let spec = OhmicBathSpec {
            xi: 0.0,
            ..reference_spec()
        };
        let b = discretize(&spec).unwrap();
        assert!(b.couplings.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn first_mode_against_high_precision() {
        // 40-digit evaluation of the same formulas
        let b = discretize(&reference_spec()).unwrap();
        assert_relative_eq!(b.omegas[0], 0.006257541084599711956, max_relative = 1e-13);
        assert_relative_eq!(b.couplings[0], 0.0003128699518512296414, max_relative = 1e-13);
    }

    #[test]
    fn frequencies_increase_and_couplings_nonnegative() {
        let b = discretize(&reference_spec()).unwrap();
        assert!(b.omegas.windows(2).all(|w| w[0] < w[1]));
        assert!(b.couplings.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn equal_times_give_real_value() {
        let spec = reference_spec();
        let b = discretize(&spec).unwrap();
        let v = correlation(&b, &spec, -0.35, 0.35).unwrap();
        assert_eq!(v.im, 0.0);
        assert_relative_eq!(v.re, 1.2919370309212687368, max_relative = 1e-12);
    }

    #[test]
    fn swapping_times_conjugates() {
        let spec = reference_spec();
        let b = discretize(&spec).unwrap();
        for &(t1, t2) in &[(0.1, 0.7), (-1.3, 0.2), (-0.4, -2.0)] {
            let a = correlation(&b, &spec, t1, t2).unwrap();
            let c = correlation(&b, &spec, t2, t1).unwrap();
            assert_eq!(a, c.conj());
        }
    }

    #[test]
    fn correlation_matches_compensated_sum() {
        let spec = reference_spec();
        let b = discretize(&spec).unwrap();
        let v = b.correlation_at(spec.beta, 0.05).unwrap();
        let w = compensated_correlation(&spec, 0.05);
        assert!((v - w).norm() <= 1e-13 * w.norm());
        // 40-digit reference
        let hp = Complex64::new(1.2191007951243728519, -0.3222016568854858266);
        assert!((v - hp).norm() <= 1e-12 * hp.norm());
    }

    #[test]
    fn cold_bath_coth_saturates() {
        let spec = OhmicBathSpec {
            beta: 1e6,
            ..reference_spec()
        };
        let b = discretize(&spec).unwrap();
        let v = b.correlation_at(spec.beta, 0.3).unwrap();
        assert!(v.re.is_finite() && v.im.is_finite());
    }

    #[test]
    fn table_without_truncation_keeps_everything() {
        let spec = reference_spec();
        let b = discretize(&spec).unwrap();
        let t = build_table(&b, &spec, 0.1, 0, 40).unwrap();
        for d in -40..=40 {
            assert!(t.value(d).norm() > 0.0);
        }
    }

    #[test]
    fn truncated_entries_vanish_and_boundary_survives() {
        let spec = reference_spec();
        let b = discretize(&spec).unwrap();
        let t = build_table(&b, &spec, 0.1, 5, 40).unwrap();
        assert_eq!(t.value(6), Complex64::new(0.0, 0.0));
        assert_eq!(t.value(-6), Complex64::new(0.0, 0.0));
        assert_eq!(t.value(39), Complex64::new(0.0, 0.0));
        assert!(t.value(5).norm() > 0.0);
        assert_eq!(t.truncated(5), t);
    }

    #[test]
    fn lattice_pair_two_minus_one_plus() {
        let spec = reference_spec();
        let b = discretize(&spec).unwrap();
        let dt = 0.05;
        let t = build_table(&b, &spec, dt, 0, 4).unwrap();
        let direct = correlation(&b, &spec, -1.5 * dt, 0.5 * dt).unwrap();
        let v = t.pair(Site::minus(2), Site::plus(1));
        assert!((v - direct).norm() <= 1e-15 * direct.norm());
        let hp = Complex64::new(1.2191007951243728519, -0.3222016568854858266);
        assert!((v - hp).norm() <= 1e-12 * hp.norm());
        assert_eq!(Site::minus(2).time(dt), -1.5 * dt);
    }

    #[test]
    fn table_is_hermitian_in_offset() {
        let spec = reference_spec();
        let b = discretize(&spec).unwrap();
        let t = build_table(&b, &spec, 0.025, 0, 32).unwrap();
        for d in 0..=32 {
            assert_eq!(t.value(d), t.value(-d).conj());
        }
    }

    #[test]
    fn decay_sanity_is_reported() {
        let spec = OhmicBathSpec::new(0.4, 2.5, 5.0);
        let b = discretize(&spec).unwrap();
        let t = build_table(&b, &spec, 0.1, 0, 15).unwrap();
        let mags: Vec<f64> = (0..=15).map(|d| t.value(d).norm()).collect();
        let violations: Vec<usize> = (1..mags.len()).filter(|&d| mags[d] > mags[d - 1]).collect();
        if !violations.is_empty() {
            eprintln!("|B(d)| not monotone at offsets {violations:?}");
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for spec in [
            OhmicBathSpec { xi: -0.1, ..reference_spec() },
            OhmicBathSpec { omega_c: 0.0, ..reference_spec() },
            OhmicBathSpec { beta: -1.0, ..reference_spec() },
            OhmicBathSpec { n_modes: 0, ..reference_spec() },
            OhmicBathSpec { omega_max: 0.0, ..reference_spec() },
        ] {
            assert!(discretize(&spec).is_err());
        }
    }
}
