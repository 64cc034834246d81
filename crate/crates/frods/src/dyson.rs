//! Reference sums of the discrete Dyson series.
//!
//! Everything here enumerates index tuples explicitly and is meant for small
//! step counts only; the iterative engine is validated against these sums.

use num_complex::Complex64;

use crate::bath::{LatticeCorrelation, Site};
use crate::error::{FrodsError, Result};
use crate::linops::{check_hermitian, herm_exp, ComplexMatrix};
use crate::system::PropagatorSet;
use crate::wick::{for_each_pairing, lattice_sequence, sum_over_pairings, DEFAULT_MAX_POINTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn from_int(k: i64) -> Result<Self> {
        match k {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(FrodsError::invalid("numerics.order", "must be 1 or 2")),
        }
    }

    pub fn as_int(self) -> u8 {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }

    fn max_index(self) -> u8 {
        self.as_int()
    }
}

/// Step caps for the enumerating oracles.
#[derive(Clone, Copy, Debug)]
pub struct OracleLimits {
    pub closed_steps: usize,
    pub first_order_steps: usize,
    pub second_order_steps: usize,
    pub max_points: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            closed_steps: 14,
            first_order_steps: 4,
            second_order_steps: 3,
            max_points: DEFAULT_MAX_POINTS,
        }
    }
}

/// `H = H_0 + W` split for the closed-system series.
#[derive(Clone, Debug)]
pub struct ClosedSystem {
    pub h0: ComplexMatrix,
    pub w: ComplexMatrix,
    pub dt: f64,
    pub order: Order,
}

impl ClosedSystem {
    pub fn new(h0: ComplexMatrix, w: ComplexMatrix, dt: f64, order: Order) -> Result<Self> {
        check_hermitian(&h0)?;
        if h0.dim() != w.dim() {
            return Err(FrodsError::DimensionMismatch {
                left: h0.dim(),
                right: w.dim(),
            });
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(FrodsError::invalid("dt", "must be > 0"));
        }
        Ok(ClosedSystem { h0, w, dt, order })
    }

    /// Per-step factors `E (-iΔt W)^j / j! E` for `j = 0..=order`.
    fn factors(&self) -> Result<Vec<ComplexMatrix>> {
        let n = self.h0.dim();
        let half = herm_exp(&self.h0, Complex64::new(0.0, -self.dt / 2.0))?;
        let a = self.w.scale(Complex64::new(0.0, -self.dt));
        let mut power = ComplexMatrix::identity(n);
        let mut out = Vec::new();
        for j in 0..=self.order.max_index() {
            if j > 0 {
                power = (&power * &a).scale(Complex64::new(1.0 / f64::from(j), 0.0));
            }
            out.push(&(&half * &power) * &half);
        }
        Ok(out)
    }

    /// `exp(-i (H_0 + W) t)`
    pub fn exact(&self, t: f64) -> Result<ComplexMatrix> {
        let h = &self.h0 + &self.w;
        herm_exp(&h, Complex64::new(0.0, -t))
    }
}

/// `U_n` (or `Û_n` when `pruned`) by explicit enumeration of index tuples.
pub fn closed_un(
    sys: &ClosedSystem,
    n: usize,
    pruned: bool,
    limits: &OracleLimits,
) -> Result<ComplexMatrix> {
    if n > limits.closed_steps {
        return Err(FrodsError::OracleLimit(format!(
            "{n} steps exceed the closed-system cap of {}",
            limits.closed_steps
        )));
    }
    let f = sys.factors()?;
    let dim = sys.h0.dim();
    let mut total = ComplexMatrix::zeros(dim);
    let twos_allowed = if pruned && sys.order == Order::Second { 1 } else { n };
    closed_rec(&f, n, twos_allowed, ComplexMatrix::identity(dim), &mut total);
    Ok(total)
}

fn closed_rec(
    f: &[ComplexMatrix],
    remaining: usize,
    twos_left: usize,
    prefix: ComplexMatrix,
    total: &mut ComplexMatrix,
) {
    if remaining == 0 {
        *total += &prefix;
        return;
    }
    for (j, fj) in f.iter().enumerate() {
        let twos = if j == 2 {
            if twos_left == 0 {
                continue;
            }
            twos_left - 1
        } else {
            twos_left
        };
        closed_rec(f, remaining - 1, twos, fj * &prefix, total);
    }
}

/// Same sums as [`closed_un`] by resumming the tuple sum step by step.
pub fn closed_un_factored(sys: &ClosedSystem, n: usize, pruned: bool) -> Result<ComplexMatrix> {
    let f = sys.factors()?;
    let dim = sys.h0.dim();
    let no_two = &f[0] + &f[1];
    if sys.order == Order::First || !pruned {
        let mut step = no_two;
        if sys.order == Order::Second {
            step += &f[2];
        }
        let mut u = ComplexMatrix::identity(dim);
        for _ in 0..n {
            u = &step * &u;
        }
        return Ok(u);
    }
    // a: tuples without a 2, b: tuples with exactly one 2
    let mut a = ComplexMatrix::identity(dim);
    let mut b = ComplexMatrix::zeros(dim);
    for _ in 0..n {
        let nb = &(&no_two * &b) + &(&f[2] * &a);
        a = &no_two * &a;
        b = nb;
    }
    Ok(&a + &b)
}

fn p_by_index(props: &PropagatorSet, j: u8) -> (&ComplexMatrix, &ComplexMatrix) {
    match j {
        0 => (&props.p0, &props.p0d),
        1 => (&props.p1, &props.p1d),
        _ => (&props.p2, &props.p2d),
    }
}

/// Every tuple in `{0..=max}^n`, first entry fastest.
fn tuples(n: usize, max: u8) -> Vec<Vec<u8>> {
    let base = usize::from(max) + 1;
    let total = base.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let d = (code % base) as u8;
                    code /= base;
                    d
                })
                .collect()
        })
        .collect()
}

/// Left factors `P_{j_n} ... P_{j_1}` and right factors `P†_{j_1} ... P†_{j_n}`
/// for every tuple `(j_1, ..., j_n)`.
fn branch_products(
    props: &PropagatorSet,
    n: usize,
    max: u8,
) -> Vec<(Vec<u8>, ComplexMatrix, ComplexMatrix)> {
    let dim = props.dim();
    tuples(n, max)
        .into_iter()
        .map(|t| {
            let mut left = ComplexMatrix::identity(dim);
            let mut right = ComplexMatrix::identity(dim);
            for &j in &t {
                let (p, pd) = p_by_index(props, j);
                left = p * &left;
                right = &right * pd;
            }
            (t, left, right)
        })
        .collect()
}

fn check_oracle_dims(props: &PropagatorSet, rho0: &ComplexMatrix) -> Result<()> {
    if props.dim() != rho0.dim() {
        return Err(FrodsError::DimensionMismatch {
            left: props.dim(),
            right: rho0.dim(),
        });
    }
    Ok(())
}

/// Sum over index tuples with a per-tuple weight; `weight` receives
/// `(j_{n-}, ..., j_{1-})` and `(j_{1+}, ..., j_{n+})`.
fn tuple_sum(
    props: &PropagatorSet,
    rho0: &ComplexMatrix,
    n: usize,
    max: u8,
    mut weight: impl FnMut(&[u8], &[u8]) -> Result<Option<Complex64>>,
) -> Result<ComplexMatrix> {
    check_oracle_dims(props, rho0)?;
    let products = branch_products(props, n, max);
    let mut total = ComplexMatrix::zeros(rho0.dim());
    for (jm, left, _) in &products {
        let left_rho = left * rho0;
        let j_minus: Vec<u8> = jm.iter().rev().copied().collect();
        let minus_sum: u32 = jm.iter().map(|&v| u32::from(v)).sum();
        for (jp, _, right) in &products {
            let plus_sum: u32 = jp.iter().map(|&v| u32::from(v)).sum();
            if (minus_sum + plus_sum) % 2 == 1 {
                continue;
            }
            if let Some(w) = weight(&j_minus, jp)? {
                if w.re != 0.0 || w.im != 0.0 {
                    total += &(&left_rho * right).scale(w);
                }
            }
        }
    }
    Ok(total)
}

fn check_steps(n: usize, cap: usize, what: &str) -> Result<()> {
    if n > cap {
        Err(FrodsError::OracleLimit(format!(
            "{n} steps exceed the {what} cap of {cap}"
        )))
    } else {
        Ok(())
    }
}

fn full_influence(
    j_minus: &[u8],
    j_plus: &[u8],
    corr: &impl LatticeCorrelation,
    cap: usize,
) -> Result<Complex64> {
    let seq = lattice_sequence(j_minus, j_plus);
    if seq.len() > cap {
        return Err(FrodsError::OracleLimit(format!(
            "{} points exceed the pairing cap of {cap}",
            seq.len()
        )));
    }
    Ok(sum_over_pairings(seq.len(), |i, j| corr.pair(seq[i], seq[j])))
}

/// First-order reduced density matrix after `n` steps, summed over `{0,1}^{2n}`.
pub fn direct_rho_first(
    props: &PropagatorSet,
    rho0: &ComplexMatrix,
    corr: &impl LatticeCorrelation,
    n: usize,
    limits: &OracleLimits,
) -> Result<ComplexMatrix> {
    check_steps(n, limits.first_order_steps, "first-order oracle")?;
    tuple_sum(props, rho0, n, 1, |jm, jp| {
        full_influence(jm, jp, corr, limits.max_points).map(Some)
    })
}

/// Second-order reduced density matrix after `n` steps; with `pruned`, only
/// tuples holding at most one index 2 enter.
pub fn direct_rho_second(
    props: &PropagatorSet,
    rho0: &ComplexMatrix,
    corr: &impl LatticeCorrelation,
    n: usize,
    pruned: bool,
    limits: &OracleLimits,
) -> Result<ComplexMatrix> {
    check_steps(n, limits.second_order_steps, "second-order oracle")?;
    tuple_sum(props, rho0, n, 2, |jm, jp| {
        let twos = jm.iter().chain(jp).filter(|&&v| v == 2).count();
        if pruned && twos > 1 {
            return Ok(None);
        }
        full_influence(jm, jp, corr, limits.max_points).map(Some)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Single,
    /// First half-step of a double insertion (the factor next to ρ).
    Inner,
    /// Second half-step of a double insertion.
    Outer,
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    site: Site,
    /// Extension order position: 2(step - 1) for minus sites, 2(step - 1) + 1 for plus sites.
    pos: usize,
    role: Role,
}

fn slots_for(j_minus: &[u8], j_plus: &[u8]) -> Vec<Slot> {
    let n = j_minus.len();
    let mut out = Vec::new();
    for (i, &v) in j_minus.iter().enumerate() {
        let step = n - i;
        let pos = 2 * (step - 1);
        let site = Site::minus(step);
        match v {
            1 => out.push(Slot { site, pos, role: Role::Single }),
            2 => {
                out.push(Slot { site, pos, role: Role::Outer });
                out.push(Slot { site, pos, role: Role::Inner });
            }
            _ => {}
        }
    }
    for (i, &v) in j_plus.iter().enumerate() {
        let step = i + 1;
        let pos = 2 * (step - 1) + 1;
        let site = Site::plus(step);
        match v {
            1 => out.push(Slot { site, pos, role: Role::Single }),
            2 => {
                out.push(Slot { site, pos, role: Role::Inner });
                out.push(Slot { site, pos, role: Role::Outer });
            }
            _ => {}
        }
    }
    out
}

/// Replays the extension sequence for one pairing and reports whether the
/// iterative scheme generates it (each intermediate within `d_max` circles,
/// no double insertion taken while another one is still fully open).
fn route_is_generated(slots: &[Slot], partner: &[usize], n_positions: usize, d_max: usize) -> bool {
    let mut open = vec![0u8; n_positions];
    let mut at_pos: Vec<Vec<usize>> = vec![Vec::new(); n_positions];
    for (s, slot) in slots.iter().enumerate() {
        at_pos[slot.pos].push(s);
    }
    let total = |open: &[u8]| open.iter().map(|&c| usize::from(c)).sum::<usize>();
    for q in 0..n_positions {
        let here = &at_pos[q];
        match here.len() {
            0 => {}
            1 => {
                let p = slots[partner[here[0]]].pos;
                if p < q {
                    open[p] -= 1;
                } else {
                    open[q] = 1;
                }
            }
            _ => {
                if open.iter().any(|&c| c == 2) {
                    return false;
                }
                let (inner, outer) = if slots[here[0]].role == Role::Inner {
                    (here[0], here[1])
                } else {
                    (here[1], here[0])
                };
                if partner[inner] == outer {
                    // self-loop: the half-step state holds one extra open circle
                    if total(&open) + 1 > d_max {
                        return false;
                    }
                } else {
                    let pi = slots[partner[inner]].pos;
                    let po = slots[partner[outer]].pos;
                    let mut staying = 0u8;
                    if pi < q {
                        open[pi] -= 1;
                    } else {
                        staying += 1;
                    }
                    let half = total(&open) + usize::from(pi > q);
                    if half > d_max {
                        return false;
                    }
                    if po < q {
                        open[po] -= 1;
                    } else {
                        staying += 1;
                    }
                    open[q] = staying;
                }
            }
        }
        if total(&open) > d_max {
            return false;
        }
    }
    true
}

/// Reduced density matrix generated by the iterative scheme without memory
/// truncation, obtained by raw pairing enumeration restricted to the pairings
/// the left/right extensions actually produce. `d_max = None` disables the
/// circle cap.
pub fn direct_rho_iterative(
    props: &PropagatorSet,
    rho0: &ComplexMatrix,
    corr: &impl LatticeCorrelation,
    n: usize,
    order: Order,
    d_max: Option<usize>,
    limits: &OracleLimits,
) -> Result<ComplexMatrix> {
    let cap = match order {
        Order::First => limits.first_order_steps,
        Order::Second => limits.second_order_steps,
    };
    check_steps(n, cap, "iterative oracle")?;
    let d_max = d_max.unwrap_or(usize::MAX);
    tuple_sum(props, rho0, n, order.max_index(), |jm, jp| {
        let slots = slots_for(jm, jp);
        if slots.len() > limits.max_points {
            return Err(FrodsError::OracleLimit(format!(
                "{} points exceed the pairing cap of {}",
                slots.len(),
                limits.max_points
            )));
        }
        let mut partner = vec![0usize; slots.len()];
        let mut w = Complex64::new(0.0, 0.0);
        for_each_pairing(slots.len(), &mut |pairs| {
            for &(a, b) in pairs {
                partner[a] = b;
                partner[b] = a;
            }
            if route_is_generated(&slots, &partner, 2 * n, d_max) {
                w += pairs
                    .iter()
                    .map(|&(a, b)| corr.pair(slots[a].site, slots[b].site))
                    .product::<Complex64>();
            }
        });
        Ok(Some(w))
    })
}
