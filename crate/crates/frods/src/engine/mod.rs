//! Iterative resummation of the discrete Dyson series.
//!
//! The state after `k` steps is the set of bold diagrams `Λ(j; j')`: partial
//! sums over all thin diagrams sharing the same pattern of still-open circles.
//! Each step appends one segment on the minus branch (left extension) and one
//! on the plus branch (right extension). The reduced density matrix is the
//! diagram with no open circles.
//!
//! Slots are laid out as `2 (step - base) + branch`, so the oldest retained
//! segment pair sits at slots 0 and 1 and dropping it under memory truncation
//! is a shift by two.

mod keys;

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

pub use keys::{binomial, diagram_count, first_order_count, DiagramKey, KeySpace, MAX_KEYS, MAX_SLOTS};

use crate::bath::{LatticeCorrelation, Site};
use crate::dyson::Order;
use crate::error::{FrodsError, Result};
use crate::linops::{axpy, gemm, gemm_acc, ComplexMatrix};
use crate::system::PropagatorSet;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Truncation and scheduling controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineSettings {
    pub order: Order,
    /// Memory length in steps; 0 keeps every segment.
    pub k_max: usize,
    /// Cap on open circles per diagram; `None` disables it.
    pub d_max: Option<usize>,
    pub threads: usize,
}

impl EngineSettings {
    pub fn new(order: Order) -> Self {
        EngineSettings {
            order,
            k_max: 0,
            d_max: None,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.d_max {
            if d == 0 {
                return Err(FrodsError::invalid("numerics.d_max", "must be >= 1"));
            }
            if self.k_max > 0 && d > 2 * self.k_max + 1 {
                return Err(FrodsError::invalid(
                    "numerics.d_max",
                    format!("{d} exceeds 2 k_max + 1 = {}", 2 * self.k_max + 1),
                ));
            }
        }
        if 2 * self.k_max + 2 > MAX_SLOTS {
            return Err(FrodsError::invalid(
                "numerics.k_max",
                format!("window of {} slots exceeds {MAX_SLOTS}", 2 * self.k_max + 2),
            ));
        }
        if self.threads == 0 {
            return Err(FrodsError::invalid("threads", "must be >= 1"));
        }
        Ok(())
    }

    fn cap(&self) -> usize {
        self.d_max.unwrap_or(usize::MAX)
    }

    fn twos(&self) -> bool {
        self.order == Order::Second
    }
}

/// Bold diagrams after some number of completed extensions.
#[derive(Clone, Debug)]
pub struct DiagramStore {
    /// Step of the oldest retained segment pair.
    pub base: usize,
    pub n_left: usize,
    pub n_right: usize,
    dim: usize,
    space: KeySpace,
    keys: Vec<DiagramKey>,
    values: Vec<Complex64>,
}

impl DiagramStore {
    /// `Λ(;) = ρ0`
    pub fn initial(rho0: &ComplexMatrix, settings: &EngineSettings) -> Result<Self> {
        let space = KeySpace::new(0, settings.cap(), settings.twos())?;
        Ok(DiagramStore {
            base: 1,
            n_left: 0,
            n_right: 0,
            dim: rho0.dim(),
            keys: space.keys(),
            space,
            values: rho0.as_slice().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slots(&self) -> usize {
        self.space.slots()
    }

    pub fn keys(&self) -> &[DiagramKey] {
        &self.keys
    }

    /// Lattice point carried by a slot.
    pub fn site(&self, slot: usize) -> Site {
        let step = self.base + slot / 2;
        if slot % 2 == 0 {
            Site::minus(step)
        } else {
            Site::plus(step)
        }
    }

    /// Slot of a lattice point, if it is inside the window.
    pub fn slot_of(&self, site: Site) -> Option<usize> {
        if site.step < self.base {
            return None;
        }
        let s = 2 * (site.step - self.base) + usize::from(site.branch == crate::bath::Branch::Plus);
        (s < self.slots()).then_some(s)
    }

    #[inline]
    fn block(&self, key: DiagramKey) -> Option<&[Complex64]> {
        let m2 = self.dim * self.dim;
        self.space.index(key).map(|i| &self.values[i * m2..(i + 1) * m2])
    }

    /// Value of a diagram; absent keys read as zero.
    pub fn get(&self, key: DiagramKey) -> ComplexMatrix {
        match self.block(key) {
            Some(b) => ComplexMatrix::from_vec(self.dim, b.to_vec()).expect("block size"),
            None => ComplexMatrix::zeros(self.dim),
        }
    }

    /// The diagram without open circles.
    pub fn rho(&self) -> ComplexMatrix {
        self.get(DiagramKey::EMPTY)
    }
}

/// Timing and size of one completed step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub step: usize,
    pub keys: usize,
    pub ms: f64,
}

impl std::fmt::Display for StepStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "step={} keys={} ms={:.3}", self.step, self.keys, self.ms)
    }
}

/// Evaluates `f(index, block, scratch)` for every output block, serially or on a pool.
fn fill_blocks<F>(values: &mut [Complex64], m2: usize, pool: Option<&rayon::ThreadPool>, f: F)
where
    F: Fn(usize, &mut [Complex64], &mut Scratch) + Sync,
{
    match pool {
        None => {
            let mut scratch = Scratch::new(m2);
            for (i, out) in values.chunks_mut(m2).enumerate() {
                f(i, out, &mut scratch);
            }
        }
        Some(pool) => pool.install(|| {
            values
                .par_chunks_mut(m2)
                .enumerate()
                .for_each_init(|| Scratch::new(m2), |scratch, (i, out)| f(i, out, scratch));
        }),
    }
}

struct Scratch {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl Scratch {
    fn new(m2: usize) -> Self {
        Scratch {
            a: vec![ZERO; m2],
            b: vec![ZERO; m2],
        }
    }
}

fn nonzero(z: Complex64) -> bool {
    z.re != 0.0 || z.im != 0.0
}

/// Transient half-step quantities over the plain keys of a space:
/// `one[j]` (the new double insertion keeps an open circle) and `zero[j]`.
struct HalfStep {
    dim: usize,
    space: KeySpace,
    one: Vec<Complex64>,
    zero: Vec<Complex64>,
}

impl HalfStep {
    #[inline]
    fn one(&self, key: DiagramKey) -> Option<&[Complex64]> {
        if !key.is_plain() || key.circle_count() + 1 > self.space.max_circles() {
            return None;
        }
        self.at(&self.one, key)
    }

    #[inline]
    fn zero(&self, key: DiagramKey) -> Option<&[Complex64]> {
        if !key.is_plain() {
            return None;
        }
        self.at(&self.zero, key)
    }

    #[inline]
    fn at<'a>(&self, v: &'a [Complex64], key: DiagramKey) -> Option<&'a [Complex64]> {
        let m2 = self.dim * self.dim;
        self.space.index(key).map(|i| &v[i * m2..(i + 1) * m2])
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

/// Operators for one extension; right extensions use the adjoints on the right.
struct SideOps<'a> {
    side: Side,
    p0: &'a [Complex64],
    p1: &'a [Complex64],
    g1: &'a [Complex64],
    g2: &'a [Complex64],
    m: usize,
}

impl<'a> SideOps<'a> {
    fn new(props: &'a PropagatorSet, side: Side) -> Self {
        match side {
            Side::Left => SideOps {
                side,
                p0: props.p0.as_slice(),
                p1: props.p1.as_slice(),
                g1: props.g1.as_slice(),
                g2: props.g2.as_slice(),
                m: props.dim(),
            },
            Side::Right => SideOps {
                side,
                p0: props.p0d.as_slice(),
                p1: props.p1d.as_slice(),
                g1: props.g1d.as_slice(),
                g2: props.g2d.as_slice(),
                m: props.dim(),
            },
        }
    }

    /// `out += op · x` (left) or `out += x · op` (right)
    #[inline]
    fn apply_acc(&self, out: &mut [Complex64], op: &[Complex64], x: &[Complex64]) {
        match self.side {
            Side::Left => gemm_acc(out, op, x, self.m),
            Side::Right => gemm_acc(out, x, op, self.m),
        }
    }

    #[inline]
    fn apply(&self, out: &mut [Complex64], op: &[Complex64], x: &[Complex64]) {
        match self.side {
            Side::Left => gemm(out, op, x, self.m),
            Side::Right => gemm(out, x, op, self.m),
        }
    }
}

/// `acc += Σ_ℓ arcs[ℓ] · Λ(j + e_ℓ)` over slots where the raise is allowed.
#[inline]
fn gather(
    acc: &mut [Complex64],
    src: &DiagramStore,
    j: DiagramKey,
    arcs: &[Complex64],
    allow_two: bool,
) -> bool {
    let mut any = false;
    for (l, &b) in arcs.iter().enumerate() {
        if !nonzero(b) {
            continue;
        }
        let v = j.slot(l);
        if v == 2 || (v == 1 && !allow_two) {
            continue;
        }
        if let Some(raised) = j.raise(l) {
            if let Some(x) = src.block(raised) {
                axpy(acc, b, x);
                any = true;
            }
        }
    }
    any
}

/// `acc += Σ_{ℓ: j_ℓ = 0} arcs[ℓ] · H(j + e_ℓ)` for a half-step table.
#[inline]
fn gather_half<'h>(
    acc: &mut [Complex64],
    j: DiagramKey,
    arcs: &[Complex64],
    lookup: impl Fn(DiagramKey) -> Option<&'h [Complex64]>,
) -> bool {
    let mut any = false;
    for (l, &b) in arcs.iter().enumerate() {
        if !nonzero(b) || j.slot(l) != 0 {
            continue;
        }
        if let Some(x) = lookup(j.raise(l).expect("empty slot")) {
            axpy(acc, b, x);
            any = true;
        }
    }
    any
}

struct Extension<'a> {
    ops: SideOps<'a>,
    settings: &'a EngineSettings,
    /// `B(new, ℓ)` (left) or `B(ℓ, new)` (right) for every source slot.
    arcs: Vec<Complex64>,
    self_loop: Complex64,
}

impl<'a> Extension<'a> {
    fn half_step(&self, src: &DiagramStore, pool: Option<&rayon::ThreadPool>) -> Result<HalfStep> {
        let space = KeySpace::new(src.slots(), self.settings.cap(), false)?;
        let keys = space.keys();
        let m2 = src.dim * src.dim;
        let mut one = vec![ZERO; keys.len() * m2];
        let mut zero = vec![ZERO; keys.len() * m2];
        let cap = self.settings.cap();
        fill_blocks(&mut one, m2, pool, |i, out, _| {
            let j = keys[i];
            if j.circle_count() + 1 > cap {
                return;
            }
            if let Some(x) = src.block(j) {
                self.ops.apply(out, self.ops.g1, x);
            }
        });
        fill_blocks(&mut zero, m2, pool, |i, out, scratch| {
            let j = keys[i];
            scratch.a.fill(ZERO);
            if gather(&mut scratch.a, src, j, &self.arcs, false) {
                self.ops.apply(out, self.ops.g1, &scratch.a);
            }
        });
        Ok(HalfStep {
            dim: src.dim,
            space,
            one,
            zero,
        })
    }

    /// Value of the extended diagram whose new slot holds `a` and whose other
    /// slots are `j`.
    fn target(
        &self,
        a: u8,
        j: DiagramKey,
        src: &DiagramStore,
        half: Option<&HalfStep>,
        out: &mut [Complex64],
        scratch: &mut Scratch,
    ) {
        let ops = &self.ops;
        out.fill(ZERO);
        match a {
            0 => {
                if let Some(x) = src.block(j) {
                    ops.apply_acc(out, ops.p0, x);
                }
                scratch.a.fill(ZERO);
                if gather(&mut scratch.a, src, j, &self.arcs, self.settings.twos()) {
                    ops.apply_acc(out, ops.p1, &scratch.a);
                }
                if let Some(h) = half {
                    if j.is_plain() {
                        scratch.b.fill(ZERO);
                        let mut any = false;
                        if nonzero(self.self_loop) {
                            if let Some(x) = h.one(j) {
                                axpy(&mut scratch.b, self.self_loop, x);
                                any = true;
                            }
                        }
                        any |= gather_half(&mut scratch.b, j, &self.arcs, |k| h.zero(k));
                        if any {
                            ops.apply_acc(out, ops.g2, &scratch.b);
                        }
                    }
                }
            }
            1 => {
                if let Some(x) = src.block(j) {
                    ops.apply_acc(out, ops.p1, x);
                }
                if let Some(h) = half {
                    if j.is_plain() {
                        scratch.b.fill(ZERO);
                        let mut any = false;
                        if let Some(x) = h.zero(j) {
                            axpy(&mut scratch.b, Complex64::new(1.0, 0.0), x);
                            any = true;
                        }
                        any |= gather_half(&mut scratch.b, j, &self.arcs, |k| h.one(k));
                        if any {
                            ops.apply_acc(out, ops.g2, &scratch.b);
                        }
                    }
                }
            }
            _ => {
                if let Some(x) = half.and_then(|h| h.one(j)) {
                    ops.apply(out, ops.g2, x);
                    for z in out.iter_mut() {
                        *z *= 2.0;
                    }
                }
            }
        }
    }
}

fn arcs_for<C: LatticeCorrelation>(src: &DiagramStore, corr: &C, new: Site, side: Side) -> Vec<Complex64> {
    (0..src.slots())
        .map(|s| match side {
            Side::Left => corr.pair(new, src.site(s)),
            Side::Right => corr.pair(src.site(s), new),
        })
        .collect()
}

fn left_extension<C: LatticeCorrelation>(
    src: &DiagramStore,
    props: &PropagatorSet,
    corr: &C,
    settings: &EngineSettings,
    pool: Option<&rayon::ThreadPool>,
) -> Result<DiagramStore> {
    debug_assert_eq!(src.n_left, src.n_right);
    let new = Site::minus(src.n_left + 1);
    let ext = Extension {
        ops: SideOps::new(props, Side::Left),
        settings,
        arcs: arcs_for(src, corr, new, Side::Left),
        self_loop: corr.pair(new, new),
    };
    let half = match settings.order {
        Order::Second => Some(ext.half_step(src, pool)?),
        Order::First => None,
    };
    let new_slot = src.slots();
    let space = KeySpace::new(new_slot + 1, settings.cap(), settings.twos())?;
    let keys = space.keys();
    let m2 = src.dim * src.dim;
    let mut values = vec![ZERO; keys.len() * m2];
    fill_blocks(&mut values, m2, pool, |i, out, scratch| {
        let (a, j) = keys[i].take(new_slot);
        ext.target(a, j, src, half.as_ref(), out, scratch);
    });
    Ok(DiagramStore {
        base: src.base,
        n_left: src.n_left + 1,
        n_right: src.n_right,
        dim: src.dim,
        space,
        keys,
        values,
    })
}

fn right_extension<C: LatticeCorrelation>(
    src: &DiagramStore,
    props: &PropagatorSet,
    corr: &C,
    settings: &EngineSettings,
    pool: Option<&rayon::ThreadPool>,
) -> Result<DiagramStore> {
    debug_assert_eq!(src.n_left, src.n_right + 1);
    let step = src.n_right + 1;
    let new = Site::plus(step);
    let ext = Extension {
        ops: SideOps::new(props, Side::Right),
        settings,
        arcs: arcs_for(src, corr, new, Side::Right),
        self_loop: corr.pair(new, new),
    };
    let half = match settings.order {
        Order::Second => Some(ext.half_step(src, pool)?),
        Order::First => None,
    };
    let new_slot = src.slots();
    let drop = settings.k_max > 0 && step - src.base + 1 > settings.k_max;
    let (slots, shift, base) = if drop {
        (new_slot - 1, 2, src.base + 1)
    } else {
        (new_slot + 1, 0, src.base)
    };
    let space = KeySpace::new(slots, settings.cap(), settings.twos())?;
    let keys = space.keys();
    let m2 = src.dim * src.dim;
    let mut values = vec![ZERO; keys.len() * m2];
    fill_blocks(&mut values, m2, pool, |i, out, scratch| {
        let (a, j) = keys[i].shift_up(shift).take(new_slot);
        ext.target(a, j, src, half.as_ref(), out, scratch);
    });
    Ok(DiagramStore {
        base,
        n_left: src.n_left,
        n_right: step,
        dim: src.dim,
        space,
        keys,
        values,
    })
}

fn check_geometry(store: &DiagramStore, props: &PropagatorSet, settings: &EngineSettings) -> Result<()> {
    settings.validate()?;
    if store.dim != props.dim() {
        return Err(FrodsError::DimensionMismatch {
            left: store.dim,
            right: props.dim(),
        });
    }
    if store.n_left != store.n_right {
        return Err(FrodsError::invalid("store", "steps start from a completed step"));
    }
    Ok(())
}

/// One first-order step: left extension, then right extension.
pub fn step_first_order<C: LatticeCorrelation>(
    store: &DiagramStore,
    props: &PropagatorSet,
    corr: &C,
    settings: &EngineSettings,
) -> Result<DiagramStore> {
    let s = EngineSettings {
        order: Order::First,
        ..*settings
    };
    check_geometry(store, props, &s)?;
    let mid = left_extension(store, props, corr, &s, None)?;
    right_extension(&mid, props, corr, &s, None)
}

/// One second-order step, with the half-step intermediates of both extensions.
pub fn step_second_order<C: LatticeCorrelation>(
    store: &DiagramStore,
    props: &PropagatorSet,
    corr: &C,
    settings: &EngineSettings,
) -> Result<DiagramStore> {
    let s = EngineSettings {
        order: Order::Second,
        ..*settings
    };
    check_geometry(store, props, &s)?;
    let mid = left_extension(store, props, corr, &s, None)?;
    right_extension(&mid, props, corr, &s, None)
}

/// Stateful driver holding the current store.
pub struct Engine<'a, C: LatticeCorrelation> {
    props: &'a PropagatorSet,
    corr: &'a C,
    settings: EngineSettings,
    store: DiagramStore,
    pool: Option<rayon::ThreadPool>,
}

impl<'a, C: LatticeCorrelation> Engine<'a, C> {
    pub fn new(
        props: &'a PropagatorSet,
        corr: &'a C,
        rho0: &ComplexMatrix,
        settings: EngineSettings,
    ) -> Result<Self> {
        settings.validate()?;
        if rho0.dim() != props.dim() {
            return Err(FrodsError::DimensionMismatch {
                left: rho0.dim(),
                right: props.dim(),
            });
        }
        let pool = if settings.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(settings.threads)
                    .build()
                    .map_err(|e| FrodsError::invalid("threads", e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Engine {
            props,
            corr,
            settings,
            store: DiagramStore::initial(rho0, &settings)?,
            pool,
        })
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub fn store(&self) -> &DiagramStore {
        &self.store
    }

    pub fn steps_done(&self) -> usize {
        self.store.n_right
    }

    pub fn rho(&self) -> ComplexMatrix {
        self.store.rho()
    }

    pub fn step(&mut self) -> Result<StepStats> {
        let start = Instant::now();
        let pool = self.pool.as_ref();
        let mid = left_extension(&self.store, self.props, self.corr, &self.settings, pool)?;
        self.store = right_extension(&mid, self.props, self.corr, &self.settings, pool)?;
        Ok(StepStats {
            step: self.store.n_right,
            keys: self.store.len(),
            ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }
}

/// Largest key space the run will allocate, checked before any work starts.
pub fn projected_max_keys(settings: &EngineSettings, n_steps: usize) -> Result<usize> {
    settings.validate()?;
    let window = if settings.k_max > 0 {
        settings.k_max.min(n_steps)
    } else {
        n_steps
    };
    let widest = (2 * window).max(1);
    if widest > MAX_SLOTS {
        return Err(FrodsError::invalid(
            "numerics.n_steps",
            format!("{n_steps} steps without memory truncation need {widest} slots, limit is {MAX_SLOTS}"),
        ));
    }
    let mut worst = 0;
    for slots in 0..=widest {
        worst = worst.max(KeySpace::new(slots, settings.cap(), settings.twos())?.len());
    }
    Ok(worst)
}

/// Runs `n_steps` steps and returns `ρ̃_0, ..., ρ̃_N` with per-step statistics.
pub fn run<C: LatticeCorrelation>(
    props: &PropagatorSet,
    corr: &C,
    rho0: &ComplexMatrix,
    settings: EngineSettings,
    n_steps: usize,
    mut on_step: impl FnMut(&StepStats),
) -> Result<(Vec<ComplexMatrix>, Vec<StepStats>)> {
    let keys = projected_max_keys(&settings, n_steps)?;
    if keys.saturating_mul(props.dim() * props.dim()) > 4 * MAX_KEYS {
        return Err(FrodsError::StoreTooLarge {
            keys,
            dim: props.dim(),
        });
    }
    let mut engine = Engine::new(props, corr, rho0, settings)?;
    let mut rhos = Vec::with_capacity(n_steps + 1);
    let mut stats = Vec::with_capacity(n_steps);
    rhos.push(engine.rho());
    for _ in 0..n_steps {
        let s = engine.step()?;
        on_step(&s);
        stats.push(s);
        rhos.push(engine.rho());
    }
    Ok((rhos, stats))
}
