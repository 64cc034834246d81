//! Running the engine on a physical model and post-processing the output.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::{build_table, discretize, OhmicBathSpec};
use crate::dyson::Order;
use crate::engine::{run, EngineSettings, StepStats};
use crate::error::{FrodsError, Result};
use crate::linops::{herm_exp, ComplexMatrix};
use crate::system::{build_propagators, sigma_z, SystemModel};

/// Time grid and truncation parameters of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Numerics {
    pub dt: f64,
    pub n_steps: usize,
    pub order: Order,
    /// 0 disables memory truncation.
    pub k_max: usize,
    pub d_max: Option<usize>,
    pub threads: usize,
}

impl Numerics {
    pub fn settings(&self) -> EngineSettings {
        EngineSettings {
            order: self.order,
            k_max: self.k_max,
            d_max: self.d_max,
            threads: self.threads,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(FrodsError::invalid("numerics.dt", "must be finite and > 0"));
        }
        if self.n_steps == 0 {
            return Err(FrodsError::invalid("numerics.n_steps", "must be >= 1"));
        }
        self.settings().validate()
    }
}

#[derive(Clone, Debug)]
pub struct RunSpec {
    pub model: SystemModel,
    pub bath: OhmicBathSpec,
    pub numerics: Numerics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// Real part of `tr(ρ σ_z)`; two-level models only.
    SigmaZ,
    /// `P_1, ..., P_M`.
    Populations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedSeries {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// Per completed step.
    pub keys: Vec<usize>,
    pub ms: Vec<f64>,
    /// Per time point, including `t = 0`.
    pub trace: Vec<Complex64>,
    pub herm_defect: Vec<f64>,
    pub population_imag_defect: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub times: Vec<f64>,
    pub rhos: Vec<ComplexMatrix>,
    pub observables: Vec<NamedSeries>,
    pub diagnostics: Diagnostics,
}

impl RunResult {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.observables
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.values.as_slice())
    }

    pub fn max_herm_defect(&self) -> f64 {
        self.diagnostics.herm_defect.iter().fold(0.0, |a, &b| a.max(b))
    }
}

pub fn expectation(rho: &ComplexMatrix, obs: &ComplexMatrix) -> Result<Complex64> {
    if rho.dim() != obs.dim() {
        return Err(FrodsError::DimensionMismatch {
            left: rho.dim(),
            right: obs.dim(),
        });
    }
    let m = rho.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..m {
        for l in 0..m {
            acc += rho[(k, l)] * obs[(l, k)];
        }
    }
    Ok(acc)
}

/// Real diagonal and the largest imaginary part found on it.
pub fn populations(rho: &ComplexMatrix) -> (Vec<f64>, f64) {
    let m = rho.dim();
    let p = (0..m).map(|i| rho[(i, i)].re).collect();
    let defect = (0..m).fold(0.0f64, |a, i| a.max(rho[(i, i)].im.abs()));
    (p, defect)
}

/// Extracts the requested observables from a sequence of density matrices.
pub fn observe(rhos: &[ComplexMatrix], kinds: &[ObservableKind]) -> Result<Vec<NamedSeries>> {
    let dim = rhos.first().map_or(0, |r| r.dim());
    let mut out = Vec::new();
    for kind in kinds {
        match kind {
            ObservableKind::SigmaZ => {
                if dim != 2 {
                    return Err(FrodsError::invalid(
                        "output.observables",
                        format!("sigma_z needs a two-level model, got dimension {dim}"),
                    ));
                }
                let sz = sigma_z();
                let values = rhos
                    .iter()
                    .map(|r| expectation(r, &sz).map(|v| v.re))
                    .collect::<Result<_>>()?;
                out.push(NamedSeries {
                    name: "sigma_z".into(),
                    values,
                });
            }
            ObservableKind::Populations => {
                for i in 0..dim {
                    out.push(NamedSeries {
                        name: format!("P_{}", i + 1),
                        values: rhos.iter().map(|r| r[(i, i)].re).collect(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Builds the bath table and propagators, then runs the engine.
pub fn simulate(
    spec: &RunSpec,
    kinds: &[ObservableKind],
    on_step: impl FnMut(&StepStats),
) -> Result<RunResult> {
    spec.model.validate()?;
    spec.bath.validate()?;
    let num = &spec.numerics;
    num.validate()?;
    let bath = discretize(&spec.bath)?;
    let table = build_table(&bath, &spec.bath, num.dt, num.k_max, num.n_steps)?;
    let props = build_propagators(&spec.model, num.dt)?;
    let (rhos, stats) = run(&props, &table, &spec.model.rho0, num.settings(), num.n_steps, on_step)?;
    let observables = observe(&rhos, kinds)?;
    let diagnostics = Diagnostics {
        keys: stats.iter().map(|s| s.keys).collect(),
        ms: stats.iter().map(|s| s.ms).collect(),
        trace: rhos.iter().map(|r| r.trace()).collect(),
        herm_defect: rhos.iter().map(|r| r.max_asymmetry()).collect(),
        population_imag_defect: rhos.iter().map(|r| populations(r).1).collect(),
    };
    Ok(RunResult {
        times: (0..=num.n_steps).map(|k| k as f64 * num.dt).collect(),
        rhos,
        observables,
        diagnostics,
    })
}

/// `e^{-iHkΔt} ρ0 e^{iHkΔt}` for `k = 0..=n`.
pub fn unitary_evolution(
    h: &ComplexMatrix,
    rho0: &ComplexMatrix,
    dt: f64,
    n: usize,
) -> Result<Vec<ComplexMatrix>> {
    (0..=n)
        .map(|k| {
            let u = herm_exp(h, Complex64::new(0.0, -(k as f64) * dt))?;
            Ok(&(&u * rho0) * &u.adjoint())
        })
        .collect()
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `log2(|v_4 - v_2| / |v_2 - v_1|)` for series already sampled on one grid.
pub fn convergence_order(fine: &[f64], mid: &[f64], coarse: &[f64]) -> Result<f64> {
    if fine.len() != mid.len() || mid.len() != coarse.len() {
        return Err(FrodsError::Misaligned(format!(
            "lengths {}, {}, {}",
            fine.len(),
            mid.len(),
            coarse.len()
        )));
    }
    let num = l2_diff(coarse, mid);
    let den = l2_diff(mid, fine);
    if den == 0.0 || num == 0.0 {
        return Err(FrodsError::UndefinedOrder(format!(
            "differences {num:e} and {den:e}; the series coincide"
        )));
    }
    Ok((num / den).log2())
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Samples three runs with steps δt, 2δt, 4δt on the coarse grid.
///
/// Each argument is `(times, values)`. Every coarse time must appear in the
/// two finer runs and all three must end at the same time.
pub fn align_on_coarse(
    fine: (&[f64], &[f64]),
    mid: (&[f64], &[f64]),
    coarse: (&[f64], &[f64]),
) -> Result<[Vec<f64>; 3]> {
    for (label, (t, v)) in [("fine", fine), ("mid", mid), ("coarse", coarse)] {
        if t.len() != v.len() || t.is_empty() {
            return Err(FrodsError::Misaligned(format!("{label} series has no usable rows")));
        }
    }
    let end = |t: &[f64]| t[t.len() - 1];
    if !same_time(end(fine.0), end(coarse.0)) || !same_time(end(mid.0), end(coarse.0)) {
        return Err(FrodsError::Misaligned(format!(
            "final times {}, {}, {} differ",
            end(fine.0),
            end(mid.0),
            end(coarse.0)
        )));
    }
    let pick = |(t, v): (&[f64], &[f64]), at: f64, label: &str| -> Result<f64> {
        let i = t.partition_point(|&x| x < at - 1e-9 * at.abs().max(1.0));
        match t.get(i) {
            Some(&x) if same_time(x, at) => Ok(v[i]),
            _ => Err(FrodsError::Misaligned(format!("{label} series has no row at t = {at}"))),
        }
    };
    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    for (&t, &v) in coarse.0.iter().zip(coarse.1) {
        out[0].push(pick(fine, t, "fine")?);
        out[1].push(pick(mid, t, "mid")?);
        out[2].push(v);
    }
    Ok(out)
}

/// Convergence order from three runs at δt, 2δt, 4δt, compared on the coarse grid.
pub fn order_from_runs(fine: &RunResult, mid: &RunResult, coarse: &RunResult, name: &str) -> Result<f64> {
    fn get<'r>(r: &'r RunResult, name: &str) -> Result<&'r [f64]> {
        r.series(name)
            .ok_or_else(|| FrodsError::Misaligned(format!("no observable named {name}")))
    }
    let [a, b, c] = align_on_coarse(
        (&fine.times, get(fine, name)?),
        (&mid.times, get(mid, name)?),
        (&coarse.times, get(coarse, name)?),
    )?;
    convergence_order(&a, &b, &c)
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub k_max: Vec<usize>,
    pub runs: Vec<RunResult>,
    /// `sup_t |O_{k_{i+1}} - O_{k_i}|` for consecutive entries.
    pub sup_diffs: Vec<f64>,
}

/// Repeats a run for each memory length and compares consecutive series of `name`.
pub fn truncation_sweep(
    base: &RunSpec,
    k_max: &[usize],
    kinds: &[ObservableKind],
    name: &str,
) -> Result<SweepResult> {
    if k_max.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FrodsError::invalid("k_max", "list must be strictly ascending"));
    }
    let mut runs = Vec::with_capacity(k_max.len());
    for &k in k_max {
        let mut spec = base.clone();
        spec.numerics.k_max = k;
        runs.push(simulate(&spec, kinds, |_| {})?);
    }
    let mut sup_diffs = Vec::new();
    for w in runs.windows(2) {
        let a = w[0]
            .series(name)
            .ok_or_else(|| FrodsError::invalid("observable", format!("no series named {name}")))?;
        let b = w[1].series(name).unwrap_or_default();
        sup_diffs.push(a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())));
    }
    Ok(SweepResult {
        k_max: k_max.to_vec(),
        runs,
        sup_diffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{basis_projector, multilevel, spin_boson};
    use crate::testutil::{c, random_density, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn numerics(dt: f64, n_steps: usize, order: Order) -> Numerics {
        Numerics {
            dt,
            n_steps,
            order,
            k_max: 0,
            d_max: Some(3),
            threads: 1,
        }
    }

    fn spin_boson_spec(xi: f64, num: Numerics) -> RunSpec {
        RunSpec {
            model: spin_boson(0.0, 1.0),
            bath: OhmicBathSpec::new(xi, 2.5, 5.0),
            numerics: num,
        }
    }

    #[test]
    fn expectation_examples() {
        let sz = sigma_z();
        assert_eq!(expectation(&basis_projector(2, 0), &sz).unwrap(), c(1.0, 0.0));
        let mixed = ComplexMatrix::identity(2).scale(c(0.5, 0.0));
        assert_eq!(expectation(&mixed, &sz).unwrap(), c(0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(&mut rng, 3);
        let obs = random_hermitian(&mut rng, 3);
        let want = (&rho * &obs).trace();
        assert!((expectation(&rho, &obs).unwrap() - want).norm() < 1e-15);
        assert!(expectation(&rho, &sz).is_err());
    }

    #[test]
    fn population_examples() {
        assert_eq!(populations(&basis_projector(3, 0)).0, vec![1.0, 0.0, 0.0]);
        let (p, d) = populations(&ComplexMatrix::identity(4).scale(c(0.25, 0.0)));
        assert!(p.iter().all(|&x| x == 0.25));
        assert_eq!(d, 0.0);
    }

    #[test]
    fn synthetic_orders() {
        let exact: Vec<f64> = (0..20).map(|i| (i as f64 * 0.3).sin()).collect();
        for p in [1, 2] {
            let series = |dt: f64| -> Vec<f64> {
                exact.iter().enumerate().map(|(i, v)| v + (1.0 + i as f64) * dt.powi(p)).collect()
            };
            let got = convergence_order(&series(0.01), &series(0.02), &series(0.04)).unwrap();
            assert!((got - p as f64).abs() < 1e-9, "{got}");
        }
        let same = vec![1.0; 4];
        assert!(matches!(
            convergence_order(&same, &same, &same),
            Err(FrodsError::UndefinedOrder(_))
        ));
        assert!(matches!(
            convergence_order(&same, &same[..3], &same),
            Err(FrodsError::Misaligned(_))
        ));
    }

    #[test]
    fn alignment_samples_common_times() {
        let grid = |dt: f64, n: usize| -> Vec<f64> { (0..=n).map(|k| k as f64 * dt).collect() };
        let (tf, tm, tc) = (grid(0.025, 32), grid(0.05, 16), grid(0.1, 8));
        let v = |t: &[f64]| -> Vec<f64> { t.iter().map(|x| x * x).collect() };
        let (vf, vm, vc) = (v(&tf), v(&tm), v(&tc));
        let [a, b, c] = align_on_coarse((&tf, &vf), (&tm, &vm), (&tc, &vc)).unwrap();
        assert_eq!(a.len(), 9);
        for i in 0..9 {
            assert!((a[i] - c[i]).abs() < 1e-12 && (b[i] - c[i]).abs() < 1e-12);
        }
        let short = grid(0.025, 30);
        let vs = v(&short);
        assert!(align_on_coarse((&short, &vs), (&tm, &vm), (&tc, &vc)).is_err());
        let skew = grid(0.03, 32);
        let vk = v(&skew);
        assert!(align_on_coarse((&skew, &vk), (&tm, &vm), (&tc, &vc)).is_err());
    }

    #[test]
    fn zero_coupling_is_free_evolution() {
        for order in [Order::First, Order::Second] {
            let spec = spin_boson_spec(0.0, numerics(0.05, 20, order));
            let res = simulate(&spec, &[ObservableKind::SigmaZ], |_| {}).unwrap();
            let free = unitary_evolution(&spec.model.h_s, &spec.model.rho0, 0.05, 20).unwrap();
            for (r, f) in res.rhos.iter().zip(&free) {
                assert!(r.max_abs_diff(f) < 1e-12);
            }
            // Δ = 1, ε = 0: ⟨σ_z⟩ = cos(2t)
            for (t, s) in res.times.iter().zip(res.series("sigma_z").unwrap()) {
                assert!((s - (2.0 * t).cos()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn run_result_layout() {
        let spec = spin_boson_spec(0.2, numerics(0.1, 5, Order::Second));
        let mut lines = Vec::new();
        let res = simulate(&spec, &[ObservableKind::SigmaZ, ObservableKind::Populations], |s| {
            lines.push(s.to_string())
        })
        .unwrap();
        assert_eq!(res.times.len(), 6);
        assert_eq!(res.rhos.len(), 6);
        assert_eq!(res.diagnostics.keys.len(), 5);
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("step=1 keys="));
        let names: Vec<&str> = res.observables.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["sigma_z", "P_1", "P_2"]);
        assert!(res.observables.iter().all(|s| s.values.len() == 6));
        assert_eq!(res.series("sigma_z").unwrap()[0], 1.0);
        assert_eq!(res.diagnostics.herm_defect[0], 0.0);
        assert!(res.times.windows(2).all(|w| (w[1] - w[0] - 0.1).abs() < 1e-15));
    }

    #[test]
    fn sweep_without_active_truncation_is_flat() {
        let spec = spin_boson_spec(0.4, numerics(0.1, 6, Order::First));
        let sweep = truncation_sweep(&spec, &[6, 8, 10], &[ObservableKind::SigmaZ], "sigma_z").unwrap();
        assert_eq!(sweep.sup_diffs, vec![0.0, 0.0]);
        assert!(truncation_sweep(&spec, &[8, 6], &[ObservableKind::SigmaZ], "sigma_z").is_err());
    }

    #[test]
    fn sigma_z_rejected_for_multilevel() {
        let model = multilevel(3, 1.0).unwrap();
        let spec = RunSpec {
            model,
            bath: OhmicBathSpec::new(0.1, 2.5, 5.0),
            numerics: numerics(0.1, 2, Order::First),
        };
        assert!(simulate(&spec, &[ObservableKind::SigmaZ], |_| {}).is_err());
        let res = simulate(&spec, &[ObservableKind::Populations], |_| {}).unwrap();
        assert_eq!(res.observables.len(), 3);
    }
}
