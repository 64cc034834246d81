//! Configuration files, CSV output and the subcommand drivers behind the `frods` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::{build_table, discretize, OhmicBathSpec};
use crate::dyson::{direct_rho_first, direct_rho_iterative, direct_rho_second, OracleLimits, Order};
use crate::engine::{diagram_count, first_order_count, run};
use crate::error::{FrodsError, Result};
use crate::linops::ComplexMatrix;
use crate::sim::{align_on_coarse, convergence_order, simulate, Numerics, ObservableKind, RunResult, RunSpec};
use crate::system::{
    basis_projector, build_propagators, multilevel, spin_boson, symmetric_end_mixture, SystemModel,
};

/// Largest deviation `oracle` accepts between the engine and the direct sums.
pub const ORACLE_TOL: f64 = 1e-10;

/// Matrix written as rows of `[re, im]` pairs.
pub type MatrixRows = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    SpinBoson,
    Multilevel,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// `|1><1|`
    First,
    /// `|M><M|`
    Last,
    /// `(|1><1| + |M><M|) / 2`
    Ends,
    /// `I / M`
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rho0Spec {
    Named(InitialState),
    Matrix(MatrixRows),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<Rho0Spec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_s: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_s: Option<MatrixRows>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub xi: f64,
    pub beta: f64,
    pub omega_c: f64,
    /// Defaults to `10 omega_c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    /// Defaults to 400.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_modes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub dt: f64,
    pub n_steps: usize,
    pub order: u8,
    /// 0 or absent keeps the whole memory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// Absent disables the circle cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Defaults to `sigma_z` for two-level models and `populations` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observables: Option<Vec<ObservableKind>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub bath: BathSection,
    pub numerics: NumericsSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn matrix_from_rows(rows: &MatrixRows, field: &str) -> Result<ComplexMatrix> {
    let rows: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows).map_err(|e| FrodsError::invalid(field, e.to_string()))
}

pub fn matrix_to_rows(m: &ComplexMatrix) -> MatrixRows {
    m.rows()
        .into_iter()
        .map(|r| r.into_iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn require<T: Copy>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| FrodsError::invalid(field, "required for this model kind"))
}

fn finite(x: f64, field: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(FrodsError::invalid(field, "must be finite"))
    }
}

impl ModelSection {
    pub fn build(&self) -> Result<SystemModel> {
        let model = match self.kind {
            ModelName::SpinBoson => spin_boson(
                finite(require(self.epsilon, "model.epsilon")?, "model.epsilon")?,
                finite(require(self.delta, "model.delta")?, "model.delta")?,
            ),
            ModelName::Multilevel => multilevel(
                require(self.m, "model.m")?,
                finite(require(self.omega, "model.omega")?, "model.omega")?,
            )?,
            ModelName::Custom => {
                let h = self
                    .h_s
                    .as_ref()
                    .ok_or_else(|| FrodsError::invalid("model.h_s", "required for custom models"))?;
                let w = self
                    .w_s
                    .as_ref()
                    .ok_or_else(|| FrodsError::invalid("model.w_s", "required for custom models"))?;
                let h = matrix_from_rows(h, "model.h_s")?;
                let dim = h.dim();
                SystemModel {
                    kind: crate::system::ModelKind::Custom,
                    h_s: h,
                    w_s: matrix_from_rows(w, "model.w_s")?,
                    rho0: basis_projector(dim, 0),
                }
            }
        };
        let dim = model.dim();
        let rho0 = match &self.rho0 {
            None | Some(Rho0Spec::Named(InitialState::First)) => basis_projector(dim, 0),
            Some(Rho0Spec::Named(InitialState::Last)) => basis_projector(dim, dim - 1),
            Some(Rho0Spec::Named(InitialState::Ends)) => symmetric_end_mixture(dim),
            Some(Rho0Spec::Named(InitialState::Mixed)) => {
                ComplexMatrix::identity(dim).scale(Complex64::new(1.0 / dim as f64, 0.0))
            }
            Some(Rho0Spec::Matrix(rows)) => matrix_from_rows(rows, "model.rho0")?,
        };
        model.with_rho0(rho0)
    }
}

impl BathSection {
    pub fn build(&self) -> Result<OhmicBathSpec> {
        let mut spec = OhmicBathSpec::new(self.xi, self.omega_c, self.beta);
        if let Some(w) = self.omega_max {
            spec.omega_max = w;
        }
        if let Some(n) = self.n_modes {
            spec.n_modes = n;
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl NumericsSection {
    pub fn build(&self, threads: usize) -> Result<Numerics> {
        let order = Order::from_int(self.order as i64)
            .map_err(|_| FrodsError::invalid("numerics.order", "must be 1 or 2"))?;
        let num = Numerics {
            dt: self.dt,
            n_steps: self.n_steps,
            order,
            k_max: self.k_max.unwrap_or(0),
            d_max: self.d_max,
            threads,
        };
        num.validate()?;
        Ok(num)
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| FrodsError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
            .map_err(|e| match e {
                FrodsError::Config(msg) => FrodsError::Config(format!("{}: {msg}", path.display())),
                other => other,
            })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FrodsError::Config(e.to_string()))
    }

    /// Builds every runtime object once, so errors surface before any computation.
    pub fn validate(&self) -> Result<()> {
        self.run_spec(1).map(|_| ())?;
        self.observables().map(|_| ())
    }

    pub fn run_spec(&self, threads: usize) -> Result<RunSpec> {
        Ok(RunSpec {
            model: self.model.build()?,
            bath: self.bath.build()?,
            numerics: self.numerics.build(threads)?,
        })
    }

    pub fn observables(&self) -> Result<Vec<ObservableKind>> {
        let default = if self.model.kind == ModelName::SpinBoson {
            ObservableKind::SigmaZ
        } else {
            ObservableKind::Populations
        };
        let list = self.output.observables.clone().unwrap_or_else(|| vec![default]);
        if list.is_empty() {
            return Err(FrodsError::invalid("output.observables", "must not be empty"));
        }
        if list.contains(&ObservableKind::SigmaZ) && self.model.build()?.dim() != 2 {
            return Err(FrodsError::invalid(
                "output.observables",
                "sigma_z needs a two-level model",
            ));
        }
        Ok(list)
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per time point: `t`, the observables, then trace and Hermiticity diagnostics.
pub fn write_csv(w: &mut impl Write, result: &RunResult) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(result.observables.iter().map(|s| s.name.clone()));
    header.extend(["trace_re", "trace_im", "herm_defect"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for (k, &t) in result.times.iter().enumerate() {
        let mut row = vec![num(t)];
        row.extend(result.observables.iter().map(|s| num(s.values[k])));
        let tr = result.diagnostics.trace[k];
        row.extend([num(tr.re), num(tr.im), num(result.diagnostics.herm_defect[k])]);
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Parsed CSV with a header row and numeric cells.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn parse(text: &str, label: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| FrodsError::Misaligned(format!("{label}: empty file")))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| FrodsError::Misaligned(format!("{label}: row {}: {e}", i + 2)))?;
            if row.len() != header.len() {
                return Err(FrodsError::Misaligned(format!(
                    "{label}: row {} has {} cells, header has {}",
                    i + 2,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(CsvTable { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

const DIAGNOSTIC_COLUMNS: [&str; 4] = ["t", "trace_re", "trace_im", "herm_defect"];

/// Runs the configured simulation, writes the CSV and logs one line per step.
pub fn cmd_run(
    config: &Path,
    threads: usize,
    out: Option<&Path>,
    log: &mut impl Write,
) -> Result<RunResult> {
    let cfg = RunConfig::load(config)?;
    let spec = cfg.run_spec(threads)?;
    let kinds = cfg.observables()?;
    let mut log_err = None;
    let result = simulate(&spec, &kinds, |s| {
        if let Err(e) = writeln!(log, "{s}") {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(e.into());
    }
    match out.map(Path::to_path_buf).or(cfg.output.path.clone()) {
        Some(path) => {
            let mut buf = Vec::new();
            write_csv(&mut buf, &result)?;
            fs::write(path, buf)?;
        }
        None => write_csv(&mut std::io::stdout().lock(), &result)?,
    }
    Ok(result)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    /// Relative Frobenius deviation per step `1..=n`.
    pub deviations: Vec<f64>,
    /// Order 2 only: deviation from the pruned sum, for information.
    pub pruned_gap: Vec<f64>,
}

impl OracleReport {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().fold(0.0, |a, &b| a.max(b))
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() <= ORACLE_TOL
    }
}

fn rel_dev(got: &ComplexMatrix, want: &ComplexMatrix) -> f64 {
    if want.frob_norm() == 0.0 {
        (got - want).frob_norm()
    } else {
        got.rel_frob_diff(want)
    }
}

/// Compares the engine against the enumerating sums for the first `steps` steps.
pub fn cmd_oracle(config: &Path, steps: usize, out: &mut impl Write) -> Result<OracleReport> {
    let cfg = RunConfig::load(config)?;
    let spec = cfg.run_spec(1)?;
    oracle_report(&spec, steps, out)
}

pub fn oracle_report(spec: &RunSpec, steps: usize, out: &mut impl Write) -> Result<OracleReport> {
    if steps == 0 {
        return Err(FrodsError::invalid("steps", "must be >= 1"));
    }
    let lim = OracleLimits::default();
    let cap = match spec.numerics.order {
        Order::First => lim.first_order_steps,
        Order::Second => lim.second_order_steps,
    };
    if steps > cap {
        return Err(FrodsError::OracleLimit(format!("{steps} steps exceed the cap of {cap}")));
    }
    let num = &spec.numerics;
    let bath = discretize(&spec.bath)?;
    let table = build_table(&bath, &spec.bath, num.dt, num.k_max, steps)?;
    let props = build_propagators(&spec.model, num.dt)?;
    let rho0 = &spec.model.rho0;
    let (rhos, _) = run(&props, &table, rho0, num.settings(), steps, |_| {})?;
    let mut report = OracleReport {
        deviations: Vec::new(),
        pruned_gap: Vec::new(),
    };
    for n in 1..=steps {
        let want = match (num.order, num.d_max) {
            (Order::First, None) => direct_rho_first(&props, rho0, &table, n, &lim)?,
            (order, d) => direct_rho_iterative(&props, rho0, &table, n, order, d, &lim)?,
        };
        let dev = rel_dev(&rhos[n], &want);
        report.deviations.push(dev);
        write!(out, "step={n} deviation={dev:.3e}")?;
        if num.order == Order::Second {
            let hat = direct_rho_second(&props, rho0, &table, n, true, &lim)?;
            let gap = rel_dev(&rhos[n], &hat);
            report.pruned_gap.push(gap);
            write!(out, " pruned_gap={gap:.3e}")?;
        }
        writeln!(out)?;
    }
    let verdict = if report.passed() { "ok" } else { "FAILED" };
    writeln!(out, "max_deviation={:.3e} tol={ORACLE_TOL:.0e} {verdict}", report.max_deviation())?;
    Ok(report)
}

/// Convergence order per observable column from CSVs at δt, 2δt, 4δt.
pub fn cmd_order(paths: [&Path; 3], out: &mut impl Write) -> Result<Vec<(String, f64)>> {
    let tables = paths
        .iter()
        .map(|p| CsvTable::load(p))
        .collect::<Result<Vec<_>>>()?;
    order_from_tables([&tables[0], &tables[1], &tables[2]], out)
}

pub fn order_from_tables(tables: [&CsvTable; 3], out: &mut impl Write) -> Result<Vec<(String, f64)>> {
    let names: Vec<&String> = tables[0]
        .header
        .iter()
        .filter(|h| !DIAGNOSTIC_COLUMNS.contains(&h.as_str()))
        .collect();
    if names.is_empty() {
        return Err(FrodsError::Misaligned("no observable columns".into()));
    }
    let col = |t: &CsvTable, name: &str| -> Result<Vec<f64>> {
        t.column(name)
            .ok_or_else(|| FrodsError::Misaligned(format!("column {name} missing")))
    };
    let times: Vec<Vec<f64>> = tables.iter().map(|t| col(t, "t")).collect::<Result<_>>()?;
    let mut res = Vec::new();
    for name in names {
        let v: Vec<Vec<f64>> = tables.iter().map(|t| col(t, name)).collect::<Result<_>>()?;
        let [a, b, c] = align_on_coarse((&times[0], &v[0]), (&times[1], &v[1]), (&times[2], &v[2]))?;
        let p = convergence_order(&a, &b, &c)?;
        writeln!(out, "{name} p={p:.4}")?;
        res.push((name.clone(), p));
    }
    Ok(res)
}

/// Bold-diagram counts for every cap up to `d_max`.
pub fn cmd_count(d_max: usize, k_max: usize, out: &mut impl Write) -> Result<u128> {
    if 2 * k_max > 127 {
        return Err(FrodsError::invalid("kmax", "must be <= 63"));
    }
    writeln!(out, "d_max,k_max,n_diag,n_first_order")?;
    for d in 0..=d_max {
        writeln!(out, "{d},{k_max},{},{}", diagram_count(d, k_max), first_order_count(d, k_max))?;
    }
    Ok(diagram_count(d_max, k_max))
}
