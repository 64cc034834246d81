//! System Hamiltonians, coupling operators and the per-step propagators.

use num_complex::Complex64;

use crate::error::{FrodsError, Result};
use crate::linops::{check_hermitian, herm_exp, ComplexMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    SpinBoson,
    Multilevel,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    pub kind: ModelKind,
    pub h_s: ComplexMatrix,
    pub w_s: ComplexMatrix,
    pub rho0: ComplexMatrix,
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_fn(2, |i, j| real(if i != j { 1.0 } else { 0.0 }))
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diag(&[1.0, -1.0])
}

/// `|i><i|` for a zero-based basis index.
pub fn basis_projector(dim: usize, i: usize) -> ComplexMatrix {
    let mut p = ComplexMatrix::zeros(dim);
    p[(i, i)] = real(1.0);
    p
}

impl SystemModel {
    pub fn dim(&self) -> usize {
        self.h_s.dim()
    }

    pub fn custom(h_s: ComplexMatrix, w_s: ComplexMatrix, rho0: ComplexMatrix) -> Result<Self> {
        let m = SystemModel {
            kind: ModelKind::Custom,
            h_s,
            w_s,
            rho0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_rho0(mut self, rho0: ComplexMatrix) -> Result<Self> {
        self.rho0 = rho0;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.dim();
        for (name, mat) in [("w_s", &self.w_s), ("rho0", &self.rho0)] {
            if mat.dim() != m {
                return Err(FrodsError::invalid(
                    format!("model.{name}"),
                    format!("dimension {} does not match h_s dimension {m}", mat.dim()),
                ));
            }
        }
        for (name, mat) in [("h_s", &self.h_s), ("w_s", &self.w_s), ("rho0", &self.rho0)] {
            check_hermitian(mat)
                .map_err(|e| FrodsError::invalid(format!("model.{name}"), e.to_string()))?;
        }
        let tr = self.rho0.trace();
        if (tr - real(1.0)).norm() > 1e-12 {
            return Err(FrodsError::invalid(
                "model.rho0",
                format!("trace {tr} differs from 1"),
            ));
        }
        let floor = self.rho0.hermitian_eigenvalues()?[0];
        if floor < -1e-10 {
            return Err(FrodsError::invalid(
                "model.rho0",
                format!("not positive semidefinite (eigenvalue {floor:.3e})"),
            ));
        }
        Ok(())
    }
}

/// `H_s = ε σ_z + Δ σ_x`, `W_s = σ_z`, starting in `|0><0|`.
pub fn spin_boson(epsilon: f64, delta: f64) -> SystemModel {
    let h_s = &sigma_z().scale(real(epsilon)) + &sigma_x().scale(real(delta));
    SystemModel {
        kind: ModelKind::SpinBoson,
        h_s,
        w_s: sigma_z(),
        rho0: basis_projector(2, 0),
    }
}

/// Tridiagonal chain with hopping `omega` and `W_s = diag(-1 + i/J)`, `J = (m-1)/2`,
/// starting in the first basis state.
pub fn multilevel(m: usize, omega: f64) -> Result<SystemModel> {
    if m < 2 {
        return Err(FrodsError::invalid("model.m", "needs at least 2 levels"));
    }
    let j = (m - 1) as f64 / 2.0;
    let h_s = ComplexMatrix::from_fn(m, |a, b| real(if a.abs_diff(b) == 1 { omega } else { 0.0 }));
    let diag: Vec<f64> = (0..m).map(|i| -1.0 + i as f64 / j).collect();
    Ok(SystemModel {
        kind: ModelKind::Multilevel,
        h_s,
        w_s: ComplexMatrix::from_real_diag(&diag),
        rho0: basis_projector(m, 0),
    })
}

/// `(|1><1| + |M><M|) / 2`
pub fn symmetric_end_mixture(m: usize) -> ComplexMatrix {
    let mut r = ComplexMatrix::zeros(m);
    r[(0, 0)] += real(0.5);
    r[(m - 1, m - 1)] += real(0.5);
    r
}

/// Per-step operators for a fixed `Δt`, with their adjoints.
#[derive(Clone, Debug)]
pub struct PropagatorSet {
    pub dt: f64,
    pub p0: ComplexMatrix,
    pub p1: ComplexMatrix,
    pub p2: ComplexMatrix,
    pub g1: ComplexMatrix,
    pub g2: ComplexMatrix,
    pub p0d: ComplexMatrix,
    pub p1d: ComplexMatrix,
    pub p2d: ComplexMatrix,
    pub g1d: ComplexMatrix,
    pub g2d: ComplexMatrix,
}

impl PropagatorSet {
    pub fn dim(&self) -> usize {
        self.p0.dim()
    }
}

pub fn build_propagators(model: &SystemModel, dt: f64) -> Result<PropagatorSet> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(FrodsError::invalid("numerics.dt", "must be > 0"));
    }
    let h = &model.h_s;
    let w = &model.w_s;
    let i = Complex64::new(0.0, 1.0);
    let half = herm_exp(h, -i * (dt / 2.0))?;
    let p0 = herm_exp(h, -i * dt)?;
    let p1 = (&(&half * w) * &half).scale(-i * dt);
    let p2 = (&(&(&half * w) * w) * &half).scale(real(-dt * dt / 2.0));
    let g1 = (w * &half).scale(i * (dt / 2.0));
    let g2 = (&half * w).scale(i * dt);
    Ok(PropagatorSet {
        dt,
        p0d: p0.adjoint(),
        p1d: p1.adjoint(),
        p2d: p2.adjoint(),
        g1d: g1.adjoint(),
        g2d: g2.adjoint(),
        p0,
        p1,
        p2,
        g1,
        g2,
    })
}
