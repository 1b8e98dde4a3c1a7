//! Quantum detailed balance tests and the fixtures that exercise them.
//!
//! Self-adjointness with respect to `⟨A|B⟩_{ρ_s} = tr(ρ^s A* ρ^{1-s} B)` is
//! tested exactly on the matrix-unit basis: writing the weight as the
//! superoperator `W = (ρ^s)ᵀ ⊗ ρ^{1-s}`, a map `M` is `ρ_s`-self-adjoint iff
//! `W M = M* W`.

use std::fmt;

use crate::error::{Error, Result};
use crate::lindblad::{Lindbladian, SuperOperator};
use crate::operator::{
    c64, check_dim, check_hermitian, commutator, default_cluster_tol, max_abs, pauli, pinch, spectral_decompose,
    trace_norm, DensityMatrix, Eigh, Operator, Tolerances,
};

pub const DEFAULT_DB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DbVariant {
    /// `s = 1`, the inner product `tr(ρ A* B)`.
    Rho,
    RhoS(f64),
    /// `s = ½`.
    Kms,
}

impl DbVariant {
    pub fn from_s(s: f64) -> Self {
        if s == 1.0 {
            DbVariant::Rho
        } else if s == 0.5 {
            DbVariant::Kms
        } else {
            DbVariant::RhoS(s)
        }
    }

    pub fn s(&self) -> f64 {
        match self {
            DbVariant::Rho => 1.0,
            DbVariant::Kms => 0.5,
            DbVariant::RhoS(s) => *s,
        }
    }
}

impl fmt::Display for DbVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DbVariant::Rho => write!(f, "rho"),
            DbVariant::Kms => write!(f, "kms"),
            DbVariant::RhoS(s) => write!(f, "rho_s({s})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbReport {
    pub holds: bool,
    /// Max-abs defect of `W Φ - Φ* W` over the matrix-unit basis.
    pub residual: f64,
    /// Effective threshold: the declared tolerance scaled by `max(1, ‖Φ‖)`.
    pub tolerance: f64,
    pub variant: DbVariant,
    /// `‖L(ρ)‖₁`; detailed balance presumes this vanishes.
    pub stationarity_residual: f64,
}

fn weight(rho: &DensityMatrix, s: f64) -> Result<Operator> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange {
            name: "s",
            value: s,
            expected: "0 <= s <= 1",
        });
    }
    let left = rho.power(s)?;
    let right = rho.power(1.0 - s)?;
    Ok(left.transpose().kronecker(&right))
}

/// Defect of `ρ_s`-self-adjointness of an arbitrary superoperator.
pub fn self_adjoint_residual(rho: &DensityMatrix, map: &SuperOperator, s: f64) -> Result<f64> {
    rho.require_faithful()?;
    check_dim(rho.matrix(), map.dim())?;
    let w = weight(rho, s)?;
    let m = map.matrix();
    Ok(max_abs(&(&w * m - m.adjoint() * &w)))
}

pub fn cp_superoperator(l: &Lindbladian) -> SuperOperator {
    SuperOperator::from_map(l.dim(), |x| l.cp_map(x).expect("matching dims"))
}

/// Dissipative part of the dual, `X ↦ -½{Φ(𝟙), X} + Φ(X)`.
pub fn dual_dissipator_superoperator(l: &Lindbladian) -> SuperOperator {
    let k = l.cp_map_identity();
    SuperOperator::from_map(l.dim(), |x| {
        l.cp_map(x).expect("matching dims") - (&k * x + x * &k) * c64(0.5, 0.0)
    })
}

/// `ρ_s` detailed balance: `Φ` self-adjoint for `⟨·|·⟩_{ρ_s}`.
pub fn check_db(rho: &DensityMatrix, l: &Lindbladian, s: f64, tol: f64) -> Result<DbReport> {
    rho.require_faithful()?;
    check_dim(rho.matrix(), l.dim())?;
    let phi = cp_superoperator(l);
    let residual = self_adjoint_residual(rho, &phi, s)?;
    let tolerance = tol * max_abs(phi.matrix()).max(1.0);
    let stationarity_residual = trace_norm(&l.apply_generator(rho.matrix())?);
    if stationarity_residual > 1e-9 {
        log::warn!("detailed balance checked against a non-stationary state (‖L(ρ)‖₁ = {stationarity_residual:.3e})");
    }
    Ok(DbReport {
        holds: residual <= tolerance,
        residual,
        tolerance,
        variant: DbVariant::from_s(s),
        stationarity_residual,
    })
}

/// `(L ∘ Diag_ρ - Diag_ρ ∘ L)(X)`.
pub fn pinch_commutation_defect(rho: &DensityMatrix, l: &Lindbladian, x: &Operator) -> Result<Operator> {
    rho.require_faithful()?;
    let decomp = spectral_decompose(rho.matrix(), default_cluster_tol(rho.matrix()))?;
    Ok(l.apply_generator(&pinch(&decomp, x)?)? - pinch(&decomp, &l.apply_generator(x)?)?)
}

/// Max over matrix units of `‖(L ∘ Diag_ρ - Diag_ρ ∘ L)(E)‖₁`.
pub fn check_pinch_commutation(rho: &DensityMatrix, l: &Lindbladian) -> Result<f64> {
    rho.require_faithful()?;
    check_dim(rho.matrix(), l.dim())?;
    let d = l.dim();
    let decomp = spectral_decompose(rho.matrix(), default_cluster_tol(rho.matrix()))?;
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let e = crate::operator::matrix_unit(d, a, b);
            let defect = l.apply_generator(&pinch(&decomp, &e)?)? - pinch(&decomp, &l.apply_generator(&e)?)?;
            worst = worst.max(trace_norm(&defect));
        }
    }
    Ok(worst)
}

/// `(‖[Φ(𝟙), ρ]‖₁, ‖[H, ρ]‖₁)`.
pub fn commutation_identities(rho: &DensityMatrix, l: &Lindbladian) -> Result<(f64, f64)> {
    check_dim(rho.matrix(), l.dim())?;
    Ok((
        trace_norm(&commutator(&l.cp_map_identity(), rho.matrix())),
        trace_norm(&commutator(l.hamiltonian(), rho.matrix())),
    ))
}

/// Gibbs state `e^{-β(H - F)}` and free energy `F = -β⁻¹ log tr e^{-βH}`.
pub fn kms_state(h: &Operator, beta: f64) -> Result<(DensityMatrix, f64)> {
    if !(beta > 0.0) {
        return Err(Error::OutOfRange {
            name: "beta",
            value: beta,
            expected: "beta > 0",
        });
    }
    check_hermitian(h, Tolerances::default().hermiticity)?;
    let eig = Eigh::new(h);
    let ground = eig.min();
    let log_z = -beta * ground
        + eig
            .values
            .iter()
            .map(|e| (-beta * (e - ground)).exp())
            .sum::<f64>()
            .ln();
    let free_energy = -log_z / beta;
    let rho = eig.map(|e| (-beta * (e - free_energy)).exp());
    Ok((DensityMatrix::from_operator(rho)?, free_energy))
}

/// Qubit generator satisfying KMS detailed balance but not the `ρ` version.
#[derive(Debug, Clone)]
pub struct FagnolaFixture {
    pub kappa: f64,
    pub omega: f64,
    pub r: f64,
    pub s: f64,
    pub nu: f64,
    pub model: Lindbladian,
    pub rho: DensityMatrix,
}

pub fn fagnola_fixture(kappa: f64, omega: f64) -> Result<FagnolaFixture> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::OutOfRange {
            name: "kappa",
            value: kappa,
            expected: "0 < kappa < 1",
        });
    }
    let root = (1.0 - kappa * kappa).sqrt();
    let s = omega * (1.0 + kappa) / (1.0 - kappa);
    let r = omega * ((1.0 + kappa) / (1.0 - kappa)).sqrt();
    let nu = 0.5 * (1.0 - root);
    let h = pauli(1) * c64(kappa * omega, 0.0);
    let gamma = pauli(0) * c64(root, 0.0) + pauli(1) * c64(0.0, r) + pauli(2) * c64(s, 0.0) + pauli(3);
    let model = Lindbladian::new(h, vec![gamma])?.with_label("fagnola");
    let rho = DensityMatrix::from_operator((pauli(0) - pauli(3) * c64(root, 0.0)) * c64(0.5, 0.0))?;
    Ok(FagnolaFixture {
        kappa,
        omega,
        r,
        s,
        nu,
        model,
        rho,
    })
}

impl FagnolaFixture {
    /// `(L ∘ Diag_ρ - Diag_ρ ∘ L)(σ₂)`, a multiple of `σ₃`.
    pub fn commutation_defect(&self) -> Result<Operator> {
        pinch_commutation_defect(&self.rho, &self.model, &pauli(2))
    }

    /// `Δ_ρ^{1/2}(Γ*) - Γ`.
    pub fn modular_defect(&self) -> Result<f64> {
        let gamma = &self.model.kraus()[0];
        let half = self.rho.power(0.5)?;
        let inv_half = self.rho.power(-0.5)?;
        Ok(max_abs(&(half * gamma.adjoint() * inv_half - gamma)))
    }
}

/// Convenience: is `ρ` a Gibbs state of `h` at `beta` (up to `tol` in trace norm)?
pub fn is_kms_state(rho: &DensityMatrix, h: &Operator, beta: f64, tol: f64) -> Result<bool> {
    let (gibbs, _) = kms_state(h, beta)?;
    Ok(trace_norm(&(rho.matrix() - gibbs.matrix())) <= tol)
}
