//! Von Neumann and relative entropies, entropy production and entropy fluxes.

use std::fmt;
use std::ops::Add;

use crate::detailed_balance::is_kms_state;
use crate::error::{Error, Result};
use crate::lindblad::{is_relaxing, Lindbladian, Propagator, Reservoir, ReservoirDecomposition};
use crate::operator::{c64, check_dim, max_abs, re_bracket, trace_norm, DensityMatrix, Operator, Tolerances};

/// Eigenvalues of a state at or below this are treated as exact zeros.
pub const ZERO_EIGENVALUE: f64 = 1e-12;

/// A real number or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::PosInfinity => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::PosInfinity,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::PosInfinity => write!(f, "inf"),
        }
    }
}

/// `S(ρ) = -tr ρ log ρ` with `0 log 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.eigen()
        .values
        .iter()
        .filter(|&&p| p > ZERO_EIGENVALUE)
        .map(|&p| -p * p.ln())
        .sum::<f64>()
        .max(0.0)
}

/// `Ent(μ|ν) = tr μ (log μ - log ν)`, infinite unless `ker ν ⊂ ker μ`.
pub fn relative_entropy(mu: &DensityMatrix, nu: &DensityMatrix) -> Result<ExtendedReal> {
    check_dim(nu.matrix(), mu.dim())?;
    let eig = nu.eigen();
    let weights = eig.diagonal_of(mu.matrix());
    let mut cross = 0.0;
    for (&q, w) in eig.values.iter().zip(&weights) {
        if q > ZERO_EIGENVALUE {
            cross += w.re * q.ln();
        } else if w.re > Tolerances::default().psd {
            return Ok(ExtendedReal::PosInfinity);
        }
    }
    let value = -von_neumann_entropy(mu) - cross;
    Ok(ExtendedReal::Finite(if value.abs() < 1e-13 { 0.0 } else { value }))
}

/// `Σ_r a_r log p_r` for `a_r = ⟨φ_r|A φ_r⟩` in the eigenbasis of `ρ`,
/// with `a log 0 = -∞` for `a > 0` (returned as `None`) and `0 log 0 = 0`.
fn pairing_with_log(rho: &DensityMatrix, a: &Operator) -> Result<Option<f64>> {
    let eig = rho.eigen();
    let diag = eig.diagonal_of(a);
    let zero_tol = 1e-12 * max_abs(a).max(1.0);
    let mut acc = 0.0;
    for (&p, w) in eig.values.iter().zip(&diag) {
        if p > ZERO_EIGENVALUE {
            acc += w.re * p.ln();
        } else if w.re > zero_tol {
            return Ok(None);
        } else if w.re < -zero_tol {
            return Err(Error::Numeric(format!(
                "generator drives weight {:.3e} out of the kernel of the state",
                w.re
            )));
        }
    }
    Ok(Some(acc))
}

/// `EP_j(ρ) = ⟨L_j(ρ) | log ρ_j⁺ - log ρ⟩`, possibly `+∞` when `ρ` is not faithful.
pub fn ep_component(rho: &DensityMatrix, l_j: &Lindbladian, steady_j: &DensityMatrix) -> Result<ExtendedReal> {
    check_dim(rho.matrix(), l_j.dim())?;
    let log_plus = steady_j.log()?;
    let lr = l_j.apply_generator(rho.matrix())?;
    let with_steady = re_bracket(&lr, &log_plus);
    let Some(with_state) = pairing_with_log(rho, &lr)? else {
        return Ok(ExtendedReal::PosInfinity);
    };
    let ep = with_steady - with_state;
    let scale = max_abs(l_j.generator_matrix().matrix()).max(1.0);
    if ep < -1e-9 * scale {
        return Err(Error::Numeric(format!("negative entropy production {ep:.3e}")));
    }
    Ok(ExtendedReal::Finite(ep))
}

pub fn ep_total(decomp: &ReservoirDecomposition, rho: &DensityMatrix) -> Result<ExtendedReal> {
    let mut total = ExtendedReal::Finite(0.0);
    for part in decomp.parts() {
        total = total + ep_component(rho, &part.generator, &part.steady)?;
    }
    Ok(total)
}

/// Entropy observable `S⁺ = -log ρ⁺` of a reservoir, its flux `I⁺ = L_j†(S⁺)`
/// and, for a thermal reservoir, the heat flux `Q⁺ = L_j†(H)`.
#[derive(Debug, Clone)]
pub struct EntropyFlux {
    pub label: String,
    pub s_plus: Operator,
    pub i_plus: Operator,
    pub beta: Option<f64>,
    pub q_plus: Option<Operator>,
    /// `‖I⁺ - β Q⁺‖₁` when `ρ_j⁺` is the Gibbs state of `H` at `β`.
    pub kms_residual: Option<f64>,
}

impl EntropyFlux {
    /// `⟨ρ|I⁺⟩`.
    pub fn rate(&self, rho: &Operator) -> f64 {
        re_bracket(rho, &self.i_plus)
    }
}

/// Flux of a reservoir; `thermal = Some((β, H))` also computes the heat flux.
pub fn entropy_flux(
    label: impl Into<String>,
    l_j: &Lindbladian,
    steady_j: &DensityMatrix,
    thermal: Option<(f64, &Operator)>,
) -> Result<EntropyFlux> {
    let s_plus = -steady_j.log()?;
    let i_plus = l_j.apply_dual(&s_plus)?;
    let (beta, q_plus, kms_residual) = match thermal {
        Some((beta, h)) => {
            let q = l_j.apply_dual(h)?;
            let residual = if is_kms_state(steady_j, h, beta, 1e-8)? {
                Some(trace_norm(&(&i_plus - &q * c64(beta, 0.0))))
            } else {
                None
            };
            (Some(beta), Some(q), residual)
        }
        None => (None, None, None),
    };
    Ok(EntropyFlux {
        label: label.into(),
        s_plus,
        i_plus,
        beta,
        q_plus,
        kms_residual,
    })
}

/// Flux of a reservoir, thermal when the reservoir carries an inverse temperature.
pub fn reservoir_flux(reservoir: &Reservoir, hamiltonian: &Operator) -> Result<EntropyFlux> {
    entropy_flux(
        reservoir.label.clone(),
        &reservoir.generator,
        &reservoir.steady,
        reservoir.beta.map(|b| (b, hamiltonian)),
    )
}

/// `|dS/dt - EP(ρ_t) - Σ_j ⟨ρ_t|I_j⁺⟩|` with `dS/dt` from a central difference
/// of step `h` (forward when `t < h`).
pub fn entropy_balance_residual(
    decomp: &ReservoirDecomposition,
    rho0: &DensityMatrix,
    t: f64,
    h: f64,
) -> Result<ExtendedReal> {
    if !(h > 0.0) {
        return Err(Error::OutOfRange {
            name: "h",
            value: h,
            expected: "h > 0",
        });
    }
    let prop = Propagator::new(decomp.total());
    let rho_t = prop.state(rho0, t)?;
    let derivative = if t >= h {
        let ahead = von_neumann_entropy(&prop.state(rho0, t + h)?);
        let behind = von_neumann_entropy(&prop.state(rho0, t - h)?);
        (ahead - behind) / (2.0 * h)
    } else {
        let ahead = von_neumann_entropy(&prop.state(rho0, t + h)?);
        (ahead - von_neumann_entropy(&rho_t)) / h
    };
    let ExtendedReal::Finite(ep) = ep_total(decomp, &rho_t)? else {
        return Ok(ExtendedReal::PosInfinity);
    };
    let mut flux = 0.0;
    for part in decomp.parts() {
        let f = entropy_flux(part.label.clone(), &part.generator, &part.steady, None)?;
        flux += f.rate(rho_t.matrix());
    }
    Ok(ExtendedReal::Finite((derivative - ep - flux).abs()))
}

/// Default finite-difference step `1e-5 · max(1, t)`.
pub fn default_step(t: f64) -> f64 {
    1e-5 * t.max(1.0)
}

/// `∫_0^∞ EP(e^{sL}ρ₀) ds` for a single reservoir, truncated at `50 / gap`
/// and integrated with Simpson on a log-spaced grid, doubling the number of
/// intervals until the relative change drops below `rel_tol`.
pub fn integrated_ep(
    l: &Lindbladian,
    steady: &DensityMatrix,
    rho0: &DensityMatrix,
    rel_tol: f64,
) -> Result<ExtendedReal> {
    let gap = crate::lindblad::spectral_gap(l)?;
    if !(gap > 0.0) {
        return Err(Error::Hypothesis("generator has no spectral gap".into()));
    }
    let horizon = 50.0 / gap;
    let prop = Propagator::new(l);
    let loose = Tolerances::loose(crate::lindblad::PROPAGATED_STATE_TOL);
    let ep_at = |t: f64| -> Result<ExtendedReal> {
        let x = prop.evolve(rho0.matrix(), t)?;
        ep_component(&DensityMatrix::new(x, &loose)?, l, steady)
    };
    let integrate = |n: usize| -> Result<ExtendedReal> {
        let u_max = horizon.ln_1p();
        let h = u_max / n as f64;
        let mut values = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let u = h * k as f64;
            match ep_at(u.exp() - 1.0)? {
                ExtendedReal::Finite(v) => values.push(v * u.exp()),
                ExtendedReal::PosInfinity => return Ok(ExtendedReal::PosInfinity),
            }
        }
        Ok(ExtendedReal::Finite(crate::quadrature::simpson_samples(&values, h)))
    };
    let mut n = 200;
    let mut prev = integrate(n)?;
    while n < 6400 {
        n *= 2;
        let next = integrate(n)?;
        match (prev, next) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) if (a - b).abs() <= rel_tol * b.abs().max(1e-12) => {
                return Ok(next)
            }
            (_, ExtendedReal::PosInfinity) => return Ok(next),
            _ => prev = next,
        }
    }
    Ok(prev)
}

/// `dS(ρ_t)/dt = -⟨L(ρ_t)|log ρ_t⟩`, `+∞` when `L` pushes weight into the kernel of `ρ_t`.
pub fn entropy_derivative(l: &Lindbladian, rho: &DensityMatrix) -> Result<ExtendedReal> {
    let lr = l.apply_generator(rho.matrix())?;
    Ok(match pairing_with_log(rho, &lr)? {
        Some(x) => ExtendedReal::Finite(-x),
        None => ExtendedReal::PosInfinity,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinitenessSample {
    pub t: f64,
    pub derivative: ExtendedReal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinitenessReport {
    pub samples: Vec<FinitenessSample>,
    pub all_finite: bool,
    /// Largest `|dS/dt|` over the finite samples.
    pub max_abs: f64,
    /// First grid time from which every later sample is finite.
    pub finite_from: Option<f64>,
}

/// Scans `t ↦ dS(ρ_t)/dt` on a time grid for a relaxing generator.
pub fn finiteness_scan(l: &Lindbladian, rho0: &DensityMatrix, grid: &[f64]) -> Result<FinitenessReport> {
    if !is_relaxing(l, 1e-9) {
        return Err(Error::Hypothesis("generator is not relaxing".into()));
    }
    let prop = Propagator::new(l);
    let mut samples = Vec::with_capacity(grid.len());
    for &t in grid {
        let rho_t = prop.state(rho0, t)?;
        samples.push(FinitenessSample {
            t,
            derivative: entropy_derivative(l, &rho_t)?,
        });
    }
    let all_finite = samples.iter().all(|s| s.derivative.is_finite());
    let max_abs = samples
        .iter()
        .filter_map(|s| s.derivative.finite())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let finite_from = samples
        .iter()
        .rposition(|s| !s.derivative.is_finite())
        .map_or(samples.first().map(|s| s.t), |k| samples.get(k + 1).map(|s| s.t));
    Ok(FinitenessReport {
        samples,
        all_finite,
        max_abs,
        finite_from,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detailed_balance::kms_state;
    use crate::operator::{diag, matrix_unit};
    use crate::random::{random_db_model, random_density, seeded};

    #[test]
    fn entropy_of_simple_states() {
        assert!((von_neumann_entropy(&DensityMatrix::maximally_mixed(4)) - 4f64.ln()).abs() < 1e-12);
        let pure = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(von_neumann_entropy(&pure), 0.0);
    }

    #[test]
    fn relative_entropy_kernel_rule() {
        let pure = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        let v = relative_entropy(&pure, &mixed).unwrap().finite().unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12);
        assert_eq!(relative_entropy(&mixed, &pure).unwrap(), ExtendedReal::PosInfinity);
        assert_eq!(relative_entropy(&mixed, &mixed).unwrap(), ExtendedReal::Finite(0.0));
    }

    #[test]
    fn ep_vanishes_at_steady_state_and_is_positive_elsewhere() {
        let mut rng = seeded(11);
        let (l, rho) = random_db_model(3, &mut rng);
        let ep = ep_component(&rho, &l, &rho).unwrap().finite().unwrap();
        assert!(ep.abs() < 1e-10);
        let other = random_density(3, &mut rng);
        assert!(ep_component(&other, &l, &rho).unwrap().finite().unwrap() > 0.0);
    }

    #[test]
    fn ep_is_infinite_when_generator_leaves_the_support() {
        let decay = matrix_unit(2, 1, 0);
        let l = Lindbladian::new(diag(&[0.0, 1.0]), vec![decay.clone(), decay.transpose()]).unwrap();
        let steady = DensityMatrix::maximally_mixed(2);
        let pure = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(ep_component(&pure, &l, &steady).unwrap(), ExtendedReal::PosInfinity);
        assert_eq!(entropy_derivative(&l, &pure).unwrap(), ExtendedReal::PosInfinity);
    }

    #[test]
    fn thermal_flux_is_beta_times_heat() {
        let h = diag(&[0.0, 1.0]);
        let beta = 0.7;
        let (gibbs, _) = kms_state(&h, beta).unwrap();
        let p = gibbs.matrix()[(0, 0)].re;
        let down = matrix_unit(2, 0, 1) * c64(p.sqrt(), 0.0);
        let up = matrix_unit(2, 1, 0) * c64((1.0 - p).sqrt(), 0.0);
        let l = Lindbladian::new(h.clone(), vec![down, up]).unwrap();
        let flux = entropy_flux("bath", &l, &gibbs, Some((beta, &h))).unwrap();
        assert!(flux.kms_residual.unwrap() < 1e-12);
    }

    #[test]
    fn balance_holds_for_single_reservoir() {
        let mut rng = seeded(5);
        let (l, rho) = random_db_model(2, &mut rng);
        let decomp = ReservoirDecomposition::from_parts(vec![Reservoir::new("a", l, rho).unwrap()]).unwrap();
        let rho0 = random_density(2, &mut rng);
        let r = entropy_balance_residual(&decomp, &rho0, 0.4, 1e-4).unwrap();
        assert!(r.finite().unwrap() < 1e-6);
    }
}
