//! Two-time measurement statistics of an observable `S` under `e^{tL}`.
//!
//! `S` is measured in `ρ₀`, the system evolves for time `t`, and `S` is
//! measured again. `ΔS = s' - s` is the difference of the two outcomes.

use nalgebra::DMatrix;

use crate::detailed_balance::{check_db, DEFAULT_DB_TOL};
use crate::entropy::{ep_component, von_neumann_entropy, ExtendedReal};
use crate::error::{Error, Result};
use crate::lindblad::{deformed_generator, Lindbladian, Propagator, ReservoirDecomposition, SuperOperator};
use crate::operator::{
    check_dim, default_cluster_tol, max_abs, pinch, re_bracket, spectral_decompose, trace_norm, DensityMatrix,
    Operator, SpectralDecomposition,
};
use crate::quadrature::simpson_samples;

/// Probabilities this far below zero are rounding noise and get clamped.
const NEGATIVE_MASS_TOL: f64 = 1e-12;

/// `ΔS` discrepancy tolerated between the three routes of [`expflu_decomposition`].
pub const EXPFLU_TOL: f64 = 1e-4;

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeTime(t))
    }
}

fn clamp_probability(p: f64, what: &str) -> Result<f64> {
    if !(-NEGATIVE_MASS_TOL * 1e3..=1.0 + NEGATIVE_MASS_TOL * 1e3).contains(&p) {
        return Err(Error::Numeric(format!("{what} probability {p:.3e} outside [0, 1]")));
    }
    if p < -NEGATIVE_MASS_TOL {
        log::debug!("clamping {what} probability {p:.3e}");
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `⟨ρ₀|P_s⟩` for every eigenvalue `s` of `S`.
pub fn first_law(rho0: &DensityMatrix, s: &SpectralDecomposition) -> Result<Vec<f64>> {
    check_dim(rho0.matrix(), s.dim())?;
    s.projectors()
        .iter()
        .map(|p| clamp_probability(re_bracket(rho0.matrix(), p), "first-measurement"))
        .collect()
}

/// Joint law of the two outcomes; rows index `s`, columns `s'`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLaw {
    pub outcomes: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

impl JointLaw {
    pub fn first_marginal(&self) -> Vec<f64> {
        self.matrix.row_iter().map(|r| r.sum()).collect()
    }

    pub fn second_marginal(&self) -> Vec<f64> {
        self.matrix.column_iter().map(|c| c.sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.matrix.sum()
    }

    /// Law of `s'` given `s`; `None` for first outcomes of zero probability.
    pub fn conditional(&self) -> Vec<Option<Vec<f64>>> {
        self.matrix
            .row_iter()
            .map(|r| {
                let mass = r.sum();
                (mass > 0.0).then(|| r.iter().map(|x| x / mass).collect())
            })
            .collect()
    }

    pub fn delta(&self) -> DeltaDistribution {
        let range = self.outcomes.last().copied().unwrap_or(0.0) - self.outcomes.first().copied().unwrap_or(0.0);
        let tol = 1e-9 * range.max(1.0);
        let mut pairs = Vec::with_capacity(self.outcomes.len().pow(2));
        for (i, s) in self.outcomes.iter().enumerate() {
            for (k, s2) in self.outcomes.iter().enumerate() {
                pairs.push((s2 - s, self.matrix[(i, k)]));
            }
        }
        DeltaDistribution::from_pairs(pairs, tol)
    }
}

/// Joint law using an already built propagator.
pub fn joint_law_with(prop: &Propagator, rho0: &DensityMatrix, s: &SpectralDecomposition, t: f64) -> Result<JointLaw> {
    check_time(t)?;
    check_dim(rho0.matrix(), s.dim())?;
    let map = prop.map(t)?;
    let n = s.len();
    let mut matrix = DMatrix::zeros(n, n);
    for (i, p) in s.projectors().iter().enumerate() {
        let evolved = map.apply(&(p * rho0.matrix() * p))?;
        for (k, q) in s.projectors().iter().enumerate() {
            matrix[(i, k)] = clamp_probability(re_bracket(&evolved, q), "joint")?;
        }
    }
    Ok(JointLaw {
        outcomes: s.values().to_vec(),
        matrix,
    })
}

/// `⟨e^{tL}(P_s ρ₀ P_s)|P_{s'}⟩`.
pub fn joint_law(l: &Lindbladian, rho0: &DensityMatrix, s: &SpectralDecomposition, t: f64) -> Result<JointLaw> {
    joint_law_with(&Propagator::new(l), rho0, s, t)
}

/// Law of `ΔS` on its (sorted, distinct) support.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaDistribution {
    pub support: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl DeltaDistribution {
    /// Aggregates `(σ, mass)` pairs, merging values closer than `tol`.
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>, tol: f64) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::new();
        let mut probabilities: Vec<f64> = Vec::new();
        let mut anchor = f64::NEG_INFINITY;
        for (sigma, mass) in pairs {
            if sigma - anchor <= tol {
                *probabilities.last_mut().unwrap() += mass;
            } else {
                anchor = sigma;
                support.push(sigma);
                probabilities.push(mass);
            }
        }
        DeltaDistribution { support, probabilities }
    }

    /// Probability of the support point within `tol` of `sigma`, zero if none.
    pub fn probability_at(&self, sigma: f64, tol: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.probabilities)
            .filter(|(x, _)| (*x - sigma).abs() <= tol)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn expectation(&self) -> f64 {
        self.support.iter().zip(&self.probabilities).map(|(s, p)| s * p).sum()
    }

    /// `E[e^{αΔS}]`.
    pub fn mgf(&self, alpha: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.probabilities)
            .map(|(s, p)| p * (alpha * s).exp())
            .sum()
    }

    /// Largest `|ℚ(σ) - ℚ'(σ)|` over the union of both supports.
    pub fn distance(&self, other: &DeltaDistribution, tol: f64) -> f64 {
        self.support
            .iter()
            .chain(&other.support)
            .map(|&s| (self.probability_at(s, tol) - other.probability_at(s, tol)).abs())
            .fold(0.0, f64::max)
    }
}

pub fn delta_distribution(
    l: &Lindbladian,
    rho0: &DensityMatrix,
    s: &SpectralDecomposition,
    t: f64,
) -> Result<DeltaDistribution> {
    Ok(joint_law(l, rho0, s, t)?.delta())
}

/// Computation route for [`mgf`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgfMethod {
    /// Sum over the joint law.
    Direct,
    /// `⟨e^{tL_α}(pinch ρ₀)|𝟙⟩` with the deformed generator `L_α`.
    Deformed,
}

/// `E[e^{αΔS}]`.
pub fn mgf(
    l: &Lindbladian,
    rho0: &DensityMatrix,
    s: &SpectralDecomposition,
    t: f64,
    alpha: f64,
    method: MgfMethod,
) -> Result<f64> {
    check_time(t)?;
    match method {
        MgfMethod::Direct => {
            let joint = joint_law(l, rho0, s, t)?;
            let mut acc = 0.0;
            for (i, a) in joint.outcomes.iter().enumerate() {
                for (k, b) in joint.outcomes.iter().enumerate() {
                    acc += joint.matrix[(i, k)] * (alpha * (b - a)).exp();
                }
            }
            Ok(acc)
        }
        MgfMethod::Deformed => {
            check_dim(rho0.matrix(), s.dim())?;
            let deformed = deformed_generator(l, s, alpha)?;
            let evolved = deformed.exp(t).apply(&pinch(s, rho0.matrix())?)?;
            Ok(evolved.trace().re)
        }
    }
}

/// `E[ΔS] = ⟨e^{tL}(pinch ρ₀)|S⟩ - ⟨ρ₀|S⟩`.
pub fn expected_delta(l: &Lindbladian, rho0: &DensityMatrix, s: &SpectralDecomposition, t: f64) -> Result<f64> {
    expected_delta_with(&Propagator::new(l), rho0, s, t)
}

fn expected_delta_with(prop: &Propagator, rho0: &DensityMatrix, s: &SpectralDecomposition, t: f64) -> Result<f64> {
    check_time(t)?;
    check_dim(rho0.matrix(), s.dim())?;
    let obs = s.reconstruct();
    let pinched = pinch(s, rho0.matrix())?;
    let evolved = prop.evolve(&pinched, t)?;
    Ok(re_bracket(&evolved, &obs) - re_bracket(rho0.matrix(), &obs))
}

/// Spectral decomposition of the entropy observable `S⁺ = -log ρ⁺`.
pub fn entropy_observable(rho_plus: &DensityMatrix) -> Result<SpectralDecomposition> {
    let s = -rho_plus.log()?;
    spectral_decompose(&s, default_cluster_tol(&s))
}

/// The four sides of the expected-entropy identity for a detailed-balance pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpfluDecomposition {
    /// `E^t(ΔS⁺)` from the two-time law.
    pub expected: f64,
    /// `∫_0^t ⟨e^{sL}ρ₀|I⁺⟩ ds`.
    pub flux_integral: f64,
    /// `S(e^{tL}ρ₀) - S(ρ₀)`.
    pub entropy_change: f64,
    /// `∫_0^t EP(e^{sL}ρ₀) ds`.
    pub ep_integral: f64,
}

impl ExpfluDecomposition {
    /// Largest pairwise gap between `expected`, `flux_integral` and
    /// `entropy_change - ep_integral`.
    pub fn discrepancy(&self) -> f64 {
        let c = self.entropy_change - self.ep_integral;
        (self.expected - self.flux_integral)
            .abs()
            .max((self.expected - c).abs())
            .max((self.flux_integral - c).abs())
    }
}

/// States `e^{kh L}ρ₀` on a uniform grid of `n + 1` nodes over `[0, t]`.
fn trajectory(prop: &Propagator, rho0: &Operator, t: f64, n: usize) -> Result<Vec<Operator>> {
    let step: SuperOperator = prop.map(t / n as f64)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(rho0.clone());
    for k in 0..n {
        let next = step.apply(&out[k])?;
        out.push(next);
    }
    Ok(out)
}

fn grid_integrals(
    l: &Lindbladian,
    rho_plus: &DensityMatrix,
    prop: &Propagator,
    rho0: &DensityMatrix,
    i_plus: &Operator,
    t: f64,
    n: usize,
) -> Result<(f64, f64)> {
    let states = trajectory(prop, rho0.matrix(), t, n)?;
    let mut flux = Vec::with_capacity(n + 1);
    let mut ep = Vec::with_capacity(n + 1);
    for x in &states {
        flux.push(re_bracket(x, i_plus));
        let state = DensityMatrix::new(x.clone(), &crate::operator::Tolerances::loose(1e-8))?;
        match ep_component(&state, l, rho_plus)? {
            ExtendedReal::Finite(v) => ep.push(v),
            ExtendedReal::PosInfinity => {
                return Err(Error::Numeric("entropy production is infinite along the path".into()))
            }
        }
    }
    let h = t / n as f64;
    Ok((simpson_samples(&flux, h), simpson_samples(&ep, h)))
}

/// Evaluates the four sides of `E^t(ΔS⁺) = ∫⟨e^{sL}ρ₀|I⁺⟩ds = ΔS_vN - ∫EP ds`.
///
/// Quadratures start with 200 Simpson intervals and double until the relative
/// change is below `1e-6`. Fails if the sides disagree by more than [`EXPFLU_TOL`].
pub fn expflu_decomposition(
    l: &Lindbladian,
    rho_plus: &DensityMatrix,
    rho0: &DensityMatrix,
    t: f64,
) -> Result<ExpfluDecomposition> {
    check_time(t)?;
    rho0.require_faithful()?;
    let report = check_db(rho_plus, l, 1.0, DEFAULT_DB_TOL)?;
    if !report.holds {
        return Err(Error::Hypothesis(format!(
            "detailed balance fails (residual {:.3e})",
            report.residual
        )));
    }
    let s = entropy_observable(rho_plus)?;
    let prop = Propagator::new(l);
    let expected = expected_delta_with(&prop, rho0, &s, t)?;
    let entropy_change = von_neumann_entropy(&prop.state(rho0, t)?) - von_neumann_entropy(rho0);
    let (flux_integral, ep_integral) = if t == 0.0 {
        (0.0, 0.0)
    } else {
        let i_plus = l.apply_dual(&s.reconstruct())?;
        let mut n = 200;
        let mut prev = grid_integrals(l, rho_plus, &prop, rho0, &i_plus, t, n)?;
        loop {
            n *= 2;
            let next = grid_integrals(l, rho_plus, &prop, rho0, &i_plus, t, n)?;
            let settled = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1e-12);
            if (settled(prev.0, next.0) && settled(prev.1, next.1)) || n >= 6400 {
                break next;
            }
            prev = next;
        }
    };
    let out = ExpfluDecomposition {
        expected,
        flux_integral,
        entropy_change,
        ep_integral,
    };
    if out.discrepancy() > EXPFLU_TOL {
        return Err(Error::Numeric(format!(
            "expected-entropy identity fails by {:.3e}",
            out.discrepancy()
        )));
    }
    Ok(out)
}

fn require_db_parts(decomp: &ReservoirDecomposition) -> Result<()> {
    for part in decomp.parts() {
        let report = check_db(&part.steady, &part.generator, 1.0, DEFAULT_DB_TOL)?;
        if !report.holds {
            return Err(Error::Hypothesis(format!(
                "reservoir {}: detailed balance fails (residual {:.3e})",
                part.label, report.residual
            )));
        }
    }
    Ok(())
}

/// Law of `ΔS_j⁺` under `e^{tL_j}` for every reservoir.
pub fn multi_reservoir_2tmp(
    decomp: &ReservoirDecomposition,
    rho0: &DensityMatrix,
    t: f64,
) -> Result<Vec<DeltaDistribution>> {
    check_time(t)?;
    require_db_parts(decomp)?;
    decomp
        .parts()
        .iter()
        .map(|part| delta_distribution(&part.generator, rho0, &entropy_observable(&part.steady)?, t))
        .collect()
}

fn require_stationary(decomp: &ReservoirDecomposition, rho_plus: &DensityMatrix) -> Result<()> {
    let l = decomp.total();
    let residual = trace_norm(&l.apply_generator(rho_plus.matrix())?);
    let scale = max_abs(l.generator_matrix().matrix()).max(1.0);
    if residual > 1e-9 * scale {
        return Err(Error::Hypothesis(format!(
            "state is not stationary (‖L(ρ⁺)‖₁ = {residual:.3e})"
        )));
    }
    Ok(())
}

/// `-Σ_j E^t_{j,ρ⁺}(ΔS_j⁺) / t`, the finite-time estimate of `EP(ρ⁺)`.
pub fn ep_estimator(decomp: &ReservoirDecomposition, rho_plus: &DensityMatrix, t_small: f64) -> Result<f64> {
    if !(t_small > 0.0) {
        return Err(Error::OutOfRange {
            name: "t_small",
            value: t_small,
            expected: "t_small > 0",
        });
    }
    require_stationary(decomp, rho_plus)?;
    let mut total = 0.0;
    for part in decomp.parts() {
        let s = entropy_observable(&part.steady)?;
        total += expected_delta(&part.generator, rho_plus, &s, t_small)?;
    }
    Ok(-total / t_small)
}

/// Estimates at `t`, `t/2` and `t/4`, extrapolated to `t → 0` with a
/// two-level Richardson table.
pub fn ep_estimator_richardson(decomp: &ReservoirDecomposition, rho_plus: &DensityMatrix, t: f64) -> Result<f64> {
    let f0 = ep_estimator(decomp, rho_plus, t)?;
    let f1 = ep_estimator(decomp, rho_plus, t / 2.0)?;
    let f2 = ep_estimator(decomp, rho_plus, t / 4.0)?;
    Ok(richardson(f0, f1, f2))
}

/// Limit of `f(h)` from samples at `h`, `h/2`, `h/4`, cancelling the `O(h)` and `O(h²)` terms.
pub fn richardson(f0: f64, f1: f64, f2: f64) -> f64 {
    let r0 = 2.0 * f1 - f0;
    let r1 = 2.0 * f2 - f1;
    (4.0 * r1 - r0) / 3.0
}

/// Default estimator time `1e-3 / ‖L‖`.
pub fn default_t_small(decomp: &ReservoirDecomposition) -> f64 {
    1e-3 / max_abs(decomp.total().generator_matrix().matrix()).max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{c64, diag, matrix_unit};
    use crate::random::{random_db_model, random_density, random_lindbladian, seeded};

    fn diag_obs(values: &[f64]) -> SpectralDecomposition {
        spectral_decompose(&diag(values), 1e-12).unwrap()
    }

    #[test]
    fn first_law_reads_the_diagonal() {
        let rho = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        let law = first_law(&rho, &diag_obs(&[1.0, 2.0])).unwrap();
        assert!((law[0] - 0.3).abs() < 1e-15 && (law[1] - 0.7).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(3);
        let law = first_law(&mixed, &diag_obs(&[0.0, 0.0, 1.0])).unwrap();
        assert!((law[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_time_law_is_diagonal() {
        let mut rng = seeded(3);
        let l = random_lindbladian(3, 2, &mut rng);
        let rho = random_density(3, &mut rng);
        let s = diag_obs(&[0.0, 1.0, 2.5]);
        let joint = joint_law(&l, &rho, &s, 0.0).unwrap();
        let first = first_law(&rho, &s).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                let expect = if i == k { first[i] } else { 0.0 };
                assert!((joint.matrix[(i, k)] - expect).abs() < 1e-12);
            }
        }
        let delta = joint.delta();
        assert!((delta.probability_at(0.0, 1e-9) - 1.0).abs() < 1e-12);
        assert!(joint_law(&l, &rho, &s, -1.0).is_err());
    }

    #[test]
    fn mgf_routes_agree() {
        let mut rng = seeded(8);
        let l = random_lindbladian(3, 2, &mut rng);
        let rho = random_density(3, &mut rng);
        let s = diag_obs(&[-0.4, 0.3, 1.1]);
        for alpha in [-1.0, 0.0, 0.5, 2.0] {
            let a = mgf(&l, &rho, &s, 0.7, alpha, MgfMethod::Direct).unwrap();
            let b = mgf(&l, &rho, &s, 0.7, alpha, MgfMethod::Deformed).unwrap();
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn expected_delta_is_mgf_slope() {
        let mut rng = seeded(9);
        let l = random_lindbladian(2, 1, &mut rng);
        let rho = random_density(2, &mut rng);
        let s = diag_obs(&[0.0, 1.3]);
        let h = 1e-5;
        let up = mgf(&l, &rho, &s, 0.5, h, MgfMethod::Direct).unwrap();
        let down = mgf(&l, &rho, &s, 0.5, -h, MgfMethod::Direct).unwrap();
        let e = expected_delta(&l, &rho, &s, 0.5).unwrap();
        assert!(((up - down) / (2.0 * h) - e).abs() < 1e-6);
    }

    #[test]
    fn expflu_sides_agree_for_db_model() {
        let mut rng = seeded(21);
        let (l, rho_plus) = random_db_model(3, &mut rng);
        let rho0 = random_density(3, &mut rng);
        let d = expflu_decomposition(&l, &rho_plus, &rho0, 1.0).unwrap();
        assert!(d.discrepancy() < 1e-6);
        assert!(d.entropy_change >= d.expected - 1e-9);
        let zero = expflu_decomposition(&l, &rho_plus, &rho_plus, 1.0).unwrap();
        assert!(zero.expected.abs() < 1e-9 && zero.ep_integral.abs() < 1e-9);
    }

    #[test]
    fn estimator_vanishes_at_equilibrium() {
        let h = diag(&[0.0, 1.0]);
        let p = 0.7f64;
        let down = matrix_unit(2, 0, 1) * c64(p.sqrt(), 0.0);
        let up = matrix_unit(2, 1, 0) * c64((1.0 - p).sqrt(), 0.0);
        let l = Lindbladian::new(h, vec![down, up]).unwrap();
        let rho = DensityMatrix::from_diagonal(&[p, 1.0 - p]).unwrap();
        let part = crate::lindblad::Reservoir::new("a", l.clone(), rho.clone()).unwrap();
        let other = crate::lindblad::Reservoir::new("b", l, rho.clone()).unwrap();
        let decomp = ReservoirDecomposition::from_parts(vec![part, other]).unwrap();
        assert!(ep_estimator(&decomp, &rho, 1e-3).unwrap().abs() < 1e-8);
    }

    #[test]
    fn richardson_removes_quadratic_terms() {
        let f = |h: f64| 2.0 + 3.0 * h - 5.0 * h * h;
        assert!((richardson(f(0.1), f(0.05), f(0.025)) - 2.0).abs() < 1e-12);
    }
}
