//! Quantum reset model `L(ρ) = -i[H, ρ] + Γ(T tr ρ - ρ)` and its closed forms.

use nalgebra::DMatrix;

use crate::chain::Ctmc;
use crate::entropy::{relative_entropy, ExtendedReal};
use crate::error::{Error, Result};
use crate::lindblad::{unvectorize, vectorize, Lindbladian, Reservoir, ReservoirDecomposition};
use crate::operator::{
    c64, check_gens, check_hermitian, commutator, default_cluster_tol, identity, max_abs, pinch, re_bracket,
    spectral_decompose, trace_norm, DensityMatrix, Eigh, Operator, SpectralDecomposition, Tolerances, C64,
};
use crate::two_time::DeltaDistribution;

/// `‖[H, T]‖₁` below this (relative to `max(1, ‖H‖)`) counts as commuting.
pub const COMMUTATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct QrmSpec {
    pub hamiltonian: Operator,
    pub target: DensityMatrix,
    pub gamma: f64,
    /// Share of the Hamiltonian carried by this part in a multi-reservoir model.
    pub lambda: f64,
}

impl QrmSpec {
    pub fn new(hamiltonian: Operator, target: DensityMatrix, gamma: f64) -> Result<Self> {
        check_hermitian(&hamiltonian, Tolerances::default().hermiticity)?;
        if hamiltonian.nrows() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                found: hamiltonian.nrows(),
            });
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: gamma,
                expected: "gamma > 0",
            });
        }
        Ok(QrmSpec {
            hamiltonian,
            target,
            gamma,
            lambda: 1.0,
        })
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Does `[H, T] = 0` hold (the detailed-balance case)?
    pub fn is_commuting(&self) -> bool {
        let defect = trace_norm(&commutator(&self.hamiltonian, self.target.matrix()));
        defect <= COMMUTATION_TOL * max_abs(&self.hamiltonian).max(1.0)
    }

    fn require_commuting(&self) -> Result<()> {
        if self.is_commuting() {
            Ok(())
        } else {
            Err(Error::Hypothesis("[H, T] does not vanish".into()))
        }
    }

    /// `S = -log T` under the genericity hypothesis on its gaps.
    pub fn entropy_observable(&self) -> Result<SpectralDecomposition> {
        let s = -self.target.log()?;
        let decomp = spectral_decompose(&s, default_cluster_tol(&s))?;
        if !decomp.is_simple() || !check_gens(&decomp, 1e-8 * decomp.range().max(1.0)) {
            return Err(Error::Hypothesis("spectral gaps of -log T are not distinct".into()));
        }
        Ok(decomp)
    }
}

/// Kraus family `√(Γ p_k) |φ_k⟩⟨e_l|` over the eigenpairs of `T`.
pub fn build_qrm(spec: &QrmSpec) -> Result<Lindbladian> {
    let d = spec.dim();
    let eig = spec.target.eigen();
    let mut kraus = Vec::with_capacity(d * d);
    for (k, &p) in eig.values.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let phi = eig.vectors.column(k);
        let amp = c64((spec.gamma * p).sqrt(), 0.0);
        for l in 0..d {
            let mut g = Operator::zeros(d, d);
            g.set_column(l, &(phi * amp));
            kraus.push(g);
        }
    }
    Lindbladian::new(spec.hamiltonian.clone() * c64(spec.lambda, 0.0), kraus)
}

/// `Γ ⟨T|X⟩ 𝟙`.
pub fn qrm_cp_map(spec: &QrmSpec, x: &Operator) -> Operator {
    let w = (spec.target.matrix().adjoint() * x).trace() * c64(spec.gamma, 0.0);
    identity(spec.dim()) * w
}

/// The nonzero eigenvalue differences of `H` are pairwise distinct beyond `tol`.
pub fn check_bohr(h: &Operator, tol: f64) -> bool {
    let e = Eigh::new(h).values;
    let mut gaps: Vec<f64> = Vec::new();
    for a in &e {
        for b in &e {
            let g = a - b;
            if g.abs() > tol {
                gaps.push(g);
            }
        }
    }
    gaps.sort_by(f64::total_cmp);
    gaps.windows(2).all(|w| w[1] - w[0] > tol)
}

/// Eigenvalues of the reset generator with their multiplicities.
pub fn qrm_spectrum(spec: &QrmSpec, tol: f64) -> Result<Vec<(C64, usize)>> {
    let h = &spec.hamiltonian * c64(spec.lambda, 0.0);
    if !check_bohr(&h, tol) {
        return Err(Error::Hypothesis("Bohr spectrum is not simple".into()));
    }
    let e = Eigh::new(&h).values;
    let mut zeros = 0;
    let mut out = vec![(c64(0.0, 0.0), 1)];
    for a in &e {
        for b in &e {
            let alpha = a - b;
            if alpha.abs() <= tol {
                zeros += 1;
            } else {
                out.push((c64(-spec.gamma, -alpha), 1));
            }
        }
    }
    if zeros > 1 {
        out.push((c64(-spec.gamma, 0.0), zeros - 1));
    }
    Ok(out)
}

/// Solves `(i ad_H + Γ)(X) = Y` as a `d² × d²` linear system.
pub fn resolvent(h: &Operator, gamma: f64, y: &Operator) -> Result<Operator> {
    let d = h.nrows();
    let id = identity(d);
    let ad = id.kronecker(h) - h.transpose().kronecker(&id);
    let system = ad * c64(0.0, 1.0) + Operator::identity(d * d, d * d) * c64(gamma, 0.0);
    let x = system
        .lu()
        .solve(&vectorize(y))
        .ok_or_else(|| Error::Numeric("singular resolvent".into()))?;
    Ok(unvectorize(&x, d))
}

/// `Γ (i ad_H + Γ)⁻¹ (T)`.
pub fn qrm_steady_state(spec: &QrmSpec) -> Result<DensityMatrix> {
    let h = &spec.hamiltonian * c64(spec.lambda, 0.0);
    let x = resolvent(&h, spec.gamma, spec.target.matrix())? * c64(spec.gamma, 0.0);
    DensityMatrix::new(x, &Tolerances::loose(1e-9))
}

/// `⟨X|𝟙⟩ρ⁺ + e^{-tΓ} e^{-itH}(X - ⟨X|𝟙⟩ρ⁺)e^{itH}` for an arbitrary operator `X`.
pub fn qrm_evolve_closed(spec: &QrmSpec, x: &Operator, t: f64) -> Result<Operator> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let steady = qrm_steady_state(spec)?;
    let h = &spec.hamiltonian * c64(spec.lambda, 0.0);
    let eig = Eigh::new(&h);
    let diag_phase = |sign: f64| {
        let phases: Vec<C64> = eig.values.iter().map(|e| C64::from_polar(1.0, sign * e * t)).collect();
        &eig.vectors * Operator::from_diagonal(&nalgebra::DVector::from_vec(phases)) * eig.vectors.adjoint()
    };
    let u = diag_phase(-1.0);
    let u_inv = diag_phase(1.0);
    let mass = x.trace();
    let rest = x - steady.matrix() * mass;
    Ok(steady.matrix() * mass + u * rest * u_inv * c64((-t * spec.gamma).exp(), 0.0))
}

pub fn qrm_propagate_closed(spec: &QrmSpec, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let x = qrm_evolve_closed(spec, rho0.matrix(), t)?;
    DensityMatrix::new(x, &Tolerances::loose(1e-9))
}

/// Closed-form chain of a commuting reset model: `Q = Γ(𝟙π⁺ - I)` with `π⁺ = (e^{-s})`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrmChain {
    pub states: Vec<f64>,
    pub pi_plus: Vec<f64>,
    pub gamma: f64,
}

impl QrmChain {
    pub fn rates(&self) -> DMatrix<f64> {
        let n = self.states.len();
        DMatrix::from_fn(n, n, |i, k| {
            self.gamma * (self.pi_plus[k] - if i == k { 1.0 } else { 0.0 })
        })
    }

    /// `P_{ss'}(t) = e^{-s'}(1 - e^{-tΓ}) + e^{-tΓ} δ_{ss'}`.
    pub fn transition(&self, t: f64) -> DMatrix<f64> {
        let n = self.states.len();
        let decay = (-t * self.gamma).exp();
        DMatrix::from_fn(n, n, |i, k| {
            self.pi_plus[k] * (1.0 - decay) + if i == k { decay } else { 0.0 }
        })
    }

    pub fn to_ctmc(&self, pi0: Vec<f64>) -> Result<Ctmc> {
        Ctmc::new(self.states.clone(), pi0, self.rates())
    }
}

pub fn qrm_chain_closed(spec: &QrmSpec) -> Result<QrmChain> {
    spec.require_commuting()?;
    let s = -spec.target.log()?;
    let decomp = spectral_decompose(&s, default_cluster_tol(&s))?;
    if !decomp.is_simple() {
        return Err(Error::Hypothesis("-log T has a degenerate spectrum".into()));
    }
    let states = decomp.values().to_vec();
    let pi_plus = states.iter().map(|s| (-s).exp()).collect();
    Ok(QrmChain {
        states,
        pi_plus,
        gamma: spec.gamma,
    })
}

/// Law of `ΔS` for `S = -log T`:
/// `ℚ(s' - s) = (1 - e^{-tΓ})⟨ρ₀|P_s⟩e^{-s'}` off the diagonal and
/// `ℚ(0) = (1 - e^{-tΓ})⟨ρ₀|T⟩ + e^{-tΓ}`.
pub fn qrm_delta_closed(spec: &QrmSpec, rho0: &DensityMatrix, t: f64) -> Result<DeltaDistribution> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    spec.require_commuting()?;
    rho0.require_faithful()?;
    let s = spec.entropy_observable()?;
    let decay = (-t * spec.gamma).exp();
    let mut pairs = Vec::new();
    for (a, p) in s.values().iter().zip(s.projectors()) {
        let first = re_bracket(rho0.matrix(), p);
        for b in s.values() {
            if a != b {
                pairs.push((b - a, (1.0 - decay) * first * (-b).exp()));
            }
        }
    }
    pairs.push((
        0.0,
        (1.0 - decay) * re_bracket(rho0.matrix(), spec.target.matrix()) + decay,
    ));
    Ok(DeltaDistribution::from_pairs(pairs, 1e-9 * s.range().max(1.0)))
}

/// `⟨ρ₀|T^α⟩ ⟨T^{1-α}|𝟙⟩ (1 - e^{-tΓ}) + e^{-tΓ}`.
pub fn qrm_mgf_closed(spec: &QrmSpec, rho0: &DensityMatrix, t: f64, alpha: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    spec.require_commuting()?;
    let decay = (-t * spec.gamma).exp();
    let first = re_bracket(rho0.matrix(), &spec.target.power(alpha)?);
    let second = spec.target.power(1.0 - alpha)?.trace().re;
    Ok(first * second * (1.0 - decay) + decay)
}

/// `(1 - e^{-tΓ}) ⟨T - pinch(ρ₀)|S⟩`.
pub fn qrm_expected_closed(spec: &QrmSpec, rho0: &DensityMatrix, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    spec.require_commuting()?;
    let s_op = -spec.target.log()?;
    let s = spectral_decompose(&s_op, default_cluster_tol(&s_op))?;
    let pinched = pinch(&s, rho0.matrix())?;
    let decay = (-t * spec.gamma).exp();
    Ok((1.0 - decay) * re_bracket(&(spec.target.matrix() - pinched), &s_op))
}

/// Reset parts sharing one Hamiltonian with weights `λ_j` summing to one.
///
/// The total is again a reset model, with `Γ = Σ Γ_j` and `T = Σ Γ_j T_j / Γ`.
pub fn build_multi_reservoir(parts: &[QrmSpec]) -> Result<ReservoirDecomposition> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidState("at least one reservoir is required".into()))?;
    let lambda_sum: f64 = parts.iter().map(|p| p.lambda).sum();
    if (lambda_sum - 1.0).abs() > 1e-12 {
        return Err(Error::Hypothesis(format!("weights sum to {lambda_sum}, expected 1")));
    }
    let h = &first.hamiltonian;
    let mut reservoirs = Vec::with_capacity(parts.len());
    for (j, p) in parts.iter().enumerate() {
        if max_abs(&(&p.hamiltonian - h)) > 1e-12 * max_abs(h).max(1.0) {
            return Err(Error::Hypothesis(format!("reservoir {j} uses a different Hamiltonian")));
        }
        if p.lambda < 0.0 {
            log::warn!("reservoir {j} has negative Hamiltonian weight {}", p.lambda);
        }
        let generator = build_qrm(p)?.with_label(format!("reservoir {j}"));
        reservoirs.push(Reservoir::new(
            format!("reservoir {j}"),
            generator,
            qrm_steady_state(p)?,
        )?);
    }
    let total = build_qrm(&total_spec(parts)?)?;
    ReservoirDecomposition::new(reservoirs, total)
}

/// The single reset model equal to the sum of the parts.
pub fn total_spec(parts: &[QrmSpec]) -> Result<QrmSpec> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidState("at least one reservoir is required".into()))?;
    let gamma: f64 = parts.iter().map(|p| p.gamma).sum();
    let mut t = Operator::zeros(first.dim(), first.dim());
    for p in parts {
        t += p.target.matrix() * c64(p.gamma / gamma, 0.0);
    }
    QrmSpec::new(first.hamiltonian.clone(), DensityMatrix::from_operator(t)?, gamma)
}

/// `Σ_j Γ_j (Ent(T|T_j) + Ent(T_j|T))`, the steady entropy production.
pub fn multi_reservoir_ep_closed(parts: &[QrmSpec]) -> Result<ExtendedReal> {
    let total = total_spec(parts)?;
    let mut acc = ExtendedReal::Finite(0.0);
    for p in parts {
        let pair = relative_entropy(&total.target, &p.target)? + relative_entropy(&p.target, &total.target)?;
        acc = acc
            + match pair {
                ExtendedReal::Finite(x) => ExtendedReal::Finite(p.gamma * x),
                inf => inf,
            };
    }
    Ok(acc)
}

/// `Σ_j Ent(T|T_j)`, the total entropy produced by each reservoir relaxing alone from `T`.
pub fn multi_reservoir_relaxation_closed(parts: &[QrmSpec]) -> Result<ExtendedReal> {
    let total = total_spec(parts)?;
    let mut acc = ExtendedReal::Finite(0.0);
    for p in parts {
        acc = acc + relative_entropy(&total.target, &p.target)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{propagate, spectral_gap, unique_steady_state};
    use crate::operator::diag;
    use crate::random::{random_commuting_qrm, random_density, random_qrm, seeded};

    fn qubit() -> QrmSpec {
        QrmSpec::new(
            diag(&[0.0, 1.0]),
            DensityMatrix::from_diagonal(&[0.75, 0.25]).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn generator_matches_reset_formula() {
        let mut rng = seeded(2);
        let spec = random_qrm(3, &mut rng);
        let l = build_qrm(&spec).unwrap();
        let rho = random_density(3, &mut rng);
        let direct = commutator(&spec.hamiltonian, rho.matrix()) * c64(0.0, -1.0)
            + (spec.target.matrix() - rho.matrix()) * c64(spec.gamma, 0.0);
        assert!(max_abs(&(l.apply_generator(rho.matrix()).unwrap() - direct)) < 1e-12);
        let x = crate::random::random_operator(3, &mut rng);
        assert!(max_abs(&(l.cp_map(&x).unwrap() - qrm_cp_map(&spec, &x))) < 1e-12);
    }

    #[test]
    fn bohr_examples() {
        assert!(check_bohr(&diag(&[0.0, 1.0]), 1e-10));
        assert!(!check_bohr(&diag(&[0.0, 1.0, 2.0]), 1e-10));
        assert!(check_bohr(&diag(&[0.0, 1.0, 3.0]), 1e-10));
    }

    #[test]
    fn qubit_spectrum_and_gap() {
        let spec = qubit();
        let eig = qrm_spectrum(&spec, 1e-10).unwrap();
        assert_eq!(eig.len(), 4);
        assert!(eig.contains(&(c64(-1.0, 0.0), 1)));
        assert!((spectral_gap(&build_qrm(&spec).unwrap()).unwrap() - 1.0).abs() < 1e-10);
        let zero_h = QrmSpec::new(diag(&[0.0, 0.0]), spec.target.clone(), 2.0).unwrap();
        assert_eq!(
            qrm_spectrum(&zero_h, 1e-10).unwrap(),
            vec![(c64(0.0, 0.0), 1), (c64(-2.0, 0.0), 3)]
        );
    }

    #[test]
    fn steady_state_and_propagator_match_engine() {
        let mut rng = seeded(12);
        let spec = random_qrm(3, &mut rng);
        let l = build_qrm(&spec).unwrap();
        let steady = qrm_steady_state(&spec).unwrap();
        assert!(max_abs(&(steady.matrix() - unique_steady_state(&l).unwrap().matrix())) < 1e-9);
        let rho0 = random_density(3, &mut rng);
        for t in [0.0, 0.3, 2.0] {
            let closed = qrm_propagate_closed(&spec, &rho0, t).unwrap();
            let generic = propagate(&l, &rho0, t).unwrap();
            assert!(max_abs(&(closed.matrix() - generic.matrix())) < 1e-9);
        }
        let commuting = random_commuting_qrm(3, &mut rng);
        let s = qrm_steady_state(&commuting).unwrap();
        assert!(max_abs(&(s.matrix() - commuting.target.matrix())) < 1e-12);
    }

    #[test]
    fn qubit_chain_rates() {
        let chain = qrm_chain_closed(&qubit()).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[-0.25, 0.25, 0.75, -0.75]);
        assert!((chain.rates() - expect).amax() < 1e-12);
        let p = chain.transition(50.0);
        assert!((p[(1, 0)] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn closed_laws_are_normalized() {
        let mut rng = seeded(13);
        let spec = random_commuting_qrm(3, &mut rng);
        let rho0 = random_density(3, &mut rng);
        let law = qrm_delta_closed(&spec, &rho0, 0.8).unwrap();
        assert!((law.total() - 1.0).abs() < 1e-12);
        assert!((qrm_mgf_closed(&spec, &rho0, 0.8, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let at_target = qrm_expected_closed(&spec, &spec.target, 0.8).unwrap();
        assert!(at_target.abs() < 1e-12);
    }

    #[test]
    fn multi_reservoir_total_is_a_reset_model() {
        let mut rng = seeded(14);
        let a = random_commuting_qrm(2, &mut rng).with_lambda(0.3);
        let t_b = crate::random::random_density(2, &mut rng);
        let b = QrmSpec::new(a.hamiltonian.clone(), t_b, 0.5).unwrap().with_lambda(0.7);
        let decomp = build_multi_reservoir(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(decomp.parts().len(), 2);
        assert!(build_multi_reservoir(&[a.clone().with_lambda(0.5), b]).is_err());
        let single = build_multi_reservoir(&[a.with_lambda(1.0)]).unwrap();
        assert_eq!(single.parts().len(), 1);
    }
}
