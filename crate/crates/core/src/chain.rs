//! The continuous-time Markov chain behind the two-time statistics of
//! `S = -log ρ` for a detailed-balance pair `(ρ, L)`.

use nalgebra::{DMatrix, DVector};

use crate::detailed_balance::{check_db, DEFAULT_DB_TOL};
use crate::error::{Error, Result};
use crate::lindblad::{Lindbladian, Propagator, DEFAULT_KERNEL_TOL};
use crate::operator::{
    check_dim, default_cluster_tol, re_bracket, spectral_decompose, DensityMatrix, SpectralDecomposition,
};
use crate::two_time::joint_law_with;

/// Times at which `R P(t) R⁻¹ = P(t)ᵀ` is sampled by [`classical_db_check`].
pub const SAMPLED_TIMES: [f64; 3] = [0.1, 1.0, 10.0];

/// Chain on the spectrum of `S` with initial law `pi0` and rate matrix `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ctmc {
    states: Vec<f64>,
    pi0: Vec<f64>,
    rates: DMatrix<f64>,
}

impl Ctmc {
    pub fn new(states: Vec<f64>, pi0: Vec<f64>, rates: DMatrix<f64>) -> Result<Self> {
        let n = states.len();
        if pi0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: pi0.len(),
            });
        }
        if rates.nrows() != n || rates.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rates.nrows(),
            });
        }
        let scale = rates.amax().max(1.0);
        for i in 0..n {
            for k in 0..n {
                if i != k && rates[(i, k)] < -1e-12 * scale {
                    return Err(Error::InvalidState(format!(
                        "negative rate {:.3e} from state {i} to {k}",
                        rates[(i, k)]
                    )));
                }
            }
            let row: f64 = rates.row(i).sum();
            if row.abs() > 1e-10 * scale {
                return Err(Error::InvalidState(format!("rate row {i} sums to {row:.3e}")));
            }
        }
        let mass: f64 = pi0.iter().sum();
        if (mass - 1.0).abs() > 1e-9 || pi0.iter().any(|&p| p < -1e-12) {
            return Err(Error::InvalidState(format!("initial law has mass {mass}")));
        }
        Ok(Ctmc { states, pi0, rates })
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn pi0(&self) -> &[f64] {
        &self.pi0
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Diagonal of `R^α`, i.e. `e^{-αs}`.
    pub fn weights(&self, alpha: f64) -> Vec<f64> {
        self.states.iter().map(|s| (-alpha * s).exp()).collect()
    }

    /// Largest real part over the eigenvalues of `Q`.
    pub fn spectral_abscissa(&self) -> f64 {
        self.rates
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `S = -log ρ`, refusing degenerate spectra.
pub fn simple_entropy_observable(rho: &DensityMatrix) -> Result<SpectralDecomposition> {
    let s = -rho.log()?;
    let decomp = spectral_decompose(&s, default_cluster_tol(&s))?;
    let gap_tol = 1e-8 * decomp.range().max(f64::MIN_POSITIVE);
    if !decomp.is_simple() || !distinct_gaps_of_neighbours(decomp.values(), gap_tol) {
        return Err(Error::Hypothesis("-log ρ has a degenerate spectrum".into()));
    }
    Ok(decomp)
}

fn distinct_gaps_of_neighbours(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[1] - w[0] > tol)
}

/// Chain of the pair `(ρ, L)` started from `ρ₀`.
pub fn extract_chain(l: &Lindbladian, rho: &DensityMatrix, rho0: &DensityMatrix) -> Result<Ctmc> {
    check_dim(rho.matrix(), l.dim())?;
    check_dim(rho0.matrix(), l.dim())?;
    rho0.require_faithful()?;
    let s = simple_entropy_observable(rho)?;
    let report = check_db(rho, l, 1.0, DEFAULT_DB_TOL)?;
    if !report.holds {
        return Err(Error::Hypothesis(format!(
            "detailed balance fails (residual {:.3e})",
            report.residual
        )));
    }
    let n = s.len();
    let escape = l.cp_map_identity();
    let mut rates = DMatrix::zeros(n, n);
    for (k, pk) in s.projectors().iter().enumerate() {
        let image = l.cp_map(pk)?;
        for (i, pi) in s.projectors().iter().enumerate() {
            rates[(i, k)] = re_bracket(pi, &image);
        }
    }
    for (i, pi) in s.projectors().iter().enumerate() {
        rates[(i, i)] -= re_bracket(pi, &escape);
    }
    let pi0 = s
        .projectors()
        .iter()
        .map(|p| re_bracket(rho0.matrix(), p).max(0.0))
        .collect();
    Ctmc::new(s.values().to_vec(), pi0, rates)
}

/// `P(t) = e^{tQ}`.
pub fn transition_matrix(chain: &Ctmc, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    Ok((&chain.rates * t).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalDbReport {
    /// `max |RQ - QᵀR|`.
    pub rates_residual: f64,
    /// `max |R P(t) R⁻¹ - P(t)ᵀ|` over [`SAMPLED_TIMES`].
    pub transition_residual: f64,
}

impl ClassicalDbReport {
    pub fn max(&self) -> f64 {
        self.rates_residual.max(self.transition_residual)
    }
}

pub fn classical_db_check(chain: &Ctmc) -> ClassicalDbReport {
    let r = DMatrix::from_diagonal(&DVector::from_vec(chain.weights(1.0)));
    let r_inv = DMatrix::from_diagonal(&DVector::from_vec(chain.weights(-1.0)));
    let q = &chain.rates;
    let rates_residual = (&r * q - q.transpose() * &r).amax();
    let transition_residual = SAMPLED_TIMES
        .iter()
        .map(|&t| {
            let p = (q * t).exp();
            (&r * &p * &r_inv - p.transpose()).amax()
        })
        .fold(0.0, f64::max);
    ClassicalDbReport {
        rates_residual,
        transition_residual,
    }
}

/// Row vector `π ≥ 0` with `πQ = 0` and unit mass; requires a one-dimensional kernel.
pub fn invariant_distribution(chain: &Ctmc) -> Result<Vec<f64>> {
    let n = chain.len();
    let svd = chain.rates.transpose().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max();
    let threshold = DEFAULT_KERNEL_TOL * smax;
    let kernel: Vec<usize> = (0..n)
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= threshold)
        .collect();
    if kernel.len() != 1 {
        return Err(Error::Hypothesis(format!(
            "invariant law is not unique (kernel dimension {})",
            kernel.len()
        )));
    }
    let v: Vec<f64> = v_t.row(kernel[0]).iter().copied().collect();
    let total: f64 = v.iter().sum();
    Ok(v.into_iter().map(|x| (x / total).max(0.0)).collect())
}

/// `d₀ R^α e^{tQ} R^{-α} 𝟙`.
pub fn classical_mgf(chain: &Ctmc, t: f64, alpha: f64) -> Result<f64> {
    let p = transition_matrix(chain, t)?;
    let up = chain.weights(alpha);
    let down = chain.weights(-alpha);
    let mut acc = 0.0;
    for i in 0..chain.len() {
        for k in 0..chain.len() {
            acc += chain.pi0[i] * up[i] * p[(i, k)] * down[k];
        }
    }
    Ok(acc)
}

/// `-d₀ Q log R 𝟙`, the classical expression of the initial entropy flux.
pub fn classical_flux(chain: &Ctmc) -> f64 {
    let mut acc = 0.0;
    for i in 0..chain.len() {
        for k in 0..chain.len() {
            acc += chain.pi0[i] * chain.rates[(i, k)] * chain.states[k];
        }
    }
    acc
}

/// `max |π0_s P_{ss'}(t) - ⟨e^{tL}(P_s ρ₀ P_s)|P_{s'}⟩|` over the grid.
pub fn chain_vs_quantum(
    chain: &Ctmc,
    l: &Lindbladian,
    rho0: &DensityMatrix,
    s: &SpectralDecomposition,
    grid: &[f64],
) -> Result<f64> {
    if s.len() != chain.len() {
        return Err(Error::DimensionMismatch {
            expected: chain.len(),
            found: s.len(),
        });
    }
    let prop = Propagator::new(l);
    let mut worst: f64 = 0.0;
    for &t in grid {
        let joint = joint_law_with(&prop, rho0, s, t)?;
        let p = transition_matrix(chain, t)?;
        for i in 0..chain.len() {
            for k in 0..chain.len() {
                worst = worst.max((chain.pi0[i] * p[(i, k)] - joint.matrix[(i, k)]).abs());
            }
        }
    }
    Ok(worst)
}

/// `⟨e^{tL}(P_s)|P_{s'}⟩`, the quantum conditional law for the observable `s`.
pub fn quantum_transition_matrix(l: &Lindbladian, s: &SpectralDecomposition, t: f64) -> Result<DMatrix<f64>> {
    let map = Propagator::new(l).map(t)?;
    let n = s.len();
    let mut out = DMatrix::zeros(n, n);
    for (i, p) in s.projectors().iter().enumerate() {
        let evolved = map.apply(p)?;
        for (k, q) in s.projectors().iter().enumerate() {
            out[(i, k)] = re_bracket(&evolved, q);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{c64, diag, matrix_unit};
    use crate::random::{random_db_model, random_density, seeded};

    fn qubit_reset() -> (Lindbladian, DensityMatrix) {
        let t = [0.75f64, 0.25];
        let mut kraus = Vec::new();
        for k in 0..2 {
            for l in 0..2 {
                kraus.push(matrix_unit(2, k, l) * c64(t[k].sqrt(), 0.0));
            }
        }
        (
            Lindbladian::new(diag(&[0.0, 1.0]), kraus).unwrap(),
            DensityMatrix::from_diagonal(&t).unwrap(),
        )
    }

    #[test]
    fn reset_rates_match_hand_computation() {
        let (l, rho) = qubit_reset();
        let chain = extract_chain(&l, &rho, &rho).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[-0.25, 0.25, 0.75, -0.75]);
        assert!((chain.rates() - expect).amax() < 1e-12);
        let pi = invariant_distribution(&chain).unwrap();
        assert!((pi[0] - 0.75).abs() < 1e-12 && (pi[1] - 0.25).abs() < 1e-12);
        assert!(classical_db_check(&chain).max() < 1e-12);
    }

    #[test]
    fn no_jumps_gives_a_frozen_chain() {
        let l = Lindbladian::new(diag(&[0.0, 2.0]), vec![]).unwrap();
        let rho = DensityMatrix::from_diagonal(&[0.6, 0.4]).unwrap();
        let chain = extract_chain(&l, &rho, &rho).unwrap();
        assert_eq!(chain.rates().amax(), 0.0);
        assert!((transition_matrix(&chain, 3.0).unwrap() - DMatrix::identity(2, 2)).amax() < 1e-15);
        assert_eq!(classical_db_check(&chain).max(), 0.0);
    }

    #[test]
    fn degenerate_spectrum_is_refused() {
        let (l, _) = qubit_reset();
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(matches!(extract_chain(&l, &rho, &rho), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn non_reversible_cycle_fails_classical_db() {
        let q = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 1.0, 0.0, -1.0]);
        let third = (1.0f64 / 3.0).ln();
        let chain = Ctmc::new(vec![-third; 3], vec![1.0 / 3.0; 3], q).unwrap();
        assert!(classical_db_check(&chain).rates_residual > 0.1);
    }

    #[test]
    fn chain_reproduces_quantum_joint_law() {
        let mut rng = seeded(4);
        let (l, rho) = random_db_model(3, &mut rng);
        let rho0 = random_density(3, &mut rng);
        let chain = extract_chain(&l, &rho, &rho0).unwrap();
        let s = simple_entropy_observable(&rho).unwrap();
        assert!(chain_vs_quantum(&chain, &l, &rho0, &s, &[0.0, 0.1, 1.0, 10.0]).unwrap() < 1e-9);
        assert!(chain.spectral_abscissa() < 1e-9);
    }
}
