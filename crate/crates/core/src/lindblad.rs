//! Lindblad generators, their duals, superoperator matrices and propagation.
//!
//! Operators are vectorized column-major, so `vec(A X B) = (Bᵀ ⊗ A) vec(X)`
//! and the duality bracket `⟨A|B⟩` is the Euclidean product `vec(A)* vec(B)`.
//! Under this convention the dual generator's matrix is the conjugate
//! transpose of the generator's.

use nalgebra::{DVector, Schur, SVD};

use crate::error::{Error, Result};
use crate::operator::{
    anticommutator, c64, check_dim, check_hermitian, check_square, commutator, identity, max_abs, trace_norm, zeros,
    DensityMatrix, Eigh, Operator, SpectralDecomposition, Tolerances, C64,
};

/// Relative singular-value threshold below which a superoperator direction
/// counts as kernel.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-9;

/// `L(ρ) = -i[H, ρ] + Σ_l (Γ_l ρ Γ_l* - ½{Γ_l* Γ_l, ρ})`.
#[derive(Debug, Clone)]
pub struct Lindbladian {
    hamiltonian: Operator,
    kraus: Vec<Operator>,
    label: Option<String>,
}

impl Lindbladian {
    pub fn new(hamiltonian: Operator, kraus: Vec<Operator>) -> Result<Self> {
        let dim = check_square(&hamiltonian)?;
        check_hermitian(&hamiltonian, Tolerances::default().hermiticity)?;
        for k in &kraus {
            check_dim(k, dim)?;
        }
        Ok(Lindbladian {
            hamiltonian,
            kraus,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Zero generator on a `dim`-dimensional space.
    pub fn zero(dim: usize) -> Self {
        Lindbladian {
            hamiltonian: zeros(dim),
            kraus: Vec::new(),
            label: None,
        }
    }

    /// Sum of generators: Hamiltonians add, Kraus families concatenate.
    pub fn sum<'a>(parts: impl IntoIterator<Item = &'a Lindbladian>) -> Result<Self> {
        let mut iter = parts.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InvalidState("empty Lindbladian sum".into()))?;
        let mut out = first.clone();
        out.label = None;
        for p in iter {
            check_dim(&p.hamiltonian, out.dim())?;
            out.hamiltonian += &p.hamiltonian;
            out.kraus.extend(p.kraus.iter().cloned());
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn kraus(&self) -> &[Operator] {
        &self.kraus
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn kraus_square_sum(&self) -> Operator {
        let mut k = zeros(self.dim());
        for g in &self.kraus {
            k += g.adjoint() * g;
        }
        k
    }

    pub fn apply_generator(&self, rho: &Operator) -> Result<Operator> {
        check_dim(rho, self.dim())?;
        let i = c64(0.0, 1.0);
        let mut out = commutator(&self.hamiltonian, rho) * (-i);
        for g in &self.kraus {
            out += g * rho * g.adjoint();
        }
        out -= anticommutator(&self.kraus_square_sum(), rho) * c64(0.5, 0.0);
        Ok(out)
    }

    /// `L†(X) = i[H, X] - ½{Φ(𝟙), X} + Φ(X)`.
    pub fn apply_dual(&self, x: &Operator) -> Result<Operator> {
        check_dim(x, self.dim())?;
        let i = c64(0.0, 1.0);
        let mut out = commutator(&self.hamiltonian, x) * i;
        out -= anticommutator(&self.kraus_square_sum(), x) * c64(0.5, 0.0);
        out += self.cp_map(x)?;
        Ok(out)
    }

    /// Associated CP map `Φ(X) = Σ_l Γ_l* X Γ_l`.
    pub fn cp_map(&self, x: &Operator) -> Result<Operator> {
        check_dim(x, self.dim())?;
        let mut out = zeros(self.dim());
        for g in &self.kraus {
            out += g.adjoint() * x * g;
        }
        Ok(out)
    }

    /// `Φ(𝟙) = Σ_l Γ_l* Γ_l`.
    pub fn cp_map_identity(&self) -> Operator {
        self.kraus_square_sum()
    }

    pub fn superoperator(&self, kind: &MapKind) -> Result<SuperOperator> {
        to_superoperator(kind, self)
    }

    pub fn generator_matrix(&self) -> SuperOperator {
        generator_matrix(self)
    }
}

/// Which map `to_superoperator` should build.
#[derive(Debug, Clone)]
pub enum MapKind {
    Generator,
    Dual,
    /// `ρ ↦ L(ρ e^{-αS}) e^{αS}`.
    Deformed {
        alpha: f64,
        observable: SpectralDecomposition,
    },
}

/// Column-major vectorization.
pub fn vectorize(a: &Operator) -> DVector<C64> {
    DVector::from_column_slice(a.as_slice())
}

pub fn unvectorize(v: &DVector<C64>, dim: usize) -> Operator {
    Operator::from_column_slice(dim, dim, v.as_slice())
}

/// Matrix of a linear map on `dim × dim` operators.
#[derive(Debug, Clone)]
pub struct SuperOperator {
    dim: usize,
    matrix: Operator,
}

impl SuperOperator {
    pub fn from_matrix(dim: usize, matrix: Operator) -> Result<Self> {
        check_dim(&matrix, dim * dim)?;
        Ok(SuperOperator { dim, matrix })
    }

    /// Matrix of an arbitrary linear map, built column by column from matrix units.
    pub fn from_map(dim: usize, map: impl Fn(&Operator) -> Operator) -> Self {
        let n = dim * dim;
        let mut matrix = Operator::zeros(n, n);
        for col in 0..n {
            let mut e = zeros(dim);
            e[(col % dim, col / dim)] = c64(1.0, 0.0);
            let image = map(&e);
            matrix.set_column(col, &vectorize(&image));
        }
        SuperOperator { dim, matrix }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        check_dim(x, self.dim)?;
        Ok(unvectorize(&(&self.matrix * vectorize(x)), self.dim))
    }

    /// Conjugate transpose, i.e. the adjoint for the duality bracket.
    pub fn adjoint(&self) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: self.matrix.adjoint(),
        }
    }

    /// `e^{t M}` by scaling and squaring with a Padé approximant.
    pub fn exp(&self, t: f64) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: (&self.matrix * c64(t, 0.0)).exp(),
        }
    }

    /// All eigenvalues, from a complex Schur form.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let schur = Schur::try_new(self.matrix.clone(), f64::EPSILON, 100_000)
            .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
        let (_, t) = schur.unpack();
        Ok(t.diagonal().iter().copied().collect())
    }

    /// Right singular vectors with singular value at most `rel_tol · σ_max`.
    pub fn kernel(&self, rel_tol: f64) -> Vec<Operator> {
        let svd = SVD::new(self.matrix.clone(), false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let threshold = rel_tol * smax.max(f64::MIN_POSITIVE);
        svd.singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= threshold || smax == 0.0)
            .map(|(i, _)| unvectorize(&v_t.row(i).adjoint(), self.dim))
            .collect()
    }
}

fn kron(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

fn generator_matrix(l: &Lindbladian) -> SuperOperator {
    let d = l.dim();
    let id = identity(d);
    let h = l.hamiltonian();
    let i = c64(0.0, 1.0);
    let half = c64(0.5, 0.0);
    let mut m = (kron(&id, h) - kron(&h.transpose(), &id)) * (-i);
    for g in l.kraus() {
        m += kron(&g.conjugate(), g);
    }
    let k = l.cp_map_identity();
    m -= (kron(&id, &k) + kron(&k.transpose(), &id)) * half;
    SuperOperator { dim: d, matrix: m }
}

fn dual_matrix(l: &Lindbladian) -> SuperOperator {
    let d = l.dim();
    let id = identity(d);
    let h = l.hamiltonian();
    let i = c64(0.0, 1.0);
    let half = c64(0.5, 0.0);
    let mut m = (kron(&id, h) - kron(&h.transpose(), &id)) * i;
    for g in l.kraus() {
        m += kron(&g.transpose(), &g.adjoint());
    }
    let k = l.cp_map_identity();
    m -= (kron(&id, &k) + kron(&k.transpose(), &id)) * half;
    SuperOperator { dim: d, matrix: m }
}

pub fn to_superoperator(kind: &MapKind, l: &Lindbladian) -> Result<SuperOperator> {
    match kind {
        MapKind::Generator => Ok(generator_matrix(l)),
        MapKind::Dual => Ok(dual_matrix(l)),
        MapKind::Deformed { alpha, observable } => deformed_generator(l, observable, *alpha),
    }
}

/// Matrix of `ρ ↦ L(ρ e^{-αS}) e^{αS}`.
pub fn deformed_generator(l: &Lindbladian, observable: &SpectralDecomposition, alpha: f64) -> Result<SuperOperator> {
    let d = l.dim();
    if observable.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: observable.dim(),
        });
    }
    let id = identity(d);
    let up = observable.function(|s| (alpha * s).exp());
    let down = observable.function(|s| (-alpha * s).exp());
    let base = generator_matrix(l);
    let matrix = kron(&up.transpose(), &id) * base.matrix * kron(&down.transpose(), &id);
    Ok(SuperOperator { dim: d, matrix })
}

/// Cached `e^{tL}` evaluator.
#[derive(Debug, Clone)]
pub struct Propagator {
    generator: SuperOperator,
}

/// States returned by propagation are validated at this looser level.
pub const PROPAGATED_STATE_TOL: f64 = 1e-8;

impl Propagator {
    pub fn new(l: &Lindbladian) -> Self {
        Propagator {
            generator: generator_matrix(l),
        }
    }

    pub fn from_superoperator(generator: SuperOperator) -> Self {
        Propagator { generator }
    }

    pub fn generator(&self) -> &SuperOperator {
        &self.generator
    }

    pub fn map(&self, t: f64) -> Result<SuperOperator> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.generator.exp(t))
    }

    /// `e^{tL}(X)` for an arbitrary operator.
    pub fn evolve(&self, x: &Operator, t: f64) -> Result<Operator> {
        self.map(t)?.apply(x)
    }

    pub fn state(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        let out = self.evolve(rho0.matrix(), t)?;
        DensityMatrix::new(out, &Tolerances::loose(PROPAGATED_STATE_TOL))
    }
}

/// `e^{tL}(ρ₀)`.
pub fn propagate(l: &Lindbladian, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    check_dim(rho0.matrix(), l.dim())?;
    Propagator::new(l).state(rho0, t)
}

/// Steady states found in the kernel of a generator.
#[derive(Debug, Clone)]
pub struct SteadyStates {
    pub states: Vec<DensityMatrix>,
    pub kernel_dimension: usize,
    /// Number of kernel directions for which no state representative was found.
    pub unrepresented: usize,
}

fn real_inner(a: &Operator, b: &Operator) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn gram_schmidt(mut vs: Vec<Operator>, drop_below: f64) -> Vec<Operator> {
    let mut basis: Vec<Operator> = Vec::new();
    for v in vs.drain(..) {
        let mut w = v;
        for b in &basis {
            let c = real_inner(b, &w);
            w -= b * c64(c, 0.0);
        }
        let n = real_inner(&w, &w).sqrt();
        if n > drop_below {
            basis.push(w / c64(n, 0.0));
        }
    }
    basis
}

fn min_eig(a: &Operator) -> f64 {
    Eigh::new(a).min()
}

/// Maximizes the concave function `c ↦ λ_min(A + cY)` on `[-r, r]`.
fn maximize_min_eig(a: &Operator, y: &Operator, r: f64) -> f64 {
    let f = |c: f64| min_eig(&(a + y * c64(c, 0.0)));
    let (mut lo, mut hi) = (-r, r);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Largest `c ≥ 0` with `λ_min(A + cY) ≥ -tol`, assuming it holds at `c = 0`.
fn boundary_along(a: &Operator, y: &Operator, tol: f64) -> Option<f64> {
    let ok = |c: f64| min_eig(&(a + y * c64(c, 0.0))) >= -tol;
    let mut hi = 1.0;
    let mut steps = 0;
    while ok(hi) {
        hi *= 2.0;
        steps += 1;
        if steps > 60 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// States spanning `ker L ∩ states`, built from the superoperator kernel.
pub fn steady_states(l: &Lindbladian, kernel_tol: f64) -> SteadyStates {
    let d = l.dim();
    let kernel = generator_matrix(l).kernel(kernel_tol);
    let kernel_dimension = kernel.len();

    let mut herm = Vec::with_capacity(2 * kernel.len());
    for k in &kernel {
        herm.push((k + k.adjoint()) * c64(0.5, 0.0));
        herm.push((k - k.adjoint()) * c64(0.0, -0.5));
    }
    let basis = gram_schmidt(herm, 1e-8);

    let Some((pivot, _)) = basis
        .iter()
        .enumerate()
        .map(|(i, b)| (i, b.trace().re.abs()))
        .filter(|(_, t)| *t > 1e-10)
        .max_by(|a, b| a.1.total_cmp(&b.1))
    else {
        log::warn!("no kernel direction with nonzero trace");
        return SteadyStates {
            states: Vec::new(),
            kernel_dimension,
            unrepresented: kernel_dimension,
        };
    };

    let mut anchor = &basis[pivot] / basis[pivot].trace();
    anchor = (&anchor + anchor.adjoint()) * c64(0.5, 0.0);
    let directions = gram_schmidt(
        basis
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pivot)
            .map(|(_, b)| b - &anchor * b.trace())
            .collect(),
        1e-8,
    );

    let psd_tol = 1e-12;
    if min_eig(&anchor) < -psd_tol && !directions.is_empty() {
        let r = 2.0 * (1.0 + trace_norm(&anchor));
        for _ in 0..25 {
            for y in &directions {
                let c = maximize_min_eig(&anchor, y, r);
                anchor += y * c64(c, 0.0);
            }
            if min_eig(&anchor) >= -psd_tol {
                break;
            }
        }
    }
    if min_eig(&anchor) < -psd_tol {
        log::warn!("kernel of the generator admits no positive representative");
        return SteadyStates {
            states: Vec::new(),
            kernel_dimension,
            unrepresented: kernel_dimension,
        };
    }

    let mut candidates = Vec::new();
    for y in &directions {
        for sign in [1.0, -1.0] {
            let dir = y * c64(sign, 0.0);
            if let Some(c) = boundary_along(&anchor, &dir, psd_tol) {
                candidates.push(&anchor + dir * c64(c, 0.0));
            }
        }
    }
    candidates.push(anchor);

    // Keep a linearly independent subset.
    let mut kept: Vec<Operator> = Vec::new();
    let mut ortho: Vec<Operator> = Vec::new();
    for c in candidates {
        if kept.len() >= basis.len() {
            break;
        }
        let mut w = c.clone();
        for b in &ortho {
            let p = real_inner(b, &w);
            w -= b * c64(p, 0.0);
        }
        let n = real_inner(&w, &w).sqrt();
        if n > 1e-6 {
            ortho.push(w / c64(n, 0.0));
            kept.push(c);
        }
    }

    let mut states = Vec::new();
    let mut unrepresented = kernel_dimension.saturating_sub(kept.len());
    for k in kept {
        match DensityMatrix::new(k, &Tolerances::loose(1e-8)) {
            Ok(s) if s.dim() == d => states.push(s),
            _ => unrepresented += 1,
        }
    }
    SteadyStates {
        states,
        kernel_dimension,
        unrepresented,
    }
}

/// The steady state, when the kernel is one-dimensional.
pub fn unique_steady_state(l: &Lindbladian) -> Result<DensityMatrix> {
    let found = steady_states(l, DEFAULT_KERNEL_TOL);
    if found.kernel_dimension != 1 || found.states.len() != 1 {
        return Err(Error::Hypothesis(format!(
            "steady state is not unique (kernel dimension {})",
            found.kernel_dimension
        )));
    }
    Ok(found.states.into_iter().next().unwrap())
}

/// Smallest `-Re λ` over the eigenvalues of the generator, excluding the one
/// nearest zero.
pub fn spectral_gap(l: &Lindbladian) -> Result<f64> {
    let mut eig = generator_matrix(l).eigenvalues()?;
    eig.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    Ok(eig.iter().skip(1).map(|z| -z.re).fold(f64::INFINITY, f64::min))
}

/// One-dimensional kernel and every other eigenvalue strictly in the left half plane.
pub fn is_relaxing(l: &Lindbladian, tol: f64) -> bool {
    let m = generator_matrix(l);
    let kernel = m.kernel(tol.max(DEFAULT_KERNEL_TOL));
    if kernel.len() != 1 {
        return false;
    }
    let scale = max_abs(m.matrix()).max(1.0);
    match m.eigenvalues() {
        Ok(mut eig) => {
            eig.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
            eig.iter().skip(1).all(|z| z.re < -tol * scale)
        }
        Err(_) => false,
    }
}

/// One reservoir of a decomposition `L = Σ_j L_j`.
#[derive(Debug, Clone)]
pub struct Reservoir {
    pub label: String,
    pub generator: Lindbladian,
    pub steady: DensityMatrix,
    pub beta: Option<f64>,
}

impl Reservoir {
    pub fn new(label: impl Into<String>, generator: Lindbladian, steady: DensityMatrix) -> Result<Self> {
        let label = label.into();
        check_dim(steady.matrix(), generator.dim())?;
        steady.require_faithful()?;
        let residual = trace_norm(&generator.apply_generator(steady.matrix())?);
        let scale = max_abs(generator_matrix(&generator).matrix()).max(1.0);
        if residual > 1e-9 * scale {
            return Err(Error::Hypothesis(format!(
                "reservoir {label}: state is not stationary (‖L_j(ρ_j)‖₁ = {residual:.3e})"
            )));
        }
        Ok(Reservoir {
            label,
            generator,
            steady,
            beta: None,
        })
    }

    /// Uses the unique steady state of `generator`, which must be faithful.
    pub fn with_unique_steady_state(label: impl Into<String>, generator: Lindbladian) -> Result<Self> {
        let label = label.into();
        let steady =
            unique_steady_state(&generator).map_err(|e| Error::Hypothesis(format!("reservoir {label}: {e}")))?;
        if !steady.is_faithful() {
            return Err(Error::Hypothesis(format!(
                "reservoir {label}: steady state is not faithful"
            )));
        }
        Reservoir::new(label, generator, steady)
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }
}

/// `L = Σ_j L_j` with a faithful stationary state for every part.
#[derive(Debug, Clone)]
pub struct ReservoirDecomposition {
    parts: Vec<Reservoir>,
    total: Lindbladian,
}

impl ReservoirDecomposition {
    /// Checks that `total` acts as the sum of the parts.
    pub fn new(parts: Vec<Reservoir>, total: Lindbladian) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidState("at least one reservoir is required".into()));
        }
        let d = total.dim();
        let mut sum = Operator::zeros(d * d, d * d);
        for p in &parts {
            if p.generator.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.generator.dim(),
                });
            }
            sum += generator_matrix(&p.generator).matrix;
        }
        let tm = generator_matrix(&total).matrix;
        let defect = max_abs(&(&tm - &sum));
        if defect > 1e-10 * max_abs(&tm).max(1.0) {
            return Err(Error::Hypothesis(format!(
                "total generator differs from the sum of its parts by {defect:.3e}"
            )));
        }
        Ok(ReservoirDecomposition { parts, total })
    }

    pub fn from_parts(parts: Vec<Reservoir>) -> Result<Self> {
        let total = Lindbladian::sum(parts.iter().map(|p| &p.generator))?;
        ReservoirDecomposition::new(parts, total)
    }

    pub fn parts(&self) -> &[Reservoir] {
        &self.parts
    }

    pub fn total(&self) -> &Lindbladian {
        &self.total
    }

    pub fn dim(&self) -> usize {
        self.total.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{bracket, diag, matrix_unit, pauli, spectral_decompose};
    use crate::random::{random_density, random_lindbladian, seeded};

    #[test]
    fn zero_generator_is_zero() {
        let l = Lindbladian::zero(3);
        let rho = DensityMatrix::maximally_mixed(3);
        assert_eq!(max_abs(&l.apply_generator(rho.matrix()).unwrap()), 0.0);
        assert_eq!(max_abs(&l.apply_dual(&identity(3)).unwrap()), 0.0);
        assert_eq!(max_abs(&l.cp_map(&identity(3)).unwrap()), 0.0);
        assert_eq!(max_abs(generator_matrix(&l).matrix()), 0.0);
    }

    #[test]
    fn generator_is_trace_annihilating_and_dual_unital() {
        let mut rng = seeded(7);
        for d in 2..=4 {
            let l = random_lindbladian(d, 2, &mut rng);
            let rho = random_density(d, &mut rng);
            assert!(l.apply_generator(rho.matrix()).unwrap().trace().norm() < 1e-12);
            assert!(max_abs(&l.apply_dual(&identity(d)).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn duality_residual_on_random_pairs() {
        let mut rng = seeded(11);
        for d in 2..=4 {
            let l = random_lindbladian(d, 3, &mut rng);
            let rho = random_density(d, &mut rng).into_matrix();
            let x = crate::random::random_operator(d, &mut rng);
            let lhs = bracket(&l.apply_generator(&rho).unwrap(), &x).unwrap();
            let rhs = bracket(&rho, &l.apply_dual(&x).unwrap()).unwrap();
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn cp_map_examples() {
        let x = Operator::from_fn(2, 2, |i, j| c64(i as f64 + 1.0, j as f64));
        let l = Lindbladian::new(zeros(2), vec![identity(2)]).unwrap();
        assert!(max_abs(&(l.cp_map(&x).unwrap() - &x)) < 1e-15);
    }

    #[test]
    fn superoperator_matches_direct_action() {
        let mut rng = seeded(3);
        let l = random_lindbladian(3, 2, &mut rng);
        let x = crate::random::random_operator(3, &mut rng);
        let gen = l.superoperator(&MapKind::Generator).unwrap();
        let dual = l.superoperator(&MapKind::Dual).unwrap();
        assert!(max_abs(&(gen.apply(&x).unwrap() - l.apply_generator(&x).unwrap())) < 1e-12);
        assert!(max_abs(&(dual.apply(&x).unwrap() - l.apply_dual(&x).unwrap())) < 1e-12);
        // Dual matrix is the conjugate transpose of the generator matrix.
        assert!(max_abs(&(gen.adjoint().matrix() - dual.matrix())) < 1e-12);
        // Generic construction from the action agrees as well.
        let built = SuperOperator::from_map(3, |e| l.apply_generator(e).unwrap());
        assert!(max_abs(&(built.matrix() - gen.matrix())) < 1e-12);
    }

    #[test]
    fn deformed_generator_reduces_at_zero() {
        let mut rng = seeded(5);
        let l = random_lindbladian(3, 2, &mut rng);
        let s = spectral_decompose(&diag(&[0.1, 0.7, 2.0]), 1e-12).unwrap();
        let gen = generator_matrix(&l);
        let at_zero = deformed_generator(&l, &s, 0.0).unwrap();
        assert!(max_abs(&(at_zero.matrix() - gen.matrix())) < 1e-13);
        let zero_obs = spectral_decompose(&zeros(3), 1e-12).unwrap();
        let flat = deformed_generator(&l, &zero_obs, 1.7).unwrap();
        assert!(max_abs(&(flat.matrix() - gen.matrix())) < 1e-13);
        // Direct action check at nonzero α.
        let alpha = 0.4;
        let m = deformed_generator(&l, &s, alpha).unwrap();
        let x = crate::random::random_operator(3, &mut rng);
        let up = s.function(|v| (alpha * v).exp());
        let down = s.function(|v| (-alpha * v).exp());
        let direct = l.apply_generator(&(&x * down)).unwrap() * up;
        assert!(max_abs(&(m.apply(&x).unwrap() - direct)) < 1e-12);
    }

    #[test]
    fn propagate_examples() {
        let mut rng = seeded(13);
        let l = random_lindbladian(3, 2, &mut rng);
        let rho = random_density(3, &mut rng);
        let same = propagate(&l, &rho, 0.0).unwrap();
        assert!(max_abs(&(same.matrix() - rho.matrix())) < 1e-14);
        assert!(matches!(propagate(&l, &rho, -1.0), Err(Error::NegativeTime(_))));

        // Pure Hamiltonian evolution.
        let h = crate::random::random_hermitian(3, &mut rng);
        let l = Lindbladian::new(h.clone(), vec![]).unwrap();
        let t = 0.7;
        let u = Eigh::new(&h);
        let unitary = {
            let phases = DVector::from_iterator(3, u.values.iter().map(|&e| (c64(0.0, -t * e)).exp()));
            &u.vectors * Operator::from_diagonal(&phases) * u.vectors.adjoint()
        };
        let expected = &unitary * rho.matrix() * unitary.adjoint();
        let got = propagate(&l, &rho, t).unwrap();
        assert!(max_abs(&(got.matrix() - expected)) < 1e-12);
    }

    #[test]
    fn steady_states_of_pure_hamiltonian_include_diagonal_states() {
        let l = Lindbladian::new(diag(&[0.0, 1.0]), vec![]).unwrap();
        let found = steady_states(&l, DEFAULT_KERNEL_TOL);
        assert_eq!(found.kernel_dimension, 2);
        assert_eq!(found.unrepresented, 0);
        for target in [diag(&[1.0, 0.0]), diag(&[0.0, 1.0])] {
            assert!(found.states.iter().any(|s| max_abs(&(s.matrix() - &target)) < 1e-9));
        }
        assert!(!is_relaxing(&l, 1e-9));
    }

    #[test]
    fn amplitude_damping_relaxes_to_ground_state() {
        let l = Lindbladian::new(diag(&[0.0, 1.0]), vec![matrix_unit(2, 0, 1)]).unwrap();
        assert!(is_relaxing(&l, 1e-9));
        let found = steady_states(&l, DEFAULT_KERNEL_TOL);
        assert_eq!(found.states.len(), 1);
        assert!(max_abs(&(found.states[0].matrix() - diag(&[1.0, 0.0]))) < 1e-9);
        assert!((spectral_gap(&l).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn dephasing_has_two_dimensional_kernel() {
        let l = Lindbladian::new(zeros(2), vec![pauli(3)]).unwrap();
        let found = steady_states(&l, DEFAULT_KERNEL_TOL);
        assert_eq!(found.kernel_dimension, 2);
        assert_eq!(found.states.len(), 2);
        assert!(!is_relaxing(&l, 1e-9));
    }

    #[test]
    fn decomposition_rejects_non_additive_total() {
        let a = Lindbladian::new(zeros(2), vec![matrix_unit(2, 0, 1)]).unwrap();
        let steady = DensityMatrix::from_diagonal(&[1.0 - 1e-3, 1e-3]).unwrap();
        // Not stationary for the pure decay generator.
        assert!(Reservoir::new("a", a.clone(), steady).is_err());
        let b = Lindbladian::new(zeros(2), vec![matrix_unit(2, 1, 0)]).unwrap();
        let both = Lindbladian::sum([&a, &b]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        let part = Reservoir::new("both", both.clone(), mixed).unwrap();
        assert!(ReservoirDecomposition::new(vec![part.clone()], both).is_ok());
        assert!(ReservoirDecomposition::new(vec![part], a).is_err());
    }
}
