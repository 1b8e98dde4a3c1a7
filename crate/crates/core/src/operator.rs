//! Dense operator algebra on a finite-dimensional Hilbert space.
//!
//! Operators are plain `DMatrix<Complex<f64>>`. States get a validated
//! wrapper ([`DensityMatrix`]) which caches its eigendecomposition, since
//! almost every entropic quantity needs it.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type Operator = DMatrix<C64>;

/// Numerical thresholds shared by the whole crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub hermiticity: f64,
    pub trace: f64,
    pub psd: f64,
    /// Eigenvalues at or below this are treated as exact zeros.
    pub faithfulness: f64,
    /// Relative eigenvalue clustering tolerance, scaled by `spectral radius + 1`.
    pub cluster: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermiticity: 1e-10,
            trace: 1e-10,
            psd: 1e-10,
            faithfulness: 1e-12,
            cluster: 1e-10,
        }
    }
}

impl Tolerances {
    /// Same thresholds with every state check loosened to `tol`.
    pub fn loose(tol: f64) -> Self {
        Tolerances {
            hermiticity: tol,
            trace: tol,
            psd: tol,
            ..Tolerances::default()
        }
    }
}

pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn identity(dim: usize) -> Operator {
    Operator::identity(dim, dim)
}

pub fn zeros(dim: usize) -> Operator {
    Operator::zeros(dim, dim)
}

/// Diagonal operator with real entries.
pub fn diag(entries: &[f64]) -> Operator {
    Operator::from_diagonal(&DVector::from_iterator(
        entries.len(),
        entries.iter().map(|&x| c64(x, 0.0)),
    ))
}

/// Matrix unit `|row⟩⟨col|`.
pub fn matrix_unit(dim: usize, row: usize, col: usize) -> Operator {
    let mut e = zeros(dim);
    e[(row, col)] = c64(1.0, 0.0);
    e
}

/// Pauli matrices, `0` being the identity.
pub fn pauli(k: usize) -> Operator {
    let z = c64(0.0, 0.0);
    let one = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    match k {
        0 => Operator::from_row_slice(2, 2, &[one, z, z, one]),
        1 => Operator::from_row_slice(2, 2, &[z, one, one, z]),
        2 => Operator::from_row_slice(2, 2, &[z, -i, i, z]),
        3 => Operator::from_row_slice(2, 2, &[one, z, z, -one]),
        _ => panic!("Pauli index must be 0..=3, got {k}"),
    }
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

pub fn anticommutator(a: &Operator, b: &Operator) -> Operator {
    a * b + b * a
}

pub(crate) fn check_square(a: &Operator) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    Ok(a.nrows())
}

pub(crate) fn check_dim(a: &Operator, dim: usize) -> Result<()> {
    check_square(a)?;
    if a.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: a.nrows(),
        });
    }
    Ok(())
}

/// Duality bracket `⟨A|B⟩ = tr(A* B)`.
pub fn bracket(a: &Operator, b: &Operator) -> Result<C64> {
    check_dim(b, check_square(a)?)?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Real part of the duality bracket, for pairs known to give a real value.
pub fn re_bracket(a: &Operator, b: &Operator) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn trace(a: &Operator) -> C64 {
    a.trace()
}

pub fn max_abs(a: &Operator) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Sum of the singular values.
pub fn trace_norm(a: &Operator) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().iter().sum()
}

/// Largest singular value.
pub fn operator_norm(a: &Operator) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn hermiticity_defect(a: &Operator) -> f64 {
    max_abs(&(a - a.adjoint()))
}

pub fn hermitian_part(a: &Operator) -> Operator {
    (a + a.adjoint()) * c64(0.5, 0.0)
}

pub(crate) fn check_hermitian(a: &Operator, tol: f64) -> Result<()> {
    check_square(a)?;
    let defect = hermiticity_defect(a);
    if defect > tol * max_abs(a).max(1.0) {
        return Err(Error::NotHermitian { defect });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: Operator,
}

impl Eigh {
    /// Decomposes the Hermitian part of `a`.
    pub fn new(a: &Operator) -> Self {
        let dim = a.nrows();
        if dim == 0 {
            return Eigh {
                values: Vec::new(),
                vectors: zeros(0),
            };
        }
        let eig = SymmetricEigen::new(hermitian_part(a));
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = Operator::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
        Eigh { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `V f(Λ) V*`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Operator {
        let d = DVector::from_iterator(self.values.len(), self.values.iter().map(|&x| c64(f(x), 0.0)));
        &self.vectors * Operator::from_diagonal(&d) * self.vectors.adjoint()
    }

    /// Diagonal entries `(φ_k, A φ_k)` of `a` in this eigenbasis.
    pub fn diagonal_of(&self, a: &Operator) -> Vec<C64> {
        (0..self.values.len())
            .map(|k| {
                let v = self.vectors.column(k);
                (v.adjoint() * a * v)[(0, 0)]
            })
            .collect()
    }
}

/// `e^{A}` for Hermitian `A`.
pub fn hermitian_exp(a: &Operator) -> Operator {
    Eigh::new(a).map(f64::exp)
}

/// Spectral decomposition `A = Σ_k values_k P_k` with distinct `values`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    values: Vec<f64>,
    projectors: Vec<Operator>,
    multiplicities: Vec<usize>,
}

/// Default clustering tolerance `1e-10 (spectral radius + 1)`.
pub fn default_cluster_tol(a: &Operator) -> f64 {
    let eig = Eigh::new(a);
    let radius = eig.min().abs().max(eig.max().abs());
    Tolerances::default().cluster * (radius + 1.0)
}

/// Spectral decomposition of a Hermitian operator; eigenvalues closer than
/// `cluster_tol` to their neighbour are merged into one projector.
pub fn spectral_decompose(a: &Operator, cluster_tol: f64) -> Result<SpectralDecomposition> {
    check_hermitian(a, Tolerances::default().hermiticity)?;
    let eig = Eigh::new(a);
    let dim = a.nrows();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..dim {
        match groups.last_mut() {
            Some(g) if eig.values[k] - eig.values[*g.last().unwrap()] <= cluster_tol => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    let mut values = Vec::with_capacity(groups.len());
    let mut projectors = Vec::with_capacity(groups.len());
    let mut multiplicities = Vec::with_capacity(groups.len());
    for g in groups {
        let mean = g.iter().map(|&k| eig.values[k]).sum::<f64>() / g.len() as f64;
        let mut p = zeros(dim);
        for &k in &g {
            let v = eig.vectors.column(k);
            p += v * v.adjoint();
        }
        values.push(mean);
        projectors.push(p);
        multiplicities.push(g.len());
    }
    Ok(SpectralDecomposition {
        values,
        projectors,
        multiplicities,
    })
}

impl SpectralDecomposition {
    /// Builds a decomposition from given values and projectors, which are
    /// trusted to be a resolution of the identity. Values must be distinct;
    /// they are sorted on construction.
    pub fn from_parts(values: Vec<f64>, projectors: Vec<Operator>) -> Result<Self> {
        if values.len() != projectors.len() || values.is_empty() {
            return Err(Error::InvalidState(
                "spectral decomposition needs one projector per value".into(),
            ));
        }
        let dim = check_square(&projectors[0])?;
        for p in &projectors {
            check_dim(p, dim)?;
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        if order.windows(2).any(|w| values[w[0]] == values[w[1]]) {
            return Err(Error::InvalidState("spectral values must be distinct".into()));
        }
        let multiplicities = order
            .iter()
            .map(|&i| projectors[i].trace().re.round() as usize)
            .collect();
        Ok(SpectralDecomposition {
            values: order.iter().map(|&i| values[i]).collect(),
            projectors: order.iter().map(|&i| projectors[i].clone()).collect(),
            multiplicities,
        })
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn projectors(&self) -> &[Operator] {
        &self.projectors
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn is_simple(&self) -> bool {
        self.multiplicities.iter().all(|&m| m == 1)
    }

    /// Largest minus smallest value.
    pub fn range(&self) -> f64 {
        self.values.last().unwrap() - self.values.first().unwrap()
    }

    /// `Σ_k f(values_k) P_k`.
    pub fn function(&self, f: impl Fn(f64) -> f64) -> Operator {
        let mut out = zeros(self.dim());
        for (v, p) in self.values.iter().zip(&self.projectors) {
            out += p * c64(f(*v), 0.0);
        }
        out
    }

    pub fn reconstruct(&self) -> Operator {
        self.function(|x| x)
    }

    /// Same projectors with every value mapped through `f`, which must be
    /// injective on the spectrum.
    pub fn relabel(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        SpectralDecomposition::from_parts(self.values.iter().map(|&v| f(v)).collect(), self.projectors.clone())
    }
}

/// Pinching `T ↦ Σ_s P_s T P_s`.
pub fn pinch(decomp: &SpectralDecomposition, t: &Operator) -> Result<Operator> {
    check_dim(t, decomp.dim())?;
    let mut out = zeros(t.nrows());
    for p in decomp.projectors() {
        out += p * t * p;
    }
    Ok(out)
}

/// True iff the nonzero differences `s' - s` are pairwise distinct beyond `gap_tol`.
pub fn check_gens(decomp: &SpectralDecomposition, gap_tol: f64) -> bool {
    distinct_gaps(decomp.values(), gap_tol)
}

/// Every ordered difference `v_i - v_j`, `i != j`, that is not within `tol`
/// of zero must be at distance more than `tol` from every other one.
pub(crate) fn distinct_gaps(values: &[f64], tol: f64) -> bool {
    let mut gaps = Vec::new();
    for (i, a) in values.iter().enumerate() {
        for (j, b) in values.iter().enumerate() {
            if i != j && (a - b).abs() > tol {
                gaps.push(a - b);
            }
        }
    }
    gaps.sort_by(f64::total_cmp);
    gaps.windows(2).all(|w| w[1] - w[0] > tol)
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: Operator,
    eig: Eigh,
    faithful: bool,
}

impl DensityMatrix {
    pub fn new(matrix: Operator, tol: &Tolerances) -> Result<Self> {
        check_square(&matrix)?;
        if matrix.nrows() == 0 {
            return Err(Error::InvalidState("empty matrix".into()));
        }
        let defect = hermiticity_defect(&matrix);
        if defect > tol.hermiticity {
            return Err(Error::NotHermitian { defect });
        }
        let tr = matrix.trace();
        if (tr - c64(1.0, 0.0)).norm() > tol.trace {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let matrix = hermitian_part(&matrix);
        let eig = Eigh::new(&matrix);
        if eig.min() < -tol.psd {
            return Err(Error::InvalidState(format!("negative eigenvalue {:.3e}", eig.min())));
        }
        let faithful = eig.min() > tol.faithfulness;
        Ok(DensityMatrix { matrix, eig, faithful })
    }

    /// Validates with the default tolerances.
    pub fn from_operator(matrix: Operator) -> Result<Self> {
        DensityMatrix::new(matrix, &Tolerances::default())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix::from_operator(identity(dim) / c64(dim as f64, 0.0)).unwrap()
    }

    pub fn from_diagonal(probabilities: &[f64]) -> Result<Self> {
        DensityMatrix::from_operator(diag(probabilities))
    }

    /// `|ψ⟩⟨ψ|` for a nonzero vector, normalized.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let v = psi / c64(n, 0.0);
        DensityMatrix::from_operator(&v * v.adjoint())
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn into_matrix(self) -> Operator {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigen(&self) -> &Eigh {
        &self.eig
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig.min()
    }

    pub fn is_faithful(&self) -> bool {
        self.faithful
    }

    pub fn require_faithful(&self) -> Result<()> {
        if self.faithful {
            Ok(())
        } else {
            Err(Error::NotFaithful {
                min_eigenvalue: self.min_eigenvalue(),
            })
        }
    }

    /// `log ρ`; requires a faithful state.
    pub fn log(&self) -> Result<Operator> {
        self.require_faithful()?;
        Ok(self.eig.map(f64::ln))
    }

    /// `ρ^s`; requires a faithful state.
    pub fn power(&self, s: f64) -> Result<Operator> {
        self.require_faithful()?;
        Ok(self.eig.map(|p| p.powf(s)))
    }
}

/// `⟨A|B⟩_{ρ_s} = tr(ρ^s A* ρ^{1-s} B)`; at `s = 1` this is `tr(ρ A* B)`.
pub fn rho_s_inner(rho: &DensityMatrix, a: &Operator, b: &Operator, s: f64) -> Result<C64> {
    let weights = RhoSWeights::new(rho, s)?;
    weights.inner(a, b)
}

/// Precomputed `ρ^s` and `ρ^{1-s}` for repeated weighted inner products.
#[derive(Debug, Clone)]
pub(crate) struct RhoSWeights {
    left: Operator,
    right: Operator,
}

impl RhoSWeights {
    pub(crate) fn new(rho: &DensityMatrix, s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::OutOfRange {
                name: "s",
                value: s,
                expected: "0 <= s <= 1",
            });
        }
        Ok(RhoSWeights {
            left: rho.power(s)?,
            right: rho.power(1.0 - s)?,
        })
    }

    pub(crate) fn inner(&self, a: &Operator, b: &Operator) -> Result<C64> {
        check_dim(a, self.left.nrows())?;
        check_dim(b, self.left.nrows())?;
        Ok((&self.left * a.adjoint() * &self.right * b).trace())
    }
}

/// Modular action `Δ_ρ(X) = ρ X ρ^{-1}`.
pub fn modular_apply(rho: &DensityMatrix, x: &Operator) -> Result<Operator> {
    rho.require_faithful()?;
    check_dim(x, rho.dim())?;
    let inv = rho.eigen().map(|p| 1.0 / p);
    Ok(rho.matrix() * x * inv)
}
