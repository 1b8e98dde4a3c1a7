//! Seeded random models for property suites.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::lindblad::Lindbladian;
use crate::operator::{c64, diag, matrix_unit, DensityMatrix, Operator, C64};
use crate::qrm::QrmSpec;

pub type ModelRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ModelRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut impl Rng) -> C64 {
    c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Ginibre matrix with standard complex Gaussian entries.
pub fn random_operator(dim: usize, rng: &mut impl Rng) -> Operator {
    Operator::from_fn(dim, dim, |_, _| gaussian(rng))
}

pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> Operator {
    let g = random_operator(dim, rng);
    (&g + g.adjoint()) * c64(0.5, 0.0)
}

/// Haar-ish unitary from the QR factor of a Ginibre matrix.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> Operator {
    let qr = random_operator(dim, rng).qr();
    let (q, r) = qr.unpack();
    let phases = DVector::from_iterator(
        dim,
        (0..dim).map(|i| {
            let z = r[(i, i)];
            if z.norm() > 0.0 {
                z / c64(z.norm(), 0.0)
            } else {
                c64(1.0, 0.0)
            }
        }),
    );
    q * Operator::from_diagonal(&phases)
}

/// Full-rank density matrix `G G* / tr(G G*)`.
pub fn random_density(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let g = random_operator(dim, rng);
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityMatrix::from_operator(m / tr).expect("Ginibre state is a density matrix")
}

/// Probability vector bounded away from zero, entries at least `floor / dim`.
pub fn random_probabilities(dim: usize, floor: f64, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + floor).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Random Hamiltonian plus `kraus` Ginibre jump operators scaled to order one.
pub fn random_lindbladian(dim: usize, kraus: usize, rng: &mut impl Rng) -> Lindbladian {
    let h = random_hermitian(dim, rng);
    let scale = c64(1.0 / (dim as f64).sqrt(), 0.0);
    let ops = (0..kraus).map(|_| random_operator(dim, rng) * scale).collect();
    Lindbladian::new(h, ops).expect("random Lindbladian")
}

/// A generator satisfying detailed balance with respect to a random faithful
/// state `ρ = U diag(p) U*`.
///
/// Jumps `j → i` carry `√(g_ij p_i) |i⟩⟨j|` with symmetric `g`, dephasing uses
/// real diagonal Kraus operators and the Hamiltonian is diagonal, all in the
/// rotated basis.
pub fn random_db_model(dim: usize, rng: &mut impl Rng) -> (Lindbladian, DensityMatrix) {
    let p = random_probabilities(dim, 0.2, rng);
    let u = random_unitary(dim, rng);
    let rotate = |a: Operator| &u * a * u.adjoint();
    let energies: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let h = rotate(diag(&energies));
    let mut kraus = Vec::new();
    for i in 0..dim {
        for j in (i + 1)..dim {
            let g = 0.2 + rng.random::<f64>();
            kraus.push(rotate(matrix_unit(dim, i, j) * c64((g * p[i]).sqrt(), 0.0)));
            kraus.push(rotate(matrix_unit(dim, j, i) * c64((g * p[j]).sqrt(), 0.0)));
        }
    }
    let dephasing: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.5).collect();
    kraus.push(rotate(diag(&dephasing)));
    let rho = DensityMatrix::from_operator(rotate(diag(&p))).expect("rotated state");
    (Lindbladian::new(h, kraus).expect("DB model"), rho)
}

/// QRM data with `[H, T] = 0`: both diagonal in a common random basis.
pub fn random_commuting_qrm(dim: usize, rng: &mut impl Rng) -> QrmSpec {
    let u = random_unitary(dim, rng);
    let rotate = |a: Operator| &u * a * u.adjoint();
    let energies: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let p = random_probabilities(dim, 0.2, rng);
    QrmSpec::new(
        rotate(diag(&energies)),
        DensityMatrix::from_operator(rotate(diag(&p))).expect("target state"),
        0.3 + rng.random::<f64>(),
    )
    .expect("QRM spec")
}

/// QRM data with a generic Hamiltonian and full-rank target.
pub fn random_qrm(dim: usize, rng: &mut impl Rng) -> QrmSpec {
    let h = random_hermitian(dim, rng);
    let t = random_density(dim, rng);
    QrmSpec::new(h, t, 0.3 + rng.random::<f64>()).expect("QRM spec")
}
