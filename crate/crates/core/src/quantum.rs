//! Basis bookkeeping and operator construction on a truncated qubit⊗Fock space.
//!
//! Spin ordering follows the usual Pauli convention: index 0 is `|↑⟩` and
//! index 1 is `|↓⟩`, so `σ₊ = [[0,1],[0,0]]` raises `|↓⟩` to `|↑⟩`. Basis
//! states are enumerated spins-major (ion 0 most significant), then phonon.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::special::{laguerre, LaguerreSpec};
use crate::C64;

pub type OperatorMatrix = DMatrix<C64>;
pub type StateVector = DVector<C64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    fn bit(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }

    fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            Spin::Up
        } else {
            Spin::Down
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Spin::Up => 'u',
            Spin::Down => 'd',
        }
    }
}

/// `|S₁(,S₂), n⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub spins: Vec<Spin>,
    pub phonon: usize,
}

impl BasisState {
    pub fn new(spins: Vec<Spin>, phonon: usize) -> Self {
        Self { spins, phonon }
    }

    pub fn spin_label(&self) -> String {
        self.spins.iter().map(|s| s.symbol()).collect()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}⟩", self.spin_label(), self.phonon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncatedBasis {
    ion_count: usize,
    fock_cutoff: usize,
}

impl TruncatedBasis {
    pub fn new(ion_count: usize, fock_cutoff: usize) -> Result<Self> {
        if !(1..=2).contains(&ion_count) {
            return Err(Error::InvalidArgument(format!(
                "ion count must be 1 or 2, got {ion_count}"
            )));
        }
        if fock_cutoff == 0 {
            return Err(Error::InvalidArgument("fock cutoff must be positive".into()));
        }
        Ok(Self {
            ion_count,
            fock_cutoff,
        })
    }

    pub fn ion_count(&self) -> usize {
        self.ion_count
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn spin_dim(&self) -> usize {
        1 << self.ion_count
    }

    pub fn dim(&self) -> usize {
        self.spin_dim() * self.fock_cutoff
    }

    pub fn index(&self, state: &BasisState) -> Option<usize> {
        if state.spins.len() != self.ion_count || state.phonon >= self.fock_cutoff {
            return None;
        }
        let spin = state
            .spins
            .iter()
            .fold(0usize, |acc, s| (acc << 1) | s.bit());
        Some(spin * self.fock_cutoff + state.phonon)
    }

    pub fn state(&self, index: usize) -> Option<BasisState> {
        if index >= self.dim() {
            return None;
        }
        let spin = index / self.fock_cutoff;
        let phonon = index % self.fock_cutoff;
        let spins = (0..self.ion_count)
            .map(|ion| Spin::from_bit((spin >> (self.ion_count - 1 - ion)) & 1))
            .collect();
        Some(BasisState { spins, phonon })
    }

    pub fn states(&self) -> impl Iterator<Item = BasisState> + '_ {
        (0..self.dim()).map(move |i| self.state(i).expect("index in range"))
    }

    /// `|↓…↓, 0⟩`
    pub fn ground_index(&self) -> usize {
        self.index(&BasisState::new(vec![Spin::Down; self.ion_count], 0))
            .expect("ground state is always in the basis")
    }

    /// Basis vector for `state`.
    pub fn ket(&self, state: &BasisState) -> Result<StateVector> {
        let idx = self.index(state).ok_or_else(|| {
            Error::InvalidArgument(format!("{state} is outside the truncated basis"))
        })?;
        let mut v = StateVector::zeros(self.dim());
        v[idx] = C64::new(1.0, 0.0);
        Ok(v)
    }
}

pub fn identity(dim: usize) -> OperatorMatrix {
    OperatorMatrix::identity(dim, dim)
}

pub fn sigma_plus() -> OperatorMatrix {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    OperatorMatrix::from_row_slice(2, 2, &[z, o, z, z])
}

pub fn sigma_minus() -> OperatorMatrix {
    sigma_plus().adjoint()
}

pub fn sigma_x() -> OperatorMatrix {
    sigma_plus() + sigma_minus()
}

pub fn sigma_y() -> OperatorMatrix {
    (sigma_plus() - sigma_minus()) * C64::new(0.0, -1.0)
}

pub fn sigma_z() -> OperatorMatrix {
    OperatorMatrix::from_diagonal(&DVector::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(-1.0, 0.0),
    ]))
}

/// Annihilation and creation operators on `fock_cutoff` levels.
pub fn ladder_operators(fock_cutoff: usize) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if fock_cutoff < 2 {
        return Err(Error::InvalidArgument(format!(
            "ladder operators need cutoff >= 2, got {fock_cutoff}"
        )));
    }
    let mut a = OperatorMatrix::zeros(fock_cutoff, fock_cutoff);
    for n in 1..fock_cutoff {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let a_dag = a.adjoint();
    Ok((a, a_dag))
}

/// Kronecker product of `ops` in order; the first factor is most significant.
pub fn tensor(ops: &[OperatorMatrix]) -> Result<OperatorMatrix> {
    let (first, rest) = ops
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("tensor of an empty list".into()))?;
    Ok(rest.iter().fold(first.clone(), |acc, op| acc.kronecker(op)))
}

pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    a * b - b * a
}

/// `max |A - A†|`.
pub fn hermiticity_defect(a: &OperatorMatrix) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |U†U - I|`.
pub fn unitarity_defect(u: &OperatorMatrix) -> f64 {
    let n = u.ncols();
    (u.adjoint() * u - identity(n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn is_hermitian(a: &OperatorMatrix, tol: f64) -> bool {
    a.is_square() && hermiticity_defect(a) <= tol
}

pub fn is_unitary(u: &OperatorMatrix, tol: f64) -> bool {
    u.is_square() && unitarity_defect(u) <= tol
}

/// `exp(i·scale·H)` for Hermitian `H` via eigendecomposition.
pub fn exp_i_hermitian(h: &OperatorMatrix, scale: f64) -> OperatorMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let phases = eig
        .eigenvalues
        .map(|lambda| C64::from_polar(1.0, scale * lambda));
    let v = &eig.eigenvectors;
    v * OperatorMatrix::from_diagonal(&phases) * v.adjoint()
}

/// Position-like operator `a + a†` on `size` levels, real symmetric tridiagonal.
fn position_real(size: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(size, size);
    for n in 1..size {
        let s = (n as f64).sqrt();
        x[(n - 1, n)] = s;
        x[(n, n - 1)] = s;
    }
    x
}

fn displacement_block(eta: f64, cutoff: usize, size: usize) -> OperatorMatrix {
    let eig = SymmetricEigen::new(position_real(size));
    let v = &eig.eigenvectors;
    let mut out = OperatorMatrix::zeros(cutoff, cutoff);
    for r in 0..cutoff {
        for c in 0..cutoff {
            let mut acc = C64::new(0.0, 0.0);
            for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
                acc += C64::from_polar(v[(r, k)] * v[(c, k)], eta * lambda);
            }
            out[(r, c)] = acc;
        }
    }
    out
}

const PAD_TOL: f64 = 1e-12;
const PAD_STEP: usize = 10;
const PAD_LIMIT: usize = 200;

/// `exp(iη(a+a†))` restricted to the lowest `fock_cutoff` levels.
///
/// The exponential is taken in an enlarged basis of `fock_cutoff + pad`
/// levels; `pad` grows in steps of 10 until one more step changes no
/// returned entry by more than `1e-12`. Used as the oracle for
/// [`displacement_element`].
pub fn displacement_exact(eta: f64, fock_cutoff: usize, pad: usize) -> Result<OperatorMatrix> {
    if fock_cutoff == 0 {
        return Err(Error::InvalidArgument("fock cutoff must be positive".into()));
    }
    let mut pad = pad;
    let mut current = displacement_block(eta, fock_cutoff, fock_cutoff + pad);
    loop {
        let next = displacement_block(eta, fock_cutoff, fock_cutoff + pad + PAD_STEP);
        let change = (&next - &current)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if change <= PAD_TOL {
            return Ok(current);
        }
        pad += PAD_STEP;
        if pad > PAD_LIMIT {
            return Err(Error::PadNotConverged { pad, change });
        }
        current = next;
    }
}

/// `⟨n_to| exp(iη(a+a†)) |n_from⟩` in closed form:
/// `i^|Δ| e^{-η²/2} √(n_<!/n_>!) η^|Δ| L_{n_<}^{|Δ|}(η²)`.
pub fn displacement_element(n_to: usize, n_from: usize, eta: f64) -> C64 {
    let (lo, hi) = if n_to < n_from {
        (n_to, n_from)
    } else {
        (n_from, n_to)
    };
    let delta = hi - lo;
    let x = eta * eta;
    // √(n_<!/n_>!) η^Δ as a running product
    let mut mag = 1.0;
    for k in (lo + 1)..=hi {
        mag *= eta / (k as f64).sqrt();
    }
    mag *= (-0.5 * x).exp() * laguerre(LaguerreSpec::new(lo, delta), x);
    let phase = match delta % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    };
    phase * mag
}

/// Phonon-space matrix of [`displacement_element`] on `fock_cutoff` levels.
pub fn displacement_matrix(eta: f64, fock_cutoff: usize) -> OperatorMatrix {
    OperatorMatrix::from_fn(fock_cutoff, fock_cutoff, |r, c| {
        displacement_element(r, c, eta)
    })
}

pub fn norm(psi: &StateVector) -> f64 {
    psi.norm()
}

pub fn check_normalized(psi: &StateVector, tol: f64) -> Result<()> {
    let n = psi.norm();
    if (n - 1.0).abs() > tol {
        return Err(Error::NotNormalized { norm: n });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &OperatorMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn basis_round_trip() {
        for ions in 1..=2 {
            let b = TruncatedBasis::new(ions, 5).unwrap();
            assert_eq!(b.dim(), (1 << ions) * 5);
            for i in 0..b.dim() {
                let s = b.state(i).unwrap();
                assert_eq!(b.index(&s), Some(i));
            }
        }
        let b = TruncatedBasis::new(2, 3).unwrap();
        assert_eq!(b.ground_index(), 9);
        assert!(b.index(&BasisState::new(vec![Spin::Up, Spin::Up], 3)).is_none());
        assert!(TruncatedBasis::new(3, 3).is_err());
    }

    #[test]
    fn ladder_entries() {
        let (a, _) = ladder_operators(2).unwrap();
        assert_eq!(a.iter().filter(|z| z.norm() > 0.0).count(), 1);
        assert_eq!(a[(0, 1)], C64::new(1.0, 0.0));

        let (a, ad) = ladder_operators(4).unwrap();
        assert!((a[(2, 3)].re - 3f64.sqrt()).abs() < 1e-15);
        let number = &ad * &a;
        for n in 0..4 {
            assert!((number[(n, n)].re - n as f64).abs() < 1e-12);
        }
        assert!(ladder_operators(1).is_err());
    }

    #[test]
    fn tensor_products() {
        let i4 = tensor(&[identity(2), identity(2)]).unwrap();
        assert_eq!(i4, identity(4));
        let zi = tensor(&[sigma_z(), identity(2)]).unwrap();
        let diag: Vec<f64> = (0..4).map(|k| zi[(k, k)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
        assert!(tensor(&[]).is_err());
    }

    #[test]
    fn mixed_product_rule() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut random = |n: usize| {
            OperatorMatrix::from_fn(n, n, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        };
        let (a, c) = (random(2), random(2));
        let (b, d) = (random(3), random(3));
        let lhs = tensor(&[a.clone(), b.clone()]).unwrap() * tensor(&[c.clone(), d.clone()]).unwrap();
        let rhs = tensor(&[&a * &c, &b * &d]).unwrap();
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn pauli_algebra() {
        let i2 = C64::new(0.0, 2.0);
        assert!(max_abs(&(commutator(&sigma_x(), &sigma_y()) - sigma_z() * i2)) < 1e-15);
        // σ₊|↓⟩ = |↑⟩ with ↑ at index 0
        assert_eq!(sigma_plus()[(0, 1)], C64::new(1.0, 0.0));
    }

    #[test]
    fn displacement_identity_at_zero() {
        let d = displacement_exact(0.0, 6, 10).unwrap();
        assert!(max_abs(&(d - identity(6))) < 1e-12);
        assert_eq!(displacement_element(3, 3, 0.0), C64::new(1.0, 0.0));
        assert_eq!(displacement_element(4, 3, 0.0).norm(), 0.0);
    }

    #[test]
    fn displacement_vacuum_closed_form() {
        let eta: f64 = 0.3;
        let d = displacement_exact(eta, 4, 10).unwrap();
        let expected = (-0.5 * eta * eta).exp();
        assert!((expected - 0.955_997_481_833_100_3).abs() < 1e-15);
        assert!((d[(0, 0)] - C64::new(expected, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn displacement_vanishes_at_laguerre_root() {
        let eta = 0.527667f64.sqrt();
        // magnitude at the rounded value; the exact root gives 0 to roundoff
        assert!(displacement_exact(eta, 10, 10).unwrap()[(7, 6)].norm() < 1e-5);
        let root = crate::special::laguerre_zeros(LaguerreSpec::new(6, 1))[0];
        assert!(displacement_exact(root.sqrt(), 10, 10).unwrap()[(7, 6)].norm() < 1e-8);
        assert!(displacement_element(7, 6, root.sqrt()).norm() < 1e-10);
        let root = crate::special::laguerre_zeros(LaguerreSpec::new(5, 0))[0];
        assert!(displacement_element(5, 5, root.sqrt()).norm() < 1e-10);
    }

    #[test]
    fn closed_form_matches_oracle() {
        for &eta in &[0.1, 0.5, 0.9] {
            let exact = displacement_exact(eta, 13, 10).unwrap();
            for r in 0..=12 {
                for c in 0..=12 {
                    let z = displacement_element(r, c, eta);
                    assert!(
                        (z - exact[(r, c)]).norm() < 1e-9,
                        "η={eta} ({r},{c}): {z} vs {}",
                        exact[(r, c)]
                    );
                }
            }
        }
    }

    #[test]
    fn oracle_block_is_nearly_unitary() {
        // the block leaks only through the top rows, so check a shallow sub-block
        let d = displacement_exact(0.5, 40, 10).unwrap();
        let inner = d.view((0, 0), (40, 40)).into_owned();
        let product = inner.adjoint() * &inner;
        for r in 0..10 {
            for c in 0..10 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((product[(r, c)] - C64::new(want, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn magnitude_symmetry() {
        for &eta in &[0.05, 0.4, 1.3] {
            for a in 0..=15 {
                for b in 0..=15 {
                    let x = displacement_element(a, b, eta).norm();
                    let y = displacement_element(b, a, eta).norm();
                    assert!((x - y).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn carrier_lamb_dicke_limit() {
        for &eta in &[1e-2, 1e-3] {
            for n in 0..=10 {
                let m = displacement_element(n, n, eta).norm();
                // 1 - η²(n + 1/2) + O(η⁴)
                let first_order = 1.0 - eta * eta * (n as f64 + 0.5);
                assert!((m - first_order).abs() < 10.0 * (n as f64 + 1.0).powi(2) * eta.powi(4));
            }
        }
    }

    #[test]
    fn hermitian_exponential_is_unitary() {
        let h = sigma_x() + sigma_z() * C64::new(0.3, 0.0);
        let u = exp_i_hermitian(&h, 0.7);
        assert!(is_unitary(&u, 1e-13));
        assert!(is_hermitian(&h, 0.0));
    }
}
