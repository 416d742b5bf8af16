//! M-qubit 3D magnetometry: GHZ-type probes, a rotation about `phi`, then local z-dephasing.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, C64};
use crate::model::QuantumModel;

pub const MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct MagnetometrySpec {
    pub qubits: usize,
    pub gamma: f64,
    pub phi: [f64; 3],
}

impl MagnetometrySpec {
    pub fn new(qubits: usize, gamma: f64, phi: [f64; 3]) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&qubits) {
            return Err(Error::InvalidArgument(format!(
                "qubit count must lie in 1..={MAX_QUBITS}, got {qubits}"
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("phi must be finite".into()));
        }
        Ok(Self { qubits, gamma, phi })
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }
}

/// Pauli matrices `[sigma_x, sigma_y, sigma_z]`.
pub fn paulis() -> [CMatrix; 3] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

/// `op` acting on qubit `j` of `m`; qubit 0 is the most significant bit.
pub fn local_operator(op: &CMatrix, j: usize, m: usize) -> CMatrix {
    let mut out = linalg::identity(1);
    for q in 0..m {
        let f = if q == j { op.clone() } else { linalg::identity(2) };
        out = linalg::kron(&out, &f);
    }
    out
}

/// Collective spin operators `S_k = sum_j sigma_k^(j)`.
pub fn collective_paulis(m: usize) -> [CMatrix; 3] {
    let p = paulis();
    let d = 1 << m;
    let mut s = [CMatrix::zeros(d, d), CMatrix::zeros(d, d), CMatrix::zeros(d, d)];
    for (k, sk) in s.iter_mut().enumerate() {
        for j in 0..m {
            *sk += local_operator(&p[k], j, m);
        }
    }
    s
}

fn tensor_power(v: &DVector<C64>, m: usize) -> DVector<C64> {
    let mut out = DVector::from_element(1, c(1.0, 0.0));
    for _ in 0..m {
        out = out.kronecker(v);
    }
    out
}

/// The `+1` and `-1` eigenvectors of each Pauli matrix.
fn pauli_eigenvectors() -> [[DVector<C64>; 2]; 3] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = |a: C64, b: C64| DVector::from_vec(vec![a, b]);
    [
        [v(c(s, 0.0), c(s, 0.0)), v(c(s, 0.0), c(-s, 0.0))],
        [v(c(s, 0.0), c(0.0, s)), v(c(s, 0.0), c(0.0, -s))],
        [v(c(1.0, 0.0), c(0.0, 0.0)), v(c(0.0, 0.0), c(1.0, 0.0))],
    ]
}

/// Unnormalized sum of the six product states `|phi_k^pm>^{(x) M}`.
fn ghz3d_components(m: usize) -> Vec<DVector<C64>> {
    pauli_eigenvectors()
        .iter()
        .flat_map(|pair| pair.iter().map(|v| tensor_power(v, m)).collect::<Vec<_>>())
        .collect()
}

/// Normalized 3D-GHZ probe on `m` qubits.
pub fn ghz3d_state(m: usize) -> Result<DVector<C64>> {
    if !(2..=MAX_QUBITS).contains(&m) {
        return Err(Error::InvalidArgument(format!("3D-GHZ probe needs 2..={MAX_QUBITS} qubits, got {m}")));
    }
    let sum = ghz3d_components(m)
        .into_iter()
        .fold(DVector::zeros(1 << m), |acc, v| acc + v);
    let norm = sum.norm();
    Ok(sum / c(norm, 0.0))
}

/// `H = sum_k phi_k S_k`.
pub fn hamiltonian(m: usize, phi: &[f64; 3]) -> CMatrix {
    let s = collective_paulis(m);
    let d = 1 << m;
    let mut h = CMatrix::zeros(d, d);
    for k in 0..3 {
        h += &s[k] * c(phi[k], 0.0);
    }
    h
}

/// Per-qubit z-dephasing: coherence `|i><j|` is scaled by `sqrt(1 - gamma)^h(i, j)`.
pub fn dephase(rho: &CMatrix, gamma: f64) -> CMatrix {
    let s = (1.0 - gamma).max(0.0).sqrt();
    CMatrix::from_fn(rho.nrows(), rho.ncols(), |i, j| {
        let h = ((i ^ j) as u32).count_ones() as i32;
        rho[(i, j)] * s.powi(h)
    })
}

/// Single-qubit Kraus pair `E_0 = diag(1, sqrt(1 - gamma))`, `E_1 = diag(0, sqrt(gamma))`.
pub fn dephasing_kraus(gamma: f64) -> [CMatrix; 2] {
    let z = c(0.0, 0.0);
    [
        CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), z, z, c((1.0 - gamma).sqrt(), 0.0)]),
        CMatrix::from_row_slice(2, 2, &[z, z, z, c(gamma.sqrt(), 0.0)]),
    ]
}

/// Same channel as [`dephase`], evaluated as an explicit sum over the `2^M` product Kraus operators.
pub fn dephase_kraus_sum(rho: &CMatrix, gamma: f64, m: usize) -> CMatrix {
    let e = dephasing_kraus(gamma);
    let d = rho.nrows();
    let mut out = CMatrix::zeros(d, d);
    for label in 0..(1usize << m) {
        let mut k = linalg::identity(1);
        for q in 0..m {
            let bit = (label >> (m - 1 - q)) & 1;
            k = linalg::kron(&k, &e[bit]);
        }
        out += &k * rho * k.adjoint();
    }
    out
}

fn phi_kernel(x: f64) -> C64 {
    if x.abs() < 1e-8 {
        c(1.0, x / 2.0)
    } else {
        (C64::from_polar(1.0, x) - c(1.0, 0.0)) / c(0.0, x)
    }
}

/// Generators `A_k = int_0^1 e^{i a H} S_k e^{-i a H} da` for `H = sum_k phi_k S_k`.
pub fn generators(m: usize, phi: &[f64; 3]) -> Result<[CMatrix; 3]> {
    let s = collective_paulis(m);
    let eig = linalg::eigh(&hamiltonian(m, phi))?;
    let v = &eig.vectors;
    let e = &eig.values;
    let d = 1 << m;
    let make = |sk: &CMatrix| {
        let sb = v.adjoint() * sk * v;
        let ab = CMatrix::from_fn(d, d, |a, b| sb[(a, b)] * phi_kernel(e[a] - e[b]));
        linalg::hermitian_part(&(v * ab * v.adjoint()))
    };
    Ok([make(&s[0]), make(&s[1]), make(&s[2])])
}

/// `U = (x)_j exp(-i phi . sigma^(j)) = exp(-i H)`.
pub fn encoding_unitary(m: usize, phi: &[f64; 3]) -> Result<CMatrix> {
    linalg::expm_herm(&hamiltonian(m, phi), 1.0)
}

/// Rotated and dephased state for an arbitrary pure probe on `m` qubits.
pub fn encoded_state(probe: &DVector<C64>, gamma: f64, phi: &[f64; 3]) -> Result<CMatrix> {
    let m = qubits_of(probe)?;
    let u = encoding_unitary(m, phi)?;
    let psi = &u * probe;
    Ok(linalg::hermitian_part(&dephase(&(&psi * psi.adjoint()), gamma)))
}

/// `d rho / d phi_k = E_gamma[ i U [rho_0, A_k] U^dag ]`.
pub fn derivatives_for_probe(probe: &DVector<C64>, gamma: f64, phi: &[f64; 3]) -> Result<Vec<CMatrix>> {
    let m = qubits_of(probe)?;
    let u = encoding_unitary(m, phi)?;
    let a = generators(m, phi)?;
    let rho0 = probe * probe.adjoint();
    Ok(a
        .iter()
        .map(|ak| {
            let comm = &rho0 * ak - ak * &rho0;
            let d = &u * comm * u.adjoint() * c(0.0, 1.0);
            linalg::hermitian_part(&dephase(&d, gamma))
        })
        .collect())
}

fn qubits_of(probe: &DVector<C64>) -> Result<usize> {
    let d = probe.len();
    if d < 2 || !d.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!("probe dimension {d} is not a power of two")));
    }
    Ok(d.trailing_zeros() as usize)
}

/// Derivatives of the 3D-GHZ model.
pub fn generator_derivatives(spec: &MagnetometrySpec) -> Result<Vec<CMatrix>> {
    derivatives_for_probe(&ghz3d_state(spec.qubits)?, spec.gamma, &spec.phi)
}

/// Three-parameter model for an arbitrary pure probe.
pub fn probe_model(probe: &DVector<C64>, gamma: f64, phi: [f64; 3]) -> Result<QuantumModel> {
    let rho = encoded_state(probe, gamma, &phi)?;
    let drho = derivatives_for_probe(probe, gamma, &phi)?;
    QuantumModel::new(phi.to_vec(), rho, drho, None)
}

/// The 3D-GHZ magnetometry model with identity weight.
pub fn encode_and_dephase(spec: &MagnetometrySpec) -> Result<QuantumModel> {
    probe_model(&ghz3d_state(spec.qubits)?, spec.gamma, spec.phi)
}

/// Relabel qubits: qubit `q` of the output is qubit `perm[q]` of the input.
pub fn permute_qubits(a: &CMatrix, perm: &[usize]) -> CMatrix {
    let m = perm.len();
    let map = |i: usize| {
        let mut out = 0;
        for (q, &p) in perm.iter().enumerate() {
            let bit = (i >> (m - 1 - p)) & 1;
            out |= bit << (m - 1 - q);
        }
        out
    };
    let d = a.nrows();
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(map(i), map(j))] = a[(i, j)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::finite_difference_derivatives;

    #[test]
    fn ghz_is_normalized() {
        for m in 2..=4 {
            let psi = ghz3d_state(m).unwrap();
            assert!((psi.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ghz_normalization_matches_gram_sum() {
        let comps = ghz3d_components(3);
        let mut gram = c(0.0, 0.0);
        for a in &comps {
            for b in &comps {
                gram += a.dotc(b);
            }
        }
        let sum = comps.iter().fold(DVector::zeros(8), |acc, v| acc + v);
        assert!((sum.norm_squared() - gram.re).abs() < 1e-12);
        assert!(gram.im.abs() < 1e-12);
    }

    #[test]
    fn ghz_is_swap_symmetric() {
        let psi = ghz3d_state(2).unwrap();
        let rho = &psi * psi.adjoint();
        let swapped = permute_qubits(&rho, &[1, 0]);
        assert!(linalg::max_abs(&(swapped - rho)) < 1e-12);
    }

    #[test]
    fn hamming_damping_matches_kraus_sum() {
        let spec = MagnetometrySpec::new(2, 0.5, [1.0, 1.0, 1.0]).unwrap();
        let psi = ghz3d_state(2).unwrap();
        let u = encoding_unitary(2, &spec.phi).unwrap();
        let pure = {
            let v = &u * psi;
            &v * v.adjoint()
        };
        let a = dephase(&pure, spec.gamma);
        let b = dephase_kraus_sum(&pure, spec.gamma, 2);
        assert!(linalg::max_abs(&(a - b)) < 1e-10);
    }

    #[test]
    fn kraus_pair_is_trace_preserving() {
        for g in [0.0, 0.3, 1.0] {
            let e = dephasing_kraus(g);
            let s = e[0].adjoint() * &e[0] + e[1].adjoint() * &e[1];
            assert!(linalg::max_abs(&(s - linalg::identity(2))) < 1e-14);
        }
    }

    #[test]
    fn unitary_is_product_of_local_rotations() {
        let phi = [0.3, -0.7, 1.1];
        let p = paulis();
        let mut h1 = CMatrix::zeros(2, 2);
        for k in 0..3 {
            h1 += &p[k] * c(phi[k], 0.0);
        }
        let u1 = linalg::expm_herm(&h1, 1.0).unwrap();
        let u = encoding_unitary(3, &phi).unwrap();
        let prod = linalg::kron(&linalg::kron(&u1, &u1), &u1);
        assert!(linalg::max_abs(&(u - prod)) < 1e-12);
    }

    #[test]
    fn full_dephasing_is_diagonal() {
        let m = encode_and_dephase(&MagnetometrySpec::new(3, 1.0, [1.0; 3]).unwrap()).unwrap();
        let off = CMatrix::from_fn(8, 8, |i, j| if i == j { c(0.0, 0.0) } else { m.rho[(i, j)] });
        assert!(linalg::max_abs(&off) <= 1e-12);
    }

    #[test]
    fn noiseless_state_is_pure() {
        let m = encode_and_dephase(&MagnetometrySpec::new(2, 0.0, [1.0; 3]).unwrap()).unwrap();
        let eig = linalg::eigh(&m.rho).unwrap();
        let rank = eig.values.iter().filter(|&&p| p > 1e-10).count();
        assert_eq!(rank, 1);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let spec = MagnetometrySpec::new(2, 0.3, [1.0; 3]).unwrap();
        let probe = ghz3d_state(2).unwrap();
        let exact = generator_derivatives(&spec).unwrap();
        let fd = finite_difference_derivatives(
            |t| encoded_state(&probe, spec.gamma, &[t[0], t[1], t[2]]),
            &spec.phi,
            1e-5,
        )
        .unwrap();
        for (a, b) in exact.iter().zip(&fd) {
            assert!(linalg::max_abs(&(a - b)) < 1e-8, "{}", linalg::max_abs(&(a - b)));
        }
    }

    #[test]
    fn derivatives_are_traceless() {
        let spec = MagnetometrySpec::new(3, 0.4, [0.2, 1.3, -0.5]).unwrap();
        for d in generator_derivatives(&spec).unwrap() {
            assert!(linalg::trace(&d).norm() < 1e-10);
        }
    }

    #[test]
    fn generators_reduce_to_collective_spins_near_zero_field() {
        let a = generators(2, &[0.0, 0.0, 1e-8]).unwrap();
        let s = collective_paulis(2);
        for k in 0..3 {
            assert!(linalg::max_abs(&(&a[k] - &s[k])) < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(MagnetometrySpec::new(2, 1.5, [1.0; 3]).is_err());
        assert!(MagnetometrySpec::new(0, 0.5, [1.0; 3]).is_err());
        assert!(ghz3d_state(1).is_err());
    }
}
