//! Hermitian operator basis for the quotient space of observables modulo the kernel of the state.
//!
//! The basis is built from the eigenvectors of the state and ordered in five groups:
//! support projectors, symmetric support pairs, antisymmetric support pairs, symmetric
//! support–kernel pairs and antisymmetric support–kernel pairs. Pairs iterate the first
//! index fastest. The Gram matrix of the state-induced inner product `Tr[λ_i λ_j ρ]` has a
//! closed form in this basis; it is always cross-checked against direct evaluation.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, C64};
use crate::spectral::SpectralData;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Shape of one basis element, expressed on eigenvector indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisElement {
    /// `|ψ_i⟩⟨ψ_i|`
    Projector(usize),
    /// `(|i⟩⟨j| + |j⟩⟨i|)/√2`
    Symmetric(usize, usize),
    /// `i(|i⟩⟨j| - |j⟩⟨i|)/√2`
    Antisymmetric(usize, usize),
}

#[derive(Debug, Clone)]
pub struct QuotientFrame {
    pub d: usize,
    /// Number of eigenvectors treated as support when building the basis.
    pub r: usize,
    pub elements: Vec<BasisElement>,
    pub spectral: SpectralData,
}

impl QuotientFrame {
    /// Basis for the quotient space at the numerical rank of `spectral`.
    pub fn build(spectral: &SpectralData) -> Self {
        Self::with_rank(spectral, spectral.rank)
    }

    /// Basis spanning all Hermitian matrices (`r = d`), i.e. no quotient reduction.
    pub fn build_full(spectral: &SpectralData) -> Self {
        Self::with_rank(spectral, spectral.dim())
    }

    fn with_rank(spectral: &SpectralData, r: usize) -> Self {
        let d = spectral.dim();
        assert!(r >= 1 && r <= d, "rank {r} outside 1..={d}");
        let mut elements = Vec::with_capacity(2 * d * r - r * r);
        elements.extend((0..r).map(BasisElement::Projector));
        for j in 1..r {
            for i in 0..j {
                elements.push(BasisElement::Symmetric(i, j));
            }
        }
        for j in 1..r {
            for i in 0..j {
                elements.push(BasisElement::Antisymmetric(i, j));
            }
        }
        for k in r..d {
            for i in 0..r {
                elements.push(BasisElement::Symmetric(i, k));
            }
        }
        for k in r..d {
            for i in 0..r {
                elements.push(BasisElement::Antisymmetric(i, k));
            }
        }
        Self {
            d,
            r,
            elements,
            spectral: spectral.clone(),
        }
    }

    /// Quotient dimension `2dr - r²`.
    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    /// Basis element `i` expressed in the eigenbasis of the state.
    pub fn element_eigenbasis(&self, i: usize) -> CMatrix {
        let mut m = CMatrix::zeros(self.d, self.d);
        match self.elements[i] {
            BasisElement::Projector(a) => m[(a, a)] = c(1.0, 0.0),
            BasisElement::Symmetric(a, b) => {
                m[(a, b)] = c(SQRT_HALF, 0.0);
                m[(b, a)] = c(SQRT_HALF, 0.0);
            }
            BasisElement::Antisymmetric(a, b) => {
                m[(a, b)] = c(0.0, SQRT_HALF);
                m[(b, a)] = c(0.0, -SQRT_HALF);
            }
        }
        m
    }

    /// Basis element `i` in the original (computational) basis.
    pub fn element(&self, i: usize) -> CMatrix {
        self.spectral.from_eigenbasis(&self.element_eigenbasis(i))
    }

    /// All basis elements in the original basis.
    pub fn basis(&self) -> Vec<CMatrix> {
        (0..self.dim()).into_par_iter().map(|i| self.element(i)).collect()
    }

    /// Components `Tr[A λ_i]` of a Hermitian matrix given in the original basis.
    pub fn vectorize(&self, a: &CMatrix) -> DVector<f64> {
        self.vectorize_eigenbasis(&self.spectral.to_eigenbasis(a))
    }

    /// Same as [`QuotientFrame::vectorize`] for a matrix already in the eigenbasis.
    pub fn vectorize_eigenbasis(&self, a: &CMatrix) -> DVector<f64> {
        let s2 = std::f64::consts::SQRT_2;
        DVector::from_iterator(
            self.dim(),
            self.elements.iter().map(|e| match *e {
                BasisElement::Projector(i) => a[(i, i)].re,
                BasisElement::Symmetric(i, j) => s2 * 0.5 * (a[(i, j)] + a[(j, i)].conj()).re,
                BasisElement::Antisymmetric(i, j) => s2 * 0.5 * (a[(i, j)].im - a[(j, i)].im),
            }),
        )
    }

    /// `Σ x_i λ_i` in the eigenbasis; the kernel–kernel block is zero.
    pub fn devectorize_eigenbasis(&self, x: &[f64]) -> CMatrix {
        assert_eq!(x.len(), self.dim());
        let mut m = CMatrix::zeros(self.d, self.d);
        for (e, &v) in self.elements.iter().zip(x) {
            match *e {
                BasisElement::Projector(i) => m[(i, i)] += c(v, 0.0),
                BasisElement::Symmetric(i, j) => {
                    m[(i, j)] += c(v * SQRT_HALF, 0.0);
                    m[(j, i)] += c(v * SQRT_HALF, 0.0);
                }
                BasisElement::Antisymmetric(i, j) => {
                    m[(i, j)] += c(0.0, v * SQRT_HALF);
                    m[(j, i)] += c(0.0, -v * SQRT_HALF);
                }
            }
        }
        m
    }

    /// Representative of the equivalence class of `x` in the original basis.
    pub fn devectorize(&self, x: &[f64]) -> CMatrix {
        self.spectral.from_eigenbasis(&self.devectorize_eigenbasis(x))
    }
}

/// Matrix of the inner product `Tr[λ_i λ_j ρ]`.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub s: CMatrix,
    /// Expected rank `r·d`.
    pub rank: usize,
}

/// Closed-form Gram matrix from the eigenvalues.
///
/// Support pair `(i, j)` contributes the 2x2 block `[[p₊, -i p₋], [i p₋, p₊]]` on its
/// symmetric/antisymmetric elements with `p± = (p_i ± p_j)/2`; support–kernel pairs are the
/// same block with `p_j = 0`.
pub fn gram_closed_form(frame: &QuotientFrame) -> CMatrix {
    let p = frame.spectral.clamped_values();
    let dt = frame.dim();
    let mut s = CMatrix::zeros(dt, dt);
    let r = frame.r;
    let d = frame.d;
    let m = (r * r - r) / 2;
    for i in 0..r {
        s[(i, i)] = c(p[i], 0.0);
    }
    let mut pair_blocks = Vec::new();
    for idx in 0..m {
        pair_blocks.push((r + idx, r + m + idx));
    }
    let base = r + 2 * m;
    let nsk = r * (d - r);
    for idx in 0..nsk {
        pair_blocks.push((base + idx, base + nsk + idx));
    }
    for (sym, anti) in pair_blocks {
        let (a, b) = match frame.elements[sym] {
            BasisElement::Symmetric(a, b) => (a, b),
            _ => unreachable!("pair ordering"),
        };
        let plus = 0.5 * (p[a] + p[b]);
        let minus = 0.5 * (p[a] - p[b]);
        s[(sym, sym)] = c(plus, 0.0);
        s[(anti, anti)] = c(plus, 0.0);
        s[(sym, anti)] = c(0.0, -minus);
        s[(anti, sym)] = c(0.0, minus);
    }
    s
}

/// Gram matrix by evaluating `Tr[λ_i λ_j ρ]` on the materialized basis.
pub fn gram_direct(frame: &QuotientFrame) -> CMatrix {
    let basis = frame.basis();
    let rho = frame.spectral.reconstruct();
    let dt = basis.len();
    let d = frame.d;
    let products: Vec<CMatrix> = basis.par_iter().map(|l| l * &rho).collect();
    let cols: Vec<Vec<C64>> = (0..dt)
        .into_par_iter()
        .map(|j| {
            let mj = &products[j];
            (0..dt)
                .map(|i| {
                    let li = &basis[i];
                    let mut acc = C64::new(0.0, 0.0);
                    for a in 0..d {
                        for b in 0..d {
                            acc += li[(a, b)] * mj[(b, a)];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    CMatrix::from_fn(dt, dt, |i, j| cols[j][i])
}

pub const GRAM_CHECK_TOL: f64 = 1e-10;

/// Closed-form Gram matrix, verified entrywise against direct evaluation.
pub fn build_gram(frame: &QuotientFrame) -> Result<GramMatrix> {
    let s = gram_closed_form(frame);
    let direct = gram_direct(frame);
    let residual = linalg::max_abs(&(&s - &direct));
    let scale = frame.spectral.values[0].abs().max(1.0);
    if residual > GRAM_CHECK_TOL * scale {
        return Err(Error::BlockMismatch { residual });
    }
    Ok(GramMatrix {
        s,
        rank: frame.spectral.rank * frame.d,
    })
}

/// `R` with `R†R = S`, built from the eigenvalues of `S` above a truncation tolerance.
#[derive(Debug, Clone)]
pub struct GramFactor {
    pub r: CMatrix,
}

impl GramFactor {
    pub fn rows(&self) -> usize {
        self.r.nrows()
    }
}

pub fn factor_gram(gram: &GramMatrix, tol: Option<f64>) -> Result<GramFactor> {
    let eig = linalg::eigh(&gram.s)?;
    let n = eig.values.len();
    let max_eig = if n > 0 { eig.values[0] } else { 0.0 };
    let min_eig = if n > 0 { eig.values[n - 1] } else { 0.0 };
    if min_eig < -1e-8 {
        return Err(Error::NotPsd { min_eig });
    }
    let tol = tol.unwrap_or(1e-12 * max_eig.max(0.0));
    let kept: Vec<usize> = (0..n).filter(|&k| eig.values[k] > tol).collect();
    let dt = gram.s.ncols();
    let mut r = CMatrix::zeros(kept.len(), dt);
    for (row, &k) in kept.iter().enumerate() {
        let scale = eig.values[k].sqrt();
        for a in 0..dt {
            r[(row, a)] = eig.vectors[(a, k)].conj() * scale;
        }
    }
    Ok(GramFactor { r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_density;
    use crate::spectral::eigendecompose;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame_of(rho: &CMatrix) -> QuotientFrame {
        QuotientFrame::build(&eigendecompose(rho, Some(1e-12)).unwrap())
    }

    #[test]
    fn dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (d, r, expected) in [(2, 1, 3), (3, 2, 8), (4, 4, 16)] {
            let f = frame_of(&random_density(&mut rng, d, r));
            assert_eq!(f.dim(), expected);
        }
    }

    #[test]
    fn orthonormal_and_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = frame_of(&random_density(&mut rng, 4, 2));
        let basis = f.basis();
        for i in 0..basis.len() {
            assert!(linalg::hermiticity_residual(&basis[i]) < 1e-14);
            for j in 0..basis.len() {
                let t = linalg::trace_prod(&basis[i], &basis[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((t - c(want, 0.0)).norm() < 1e-10);
            }
        }
        assert_eq!(f.elements[0], BasisElement::Projector(0));
        assert_eq!(f.elements[2], BasisElement::Symmetric(0, 1));
        assert_eq!(f.elements[3], BasisElement::Antisymmetric(0, 1));
        assert_eq!(f.elements[4], BasisElement::Symmetric(0, 2));
        assert_eq!(f.elements[5], BasisElement::Symmetric(1, 2));
        assert_eq!(f.elements[8], BasisElement::Antisymmetric(0, 2));
    }

    #[test]
    fn vectorize_basis_and_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(&mut rng, 4, 3);
        let f = frame_of(&rho);
        for k in 0..f.dim() {
            let v = f.vectorize(&f.element(k));
            for (i, x) in v.iter().enumerate() {
                assert!((x - if i == k { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let v = f.vectorize(&rho);
        for i in 0..f.dim() {
            let want = if i < f.r { f.spectral.values[i] } else { 0.0 };
            assert!((v[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn vectorize_matches_trace_definition_and_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = frame_of(&random_density(&mut rng, 5, 2));
        let a = linalg::random_hermitian(&mut rng, 5);
        let b = linalg::random_hermitian(&mut rng, 5);
        let va = f.vectorize(&a);
        for i in 0..f.dim() {
            let t = linalg::trace_prod(&a, &f.element(i));
            assert!((va[i] - t.re).abs() < 1e-12 && t.im.abs() < 1e-12);
        }
        let combo = &a * c(0.7, 0.0) - &b * c(1.3, 0.0);
        let lhs = f.vectorize(&combo);
        let rhs = &va * 0.7 - f.vectorize(&b) * 1.3;
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn isometry_on_quotient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = frame_of(&random_density(&mut rng, 4, 2));
        let a = linalg::random_hermitian(&mut rng, 4);
        let b = linalg::random_hermitian(&mut rng, 4);
        let ra = f.devectorize(f.vectorize(&a).as_slice());
        let rb = f.devectorize(f.vectorize(&b).as_slice());
        let lhs = linalg::trace_prod(&ra, &rb).re;
        assert!((lhs - f.vectorize(&a).dot(&f.vectorize(&b))).abs() < 1e-10);
        // kernel block of the representative is zero
        let ea = f.spectral.to_eigenbasis(&ra);
        for i in f.r..4 {
            for j in f.r..4 {
                assert!(ea[(i, j)].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn maximally_mixed_qubit_gram() {
        let rho = CMatrix::identity(2, 2) * c(0.5, 0.0);
        let g = build_gram(&frame_of(&rho)).unwrap();
        assert!(linalg::max_abs(&(&g.s - CMatrix::identity(4, 4) * c(0.5, 0.0))) < 1e-14);
        let fac = factor_gram(&g, None).unwrap();
        assert_eq!(fac.rows(), 4);
    }

    #[test]
    fn pure_qubit_gram() {
        let mut rho = CMatrix::zeros(2, 2);
        rho[(0, 0)] = c(1.0, 0.0);
        let g = build_gram(&frame_of(&rho)).unwrap();
        let want = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.5, 0.0),
                c(0.0, -0.5),
                c(0.0, 0.0),
                c(0.0, 0.5),
                c(0.5, 0.0),
            ],
        );
        assert!(linalg::max_abs(&(&g.s - want)) < 1e-14);
        let fac = factor_gram(&g, None).unwrap();
        assert_eq!(fac.rows(), 2);
        assert!(linalg::max_abs(&(fac.r.adjoint() * &fac.r - &g.s)) < 1e-10);
    }

    #[test]
    fn gram_rank_is_rd_and_factor_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (d, r) in [(3, 1), (4, 2), (5, 3), (6, 6)] {
            let f = frame_of(&random_density(&mut rng, d, r));
            let g = build_gram(&f).unwrap();
            let fac = factor_gram(&g, None).unwrap();
            assert_eq!(fac.rows(), r * d);
            assert_eq!(g.rank, r * d);
            assert!(linalg::max_abs(&(fac.r.adjoint() * &fac.r - &g.s)) < 1e-10);
            assert!(linalg::min_eigenvalue(&g.s) > -1e-10);
        }
    }

    #[test]
    fn gram_represents_state_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_density(&mut rng, 4, 2);
        let f = frame_of(&rho);
        let g = build_gram(&f).unwrap();
        let a = linalg::random_hermitian(&mut rng, 4);
        let b = linalg::random_hermitian(&mut rng, 4);
        let (va, vb) = (f.vectorize(&a), f.vectorize(&b));
        let direct = linalg::trace(&(&a * &b * &rho));
        let mut quad = C64::new(0.0, 0.0);
        for i in 0..f.dim() {
            for j in 0..f.dim() {
                quad += g.s[(i, j)] * va[i] * vb[j];
            }
        }
        assert!((direct - quad).norm() < 1e-10);
    }

    #[test]
    fn factor_rejects_indefinite() {
        let g = GramMatrix {
            s: CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(-0.1, 0.0)])),
            rank: 2,
        };
        assert!(matches!(factor_gram(&g, None), Err(Error::NotPsd { .. })));
    }
}
