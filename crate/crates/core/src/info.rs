//! Logarithmic derivatives, quantum Fisher information matrices and the scalar bounds built
//! from them, plus classical Fisher information for a given POVM.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, RMatrix};
use crate::model::QuantumModel;
use crate::spectral::SpectralData;

/// Tolerance for a derivative component that would require the rank to change.
pub const LEAK_TOL: f64 = 1e-8;
/// Relative threshold below which a Fisher matrix counts as singular.
pub const SINGULAR_TOL: f64 = 1e-10;
pub const DEFAULT_P_FLOOR: f64 = 1e-12;

/// Symmetric logarithmic derivatives with their Fisher matrix and weak-commutativity matrix.
#[derive(Debug, Clone)]
pub struct SldSet {
    pub l: Vec<CMatrix>,
    pub qfim: RMatrix,
    pub d: RMatrix,
}

/// SLDs solving `L ρ + ρ L = 2 ∂ρ`, with the kernel–kernel block set to zero.
pub fn compute_slds(model: &QuantumModel, spectral: &SpectralData) -> Result<SldSet> {
    let p = spectral.clamped_values();
    let dim = spectral.dim();
    let r = spectral.rank;
    let mut l = Vec::with_capacity(model.n_params());
    for dr in &model.drho {
        let de = spectral.to_eigenbasis(dr);
        let mut leak = 0.0_f64;
        for a in r..dim {
            for b in r..dim {
                leak = leak.max(de[(a, b)].norm());
            }
        }
        if leak > LEAK_TOL {
            return Err(Error::DerivativeOutsideModel { residual: leak });
        }
        let le = CMatrix::from_fn(dim, dim, |a, b| {
            let s = p[a] + p[b];
            if s > spectral.rank_tol && (a < r || b < r) {
                de[(a, b)] * c(2.0 / s, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        l.push(linalg::hermitian_part(&spectral.from_eigenbasis(&le)));
    }
    let rho = &model.rho;
    let n = l.len();
    let mut qfim = RMatrix::zeros(n, n);
    let mut dmat = RMatrix::zeros(n, n);
    for i in 0..n {
        let rho_li = rho * &l[i];
        for j in 0..n {
            // Tr[ρ L_i L_j] = conj(Tr[L_j L_i ρ])
            let t = linalg::trace_prod(&rho_li, &l[j]);
            qfim[(i, j)] = t.re;
            dmat[(i, j)] = -t.im;
        }
    }
    let qfim = (&qfim + qfim.transpose()) * 0.5;
    let dmat = (&dmat - dmat.transpose()) * 0.5;
    Ok(SldSet { l, qfim, d: dmat })
}

fn check_invertible(j: &RMatrix, what: &str) -> Result<()> {
    let (vals, _) = linalg::eigh_real(j)?;
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= SINGULAR_TOL * max {
        return Err(Error::SingularModel(format!(
            "{what} eigenvalues span [{min:.3e}, {max:.3e}]"
        )));
    }
    Ok(())
}

/// Inverse of the SLD quantum Fisher information matrix.
pub fn inverse_qfim(slds: &SldSet) -> Result<RMatrix> {
    check_invertible(&slds.qfim, "QFIM")?;
    linalg::spd_inverse(&slds.qfim).ok_or_else(|| Error::SingularModel("QFIM Cholesky failed".into()))
}

/// `tr[W J_S⁻¹]`.
pub fn sld_bound(slds: &SldSet, weight: &RMatrix) -> Result<f64> {
    let inv = inverse_qfim(slds)?;
    Ok((weight * inv).trace())
}

/// Right logarithmic derivatives `L̃ = ρ⁺ ∂ρ`.
#[derive(Debug, Clone)]
pub struct RldSet {
    pub ltilde: Vec<CMatrix>,
    pub jr: Option<CMatrix>,
    pub exists: bool,
    /// Largest derivative component leaving the support of the state.
    pub leakage: f64,
}

pub fn compute_rlds(model: &QuantumModel, spectral: &SpectralData) -> RldSet {
    let dim = spectral.dim();
    let r = spectral.rank;
    let p = spectral.clamped_values();
    let mut leakage = 0.0_f64;
    let mut ltilde = Vec::with_capacity(model.n_params());
    for dr in &model.drho {
        let de = spectral.to_eigenbasis(dr);
        for a in r..dim {
            for b in 0..dim {
                leakage = leakage.max(de[(a, b)].norm());
            }
        }
        let le = CMatrix::from_fn(dim, dim, |a, b| {
            if a < r {
                de[(a, b)] * c(1.0 / p[a], 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        ltilde.push(spectral.from_eigenbasis(&le));
    }
    let exists = leakage <= LEAK_TOL;
    let jr = exists.then(|| {
        let n = ltilde.len();
        let mut jr = CMatrix::zeros(n, n);
        for i in 0..n {
            let rl = &model.rho * &ltilde[i];
            for j in 0..n {
                jr[(i, j)] = linalg::trace_prod(&rl, &ltilde[j]);
            }
        }
        linalg::hermitian_part(&jr)
    });
    RldSet {
        ltilde,
        jr,
        exists,
        leakage,
    }
}

/// `tr[W Re J_R⁻¹] + ‖√W Im J_R⁻¹ √W‖₁`.
pub fn rld_bound(rlds: &RldSet, weight: &RMatrix) -> Result<f64> {
    let jr = match (&rlds.jr, rlds.exists) {
        (Some(jr), true) => jr,
        _ => return Err(Error::RldUnsupported),
    };
    let max_eig = linalg::eigh(jr)?.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_eig = linalg::min_eigenvalue(jr);
    if !(max_eig > 0.0) || min_eig <= SINGULAR_TOL * max_eig {
        return Err(Error::SingularModel(format!(
            "RLD Fisher matrix eigenvalues span [{min_eig:.3e}, {max_eig:.3e}]"
        )));
    }
    let inv = nalgebra::Cholesky::new(jr.clone())
        .map(|ch| linalg::hermitian_part(&ch.inverse()))
        .ok_or_else(|| Error::SingularModel("RLD Fisher matrix not invertible".into()))?;
    let re = inv.map(|z| z.re);
    let im = inv.map(|z| z.im);
    let sw = linalg::sym_sqrt(weight)?;
    Ok((weight * re).trace() + linalg::trace_norm(&(&sw * im * &sw)))
}

/// Weak-commutativity matrix `D_ij = Im Tr[L_j L_i ρ]` and its Frobenius norm.
pub fn weak_commutativity(slds: &SldSet) -> (RMatrix, f64) {
    let fro = slds.d.iter().map(|x| x * x).sum::<f64>().sqrt();
    (slds.d.clone(), fro)
}

/// A POVM given by its elements.
#[derive(Debug, Clone)]
pub struct Povm {
    pub elements: Vec<CMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let povm = Self { elements };
        let v = povm.violations();
        if v.is_empty() {
            Ok(povm)
        } else {
            Err(Error::InvariantViolation(v))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let Some(first) = self.elements.first() else {
            out.push("povm is empty".into());
            return out;
        };
        let d = first.nrows();
        let mut sum = CMatrix::zeros(d, d);
        for (k, e) in self.elements.iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                out.push(format!("element {k} shape {}x{}", e.nrows(), e.ncols()));
                continue;
            }
            let h = linalg::hermiticity_residual(e);
            if h > 1e-10 {
                out.push(format!("element {k} hermiticity residual {h:.3e}"));
            }
            let m = linalg::min_eigenvalue(e);
            if m < -1e-10 {
                out.push(format!("element {k} min eigenvalue {m:.3e}"));
            }
            sum += e;
        }
        let res = linalg::max_abs(&(sum - CMatrix::identity(d, d)));
        if res > 1e-9 {
            out.push(format!("completeness residual {res:.3e}"));
        }
        out
    }

    /// Rank-one projectors onto the columns of a unitary.
    pub fn from_basis(u: &CMatrix) -> Self {
        let elements = (0..u.ncols())
            .map(|k| {
                let v = u.column(k);
                &v * v.adjoint()
            })
            .collect();
        Self { elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Outcome probabilities `Tr[ρ Π_ω]` and their parameter gradients.
pub fn outcome_statistics(model: &QuantumModel, povm: &Povm) -> (Vec<f64>, Vec<DVector<f64>>) {
    let probs = povm
        .elements
        .iter()
        .map(|e| linalg::trace_prod(&model.rho, e).re)
        .collect();
    let grads = povm
        .elements
        .iter()
        .map(|e| {
            DVector::from_iterator(
                model.n_params(),
                model.drho.iter().map(|dr| linalg::trace_prod(dr, e).re),
            )
        })
        .collect();
    (probs, grads)
}

/// Classical Fisher information of the outcome distribution of `povm`.
///
/// Outcomes with probability at or below `p_floor` are dropped when every gradient
/// component is at most `√p_floor`; otherwise the information diverges and an error is
/// returned.
pub fn classical_fim(model: &QuantumModel, povm: &Povm, p_floor: f64) -> Result<RMatrix> {
    let n = model.n_params();
    let (probs, grads) = outcome_statistics(model, povm);
    let mut f = RMatrix::zeros(n, n);
    let grad_floor = p_floor.sqrt();
    for (k, (p, g)) in probs.iter().zip(&grads).enumerate() {
        if *p <= p_floor {
            let gmax = g.amax();
            if gmax > grad_floor {
                return Err(Error::IllConditionedOutcome {
                    outcome: k,
                    probability: *p,
                    derivative: gmax,
                });
            }
            continue;
        }
        f += g * g.transpose() / *p;
    }
    Ok((&f + f.transpose()) * 0.5)
}

/// `tr[W F⁻¹]` for a classical Fisher matrix.
pub fn classical_bound(fim: &RMatrix, weight: &RMatrix) -> Result<f64> {
    check_invertible(fim, "classical Fisher matrix")?;
    let inv = linalg::spd_inverse(fim)
        .ok_or_else(|| Error::SingularModel("classical Fisher matrix Cholesky failed".into()))?;
    Ok((weight * inv).trace())
}

/// Relative tolerance for grouping SLD eigenvalues into degenerate eigenspaces.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Projective measurement onto the eigenvectors of the SLD of parameter `which`.
///
/// Inside each degenerate eigenspace the basis diagonalizes the compressed state `QᵀρQ`.
pub fn sld_eigenbasis_povm(slds: &SldSet, rho: &CMatrix, which: usize) -> Result<Povm> {
    let l = slds.l.get(which).ok_or_else(|| {
        Error::InvalidArgument(format!("parameter index {which} out of range 0..{}", slds.l.len()))
    })?;
    Ok(Povm::from_basis(&refined_eigenbasis(l, rho)?))
}

/// Eigenvectors of `a`, with degenerate eigenspaces resolved by the eigenvectors of `b`
/// compressed onto them.
pub fn refined_eigenbasis(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let eig = linalg::eigh(a)?;
    let d = eig.values.len();
    let scale = eig.values.amax().max(1.0);
    let mut out = eig.vectors.clone();
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (eig.values[end - 1] - eig.values[end]).abs() <= DEGENERACY_TOL * scale {
            end += 1;
        }
        if end - start > 1 {
            let q = eig.vectors.columns(start, end - start).into_owned();
            let sub = linalg::eigh(&(q.adjoint() * b * &q))?;
            out.columns_mut(start, end - start).copy_from(&(q * sub.vectors));
        }
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigendecompose;

    fn bernoulli(theta: f64) -> QuantumModel {
        let mut rho = CMatrix::zeros(2, 2);
        rho[(0, 0)] = c((1.0 + theta) / 2.0, 0.0);
        rho[(1, 1)] = c((1.0 - theta) / 2.0, 0.0);
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = c(0.5, 0.0);
        d[(1, 1)] = c(-0.5, 0.0);
        QuantumModel::new(vec![theta], rho, vec![d], None).unwrap()
    }

    /// `e^{-iθσz/2}|+⟩` at θ = 0.
    fn pure_phase_qubit() -> QuantumModel {
        let h = 0.5;
        let rho = CMatrix::from_element(2, 2, c(h, 0.0));
        // d/dθ of (1/2)[[1, e^{-iθ}], [e^{iθ}, 1]] at θ = 0
        let d = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -h), c(0.0, h), c(0.0, 0.0)]);
        QuantumModel::new(vec![0.0], rho, vec![d], None).unwrap()
    }

    fn slds_of(m: &QuantumModel) -> SldSet {
        compute_slds(m, &eigendecompose(&m.rho, None).unwrap()).unwrap()
    }

    #[test]
    fn classical_two_outcome_model() {
        let m = bernoulli(0.0);
        let s = slds_of(&m);
        assert!((s.qfim[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((s.l[0][(0, 0)].re - 1.0).abs() < 1e-14);
        assert!((s.l[0][(1, 1)].re + 1.0).abs() < 1e-14);
        let (dm, fro) = weak_commutativity(&s);
        assert_eq!(dm.nrows(), 1);
        assert_eq!(fro, 0.0);
        let comp = Povm::from_basis(&CMatrix::identity(2, 2));
        let f = classical_fim(&m, &comp, DEFAULT_P_FLOOR).unwrap();
        assert!((f[(0, 0)] - 1.0).abs() < 1e-14);
        let trivial = Povm::new(vec![CMatrix::identity(2, 2)]).unwrap();
        assert_eq!(classical_fim(&m, &trivial, DEFAULT_P_FLOOR).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn pure_state_qfim_is_one() {
        let m = pure_phase_qubit();
        let s = slds_of(&m);
        assert!((s.qfim[(0, 0)] - 1.0).abs() < 1e-12);
        for (l, dr) in s.l.iter().zip(&m.drho) {
            let resid = l * &m.rho + &m.rho * l - dr * c(2.0, 0.0);
            assert!(linalg::max_abs(&resid) < 1e-8);
        }
        // pure state: derivative leaves the support, RLD does not exist
        let r = compute_rlds(&m, &eigendecompose(&m.rho, None).unwrap());
        assert!(!r.exists);
        assert!(matches!(rld_bound(&r, &RMatrix::identity(1, 1)), Err(Error::RldUnsupported)));
    }

    #[test]
    fn scalar_sld_bound_and_weight_linearity() {
        let s = SldSet {
            l: vec![],
            qfim: RMatrix::from_element(1, 1, 4.0),
            d: RMatrix::zeros(1, 1),
        };
        let w = RMatrix::identity(1, 1);
        assert!((sld_bound(&s, &w).unwrap() - 0.25).abs() < 1e-15);
        assert!((sld_bound(&s, &(w * 2.0)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rld_identity_fisher() {
        let r = RldSet {
            ltilde: vec![],
            jr: Some(CMatrix::identity(3, 3)),
            exists: true,
            leakage: 0.0,
        };
        assert!((rld_bound(&r, &RMatrix::identity(3, 3)).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_qfim_is_reported() {
        let s = SldSet {
            l: vec![],
            qfim: RMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            d: RMatrix::zeros(2, 2),
        };
        assert!(matches!(sld_bound(&s, &RMatrix::identity(2, 2)), Err(Error::SingularModel(_))));
    }

    #[test]
    fn sld_eigenbasis_of_sigma_z() {
        let mut l = CMatrix::zeros(2, 2);
        l[(0, 0)] = c(1.0, 0.0);
        l[(1, 1)] = c(-1.0, 0.0);
        let s = SldSet {
            l: vec![l],
            qfim: RMatrix::identity(1, 1),
            d: RMatrix::zeros(1, 1),
        };
        let povm = sld_eigenbasis_povm(&s, &(CMatrix::identity(2, 2) * c(0.5, 0.0)), 0).unwrap();
        assert!(povm.violations().is_empty());
        assert!((povm.elements[0][(0, 0)].re - 1.0).abs() < 1e-14);
        assert!((povm.elements[1][(1, 1)].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_probability_outcome_with_gradient_is_rejected() {
        let m = bernoulli(1.0 - 1e-15);
        let comp = Povm::from_basis(&CMatrix::identity(2, 2));
        assert!(matches!(
            classical_fim(&m, &comp, DEFAULT_P_FLOOR),
            Err(Error::IllConditionedOutcome { outcome: 1, .. })
        ));
    }
}
