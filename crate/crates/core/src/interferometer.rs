//! Lossy Mach-Zehnder interferometer with fixed-photon-number probes: joint estimation of a
//! phase `φ` and a transmissivity `η` in one arm.
//!
//! The Hilbert space after loss is spanned by `|k − l, N − k⟩`, `0 ≤ l ≤ k ≤ N`. Basis states
//! are grouped in blocks by the number of lost photons `l = 0..N`, each block ordered by `k`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::info::{self, Povm};
use crate::linalg::{c, CMatrix, RMatrix, C64};
use crate::model::QuantumModel;

/// Two-mode input `Σ_k c_k |k, N − k⟩`.
#[derive(Debug, Clone)]
pub struct ProbeSpec {
    pub n_photons: usize,
    pub c: Vec<C64>,
}

impl ProbeSpec {
    pub fn new(c: Vec<C64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::InvalidArgument("probe needs at least one amplitude".into()));
        }
        let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvariantViolation(vec![format!("probe normalization: Σ|c_k|² = {norm:.12}")]));
        }
        Ok(Self {
            n_photons: c.len() - 1,
            c,
        })
    }

    /// Single-photon probe `√(1 − c1sq)|0,1⟩ + √c1sq |1,0⟩`.
    pub fn one_photon(c1sq: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c1sq) {
            return Err(Error::InvalidArgument(format!("|c_1|² = {c1sq} outside [0, 1]")));
        }
        Self::new(vec![c((1.0 - c1sq).sqrt(), 0.0), c(c1sq.sqrt(), 0.0)])
    }

    /// `N00N` probe `(|N,0⟩ + |0,N⟩)/√2`.
    pub fn noon(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("N00N state needs N ≥ 1".into()));
        }
        let mut amps = vec![c(0.0, 0.0); n + 1];
        amps[0] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[n] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::new(amps)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.c.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn dim(&self) -> usize {
        let n = self.n_photons;
        (n + 1) * (n + 2) / 2
    }
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Twin-Fock state `|N/2, N/2⟩` after a balanced beam splitter.
pub fn holland_burnett(n: usize) -> Result<ProbeSpec> {
    if n % 2 == 1 {
        return Err(Error::OddPhotonNumber(n));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("Holland-Burnett states need N ≥ 2, got {n}")));
    }
    let half = n / 2;
    let mut amps = vec![c(0.0, 0.0); n + 1];
    for k in 0..=half {
        let ln = 0.5 * (ln_factorial(2 * k) + ln_factorial(n - 2 * k))
            - half as f64 * std::f64::consts::LN_2
            - ln_factorial(k)
            - ln_factorial(half - k);
        amps[2 * k] = c(ln.exp(), 0.0);
    }
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    ProbeSpec::new(amps)
}

/// Position of `|k − l, N − k⟩` in the block-ordered basis.
pub fn basis_index(n: usize, l: usize, k: usize) -> usize {
    debug_assert!(l <= k && k <= n);
    l * (n + 1) - l * (l.saturating_sub(1)) / 2 + (k - l)
}

/// Range of basis indices for the block with `l` lost photons.
pub fn block_range(n: usize, l: usize) -> std::ops::Range<usize> {
    let start = basis_index(n, l, l);
    start..start + (n + 1 - l)
}

/// `B_l^k = C(k, l) η^{k−l} (1 − η)^l`.
pub fn loss_probability(k: usize, l: usize, eta: f64) -> f64 {
    if l > k {
        return 0.0;
    }
    let binom = (ln_factorial(k) - ln_factorial(l) - ln_factorial(k - l)).exp().round();
    binom * eta.powi((k - l) as i32) * (1.0 - eta).powi(l as i32)
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::BoundaryTransmissivity(eta));
    }
    Ok(())
}

/// Sub-normalized block vectors `√p_l |ψ_l⟩` and their `φ`, `η` derivatives.
#[derive(Debug, Clone)]
pub struct LossyState {
    pub eta: f64,
    pub phi: f64,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub blocks: Vec<DVector<C64>>,
    pub d_phi: Vec<DVector<C64>>,
    pub d_eta: Vec<DVector<C64>>,
}

impl LossyState {
    pub fn new(probe: &ProbeSpec, phi: f64, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        let n = probe.n_photons;
        let dim = probe.dim();
        let mut blocks = Vec::with_capacity(n + 1);
        let mut d_phi = Vec::with_capacity(n + 1);
        let mut d_eta = Vec::with_capacity(n + 1);
        for l in 0..=n {
            let mut v = DVector::zeros(dim);
            let mut dp = DVector::zeros(dim);
            let mut de = DVector::zeros(dim);
            for k in l..=n {
                let amp = probe.c[k] * C64::from_polar(1.0, k as f64 * phi) * loss_probability(k, l, eta).sqrt();
                let idx = basis_index(n, l, k);
                v[idx] = amp;
                dp[idx] = amp * c(0.0, k as f64);
                de[idx] = amp * (0.5 * ((k - l) as f64 / eta - l as f64 / (1.0 - eta)));
            }
            blocks.push(v);
            d_phi.push(dp);
            d_eta.push(de);
        }
        let weights = blocks.iter().map(|b| b.norm_squared()).collect();
        Ok(Self {
            eta,
            phi,
            dim,
            weights,
            blocks,
            d_phi,
            d_eta,
        })
    }

    pub fn rho(&self) -> CMatrix {
        let mut rho = CMatrix::zeros(self.dim, self.dim);
        for b in &self.blocks {
            rho += b * b.adjoint();
        }
        rho
    }

    fn derivative(&self, ds: &[DVector<C64>]) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (b, db) in self.blocks.iter().zip(ds) {
            let t = db * b.adjoint();
            out += &t + t.adjoint();
        }
        out
    }

    pub fn model(&self) -> Result<QuantumModel> {
        QuantumModel::new(
            vec![self.phi, self.eta],
            self.rho(),
            vec![self.derivative(&self.d_phi), self.derivative(&self.d_eta)],
            None,
        )
    }

    /// Projective measurement onto the eigenvectors of the phase SLD, resolved block by block.
    pub fn phase_sld_povm(&self, n: usize) -> Result<Povm> {
        let model = self.model()?;
        let spectral = crate::spectral::eigendecompose(&model.rho, None)?;
        let slds = info::compute_slds(&model, &spectral)?;
        let mut u = CMatrix::zeros(self.dim, self.dim);
        for l in 0..=n {
            let range = block_range(n, l);
            let sub_l = slds.l[0].view((range.start, range.start), (range.len(), range.len())).into_owned();
            let sub_rho = model.rho.view((range.start, range.start), (range.len(), range.len())).into_owned();
            let basis = info::refined_eigenbasis(&sub_l, &sub_rho)?;
            u.view_mut((range.start, range.start), (range.len(), range.len())).copy_from(&basis);
        }
        Ok(Povm::from_basis(&u))
    }
}

/// Model `θ = (φ, η)` after the lossy phase shift.
pub fn evolve(probe: &ProbeSpec, phi: f64, eta: f64) -> Result<QuantumModel> {
    LossyState::new(probe, phi, eta)?.model()
}

/// Phase entry of the diagonal QFIM; finite on `0 < η ≤ 1`.
pub fn analytic_j_phiphi(probe: &ProbeSpec, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::BoundaryTransmissivity(eta));
    }
    let w = probe.weights();
    let n = probe.n_photons;
    let mut total: f64 = w.iter().enumerate().map(|(k, wk)| (k * k) as f64 * wk).sum();
    for l in 0..=n {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in l..=n {
            let b = loss_probability(k, l, eta);
            num += k as f64 * w[k] * b;
            den += w[k] * b;
        }
        // The block term is (Σ k w B)² / Σ w B.
        if den > 0.0 {
            total -= num * num / den;
        }
    }
    Ok(4.0 * total)
}

/// Closed-form `diag(J_φφ, J_ηη)`.
pub fn analytic_qfim(probe: &ProbeSpec, _phi: f64, eta: f64) -> Result<RMatrix> {
    check_eta(eta)?;
    let jpp = analytic_j_phiphi(probe, eta)?;
    let mean_k: f64 = probe.weights().iter().enumerate().map(|(k, w)| k as f64 * w).sum();
    let jee = mean_k / (eta * (1.0 - eta));
    Ok(RMatrix::from_row_slice(2, 2, &[jpp, 0.0, 0.0, jee]))
}

/// Closed-form classical Fisher matrix of the phase-SLD eigenbasis measurement.
pub fn analytic_phase_measurement_fim(probe: &ProbeSpec, phi: f64, eta: f64) -> Result<RMatrix> {
    let j = analytic_qfim(probe, phi, eta)?;
    let jpp = j[(0, 0)];
    Ok(RMatrix::from_row_slice(2, 2, &[jpp, 0.0, 0.0, j[(1, 1)] - jpp / (4.0 * eta * eta)]))
}

/// Which branch of the single-photon closed form applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleRegion {
    /// The phase-SLD measurement attains the bound.
    SldMeasurement,
    /// The optimum has a nonzero imaginary part of `Z`.
    Rotated,
}

/// Boundary `η*(c1sq) = (1 − c1sq/(1 − c1sq))/2`; region `Rotated` needs `η < η*`.
pub fn onephoton_region_boundary(c1sq: f64) -> f64 {
    0.5 * (1.0 - c1sq / (1.0 - c1sq))
}

/// `tr F(Π_φ)⁻¹` for a single photon with `W = 𝟙`.
pub fn onephoton_classical_bound(c1sq: f64, eta: f64) -> f64 {
    (c1sq * (eta - 1.0) + 1.0) * (4.0 * (1.0 - c1sq) * (1.0 - eta) * eta + 1.0) / (4.0 * c1sq * (1.0 - c1sq) * eta)
}

/// Closed-form single-photon HCRB with `W = 𝟙`.
pub fn onephoton_hcrb_oracle(c1sq: f64, eta: f64) -> Result<(f64, OracleRegion)> {
    if !(c1sq > 0.0 && c1sq < 1.0) {
        return Err(Error::InvalidArgument(format!("|c_1|² = {c1sq} must lie in (0, 1)")));
    }
    check_eta(eta)?;
    if c1sq >= 0.5 || eta >= onephoton_region_boundary(c1sq) {
        Ok((onephoton_classical_bound(c1sq, eta), OracleRegion::SldMeasurement))
    } else {
        Ok(((1.0 + 3.0 * eta - 4.0 * eta.powi(3)) / (4.0 * c1sq * eta), OracleRegion::Rotated))
    }
}

/// `Im Tr[L_φ L_η ρ]`, the only independent entry of the weak-commutativity matrix.
pub fn phase_loss_incompatibility(slds: &info::SldSet) -> f64 {
    slds.d[(1, 0)]
}

/// `sup_{c1sq} (1 − C_H / tr F(Π_φ)⁻¹)` for a single photon.
pub fn onephoton_max_reldiff(eta: f64) -> f64 {
    if eta >= 0.5 {
        0.0
    } else {
        eta * (1.0 - 2.0 * eta).powi(2) / (1.0 + 4.0 * eta - 4.0 * eta * eta)
    }
}
