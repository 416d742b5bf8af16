//! Self-test battery: numerical claims about the bound and its example models.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::hcrb::{self, HcrbOptions};
use crate::info;
use crate::interferometer::{self as ifm, LossyState, ProbeSpec};
use crate::linalg::{self, c, CMatrix, RMatrix};
use crate::magnetometry::{self as mag, MagnetometrySpec};
use crate::measurement::{self, NelderMeadOptions, SearchOptions};
use crate::model::{random_model, QuantumModel};
use crate::spectral;

pub const ONEPHOTON_REL_TOL: f64 = 1e-5;
pub const ONEPHOTON_MAX_SECONDS: f64 = 30.0;
pub const CHAIN_TOL: f64 = 1e-6;
pub const CHAIN_MIN_MODELS: usize = 20;
pub const PHASE_LOSS_TOL: f64 = 1e-8;
pub const HB_REL_TOL: f64 = 1e-4;
pub const MAX_GAP_TOL: f64 = 1e-4;
pub const MAX_GAP_PEAK: f64 = 0.049;
pub const MAX_GAP_ZERO_TOL: f64 = 1e-6;
pub const TWO_QUBIT_RANGE: (f64, f64) = (0.25, 0.35);
pub const FOUR_QUBIT_D_TOL: f64 = 1e-6;
pub const FOUR_QUBIT_REL_TOL: f64 = 1e-5;
pub const MONOTONE_SLACK: f64 = 1e-6;
pub const PROJECTIVE_REL_TOL: f64 = 1e-4;
pub const PROJECTIVE_PROBES: usize = 50;
pub const PROJECTIVE_RESTARTS: usize = 10;
pub const QUOTIENT_REL_TOL: f64 = 1e-6;
pub const CONVEXITY_TOL: f64 = 1e-9;
pub const W_SCALING_TOL: f64 = 1e-6;
pub const BRUTE_FORCE_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Fast,
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: &'static str,
    pub title: &'static str,
    pub tag: Tag,
    pub pass: bool,
    /// The worst observed value of the checked quantity.
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
    pub wall_ms: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {}: measured {:.3e}, tolerance {:.1e}; {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.measured,
            self.tolerance,
            self.detail
        )
    }
}

struct Measured {
    pass: bool,
    measured: f64,
    tolerance: f64,
    detail: String,
}

impl Measured {
    fn at_most(measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            pass: measured <= tolerance,
            measured,
            tolerance,
            detail,
        }
    }
}

pub struct Check {
    pub id: &'static str,
    pub title: &'static str,
    pub tag: Tag,
    run: fn() -> Result<Measured>,
}

impl Check {
    pub fn run(&self) -> CheckOutcome {
        let start = Instant::now();
        let m = (self.run)().unwrap_or_else(|e| Measured {
            pass: false,
            measured: f64::NAN,
            tolerance: f64::NAN,
            detail: format!("error: {e}"),
        });
        CheckOutcome {
            id: self.id,
            title: self.title,
            tag: self.tag,
            pass: m.pass,
            measured: m.measured,
            tolerance: m.tolerance,
            detail: m.detail,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        }
    }
}

pub fn registry() -> Vec<Check> {
    vec![
        Check { id: "1", title: "single-photon SDP matches the closed form on the 9x9 grid", tag: Tag::Full, run: onephoton_oracle },
        Check { id: "2", title: "bound chain max(C_S, C_R) <= C_H <= h(X_SLD)", tag: Tag::Fast, run: bound_chain },
        Check { id: "3", title: "phase-loss incompatibility equals -J_phiphi/(2 eta)", tag: Tag::Fast, run: phase_loss_identity },
        Check { id: "4", title: "Holland-Burnett HCRB attained by the phase-SLD measurement", tag: Tag::Full, run: holland_burnett_attainability },
        Check { id: "5a", title: "single-photon maximal gap between C_H and the phase-SLD bound", tag: Tag::Fast, run: onephoton_max_gap },
        Check { id: "5b", title: "single-photon maximal gap never exceeds 0.049", tag: Tag::Fast, run: onephoton_gap_peak_check },
        Check { id: "6", title: "two-qubit noiseless magnetometry 1 - C_S/C_H", tag: Tag::Fast, run: two_qubit_gap },
        Check { id: "7", title: "four-qubit noiseless magnetometry is asymptotically classical", tag: Tag::Fast, run: four_qubit_classical },
        Check { id: "8a", title: "two-qubit 1 - C_S/C_H non-increasing in gamma", tag: Tag::Fast, run: monotone_two_qubits },
        Check { id: "8b", title: "three-qubit 1 - C_S/C_H non-increasing in gamma", tag: Tag::Fast, run: monotone_three_qubits },
        Check { id: "9", title: "projective measurements attain C_H for Haar-random two-qubit probes", tag: Tag::Full, run: projective_attainability },
        Check { id: "10a", title: "quotient-space and full-space HCRB agree", tag: Tag::Fast, run: quotient_vs_full },
        Check { id: "10b", title: "Holevo function is convex along random chords", tag: Tag::Fast, run: holevo_convexity },
        Check { id: "10c", title: "C_H scales linearly with W", tag: Tag::Fast, run: weight_scaling },
        Check { id: "10d", title: "solver certificates validate on every solve", tag: Tag::Fast, run: certificates },
        Check { id: "10e", title: "direct minimization of the Holevo function agrees with the SDP", tag: Tag::Fast, run: brute_force_oracle },
    ]
}

/// Run every check, or only the `fast` ones.
pub fn run(full: bool) -> Vec<CheckOutcome> {
    registry()
        .iter()
        .filter(|c| full || c.tag == Tag::Fast)
        .map(Check::run)
        .collect()
}

fn solve(model: &QuantumModel) -> Result<hcrb::HcrbResult> {
    hcrb::solve_hcrb(model, &HcrbOptions::default())
}

fn sld_bound(model: &QuantumModel) -> Result<(f64, info::SldSet)> {
    let sp = spectral::eigendecompose(&model.rho, None)?;
    let slds = info::compute_slds(model, &sp)?;
    Ok((info::sld_bound(&slds, &model.weight)?, slds))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn grid(lo: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| lo + step * k as f64).collect()
}

fn onephoton_model(c1sq: f64, eta: f64) -> Result<QuantumModel> {
    LossyState::new(&ProbeSpec::one_photon(c1sq)?, 0.0, eta)?.model()
}

fn onephoton_oracle() -> Result<Measured> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for &c1sq in &grid(0.1, 0.1, 9) {
        for &eta in &grid(0.1, 0.1, 9) {
            let sdp = solve(&onephoton_model(c1sq, eta)?)?.value;
            let (oracle, _) = ifm::onephoton_hcrb_oracle(c1sq, eta)?;
            worst = worst.max(rel(sdp, oracle));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let mut m = Measured::at_most(worst, ONEPHOTON_REL_TOL, format!("81 points in {secs:.2} s"));
    m.pass &= secs < ONEPHOTON_MAX_SECONDS;
    Ok(m)
}

/// Models used for the bound chain: both built-ins plus random models with `d <= 4`, `n <= 3`.
pub fn chain_battery() -> Result<Vec<(String, QuantumModel)>> {
    let mut out = Vec::new();
    for &eta in &[0.3, 0.6, 0.9] {
        let st = LossyState::new(&ifm::holland_burnett(2)?, 0.0, eta)?;
        out.push((format!("holland-burnett N=2 eta={eta}"), st.model()?));
    }
    for &(c1sq, eta) in &[(0.3, 0.2), (0.7, 0.7)] {
        out.push((format!("single photon c1sq={c1sq} eta={eta}"), onephoton_model(c1sq, eta)?));
    }
    out.push((
        "noon N=2 eta=0.5".into(),
        LossyState::new(&ProbeSpec::noon(2)?, 0.0, 0.5)?.model()?,
    ));
    for &(m, gamma) in &[(2, 0.0), (2, 0.5), (3, 0.3)] {
        let spec = MagnetometrySpec::new(m, gamma, [1.0; 3])?;
        out.push((format!("magnetometry M={m} gamma={gamma}"), mag::encode_and_dephase(&spec)?));
    }
    let shapes = [
        (2, 2, 1),
        (2, 2, 2),
        (2, 1, 2),
        (2, 2, 3),
        (3, 3, 2),
        (3, 2, 3),
        (3, 1, 2),
        (3, 3, 3),
        (4, 4, 3),
        (4, 2, 3),
        (4, 1, 3),
        (4, 3, 2),
    ];
    for (k, &(d, r, n)) in shapes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
        out.push((format!("random d={d} rank={r} n={n}"), random_model(&mut rng, d, r, n)?));
    }
    Ok(out)
}

fn bound_chain() -> Result<Measured> {
    let battery = chain_battery()?;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_name = String::new();
    for (name, model) in &battery {
        let sp = spectral::eigendecompose(&model.rho, None)?;
        let slds = info::compute_slds(model, &sp)?;
        let cs = info::sld_bound(&slds, &model.weight)?;
        let cr = info::rld_bound(&info::compute_rlds(model, &sp), &model.weight).unwrap_or(0.0);
        let ch = solve(model)?.value;
        let start = hcrb::feasible_start_from(&slds, &model.rho)?;
        let h_sld = hcrb::holevo_function(&start.x, model, &model.weight)?;
        let violation = (cs.max(cr) - ch).max(ch - h_sld);
        if violation > worst {
            worst = violation;
            worst_name = name.clone();
        }
    }
    let mut m = Measured::at_most(
        worst,
        CHAIN_TOL,
        format!("{} models; largest violation at {worst_name}", battery.len()),
    );
    m.pass &= battery.len() >= CHAIN_MIN_MODELS;
    Ok(m)
}

fn phase_loss_identity() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    for n in [1usize, 2, 4] {
        let probe = if n == 1 { ProbeSpec::one_photon(0.5)? } else { ifm::holland_burnett(n)? };
        for &eta in &grid(0.2, 0.1, 7) {
            let model = LossyState::new(&probe, 0.0, eta)?.model()?;
            let (_, slds) = sld_bound(&model)?;
            let d = ifm::phase_loss_incompatibility(&slds);
            let j = ifm::analytic_j_phiphi(&probe, eta)?;
            worst = worst.max((d + j / (2.0 * eta)).abs());
        }
    }
    Ok(Measured::at_most(worst, PHASE_LOSS_TOL, "N in {1,2,4}, eta in {0.2..0.8}".into()))
}

fn holland_burnett_attainability() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    for n in [2usize, 4, 6] {
        let probe = ifm::holland_burnett(n)?;
        for &eta in &grid(0.1, 0.1, 9) {
            let st = LossyState::new(&probe, 0.0, eta)?;
            let model = st.model()?;
            let ch = solve(&model)?.value;
            let fim = info::classical_fim(&model, &st.phase_sld_povm(n)?, info::DEFAULT_P_FLOOR)?;
            let cc = info::classical_bound(&fim, &model.weight)?;
            let r = 1.0 - ch / cc;
            if r.abs() > worst {
                worst = r.abs();
                at = format!("N={n} eta={eta:.1}");
            }
        }
    }
    Ok(Measured::at_most(worst, HB_REL_TOL, format!("worst at {at}")))
}

/// `1 - C_H / tr F(Pi_phi)^-1` for a single photon, from the SDP.
pub fn onephoton_reldiff(c1sq: f64, eta: f64) -> Result<f64> {
    let ch = solve(&onephoton_model(c1sq, eta)?)?.value;
    Ok(1.0 - ch / ifm::onephoton_classical_bound(c1sq, eta))
}

fn onephoton_max_gap() -> Result<Measured> {
    let c1_grid = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let mut worst_formula: f64 = 0.0;
    let mut worst_zero: f64 = 0.0;
    for &eta in &grid(0.05, 0.05, 19) {
        let mut sup = f64::NEG_INFINITY;
        for &c1sq in &c1_grid {
            sup = sup.max(onephoton_reldiff(c1sq, eta)?);
        }
        if eta < 0.5 {
            worst_formula = worst_formula.max((sup - ifm::onephoton_max_reldiff(eta)).abs());
        } else {
            worst_zero = worst_zero.max(sup.abs());
        }
    }
    Ok(Measured {
        pass: worst_formula <= MAX_GAP_TOL && worst_zero <= MAX_GAP_ZERO_TOL,
        measured: worst_formula,
        tolerance: MAX_GAP_TOL,
        detail: format!(
            "sup over |c1|^2 against the closed form for eta < 1/2; largest |gap| for eta >= 1/2 is {worst_zero:.2e} (tol {MAX_GAP_ZERO_TOL:.0e})"
        ),
    })
}

/// Largest single-photon gap over `eta`, evaluated by the SDP at `|c1|^2 = 1e-6`.
pub fn onephoton_gap_peak() -> Result<(f64, f64)> {
    let mut peak = (f64::NEG_INFINITY, 0.0);
    for &eta in &grid(0.005, 0.0025, 199) {
        let r = onephoton_reldiff(1e-6, eta)?;
        if r > peak.0 {
            peak = (r, eta);
        }
    }
    Ok(peak)
}

fn onephoton_gap_peak_check() -> Result<Measured> {
    let (peak, eta) = onephoton_gap_peak()?;
    Ok(Measured::at_most(peak, MAX_GAP_PEAK, format!("peak at eta = {eta:.4}")))
}

/// `1 - C_S / C_H` and `||D||_F` for the 3D-GHZ magnetometry model at `phi = (1, 1, 1)`.
pub fn magnetometry_panel(qubits: usize, gamma: f64) -> Result<(f64, f64)> {
    let model = mag::encode_and_dephase(&MagnetometrySpec::new(qubits, gamma, [1.0; 3])?)?;
    let (cs, slds) = sld_bound(&model)?;
    let ch = solve(&model)?.value;
    Ok((1.0 - cs / ch, info::weak_commutativity(&slds).1))
}

fn two_qubit_gap() -> Result<Measured> {
    let (r, _) = magnetometry_panel(2, 0.0)?;
    let (lo, hi) = TWO_QUBIT_RANGE;
    Ok(Measured {
        pass: (lo..=hi).contains(&r),
        measured: r,
        tolerance: hi,
        detail: format!("required in [{lo}, {hi}]"),
    })
}

fn four_qubit_classical() -> Result<Measured> {
    let (r, dfro) = magnetometry_panel(4, 0.0)?;
    Ok(Measured {
        pass: dfro < FOUR_QUBIT_D_TOL && r < FOUR_QUBIT_REL_TOL,
        measured: dfro,
        tolerance: FOUR_QUBIT_D_TOL,
        detail: format!("||D||_F measured; 1 - C_S/C_H = {r:.3e} (tol {FOUR_QUBIT_REL_TOL:.0e})"),
    })
}

/// Largest increase between neighbouring points of `1 - C_S/C_H` on `gamma = 0, 0.1, ..., 0.9`.
pub fn monotonicity_violation(qubits: usize) -> Result<(f64, Vec<f64>)> {
    let values = grid(0.0, 0.1, 10)
        .iter()
        .map(|&g| magnetometry_panel(qubits, g).map(|p| p.0))
        .collect::<Result<Vec<_>>>()?;
    let worst = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok((worst, values))
}

fn monotone(qubits: usize) -> Result<Measured> {
    let (worst, values) = monotonicity_violation(qubits)?;
    let listed: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
    Ok(Measured::at_most(worst, MONOTONE_SLACK, format!("values [{}]", listed.join(", "))))
}

fn monotone_two_qubits() -> Result<Measured> {
    monotone(2)
}

fn monotone_three_qubits() -> Result<Measured> {
    monotone(3)
}

/// `1 - C_H / C_proj` for Haar-random noiseless two-qubit probes, spread over the five field values.
pub fn projective_reldiffs(probes: usize, restarts: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(probes);
    for k in 0..probes {
        let phi = measurement::PARAMETER_SETS[k % measurement::PARAMETER_SETS.len()];
        let psi = measurement::haar_state(&mut rng, 4);
        let model = mag::probe_model(&psi, 0.0, phi)?;
        let ch = solve(&model)?.value;
        let best = measurement::optimize_projective(&model, &SearchOptions::new(restarts, seed + k as u64))?;
        out.push(1.0 - ch / best.best_value);
    }
    Ok(out)
}

fn projective_attainability() -> Result<Measured> {
    let r = projective_reldiffs(PROJECTIVE_PROBES, PROJECTIVE_RESTARTS, 2024)?;
    let worst = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lowest = r.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut m = Measured::at_most(
        worst,
        PROJECTIVE_REL_TOL,
        format!("{} probes, {} restarts each; smallest value {lowest:.2e}", r.len(), PROJECTIVE_RESTARTS),
    );
    m.pass &= lowest >= -CHAIN_TOL;
    Ok(m)
}

fn quotient_vs_full() -> Result<Measured> {
    let shapes = [(2, 1, 2), (3, 1, 2), (3, 2, 3), (4, 2, 3), (5, 2, 2), (5, 3, 3), (6, 2, 2), (6, 3, 2)];
    let full = HcrbOptions {
        full_space: true,
        ..HcrbOptions::default()
    };
    let mut worst: f64 = 0.0;
    for (k, &(d, r, n)) in shapes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + k as u64);
        let model = random_model(&mut rng, d, r, n)?;
        let a = solve(&model)?.value;
        let b = hcrb::solve_hcrb(&model, &full)?.value;
        worst = worst.max(rel(a, b));
    }
    Ok(Measured::at_most(worst, QUOTIENT_REL_TOL, format!("{} random rank-deficient models, d <= 6", shapes.len())))
}

/// Affine parametrization `X(t) = X_0 + N t` of all Hermitian operator tuples with
/// `Tr[d_j rho X_i] = delta_ij`.
pub struct UnbiasedFamily {
    basis: Vec<CMatrix>,
    n: usize,
    particular: DVector<f64>,
    null: DMatrix<f64>,
}

impl UnbiasedFamily {
    pub fn new(model: &QuantumModel) -> Result<Self> {
        let d = model.dim();
        let n = model.n_params();
        let basis = measurement::operator_basis(d);
        let m = basis.len();
        let a = DMatrix::from_fn(n, m, |j, b| linalg::trace_prod(&model.drho[j], &basis[b]).re);
        let svd = a.svd(true, true);
        let vt = svd.v_t.clone().ok_or(crate::Error::EigSolverFailure)?;
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-12 * smax).count();
        let pinv = svd
            .pseudo_inverse(1e-12 * smax)
            .map_err(|e| crate::Error::SingularModel(e.to_string()))?;
        let mut particular = DVector::zeros(n * m);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            let sol = &pinv * e;
            particular.rows_mut(i * m, m).copy_from(&sol);
        }
        let full_v = {
            let mut q = DMatrix::<f64>::identity(m, m);
            let vr = vt.rows(0, rank).transpose();
            q -= &vr * vr.transpose();
            let eig = nalgebra::SymmetricEigen::new(q);
            let cols: Vec<DVector<f64>> = (0..m)
                .filter(|&k| eig.eigenvalues[k] > 0.5)
                .map(|k| eig.eigenvectors.column(k).into_owned())
                .collect();
            DMatrix::from_columns(&cols)
        };
        let k = full_v.ncols();
        let mut null = DMatrix::zeros(n * m, n * k);
        for i in 0..n {
            null.view_mut((i * m, i * k), (m, k)).copy_from(&full_v);
        }
        Ok(Self {
            basis,
            n,
            particular,
            null,
        })
    }

    pub fn free_dim(&self) -> usize {
        self.null.ncols()
    }

    pub fn operators(&self, t: &[f64]) -> Vec<CMatrix> {
        let coeffs = &self.particular + &self.null * DVector::from_column_slice(t);
        let m = self.basis.len();
        (0..self.n)
            .map(|i| {
                let d = self.basis[0].nrows();
                let mut x = CMatrix::zeros(d, d);
                for b in 0..m {
                    x += &self.basis[b] * c(coeffs[i * m + b], 0.0);
                }
                x
            })
            .collect()
    }

    /// Free coordinates closest to the given operators.
    pub fn coordinates(&self, x: &[CMatrix]) -> DVector<f64> {
        let m = self.basis.len();
        let mut coeffs = DVector::zeros(self.n * m);
        for i in 0..self.n {
            for b in 0..m {
                let norm = linalg::trace_prod(&self.basis[b], &self.basis[b]).re;
                coeffs[i * m + b] = linalg::trace_prod(&x[i], &self.basis[b]).re / norm;
            }
        }
        self.null.transpose() * (coeffs - &self.particular)
    }
}

/// Minimize the Holevo function directly over unbiased operator tuples by repeated
/// Nelder-Mead runs started from the SLD solution.
pub fn brute_force_holevo(model: &QuantumModel) -> Result<f64> {
    let fam = UnbiasedFamily::new(model)?;
    let h = |t: &[f64]| hcrb::holevo_function(&fam.operators(t), model, &model.weight).unwrap_or(f64::INFINITY);
    let start = hcrb::feasible_start(model)?;
    let mut t = fam.coordinates(&start.x).as_slice().to_vec();
    let mut best = h(&t);
    let mut step = 0.5;
    for _ in 0..60 {
        let opts = NelderMeadOptions {
            simplex_tol: 1e-10,
            max_iter: 20_000,
            initial_step: step,
        };
        let r = measurement::nelder_mead(h, &t, &opts);
        let improved = best - r.value;
        if r.value < best {
            best = r.value;
            t = r.x;
        }
        if improved <= 1e-12 * best.abs() {
            if step < 1e-3 {
                break;
            }
            step *= 0.3;
        }
    }
    Ok(best)
}

/// Random models with `d <= 3`, `n = 2` used for the direct-minimization comparison.
pub fn brute_force_models() -> Result<Vec<QuantumModel>> {
    let shapes = [(2, 2, 2), (2, 1, 2), (3, 3, 2), (3, 2, 2), (3, 1, 2)];
    shapes
        .iter()
        .enumerate()
        .map(|(k, &(d, r, n))| {
            let mut rng = ChaCha8Rng::seed_from_u64(3000 + k as u64);
            random_model(&mut rng, d, r, n)
        })
        .collect()
}

fn brute_force_oracle() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    let models = brute_force_models()?;
    for model in &models {
        let sdp = solve(model)?.value;
        let direct = brute_force_holevo(model)?;
        worst = worst.max(rel(direct, sdp));
    }
    Ok(Measured::at_most(worst, BRUTE_FORCE_REL_TOL, format!("{} models, d <= 3, n = 2", models.len())))
}

fn holevo_convexity() -> Result<Measured> {
    use rand_distr::{Distribution, StandardNormal};
    let mut worst = f64::NEG_INFINITY;
    let mut probes = 0;
    for model in brute_force_models()?.iter().chain(chain_battery()?.iter().map(|(_, m)| m).take(3)) {
        let fam = UnbiasedFamily::new(model)?;
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + probes as u64);
        for _ in 0..20 {
            let mut draw = || -> Vec<f64> { (0..fam.free_dim()).map(|_| StandardNormal.sample(&mut rng)).collect() };
            let (a, b) = (draw(), draw());
            let lambda: f64 = rand::Rng::random_range(&mut rng, 0.0..1.0);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
            let ha = hcrb::holevo_function(&fam.operators(&a), model, &model.weight)?;
            let hb = hcrb::holevo_function(&fam.operators(&b), model, &model.weight)?;
            let hm = hcrb::holevo_function(&fam.operators(&mid), model, &model.weight)?;
            let excess = (hm - (lambda * ha + (1.0 - lambda) * hb)) / ha.abs().max(hb.abs()).max(1.0);
            worst = worst.max(excess);
            probes += 1;
        }
    }
    Ok(Measured::at_most(worst, CONVEXITY_TOL, format!("{probes} random chords")))
}

fn weight_scaling() -> Result<Measured> {
    let mut worst: f64 = 0.0;
    for (k, (_, model)) in chain_battery()?.into_iter().enumerate().step_by(3) {
        let base = solve(&model)?.value;
        let a = 0.5 + k as f64;
        let n = model.n_params();
        let scaled = model.clone().with_weight(RMatrix::identity(n, n) * a)?;
        let v = solve(&scaled)?.value;
        worst = worst.max(rel(v, a * base));
    }
    Ok(Measured::at_most(worst, W_SCALING_TOL, "C_H(aW) against a C_H(W)".into()))
}

fn certificates() -> Result<Measured> {
    let battery = chain_battery()?;
    let mut failures = 0usize;
    let mut worst_gap: f64 = 0.0;
    for (_, model) in &battery {
        match solve(model) {
            Ok(r) => {
                if !r.certificates.passed() {
                    failures += 1;
                }
                worst_gap = worst_gap.max(r.gap);
            }
            Err(_) => failures += 1,
        }
    }
    let tol = HcrbOptions::default().solver.gap_tol;
    let mut m = Measured::at_most(worst_gap, tol, format!("{} solves, {failures} certificate failures", battery.len()));
    m.pass &= failures == 0;
    Ok(m)
}
