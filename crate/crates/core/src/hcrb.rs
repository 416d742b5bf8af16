//! The Holevo Cramér-Rao bound as a semidefinite program over the quotient space.
//!
//! With `X` the `d̃ × n` matrix of vectorized estimator observables and `S = R†R` the Gram
//! matrix, the bound is
//!
//! ```text
//! minimize tr(W V)  subject to  [[V, XᵀR†], [R X, 𝟙]] ⪰ 0,   Xᵀ dS = 𝟙_n
//! ```
//!
//! The Hermitian LMI is mapped to a real symmetric one of twice the size. Variables are
//! ordered as the upper triangle of `V` column by column, then `X` column by column, so
//! `x_{a,i}` sits at index `n(n+1)/2 + i·d̃ + a`. Equality row `i + n·j` reads
//! `Σ_a x_{a,i} dS_{a,j} = δ_ij`.

use nalgebra::DVector;

use crate::conic::{self, CertificateReport, ConicProblem, SolveStatus, SolverOptions, SparseSym};
use crate::error::{Error, Result};
use crate::info::{self, SldSet};
use crate::linalg::{self, c, CMatrix, RMatrix};
use crate::model::QuantumModel;
use crate::quotient::{self, GramFactor, GramMatrix, QuotientFrame};
use crate::spectral::{self, SpectralData};

/// Slack allowed on `V ⪰ Z` at the reported optimum.
pub const LMI_SLACK: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct HcrbProgram {
    pub n: usize,
    pub d_tilde: usize,
    pub r_tilde: usize,
    pub factor: GramFactor,
    /// Columns are the vectorized derivatives `∂_iρ`.
    pub ds: RMatrix,
    pub weight: RMatrix,
    pub conic: ConicProblem,
}

impl HcrbProgram {
    pub fn n_v(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn v_index(a: usize, b: usize) -> usize {
        let (a, b) = (a.min(b), a.max(b));
        b * (b + 1) / 2 + a
    }

    pub fn x_index(&self, a: usize, i: usize) -> usize {
        self.n_v() + i * self.d_tilde + a
    }

    /// LMI dimension `2(n + r̃)`.
    pub fn lmi_dim(&self) -> usize {
        2 * (self.n + self.r_tilde)
    }

    pub fn n_vars(&self) -> usize {
        self.n_v() + self.n * self.d_tilde
    }

    /// Pack `(V, X)` into the conic variable vector.
    pub fn pack(&self, v: &RMatrix, x: &RMatrix) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_vars());
        for b in 0..self.n {
            for a in 0..=b {
                out[Self::v_index(a, b)] = v[(a, b)];
            }
        }
        for i in 0..self.n {
            for a in 0..self.d_tilde {
                out[self.x_index(a, i)] = x[(a, i)];
            }
        }
        out
    }

    /// Split a conic variable vector into `V` (symmetric) and `X` (`d̃ × n`).
    pub fn unpack(&self, vars: &DVector<f64>) -> (RMatrix, RMatrix) {
        let n = self.n;
        let v = RMatrix::from_fn(n, n, |a, b| vars[Self::v_index(a, b)]);
        let x = RMatrix::from_fn(self.d_tilde, n, |a, i| vars[self.x_index(a, i)]);
        (v, x)
    }
}

/// `Z = XᵀSX` in factored form `(RX)†(RX)`.
pub fn z_matrix(factor: &GramFactor, x: &RMatrix) -> CMatrix {
    let rx = &factor.r * linalg::to_complex(x);
    linalg::hermitian_part(&(rx.adjoint() * rx))
}

/// `tr[W Re Z] + ‖√W Im Z √W‖₁`.
pub fn holevo_from_z(z: &CMatrix, weight: &RMatrix) -> Result<f64> {
    let re = z.map(|v| v.re);
    let im = z.map(|v| v.im);
    let sw = linalg::sym_sqrt(weight)?;
    Ok((weight * re).trace() + linalg::trace_norm(&(&sw * im * &sw)))
}

/// `Z_ij = Tr[X_i X_j ρ]`.
pub fn z_from_operators(x: &[CMatrix], rho: &CMatrix) -> CMatrix {
    let n = x.len();
    let mut z = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            z[(i, j)] = linalg::trace_prod(&(&x[i] * &x[j]), rho);
        }
    }
    linalg::hermitian_part(&z)
}

/// Holevo function of arbitrary Hermitian operators `X_i`.
pub fn holevo_function(x: &[CMatrix], model: &QuantumModel, weight: &RMatrix) -> Result<f64> {
    if x.len() != weight.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} operators for a {}x{} weight",
            x.len(),
            weight.nrows(),
            weight.ncols()
        )));
    }
    holevo_from_z(&z_from_operators(x, &model.rho), weight)
}

fn check_nonsingular(slds: &SldSet) -> Result<()> {
    let (vals, _) = linalg::eigh_real(&slds.qfim)?;
    let max = vals.max();
    let min = vals.min();
    if !(max > 0.0) || min <= info::SINGULAR_TOL * max {
        return Err(Error::SingularModel(format!(
            "QFIM eigenvalues span [{min:.3e}, {max:.3e}]; Slater's condition fails"
        )));
    }
    Ok(())
}

/// Build the conic program for `model` in `frame` with weight `weight`.
pub fn assemble(
    model: &QuantumModel,
    frame: &QuotientFrame,
    factor: &GramFactor,
    weight: &RMatrix,
) -> Result<HcrbProgram> {
    let n = model.n_params();
    if weight.nrows() != n || weight.ncols() != n {
        return Err(Error::DimensionMismatch(format!("weight must be {n}x{n}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("model has no parameters".into()));
    }
    check_nonsingular(&info::compute_slds(model, &frame.spectral)?)?;
    let dt = frame.dim();
    let rt = factor.rows();
    if factor.r.ncols() != dt {
        return Err(Error::DimensionMismatch(format!(
            "Gram factor has {} columns for a {dt}-dimensional frame",
            factor.r.ncols()
        )));
    }
    let mut ds = RMatrix::zeros(dt, n);
    for (j, dr) in model.drho.iter().enumerate() {
        ds.set_column(j, &frame.vectorize(dr));
    }

    let mut program = HcrbProgram {
        n,
        d_tilde: dt,
        r_tilde: rt,
        factor: factor.clone(),
        ds,
        weight: weight.clone(),
        conic: ConicProblem {
            c: DVector::zeros(0),
            f: Vec::new(),
            g: RMatrix::zeros(0, 0),
            a: RMatrix::zeros(0, 0),
            b: DVector::zeros(0),
        },
    };
    let k = program.n_vars();
    let half = n + rt;
    let m = 2 * half;

    let mut cvec = DVector::zeros(k);
    let mut f = vec![SparseSym::new(m); k];
    for b in 0..n {
        for a in 0..=b {
            let idx = HcrbProgram::v_index(a, b);
            cvec[idx] = if a == b { weight[(a, a)] } else { weight[(a, b)] + weight[(b, a)] };
            f[idx].push(a, b, -1.0);
            f[idx].push(half + a, half + b, -1.0);
        }
    }
    for i in 0..n {
        for a in 0..dt {
            let fi = &mut f[program.x_index(a, i)];
            for s in 0..rt {
                let z = factor.r[(s, a)];
                fi.push(n + s, i, -z.re);
                fi.push(half + n + s, half + i, -z.re);
                fi.push(half + n + s, i, -z.im);
                fi.push(n + s, half + i, z.im);
            }
        }
    }
    let mut g = RMatrix::zeros(m, m);
    for s in 0..rt {
        g[(n + s, n + s)] = -1.0;
        g[(half + n + s, half + n + s)] = -1.0;
    }
    let mut a_eq = RMatrix::zeros(n * n, k);
    let mut b_eq = DVector::zeros(n * n);
    for i in 0..n {
        for j in 0..n {
            let row = i + n * j;
            for a in 0..dt {
                a_eq[(row, program.x_index(a, i))] = program.ds[(a, j)];
            }
            b_eq[row] = if i == j { 1.0 } else { 0.0 };
        }
    }
    program.conic = ConicProblem {
        c: cvec,
        f,
        g,
        a: a_eq,
        b: b_eq,
    };
    Ok(program)
}

/// Strictly feasible point built from the SLDs.
#[derive(Debug, Clone)]
pub struct FeasibleStart {
    pub v: RMatrix,
    /// Operators `X_i = Σ_j L_j (J_S⁻¹)_{ji}`.
    pub x: Vec<CMatrix>,
    /// Smallest eigenvalue of `V − Z[X]`.
    pub margin: f64,
}

/// `X = L·J_S⁻¹`, `V = J_S⁻¹ + t𝟙` with `t = 1` unless a larger shift is needed for
/// strict feasibility.
pub fn feasible_start_from(slds: &SldSet, rho: &CMatrix) -> Result<FeasibleStart> {
    let jinv = info::inverse_qfim(slds)?;
    let n = jinv.nrows();
    let x: Vec<CMatrix> = (0..n)
        .map(|i| {
            let mut xi = CMatrix::zeros(rho.nrows(), rho.ncols());
            for j in 0..n {
                xi += &slds.l[j] * c(jinv[(j, i)], 0.0);
            }
            xi
        })
        .collect();
    let z = z_from_operators(&x, rho);
    let im_norm = linalg::eigh(&z.map(|v| c(0.0, v.im)))?
        .values
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()));
    let shift = if im_norm < 0.5 { 1.0 } else { 2.0 * im_norm + 1.0 };
    let v = &jinv + RMatrix::identity(n, n) * shift;
    let margin = linalg::min_eigenvalue(&(linalg::to_complex(&v) - &z));
    if !(margin > 0.0) {
        return Err(Error::SingularModel(format!("SLD start not strictly feasible (margin {margin:.3e})")));
    }
    Ok(FeasibleStart { v, x, margin })
}

pub fn feasible_start(model: &QuantumModel) -> Result<FeasibleStart> {
    let spectral = spectral::eigendecompose(&model.rho, None)?;
    let slds = info::compute_slds(model, &spectral)?;
    feasible_start_from(&slds, &model.rho)
}

#[derive(Debug, Clone, Copy)]
pub struct HcrbOptions {
    pub solver: SolverOptions,
    pub rank_tol: Option<f64>,
    /// Solve over all Hermitian operators instead of the quotient space.
    pub full_space: bool,
}

impl Default for HcrbOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            rank_tol: None,
            full_space: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HcrbResult {
    pub value: f64,
    pub v: RMatrix,
    pub x: Vec<CMatrix>,
    pub z: CMatrix,
    pub h_at_opt: f64,
    pub gap: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub certificates: CertificateReport,
    pub d_tilde: usize,
    pub r_tilde: usize,
}

/// Everything the solve needs that depends only on the state.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spectral: SpectralData,
    pub frame: QuotientFrame,
    pub gram: GramMatrix,
    pub factor: GramFactor,
    pub slds: SldSet,
}

pub fn prepare(model: &QuantumModel, options: &HcrbOptions) -> Result<Prepared> {
    let spectral = spectral::eigendecompose(&model.rho, options.rank_tol)?;
    let frame = if options.full_space {
        QuotientFrame::build_full(&spectral)
    } else {
        QuotientFrame::build(&spectral)
    };
    let gram = quotient::build_gram(&frame)?;
    let factor = quotient::factor_gram(&gram, None)?;
    let slds = info::compute_slds(model, &spectral)?;
    Ok(Prepared {
        spectral,
        frame,
        gram,
        factor,
        slds,
    })
}

/// Solve the HCRB program for `model` with its own weight matrix.
pub fn solve_hcrb(model: &QuantumModel, options: &HcrbOptions) -> Result<HcrbResult> {
    let prepared = prepare(model, options)?;
    solve_prepared(model, &prepared, &model.weight, options)
}

pub fn solve_prepared(
    model: &QuantumModel,
    prepared: &Prepared,
    weight: &RMatrix,
    options: &HcrbOptions,
) -> Result<HcrbResult> {
    let n = model.n_params();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let j = prepared.slds.qfim[(i, i)];
            if j > 0.0 {
                j.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let pair = |i: usize, j: usize| scale[i] * scale[j];
    let scaled_weight = RMatrix::from_fn(n, n, |i, j| weight[(i, j)] / pair(i, j));
    let omega = linalg::max_abs_real(&scaled_weight).max(f64::MIN_POSITIVE);
    let scaled_weight = scaled_weight / omega;
    let scaled_model = QuantumModel {
        theta: model.theta.clone(),
        rho: model.rho.clone(),
        drho: model.drho.iter().zip(&scale).map(|(d, s)| d / c(*s, 0.0)).collect(),
        weight: scaled_weight.clone(),
    };
    let scaled_slds = SldSet {
        l: prepared.slds.l.iter().zip(&scale).map(|(l, s)| l / c(*s, 0.0)).collect(),
        qfim: RMatrix::from_fn(n, n, |i, j| prepared.slds.qfim[(i, j)] / pair(i, j)),
        d: RMatrix::from_fn(n, n, |i, j| prepared.slds.d[(i, j)] / pair(i, j)),
    };

    let program = assemble(&scaled_model, &prepared.frame, &prepared.factor, &scaled_weight)?;
    let start = feasible_start_from(&scaled_slds, &model.rho)?;
    let x0 = RMatrix::from_fn(program.d_tilde, program.n, |a, i| {
        prepared.frame.vectorize(&start.x[i])[a]
    });
    let v0 = program.pack(&start.v, &x0);
    let sol = conic::solve_from(&program.conic, &options.solver, Some(&v0))?;
    if !matches!(sol.status, SolveStatus::Optimal | SolveStatus::OptimalInaccurate) {
        return Err(Error::SolverFailure(format!(
            "status {} after {} iterations (primal residual {:.3e}, dual residual {:.3e}, gap {:.3e})",
            sol.status, sol.iterations, sol.primal_residual, sol.dual_residual, sol.rel_gap
        )));
    }
    let certificates = conic::validate_certificates(&program.conic, &sol, &options.solver);
    if let Some(fail) = certificates.checks.iter().find(|c| !c.pass) {
        return Err(if fail.name == "relative_gap" {
            Error::GapTooLarge {
                gap: fail.value,
                tol: fail.tol,
            }
        } else {
            Error::SolverFailure(format!("certificate {} = {:.3e} exceeds {:.1e}", fail.name, fail.value, fail.tol))
        });
    }
    let (v_scaled, x_scaled) = program.unpack(&sol.v);
    let v = RMatrix::from_fn(n, n, |i, j| v_scaled[(i, j)] / pair(i, j));
    let x = RMatrix::from_fn(program.d_tilde, n, |a, i| x_scaled[(a, i)] / scale[i]);
    let z = z_matrix(&program.factor, &x);
    let ops: Vec<CMatrix> = (0..program.n)
        .map(|i| prepared.frame.devectorize(x.column(i).as_slice()))
        .collect();
    let h_at_opt = holevo_from_z(&z, weight)?;
    let result = HcrbResult {
        value: omega * sol.objective,
        v,
        x: ops,
        z,
        h_at_opt,
        gap: sol.rel_gap,
        status: sol.status,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        certificates,
        d_tilde: program.d_tilde,
        r_tilde: program.r_tilde,
    };
    let violations = result_violations(&result, model, &prepared.slds, weight);
    if violations.is_empty() {
        Ok(result)
    } else {
        Err(Error::InvariantViolation(violations))
    }
}

/// Checks every documented property of an HCRB result.
pub fn result_violations(result: &HcrbResult, model: &QuantumModel, slds: &SldSet, weight: &RMatrix) -> Vec<String> {
    let mut out = Vec::new();
    let n = model.n_params();
    for i in 0..n {
        for j in 0..n {
            let t = linalg::trace_prod(&result.x[i], &model.drho[j]).re;
            let target = if i == j { 1.0 } else { 0.0 };
            if (t - target).abs() > 1e-6 {
                out.push(format!("unbiasedness: Tr[X_{i} d_{j}rho] = {t:.9}"));
            }
        }
    }
    let slack = linalg::min_eigenvalue(&(linalg::to_complex(&result.v) - &result.z));
    if slack < -LMI_SLACK {
        out.push(format!("lmi: min eigenvalue of V - Z = {slack:.3e}"));
    }
    let tol = 1e-6_f64.max(1e-6 * result.value.abs());
    if (result.h_at_opt - result.value).abs() > tol {
        out.push(format!("holevo function: h = {:.12} vs value {:.12}", result.h_at_opt, result.value));
    }
    if let Ok(cs) = info::sld_bound(slds, weight) {
        if result.value < cs - 1e-6 * cs.abs().max(1.0) {
            out.push(format!("bound chain: C_H = {:.12} < C_S = {cs:.12}", result.value));
        }
    }
    let spectral = spectral::eigendecompose(&model.rho, None);
    if let Ok(sp) = spectral {
        let rlds = info::compute_rlds(model, &sp);
        if let Ok(cr) = info::rld_bound(&rlds, weight) {
            if result.value < cr - 1e-6 * cr.abs().max(1.0) {
                out.push(format!("bound chain: C_H = {:.12} < C_R = {cr:.12}", result.value));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_density;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn classical_two_param() -> QuantumModel {
        // rho = diag(t1, t2, 1 − t1 − t2)
        let (t1, t2) = (0.3, 0.5);
        let rho = CMatrix::from_diagonal(&DVector::from_vec(vec![c(t1, 0.0), c(t2, 0.0), c(1.0 - t1 - t2, 0.0)]));
        let d1 = CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]));
        let d2 = CMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]));
        QuantumModel::new(vec![t1, t2], rho, vec![d1, d2], None).unwrap()
    }

    fn random_model(seed: u64, d: usize, rank: usize, n: usize) -> QuantumModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, d, rank);
        let drho = (0..n)
            .map(|_| {
                let h = linalg::random_hermitian(&mut rng, d);
                let comm = (&h * &rho - &rho * &h) * c(0.0, 1.0);
                linalg::hermitian_part(&comm)
            })
            .collect();
        QuantumModel::new(vec![0.0; n], rho, drho, None).unwrap()
    }

    #[test]
    fn program_dimensions() {
        let m = random_model(3, 3, 2, 2);
        let prep = prepare(&m, &HcrbOptions::default()).unwrap();
        let p = assemble(&m, &prep.frame, &prep.factor, &m.weight).unwrap();
        assert_eq!(p.n_vars(), 19);
        assert_eq!(p.r_tilde, 6);
        assert_eq!(p.lmi_dim(), 16);
        assert_eq!(p.conic.p(), 4);
        let m1 = random_model(4, 2, 2, 1);
        let prep1 = prepare(&m1, &HcrbOptions::default()).unwrap();
        let p1 = assemble(&m1, &prep1.frame, &prep1.factor, &m1.weight).unwrap();
        assert_eq!(p1.n_vars(), 5);
    }

    #[test]
    fn embedded_lmi_doubles_the_complex_spectrum() {
        let m = random_model(5, 3, 2, 2);
        let prep = prepare(&m, &HcrbOptions::default()).unwrap();
        let p = assemble(&m, &prep.frame, &prep.factor, &m.weight).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vars = DVector::from_fn(p.n_vars(), |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let (v, x) = p.unpack(&vars);
        let rx = &p.factor.r * linalg::to_complex(&x);
        let half = p.n + p.r_tilde;
        let mut lmi = CMatrix::zeros(half, half);
        lmi.view_mut((0, 0), (p.n, p.n)).copy_from(&linalg::to_complex(&v));
        lmi.view_mut((p.n, 0), (p.r_tilde, p.n)).copy_from(&rx);
        lmi.view_mut((0, p.n), (p.n, p.r_tilde)).copy_from(&rx.adjoint());
        lmi.view_mut((p.n, p.n), (p.r_tilde, p.r_tilde)).fill_with_identity();
        let embedded = -p.conic.lmi(&vars);
        assert!(linalg::max_abs_real(&(&embedded - linalg::real_embed(&lmi))) < 1e-12);
        let mut e1: Vec<f64> = linalg::eigh(&lmi).unwrap().values.iter().flat_map(|&x| [x, x]).collect();
        let mut e2: Vec<f64> = embedded.symmetric_eigenvalues().iter().copied().collect();
        e1.sort_by(f64::total_cmp);
        e2.sort_by(f64::total_cmp);
        for (a, b) in e1.iter().zip(&e2) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn single_parameter_equals_sld_bound() {
        let m = random_model(11, 3, 2, 1);
        let r = solve_hcrb(&m, &HcrbOptions::default()).unwrap();
        let slds = info::compute_slds(&m, &spectral::eigendecompose(&m.rho, None).unwrap()).unwrap();
        let cs = info::sld_bound(&slds, &m.weight).unwrap();
        assert!((r.value - cs).abs() <= 1e-7 * cs, "{} vs {cs}", r.value);
    }

    #[test]
    fn classical_model_equals_sld_bound() {
        let m = classical_two_param();
        let r = solve_hcrb(&m, &HcrbOptions::default()).unwrap();
        let slds = info::compute_slds(&m, &spectral::eigendecompose(&m.rho, None).unwrap()).unwrap();
        let cs = info::sld_bound(&slds, &m.weight).unwrap();
        assert!((r.value - cs).abs() <= 1e-7 * cs);
        // RLD and SLD bounds coincide for a classical model
        let rl = info::compute_rlds(&m, &spectral::eigendecompose(&m.rho, None).unwrap());
        assert!((info::rld_bound(&rl, &m.weight).unwrap() - cs).abs() < 1e-10);
    }

    #[test]
    fn feasible_start_is_unbiased_and_strict() {
        let m = random_model(21, 4, 3, 3);
        let fs = feasible_start(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let t = linalg::trace_prod(&fs.x[i], &m.drho[j]).re;
                assert!((t - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        assert!(fs.margin > 0.0);
    }

    #[test]
    fn singular_model_rejected() {
        let mut m = random_model(2, 3, 3, 1);
        m.drho.push(m.drho[0].clone());
        m.theta.push(0.0);
        m.weight = RMatrix::identity(2, 2);
        assert!(matches!(solve_hcrb(&m, &HcrbOptions::default()), Err(Error::SingularModel(_))));
    }

    #[test]
    fn weight_scaling() {
        let m = random_model(8, 3, 2, 2);
        let a = solve_hcrb(&m, &HcrbOptions::default()).unwrap();
        let m2 = m.clone().with_weight(RMatrix::identity(2, 2) * 3.0).unwrap();
        let b = solve_hcrb(&m2, &HcrbOptions::default()).unwrap();
        assert!((b.value - 3.0 * a.value).abs() <= 1e-8 * b.value);
    }
}
