//! Search over projective measurements for the smallest scalar classical Cramér-Rao bound.

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::info::{self, Povm};
use crate::linalg::{self, c, CMatrix, RMatrix, C64};
use crate::magnetometry;
use crate::model::QuantumModel;

/// Eigenphases of `V_x` closer than this are treated as one degenerate block.
pub const PHASE_DEGENERACY_TOL: f64 = 1e-9;
pub const DEFAULT_SIMPLEX_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 5000;
/// Outcomes below this probability are left out of the Fisher matrix during the search.
pub const SEARCH_P_FLOOR: f64 = 1e-10;

/// The five field values used for the two-qubit attainability study.
pub const PARAMETER_SETS: [[f64; 3]; 5] = [
    [0.0, 0.0, 1e-4],
    [0.0, 1.0, 1.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 1.0],
    [0.3305, 1.6584, 0.4844],
];

/// Coefficients of a Hermitian generator in a fixed operator basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitaryParam {
    pub x: Vec<f64>,
}

/// Hermitian operator basis with `d^2` elements, identity first.
///
/// For `d = 2^q` this is the product Pauli basis `lambda_a (x) lambda_b (x) ...` in
/// lexicographic order; otherwise the identity followed by the generalized Gell-Mann matrices.
pub fn operator_basis(d: usize) -> Vec<CMatrix> {
    if d.is_power_of_two() && d >= 2 {
        let q = d.trailing_zeros() as usize;
        let singles = {
            let [x, y, z] = magnetometry::paulis();
            [linalg::identity(2), x, y, z]
        };
        let mut out = vec![linalg::identity(1)];
        for _ in 0..q {
            out = out
                .iter()
                .flat_map(|a| singles.iter().map(move |s| linalg::kron(a, s)))
                .collect();
        }
        out
    } else {
        gell_mann_basis(d)
    }
}

fn gell_mann_basis(d: usize) -> Vec<CMatrix> {
    let mut out = vec![linalg::identity(d)];
    for j in 0..d {
        for k in (j + 1)..d {
            let mut s = CMatrix::zeros(d, d);
            s[(j, k)] = c(1.0, 0.0);
            s[(k, j)] = c(1.0, 0.0);
            out.push(s);
            let mut a = CMatrix::zeros(d, d);
            a[(j, k)] = c(0.0, -1.0);
            a[(k, j)] = c(0.0, 1.0);
            out.push(a);
        }
    }
    for l in 1..d {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = c(norm, 0.0);
        }
        m[(l, l)] = c(-(l as f64) * norm, 0.0);
        out.push(m);
    }
    out
}

/// `G = sum_a x_a B_a` so that `V_x = exp(-i G)`.
pub fn generator(x: &UnitaryParam, basis: &[CMatrix]) -> Result<CMatrix> {
    if x.x.len() != basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a basis of {} operators",
            x.x.len(),
            basis.len()
        )));
    }
    let d = basis[0].nrows();
    let mut g = CMatrix::zeros(d, d);
    for (xa, b) in x.x.iter().zip(basis) {
        g += b * c(*xa, 0.0);
    }
    Ok(g)
}

fn phase_distance(a: f64, b: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = (a - b).rem_euclid(t);
    r.min(t - r)
}

/// Orthonormal eigenbasis of `V_x`, with each degenerate block spanned by the projected
/// standard basis vectors taken in order.
pub fn unitary_eigenbasis(g: &CMatrix) -> Result<CMatrix> {
    let d = g.nrows();
    let eig = linalg::eigh(g)?;
    let mut assigned = vec![false; d];
    let mut columns: Vec<DVector<C64>> = Vec::with_capacity(d);
    for i in 0..d {
        if assigned[i] {
            continue;
        }
        let block: Vec<usize> = (i..d)
            .filter(|&j| !assigned[j] && phase_distance(eig.values[i], eig.values[j]) < PHASE_DEGENERACY_TOL)
            .collect();
        for &j in &block {
            assigned[j] = true;
        }
        if block.len() == 1 {
            columns.push(eig.vectors.column(i).into_owned());
            continue;
        }
        let q = CMatrix::from_columns(&block.iter().map(|&j| eig.vectors.column(j)).collect::<Vec<_>>());
        let proj = &q * q.adjoint();
        let mut chosen: Vec<DVector<C64>> = Vec::with_capacity(block.len());
        for e in 0..d {
            if chosen.len() == block.len() {
                break;
            }
            let mut v = proj.column(e).into_owned();
            for u in &chosen {
                let overlap = u.dotc(&v);
                v -= u * overlap;
            }
            let n = v.norm();
            if n > 1e-6 {
                chosen.push(v / c(n, 0.0));
            }
        }
        if chosen.len() != block.len() {
            return Err(Error::EigSolverFailure);
        }
        columns.extend(chosen);
    }
    Ok(CMatrix::from_columns(&columns))
}

/// Rank-one projectors onto the eigenvectors of `V_x = exp(-i sum_a x_a B_a)`.
pub fn projective_povm(x: &UnitaryParam, d: usize) -> Result<Povm> {
    let basis = operator_basis(d);
    projective_povm_in(x, &basis)
}

pub fn projective_povm_in(x: &UnitaryParam, basis: &[CMatrix]) -> Result<Povm> {
    let g = generator(x, basis)?;
    Ok(Povm::from_basis(&unitary_eigenbasis(&g)?))
}

/// `tr[W F^-1]` with near-zero outcomes dropped; `None` when the Fisher matrix is singular.
pub fn projective_objective(model: &QuantumModel, povm: &Povm) -> Option<f64> {
    let n = model.n_params();
    let (probs, grads) = info::outcome_statistics(model, povm);
    let mut f = RMatrix::zeros(n, n);
    for (p, g) in probs.iter().zip(&grads) {
        if *p > SEARCH_P_FLOOR {
            f += g * g.transpose() / *p;
        }
    }
    let f = (&f + f.transpose()) * 0.5;
    let value = info::classical_bound(&f, &model.weight).ok()?;
    value.is_finite().then_some(value)
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Stop when every vertex lies within this distance of the best vertex.
    pub simplex_tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            simplex_tol: DEFAULT_SIMPLEX_TOL,
            max_iter: DEFAULT_MAX_ITER,
            initial_step: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Downhill simplex minimization with standard coefficients.
///
/// Non-finite objective values count as `+inf`.
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    let point = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
    };
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter <= opts.simplex_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let xr = point(&centroid, &worst, -alpha);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = point(&centroid, &worst, -alpha * gamma);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = point(&centroid, &xr, rho);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = point(&centroid, &worst, rho);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = point(&best, &simplex[i], sigma);
            values[i] = eval(&simplex[i]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    NelderMeadResult {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub restarts: usize,
    pub seed: u64,
    pub nelder_mead: NelderMeadOptions,
}

impl SearchOptions {
    pub fn new(restarts: usize, seed: u64) -> Self {
        Self {
            restarts,
            seed,
            nelder_mead: NelderMeadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartRecord {
    pub restart: usize,
    /// RNG stream the restart drew its start point from.
    pub stream: u64,
    pub value: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best_value: f64,
    pub best_x: UnitaryParam,
    pub best_restart: usize,
    pub restarts_used: usize,
    pub seed: u64,
    pub trace: Vec<RestartRecord>,
}

impl SearchResult {
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "restart,stream,value,iterations,converged")?;
        for r in &self.trace {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.restart,
                r.stream,
                crate::json::csv_f64(r.value),
                r.iterations,
                r.converged
            )?;
        }
        Ok(())
    }

    /// Best value over the first `k` restarts.
    pub fn best_of_first(&self, k: usize) -> Option<f64> {
        self.trace[..k.min(self.trace.len())]
            .iter()
            .filter_map(|r| r.value)
            .min_by(f64::total_cmp)
    }
}

/// Start point of restart `r`: coefficients i.i.d. uniform on `[-pi, pi]`.
pub fn restart_start(seed: u64, restart: usize, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let pi = std::f64::consts::PI;
    (0..len).map(|_| rng.random_range(-pi..=pi)).collect()
}

/// Multi-start Nelder-Mead over `V_x` eigenbases; the result is an upper bound on the
/// optimal projective scalar bound.
pub fn optimize_projective(model: &QuantumModel, opts: &SearchOptions) -> Result<SearchResult> {
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let d = model.dim();
    let basis = operator_basis(d);
    let objective = |x: &[f64]| {
        let param = UnitaryParam { x: x.to_vec() };
        projective_povm_in(&param, &basis)
            .ok()
            .and_then(|p| projective_objective(model, &p))
            .unwrap_or(f64::INFINITY)
    };
    let runs: Vec<(RestartRecord, Vec<f64>)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let x0 = restart_start(opts.seed, r, basis.len());
            let nm = nelder_mead(objective, &x0, &opts.nelder_mead);
            let record = RestartRecord {
                restart: r,
                stream: r as u64,
                value: nm.value.is_finite().then_some(nm.value),
                iterations: nm.iterations,
                converged: nm.converged,
            };
            (record, nm.x)
        })
        .collect();
    let best = runs
        .iter()
        .filter_map(|(rec, x)| rec.value.map(|v| (v, rec.restart, x)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some((best_value, best_restart, best_x)) = best else {
        return Err(Error::AllRestartsFailed);
    };
    let best_x = UnitaryParam { x: best_x.clone() };
    Ok(SearchResult {
        best_value,
        best_x,
        best_restart,
        restarts_used: opts.restarts,
        seed: opts.seed,
        trace: runs.into_iter().map(|(r, _)| r).collect(),
    })
}

/// Haar-random pure state of dimension `d`.
pub fn haar_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<C64> {
    let g = linalg::random_complex(rng, d, 1);
    let v = g.column(0).into_owned();
    let n = v.norm();
    v / c(n, 0.0)
}
