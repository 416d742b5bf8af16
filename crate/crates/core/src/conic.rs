//! Inequality-form semidefinite programs
//!
//! ```text
//! minimize  cᵀv   subject to   Σ v_i F_i + G ⪯ 0,   A v = b
//! ```
//!
//! solved by an infeasible primal-dual path-following method (HKM direction with a
//! Mehrotra predictor-corrector). The dual is `maximize tr(G Z) + bᵀy` subject to
//! `c + F*(Z) − Aᵀy = 0`, `Z ⪰ 0`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use nalgebra::{Cholesky, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RMatrix;

/// Sparse symmetric matrix stored as upper-triangle triplets `(row ≤ col, value)`.
///
/// Each off-diagonal triplet stands for both `(row, col)` and `(col, row)`. Repeated
/// positions add up.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseSym {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Add `value` at `(i, j)` and, if off-diagonal, at `(j, i)`.
    pub fn push(&mut self, i: usize, j: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((i.min(j), i.max(j), value));
        }
    }

    pub fn from_dense(m: &RMatrix) -> Self {
        let mut out = Self::new(m.nrows());
        for j in 0..m.ncols() {
            for i in 0..=j {
                out.push(i, j, m[(i, j)]);
            }
        }
        out
    }

    pub fn to_dense(&self) -> RMatrix {
        let mut out = RMatrix::zeros(self.dim, self.dim);
        self.add_to(&mut out, 1.0);
        out
    }

    /// `out += scale · self`.
    pub fn add_to(&self, out: &mut RMatrix, scale: f64) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += scale * v;
            if i != j {
                out[(j, i)] += scale * v;
            }
        }
    }

    /// `tr(self · k)` for any square `k`.
    pub fn inner(&self, k: &RMatrix) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * k[(i, i)] } else { v * (k[(i, j)] + k[(j, i)]) })
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in &self.entries {
            *merged.entry((i, j)).or_insert(0.0) += v;
        }
        merged.values().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// `minimize cᵀv` subject to `Σ v_i F_i + G ⪯ 0` and `A v = b`.
#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub c: DVector<f64>,
    pub f: Vec<SparseSym>,
    pub g: RMatrix,
    pub a: RMatrix,
    pub b: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProblemDump {
    k: usize,
    m: usize,
    c: Vec<f64>,
    #[serde(rename = "F")]
    f: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

fn rows_of(m: &RMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<RMatrix> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!("{what} must be {nrows}x{ncols}")));
    }
    Ok(RMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl ConicProblem {
    pub fn k(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.g.nrows()
    }

    pub fn p(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (k, m, p) = (self.k(), self.m(), self.p());
        if self.g.ncols() != m {
            return Err(Error::DimensionMismatch(format!("G is {}x{}", m, self.g.ncols())));
        }
        if self.f.len() != k {
            return Err(Error::DimensionMismatch(format!("{} F matrices for {k} variables", self.f.len())));
        }
        for (i, fi) in self.f.iter().enumerate() {
            if fi.dim != m || fi.entries.iter().any(|&(r, c, _)| r >= m || c >= m) {
                return Err(Error::DimensionMismatch(format!("F[{i}] does not fit the {m}x{m} LMI")));
            }
        }
        if self.a.nrows() != p || self.a.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, expected {p}x{k}",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        let asym = (&self.g - self.g.transpose()).amax();
        if asym > 1e-12 * self.g.amax().max(1.0) {
            return Err(Error::DimensionMismatch(format!("G is not symmetric (residual {asym:.3e})")));
        }
        Ok(())
    }

    /// `Σ v_i F_i + G`.
    pub fn lmi(&self, v: &DVector<f64>) -> RMatrix {
        let mut out = self.g.clone();
        for (fi, &vi) in self.f.iter().zip(v.iter()) {
            if vi != 0.0 {
                fi.add_to(&mut out, vi);
            }
        }
        out
    }

    /// `F*(K)_i = tr(F_i K)`.
    pub fn adjoint(&self, k: &RMatrix) -> DVector<f64> {
        DVector::from_vec(self.f.par_iter().map(|fi| fi.inner(k)).collect())
    }

    /// Dense interchange document with 17 significant digits.
    pub fn to_json(&self) -> String {
        let dump = ProblemDump {
            k: self.k(),
            m: self.m(),
            c: self.c.iter().copied().collect(),
            f: self.f.iter().map(|fi| rows_of(&fi.to_dense())).collect(),
            g: rows_of(&self.g),
            a: rows_of(&self.a),
            b: self.b.iter().copied().collect(),
        };
        crate::json::to_string(&dump).expect("problem serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: ProblemDump = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let (k, m) = (dump.k, dump.m);
        if dump.c.len() != k || dump.f.len() != k {
            return Err(Error::DimensionMismatch(format!("expected {k} entries in c and F")));
        }
        let f = dump
            .f
            .iter()
            .enumerate()
            .map(|(i, rows)| from_rows(rows, m, m, &format!("F[{i}]")).map(|d| SparseSym::from_dense(&d)))
            .collect::<Result<Vec<_>>>()?;
        let p = dump.b.len();
        let a = if p == 0 {
            RMatrix::zeros(0, k)
        } else {
            from_rows(&dump.a, p, k, "A")?
        };
        let problem = Self {
            c: DVector::from_vec(dump.c),
            f,
            g: from_rows(&dump.g, m, m, "G")?,
            a,
            b: DVector::from_vec(dump.b),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped early, but within `INACCURATE_FACTOR` times every tolerance.
    OptimalInaccurate,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Infeasible => "infeasible",
            Self::Unbounded => "unbounded",
            Self::OptimalInaccurate => "optimal_inaccurate",
            Self::NumericalFailure => "numerical_failure",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Solver output. `y` and `z` are the dual variables; for an infeasible problem they hold
/// the normalized Farkas certificate, for an unbounded one `v` holds the improving ray.
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub v: DVector<f64>,
    pub y: DVector<f64>,
    pub z: RMatrix,
    pub objective: f64,
    pub dual_objective: f64,
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rel_gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub eq_tol: f64,
    pub psd_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eq_tol: 1e-8,
            psd_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            eq_tol: tol,
            psd_tol: tol,
            gap_tol: tol,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.eq_tol > 0.0 && self.psd_tol > 0.0 && self.gap_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Solver implementations selectable at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    InteriorPoint,
}

impl Backend {
    pub const ENV_VAR: &'static str = "QBOUNDS_SOLVER";

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "" | "ipm" | "interior-point" => Ok(Self::InteriorPoint),
            other => Err(Error::InvalidArgument(format!("unknown solver backend '{other}' (available: ipm)"))),
        }
    }

    pub fn from_env() -> Result<Self> {
        match std::env::var(Self::ENV_VAR) {
            Ok(v) => Self::parse(&v),
            Err(_) => Ok(Self::InteriorPoint),
        }
    }

    pub fn name(self) -> &'static str {
        "ipm"
    }
}

/// Solve from the default starting point.
pub fn solve(problem: &ConicProblem, options: &SolverOptions) -> Result<ConicSolution> {
    solve_from(problem, options, None)
}

/// Solve, optionally starting the primal iterate at `start`.
pub fn solve_from(
    problem: &ConicProblem,
    options: &SolverOptions,
    start: Option<&DVector<f64>>,
) -> Result<ConicSolution> {
    problem.validate()?;
    options.check()?;
    if let Some(s) = start {
        if s.len() != problem.k() {
            return Err(Error::DimensionMismatch(format!(
                "start has {} entries for {} variables",
                s.len(),
                problem.k()
            )));
        }
    }
    match Backend::from_env()? {
        Backend::InteriorPoint => Ipm::new(problem, options).run(start),
    }
}

/// Low-rank factors `F_i = P_i P̃_iᵀ` with `P_i = [E_i, U_i]`, `P̃_i = [U_i, E_i]` and
/// `E_i` unit columns. Columns are deduplicated into one dictionary.
struct LowRank {
    dict: RMatrix,
    p: Vec<Vec<usize>>,
    pt: Vec<Vec<usize>>,
}

impl LowRank {
    fn build(f: &[SparseSym], m: usize) -> Self {
        let mut columns: Vec<DVector<f64>> = Vec::new();
        let mut units: HashMap<usize, usize> = HashMap::new();
        let mut dense: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut p = Vec::with_capacity(f.len());
        let mut pt = Vec::with_capacity(f.len());
        for fi in f {
            let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for &(i, j, v) in &fi.entries {
                *merged.entry((i, j)).or_insert(0.0) += v;
            }
            let edges: Vec<(usize, usize, f64)> =
                merged.into_iter().filter(|(_, v)| *v != 0.0).map(|((i, j), v)| (i, j, v)).collect();
            let mut incident: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (e, &(i, j, _)) in edges.iter().enumerate() {
                incident.entry(i).or_default().push(e);
                if i != j {
                    incident.entry(j).or_default().push(e);
                }
            }
            let mut covered = vec![false; edges.len()];
            let mut left = edges.len();
            let mut es = Vec::new();
            let mut us = Vec::new();
            while left > 0 {
                let (&vertex, _) = incident
                    .iter()
                    .max_by(|a, b| {
                        let da = a.1.iter().filter(|&&e| !covered[e]).count();
                        let db = b.1.iter().filter(|&&e| !covered[e]).count();
                        da.cmp(&db).then(b.0.cmp(a.0))
                    })
                    .expect("uncovered edges remain");
                let mut u = DVector::zeros(m);
                for &e in &incident[&vertex] {
                    if covered[e] {
                        continue;
                    }
                    covered[e] = true;
                    left -= 1;
                    let (i, j, v) = edges[e];
                    if i == j {
                        u[i] += 0.5 * v;
                    } else {
                        u[if i == vertex { j } else { i }] += v;
                    }
                }
                incident.remove(&vertex);
                let unit = *units.entry(vertex).or_insert_with(|| {
                    let mut col = DVector::zeros(m);
                    col[vertex] = 1.0;
                    columns.push(col);
                    columns.len() - 1
                });
                let key: Vec<u64> = u.iter().map(|x: &f64| x.to_bits()).collect();
                let dense_idx = *dense.entry(key).or_insert_with(|| {
                    columns.push(u);
                    columns.len() - 1
                });
                es.push(unit);
                us.push(dense_idx);
            }
            let mut pi = es.clone();
            pi.extend(&us);
            let mut pti = us;
            pti.extend(es);
            p.push(pi);
            pt.push(pti);
        }
        let dict = if columns.is_empty() {
            RMatrix::zeros(m, 0)
        } else {
            RMatrix::from_columns(&columns)
        };
        Self { dict, p, pt }
    }

    /// `H_ij = tr(F_i A F_j B)` for symmetric `A`, `B`.
    fn schur(&self, a: &RMatrix, b: &RMatrix) -> RMatrix {
        let qa = self.dict.transpose() * (a * &self.dict);
        let qb = self.dict.transpose() * (b * &self.dict);
        let k = self.p.len();
        let rows: Vec<Vec<f64>> = (0..k)
            .into_par_iter()
            .map(|i| {
                (i..k)
                    .map(|j| {
                        let mut s = 0.0;
                        for (&pti, &pi) in self.pt[i].iter().zip(&self.p[i]) {
                            for (&pj, &ptj) in self.p[j].iter().zip(&self.pt[j]) {
                                s += qa[(pti, pj)] * qb[(ptj, pi)];
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        let mut h = RMatrix::zeros(k, k);
        for (i, row) in rows.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                h[(i, i + off)] = v;
                h[(i + off, i)] = v;
            }
        }
        h
    }
}

/// Factorization of the regularized system `[[H + δI, Aᵀ], [A, −δI]]`, used to solve
/// `[[H, Aᵀ], [A, 0]]` by iterative refinement.
/// The pseudo-inverse `A⁺` and an orthonormal basis of `ker A`.
struct EqualitySplit {
    pinv: RMatrix,
    pinv_t: RMatrix,
    null: RMatrix,
}

impl EqualitySplit {
    fn new(a: &RMatrix) -> Self {
        let (p, k) = a.shape();
        if p == 0 {
            return Self {
                pinv: RMatrix::zeros(k, 0),
                pinv_t: RMatrix::zeros(0, k),
                null: RMatrix::identity(k, k),
            };
        }
        // Full SVD of Aᵀ (k × p) gives both the row space and the kernel.
        let at = a.transpose();
        let mut aug = RMatrix::zeros(k, k);
        aug.view_mut((0, 0), (k, p)).copy_from(&at);
        let svd = aug.svd(true, false);
        let u = svd.u.expect("requested u");
        let sv = &svd.singular_values;
        let smax = sv.max();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
        let rank = order.iter().filter(|&&i| sv[i] > 1e-12 * smax.max(1e-300)).count();
        let row = RMatrix::from_fn(k, rank, |r, c| u[(r, order[c])]);
        let null = RMatrix::from_fn(k, k - rank, |r, c| u[(r, order[rank + c])]);
        // A⁺ = R (A R)⁻¹ on the row space R.
        let ar = a * &row;
        let pinv = &row * ar.pseudo_inverse(1e-12 * smax).expect("nonnegative eps");
        Self {
            pinv_t: pinv.transpose(),
            pinv,
            null,
        }
    }
}

/// Solver for `H x + Aᵀ w = r1`, `A x = r2` by elimination onto `ker A`.
struct Kkt<'a> {
    h: &'a RMatrix,
    a: &'a RMatrix,
    split: &'a EqualitySplit,
    reduced: Cholesky<f64, Dyn>,
}

impl<'a> Kkt<'a> {
    fn factor(h: &'a RMatrix, a: &'a RMatrix, split: &'a EqualitySplit) -> Option<Self> {
        let nh = split.null.transpose() * h * &split.null;
        let q = nh.nrows();
        let scale = (0..q).map(|i| nh[(i, i)]).fold(0.0_f64, f64::max).max(1e-300);
        let mut delta = 0.0;
        for _ in 0..8 {
            let mut hr = sym(&nh);
            for i in 0..q {
                hr[(i, i)] += delta;
            }
            if let Some(reduced) = Cholesky::new(hr) {
                return Some(Self {
                    h,
                    a,
                    split,
                    reduced,
                });
            }
            delta = if delta == 0.0 { 1e-14 * scale } else { delta * 100.0 };
        }
        None
    }

    fn solve_once(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let xp = &self.split.pinv * r2;
        let rhs = self.split.null.transpose() * (r1 - self.h * &xp);
        let u = self.reduced.solve(&rhs);
        let x = xp + &self.split.null * u;
        let w = &self.split.pinv_t * (r1 - self.h * &x);
        (x, w)
    }

    fn solve(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (mut x, mut w) = self.solve_once(r1, r2);
        let norm = r1.amax().max(r2.amax()).max(1e-300);
        for _ in 0..3 {
            let e1 = r1 - self.h * &x - self.a.transpose() * &w;
            let e2 = r2 - self.a * &x;
            if e1.amax().max(e2.amax()) <= 1e-15 * norm {
                break;
            }
            let (dx, dw) = self.solve_once(&e1, &e2);
            x += dx;
            w += dw;
        }
        (x, w)
    }
}

fn sym(m: &RMatrix) -> RMatrix {
    (m + m.transpose()) * 0.5
}

/// Largest `α ≤ 1/τ`-scaled step keeping `X + α dX ⪰ 0`, given the Cholesky factor of `X`.
fn max_step(chol: &Cholesky<f64, Dyn>, dx: &RMatrix) -> f64 {
    let l = chol.l();
    let Some(t) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(m) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let min = sym(&m).symmetric_eigenvalues().min();
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

const STEP_FRACTION: f64 = 0.98;
const CERT_TOL: f64 = 1e-8;
/// Tolerance multiple accepted when the iteration cannot make further progress.
pub const INACCURATE_FACTOR: f64 = 100.0;

struct Ipm<'a> {
    problem: &'a ConicProblem,
    options: &'a SolverOptions,
    active: Vec<usize>,
    reduced: ConicProblem,
    low_rank: LowRank,
    split: EqualitySplit,
}

impl<'a> Ipm<'a> {
    fn new(problem: &'a ConicProblem, options: &'a SolverOptions) -> Self {
        // Variables with no footprint anywhere are pinned to their start value.
        let fmax = problem.f.iter().map(SparseSym::max_abs).fold(0.0, f64::max);
        let cmax = problem.c.amax();
        let amax = if problem.a.is_empty() { 0.0 } else { problem.a.amax() };
        let active: Vec<usize> = (0..problem.k())
            .filter(|&i| {
                problem.f[i].max_abs() > 1e-13 * fmax
                    || problem.c[i].abs() > 1e-13 * cmax
                    || (problem.p() > 0 && problem.a.column(i).amax() > 1e-13 * amax)
            })
            .collect();
        let reduced = ConicProblem {
            c: DVector::from_iterator(active.len(), active.iter().map(|&i| problem.c[i])),
            f: active.iter().map(|&i| problem.f[i].clone()).collect(),
            g: problem.g.clone(),
            a: RMatrix::from_fn(problem.p(), active.len(), |r, j| problem.a[(r, active[j])]),
            b: problem.b.clone(),
        };
        let low_rank = LowRank::build(&reduced.f, problem.m());
        let split = EqualitySplit::new(&reduced.a);
        Self {
            problem,
            options,
            active,
            reduced,
            low_rank,
            split,
        }
    }

    fn expand(&self, v: &DVector<f64>, base: &DVector<f64>) -> DVector<f64> {
        let mut out = base.clone();
        for (j, &i) in self.active.iter().enumerate() {
            out[i] = v[j];
        }
        out
    }

    fn run(&self, start: Option<&DVector<f64>>) -> Result<ConicSolution> {
        let (m, p) = (self.reduced.m(), self.reduced.p());
        let opts = self.options;
        let base = start.cloned().unwrap_or_else(|| DVector::zeros(self.problem.k()));
        // Pinned variables contribute constants to G and b.
        let mut g = self.problem.g.clone();
        let mut b = self.reduced.b.clone();
        for i in 0..self.problem.k() {
            if !self.active.contains(&i) && base[i] != 0.0 {
                self.problem.f[i].add_to(&mut g, base[i]);
                b -= self.problem.a.column(i) * base[i];
            }
        }
        let pr = ConicProblem {
            g,
            b,
            ..self.reduced.clone()
        };
        let k = pr.k();

        // Homogeneous self-dual embedding:
        //   Σ v_i F_i + τG + S = 0,  Av − τb = 0,  τc + F*(Z) − Aᵀy = 0,
        //   cᵀv − tr(GZ) − bᵀy + κ = 0,  S, Z ⪰ 0,  τ, κ ≥ 0.
        let mut v = DVector::from_iterator(k, self.active.iter().map(|&i| base[i]));
        let mut s = match start.and_then(|_| Cholesky::new(-pr.lmi(&v))) {
            Some(_) => -pr.lmi(&v),
            None => {
                v.fill(0.0);
                RMatrix::identity(m, m)
            }
        };
        let mut z = RMatrix::identity(m, m);
        let mut y = DVector::zeros(p);
        let mut tau = 1.0_f64;
        let mut kappa = 1.0_f64;

        let cnorm = pr.c.amax();
        let mut stalls = 0usize;

        for iter in 0..=opts.max_iter {
            let fv = pr.lmi(&v) - &pr.g + &pr.g * tau;
            let r1 = &fv + &s;
            let r2 = &pr.a * &v - &pr.b * tau;
            let fz = pr.adjoint(&z);
            let r3 = &pr.c * tau + &fz - pr.a.transpose() * &y;
            let pobj_h = pr.c.dot(&v);
            let dobj_h = pr.g.dot(&z) + pr.b.dot(&y);
            let r4 = pobj_h - dobj_h + kappa;

            // Normalized iterate.
            let vn = &v / tau;
            let yn = &y / tau;
            let zn = &z / tau;
            let pobj = pobj_h / tau;
            let dobj = dobj_h / tau;
            let eq_res = if p == 0 { 0.0 } else { (&pr.a * &vn - &pr.b).amax() };
            let lmi_res = pr.lmi(&vn).symmetric_eigenvalues().max().max(0.0);
            let dual_res = (&r3 / tau).amax() / (1.0 + cnorm);
            let rel_gap = (pobj - dobj).abs() / pobj.abs().max(1.0);
            let sol = |status, v: &DVector<f64>, y: &DVector<f64>, z: &RMatrix| {
                let full = self.expand(v, &base);
                ConicSolution {
                    objective: self.problem.c.dot(&full),
                    v: full,
                    y: y.clone(),
                    z: z.clone(),
                    dual_objective: pr.g.dot(z) + pr.b.dot(y) + self.pinned_objective(&base),
                    status,
                    primal_residual: eq_res.max(lmi_res),
                    dual_residual: dual_res,
                    rel_gap,
                    iterations: iter,
                }
            };

            if eq_res <= opts.eq_tol && lmi_res <= opts.psd_tol && dual_res <= opts.gap_tol && rel_gap <= opts.gap_tol {
                return Ok(sol(SolveStatus::Optimal, &vn, &yn, &zn));
            }
            let f = INACCURATE_FACTOR;
            let failed = if eq_res <= f * opts.eq_tol
                && lmi_res <= f * opts.psd_tol
                && dual_res <= f * opts.gap_tol
                && rel_gap <= f * opts.gap_tol
            {
                SolveStatus::OptimalInaccurate
            } else {
                SolveStatus::NumericalFailure
            };
            // Farkas certificate: F*(Z) − Aᵀy ≈ 0 with tr(GZ) + bᵀy > 0.
            if dobj_h > 0.0 {
                let resid = (&fz - pr.a.transpose() * &y).amax();
                if resid <= CERT_TOL * dobj_h && tau <= CERT_TOL.sqrt() * kappa {
                    let sc = 1.0 / dobj_h;
                    return Ok(sol(SolveStatus::Infeasible, &vn, &(&y * sc), &(&z * sc)));
                }
            }
            // Improving ray: Σ v_i F_i ⪯ 0, Av ≈ 0, cᵀv < 0.
            if pobj_h < 0.0 && tau <= CERT_TOL.sqrt() * kappa {
                let ray = pr.lmi(&v) - &pr.g;
                let ray_lmi = ray.symmetric_eigenvalues().max().max(0.0);
                let ray_eq = if p == 0 { 0.0 } else { (&pr.a * &v).amax() };
                if ray_lmi.max(ray_eq) <= CERT_TOL * (-pobj_h) {
                    let sc = 1.0 / (-pobj_h);
                    return Ok(sol(SolveStatus::Unbounded, &(&v * sc), &yn, &zn));
                }
            }
            if iter == opts.max_iter || stalls >= 20 {
                return Ok(sol(failed, &vn, &yn, &zn));
            }

            let (Some(chol_s), Some(chol_z)) = (Cholesky::new(s.clone()), Cholesky::new(z.clone())) else {
                return Ok(sol(failed, &vn, &yn, &zn));
            };
            let sinv = sym(&chol_s.inverse());
            let h = self.low_rank.schur(&sinv, &z);
            let Some(kkt) = Kkt::factor(&h, &pr.a, &self.split) else {
                return Ok(sol(failed, &vn, &yn, &zn));
            };
            let sinv_g_z = &sinv * &pr.g * &z;
            let h_g = pr.adjoint(&sinv_g_z);
            let g_gg = pr.g.dot(&sinv_g_z.transpose());
            // Second solve shared by predictor and corrector: K u2 = (−(c + h_G), b).
            let (u2v, u2w) = kkt.solve(&(-(&pr.c + &h_g)), &pr.b);
            let c_minus = &pr.c - &h_g;
            let denom = c_minus.dot(&u2v) + pr.b.dot(&u2w) - g_gg - kappa / tau;
            let mu = (s.dot(&z) + tau * kappa) / (m as f64 + 1.0);

            // HKM direction for centering targets (eta, rc, rtau):
            // S dZ + dS Z = rc, τ dκ + κ dτ = rtau, residuals scaled by −eta.
            let direction = |eta: f64, rc: &RMatrix, rtau: f64| {
                let t = &sinv * rc + &sinv * &r1 * &z * eta;
                let ra = -&r3 * eta - pr.adjoint(&t);
                let rb = -&r2 * eta;
                let rcs = -eta * r4 + pr.g.dot(&t.transpose()) - rtau / tau;
                let (u1v, u1w) = kkt.solve(&ra, &rb);
                let dtau = (rcs - c_minus.dot(&u1v) - pr.b.dot(&u1w)) / denom;
                let dv = &u1v + &u2v * dtau;
                let dy = -(&u1w + &u2w * dtau);
                let mut fdv = RMatrix::zeros(m, m);
                for (fi, &x) in pr.f.iter().zip(dv.iter()) {
                    if x != 0.0 {
                        fi.add_to(&mut fdv, x);
                    }
                }
                let ds = -&r1 * eta - &fdv - &pr.g * dtau;
                let dz = sym(&(&t + &sinv * (&fdv + &pr.g * dtau) * &z));
                let dkappa = (rtau - kappa * dtau) / tau;
                (dv, dy, ds, dz, dtau, dkappa)
            };
            let step = |ds: &RMatrix, dz: &RMatrix, dtau: f64, dkappa: f64| {
                let mut a = max_step(&chol_s, ds).min(max_step(&chol_z, dz));
                if dtau < 0.0 {
                    a = a.min(-tau / dtau);
                }
                if dkappa < 0.0 {
                    a = a.min(-kappa / dkappa);
                }
                a
            };

            // predictor
            let sz = &s * &z;
            let (_, _, ds_a, dz_a, dtau_a, dkappa_a) = direction(1.0, &(-&sz), -tau * kappa);
            let a_aff = (STEP_FRACTION * step(&ds_a, &dz_a, dtau_a, dkappa_a)).min(1.0);
            let mu_aff = ((&s + &ds_a * a_aff).dot(&(&z + &dz_a * a_aff))
                + (tau + a_aff * dtau_a) * (kappa + a_aff * dkappa_a))
                / (m as f64 + 1.0);
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector
            let rc = RMatrix::identity(m, m) * (sigma * mu) - &sz - &ds_a * &dz_a;
            let rtau = sigma * mu - tau * kappa - dtau_a * dkappa_a;
            let (dv, dy, ds, dz, dtau, dkappa) = direction(1.0 - sigma, &rc, rtau);
            let alpha = (STEP_FRACTION * step(&ds, &dz, dtau, dkappa)).min(1.0);
            stalls = if alpha < 1e-10 { stalls + 1 } else { 0 };
            v += &dv * alpha;
            y += &dy * alpha;
            s = sym(&(&s + &ds * alpha));
            z = sym(&(&z + &dz * alpha));
            tau += alpha * dtau;
            kappa += alpha * dkappa;
            // Keep the embedding well scaled.
            let scale = tau.max(kappa).max(1e-300);
            if !(1e-8..=1e8).contains(&scale) {
                v /= scale;
                y /= scale;
                s /= scale;
                z /= scale;
                tau /= scale;
                kappa /= scale;
            }
        }
        unreachable!("loop returns at max_iter")
    }

    fn pinned_objective(&self, base: &DVector<f64>) -> f64 {
        (0..self.problem.k())
            .filter(|i| !self.active.contains(i))
            .map(|i| self.problem.c[i] * base[i])
            .sum()
    }
}

/// One independently recomputed certificate quantity.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateCheck {
    pub name: &'static str,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub checks: Vec<CertificateCheck>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect()
    }
}

/// Recompute every optimality residual from the problem data and the returned iterate.
pub fn validate_certificates(
    problem: &ConicProblem,
    solution: &ConicSolution,
    options: &SolverOptions,
) -> CertificateReport {
    let v = &solution.v;
    let eq = if problem.p() == 0 {
        0.0
    } else {
        (&problem.a * v - &problem.b).amax()
    };
    let lmi = problem.lmi(v).symmetric_eigenvalues().max();
    let zmin = if solution.z.is_empty() {
        0.0
    } else {
        solution.z.symmetric_eigenvalues().min()
    };
    let rd = &problem.c + problem.adjoint(&solution.z) - problem.a.transpose() * &solution.y;
    let dual = rd.amax() / (1.0 + problem.c.amax());
    let pobj = problem.c.dot(v);
    let dobj = problem.g.dot(&solution.z) + problem.b.dot(&solution.y);
    let gap = (pobj - dobj).abs() / pobj.abs().max(1.0);
    let relax = if solution.status == SolveStatus::OptimalInaccurate { INACCURATE_FACTOR } else { 1.0 };
    let check = |name, value: f64, tol: f64| CertificateCheck {
        name,
        value,
        tol: tol * relax,
        pass: value <= tol * relax,
    };
    CertificateReport {
        checks: vec![
            check("equality_residual", eq, options.eq_tol),
            check("lmi_max_eigenvalue", lmi, options.psd_tol),
            check("dual_psd_violation", (-zmin).max(0.0), options.psd_tol),
            check("dual_residual", dual, options.gap_tol),
            check("relative_gap", gap, options.gap_tol),
        ],
    }
}
