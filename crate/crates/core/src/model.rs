//! Quantum statistical models: a state, its parameter derivatives and a weight matrix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, RMatrix, HERM_TOL};

const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// The `(rho, d rho / d theta_i, W)` triple every bound consumes.
#[derive(Debug, Clone)]
pub struct QuantumModel {
    pub theta: Vec<f64>,
    pub rho: CMatrix,
    pub drho: Vec<CMatrix>,
    pub weight: RMatrix,
}

impl QuantumModel {
    /// Build and validate a model; `weight = None` means identity.
    pub fn new(
        theta: Vec<f64>,
        rho: CMatrix,
        drho: Vec<CMatrix>,
        weight: Option<RMatrix>,
    ) -> Result<Self> {
        let n = drho.len();
        let weight = weight.unwrap_or_else(|| RMatrix::identity(n, n));
        let model = Self {
            theta,
            rho,
            drho,
            weight,
        };
        let violations = model.violations();
        if violations.is_empty() {
            Ok(model)
        } else {
            Err(Error::InvariantViolation(violations))
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.drho.len()
    }

    pub fn with_weight(mut self, weight: RMatrix) -> Result<Self> {
        self.weight = weight;
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvariantViolation(v))
        }
    }

    /// Every violated invariant, each message naming the check and its residual.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let d = self.rho.nrows();
        let n = self.drho.len();
        if self.rho.ncols() != d || d == 0 {
            out.push(format!("rho shape: {}x{}", self.rho.nrows(), self.rho.ncols()));
            return out;
        }
        if self.theta.len() != n {
            out.push(format!("theta length: {} values for {} derivatives", self.theta.len(), n));
        }
        let herm = linalg::hermiticity_residual(&self.rho);
        if herm > HERM_TOL {
            out.push(format!("rho hermiticity: residual {herm:.3e}"));
        }
        let tr = linalg::trace(&self.rho);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            out.push(format!("trace: |Tr rho - 1| = {:.3e}", (tr - c(1.0, 0.0)).norm()));
        }
        if herm <= HERM_TOL {
            let min_eig = linalg::min_eigenvalue(&self.rho);
            if min_eig < -PSD_TOL {
                out.push(format!("rho positivity: min eigenvalue {min_eig:.3e}"));
            }
        }
        for (i, dr) in self.drho.iter().enumerate() {
            if dr.nrows() != d || dr.ncols() != d {
                out.push(format!("drho[{i}] shape: {}x{}", dr.nrows(), dr.ncols()));
                continue;
            }
            let h = linalg::hermiticity_residual(dr);
            if h > HERM_TOL {
                out.push(format!("drho hermiticity: drho[{i}] residual {h:.3e}"));
            }
            let t = linalg::trace(dr).norm();
            if t > TRACE_TOL {
                out.push(format!("drho trace: |Tr drho[{i}]| = {t:.3e}"));
            }
        }
        if self.weight.nrows() != n || self.weight.ncols() != n {
            out.push(format!(
                "weight shape: {}x{} for {} parameters",
                self.weight.nrows(),
                self.weight.ncols(),
                n
            ));
        } else if n > 0 {
            let asym = linalg::max_abs_real(&(&self.weight - self.weight.transpose()));
            if asym > HERM_TOL {
                out.push(format!("weight symmetry: residual {asym:.3e}"));
            }
            let min_eig = linalg::min_eigenvalue_real(&self.weight);
            if !(min_eig > 0.0) {
                out.push(format!("weight positivity: min eigenvalue {min_eig:.3e}"));
            }
        }
        out
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            dim: self.dim(),
            n_params: self.n_params(),
            theta: self.theta.clone(),
            rho: matrix_to_json(&self.rho),
            drho: self.drho.iter().map(matrix_to_json).collect(),
            weight: Some(
                (0..self.weight.nrows())
                    .map(|i| self.weight.row(i).iter().copied().collect())
                    .collect(),
            ),
        }
    }

    /// Serialize with 17 significant digits.
    pub fn to_json(&self) -> String {
        crate::json::to_string(&self.to_file()).expect("model serialization")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// On-disk model layout. Complex matrices are row-major `[[[re, im], ...], ...]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dim: usize,
    pub n_params: usize,
    pub theta: Vec<f64>,
    pub rho: Vec<Vec<[f64; 2]>>,
    pub drho: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Vec<Vec<f64>>>,
}

fn matrix_to_json(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn matrix_from_json(rows: &[Vec<[f64; 2]>], d: usize, what: &str) -> Result<CMatrix> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Parse(format!("{what} must be {d}x{d}")));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

impl ModelFile {
    pub fn into_model(self) -> Result<QuantumModel> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::Parse("dim must be positive".into()));
        }
        if self.drho.len() != self.n_params {
            return Err(Error::Parse(format!(
                "n_params = {} but {} derivative matrices given",
                self.n_params,
                self.drho.len()
            )));
        }
        if self.theta.len() != self.n_params {
            return Err(Error::Parse(format!(
                "n_params = {} but theta has {} entries",
                self.n_params,
                self.theta.len()
            )));
        }
        let rho = matrix_from_json(&self.rho, d, "rho")?;
        let drho = self
            .drho
            .iter()
            .enumerate()
            .map(|(i, m)| matrix_from_json(m, d, &format!("drho[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let n = self.n_params;
        let weight = match self.weight {
            None => None,
            Some(w) => {
                if w.len() != n || w.iter().any(|r| r.len() != n) {
                    return Err(Error::Parse(format!("weight must be {n}x{n}")));
                }
                Some(RMatrix::from_fn(n, n, |i, j| w[i][j]))
            }
        };
        QuantumModel::new(self.theta, rho, drho, weight)
    }
}

pub fn parse_model(text: &str) -> Result<QuantumModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_model()
}

/// Read and validate a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<QuantumModel> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
    parse_model(&text)
}

/// Parse POVM elements stored as a list of complex matrices in the model-file layout.
pub fn parse_povm(text: &str, d: usize) -> Result<crate::info::Povm> {
    let raw: Vec<Vec<Vec<[f64; 2]>>> = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if raw.is_empty() {
        return Err(Error::Parse("POVM has no elements".into()));
    }
    let elements = raw
        .iter()
        .enumerate()
        .map(|(k, m)| matrix_from_json(m, d, &format!("povm[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    crate::info::Povm::new(elements)
}

pub fn load_povm(path: impl AsRef<Path>, d: usize) -> Result<crate::info::Povm> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
    parse_povm(&text, d)
}

/// Read a weight matrix stored as `[[w11, w12, ...], ...]`.
pub fn load_weight(path: impl AsRef<Path>) -> Result<RMatrix> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse("weight must be square".into()));
    }
    Ok(RMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Central differences `(rho(theta + h e_i) - rho(theta - h e_i)) / 2h`, Hermitized.
pub fn finite_difference_derivatives<F>(state_fn: F, theta: &[f64], h: f64) -> Result<Vec<CMatrix>>
where
    F: Fn(&[f64]) -> Result<CMatrix>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let diff = (state_fn(&plus)? - state_fn(&minus)?) / c(2.0 * h, 0.0);
        out.push(linalg::hermitian_part(&diff));
    }
    Ok(out)
}

/// Random model at a `rank`-`rank` state in dimension `d` with `n` parameters.
///
/// Each derivative is `i[H, rho]` plus a traceless population change on the support of `rho`.
pub fn random_model<R: rand::Rng + ?Sized>(rng: &mut R, d: usize, rank: usize, n: usize) -> Result<QuantumModel> {
    use rand_distr::{Distribution, StandardNormal};
    if rank == 0 || rank > d || n == 0 {
        return Err(Error::InvalidArgument(format!("random model needs 1 <= rank <= d and n >= 1 (d={d}, rank={rank}, n={n})")));
    }
    let rho = linalg::random_density(rng, d, rank);
    let eig = linalg::eigh(&rho)?;
    let support: Vec<usize> = (0..d).filter(|&k| eig.values[k] > 1e-12).collect();
    let drho = (0..n)
        .map(|_| {
            let h = linalg::random_hermitian(rng, d);
            let comm = (&h * &rho - &rho * &h) * c(0.0, 1.0);
            let mut pops: Vec<f64> = support.iter().map(|_| StandardNormal.sample(&mut *rng)).collect();
            let weights: Vec<f64> = support.iter().map(|&k| eig.values[k]).collect();
            let mean = pops.iter().zip(&weights).map(|(g, w)| g * w).sum::<f64>() / weights.iter().sum::<f64>();
            pops.iter_mut().for_each(|p| *p -= mean);
            let mut diag = CMatrix::zeros(d, d);
            for (&k, p) in support.iter().zip(&pops) {
                diag[(k, k)] = c(0.2 * p * eig.values[k], 0.0);
            }
            let pop = &eig.vectors * diag * eig.vectors.adjoint();
            linalg::hermitian_part(&(comm + pop))
        })
        .collect();
    QuantumModel::new(vec![0.0; n], rho, drho, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_model(theta: f64) -> CMatrix {
        let mut rho = CMatrix::zeros(2, 2);
        rho[(0, 0)] = c((1.0 + theta) / 2.0, 0.0);
        rho[(1, 1)] = c((1.0 - theta) / 2.0, 0.0);
        rho
    }

    #[test]
    fn povm_files_are_checked() {
        let comp = "[[[[1,0],[0,0]],[[0,0],[0,0]]], [[[0,0],[0,0]],[[0,0],[1,0]]]]";
        assert_eq!(parse_povm(comp, 2).unwrap().len(), 2);
        let short = "[[[[1,0],[0,0]],[[0,0],[0,0]]]]";
        assert!(matches!(parse_povm(short, 2), Err(Error::InvariantViolation(_))));
        assert!(matches!(parse_povm(comp, 3), Err(Error::Parse(_))));
        assert!(matches!(parse_povm("[]", 2), Err(Error::Parse(_))));
    }

    #[test]
    fn finite_differences_of_linear_model_are_exact() {
        let d = finite_difference_derivatives(|t| Ok(diag_model(t[0])), &[0.0], 1e-5).unwrap();
        assert!((d[0][(0, 0)].re - 0.5).abs() < 1e-11);
        assert!((d[0][(1, 1)].re + 0.5).abs() < 1e-11);
    }

    #[test]
    fn finite_differences_of_constant_are_zero() {
        let d = finite_difference_derivatives(|_| Ok(diag_model(0.2)), &[0.1, 0.3], 1e-5).unwrap();
        assert!(d.iter().all(|m| linalg::max_abs(m) == 0.0));
    }

    #[test]
    fn json_round_trip() {
        let rho = diag_model(0.1);
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = c(0.5, 0.0);
        d[(1, 1)] = c(-0.5, 0.0);
        d[(0, 1)] = c(0.1, 0.2);
        d[(1, 0)] = c(0.1, -0.2);
        let m = QuantumModel::new(vec![0.1], rho, vec![d], None).unwrap();
        let back = parse_model(&m.to_json()).unwrap();
        assert_eq!(back.rho, m.rho);
        assert_eq!(back.drho[0], m.drho[0]);
        assert_eq!(back.weight, m.weight);
    }

    #[test]
    fn trace_violation_is_named() {
        let rho = diag_model(0.0) * c(0.9, 0.0);
        let err = QuantumModel::new(vec![0.0], rho, vec![CMatrix::zeros(2, 2)], None).unwrap_err();
        match err {
            Error::InvariantViolation(v) => assert!(v.iter().any(|m| m.starts_with("trace"))),
            other => panic!("unexpected {other:?}"),
        }
    }
}
