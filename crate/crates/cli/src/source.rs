//! Model construction from command-line flags.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use qbounds_core::info::Povm;
use qbounds_core::interferometer::{self as ifm, LossyState, ProbeSpec};
use qbounds_core::magnetometry::{self as mag, MagnetometrySpec};
use qbounds_core::model::{load_povm, load_weight};
use qbounds_core::{load_model, Error, QuantumModel, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    Interferometer,
    Magnetometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Input {
    Hb,
    Noon,
    Onephoton,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model file in the JSON model schema.
    #[arg(long, conflicts_with = "builtin")]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,
    /// Total photon number (interferometer).
    #[arg(long, default_value_t = 2)]
    pub photons: usize,
    #[arg(long, value_enum, default_value = "hb")]
    pub input: Input,
    /// Population |c1|^2 of the single-photon probe.
    #[arg(long, default_value_t = 0.5)]
    pub c1sq: f64,
    /// Arm transmissivity.
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phase: f64,
    #[arg(long, default_value_t = 2)]
    pub qubits: usize,
    /// Dephasing strength.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    /// Magnetic field components.
    #[arg(long, value_delimiter = ',', default_value = "1,1,1", allow_hyphen_values = true)]
    pub phi: Vec<f64>,
    /// Weight matrix file `[[w11, ...], ...]`; identity when absent.
    #[arg(long)]
    pub weight: Option<PathBuf>,
}

/// A model and a JSON description of where it came from.
pub struct Source {
    pub model: QuantumModel,
    pub descriptor: Value,
    pub state: Option<LossyState>,
}

impl ModelArgs {
    fn phi3(&self) -> Result<[f64; 3]> {
        <[f64; 3]>::try_from(self.phi.as_slice())
            .map_err(|_| Error::InvalidArgument("--phi takes three comma-separated values".into()))
    }

    fn probe(&self) -> Result<ProbeSpec> {
        match self.input {
            Input::Hb => ifm::holland_burnett(self.photons),
            Input::Noon => ProbeSpec::noon(self.photons),
            Input::Onephoton => ProbeSpec::one_photon(self.c1sq),
        }
    }

    fn input_name(&self) -> &'static str {
        match self.input {
            Input::Hb => "hb",
            Input::Noon => "noon",
            Input::Onephoton => "onephoton",
        }
    }

    pub fn build(&self, fallback: Option<Builtin>) -> Result<Source> {
        let mut source = match (&self.model, self.builtin.or(fallback)) {
            (Some(path), _) => Source {
                model: load_model(path)?,
                descriptor: json!({ "file": path.display().to_string() }),
                state: None,
            },
            (None, Some(Builtin::Interferometer)) => {
                let state = LossyState::new(&self.probe()?, self.phase, self.eta)?;
                let photons = if self.input == Input::Onephoton { 1 } else { self.photons };
                let mut descriptor = json!({
                    "builtin": "interferometer",
                    "input": self.input_name(),
                    "photons": photons,
                    "eta": self.eta,
                    "phase": self.phase,
                });
                if self.input == Input::Onephoton {
                    descriptor["c1sq"] = json!(self.c1sq);
                }
                Source {
                    model: state.model()?,
                    descriptor,
                    state: Some(state),
                }
            }
            (None, Some(Builtin::Magnetometry)) => {
                let phi = self.phi3()?;
                let spec = MagnetometrySpec::new(self.qubits, self.gamma, phi)?;
                Source {
                    model: mag::encode_and_dephase(&spec)?,
                    descriptor: json!({
                        "builtin": "magnetometry",
                        "qubits": self.qubits,
                        "gamma": self.gamma,
                        "phi": phi,
                    }),
                    state: None,
                }
            }
            (None, None) => {
                return Err(Error::InvalidArgument("give --model <file> or --builtin <name>".into()));
            }
        };
        if let Some(path) = &self.weight {
            source.model = source.model.with_weight(load_weight(path)?)?;
            source.descriptor["weight"] = json!(path.display().to_string());
        }
        Ok(source)
    }

    /// Copy with one named parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match name {
            "eta" => out.eta = value,
            "phase" => out.phase = value,
            "c1sq" => out.c1sq = value,
            "gamma" => out.gamma = value,
            "phi1" | "phi2" | "phi3" => {
                let k = name[3..].parse::<usize>().expect("matched digit") - 1;
                if out.phi.len() != 3 {
                    return Err(Error::InvalidArgument("--phi takes three comma-separated values".into()));
                }
                out.phi[k] = value;
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "cannot sweep '{other}' (choose eta, phase, c1sq, gamma, phi1, phi2 or phi3)"
                )))
            }
        }
        Ok(out)
    }
}

/// `file`, or `phase-sld` for the interferometer phase measurement.
pub fn resolve_povm(spec: &str, source: &Source) -> Result<Povm> {
    if spec == "phase-sld" {
        let state = source
            .state
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("--povm phase-sld needs --builtin interferometer".into()))?;
        return state.phase_sld_povm(state.blocks.len() - 1);
    }
    load_povm(spec, source.model.dim())
}

/// A parsed `<param>:<start>:<stop>:<points>` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("sweep spec '{text}' is not <param>:<start>:<stop>:<points>"));
        let parts: Vec<&str> = text.split(':').collect();
        let [param, start, stop, points] = parts.as_slice() else {
            return Err(bad());
        };
        let start: f64 = start.trim().parse().map_err(|_| bad())?;
        let stop: f64 = stop.trim().parse().map_err(|_| bad())?;
        let points: usize = points.trim().parse().map_err(|_| bad())?;
        if points == 0 {
            return Err(Error::InvalidArgument("sweep needs at least one point".into()));
        }
        if !(start.is_finite() && stop.is_finite()) {
            return Err(bad());
        }
        let values = (0..points)
            .map(|i| {
                if points == 1 {
                    start
                } else {
                    start + (stop - start) * i as f64 / (points - 1) as f64
                }
            })
            .collect();
        Ok(Self {
            param: param.trim().to_string(),
            values,
        })
    }
}
