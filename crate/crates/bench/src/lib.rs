//! Benchmark fixtures shared by the criterion targets.

use qbounds_core::interferometer::{holland_burnett, LossyState};
use qbounds_core::magnetometry::{encode_and_dephase, MagnetometrySpec};
use qbounds_core::model::random_model;
use qbounds_core::QuantumModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Holland-Burnett probe with `n` photons after loss `eta`, at zero phase.
pub fn holland_burnett_model(n: usize, eta: f64) -> QuantumModel {
    let probe = holland_burnett(n).expect("even photon number");
    LossyState::new(&probe, 0.0, eta).and_then(|s| s.model()).expect("interior eta")
}

/// GHZ-type magnetometry probe at field `(1, 1, 1)`.
pub fn magnetometry_model(qubits: usize, gamma: f64) -> QuantumModel {
    let spec = MagnetometrySpec::new(qubits, gamma, [1.0, 1.0, 1.0]).expect("valid spec");
    encode_and_dephase(&spec).expect("magnetometry model")
}

pub fn seeded_random_model(seed: u64, d: usize, rank: usize, n: usize) -> QuantumModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_model(&mut rng, d, rank, n).expect("random model")
}
