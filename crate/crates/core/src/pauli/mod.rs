//! Pauli-string algebra, computational-basis projectors, per-locality purity
//! and frame geometry (coherence, Welch bound, Haar fidelity baselines).

mod frame;
mod observable;
mod projector;
mod purity;
mod string;

pub use frame::{coherence_and_welch, haar_fidelity_density, haar_fidelity_stats, haar_state, HaarStats, HAAR_BINS};
pub use observable::Observable;
pub use projector::{pauli_decompose_projector, ProjectorObservable};
pub use purity::{binomial, locality_profile, theoretical_variance_proxy, LocalityProfile};
pub use string::{min_locality_commuting_set, uniform_locality_set, Pauli, PauliString};
