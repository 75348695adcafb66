//! Monte Carlo estimates of risk, correlations, overlap identities, locking,
//! susceptibility and free energies.

pub mod correlation;
pub mod free_energy;
pub mod locking;
pub mod risk;
pub mod scan;
pub mod susceptibility;

pub use correlation::{nishimori_check, pair_correlation, CorrelationEstimate, NishimoriReport};
pub use free_energy::{free_energy_eta, free_energy_scalar, variational_check, FreeEnergyCurve, TiOptions, VariationalReport};
pub use locking::{locking_deficit, LockingReport};
pub use risk::{risk, FactorizedEstimate};
pub use scan::{threshold_scan, ScanRow};
pub use susceptibility::{susceptibility, SusceptibilityReport};
