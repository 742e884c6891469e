//! Quantitative models of an optically illuminated superconducting nanowire
//! resonator: hanger transmission and photon number, single two-level-system
//! (TLS) microphysics, ensemble-averaged optical-response slopes, a seeded
//! Monte Carlo TLS ensemble, superconducting kinetic-inductance shifts, and
//! the least-squares fits used to extract all of the above from data.
//!
//! Internally every rate is angular (rad/s). Hz, GHz and dBm only appear at
//! I/O boundaries, see [`units`].

pub mod ensemble;
pub mod error;
pub mod fit;
pub mod monte_carlo;
pub mod ode;
pub mod quadrature;
pub mod resonator;
pub mod special;
pub mod superconductor;
pub mod tls;
pub mod units;

pub use ensemble::{EnsembleParams, FrequencyShiftForm, SweepAxis, SweepRow};
pub use error::{Error, Result};
pub use fit::{ComplexTrace, FitResult, PowerSeries};
pub use monte_carlo::{McConfig, McResult};
pub use resonator::{DriveCondition, LineCalibration, ResonatorMode};
pub use superconductor::{CurrentDensityMap, FieldEnergyMaps, FilmGeometry, SuperconductorParams};
pub use tls::{SaturationDrive, ThermalEnvironment, TlsHostMaterial, TlsUnit};
