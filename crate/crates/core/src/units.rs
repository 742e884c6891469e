//! Physical constants (CODATA 2018) and the unit conversions used at I/O
//! boundaries.

use std::f64::consts::PI;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054571817e-34;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.62607015e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380649e-23;
/// Vacuum permeability, H/m.
pub const MU_0: f64 = 1.25663706212e-6;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.8541878128e-12;
/// One debye in C m.
pub const DEBYE: f64 = 3.33564e-30;

pub const TWO_PI: f64 = 2.0 * PI;

/// Hz -> rad/s.
#[inline]
pub fn angular(f_hz: f64) -> f64 {
    TWO_PI * f_hz
}

/// rad/s -> Hz.
#[inline]
pub fn hertz(omega: f64) -> f64 {
    omega / TWO_PI
}

#[inline]
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

#[inline]
pub fn watts_to_dbm(p_w: f64) -> f64 {
    10.0 * p_w.log10() + 30.0
}
