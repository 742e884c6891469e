pub mod fit_spectrum;
pub mod mc;
pub mod photon_number;
pub mod slopes;
pub mod synth;
pub mod temp_model;

use crate::error::CliResult;
use tlsres::units::TWO_PI;

/// Splits a computation's outcome: bad inputs end the run, numerical
/// failures (no dip, singular Jacobian, quadrature trouble) are kept for the
/// payload.
pub(crate) fn in_band<T>(r: tlsres::Result<T>) -> CliResult<tlsres::Result<T>> {
    use tlsres::Error::*;
    match r {
        Err(
            e @ (InvalidParameter { .. }
            | Parse { .. }
            | LengthMismatch(_)
            | InsufficientPoints { .. }
            | TemperatureOutOfRange { .. }
            | Domain { .. }),
        ) => Err(e.into()),
        other => Ok(other),
    }
}

/// Hz to rad/s for user-facing `*_hz` options.
pub(crate) fn rad(f_hz: f64) -> f64 {
    TWO_PI * f_hz
}

/// rad/s to Hz.
pub(crate) fn hz(omega: f64) -> f64 {
    omega / TWO_PI
}
