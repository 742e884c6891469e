//! Shared fixtures for the benchmarks.

use tlsres::ensemble::{slope_fractional_frequency, slope_inverse_q};
use tlsres::fit::{frequency_response, inverse_q_response, synth_power_series, synth_trace, InverseQModel, NoiseModel};
use tlsres::{ComplexTrace, EnsembleParams, LineCalibration, McConfig, PowerSeries, ResonatorMode};

pub const F_R: f64 = 7.061e9;

pub fn mode() -> ResonatorMode {
    ResonatorMode::with_asymmetry(F_R, 34477.0, 480.0, 0.3).expect("valid mode")
}

/// Noisy, miscalibrated trace spanning ±5 linewidths.
pub fn trace(points: usize) -> ComplexTrace {
    let m = mode();
    let span = 10.0 * F_R / m.q_tot();
    let grid: Vec<f64> = (0..points)
        .map(|k| F_R - span / 2.0 + span * k as f64 / (points - 1) as f64)
        .collect();
    let line = LineCalibration::new(0.9, 30e-9, 1.1).expect("valid line");
    synth_trace(&m, &line, &grid, NoiseModel::Gaussian { std: 1e-3 }, 1).expect("trace")
}

/// Linear loss and mixed frequency response at the default ensemble slopes.
pub fn power_series(points: usize) -> PowerSeries {
    let p = EnsembleParams::default();
    let gamma = slope_inverse_q(&p).expect("slope");
    let delta1 = slope_fractional_frequency(&p).expect("slope");
    let inv_q0 = 1.0 / 34477.0 + 1.0 / 480.0;
    let grid: Vec<f64> = (0..points).map(|k| 300e-9 * k as f64 / (points - 1) as f64).collect();
    synth_power_series(
        &grid,
        |x| inverse_q_response(InverseQModel::Linear, &[gamma, inv_q0], x),
        |x| frequency_response(delta1, 2e-5, 5e7, x),
        NoiseModel::Gaussian { std: 1e-8 },
        NoiseModel::Gaussian { std: 1e-7 },
        1,
    )
    .expect("series")
}

/// Default Monte Carlo configuration cut down to `trials` trials.
pub fn mc_config(trials: usize) -> McConfig {
    McConfig {
        trials,
        ..McConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tlsres::fit::{fit_full_s21, fit_lorentzian_dip, fit_power_frequency};

    #[test]
    fn fixtures_fit_cleanly() {
        let full = fit_full_s21(&trace(2001), None).unwrap();
        assert!((full.value("q_int") / 34477.0 - 1.0).abs() < 0.05);
        assert!(fit_lorentzian_dip(&trace(401)).is_ok());
        let f = fit_power_frequency(&power_series(201)).unwrap();
        assert!((f.value("delta2") / 2e-5 - 1.0).abs() < 0.1);
        assert_eq!(mc_config(4).trials, 4);
    }
}
