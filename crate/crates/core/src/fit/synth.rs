//! Seeded synthetic data for round-trip tests and the `synth` command.

use super::{ComplexTrace, PowerSeries, SaturationSeries};
use crate::error::{ensure, Result};
use crate::resonator::{LineCalibration, ResonatorMode};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    /// Independent N(0, std²) on the real and imaginary parts (or on each
    /// value of a real series).
    Gaussian {
        std: f64,
    },
}

impl NoiseModel {
    fn std(self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { std } => std,
        }
    }
}

fn gaussian(std: f64) -> Result<Normal<f64>> {
    ensure(
        std.is_finite() && std >= 0.0,
        "noise std",
        "must be finite and nonnegative",
    )?;
    Ok(Normal::new(0.0, std).expect("validated"))
}

/// `mode.s21_full(line, f)` on `grid` plus seeded complex Gaussian noise.
pub fn synth_trace(
    mode: &ResonatorMode,
    line: &LineCalibration,
    grid: &[f64],
    noise: NoiseModel,
    seed: u64,
) -> Result<ComplexTrace> {
    mode.validate()?;
    let dist = gaussian(noise.std())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = grid
        .iter()
        .map(|&f| {
            let z = mode.s21_full(line, f);
            match noise {
                NoiseModel::None => z,
                NoiseModel::Gaussian { .. } => z + Complex64::new(dist.sample(&mut rng), dist.sample(&mut rng)),
            }
        })
        .collect();
    ComplexTrace::new(grid.to_vec(), values)
}

/// Evaluates the two response curves on `p_grid` and adds independent noise
/// of the given absolute std to each.
pub fn synth_power_series(
    p_grid: &[f64],
    inv_q: impl Fn(f64) -> f64,
    dfrac: impl Fn(f64) -> f64,
    noise_inv_q: NoiseModel,
    noise_dfrac: NoiseModel,
    seed: u64,
) -> Result<PowerSeries> {
    let dq = gaussian(noise_inv_q.std())?;
    let df = gaussian(noise_dfrac.std())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = Vec::with_capacity(p_grid.len());
    let mut d = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        q.push(inv_q(p) + dq.sample(&mut rng));
        d.push(dfrac(p) + df.sample(&mut rng));
    }
    PowerSeries::new(p_grid.to_vec(), q, d)
}

/// `model(n)·(1 + ε)` with ε ~ N(0, relative_std²).
pub fn synth_saturation_series(
    n_grid: &[f64],
    model: impl Fn(f64) -> f64,
    relative_std: f64,
    seed: u64,
) -> Result<SaturationSeries> {
    let dist = gaussian(relative_std)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = n_grid
        .iter()
        .map(|&n| model(n) * (1.0 + dist.sample(&mut rng)))
        .collect();
    SaturationSeries::new(n_grid.to_vec(), y)
}
