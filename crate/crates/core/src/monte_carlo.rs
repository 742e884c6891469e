//! Seeded Monte Carlo TLS ensemble: random positions, frequencies, couplings
//! and populations, weighted by a tanh window whose width grows with optical
//! power.

use crate::ensemble::EnsembleParams;
use crate::error::{ensure, Result};
use crate::tls::TlsUnit;
use crate::units::{angular, HBAR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, SQRT_2};

/// K(x, P) = ½[tanh((x + ξP/2)/l) − tanh((x − ξP/2)/l)].
pub fn kernel(x: f64, p_opt: f64, xi: f64, l_edge: f64) -> f64 {
    let half = 0.5 * xi * p_opt;
    0.5 * (((x + half) / l_edge).tanh() - ((x - half) / l_edge).tanh())
}

/// Relative width of the g and Γ₁ distributions: σ/center = 1/(2√(2 ln 2)),
/// i.e. the FWHM equals the center value.
pub fn relative_spread() -> f64 {
    1.0 / (2.0 * (2.0 * LN_2).sqrt())
}

/// How the Gaussian centers for g and Γ₁ relate to the bath averages g̃, Γ̃₁.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Centers chosen so that the zero-truncated draws satisfy E[g²] = g̃² and
    /// E[Γ₁] = Γ̃₁, the moments the ensemble integrals are written in.
    MatchMoments,
    /// Gaussians centered at g̃ and Γ̃₁ literally.
    Literal,
}

/// Where TLS frequencies are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyWindow {
    /// ω_TLS uniform on (0, ω_max], the range the bath integrals cover.
    UpToCutoff,
    /// Detuning uniform on [−ω_max, ω_max].
    SymmetricDetuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    pub omega_r: f64,
    pub omega_max: f64,
    pub window: FrequencyWindow,
    /// TLSs with |Δ| below this are not generated, rad/s.
    pub exclusion: f64,
    /// TLS positions are uniform on [−L, L], m.
    pub half_length: f64,
    pub l_edge: f64,
    pub xi: f64,
    pub rho_tls: f64,
    pub area: f64,
    pub g_mean: f64,
    pub gamma1_mean: f64,
    pub centering: Centering,
    pub s_mean: f64,
    pub s_std: f64,
    /// Clamp drawn populations to [−1, 0].
    pub clamp_population: bool,
    /// Shared dS, s.
    pub ds: f64,
    /// Optical powers, W, strictly increasing.
    pub p_grid: Vec<f64>,
    /// Restrict the per-trial line fit to powers in this closed range.
    pub fit_window: Option<(f64, f64)>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self::from_ensemble(&EnsembleParams::default())
    }
}

impl McConfig {
    /// Mirrors the bath parameters; 100 trials over 0–1 μW.
    pub fn from_ensemble(p: &EnsembleParams) -> Self {
        Self {
            trials: 100,
            seed: 0x5eed,
            omega_r: p.omega_r,
            omega_max: p.omega_max,
            window: FrequencyWindow::UpToCutoff,
            exclusion: angular(100e6),
            half_length: 250e-6,
            l_edge: 10e-6,
            xi: p.xi,
            rho_tls: p.rho_tls,
            area: p.area(),
            g_mean: p.g_par,
            gamma1_mean: p.gamma1,
            centering: Centering::MatchMoments,
            s_mean: 0.0,
            s_std: 0.35,
            clamp_population: true,
            ds: p.ds_tilde,
            p_grid: (0..=10).map(|k| k as f64 * 100e-9).collect(),
            fit_window: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.trials >= 1, "trials", "must be at least 1")?;
        ensure(self.omega_r > 0.0, "omega_r", "must be positive")?;
        ensure(self.omega_max > 0.0, "omega_max", "must be positive")?;
        ensure(
            self.exclusion >= 0.0 && self.exclusion < self.omega_max,
            "exclusion",
            "must lie in [0, omega_max)",
        )?;
        ensure(self.half_length > 0.0, "half_length", "must be positive")?;
        ensure(self.l_edge > 0.0, "l_edge", "must be positive")?;
        ensure(self.xi >= 0.0, "xi", "must be non-negative")?;
        ensure(self.rho_tls >= 0.0, "rho_tls", "must be non-negative")?;
        ensure(self.area > 0.0, "area", "must be positive")?;
        ensure(self.g_mean >= 0.0, "g_mean", "must be non-negative")?;
        ensure(self.gamma1_mean > 0.0, "gamma1_mean", "must be positive")?;
        ensure(self.s_std >= 0.0, "s_std", "must be non-negative")?;
        ensure(self.ds >= 0.0, "ds", "must be non-negative")?;
        ensure(!self.p_grid.is_empty(), "p_grid", "must not be empty")?;
        ensure(self.p_grid[0] >= 0.0, "p_grid", "powers must be non-negative")?;
        ensure(
            self.p_grid.windows(2).all(|w| w[1] > w[0]),
            "p_grid",
            "must be strictly increasing",
        )?;
        if let Some((lo, hi)) = self.fit_window {
            ensure(lo <= hi, "fit_window", "bounds must be ordered")?;
        }
        Ok(())
    }

    /// Width of the frequency range TLSs are drawn from, rad/s.
    pub fn frequency_span(&self) -> f64 {
        match self.window {
            FrequencyWindow::UpToCutoff => {
                // The exclusion band around ω_r, clipped to (0, ω_max].
                let lo = (self.omega_r - self.exclusion).max(0.0);
                let hi = (self.omega_r + self.exclusion).min(self.omega_max);
                self.omega_max - (hi - lo).max(0.0)
            }
            FrequencyWindow::SymmetricDetuning => 2.0 * (self.omega_max - self.exclusion),
        }
    }

    /// Mean TLS count ρħΔω·A·2L.
    pub fn expected_count(&self) -> f64 {
        self.rho_tls * HBAR * self.frequency_span() * self.area * 2.0 * self.half_length
    }

    /// (center of g, center of Γ₁) of the underlying Gaussians.
    pub fn distribution_centers(&self) -> (f64, f64) {
        match self.centering {
            Centering::Literal => (self.g_mean, self.gamma1_mean),
            Centering::MatchMoments => {
                let r = relative_spread();
                // For X ~ N(μ, (rμ)²) conditioned on X > 0, with λ the inverse
                // Mills ratio at −1/r: E[X] = μ(1 + rλ), E[X²] = μ²(1 + r² + rλ).
                let lambda = inverse_mills(-1.0 / r);
                (
                    self.g_mean / (1.0 + r * r + r * lambda).sqrt(),
                    self.gamma1_mean / (1.0 + r * lambda),
                )
            }
        }
    }

    fn fit_mask(&self) -> Vec<bool> {
        self.p_grid
            .iter()
            .map(|&p| match self.fit_window {
                Some((lo, hi)) => p >= lo && p <= hi,
                None => true,
            })
            .collect()
    }
}

/// φ(a)/(1 − Φ(a)) for the standard normal.
fn inverse_mills(a: f64) -> f64 {
    let pdf = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let tail = 0.5 * libm::erfc(a / SQRT_2);
    pdf / tail
}

/// Per-trial generator seed from (master seed, trial index).
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn positive_normal<R: Rng>(rng: &mut R, dist: &Normal<f64>) -> f64 {
    if dist.mean() == 0.0 && dist.std_dev() == 0.0 {
        return 0.0;
    }
    loop {
        let v = dist.sample(rng);
        if v > 0.0 {
            return v;
        }
    }
}

/// Draws one ensemble. Empty when the expected count is zero.
pub fn generate_ensemble(config: &McConfig, rng: &mut ChaCha8Rng) -> Result<Vec<TlsUnit>> {
    config.validate()?;
    let mean = config.expected_count();
    if mean <= 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean)
        .map_err(|e| crate::error::invalid("expected_count", e.to_string()))?
        .sample(rng) as usize;

    let r = relative_spread();
    let (g_center, gamma_center) = config.distribution_centers();
    let g_dist = Normal::new(g_center, r * g_center).expect("finite spread");
    let gamma_dist = Normal::new(gamma_center, r * gamma_center).expect("finite spread");
    let s_dist = Normal::new(config.s_mean, config.s_std).expect("finite spread");
    let span = config.frequency_span();

    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let detuning = draw_detuning(config, span, rng);
        let position = config.half_length * (2.0 * rng.random::<f64>() - 1.0);
        let g = positive_normal(rng, &g_dist);
        let gamma1 = positive_normal(rng, &gamma_dist);
        let mut s = s_dist.sample(rng);
        if config.clamp_population {
            s = s.clamp(-1.0, 0.0);
        }
        out.push(TlsUnit {
            detuning,
            g_perp: g,
            g_par: g,
            gamma1,
            gamma2: gamma1,
            s,
            ds: config.ds,
            position,
        });
    }
    Ok(out)
}

/// Uniform over the allowed set, by mapping a uniform variate onto the
/// concatenation of its intervals.
fn draw_detuning(config: &McConfig, span: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u = rng.random::<f64>() * span;
    match config.window {
        FrequencyWindow::UpToCutoff => {
            let lo = (config.omega_r - config.exclusion).max(0.0);
            let hi = (config.omega_r + config.exclusion).min(config.omega_max);
            // ω_TLS ∈ (0, lo) ∪ (hi, ω_max]; Δ = ω_r − ω_TLS.
            let omega = if u < lo { u } else { hi + (u - lo) };
            config.omega_r - omega
        }
        FrequencyWindow::SymmetricDetuning => {
            let half = 0.5 * span;
            if u < half {
                -(config.exclusion + u)
            } else {
                config.exclusion + (u - half)
            }
        }
    }
}

/// One trial's response over the power grid, with its fitted lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialCurves {
    pub tls_count: usize,
    pub dinv_q: Vec<f64>,
    pub dfrac: Vec<f64>,
    /// Per watt.
    pub slope_inv_q: f64,
    pub intercept_inv_q: f64,
    pub slope_dfrac: f64,
    pub intercept_dfrac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1); zero for one sample.
    pub std: f64,
    /// std/√n.
    pub std_error: f64,
}

impl SampleStats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len() as f64;
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                std_error: f64::NAN,
            };
        }
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            std_error: std / n.sqrt(),
        }
    }

    /// std/|mean|.
    pub fn relative_std(&self) -> f64 {
        self.std / self.mean.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub p_grid: Vec<f64>,
    pub trials: Vec<TrialCurves>,
    pub mean_dinv_q: Vec<f64>,
    pub std_dinv_q: Vec<f64>,
    pub mean_dfrac: Vec<f64>,
    pub std_dfrac: Vec<f64>,
    pub slope_inv_q: SampleStats,
    pub slope_dfrac: SampleStats,
    /// Trials whose ensemble came out empty.
    pub empty_trials: usize,
}

/// Δ(1/Q)(P) and Δf/f(P) of one ensemble.
pub fn response_curves(config: &McConfig, ensemble: &[TlsUnit]) -> Result<TrialCurves> {
    config.validate()?;
    let wr = config.omega_r;
    // Power-independent weights, one pair per TLS.
    let weights: Vec<(f64, f64, f64)> = ensemble
        .iter()
        .map(|t| {
            let g1 = t.gamma1;
            let gpar2 = t.g_par * t.g_par;
            let gperp2 = t.g_perp * t.g_perp;
            let lor = g1 * g1 + wr * wr;
            let q = t.ds * 2.0 * g1 * wr / lor * gpar2 / wr;
            // Written with ω_TLS − ω_r = −Δ so TLSs above the resonator push
            // it up once they are partly excited.
            let dispersive = (1.0 + t.s) * (-t.detuning) / (t.gamma2 * t.gamma2 + t.detuning * t.detuning) * gperp2;
            let debye = t.ds * g1 * g1 / lor * gpar2;
            (t.position, q, (dispersive - debye) / wr)
        })
        .collect();

    let mut dinv_q = Vec::with_capacity(config.p_grid.len());
    let mut dfrac = Vec::with_capacity(config.p_grid.len());
    for &p in &config.p_grid {
        let (mut q, mut f) = (0.0, 0.0);
        if p > 0.0 {
            let reach = 0.5 * config.xi * p + 40.0 * config.l_edge;
            for &(x, wq, wf) in &weights {
                if x.abs() > reach {
                    continue;
                }
                let k = kernel(x, p, config.xi, config.l_edge);
                q += k * wq;
                f += k * wf;
            }
        }
        dinv_q.push(q);
        dfrac.push(f);
    }

    let mask = config.fit_mask();
    let (slope_inv_q, intercept_inv_q) = line_fit(&config.p_grid, &dinv_q, &mask);
    let (slope_dfrac, intercept_dfrac) = line_fit(&config.p_grid, &dfrac, &mask);
    Ok(TrialCurves {
        tls_count: ensemble.len(),
        dinv_q,
        dfrac,
        slope_inv_q,
        intercept_inv_q,
        slope_dfrac,
        intercept_dfrac,
    })
}

/// Least-squares y = a x + b over the masked points. With a single point the
/// line goes through the origin.
fn line_fit(x: &[f64], y: &[f64], mask: &[bool]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((&a, &b), _)| (a, b))
        .collect();
    match pts.len() {
        0 => (f64::NAN, f64::NAN),
        1 => {
            let (a, b) = pts[0];
            if a == 0.0 {
                (f64::NAN, b)
            } else {
                (b / a, 0.0)
            }
        }
        _ => {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let a = sxy / sxx;
            (a, my - a * mx)
        }
    }
}

/// Runs one trial with its own generator.
pub fn run_trial(config: &McConfig, trial: usize) -> Result<TrialCurves> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.seed, trial as u64));
    let ensemble = generate_ensemble(config, &mut rng)?;
    response_curves(config, &ensemble)
}

/// All trials, in parallel, reduced in trial order.
pub fn run(config: &McConfig) -> Result<McResult> {
    config.validate()?;
    let trials: Vec<TrialCurves> = (0..config.trials)
        .into_par_iter()
        .map(|k| run_trial(config, k))
        .collect::<Result<_>>()?;
    Ok(aggregate(config, trials))
}

/// Same as [`run`] on the calling thread only.
pub fn run_sequential(config: &McConfig) -> Result<McResult> {
    config.validate()?;
    let trials = (0..config.trials)
        .map(|k| run_trial(config, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(config, trials))
}

fn aggregate(config: &McConfig, trials: Vec<TrialCurves>) -> McResult {
    let n_p = config.p_grid.len();
    let column = |j: usize, pick: fn(&TrialCurves) -> &Vec<f64>| SampleStats::of(trials.iter().map(|t| pick(t)[j]));
    let q_cols: Vec<SampleStats> = (0..n_p).map(|j| column(j, |t| &t.dinv_q)).collect();
    let f_cols: Vec<SampleStats> = (0..n_p).map(|j| column(j, |t| &t.dfrac)).collect();
    McResult {
        p_grid: config.p_grid.clone(),
        mean_dinv_q: q_cols.iter().map(|s| s.mean).collect(),
        std_dinv_q: q_cols.iter().map(|s| s.std).collect(),
        mean_dfrac: f_cols.iter().map(|s| s.mean).collect(),
        std_dfrac: f_cols.iter().map(|s| s.std).collect(),
        slope_inv_q: SampleStats::of(trials.iter().map(|t| t.slope_inv_q)),
        slope_dfrac: SampleStats::of(trials.iter().map(|t| t.slope_dfrac)),
        empty_trials: trials.iter().filter(|t| t.tls_count == 0).count(),
        trials,
    }
}
