//! Single two-level-system microphysics.
//!
//! Sign conventions: the detuning is `Δ = ω_r − ω_TLS`, so a TLS above the
//! resonator has Δ < 0. `S = ⟨σ_z⟩₀ ∈ [−1, 0]` is the (possibly
//! nonequilibrium) population imbalance, and `dS ≥ 0` is the longitudinal
//! susceptibility in the convention where the equilibrium value is
//! `ħ sech²(ħω/2k_BT)/(k_BT)`, i.e. `dS = −2 d⟨σ_z⟩₀/dω`.

use crate::error::{ensure, Error, Result};
use crate::ode::{self, OdeOptions};
use crate::quadrature::{integrate_to_infinity, integrate_with_breaks, QuadOptions};
use crate::special::digamma;
use crate::units::{HBAR, K_B, PLANCK, TWO_PI};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsUnit {
    /// Δ = ω_r − ω_TLS, rad/s.
    pub detuning: f64,
    pub g_perp: f64,
    pub g_par: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Population imbalance ⟨σ_z⟩₀.
    pub s: f64,
    /// Longitudinal susceptibility, s.
    pub ds: f64,
    /// Distance from the illumination spot, m.
    pub position: f64,
}

impl TlsUnit {
    pub fn validate(&self) -> Result<()> {
        ensure(self.detuning.is_finite(), "detuning", "must be finite")?;
        ensure(self.g_perp >= 0.0, "g_perp", "must be non-negative")?;
        ensure(self.g_par >= 0.0, "g_par", "must be non-negative")?;
        ensure(self.gamma1 > 0.0, "gamma1", "must be positive")?;
        ensure(
            self.gamma2 >= 0.5 * self.gamma1 * (1.0 - 1e-12),
            "gamma2",
            "must be at least gamma1/2",
        )?;
        ensure((-1.0..=0.0).contains(&self.s), "s", "must lie in [-1, 0]")?;
        ensure(self.ds >= 0.0, "ds", "must be non-negative")?;
        Ok(())
    }

    /// A TLS in thermal equilibrium with the phonon bath: S and dS follow from
    /// ω_TLS = ω_r − Δ and the temperature.
    pub fn thermal(
        detuning: f64,
        omega_r: f64,
        coupling: f64,
        gamma1: f64,
        gamma2: f64,
        env: &ThermalEnvironment,
    ) -> Result<Self> {
        let omega_tls = omega_r - detuning;
        ensure(omega_tls > 0.0, "detuning", "TLS frequency must be positive")?;
        let unit = Self {
            detuning,
            g_perp: coupling,
            g_par: coupling,
            gamma1,
            gamma2,
            s: equilibrium_population(omega_tls, env),
            ds: equilibrium_ds(omega_tls, env),
            position: 0.0,
        };
        unit.validate()?;
        Ok(unit)
    }

    /// n_s = Γ₁Γ₂/(4g⊥²); infinite for an uncoupled TLS.
    pub fn saturation_photon_number(&self) -> f64 {
        if self.g_perp == 0.0 {
            f64::INFINITY
        } else {
            self.gamma1 * self.gamma2 / (4.0 * self.g_perp * self.g_perp)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalEnvironment {
    pub temperature: f64,
}

impl ThermalEnvironment {
    pub fn new(temperature: f64) -> Result<Self> {
        ensure(
            temperature.is_finite() && temperature > 0.0,
            "temperature",
            "must be positive",
        )?;
        Ok(Self { temperature })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsHostMaterial {
    /// TLS density of states, J⁻¹ m⁻³.
    pub rho_tls: f64,
    /// Dipole moment, C m.
    pub dipole: f64,
    /// Host permittivity, F/m.
    pub epsilon_host: f64,
    /// Participation ratio of the TLS-hosting region.
    pub participation: f64,
    /// δ_TLS.
    pub intrinsic_loss: f64,
}

impl TlsHostMaterial {
    /// Host with δ_TLS taken from the microscopic parameters.
    pub fn from_microscopic(rho_tls: f64, dipole: f64, epsilon_host: f64, participation: f64) -> Result<Self> {
        let mut host = Self {
            rho_tls,
            dipole,
            epsilon_host,
            participation,
            intrinsic_loss: 0.0,
        };
        host.intrinsic_loss = intrinsic_loss_tangent(&host);
        host.validate()?;
        Ok(host)
    }

    /// Host described only by the product p·δ_TLS that enters the
    /// permittivity and loss formulas.
    pub fn phenomenological(participation: f64, intrinsic_loss: f64) -> Result<Self> {
        let host = Self {
            rho_tls: 0.0,
            dipole: 0.0,
            epsilon_host: 1.0,
            participation,
            intrinsic_loss,
        };
        host.validate()?;
        Ok(host)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.rho_tls >= 0.0, "rho_tls", "must be non-negative")?;
        ensure(self.dipole >= 0.0, "dipole", "must be non-negative")?;
        ensure(self.epsilon_host > 0.0, "epsilon_host", "must be positive")?;
        ensure(
            (0.0..=1.0).contains(&self.participation),
            "participation",
            "must lie in [0, 1]",
        )?;
        ensure(self.intrinsic_loss >= 0.0, "intrinsic_loss", "must be non-negative")?;
        Ok(())
    }
}

/// Drive level entering the TLS saturation laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationDrive {
    pub n_cav: f64,
    /// Critical photon number of the empirical saturation law.
    pub n_c: f64,
    /// Empirical exponent.
    pub beta: f64,
}

impl SaturationDrive {
    pub const DEFAULT_BETA: f64 = 0.5;

    pub fn new(n_cav: f64, n_c: f64, beta: f64) -> Result<Self> {
        ensure(n_cav >= 0.0, "n_cav", "must be non-negative")?;
        ensure(n_c > 0.0, "n_c", "must be positive")?;
        ensure(beta > 0.0, "beta", "must be positive")?;
        Ok(Self { n_cav, n_c, beta })
    }

    pub fn unsaturated() -> Self {
        Self {
            n_cav: 0.0,
            n_c: 1.0,
            beta: Self::DEFAULT_BETA,
        }
    }
}

/// Loss (energy decay rate) and frequency shift, both rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexShift {
    pub loss: f64,
    pub shift: f64,
}

impl ComplexShift {
    pub fn magnitude(&self) -> f64 {
        self.loss.hypot(self.shift)
    }
}

impl std::ops::Add for ComplexShift {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            loss: self.loss + rhs.loss,
            shift: self.shift + rhs.shift,
        }
    }
}

fn thermal_argument(omega: f64, env: &ThermalEnvironment) -> f64 {
    HBAR * omega / (2.0 * K_B * env.temperature)
}

/// ⟨σ_z⟩₀ = −tanh(ħω/2k_BT).
pub fn equilibrium_population(omega_tls: f64, env: &ThermalEnvironment) -> f64 {
    -thermal_argument(omega_tls, env).tanh()
}

/// d⟨σ_z⟩₀/dω = −ħ/(2k_BT) sech²(ħω/2k_BT), in s.
pub fn equilibrium_population_slope(omega_tls: f64, env: &ThermalEnvironment) -> f64 {
    let x = thermal_argument(omega_tls, env);
    let sech = 1.0 / x.cosh();
    -HBAR / (2.0 * K_B * env.temperature) * sech * sech
}

/// Equilibrium dS = ħ sech²(ħω/2k_BT)/(k_BT).
pub fn equilibrium_ds(omega_tls: f64, env: &ThermalEnvironment) -> f64 {
    -2.0 * equilibrium_population_slope(omega_tls, env)
}

/// Complex shift from the exchange (σ⁺c + σc†) coupling:
/// δκ = −2g⊥²Γ₂S/(Γ₂²+Δ²), δω = −g⊥²ΔS/(Γ₂²+Δ²).
pub fn transverse_complex_shift(tls: &TlsUnit) -> ComplexShift {
    transverse_with_population(tls, tls.s)
}

fn transverse_with_population(tls: &TlsUnit, s: f64) -> ComplexShift {
    let g2 = tls.g_perp * tls.g_perp;
    let denom = tls.gamma2 * tls.gamma2 + tls.detuning * tls.detuning;
    ComplexShift {
        loss: -2.0 * g2 * tls.gamma2 * s / denom,
        shift: -g2 * tls.detuning * s / denom,
    }
}

/// Drive-saturated population ⟨σ_z⟩ = S / (1 + (n/n_s) Γ₂²/(Γ₂²+Δ²)).
/// An uncoupled TLS (g⊥ = 0) is never saturated.
pub fn saturated_population(tls: &TlsUnit, n_cav: f64) -> f64 {
    let n_s = tls.saturation_photon_number();
    if !n_s.is_finite() || n_cav == 0.0 {
        return tls.s;
    }
    let g2 = tls.gamma2 * tls.gamma2;
    tls.s / (1.0 + n_cav / n_s * g2 / (g2 + tls.detuning * tls.detuning))
}

/// Complex shift from the σ_z(c + c†) coupling (Debye relaxation):
/// loss = 2g∥² dS Γ₁ω_r/(Γ₁²+ω_r²), shift = −g∥² dS Γ₁²/(Γ₁²+ω_r²).
pub fn longitudinal_complex_shift(tls: &TlsUnit, omega_r: f64) -> ComplexShift {
    let g2 = tls.g_par * tls.g_par;
    let g1 = tls.gamma1;
    let denom = g1 * g1 + omega_r * omega_r;
    ComplexShift {
        loss: 2.0 * g2 * tls.ds * g1 * omega_r / denom,
        shift: -g2 * tls.ds * g1 * g1 / denom,
    }
}

/// Saturated resonant loss of a flat TLS band whose frequencies wander with
/// Gaussian spectral diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDiffusionLoss {
    /// Double integral over band detuning and diffused frequency, rad/s.
    pub numeric: f64,
    /// −2πħρV g⊥² S / √(1 + n/n_s), rad/s.
    pub closed_form: f64,
    pub quadrature_error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralDiffusionOptions {
    /// Half-width of the inner (diffusion) integral, in units of σ_sd.
    pub inner_cutoff_sigmas: f64,
    pub rel_tol: f64,
}

impl Default for SpectralDiffusionOptions {
    fn default() -> Self {
        Self {
            inner_cutoff_sigmas: 10.0,
            rel_tol: 1e-7,
        }
    }
}

/// `tls` supplies g⊥, Γ₁, Γ₂ and S (its detuning is ignored: the band
/// covers all detunings). `rho_v` is the prefactor ħρ_TLS V_eff in s.
pub fn spectral_diffusion_loss(
    tls: &TlsUnit,
    n_cav: f64,
    sigma_sd: f64,
    rho_v: f64,
    opts: SpectralDiffusionOptions,
) -> Result<SpectralDiffusionLoss> {
    ensure(sigma_sd > 0.0, "sigma_sd", "must be positive")?;
    ensure(n_cav >= 0.0, "n_cav", "must be non-negative")?;
    tls.validate()?;

    let g2 = tls.g_perp * tls.g_perp;
    let gamma2 = tls.gamma2;
    let n_s = tls.saturation_photon_number();
    let sat = if n_s.is_finite() { n_cav / n_s } else { 0.0 };
    let closed_form = -2.0 * PI * rho_v * g2 * tls.s / (1.0 + sat).sqrt();

    if tls.s == 0.0 || g2 == 0.0 || rho_v == 0.0 {
        return Ok(SpectralDiffusionLoss {
            numeric: 0.0,
            closed_form,
            quadrature_error: 0.0,
        });
    }

    let cutoff = opts.inner_cutoff_sigmas * sigma_sd;
    let norm = 1.0 / (sigma_sd * (2.0 * PI).sqrt());
    // Per-unit-S saturated Lorentzian in the diffused frequency μ.
    let lorentz = move |mu: f64| {
        let l = gamma2 * gamma2 / (gamma2 * gamma2 + mu * mu);
        2.0 * g2 / gamma2 * l / (1.0 + sat * l)
    };
    let inner_opts = QuadOptions::rel(opts.rel_tol * 1e-2).with_abs(0.0);

    let mut inner_failure = None;
    let inner = |delta: f64| -> f64 {
        let gauss = |mu: f64| {
            let z = (mu - delta) / sigma_sd;
            norm * (-0.5 * z * z).exp()
        };
        let lo = delta - cutoff;
        let hi = delta + cutoff;
        let mut breaks = vec![lo];
        if lo < 0.0 && hi > 0.0 {
            // Resolve the Lorentzian core when it sits inside the window.
            for p in [-gamma2, 0.0, gamma2] {
                if p > lo && p < hi {
                    breaks.push(p);
                }
            }
        }
        breaks.push(delta);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks.push(hi);
        match integrate_with_breaks(|mu| lorentz(mu) * gauss(mu), &breaks, inner_opts) {
            Ok(r) => r.value,
            Err(e) => {
                inner_failure.get_or_insert(e);
                f64::NAN
            }
        }
    };

    // Integrand is even in the band detuning; integrate [0, ∞) and double.
    let scale = gamma2 * (1.0 + sat).sqrt() + sigma_sd;
    let mut inner = inner;
    let outer_opts = QuadOptions::rel(opts.rel_tol).with_abs(0.0);
    let core = integrate_with_breaks(&mut inner, &[0.0, scale, 4.0 * scale], outer_opts)?;
    let tail = integrate_to_infinity(&mut inner, 4.0 * scale, scale, outer_opts)?;
    if let Some(e) = inner_failure {
        return Err(e);
    }
    let per_unit = 2.0 * (core.value + tail.value);
    Ok(SpectralDiffusionLoss {
        numeric: -rho_v * tls.s * per_unit,
        closed_form,
        quadrature_error: 2.0 * rho_v * tls.s.abs() * (core.error + tail.error),
    })
}

/// Which coupling the mean-field oracle integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    Transverse,
    Longitudinal,
}

#[derive(Debug, Clone, Copy)]
pub struct SteadyStateOptions {
    /// Initial coherent cavity amplitude |⟨c⟩|.
    pub seed_amplitude: f64,
    /// Integration window in units of the slowest TLS relaxation time.
    pub window_relaxation_times: f64,
    pub samples: usize,
    /// Fraction of the window, counted from the end, used in the decay fit.
    pub fit_fraction: f64,
    /// Largest acceptable rms residual of the log-amplitude and phase fits,
    /// relative to their total change over the fit window.
    pub max_relative_residual: f64,
    pub ode: OdeOptions,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            seed_amplitude: 1e-3,
            window_relaxation_times: 400.0,
            samples: 4000,
            fit_fraction: 0.8,
            max_relative_residual: 1e-3,
            ode: OdeOptions::default(),
        }
    }
}

/// Brute-force oracle for the single-TLS complex shifts: integrates the
/// mean-field equations of motion (with ⟨σ_z c⟩ ≈ ⟨σ_z⟩⟨c⟩) from a weak
/// coherent seed and reads the cavity's extra decay rate and frequency pull
/// off the late-time slopes of ln|⟨c⟩| and arg⟨c⟩.
///
/// Transverse, in the frame rotating at ω_r:
///   dσ/dt  = (iΔ − Γ₂)σ + i g⊥ σ_z c
///   dc/dt  = −(κ/2)c − i g⊥ σ
///   dσ_z/dt = 2i g⊥(σc* − σ*c) − Γ₁(σ_z − S)
///
/// Longitudinal, with σ_z relaxing toward S − dS g∥(c + c*) and only the
/// component of σ_z co-rotating with the cavity retained:
///   dc/dt  = −(κ/2)c − i g∥ δs
///   dδs/dt = (iω_r − Γ₁)δs − Γ₁ dS g∥ c
pub fn steady_state_by_integration(
    tls: &TlsUnit,
    omega_r: f64,
    kappa_tot: f64,
    kind: CouplingKind,
    opts: SteadyStateOptions,
) -> Result<ComplexShift> {
    tls.validate()?;
    ensure(kappa_tot >= 0.0, "kappa_tot", "must be non-negative")?;
    ensure(opts.samples >= 16, "samples", "need at least 16 samples")?;
    ensure(
        opts.fit_fraction > 0.0 && opts.fit_fraction < 1.0,
        "fit_fraction",
        "must lie in (0, 1)",
    )?;

    let slowest = match kind {
        CouplingKind::Transverse => tls.gamma1.min(tls.gamma2),
        CouplingKind::Longitudinal => tls.gamma1,
    };
    let t_end = opts.window_relaxation_times / slowest;
    let times: Vec<f64> = (0..opts.samples)
        .map(|k| t_end * k as f64 / (opts.samples - 1) as f64)
        .collect();
    let c0 = opts.seed_amplitude;

    // State layout: [c_re, c_im, x_re, x_im, (sz)], x = σ or δs.
    let states = match kind {
        CouplingKind::Transverse => {
            let (g, delta, g1, g2, s) = (tls.g_perp, tls.detuning, tls.gamma1, tls.gamma2, tls.s);
            let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
                let c = Complex64::new(y[0], y[1]);
                let sigma = Complex64::new(y[2], y[3]);
                let sz = y[4];
                let i = Complex64::i();
                let dc = -0.5 * kappa_tot * c - i * g * sigma;
                let dsigma = Complex64::new(-g2, delta) * sigma + i * g * sz * c;
                let dsz = -4.0 * g * (sigma * c.conj()).im - g1 * (sz - s);
                dy[0] = dc.re;
                dy[1] = dc.im;
                dy[2] = dsigma.re;
                dy[3] = dsigma.im;
                dy[4] = dsz;
            };
            ode::integrate(rhs, &[c0, 0.0, 0.0, 0.0, tls.s], 0.0, &times, opts.ode)?
        }
        CouplingKind::Longitudinal => {
            let (g, g1, ds) = (tls.g_par, tls.gamma1, tls.ds);
            let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
                let c = Complex64::new(y[0], y[1]);
                let ds_amp = Complex64::new(y[2], y[3]);
                let i = Complex64::i();
                let dc = -0.5 * kappa_tot * c - i * g * ds_amp;
                let dds = Complex64::new(-g1, omega_r) * ds_amp - g1 * ds * g * c;
                dy[0] = dc.re;
                dy[1] = dc.im;
                dy[2] = dds.re;
                dy[3] = dds.im;
            };
            ode::integrate(rhs, &[c0, 0.0, 0.0, 0.0], 0.0, &times, opts.ode)?
        }
    };

    let start = ((1.0 - opts.fit_fraction) * opts.samples as f64) as usize;
    let mut t_fit = Vec::with_capacity(opts.samples - start);
    let mut log_amp = Vec::with_capacity(opts.samples - start);
    let mut phase = Vec::with_capacity(opts.samples - start);
    let mut last_phase: Option<f64> = None;
    for (t, y) in times.iter().zip(&states).skip(start) {
        let c = Complex64::new(y[0], y[1]);
        let mut arg = c.arg();
        if let Some(prev) = last_phase {
            arg += TWO_PI * ((prev - arg) / TWO_PI).round();
        }
        last_phase = Some(arg);
        t_fit.push(*t);
        log_amp.push(c.norm().ln());
        phase.push(arg);
    }

    let (amp_slope, amp_resid) = line_fit(&t_fit, &log_amp);
    let (phase_slope, phase_resid) = line_fit(&t_fit, &phase);
    let span = t_fit.last().unwrap() - t_fit[0];
    let amp_change = (amp_slope * span).abs();
    let phase_change = (phase_slope * span).abs();
    let scale = amp_change.max(phase_change).max(1e-300);
    let residual = amp_resid.max(phase_resid) / scale;
    if !residual.is_finite() || residual > opts.max_relative_residual {
        return Err(Error::DecayFitNonConvergence { residual });
    }

    Ok(ComplexShift {
        loss: -2.0 * amp_slope - kappa_tot,
        shift: -phase_slope,
    })
}

/// Least-squares line through (x, y); returns (slope, rms residual).
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (my + slope * (a - mx));
            r * r
        })
        .sum();
    (slope, (rss / n).sqrt())
}

/// The bracket `Re Ψ(1/2 − hf/(2πi k_BT)) − ln(hf/(2π k_BT))`.
pub fn permittivity_bracket(f: f64, env: &ThermalEnvironment) -> f64 {
    let x = PLANCK * f / (TWO_PI * K_B * env.temperature);
    // 1/2 − x/i = 1/2 + i x.
    digamma(Complex64::new(0.5, x)).re - x.ln()
}

/// Fractional frequency shift from the temperature-dependent TLS
/// permittivity: `p (δ_TLS/π) [Re Ψ(1/2 − hf/2πik_BT) − ln(hf/2πk_BT)]`.
pub fn temperature_permittivity_shift(f_r: f64, env: &ThermalEnvironment, host: &TlsHostMaterial) -> f64 {
    let weight = host.participation * host.intrinsic_loss;
    if weight == 0.0 {
        return 0.0;
    }
    weight / PI * permittivity_bracket(f_r, env)
}

/// Saturated TLS loss tangent `δ_TLS tanh(hf/2k_BT) / √(1 + (n/n_c)^β)`.
pub fn tls_loss_tangent(f: f64, env: &ThermalEnvironment, host: &TlsHostMaterial, drive: &SaturationDrive) -> f64 {
    let thermal = (PLANCK * f / (2.0 * K_B * env.temperature)).tanh();
    host.intrinsic_loss * thermal / (1.0 + (drive.n_cav / drive.n_c).powf(drive.beta)).sqrt()
}

/// δ_TLS = πρ_TLS d₀² / (3ε_host).
pub fn intrinsic_loss_tangent(host: &TlsHostMaterial) -> f64 {
    PI * host.rho_tls * host.dipole * host.dipole / (3.0 * host.epsilon_host)
}

/// Principal-value Kramers–Kronig transform of the TLS loss,
/// `(2/π) P∫₀^{f_max} f' Im ε(f') / (f'² − f²) df'` with
/// `Im ε = δ_TLS tanh(hf'/2k_BT)`, i.e. Re ε − 1 up to the cutoff.
///
/// The pole is handled by folding the window [0, 2f] about f, which is the
/// zero-width limit of a symmetric excision. The cutoff-dependent constant
/// cancels when two temperatures are differenced.
pub fn kramers_kronig_real_part(f: f64, env: &ThermalEnvironment, host: &TlsHostMaterial, f_max: f64) -> Result<f64> {
    ensure(f > 0.0, "f", "must be positive")?;
    ensure(f_max > 2.0 * f, "f_max", "must exceed twice the probe frequency")?;
    let delta = host.intrinsic_loss;
    if delta == 0.0 {
        return Ok(0.0);
    }
    let beta = PLANCK / (2.0 * K_B * env.temperature);
    let g = move |fp: f64| fp * delta * (beta * fp).tanh() / (fp + f);

    let opts = QuadOptions::rel(1e-12).with_abs(1e-15 * delta);
    let folded = integrate_with_breaks(|u: f64| (g(f + u) - g(f - u)) / u, &[0.0, 0.5 * f, f], opts)?;
    let thermal_scale = 1.0 / beta;
    let mut breaks = vec![2.0 * f];
    let mut edge = 4.0 * f;
    while edge < f_max {
        breaks.push(edge);
        edge *= 4.0;
    }
    if thermal_scale > 2.0 * f && thermal_scale < f_max {
        breaks.push(thermal_scale);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.push(f_max);
    let outer = integrate_with_breaks(|fp: f64| g(fp) / (fp - f), &breaks, opts)?;
    Ok(2.0 / PI * (folded.value + outer.value))
}
