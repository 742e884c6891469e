//! Ensemble-averaged TLS bath: total loss and dispersive shift of a uniform
//! TLS density, and the optical-response slopes obtained when the affected
//! volume grows linearly with optical power, `V_eff = A ξ P_opt`.

use crate::error::{ensure, Result};
use crate::monte_carlo::kernel;
use crate::quadrature::{integrate, integrate_to_infinity, integrate_with_breaks, QuadOptions};
use crate::units::{angular, hertz, HBAR};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One nanowatt, for quoting slopes per nW.
pub const NANOWATT: f64 = 1e-9;

/// Averaged-bath parameters. `Default` is the parameter set used for the
/// 7 GHz calculations, with g̃/2π = 5 MHz and ξ = 50 m/W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub omega_r: f64,
    /// J⁻¹ m⁻³.
    pub rho_tls: f64,
    /// TLS-layer thickness t, m.
    pub thickness: f64,
    /// Width of the region considered around the wire, m.
    pub width: f64,
    /// Phonon-diffusion length per unit optical power, m/W.
    pub xi: f64,
    pub omega_max: f64,
    pub delta_max: f64,
    pub delta_min: f64,
    pub s_tilde: f64,
    /// s.
    pub ds_tilde: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub g_perp: f64,
    pub g_par: f64,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        let omega_r = angular(7e9);
        let omega_max = angular(1000e9);
        let gamma1 = angular(16e6);
        let g = angular(5e6);
        Self {
            omega_r,
            rho_tls: 1e45,
            thickness: 2e-9,
            width: 500e-9,
            xi: 50.0,
            omega_max,
            delta_max: omega_max,
            delta_min: omega_r,
            s_tilde: 0.0,
            ds_tilde: 1.0 / angular(400e6),
            gamma1,
            gamma2: gamma1,
            g_perp: g,
            g_par: g,
        }
    }
}

impl EnsembleParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_r", self.omega_r),
            ("rho_tls", self.rho_tls),
            ("thickness", self.thickness),
            ("width", self.width),
            ("xi", self.xi),
            ("omega_max", self.omega_max),
            ("delta_max", self.delta_max),
            ("delta_min", self.delta_min),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ] {
            ensure(v.is_finite() && v > 0.0, name, "must be positive")?;
        }
        ensure(self.g_perp >= 0.0, "g_perp", "must be non-negative")?;
        ensure(self.g_par >= 0.0, "g_par", "must be non-negative")?;
        ensure((-1.0..=0.0).contains(&self.s_tilde), "s_tilde", "must lie in [-1, 0]")?;
        ensure(self.ds_tilde >= 0.0, "ds_tilde", "must be non-negative")?;
        ensure(
            self.delta_max >= self.delta_min,
            "delta_max",
            "must not be below delta_min",
        )?;
        ensure(self.delta_min >= self.gamma2, "delta_min", "must not be below gamma2")?;
        Ok(())
    }

    /// Sets g̃⊥ = g̃∥ = g.
    pub fn with_coupling(mut self, g: f64) -> Self {
        self.g_perp = g;
        self.g_par = g;
        self
    }

    pub fn area(&self) -> f64 {
        self.thickness * self.width
    }

    /// C = ħρA ξ/ω_r.
    pub fn c_factor(&self) -> f64 {
        HBAR * self.rho_tls * self.area() * self.xi / self.omega_r
    }

    /// K∥ = Γ̃₁ ω_max dS̃/(Γ̃₁² + ω_r²).
    pub fn k_par(&self) -> f64 {
        self.gamma1 * self.omega_max * self.ds_tilde / (self.gamma1 * self.gamma1 + self.omega_r * self.omega_r)
    }

    /// K⊥ = (1 + S̃) ln(Δ'_max/Δ'_min).
    pub fn k_perp(&self) -> f64 {
        (1.0 + self.s_tilde) * self.log_window()
    }

    fn log_window(&self) -> f64 {
        (self.delta_max / self.delta_min).ln()
    }

    fn debye_weight(&self) -> f64 {
        let g1 = self.gamma1;
        g1 * self.omega_r / (g1 * g1 + self.omega_r * self.omega_r)
    }

    fn debye_shift_weight(&self) -> f64 {
        let g1 = self.gamma1;
        g1 * g1 / (g1 * g1 + self.omega_r * self.omega_r)
    }
}

/// Which population factor multiplies the log-window dispersive term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyShiftForm {
    /// S̃: the static dispersive baseline of the bath.
    Equilibrium,
    /// (1 + S̃): the change relative to a ground-state bath, i.e. the part
    /// illumination adds by populating the upper levels.
    Optical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    /// −2πħρV g̃⊥² S̃.
    pub resonant: f64,
    /// 2ħρV g̃∥² Γ̃₁ω_r/(Γ̃₁²+ω_r²) ω_max dS̃.
    pub debye: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.resonant + self.debye
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftTerms {
    /// ħρV g̃⊥² ln(Δ'_max/Δ'_min) × (S̃ or 1+S̃).
    pub transverse: f64,
    /// −ħρV g̃∥² Γ̃₁²/(Γ̃₁²+ω_r²) ω_max dS̃.
    pub longitudinal: f64,
}

impl ShiftTerms {
    pub fn total(&self) -> f64 {
        self.transverse + self.longitudinal
    }
}

/// Total extra loss rate of every TLS in `v_eff` (m³), rad/s.
pub fn total_loss_rate(p: &EnsembleParams, v_eff: f64) -> Result<LossTerms> {
    p.validate()?;
    ensure(v_eff >= 0.0, "v_eff", "must be non-negative")?;
    let hrv = HBAR * p.rho_tls * v_eff;
    Ok(LossTerms {
        resonant: -2.0 * PI * hrv * p.g_perp * p.g_perp * p.s_tilde,
        debye: 2.0 * hrv * p.g_par * p.g_par * p.debye_weight() * p.omega_max * p.ds_tilde,
    })
}

/// Total frequency pull of every TLS in `v_eff` (m³), rad/s.
pub fn total_frequency_shift(p: &EnsembleParams, v_eff: f64, form: FrequencyShiftForm) -> Result<ShiftTerms> {
    p.validate()?;
    ensure(v_eff >= 0.0, "v_eff", "must be non-negative")?;
    let hrv = HBAR * p.rho_tls * v_eff;
    let population = match form {
        FrequencyShiftForm::Equilibrium => p.s_tilde,
        FrequencyShiftForm::Optical => 1.0 + p.s_tilde,
    };
    Ok(ShiftTerms {
        transverse: hrv * p.g_perp * p.g_perp * p.log_window() * population,
        longitudinal: -hrv * p.g_par * p.g_par * p.debye_shift_weight() * p.omega_max * p.ds_tilde,
    })
}

/// dΔ(1/Q)/dP_opt = 2 C K∥ ω_r g̃∥², per watt.
pub fn slope_inverse_q(p: &EnsembleParams) -> Result<f64> {
    p.validate()?;
    Ok(2.0 * p.c_factor() * p.k_par() * p.omega_r * p.g_par * p.g_par)
}

/// d(Δf_r/f_r)/dP_opt = C (K⊥ g̃⊥² − Γ̃₁K∥ g̃∥²), per watt.
pub fn slope_fractional_frequency(p: &EnsembleParams) -> Result<f64> {
    p.validate()?;
    let c = p.c_factor();
    Ok(c * (p.k_perp() * p.g_perp * p.g_perp - p.gamma1 * p.k_par() * p.g_par * p.g_par))
}

/// The dS̃ at which the frequency slope changes sign (K⊥ = Γ̃₁K∥, equal
/// couplings). Zero when S̃ = −1.
pub fn crossover_ds(p: &EnsembleParams) -> Result<f64> {
    p.validate()?;
    let g1 = p.gamma1;
    Ok(p.k_perp() * (g1 * g1 + p.omega_r * p.omega_r) / (g1 * g1 * p.omega_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// g̃ follows g̃₀√(f_r/7 GHz); Δ'_min tracks ω_r if it equals ω_r in
    /// the base parameters.
    OmegaR,
    /// Δ'_max tracks ω_max.
    OmegaMax,
    /// Γ̃₂ tracks Γ̃₁ if they are equal in the base parameters.
    Gamma1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub slope_inverse_q: f64,
    pub slope_fractional_frequency: f64,
}

/// Reference frequency of the g̃ ∝ √f_r normalization.
pub const COUPLING_REFERENCE_FREQUENCY: f64 = 7e9;

pub fn swept_params(base: &EnsembleParams, axis: SweepAxis, value: f64) -> EnsembleParams {
    let mut p = *base;
    match axis {
        SweepAxis::OmegaR => {
            let scale = (hertz(value) / COUPLING_REFERENCE_FREQUENCY).sqrt();
            let scale0 = (hertz(base.omega_r) / COUPLING_REFERENCE_FREQUENCY).sqrt();
            p.g_perp = base.g_perp / scale0 * scale;
            p.g_par = base.g_par / scale0 * scale;
            if base.delta_min == base.omega_r {
                p.delta_min = value;
            }
            p.omega_r = value;
        }
        SweepAxis::OmegaMax => {
            p.omega_max = value;
            p.delta_max = value;
        }
        SweepAxis::Gamma1 => {
            if base.gamma2 == base.gamma1 {
                p.gamma2 = value;
            }
            p.gamma1 = value;
        }
    }
    p
}

/// Evaluates both slopes along one axis, all other parameters fixed. Rows
/// come back in grid order.
pub fn parameter_sweep(base: &EnsembleParams, axis: SweepAxis, grid: &[f64]) -> Result<Vec<SweepRow>> {
    ensure(!grid.is_empty(), "grid", "must not be empty")?;
    ensure(
        grid.iter().all(|v| v.is_finite() && *v > 0.0),
        "grid",
        "values must be positive",
    )?;
    grid.par_iter()
        .map(|&value| {
            let p = swept_params(base, axis, value);
            Ok(SweepRow {
                value,
                slope_inverse_q: slope_inverse_q(&p)?,
                slope_fractional_frequency: slope_fractional_frequency(&p)?,
            })
        })
        .collect()
}

/// Quadrature counterparts of the closed forms above. Each replaces an
/// analytic integral by adaptive quadrature over the single-TLS response.
pub mod oracle {
    use super::*;

    fn opts() -> QuadOptions {
        QuadOptions::rel(1e-10)
    }

    /// ∫ 2g²Γ₂/(Γ₂²+Δ²) dΔ over the real line (→ 2πg²).
    fn lorentzian_integral(g: f64, gamma2: f64) -> Result<f64> {
        let f = |d: f64| 2.0 * g * g * gamma2 / (gamma2 * gamma2 + d * d);
        let core = integrate_with_breaks(f, &[0.0, gamma2, 10.0 * gamma2], opts())?;
        let tail = integrate_to_infinity(f, 10.0 * gamma2, 10.0 * gamma2, opts())?;
        Ok(2.0 * (core.value + tail.value))
    }

    /// ∫ −g²Δ/(Γ₂²+Δ²) dΔ over TLSs above the resonator with
    /// Δ ∈ [−Δ'_max, −Δ'_min] (→ g² ln(Δ'_max/Δ'_min) for Δ'_min ≫ Γ₂).
    fn log_integral(g: f64, gamma2: f64, lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        let mut breaks = vec![-hi];
        let mut edge = -hi;
        while edge * 0.1 < -lo {
            edge *= 0.1;
            breaks.push(edge);
        }
        breaks.push(-lo);
        Ok(integrate_with_breaks(|d: f64| -g * g * d / (gamma2 * gamma2 + d * d), &breaks, opts())?.value)
    }

    /// ∫₀^{ω_max} w dω for a flat weight w.
    fn flat_integral(w: f64, omega_max: f64) -> Result<f64> {
        Ok(integrate(|_| w, 0.0, omega_max, opts())?.value)
    }

    pub fn total_loss_rate(p: &EnsembleParams, v_eff: f64) -> Result<LossTerms> {
        p.validate()?;
        let hrv = HBAR * p.rho_tls * v_eff;
        let resonant = -hrv * p.s_tilde * lorentzian_integral(p.g_perp, p.gamma2)?;
        let weight = 2.0 * p.g_par * p.g_par * p.debye_weight() * p.ds_tilde;
        let debye = hrv * flat_integral(weight, p.omega_max)?;
        Ok(LossTerms { resonant, debye })
    }

    pub fn total_frequency_shift(p: &EnsembleParams, v_eff: f64, form: FrequencyShiftForm) -> Result<ShiftTerms> {
        p.validate()?;
        let hrv = HBAR * p.rho_tls * v_eff;
        let population = match form {
            FrequencyShiftForm::Equilibrium => p.s_tilde,
            FrequencyShiftForm::Optical => 1.0 + p.s_tilde,
        };
        let transverse = hrv * population * log_integral(p.g_perp, p.gamma2, p.delta_min, p.delta_max)?;
        let weight = -p.g_par * p.g_par * p.debye_shift_weight() * p.ds_tilde;
        let longitudinal = hrv * flat_integral(weight, p.omega_max)?;
        Ok(ShiftTerms {
            transverse,
            longitudinal,
        })
    }

    /// Affected volume A ∫K(x, P) dx with the tanh diffusion window, by
    /// quadrature. Equals A ξ P for every edge length.
    pub fn effective_volume(p: &EnsembleParams, p_opt: f64, l_edge: f64) -> Result<f64> {
        let half = 0.5 * p.xi * p_opt;
        let reach = half + 40.0 * l_edge;
        let f = |x: f64| kernel(x, p_opt, p.xi, l_edge);
        let r = integrate_with_breaks(f, &[0.0, half.min(reach), reach], QuadOptions::rel(1e-12))?;
        Ok(2.0 * p.area() * r.value)
    }

    /// Slopes from the quadrature totals and the kernel-integrated volume at
    /// optical power `p_opt`. Returns (d(1/Q)/dP, d(Δf/f)/dP), per watt.
    pub fn slopes(p: &EnsembleParams, p_opt: f64, l_edge: f64) -> Result<(f64, f64)> {
        let v = effective_volume(p, p_opt, l_edge)?;
        let loss = total_loss_rate(p, v)?;
        let shift = total_frequency_shift(p, v, FrequencyShiftForm::Optical)?;
        Ok((loss.debye / p.omega_r / p_opt, shift.total() / p.omega_r / p_opt))
    }
}
