//! Hanger-type resonator: transmission, reflection, dissipated power,
//! half-power bandwidths and intracavity photon number.

use crate::error::{ensure, Error, Result};
use crate::units::{angular, HBAR, TWO_PI};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One resonance of a hanger-coupled resonator.
///
/// The coupling quality factor may be complex, `q_ext + i q_ext_imag`, to
/// describe an asymmetric line shape. The total Q always satisfies
/// `1/Q_tot = 1/Q_int + Re(1/(q_ext + i q_ext_imag))`, so with zero imaginary
/// part it is the usual `1/Q_int + 1/Q_ext`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorMode {
    /// Resonance frequency, Hz.
    pub f_r: f64,
    pub q_int: f64,
    /// Real part of the complex coupling quality factor.
    pub q_ext: f64,
    #[serde(default)]
    pub q_ext_imag: f64,
}

impl ResonatorMode {
    pub fn new(f_r: f64, q_int: f64, q_ext: f64) -> Result<Self> {
        let mode = Self {
            f_r,
            q_int,
            q_ext,
            q_ext_imag: 0.0,
        };
        mode.validate()?;
        Ok(mode)
    }

    /// Mode whose coupling carries an asymmetry phase `phi`, i.e.
    /// `Q_tot/Q_c = e^{iφ} Q_tot/Q_ext`, with the effective (real) external
    /// quality factor `q_ext_effective` held fixed.
    pub fn with_asymmetry(f_r: f64, q_int: f64, q_ext_effective: f64, phi: f64) -> Result<Self> {
        ensure(
            phi.abs() < std::f64::consts::FRAC_PI_2,
            "phi",
            "|phi| must be below pi/2",
        )?;
        let magnitude = q_ext_effective * phi.cos();
        let mode = Self {
            f_r,
            q_int,
            q_ext: magnitude * phi.cos(),
            q_ext_imag: -magnitude * phi.sin(),
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.f_r.is_finite() && self.f_r > 0.0, "f_r", "must be positive")?;
        ensure(self.q_int.is_finite() && self.q_int > 0.0, "q_int", "must be positive")?;
        ensure(self.q_ext.is_finite() && self.q_ext > 0.0, "q_ext", "must be positive")?;
        ensure(self.q_ext_imag.is_finite(), "q_ext_imag", "must be finite")?;
        Ok(())
    }

    pub fn q_ext_complex(&self) -> Complex64 {
        Complex64::new(self.q_ext, self.q_ext_imag)
    }

    /// `1/Re(1/(Q_ext,real + i Q_ext,imag))`.
    pub fn q_ext_effective(&self) -> f64 {
        1.0 / self.q_ext_complex().inv().re
    }

    /// Asymmetry phase φ with `Q_tot/Q_c = e^{iφ} |Q_tot/Q_c|`.
    pub fn phi(&self) -> f64 {
        self.q_ext_complex().inv().arg()
    }

    pub fn q_tot(&self) -> f64 {
        1.0 / (1.0 / self.q_int + 1.0 / self.q_ext_effective())
    }

    pub fn omega_r(&self) -> f64 {
        angular(self.f_r)
    }

    /// κ_int = ω_r/Q_int, rad/s.
    pub fn kappa_int(&self) -> f64 {
        self.omega_r() / self.q_int
    }

    /// κ_ext = ω_r/Q_ext, rad/s.
    pub fn kappa_ext(&self) -> f64 {
        self.omega_r() / self.q_ext_effective()
    }

    pub fn kappa_tot(&self) -> f64 {
        self.kappa_int() + self.kappa_ext()
    }

    fn lorentz_denominator(&self, f: f64) -> Complex64 {
        Complex64::new(1.0, 2.0 * self.q_tot() * (f - self.f_r) / self.f_r)
    }

    /// `1 − (Q_tot/Q_ext) / (1 + 2i Q_tot (f − f_r)/f_r)`.
    pub fn s21_ideal(&self, f: f64) -> Complex64 {
        let ratio = self.q_tot() / self.q_ext_effective();
        Complex64::new(1.0, 0.0) - ratio / self.lorentz_denominator(f)
    }

    /// Transmission including line attenuation/delay and coupling asymmetry.
    pub fn s21_full(&self, line: &LineCalibration, f: f64) -> Complex64 {
        let coupling = self.q_tot() / self.q_ext_complex();
        let resonator = Complex64::new(1.0, 0.0) - coupling / self.lorentz_denominator(f);
        line.factor(f) * resonator
    }

    pub fn s11_magnitude_sq(&self, f: f64) -> f64 {
        let q = self.q_tot();
        let ratio = q / self.q_ext_effective();
        let x = (f - self.f_r) / self.f_r;
        ratio * ratio / (1.0 + 4.0 * q * q * x * x)
    }

    /// P_loss/P_in = 2κ_int κ_ext / (κ_tot² + 4(ω − ω_r)²).
    pub fn dissipated_fraction(&self, f: f64) -> f64 {
        let detuning = angular(f) - self.omega_r();
        let kt = self.kappa_tot();
        2.0 * self.kappa_int() * self.kappa_ext() / (kt * kt + 4.0 * detuning * detuning)
    }

    /// Mean intracavity photon number for the given drive.
    pub fn photon_number(&self, drive: &DriveCondition) -> f64 {
        let detuning = angular(drive.probe_frequency) - self.omega_r();
        let kt = self.kappa_tot();
        let omega_r = self.omega_r();
        2.0 * self.kappa_ext() / (kt * kt + 4.0 * detuning * detuning) * drive.input_power / (HBAR * omega_r)
    }

    /// Half-power bandwidth measured up from the bottom of the dip,
    /// `2δf'`, in Hz.
    pub fn half_power_bandwidth_internal(&self) -> Result<f64> {
        let ratio = self.kappa_int() / self.kappa_tot();
        let radicand = 1.0 - 2.0 * ratio * ratio;
        if radicand <= 0.0 {
            return Err(Error::UndercoupledDegenerate { ratio });
        }
        Ok(self.kappa_int() / radicand.sqrt() / TWO_PI)
    }

    /// Width between the |S21|² = 1/2 points, `2δf''`, in Hz.
    pub fn half_power_bandwidth_external(&self) -> f64 {
        let ke = self.kappa_ext();
        ke * (1.0 + 2.0 * self.kappa_int() / ke).sqrt() / TWO_PI
    }
}

/// Attenuation, electrical delay and phase offset of the measurement line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineCalibration {
    pub amplitude: f64,
    /// Electrical delay τ, s.
    pub delay: f64,
    /// Phase offset α, rad.
    pub phase_offset: f64,
}

impl Default for LineCalibration {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl LineCalibration {
    pub const IDENTITY: Self = Self {
        amplitude: 1.0,
        delay: 0.0,
        phase_offset: 0.0,
    };

    pub fn new(amplitude: f64, delay: f64, phase_offset: f64) -> Result<Self> {
        ensure(
            amplitude.is_finite() && amplitude > 0.0,
            "amplitude",
            "must be positive",
        )?;
        ensure(delay.is_finite(), "delay", "must be finite")?;
        ensure(phase_offset.is_finite(), "phase_offset", "must be finite")?;
        Ok(Self {
            amplitude,
            delay,
            phase_offset,
        })
    }

    /// `A exp(−i(2πfτ + α))`.
    pub fn factor(&self, f: f64) -> Complex64 {
        Complex64::from_polar(self.amplitude, -(TWO_PI * f * self.delay + self.phase_offset))
    }
}

/// Microwave drive: input power at the device (W) and probe frequency (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveCondition {
    pub input_power: f64,
    pub probe_frequency: f64,
}

impl DriveCondition {
    pub fn new(input_power: f64, probe_frequency: f64) -> Result<Self> {
        ensure(
            input_power.is_finite() && input_power > 0.0,
            "input_power",
            "must be positive",
        )?;
        ensure(
            probe_frequency.is_finite() && probe_frequency > 0.0,
            "probe_frequency",
            "must be positive",
        )?;
        Ok(Self {
            input_power,
            probe_frequency,
        })
    }

    pub fn on_resonance(mode: &ResonatorMode, input_power: f64) -> Result<Self> {
        Self::new(input_power, mode.f_r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::dbm_to_watts;
    use proptest::prelude::*;

    fn mode1() -> ResonatorMode {
        ResonatorMode::new(2.418e9, 70134.0, 3226.0).unwrap()
    }

    #[test]
    fn ideal_on_resonance_equal_q() {
        let m = ResonatorMode::new(5e9, 1e4, 1e4).unwrap();
        let s = m.s21_ideal(5e9);
        assert!((s - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((m.s11_magnitude_sq(5e9) - 0.25).abs() < 1e-15);
        assert!((m.dissipated_fraction(5e9) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ideal_at_half_linewidth() {
        let m = ResonatorMode::new(5e9, 1e4, 1e4).unwrap();
        let f = m.f_r + m.f_r / (2.0 * m.q_tot());
        let s = m.s21_ideal(f);
        assert!((s - Complex64::new(0.75, 0.25)).norm() < 1e-12);
    }

    #[test]
    fn decoupled_resonator_is_transparent() {
        let m = ResonatorMode::new(5e9, 1e4, 1e15).unwrap();
        for f in [4.9e9, 5e9, 5.0001e9] {
            assert!((m.s21_ideal(f) - Complex64::new(1.0, 0.0)).norm() < 1e-10);
            assert!(m.s11_magnitude_sq(f) < 1e-20);
            assert!(m.dissipated_fraction(f) < 1e-10);
        }
    }

    #[test]
    fn s11_vanishes_far_off_resonance() {
        assert!(mode1().s11_magnitude_sq(1e15) < 1e-12);
    }

    #[test]
    fn first_mode_depth() {
        let m = mode1();
        let line = LineCalibration::IDENTITY;
        let depth = m.s21_full(&line, m.f_r).norm();
        // Q_tot = 1/(1/70134 + 1/3226) = 3084.14.
        assert!((m.q_tot() - 3084.14).abs() < 0.01, "{}", m.q_tot());
        assert!((depth - (1.0 - 3084.14 / 3226.0)).abs() < 1e-5);
        assert!((depth - 0.0440).abs() < 5e-5);
    }

    #[test]
    fn line_phase_pi_flips_sign_off_resonance() {
        let m = mode1();
        let line = LineCalibration::new(0.8, 0.0, std::f64::consts::PI).unwrap();
        let s = m.s21_full(&line, m.f_r * 1.5);
        assert!((s - Complex64::new(-0.8, 0.0)).norm() < 1e-3);
    }

    #[test]
    fn photon_number_table_modes() {
        let cases = [
            (2.418e9, 70134.0, 3226.0, -77.0, 4.83e6),
            (4.884e9, 76771.0, 499.0, -72.0, 6.25e5),
        ];
        for (f, qi, qe, p, expected) in cases {
            let m = ResonatorMode::new(f, qi, qe).unwrap();
            let n = m.photon_number(&DriveCondition::on_resonance(&m, dbm_to_watts(p)).unwrap());
            assert!((n / expected - 1.0).abs() < 0.02, "{f}: {n}");
        }
    }

    #[test]
    fn photon_number_detuned_far_is_zero() {
        let m = mode1();
        let n = m.photon_number(&DriveCondition::new(1e-9, 1e12).unwrap());
        assert!(n < 1e-3 * m.photon_number(&DriveCondition::on_resonance(&m, 1e-9).unwrap()) * 1e-3);
    }

    #[test]
    fn table_kappa_columns_read_as_mega_radians_per_second() {
        let m = mode1();
        assert!((m.kappa_int() / 1e6 - 0.217).abs() < 0.001);
        assert!((m.kappa_ext() / 1e6 - 4.71).abs() < 0.001);
    }

    #[test]
    fn internal_bandwidth_first_mode() {
        let m = mode1();
        let bw = m.half_power_bandwidth_internal().unwrap();
        let ratio = m.kappa_int() / m.kappa_tot();
        let direct = m.kappa_int() / TWO_PI / (1.0 - 2.0 * ratio * ratio).sqrt();
        assert!((bw - direct).abs() < 1e-9 * direct);
        assert!((bw - 34.5e3).abs() < 0.2e3, "{bw}");
        // The 0.1 % correction over kappa_int/2pi.
        assert!(bw / (m.kappa_int() / TWO_PI) - 1.0 < 2e-3);
    }

    #[test]
    fn internal_bandwidth_equal_rates_and_boundary() {
        let m = ResonatorMode::new(5e9, 1e4, 1e4).unwrap();
        let bw = m.half_power_bandwidth_internal().unwrap();
        assert!((bw * TWO_PI - m.kappa_int() * 2f64.sqrt()).abs() < 1e-9 * bw);

        // kappa_int = kappa_tot/sqrt(2)  <=>  Q_ext = Q_int (sqrt2 + 1)
        let m = ResonatorMode::new(5e9, 1e4, 1e4 * (1.0 + 2f64.sqrt()) * 1.001).unwrap();
        assert!(matches!(
            m.half_power_bandwidth_internal(),
            Err(Error::UndercoupledDegenerate { .. })
        ));
    }

    #[test]
    fn internal_bandwidth_is_the_three_db_width_from_the_bottom() {
        let m = ResonatorMode::new(7e9, 35000.0, 480.0).unwrap();
        let bw = m.half_power_bandwidth_internal().unwrap();
        let bottom = m.s21_ideal(m.f_r).norm_sqr();
        let edge = m.s21_ideal(m.f_r + 0.5 * bw).norm_sqr();
        assert!((edge / bottom - 2.0).abs() < 1e-9);
    }

    #[test]
    fn external_bandwidth_cases() {
        let m = ResonatorMode::new(5e9, 1e30, 1e4).unwrap();
        assert!((m.half_power_bandwidth_external() - m.kappa_ext() / TWO_PI).abs() < 1e-12 * m.kappa_ext());
        let m = ResonatorMode::new(5e9, 1e4, 1e4).unwrap();
        assert!((m.half_power_bandwidth_external() * TWO_PI - m.kappa_ext() * 3f64.sqrt()).abs() < 1e-6);
        let bw = mode1().half_power_bandwidth_external();
        // 2.418 GHz/3226 · sqrt(1 + 2·3226/70134), evaluated by hand.
        assert!((bw / 1e6 - 0.783_253).abs() < 1e-6, "{bw}");
        // The exact |S21|^2 = 1/2 width is sqrt(kappa_tot^2 - 2 kappa_int^2);
        // the closed form drops a kappa_int^2 term.
        let m = mode1();
        let exact = (m.kappa_tot().powi(2) - 2.0 * m.kappa_int().powi(2)).sqrt() / TWO_PI;
        let s = m.s21_ideal(m.f_r + 0.5 * exact).norm_sqr();
        assert!((s - 0.5).abs() < 1e-9);
        let r = m.kappa_int() / m.kappa_ext();
        assert!((bw / exact - 1.0).abs() < r * r);
    }

    #[test]
    fn asymmetric_constructor_preserves_effective_q() {
        let m = ResonatorMode::with_asymmetry(7.061e9, 34477.0, 480.0, 0.3).unwrap();
        assert!((m.q_ext_effective() - 480.0).abs() < 1e-9);
        assert!((m.phi() - 0.3).abs() < 1e-12);
        let inv_qi = 1.0 / m.q_tot() - m.q_ext_complex().inv().re;
        assert!((1.0 / inv_qi - 34477.0).abs() < 1e-6);
    }

    fn arb_mode() -> impl Strategy<Value = ResonatorMode> {
        (1e9f64..2e10, 2.0f64..6.0, 1.5f64..5.5)
            .prop_map(|(f, li, le)| ResonatorMode::new(f, 10f64.powf(li), 10f64.powf(le)).unwrap())
    }

    proptest! {
        #[test]
        fn full_model_reduces_to_ideal(m in arb_mode(), offsets in proptest::collection::vec(-20.0f64..20.0, 100)) {
            let line = LineCalibration::IDENTITY;
            for x in offsets {
                let f = m.f_r * (1.0 + x / m.q_tot());
                let a = m.s21_full(&line, f);
                let b = m.s21_ideal(f);
                prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300) + 1e-15);
            }
        }

        #[test]
        fn energy_bookkeeping(m in arb_mode(), x in -50.0f64..50.0) {
            let f = m.f_r * (1.0 + x / m.q_tot());
            let total = m.s11_magnitude_sq(f) + m.s21_ideal(f).norm_sqr() + m.dissipated_fraction(f);
            prop_assert!((total - 1.0).abs() < 1e-10);
        }

        #[test]
        fn photon_number_monotone_and_peaked(m in arb_mode(), p in 1e-15f64..1e-6, x in 0.01f64..10.0) {
            let on = m.photon_number(&DriveCondition::on_resonance(&m, p).unwrap());
            let more = m.photon_number(&DriveCondition::on_resonance(&m, 2.0 * p).unwrap());
            let off = m.photon_number(&DriveCondition::new(p, m.f_r * (1.0 + x / m.q_tot())).unwrap());
            prop_assert!(more > on);
            prop_assert!(off < on);
        }
    }
}
