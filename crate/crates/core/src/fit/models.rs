//! The concrete fit models and their starting-point heuristics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use super::{
    need_points, positive_sigma, solve_least_squares, Bound, ComplexTrace, FitFlag, FitModelSpec, FitResult,
    GuessPolicy, LmOptions, Model, ModelKind, ParamSpec, PowerSeries, SaturationSeries,
};
use crate::error::{invalid, Error, Result};
use crate::resonator::{LineCalibration, ResonatorMode};
use crate::units::TWO_PI;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Indices of the outer `fraction` of points on each side.
fn edge_indices(n: usize, fraction: f64) -> impl Iterator<Item = usize> {
    let k = ((n as f64 * fraction).round() as usize).clamp(1, n / 2);
    (0..k).chain(n - k..n)
}

/// Ordinary least squares for `columns · c ≈ y` with per-row weights.
fn linear_lsq(columns: &[Vec<f64>], y: &[f64], w: &[f64]) -> Option<(Vec<f64>, f64)> {
    let m = y.len();
    let k = columns.len();
    let a = DMatrix::from_fn(m, k, |i, j| columns[j][i] * w[i]);
    let b = DVector::from_fn(m, |i, _| y[i] * w[i]);
    let coef = a.clone().svd(true, true).solve(&b, 1e-14).ok()?;
    let resid = &a * &coef - b;
    Some((coef.iter().cloned().collect(), resid.norm_squared()))
}

fn logspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

fn wrap_phase(a: f64) -> f64 {
    let w = a.rem_euclid(TWO_PI);
    if w > PI {
        w - TWO_PI
    } else {
        w
    }
}

fn weights(sigma: Option<&Vec<f64>>, n: usize, fallback: f64) -> Vec<f64> {
    match sigma {
        Some(s) => s.iter().map(|v| 1.0 / v).collect(),
        None => vec![1.0 / fallback; n],
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

// ---------------------------------------------------------------------------
// Lorentzian dip in |S21|²

/// B(1 − D/(1 + 4(f − f₀)²/w²)).
pub fn lorentzian_dip_model(f: f64, f0: f64, width: f64, depth: f64, baseline: f64) -> f64 {
    let z = 2.0 * (f - f0) / width;
    baseline * (1.0 - depth / (1.0 + z * z))
}

/// The dip with its baseline held at the off-resonant level.
struct DipModel<'a> {
    f: &'a [f64],
    y: &'a [f64],
    baseline: f64,
}

impl Model for DipModel<'_> {
    fn n_params(&self) -> usize {
        3
    }

    fn n_residuals(&self) -> usize {
        self.f.len()
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        for ((o, &f), &y) in out.iter_mut().zip(self.f).zip(self.y) {
            *o = (lorentzian_dip_model(f, x[0], x[1], x[2], self.baseline) - y) / self.baseline;
        }
    }

    fn jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) -> bool {
        let [f0, w, d] = [x[0], x[1], x[2]];
        for i in 0..self.f.len() {
            let z = 2.0 * (self.f[i] - f0) / w;
            let l = 1.0 / (1.0 + z * z);
            jac[(i, 0)] = -4.0 * d * z * l * l / w;
            jac[(i, 1)] = -2.0 * d * z * z * l * l / w;
            jac[(i, 2)] = -l;
        }
        true
    }
}

/// Outcome of [`fit_lorentzian_dip`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianDip {
    /// Dip center, Hz.
    pub f_r: f64,
    /// Full width at half depth of the Lorentzian, Hz; f_r/width is Q_tot.
    pub width: f64,
    /// Fractional depth D of |S21|².
    pub depth: f64,
    pub baseline: f64,
    /// Full width between the points where |S21|² is twice its minimum, Hz.
    /// Undefined (NaN) unless D > ½.
    pub width_from_bottom: f64,
    /// f_r / `width_from_bottom`: the internal Q under an overcoupled reading.
    pub q_int: f64,
    pub fit: FitResult,
}

impl LorentzianDip {
    pub fn model(&self, f: f64) -> f64 {
        lorentzian_dip_model(f, self.f_r, self.width, self.depth, self.baseline)
    }
}

/// Fits |S21|² around the bottom of its dip to an inverted Lorentzian.
///
/// Heuristic: the baseline is the median |S21|² of the outer 10 % of the
/// trace on each side and stays fixed. The minimum and the points where |S21|²
/// first doubles either side of it are located on a 5-point running mean;
/// only points within three of those bottom half-widths of the minimum are
/// fitted. Locally the dip of an asymmetric hanger is still Lorentzian, so the
/// width between the doubling points tracks Q_int even when the full line
/// shape is skewed. For dips shallower than half the baseline the half-depth
/// crossings set the window instead and Q_int is reported as NaN.
pub fn fit_lorentzian_dip(trace: &ComplexTrace) -> Result<LorentzianDip> {
    trace.validate()?;
    need_points(trace.len(), 8)?;
    let f = &trace.frequencies;
    let y = trace.magnitude_sq();
    let n = y.len();

    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(n);
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let (i0, &ymin) = smooth
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    if i0 == 0 || i0 == n - 1 {
        return Err(Error::NoDipFound);
    }
    let mut edges: Vec<f64> = edge_indices(n, 0.1).map(|i| y[i]).collect();
    let b0 = median(&mut edges);
    let mut dev: Vec<f64> = edges.iter().map(|v| (v - b0).abs()).collect();
    let noise = 1.4826 * median(&mut dev);
    if !(b0 - ymin > (5.0 * noise).max(1e-9 * b0)) {
        return Err(Error::NoDipFound);
    }
    let d0 = (1.0 - ymin / b0).clamp(1e-6, 1.0 - 1e-9);
    let deep = d0 > 0.5;
    let level = if deep { 2.0 * ymin } else { b0 * (1.0 - 0.5 * d0) };

    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = i0;
        for i in range {
            if smooth[i] >= level {
                let t = (level - smooth[prev]) / (smooth[i] - smooth[prev]);
                return Some(f[prev] + t * (f[i] - f[prev]));
            }
            prev = i;
        }
        None
    };
    let half_width = match (crossing(&mut (0..i0).rev()), crossing(&mut (i0 + 1..n))) {
        (Some(l), Some(r)) => 0.5 * (r - l),
        (Some(l), None) => f[i0] - l,
        (None, Some(r)) => r - f[i0],
        (None, None) => return Err(Error::NoDipFound),
    };
    if !(half_width > 0.0) {
        return Err(Error::NoDipFound);
    }

    let reach = 3.0 * half_width;
    let mut lo = i0;
    let mut hi = i0;
    while lo > 0 && (f[i0] - f[lo - 1] <= reach || hi - lo < 6) {
        lo -= 1;
    }
    while hi + 1 < n && (f[hi + 1] - f[i0] <= reach || hi - lo < 6) {
        hi += 1;
    }
    need_points(hi - lo + 1, 4)?;
    let fw = &f[lo..=hi];
    let yw = &y[lo..=hi];

    let w0 = if deep {
        2.0 * half_width / ((1.0 - d0) / (2.0 * d0 - 1.0)).sqrt()
    } else {
        2.0 * half_width
    };
    let spec = FitModelSpec {
        model: ModelKind::LorentzianDip,
        parameters: vec![
            ParamSpec::new(
                "f_r",
                Bound::Free {
                    offset: f[i0],
                    scale: half_width,
                },
            ),
            ParamSpec::new("width", Bound::Positive),
            ParamSpec::new("depth", Bound::Interval { lower: 0.0, upper: 1.0 }),
        ],
        guess: GuessPolicy::Heuristic,
    };
    let model = DipModel {
        f: fw,
        y: yw,
        baseline: b0,
    };
    let mut fit = solve_least_squares(&spec, &model, &[f[i0], w0, d0], &LmOptions::default())?;

    let (f_r, width, depth) = (fit.value("f_r"), fit.value("width"), fit.value("depth"));
    let width_from_bottom = if depth > 0.5 {
        width * ((1.0 - depth) / (2.0 * depth - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    let q_int = f_r / width_from_bottom;
    fit.derive("baseline", b0);
    fit.derive("q_tot", f_r / width);
    fit.derive("width_from_bottom", width_from_bottom);
    fit.derive("q_int", q_int);
    Ok(LorentzianDip {
        f_r,
        width,
        depth,
        baseline: b0,
        width_from_bottom,
        q_int,
        fit,
    })
}

// ---------------------------------------------------------------------------
// Full asymmetric S21 with line delay

/// Parameter order of the full model.
pub const FULL_S21_PARAMS: [&str; 7] = [
    "f_r",
    "q_tot",
    "q_c_magnitude",
    "phi",
    "amplitude",
    "delay",
    "phase_offset",
];

/// A e^{−i(2πfτ + α)} [1 − (Q/|Q_c|) e^{iφ} / (1 + 2iQ(f/f_r − 1))].
pub fn full_s21_model(f: f64, x: &[f64]) -> Complex64 {
    let (fr, q, qm, phi, a, tau, alpha) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6]);
    let line = Complex64::from_polar(a, -(TWO_PI * f * tau + alpha));
    let c = Complex64::from_polar(q / qm, phi);
    let den = Complex64::new(1.0, 2.0 * q * (f / fr - 1.0));
    line * (1.0 - c / den)
}

/// The solver sees the phase at the trace center, α_c = α + 2πf_cτ, rather
/// than α itself; otherwise τ and α are nearly collinear.
struct S21Model<'a> {
    f: &'a [f64],
    z: &'a [Complex64],
    w: Vec<f64>,
    f_center: f64,
}

impl S21Model<'_> {
    fn to_physical(&self, x: &[f64]) -> [f64; 7] {
        [x[0], x[1], x[2], x[3], x[4], x[5], x[6] - TWO_PI * self.f_center * x[5]]
    }
}

impl Model for S21Model<'_> {
    fn n_params(&self) -> usize {
        7
    }

    fn n_residuals(&self) -> usize {
        2 * self.f.len()
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        let p = self.to_physical(x);
        for i in 0..self.f.len() {
            let d = (full_s21_model(self.f[i], &p) - self.z[i]) * self.w[i];
            out[2 * i] = d.re;
            out[2 * i + 1] = d.im;
        }
    }

    fn jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) -> bool {
        let (fr, q, qm, phi, a, tau, alpha_c) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6]);
        let i_unit = Complex64::i();
        let c = Complex64::from_polar(q / qm, phi);
        for k in 0..self.f.len() {
            let f = self.f[k];
            let line = Complex64::from_polar(a, -(TWO_PI * (f - self.f_center) * tau + alpha_c));
            let den = Complex64::new(1.0, 2.0 * q * (f / fr - 1.0));
            let r = 1.0 - c / den;
            let s = line * r;
            let den2 = den * den;
            let cols = [
                line * c * Complex64::new(0.0, -2.0 * q * f / (fr * fr)) / den2,
                -line * c / (den2 * q),
                line * c / (den * qm),
                -line * i_unit * c / den,
                s / a,
                -i_unit * TWO_PI * (f - self.f_center) * s,
                -i_unit * s,
            ];
            for (j, d) in cols.iter().enumerate() {
                jac[(2 * k, j)] = d.re * self.w[k];
                jac[(2 * k + 1, j)] = d.im * self.w[k];
            }
        }
        true
    }
}

/// Optional starting point for [`fit_full_s21`], in physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullS21Guess {
    pub f_r: f64,
    pub q_tot: f64,
    pub q_c_magnitude: f64,
    pub phi: f64,
    pub amplitude: f64,
    pub delay: f64,
    pub phase_offset: f64,
}

impl FullS21Guess {
    pub fn from_mode(mode: &ResonatorMode, line: &LineCalibration) -> Self {
        Self {
            f_r: mode.f_r,
            q_tot: mode.q_tot(),
            q_c_magnitude: mode.q_ext_complex().norm(),
            phi: mode.phi(),
            amplitude: line.amplitude,
            delay: line.delay,
            phase_offset: line.phase_offset,
        }
    }

    /// Data-driven start.
    ///
    /// 1. A from the median |S21| of the outer 10 % of points on each side.
    /// 2. τ from the mean unwrapped-phase slope of those two edge segments.
    /// 3. α from the mean phase of the edge points once τ is removed.
    /// 4. With the line removed, 1 − S21 is a Lorentzian of height Q/|Q_c|
    ///    centred on f_r: its peak gives f_r, Q/|Q_c| and φ, its 3-dB
    ///    crossings give Q.
    pub fn heuristic(trace: &ComplexTrace) -> Result<Self> {
        let f = &trace.frequencies;
        let z = &trace.values;
        let n = f.len();
        need_points(n, 16)?;
        let mut mags: Vec<f64> = edge_indices(n, 0.1).map(|i| z[i].norm()).collect();
        let amplitude = median(&mut mags);

        let mut phase = Vec::with_capacity(n);
        let mut acc = z[0].arg();
        phase.push(acc);
        for i in 1..n {
            let step = wrap_phase(z[i].arg() - z[i - 1].arg());
            acc += step;
            phase.push(acc);
        }
        let k = ((n as f64 * 0.1).round() as usize).clamp(3, n / 2);
        let slope = |range: std::ops::Range<usize>| {
            let fs = &f[range.clone()];
            let ps = &phase[range];
            let fm = fs.iter().sum::<f64>() / fs.len() as f64;
            let pm = ps.iter().sum::<f64>() / ps.len() as f64;
            let num: f64 = fs.iter().zip(ps).map(|(a, b)| (a - fm) * (b - pm)).sum();
            let den: f64 = fs.iter().map(|a| (a - fm).powi(2)).sum();
            num / den
        };
        let delay = -0.5 * (slope(0..k) + slope(n - k..n)) / TWO_PI;

        let derotated: Vec<Complex64> = f
            .iter()
            .zip(z)
            .map(|(&fi, &zi)| zi * Complex64::from_polar(1.0, TWO_PI * fi * delay))
            .collect();
        let edge_mean: Complex64 = edge_indices(n, 0.1).map(|i| derotated[i] / derotated[i].norm()).sum();
        let phase_offset = -edge_mean.arg();
        let rot = Complex64::from_polar(1.0 / amplitude, phase_offset);
        let dev: Vec<Complex64> = derotated.iter().map(|&d| 1.0 - d * rot).collect();
        let height: Vec<f64> = dev.iter().map(|d| d.norm()).collect();

        let (i0, &peak) = height
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        if i0 == 0 || i0 == n - 1 {
            return Err(Error::NoDipFound);
        }
        let level = peak / std::f64::consts::SQRT_2;
        let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
            let mut prev = i0;
            for i in range {
                if height[i] <= level {
                    let t = (height[prev] - level) / (height[prev] - height[i]);
                    return Some(f[prev] + t * (f[i] - f[prev]));
                }
                prev = i;
            }
            None
        };
        let fwhm = match (cross(&mut (0..i0).rev()), cross(&mut (i0 + 1..n))) {
            (Some(l), Some(r)) => r - l,
            (Some(l), None) => 2.0 * (f[i0] - l),
            (None, Some(r)) => 2.0 * (r - f[i0]),
            (None, None) => return Err(Error::NoDipFound),
        };
        let f_r = f[i0];
        let q_tot = f_r / fwhm.max(f[1] - f[0]);
        Ok(Self {
            f_r,
            q_tot,
            q_c_magnitude: q_tot / peak.min(0.999_999),
            phi: dev[i0].arg().clamp(-1.2, 1.2),
            amplitude,
            delay,
            phase_offset,
        })
    }
}

/// Fits the full asymmetric hanger model to complex data, stacking real and
/// imaginary residuals.
///
/// Reports f_r, Q_tot, |Q_c|, φ, A, τ, α as parameters and Q_ext,
/// Q_ext real/imaginary parts and Q_int as derived values, where
/// Q_c = |Q_c| e^{−iφ}, Q_ext = 1/Re(1/Q_c) and 1/Q_int = 1/Q_tot − 1/Q_ext.
pub fn fit_full_s21(trace: &ComplexTrace, initial: Option<&FullS21Guess>) -> Result<FitResult> {
    trace.validate()?;
    let g = match initial {
        Some(g) => *g,
        None => FullS21Guess::heuristic(trace)?,
    };
    let f = &trace.frequencies;
    let n = f.len();
    let f_center = 0.5 * (f[0] + f[n - 1]);
    let span = f[n - 1] - f[0];
    let w = weights(trace.noise_std.as_ref(), n, g.amplitude);
    let model = S21Model {
        f,
        z: &trace.values,
        w,
        f_center,
    };
    let alpha_c = g.phase_offset + TWO_PI * f_center * g.delay;
    let spec = FitModelSpec {
        model: ModelKind::FullS21,
        parameters: vec![
            ParamSpec::new(
                "f_r",
                Bound::Free {
                    offset: g.f_r,
                    scale: g.f_r / g.q_tot,
                },
            ),
            ParamSpec::new("q_tot", Bound::Positive),
            ParamSpec::new("q_c_magnitude", Bound::Positive),
            ParamSpec::new(
                "phi",
                Bound::Interval {
                    lower: -FRAC_PI_2,
                    upper: FRAC_PI_2,
                },
            ),
            ParamSpec::new("amplitude", Bound::Positive),
            ParamSpec::new(
                "delay",
                Bound::Free {
                    offset: 0.0,
                    scale: 1.0 / (TWO_PI * span),
                },
            ),
            ParamSpec::new("phase_at_center", Bound::UNIT),
        ],
        guess: match initial {
            Some(_) => GuessPolicy::Supplied(vec![
                g.f_r,
                g.q_tot,
                g.q_c_magnitude,
                g.phi,
                g.amplitude,
                g.delay,
                g.phase_offset,
            ]),
            None => GuessPolicy::Heuristic,
        },
    };
    let start = [
        g.f_r,
        g.q_tot,
        g.q_c_magnitude,
        g.phi,
        g.amplitude,
        g.delay,
        wrap_phase(alpha_c),
    ];
    let mut fit = solve_least_squares(&spec, &model, &start, &LmOptions::default())?;

    // α = α_c − 2πf_cτ, with the covariance carried through the same map.
    let k = TWO_PI * f_center;
    let tau = fit.parameters[5].value;
    let alpha_c = fit.parameters[6].value;
    let c = &fit.covariance;
    let var_tau = c[5][5];
    let var_alpha = c[6][6] - 2.0 * k * c[5][6] + k * k * var_tau;
    let corr = c[5][6] / (c[5][5] * c[6][6]).sqrt();
    let mut cov = c.clone();
    for j in 0..7 {
        let v = c[6][j] - k * c[5][j];
        cov[6][j] = v;
        cov[j][6] = v;
    }
    cov[6][6] = var_alpha;
    fit.covariance = cov;
    fit.parameters[6].name = "phase_offset".into();
    fit.parameters[6].value = wrap_phase(alpha_c - k * tau);
    fit.parameters[6].std_error = var_alpha.max(0.0).sqrt();
    for flag in fit.flags.iter_mut() {
        if let FitFlag::Unidentifiable { parameter } | FitFlag::AtBoundary { parameter } = flag {
            if parameter == "phase_at_center" {
                *parameter = "phase_offset".into();
            }
        }
    }
    if corr.abs() > 0.999 || var_tau.sqrt() * TWO_PI * span > 0.5 {
        fit.flag(FitFlag::IllConditioned {
            detail: "delay and phase offset are not separable over this frequency span".into(),
        });
    }

    let q = fit.value("q_tot");
    let qm = fit.value("q_c_magnitude");
    let phi = fit.value("phi");
    let q_ext = qm / phi.cos();
    let inv_qi = 1.0 / q - 1.0 / q_ext;
    fit.derive("q_ext", q_ext);
    fit.derive("q_ext_real", qm * phi.cos());
    fit.derive("q_ext_imag", -qm * phi.sin());
    if inv_qi > 0.0 {
        fit.derive("q_int", 1.0 / inv_qi);
    } else {
        fit.derive("q_int", f64::NAN);
        fit.flag(FitFlag::NegativeInternalLoss);
    }
    Ok(fit)
}

/// Evaluates a [`fit_full_s21`] result at `f`.
pub fn full_s21_from_result(fit: &FitResult, f: f64) -> Complex64 {
    let x: Vec<f64> = FULL_S21_PARAMS.iter().map(|n| fit.value(n)).collect();
    full_s21_model(f, &x)
}

// ---------------------------------------------------------------------------
// Optical power response

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseQModel {
    /// 1/Q = γP + 1/Q₀.
    Linear,
    /// 1/Q = γ₁P + γ₂(1 − e^{−γ₃P}) + 1/Q₀.
    LinearPlusSaturation,
}

/// 1/Q at power `p` for parameters in the order the fit reports them.
pub fn inverse_q_response(model: InverseQModel, x: &[f64], p: f64) -> f64 {
    match model {
        InverseQModel::Linear => x[0] * p + x[1],
        InverseQModel::LinearPlusSaturation => x[0] * p + x[1] * (1.0 - (-x[2] * p).exp()) + x[3],
    }
}

/// δ₁P − δ₂(1 − e^{−δ₃P}).
pub fn frequency_response(delta1: f64, delta2: f64, delta3: f64, p: f64) -> f64 {
    delta1 * p - delta2 * (1.0 - (-delta3 * p).exp())
}

struct CurveModel<'a, F, J> {
    x: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
    n_params: usize,
    eval: F,
    grad: J,
}

impl<F, J> Model for CurveModel<'_, F, J>
where
    F: Fn(&[f64], f64) -> f64,
    J: Fn(&[f64], f64, &mut [f64]),
{
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn n_residuals(&self) -> usize {
        self.x.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = ((self.eval)(p, self.x[i]) - self.y[i]) * self.w[i];
        }
    }

    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) -> bool {
        let mut g = vec![0.0; self.n_params];
        for i in 0..self.x.len() {
            (self.grad)(p, self.x[i], &mut g);
            for j in 0..self.n_params {
                jac[(i, j)] = g[j] * self.w[i];
            }
        }
        true
    }
}

fn saturating_grad(x: &[f64], p: f64, g: &mut [f64]) {
    let e = (-x[2] * p).exp();
    g[0] = p;
    g[1] = 1.0 - e;
    g[2] = x[1] * p * e;
    g[3] = 1.0;
}

/// Fits 1/Q against optical power.
///
/// Both models are linear once γ₃ is fixed, so the start scans γ₃ over
/// 0.3–300 inverse full-scale powers and solves the linear problem at each.
pub fn fit_power_inverse_q(series: &PowerSeries, model: InverseQModel) -> Result<FitResult> {
    series.validate()?;
    positive_sigma("inv_q_sigma", &series.inv_q_sigma)?;
    let p = &series.p_opt;
    let y = &series.inv_q;
    let n = p.len();
    let p_max = p.last().copied().unwrap_or(0.0);
    let y_scale = max_abs(y).max(f64::MIN_POSITIVE);
    let w = weights(series.inv_q_sigma.as_ref(), n, y_scale);
    let slope_scale = y_scale / p_max;

    match model {
        InverseQModel::Linear => {
            need_points(n, 3)?;
            if !(p_max > 0.0) {
                return Err(invalid("p_opt", "needs at least one positive power"));
            }
            let (c, _) =
                linear_lsq(&[p.clone(), vec![1.0; n]], y, &w).ok_or(Error::SingularJacobian { rank: 0, params: 2 })?;
            let spec = FitModelSpec {
                model: ModelKind::InverseQLinear,
                parameters: vec![
                    ParamSpec::new(
                        "gamma",
                        Bound::Free {
                            offset: 0.0,
                            scale: slope_scale,
                        },
                    ),
                    ParamSpec::new(
                        "inv_q0",
                        Bound::Free {
                            offset: 0.0,
                            scale: y_scale,
                        },
                    ),
                ],
                guess: GuessPolicy::Heuristic,
            };
            let m = CurveModel {
                x: p,
                y,
                w,
                n_params: 2,
                eval: |x: &[f64], p: f64| inverse_q_response(InverseQModel::Linear, x, p),
                grad: |_x: &[f64], p: f64, g: &mut [f64]| {
                    g[0] = p;
                    g[1] = 1.0;
                },
            };
            let mut fit = solve_least_squares(&spec, &m, &c, &LmOptions::default())?;
            fit.derive("q0", 1.0 / fit.value("inv_q0"));
            Ok(fit)
        }
        InverseQModel::LinearPlusSaturation => {
            need_points(n, 5)?;
            if !(p_max > 0.0) {
                return Err(invalid("p_opt", "needs at least one positive power"));
            }
            let mut best: Option<(f64, [f64; 4])> = None;
            for g3 in logspace(0.3 / p_max, 300.0 / p_max, 41) {
                let sat: Vec<f64> = p.iter().map(|&v| 1.0 - (-g3 * v).exp()).collect();
                if let Some((c, sse)) = linear_lsq(&[p.clone(), sat, vec![1.0; n]], y, &w) {
                    if best.map_or(true, |(b, _)| sse < b) {
                        best = Some((sse, [c[0], c[1], g3, c[2]]));
                    }
                }
            }
            let (_, start) = best.ok_or(Error::SingularJacobian { rank: 0, params: 4 })?;
            let spec = FitModelSpec {
                model: ModelKind::InverseQSaturating,
                parameters: vec![
                    ParamSpec::new(
                        "gamma1",
                        Bound::Free {
                            offset: 0.0,
                            scale: slope_scale,
                        },
                    ),
                    ParamSpec::new(
                        "gamma2",
                        Bound::Free {
                            offset: 0.0,
                            scale: y_scale,
                        },
                    ),
                    ParamSpec::new("gamma3", Bound::Positive),
                    ParamSpec::new(
                        "inv_q0",
                        Bound::Free {
                            offset: 0.0,
                            scale: y_scale,
                        },
                    ),
                ],
                guess: GuessPolicy::Heuristic,
            };
            let m = CurveModel {
                x: p,
                y,
                w,
                n_params: 4,
                eval: |x: &[f64], p: f64| inverse_q_response(InverseQModel::LinearPlusSaturation, x, p),
                grad: saturating_grad,
            };
            let mut fit = solve_least_squares(&spec, &m, &start, &LmOptions::default())?;
            fit.derive("q0", 1.0 / fit.value("inv_q0"));
            Ok(fit)
        }
    }
}

/// Fits Δf_r/f_r = δ₁P − δ₂(1 − e^{−δ₃P}) with δ₂, δ₃ ≥ 0.
///
/// Start: scan δ₃ as in [`fit_power_inverse_q`], solving for (δ₁, δ₂) at
/// each value; a negative δ₂ is replaced by δ₂ = 0 and δ₁ refitted alone.
/// When δ₂ ends on zero the result carries an at-boundary flag.
pub fn fit_power_frequency(series: &PowerSeries) -> Result<FitResult> {
    series.validate()?;
    positive_sigma("dfrac_sigma", &series.dfrac_sigma)?;
    let p = &series.p_opt;
    let y = &series.dfrac;
    let n = p.len();
    need_points(n, 5)?;
    let p_max = p.last().copied().unwrap_or(0.0);
    if !(p_max > 0.0) {
        return Err(invalid("p_opt", "needs at least one positive power"));
    }
    let y_scale = max_abs(y).max(f64::MIN_POSITIVE);
    let w = weights(series.dfrac_sigma.as_ref(), n, y_scale);

    let mut best: Option<(f64, [f64; 3])> = None;
    let mut consider = |sse: f64, x: [f64; 3]| {
        if best.map_or(true, |(b, _)| sse < b) {
            best = Some((sse, x));
        }
    };
    if let Some((c, sse)) = linear_lsq(std::slice::from_ref(p), y, &w) {
        consider(sse, [c[0], 0.0, 3.0 / p_max]);
    }
    for d3 in logspace(0.3 / p_max, 300.0 / p_max, 41) {
        let sat: Vec<f64> = p.iter().map(|&v| -(1.0 - (-d3 * v).exp())).collect();
        if let Some((c, sse)) = linear_lsq(&[p.clone(), sat], y, &w) {
            if c[1] > 0.0 {
                consider(sse, [c[0], c[1], d3]);
            }
        }
    }
    let (_, start) = best.ok_or(Error::SingularJacobian { rank: 0, params: 3 })?;
    let spec = FitModelSpec {
        model: ModelKind::FrequencyResponse,
        parameters: vec![
            ParamSpec::new(
                "delta1",
                Bound::Free {
                    offset: 0.0,
                    scale: y_scale / p_max,
                },
            ),
            ParamSpec::new("delta2", Bound::NonNegative { scale: y_scale }),
            ParamSpec::new("delta3", Bound::Positive),
        ],
        guess: GuessPolicy::Heuristic,
    };
    let m = CurveModel {
        x: p,
        y,
        w,
        n_params: 3,
        eval: |x: &[f64], p: f64| frequency_response(x[0], x[1], x[2], p),
        grad: |x: &[f64], p: f64, g: &mut [f64]| {
            let e = (-x[2] * p).exp();
            g[0] = p;
            g[1] = -(1.0 - e);
            g[2] = -x[1] * p * e;
        },
    };
    let mut fit = solve_least_squares(&spec, &m, &start, &LmOptions::default())?;
    if fit.is_at_boundary("delta2") && !fit.is_unidentifiable("delta3") {
        fit.flag(FitFlag::Unidentifiable {
            parameter: "delta3".into(),
        });
    }
    Ok(fit)
}

// ---------------------------------------------------------------------------
// Microwave saturation of the TLS loss

/// F·δ/√(1 + (n/n_c)^β) + floor.
pub fn tls_saturation_model(f_delta: f64, n_c: f64, beta: f64, floor: f64, n: f64) -> f64 {
    f_delta / (1.0 + (n / n_c).powf(beta)).sqrt() + floor
}

/// Fits 1/Q_int against intracavity photon number.
///
/// Without per-point uncertainties the residuals are relative, (model − y)/y,
/// matching the multiplicative scatter of loss data spread over decades.
/// Start: scan n_c across the data range and β over {0.5, 1, 1.5, 2}; at each
/// pair (F·δ, floor) follows from linear least squares.
pub fn fit_tls_saturation(series: &SaturationSeries) -> Result<FitResult> {
    series.validate()?;
    positive_sigma("sigma", &series.sigma)?;
    let n_cav = &series.n_cav;
    let y = &series.inv_q;
    let n = n_cav.len();
    need_points(n, 6)?;
    let y_max = max_abs(y).max(f64::MIN_POSITIVE);
    let w: Vec<f64> = match &series.sigma {
        Some(s) => s.iter().map(|v| 1.0 / v).collect(),
        None => y.iter().map(|v| 1.0 / v.abs().max(1e-3 * y_max)).collect(),
    };
    let lo = n_cav.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = n_cav.iter().cloned().fold(0.0, f64::max);

    let mut best: Option<(f64, [f64; 4])> = None;
    for beta in [0.5, 1.0, 1.5, 2.0] {
        for nc in logspace(lo, hi, 31) {
            let shape: Vec<f64> = n_cav
                .iter()
                .map(|&v| tls_saturation_model(1.0, nc, beta, 0.0, v))
                .collect();
            if let Some((c, sse)) = linear_lsq(&[shape, vec![1.0; n]], y, &w) {
                if c[0] > 0.0 && best.map_or(true, |(b, _)| sse < b) {
                    let floor = c[1].max(1e-3 * y_max);
                    best = Some((sse, [c[0], nc, beta, floor]));
                }
            }
        }
    }
    let (_, start) = best.ok_or(Error::SingularJacobian { rank: 0, params: 4 })?;
    let spec = FitModelSpec {
        model: ModelKind::TlsSaturation,
        parameters: vec![
            ParamSpec::new("f_delta", Bound::Positive),
            ParamSpec::new("n_c", Bound::Positive),
            ParamSpec::new(
                "beta",
                Bound::Interval {
                    lower: 0.05,
                    upper: 5.0,
                },
            ),
            ParamSpec::new("floor", Bound::NonNegative { scale: y_max }),
        ],
        guess: GuessPolicy::Heuristic,
    };
    let m = CurveModel {
        x: n_cav,
        y,
        w,
        n_params: 4,
        eval: |x: &[f64], n: f64| tls_saturation_model(x[0], x[1], x[2], x[3], n),
        grad: |x: &[f64], n: f64, g: &mut [f64]| {
            let r = n / x[1];
            let s = r.powf(x[2]);
            let d = 1.0 / (1.0 + s).sqrt();
            let ds = -0.5 * d * d * d;
            g[0] = d;
            g[1] = x[0] * ds * (-x[2] * s / x[1]);
            g[2] = x[0] * ds * s * r.ln();
            g[3] = 1.0;
        },
    };
    let mut fit = solve_least_squares(&spec, &m, &start, &LmOptions::default())?;
    let decades = series.decades();
    if decades < 2.0 {
        fit.flag(FitFlag::InsufficientSpan { decades });
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::super::solver::{finite_difference_jacobian, Residuals};
    use super::super::{synth_trace, Bounded, NoiseModel};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(center: f64, half: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| center - half + 2.0 * half * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Relative agreement of analytic and centered-difference Jacobians in
    /// internal coordinates, measured column by column.
    fn check_jacobian<M: Model>(model: &M, bounds: Vec<Bound>, x: &[f64]) {
        let b = Bounded { model, bounds };
        let u: Vec<f64> = b.bounds.iter().zip(x).map(|(b, &v)| b.internal(v).unwrap()).collect();
        let (m, n) = (b.n_residuals(), b.n_params());
        let mut analytic = DMatrix::zeros(m, n);
        let mut numeric = DMatrix::zeros(m, n);
        Residuals::jacobian(&b, &u, &mut analytic);
        finite_difference_jacobian(&b, &u, &mut numeric);
        for j in 0..n {
            let a = analytic.column(j);
            let d = numeric.column(j);
            let err = (a - d).norm() / a.norm().max(1e-300);
            assert!(err < 1e-6, "column {j}: relative error {err:e}");
        }
    }

    #[test]
    fn dip_jacobian_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = grid(7e9, 5e6, 101);
        let y = vec![0.5; f.len()];
        for _ in 0..20 {
            let x = [
                7e9 + rng.random_range(-1e6..1e6),
                rng.random_range(1e5..3e6),
                rng.random_range(0.1..0.99),
            ];
            let bounds = vec![
                Bound::Free {
                    offset: 7e9,
                    scale: 1e6,
                },
                Bound::Positive,
                Bound::Interval { lower: 0.0, upper: 1.0 },
            ];
            let model = DipModel {
                f: &f,
                y: &y,
                baseline: rng.random_range(0.5..1.5),
            };
            check_jacobian(&model, bounds, &x);
        }
    }

    #[test]
    fn full_s21_jacobian_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = grid(7e9, 40e6, 201);
        let z = vec![Complex64::new(0.0, 0.0); f.len()];
        for _ in 0..20 {
            let fr = 7e9 + rng.random_range(-5e6..5e6);
            let q = rng.random_range(200.0..5000.0);
            let x = [
                fr,
                q,
                q * rng.random_range(1.01..3.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.2..2.0),
                rng.random_range(-5e-8..5e-8),
                rng.random_range(-3.0..3.0),
            ];
            let model = S21Model {
                f: &f,
                z: &z,
                w: vec![1.0; f.len()],
                f_center: 7e9,
            };
            let bounds = vec![
                Bound::Free {
                    offset: fr,
                    scale: fr / q,
                },
                Bound::Positive,
                Bound::Positive,
                Bound::Interval {
                    lower: -FRAC_PI_2,
                    upper: FRAC_PI_2,
                },
                Bound::Positive,
                Bound::Free {
                    offset: 0.0,
                    scale: 1.0 / (TWO_PI * 80e6),
                },
                Bound::UNIT,
            ];
            check_jacobian(&model, bounds, &x);
        }
    }

    #[test]
    fn curve_jacobians_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = (0..21).map(|i| i as f64 * 5e-9).collect();
        let y = vec![0.0; p.len()];
        let nc: Vec<f64> = logspace(10.0, 1e5, 25).collect();
        let y_nc = vec![0.0; nc.len()];
        for _ in 0..20 {
            let sat = CurveModel {
                x: &p,
                y: &y,
                w: vec![1.0; p.len()],
                n_params: 4,
                eval: |x: &[f64], p: f64| inverse_q_response(InverseQModel::LinearPlusSaturation, x, p),
                grad: saturating_grad,
            };
            let x = [
                rng.random_range(100.0..2000.0),
                rng.random_range(1e-6..1e-4),
                rng.random_range(1e7..1e9),
                rng.random_range(1e-5..1e-4),
            ];
            let bounds = vec![
                Bound::Free {
                    offset: 0.0,
                    scale: 1000.0,
                },
                Bound::Free {
                    offset: 0.0,
                    scale: 1e-5,
                },
                Bound::Positive,
                Bound::Free {
                    offset: 0.0,
                    scale: 1e-5,
                },
            ];
            check_jacobian(&sat, bounds, &x);

            let freq = CurveModel {
                x: &p,
                y: &y,
                w: vec![1.0; p.len()],
                n_params: 3,
                eval: |x: &[f64], p: f64| frequency_response(x[0], x[1], x[2], p),
                grad: |x: &[f64], p: f64, g: &mut [f64]| {
                    let e = (-x[2] * p).exp();
                    g[0] = p;
                    g[1] = -(1.0 - e);
                    g[2] = -x[1] * p * e;
                },
            };
            let x = [
                rng.random_range(100.0..1000.0),
                rng.random_range(1e-6..1e-4),
                rng.random_range(1e7..1e9),
            ];
            let bounds = vec![
                Bound::Free {
                    offset: 0.0,
                    scale: 500.0,
                },
                Bound::NonNegative { scale: 1e-5 },
                Bound::Positive,
            ];
            check_jacobian(&freq, bounds, &x);

            let tls = CurveModel {
                x: &nc,
                y: &y_nc,
                w: vec![1.0; nc.len()],
                n_params: 4,
                eval: |x: &[f64], n: f64| tls_saturation_model(x[0], x[1], x[2], x[3], n),
                grad: |x: &[f64], n: f64, g: &mut [f64]| {
                    let r = n / x[1];
                    let s = r.powf(x[2]);
                    let d = 1.0 / (1.0 + s).sqrt();
                    let ds = -0.5 * d * d * d;
                    g[0] = d;
                    g[1] = x[0] * ds * (-x[2] * s / x[1]);
                    g[2] = x[0] * ds * s * r.ln();
                    g[3] = 1.0;
                },
            };
            let x = [
                rng.random_range(1e-6..1e-4),
                rng.random_range(1e2..1e4),
                rng.random_range(0.5..2.0),
                rng.random_range(1e-7..1e-5),
            ];
            let bounds = vec![
                Bound::Positive,
                Bound::Positive,
                Bound::Interval {
                    lower: 0.05,
                    upper: 5.0,
                },
                Bound::NonNegative { scale: 1e-5 },
            ];
            check_jacobian(&tls, bounds, &x);
        }
    }

    fn third_mode_trace(phi: f64, noise: f64, seed: u64) -> (ResonatorMode, LineCalibration, ComplexTrace) {
        let mode = ResonatorMode::with_asymmetry(7.061e9, 34477.0, 480.0, phi).unwrap();
        let line = LineCalibration::new(0.9, 30e-9, 1.1).unwrap();
        let kt = mode.f_r / mode.q_tot();
        let f = grid(mode.f_r, 5.0 * kt, 2001);
        let trace = synth_trace(&mode, &line, &f, NoiseModel::Gaussian { std: noise }, seed).unwrap();
        (mode, line, trace)
    }

    #[test]
    fn full_s21_round_trip() {
        let (mode, line, trace) = third_mode_trace(0.3, 1e-3, 11);
        let fit = fit_full_s21(&trace, None).unwrap();
        assert!(fit.converged, "{:?}", fit.termination);
        let rel = |a: f64, b: f64| (a / b - 1.0).abs();
        assert!(rel(fit.value("f_r"), mode.f_r) < 1e-6);
        assert!(rel(fit.value("q_tot"), mode.q_tot()) < 0.02);
        assert!(rel(fit.value("q_ext"), 480.0) < 0.02);
        assert!(rel(fit.value("q_int"), 34477.0) < 0.02, "q_int {}", fit.value("q_int"));
        assert!((fit.value("phi") - 0.3).abs() < 0.02);
        assert!(rel(fit.value("amplitude"), line.amplitude) < 0.05);
        assert!(rel(fit.value("delay"), line.delay) < 0.05);
        assert!(rel(fit.value("phase_offset"), line.phase_offset) < 0.05);
        assert!(fit.flags.is_empty(), "{:?}", fit.flags);
    }

    #[test]
    fn full_s21_is_phase_rotation_invariant() {
        let (_, _, trace) = third_mode_trace(0.3, 1e-3, 12);
        let a = fit_full_s21(&trace, None).unwrap();
        let b = fit_full_s21(&trace.rotated(0.7), None).unwrap();
        for name in ["q_tot", "q_c_magnitude", "q_int", "q_ext"] {
            assert!((a.value(name) / b.value(name) - 1.0).abs() < 1e-8, "{name}");
        }
        let shift = wrap_phase(a.value("phase_offset") - b.value("phase_offset"));
        assert!((shift - 0.7).abs() < 1e-8);
    }

    #[test]
    fn identity_line_reduces_to_ideal_model() {
        let mode = ResonatorMode::new(7.061e9, 34477.0, 480.0).unwrap();
        let f = grid(mode.f_r, 5.0 * mode.f_r / mode.q_tot(), 1001);
        let values: Vec<Complex64> = f.iter().map(|&x| mode.s21_ideal(x)).collect();
        let fit = fit_full_s21(&ComplexTrace::new(f, values).unwrap(), None).unwrap();
        assert!((fit.value("q_tot") / mode.q_tot() - 1.0).abs() < 1e-6);
        assert!((fit.value("q_int") / 34477.0 - 1.0).abs() < 1e-6);
        assert!(fit.value("phi").abs() < 1e-6);
        assert!(fit.value("delay").abs() < 1e-15);
    }

    #[test]
    fn lorentzian_recovers_overcoupled_internal_q() {
        let mode = ResonatorMode::new(7.061e9, 35000.0, 480.0).unwrap();
        let f = grid(mode.f_r, 25e6, 8001);
        let trace = synth_trace(
            &mode,
            &LineCalibration::IDENTITY,
            &f,
            NoiseModel::Gaussian { std: 1e-3 },
            5,
        )
        .unwrap();
        let dip = fit_lorentzian_dip(&trace).unwrap();
        assert!((dip.q_int / 35000.0 - 1.0).abs() < 0.05, "q_int {}", dip.q_int);
        assert!((dip.f_r - mode.f_r).abs() < 0.05 * dip.width_from_bottom);
        assert!(
            (dip.width / (mode.f_r / mode.q_tot()) - 1.0).abs() < 0.1,
            "{}",
            dip.width
        );
    }

    #[test]
    fn lorentzian_noiseless_width_from_bottom_is_exact() {
        let mode = ResonatorMode::new(5e9, 20000.0, 1000.0).unwrap();
        // wide enough that the edge median is the true baseline to ~1e-4
        let f = grid(mode.f_r, 300e6, 60001);
        let trace = synth_trace(&mode, &LineCalibration::IDENTITY, &f, NoiseModel::None, 0).unwrap();
        let dip = fit_lorentzian_dip(&trace).unwrap();
        let expected = mode.half_power_bandwidth_internal().unwrap();
        assert!(
            (dip.width_from_bottom / expected - 1.0).abs() < 1e-4,
            "{} vs {expected}",
            dip.width_from_bottom
        );
    }

    #[test]
    fn flat_trace_has_no_dip() {
        let f = grid(7e9, 1e6, 101);
        let flat = ComplexTrace::new(f.clone(), vec![Complex64::new(0.9, 0.1); 101]).unwrap();
        assert_eq!(fit_lorentzian_dip(&flat).unwrap_err(), Error::NoDipFound);
        let noisy = synth_trace(
            &ResonatorMode::new(7e9, 1e4, 1e12).unwrap(),
            &LineCalibration::IDENTITY,
            &f,
            NoiseModel::Gaussian { std: 1e-3 },
            3,
        )
        .unwrap();
        assert_eq!(fit_lorentzian_dip(&noisy).unwrap_err(), Error::NoDipFound);
    }

    #[test]
    fn lorentzian_and_full_fit_agree_closely_on_mild_asymmetry() {
        let (_, _, trace) = third_mode_trace(0.3, 0.0, 0);
        let dip = fit_lorentzian_dip(&trace).unwrap();
        let full = fit_full_s21(&trace, None).unwrap();
        let diff = (dip.q_int / full.value("q_int") - 1.0).abs();
        assert!(diff < 0.2, "lorentzian {} vs full {}", dip.q_int, full.value("q_int"));
    }

    fn p_grid(n: usize, p_max: f64) -> Vec<f64> {
        (0..n).map(|i| p_max * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_linear_inverse_q() {
        let p = p_grid(11, 100e-9);
        let inv_q: Vec<f64> = p.iter().map(|&v| 1e3 * v + 2.9e-5).collect();
        let s = PowerSeries::new(p.clone(), inv_q, vec![0.0; 11]).unwrap();
        let fit = fit_power_inverse_q(&s, InverseQModel::Linear).unwrap();
        assert!((fit.value("gamma") / 1e3 - 1.0).abs() < 1e-10);
        assert!((fit.value("inv_q0") / 2.9e-5 - 1.0).abs() < 1e-10);
        assert!(fit.converged);
    }

    #[test]
    fn degenerate_saturation_flags_gamma3() {
        let p = p_grid(11, 100e-9);
        let inv_q: Vec<f64> = p.iter().map(|&v| 1e3 * v + 2.9e-5).collect();
        let s = PowerSeries::new(p, inv_q, vec![0.0; 11]).unwrap();
        let fit = fit_power_inverse_q(&s, InverseQModel::LinearPlusSaturation).unwrap();
        assert!(fit.is_unidentifiable("gamma3"), "{:?}", fit.flags);
        assert!(
            (fit.value("gamma1") / 1e3 - 1.0).abs() < 1e-6,
            "{}",
            fit.value("gamma1")
        );
        assert!(super::super::require_identified(&fit).is_err());
    }

    #[test]
    fn saturating_inverse_q_recovered() {
        let p = p_grid(21, 100e-9);
        let truth = [500.0, 1e-5, 5e7, 2.9e-5];
        let inv_q = p
            .iter()
            .map(|&v| inverse_q_response(InverseQModel::LinearPlusSaturation, &truth, v))
            .collect();
        let s = PowerSeries::new(p, inv_q, vec![0.0; 21]).unwrap();
        let fit = fit_power_inverse_q(&s, InverseQModel::LinearPlusSaturation).unwrap();
        for (name, t) in ["gamma1", "gamma2", "gamma3", "inv_q0"].iter().zip(truth) {
            assert!((fit.value(name) / t - 1.0).abs() < 1e-6, "{name}");
        }
        assert!(fit.flags.is_empty());
    }

    #[test]
    fn too_few_points() {
        let s = PowerSeries::new(vec![0.0, 1e-9], vec![1e-5; 2], vec![0.0; 2]).unwrap();
        assert!(matches!(
            fit_power_inverse_q(&s, InverseQModel::Linear),
            Err(Error::InsufficientPoints { needed: 3, got: 2 })
        ));
        let s = PowerSeries::new(p_grid(4, 1e-8), vec![1e-5; 4], vec![0.0; 4]).unwrap();
        assert!(fit_power_inverse_q(&s, InverseQModel::LinearPlusSaturation).is_err());
        assert!(fit_power_frequency(&s).is_err());
    }

    #[test]
    fn pure_linear_frequency_pins_delta2() {
        let p = p_grid(21, 100e-9);
        let d: Vec<f64> = p.iter().map(|&v| 590.0 * v).collect();
        let s = PowerSeries::new(p, vec![0.0; 21], d).unwrap();
        let fit = fit_power_frequency(&s).unwrap();
        assert!((fit.value("delta1") / 590.0 - 1.0).abs() < 1e-10);
        assert!(fit.is_at_boundary("delta2"), "{:?}", fit.flags);
    }

    #[test]
    fn mixed_frequency_response_recovered() {
        let p = p_grid(41, 200e-9);
        let (d1, d2, d3) = (590.0, 2e-5, 5e7);
        let d: Vec<f64> = p.iter().map(|&v| frequency_response(d1, d2, d3, v)).collect();
        // red dip followed by a blue tail
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min < 0.0 && *d.last().unwrap() > 0.0);
        let s = PowerSeries::new(p, vec![0.0; 41], d).unwrap();
        let fit = fit_power_frequency(&s).unwrap();
        for (name, t) in [("delta1", d1), ("delta2", d2), ("delta3", d3)] {
            assert!((fit.value(name) / t - 1.0).abs() < 1e-6, "{name}");
        }
    }

    #[test]
    fn tls_saturation_noiseless() {
        let n: Vec<f64> = logspace(30.0, 3e4, 31).collect();
        let y: Vec<f64> = n
            .iter()
            .map(|&v| tls_saturation_model(1e-5, 1e3, 1.0, 2e-6, v))
            .collect();
        let fit = fit_tls_saturation(&SaturationSeries::new(n, y).unwrap()).unwrap();
        for (name, t) in [("f_delta", 1e-5), ("n_c", 1e3), ("beta", 1.0), ("floor", 2e-6)] {
            assert!((fit.value(name) / t - 1.0).abs() < 1e-6, "{name}: {}", fit.value(name));
        }
        assert!(fit.flags.is_empty());
    }

    #[test]
    fn tls_saturation_asymptotes() {
        let plateau = tls_saturation_model(1e-5, 1e3, 1.0, 2e-6, 1e-3);
        assert!((plateau / 1.2e-5 - 1.0).abs() < 1e-6);
        for beta in [0.5, 1.0, 1.7] {
            let (a, b) = (1e15, 1e16);
            let ya = tls_saturation_model(1e-5, 1e3, beta, 0.0, a);
            let yb = tls_saturation_model(1e-5, 1e3, beta, 0.0, b);
            let slope = (yb.ln() - ya.ln()) / (b.ln() - a.ln());
            assert!((slope + beta / 2.0).abs() < 1e-4);
        }
    }

    #[test]
    fn narrow_span_is_flagged() {
        let n: Vec<f64> = logspace(100.0, 1e3, 10).collect();
        let y: Vec<f64> = n
            .iter()
            .map(|&v| tls_saturation_model(1e-5, 3e2, 1.0, 2e-6, v))
            .collect();
        let fit = fit_tls_saturation(&SaturationSeries::new(n, y).unwrap()).unwrap();
        assert!(fit.has_flag(|f| matches!(f, FitFlag::InsufficientSpan { .. })));
    }
}
