//! Least-squares fitting: the solver, parameter bounds, the fit models used on
//! resonator data (Lorentzian dip, full asymmetric S21, optical-power response
//! curves, microwave saturation) and a synthetic-trace generator.
//!
//! Models are written in physical parameters. Bounds are imposed through
//! smooth reparameterisations ([`Bound`]) and the solver only ever sees the
//! unconstrained internal coordinates.

mod models;
pub mod solver;
mod synth;

pub use models::{
    fit_full_s21, fit_lorentzian_dip, fit_power_frequency, fit_power_inverse_q, fit_tls_saturation, frequency_response,
    full_s21_from_result, full_s21_model, inverse_q_response, lorentzian_dip_model, tls_saturation_model, FullS21Guess,
    InverseQModel, LorentzianDip, FULL_S21_PARAMS,
};
pub use solver::{LmOptions, Termination};
pub use synth::{synth_power_series, synth_saturation_series, synth_trace, NoiseModel};

use crate::error::{ensure, invalid, Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use solver::Residuals;

/// Frequencies (Hz, strictly increasing) and complex transmission values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexTrace {
    pub frequencies: Vec<f64>,
    pub values: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<Vec<f64>>,
}

impl ComplexTrace {
    pub fn new(frequencies: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        let trace = Self {
            frequencies,
            values,
            noise_std: None,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn with_noise_std(mut self, noise_std: Vec<f64>) -> Result<Self> {
        self.noise_std = Some(noise_std);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.len() != self.values.len() {
            return Err(Error::LengthMismatch(format!(
                "{} frequencies, {} values",
                self.frequencies.len(),
                self.values.len()
            )));
        }
        if let Some(s) = &self.noise_std {
            if s.len() != self.values.len() {
                return Err(Error::LengthMismatch(format!(
                    "{} noise entries, {} values",
                    s.len(),
                    self.values.len()
                )));
            }
            ensure(
                s.iter().all(|x| x.is_finite() && *x > 0.0),
                "noise_std",
                "must be positive",
            )?;
        }
        ensure(
            self.frequencies.iter().all(|f| f.is_finite()),
            "frequencies",
            "must be finite",
        )?;
        ensure(
            self.frequencies.windows(2).all(|w| w[1] > w[0]),
            "frequencies",
            "must be strictly increasing",
        )?;
        ensure(
            self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            "values",
            "must be finite",
        )?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn magnitude_sq(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    /// The same trace multiplied by e^{iθ}.
    pub fn rotated(&self, theta: f64) -> Self {
        let w = Complex64::from_polar(1.0, theta);
        Self {
            frequencies: self.frequencies.clone(),
            values: self.values.iter().map(|z| z * w).collect(),
            noise_std: self.noise_std.clone(),
        }
    }
}

/// Optical power (W) against 1/Q and Δf_r/f_r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    pub p_opt: Vec<f64>,
    pub inv_q: Vec<f64>,
    pub dfrac: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inv_q_sigma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dfrac_sigma: Option<Vec<f64>>,
}

impl PowerSeries {
    pub fn new(p_opt: Vec<f64>, inv_q: Vec<f64>, dfrac: Vec<f64>) -> Result<Self> {
        let s = Self {
            p_opt,
            inv_q,
            dfrac,
            inv_q_sigma: None,
            dfrac_sigma: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.p_opt.len();
        let aligned = self.inv_q.len() == n
            && self.dfrac.len() == n
            && self.inv_q_sigma.as_ref().map_or(true, |s| s.len() == n)
            && self.dfrac_sigma.as_ref().map_or(true, |s| s.len() == n);
        if !aligned {
            return Err(Error::LengthMismatch("power series columns differ in length".into()));
        }
        ensure(
            self.p_opt.iter().all(|p| p.is_finite() && *p >= 0.0),
            "p_opt",
            "must be finite and nonnegative",
        )?;
        ensure(
            self.p_opt.windows(2).all(|w| w[1] >= w[0]),
            "p_opt",
            "must be ascending",
        )?;
        ensure(
            self.inv_q.iter().chain(&self.dfrac).all(|v| v.is_finite()),
            "series",
            "values must be finite",
        )?;
        for s in [&self.inv_q_sigma, &self.dfrac_sigma].into_iter().flatten() {
            ensure(s.iter().all(|x| x.is_finite() && *x > 0.0), "sigma", "must be positive")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.p_opt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_opt.is_empty()
    }
}

/// Intracavity photon number against 1/Q_int.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationSeries {
    pub n_cav: Vec<f64>,
    pub inv_q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
}

impl SaturationSeries {
    pub fn new(n_cav: Vec<f64>, inv_q: Vec<f64>) -> Result<Self> {
        let s = Self {
            n_cav,
            inv_q,
            sigma: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cav.len() != self.inv_q.len() || self.sigma.as_ref().is_some_and(|s| s.len() != self.n_cav.len()) {
            return Err(Error::LengthMismatch(
                "saturation series columns differ in length".into(),
            ));
        }
        ensure(
            self.n_cav.iter().all(|n| n.is_finite() && *n > 0.0),
            "n_cav",
            "must be positive",
        )?;
        ensure(self.inv_q.iter().all(|v| v.is_finite()), "inv_q", "must be finite")?;
        Ok(())
    }

    /// log10(max n / min n).
    pub fn decades(&self) -> f64 {
        let lo = self.n_cav.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.n_cav.iter().cloned().fold(0.0, f64::max);
        (hi / lo).log10()
    }
}

/// How a physical parameter x is reached from an unconstrained coordinate u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    /// x = offset + scale·u.
    Free { offset: f64, scale: f64 },
    /// x = e^u.
    Positive,
    /// x = scale·u²; zero is reachable.
    NonNegative { scale: f64 },
    /// x = lower + (upper − lower)/(1 + e^{−u}).
    Interval { lower: f64, upper: f64 },
}

impl Bound {
    pub const UNIT: Bound = Bound::Free {
        offset: 0.0,
        scale: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        match *self {
            Bound::Free { offset, scale } => ensure(
                offset.is_finite() && scale.is_finite() && scale > 0.0,
                "bound",
                "scale must be positive",
            ),
            Bound::NonNegative { scale } => ensure(scale.is_finite() && scale > 0.0, "bound", "scale must be positive"),
            Bound::Interval { lower, upper } => ensure(
                lower.is_finite() && upper.is_finite() && lower < upper,
                "bound",
                "interval must satisfy lower < upper",
            ),
            Bound::Positive => Ok(()),
        }
    }

    pub fn external(&self, u: f64) -> f64 {
        match *self {
            Bound::Free { offset, scale } => offset + scale * u,
            Bound::Positive => u.exp(),
            Bound::NonNegative { scale } => scale * u * u,
            Bound::Interval { lower, upper } => lower + (upper - lower) / (1.0 + (-u).exp()),
        }
    }

    /// dx/du.
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Bound::Free { scale, .. } => scale,
            Bound::Positive => u.exp(),
            Bound::NonNegative { scale } => 2.0 * scale * u,
            Bound::Interval { lower, upper } => {
                let e = (-u.abs()).exp();
                (upper - lower) * e / ((1.0 + e) * (1.0 + e))
            }
        }
    }

    pub fn internal(&self, x: f64) -> Result<f64> {
        match *self {
            Bound::Free { offset, scale } => Ok((x - offset) / scale),
            Bound::Positive => {
                ensure(x > 0.0, "initial value", "must be positive for a log-bounded parameter")?;
                Ok(x.ln())
            }
            Bound::NonNegative { scale } => {
                ensure(x >= 0.0, "initial value", "must be nonnegative")?;
                Ok((x / scale).sqrt())
            }
            Bound::Interval { lower, upper } => {
                ensure(
                    x > lower && x < upper,
                    "initial value",
                    "must lie strictly inside its interval",
                )?;
                let t = (x - lower) / (upper - lower);
                Ok((t / (1.0 - t)).ln())
            }
        }
    }

    /// True when x sits at (or numerically on) a finite edge.
    pub fn at_edge(&self, x: f64) -> bool {
        match *self {
            Bound::Free { .. } => false,
            Bound::Positive => x <= f64::MIN_POSITIVE,
            Bound::NonNegative { scale } => x <= 1e-10 * scale,
            Bound::Interval { lower, upper } => {
                let t = (x - lower) / (upper - lower);
                !(1e-9..=1.0 - 1e-9).contains(&t)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LorentzianDip,
    FullS21,
    InverseQLinear,
    InverseQSaturating,
    FrequencyResponse,
    TlsSaturation,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub bound: Bound,
}

impl ParamSpec {
    pub fn new(name: &str, bound: Bound) -> Self {
        Self {
            name: name.to_string(),
            bound,
        }
    }
}

/// Where the starting point of a fit comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessPolicy {
    /// The model's documented data-driven heuristic.
    Heuristic,
    Supplied(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitModelSpec {
    pub model: ModelKind,
    pub parameters: Vec<ParamSpec>,
    pub guess: GuessPolicy,
}

impl FitModelSpec {
    pub fn validate(&self) -> Result<()> {
        for p in &self.parameters {
            p.bound.validate()?;
        }
        if let GuessPolicy::Supplied(v) = &self.guess {
            if v.len() != self.parameters.len() {
                return Err(Error::LengthMismatch(format!(
                    "{} supplied initial values for {} parameters",
                    v.len(),
                    self.parameters.len()
                )));
            }
        }
        Ok(())
    }
}

/// A residual model in physical parameters.
pub trait Model {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, x: &[f64], out: &mut [f64]);
    /// Analytic ∂r/∂x; return false to fall back on finite differences in the
    /// internal coordinates.
    fn jacobian(&self, _x: &[f64], _jac: &mut DMatrix<f64>) -> bool {
        false
    }
}

/// Presents a physical-parameter [`Model`] to the solver in internal coordinates.
pub struct Bounded<'a, M: ?Sized> {
    pub model: &'a M,
    pub bounds: Vec<Bound>,
}

impl<M: Model + ?Sized> Bounded<'_, M> {
    pub fn external(&self, u: &[f64]) -> Vec<f64> {
        self.bounds.iter().zip(u).map(|(b, &v)| b.external(v)).collect()
    }
}

impl<M: Model + ?Sized> Residuals for Bounded<'_, M> {
    fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn n_residuals(&self) -> usize {
        self.model.n_residuals()
    }

    fn residuals(&self, u: &[f64], out: &mut [f64]) {
        self.model.residuals(&self.external(u), out);
    }

    fn jacobian(&self, u: &[f64], jac: &mut DMatrix<f64>) {
        if self.model.jacobian(&self.external(u), jac) {
            for (j, (b, &v)) in self.bounds.iter().zip(u).enumerate() {
                jac.column_mut(j).scale_mut(b.derivative(v));
            }
        } else {
            solver::finite_difference_jacobian(self, u, jac);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    /// √ of the covariance diagonal; NaN where the parameter is unidentified.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum FitFlag {
    NotConverged,
    Unidentifiable { parameter: String },
    AtBoundary { parameter: String },
    IllConditioned { detail: String },
    InsufficientSpan { decades: f64 },
    NegativeInternalLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub parameters: Vec<FitParameter>,
    /// Quantities computed from the parameters (Q_int, widths, …).
    pub derived: Vec<DerivedValue>,
    /// Covariance of `parameters`, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub termination: Termination,
    pub flags: Vec<FitFlag>,
}

impl FitResult {
    /// A fitted parameter or derived value by name.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.parameters
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.value)
            .or_else(|| self.derived.iter().find(|d| d.name == name).map(|d| d.value))
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name).unwrap_or(f64::NAN)
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.std_error)
    }

    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }

    pub fn has_flag(&self, pred: impl Fn(&FitFlag) -> bool) -> bool {
        self.flags.iter().any(pred)
    }

    pub fn is_unidentifiable(&self, name: &str) -> bool {
        self.has_flag(|f| matches!(f, FitFlag::Unidentifiable { parameter } if parameter == name))
    }

    pub fn is_at_boundary(&self, name: &str) -> bool {
        self.has_flag(|f| matches!(f, FitFlag::AtBoundary { parameter } if parameter == name))
    }

    pub(crate) fn derive(&mut self, name: &str, value: f64) {
        self.derived.push(DerivedValue {
            name: name.to_string(),
            value,
        });
    }

    pub(crate) fn flag(&mut self, flag: FitFlag) {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
    }
}

/// Runs the solver on `model` under the bounds and starting point in `spec`.
///
/// A rank-deficient Jacobian at the optimum is reported through
/// [`FitFlag::Unidentifiable`]; callers that need every parameter pinned down
/// can escalate with [`require_identified`].
pub fn solve_least_squares<M: Model + ?Sized>(
    spec: &FitModelSpec,
    model: &M,
    initial: &[f64],
    opts: &LmOptions,
) -> Result<FitResult> {
    spec.validate()?;
    if spec.parameters.len() != model.n_params() || initial.len() != model.n_params() {
        return Err(Error::LengthMismatch(format!(
            "model has {} parameters, spec {}, initial {}",
            model.n_params(),
            spec.parameters.len(),
            initial.len()
        )));
    }
    let bounds: Vec<Bound> = spec.parameters.iter().map(|p| p.bound).collect();
    let u0 = bounds
        .iter()
        .zip(initial)
        .map(|(b, &x)| b.internal(x))
        .collect::<Result<Vec<f64>>>()?;
    let problem = Bounded { model, bounds };
    let rep = solver::minimize(&problem, &u0, opts)?;

    let x = problem.external(&rep.params);
    let d: Vec<f64> = problem
        .bounds
        .iter()
        .zip(&rep.params)
        .map(|(b, &u)| b.derivative(u))
        .collect();
    let n = x.len();
    let mut cov = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            cov[i][j] = d[i] * rep.covariance[(i, j)] * d[j];
        }
    }

    let mut result = FitResult {
        model: spec.model,
        parameters: spec
            .parameters
            .iter()
            .enumerate()
            .map(|(i, p)| FitParameter {
                name: p.name.clone(),
                value: x[i],
                std_error: if rep.unidentifiable.contains(&i) {
                    f64::NAN
                } else {
                    cov[i][i].max(0.0).sqrt()
                },
            })
            .collect(),
        derived: Vec::new(),
        covariance: cov,
        residual_norm: rep.residual_norm(),
        converged: rep.converged(),
        iterations: rep.iterations,
        termination: rep.termination,
        flags: Vec::new(),
    };
    if !rep.converged() {
        result.flag(FitFlag::NotConverged);
    }
    for &i in &rep.unidentifiable {
        result.flag(FitFlag::Unidentifiable {
            parameter: spec.parameters[i].name.clone(),
        });
    }
    for (i, p) in spec.parameters.iter().enumerate() {
        if p.bound.at_edge(x[i]) {
            result.flag(FitFlag::AtBoundary {
                parameter: p.name.clone(),
            });
        }
    }
    Ok(result)
}

/// Turns an unidentifiable-parameter flag into [`Error::SingularJacobian`].
pub fn require_identified(result: &FitResult) -> Result<()> {
    let missing = result
        .flags
        .iter()
        .filter(|f| matches!(f, FitFlag::Unidentifiable { .. }))
        .count();
    if missing > 0 {
        let n = result.parameters.len();
        return Err(Error::SingularJacobian {
            rank: n - missing.min(n),
            params: n,
        });
    }
    Ok(())
}

pub(crate) fn need_points(got: usize, needed: usize) -> Result<()> {
    if got < needed {
        return Err(Error::InsufficientPoints { needed, got });
    }
    Ok(())
}

pub(crate) fn positive_sigma(name: &'static str, sigma: &Option<Vec<f64>>) -> Result<()> {
    if let Some(s) = sigma {
        if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid(name, "uncertainties must be positive"));
        }
    }
    Ok(())
}
