use super::hz;
use crate::error::{Checks, CliResult};
use crate::output::{num, trace_csv, Context, CsvText, Output, POWER_SERIES_HEADER, POWER_SERIES_SCHEMA};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tlsres::ensemble::{slope_fractional_frequency, slope_inverse_q};
use tlsres::fit::{frequency_response, synth_power_series, synth_trace, NoiseModel};
use tlsres::{EnsembleParams, LineCalibration, ResonatorMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    #[default]
    Trace,
    PowerSeries,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct Flags {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<SynthKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output file; defaults to synth_trace.csv or synth_power_series.csv.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,

    #[arg(long, help_heading = "Trace")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_r_hz: Option<f64>,
    #[arg(long, help_heading = "Trace")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_int: Option<f64>,
    /// Effective (real) external Q.
    #[arg(long, help_heading = "Trace")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_ext: Option<f64>,
    #[arg(long, help_heading = "Trace")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[arg(long, help_heading = "Trace")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[arg(long, help_heading = "Trace")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_s: Option<f64>,
    #[arg(long, help_heading = "Trace")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_offset_rad: Option<f64>,
    /// Full frequency span in units of κ_tot/2π.
    #[arg(long, help_heading = "Trace")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span_linewidths: Option<f64>,
    #[arg(long, help_heading = "Trace")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Std of the Gaussian noise on re and im.
    #[arg(long, help_heading = "Trace")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,

    #[arg(long, help_heading = "Power series")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max_w: Option<f64>,
    #[arg(long, help_heading = "Power series")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_points: Option<usize>,
    #[arg(long, help_heading = "Power series")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inv_q0: Option<f64>,
    /// d(1/Q)/dP, per W; defaults to the ensemble slope.
    #[arg(long, help_heading = "Power series")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_per_w: Option<f64>,
    /// Linear Δf/f slope δ₁, per W; defaults to the ensemble slope.
    #[arg(long, help_heading = "Power series")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta1_per_w: Option<f64>,
    /// Amplitude δ₂ of the saturating red shift.
    #[arg(long, help_heading = "Power series")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
    /// Saturation rate δ₃, per W.
    #[arg(long, help_heading = "Power series")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta3_per_w: Option<f64>,
    #[arg(long, help_heading = "Power series")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_inv_q: Option<f64>,
    #[arg(long, help_heading = "Power series")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_dfrac: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub kind: SynthKind,
    pub seed: u64,
    pub output: Option<String>,
    pub f_r_hz: f64,
    pub q_int: f64,
    pub q_ext: f64,
    pub phi: f64,
    pub amplitude: f64,
    pub delay_s: f64,
    pub phase_offset_rad: f64,
    pub span_linewidths: f64,
    pub points: usize,
    pub noise_std: f64,
    pub p_max_w: f64,
    pub p_points: usize,
    pub inv_q0: f64,
    pub gamma_per_w: Option<f64>,
    pub delta1_per_w: Option<f64>,
    pub delta2: f64,
    pub delta3_per_w: f64,
    pub noise_inv_q: f64,
    pub noise_dfrac: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            kind: SynthKind::Trace,
            seed: 1,
            output: None,
            f_r_hz: 7.061e9,
            q_int: 34477.0,
            q_ext: 480.0,
            phi: 0.0,
            amplitude: 1.0,
            delay_s: 0.0,
            phase_offset_rad: 0.0,
            span_linewidths: 10.0,
            points: 8001,
            noise_std: 1e-3,
            p_max_w: 200e-9,
            p_points: 41,
            inv_q0: 1.0 / 34477.0 + 1.0 / 480.0,
            gamma_per_w: None,
            delta1_per_w: None,
            delta2: 2e-5,
            delta3_per_w: 5e7,
            noise_inv_q: 0.0,
            noise_dfrac: 0.0,
        }
    }
}

fn noise(std: f64) -> NoiseModel {
    if std > 0.0 {
        NoiseModel::Gaussian { std }
    } else {
        NoiseModel::None
    }
}

pub fn run(cfg: &Config, ctx: &Context) -> CliResult<Output> {
    match cfg.kind {
        SynthKind::Trace => trace(cfg, ctx),
        SynthKind::PowerSeries => power_series(cfg, ctx),
    }
}

fn trace(cfg: &Config, ctx: &Context) -> CliResult<Output> {
    let mut c = Checks::default();
    c.positive("span_linewidths", cfg.span_linewidths)
        .require(cfg.points >= 2, "points", "must be at least 2")
        .non_negative("noise_std", cfg.noise_std);
    c.finish()?;
    let mode = ResonatorMode::with_asymmetry(cfg.f_r_hz, cfg.q_int, cfg.q_ext, cfg.phi)?;
    let line = LineCalibration::new(cfg.amplitude, cfg.delay_s, cfg.phase_offset_rad)?;
    let half = 0.5 * cfg.span_linewidths * hz(mode.kappa_tot());
    let n = cfg.points - 1;
    let grid: Vec<f64> = (0..=n)
        .map(|k| mode.f_r - half + 2.0 * half * k as f64 / n as f64)
        .collect();
    let trace = synth_trace(&mode, &line, &grid, noise(cfg.noise_std), cfg.seed)?;

    let meta = [
        ("generator", "hanger S21 with line calibration".to_string()),
        ("seed", cfg.seed.to_string()),
        ("f_r_hz", num(cfg.f_r_hz)),
        ("q_int", num(cfg.q_int)),
        ("q_ext", num(cfg.q_ext)),
        ("phi", num(cfg.phi)),
        ("amplitude", num(cfg.amplitude)),
        ("delay_s", num(cfg.delay_s)),
        ("phase_offset_rad", num(cfg.phase_offset_rad)),
        ("noise_std", num(cfg.noise_std)),
    ];
    let path = ctx.path(cfg.output.as_deref().unwrap_or("synth_trace.csv"));
    trace_csv(&trace, &meta).write(&path)?;
    Ok(Output {
        result: json!({
            "kind": "trace",
            "rows": trace.len(),
            "q_tot": mode.q_tot(),
            "f_min_hz": grid[0],
            "f_max_hz": grid[n],
        }),
        files: vec![path],
    })
}

fn power_series(cfg: &Config, ctx: &Context) -> CliResult<Output> {
    let mut c = Checks::default();
    c.positive("p_max_w", cfg.p_max_w)
        .require(cfg.p_points >= 2, "p_points", "must be at least 2")
        .require(cfg.inv_q0.is_finite(), "inv_q0", "must be finite")
        .non_negative("delta2", cfg.delta2)
        .non_negative("delta3_per_w", cfg.delta3_per_w)
        .non_negative("noise_inv_q", cfg.noise_inv_q)
        .non_negative("noise_dfrac", cfg.noise_dfrac);
    c.finish()?;
    let bath = EnsembleParams::default();
    let gamma = match cfg.gamma_per_w {
        Some(g) => g,
        None => slope_inverse_q(&bath)?,
    };
    let delta1 = match cfg.delta1_per_w {
        Some(d) => d,
        None => slope_fractional_frequency(&bath)?,
    };
    let n = cfg.p_points - 1;
    let grid: Vec<f64> = (0..=n).map(|k| cfg.p_max_w * k as f64 / n as f64).collect();
    let series = synth_power_series(
        &grid,
        |p| gamma * p + cfg.inv_q0,
        |p| frequency_response(delta1, cfg.delta2, cfg.delta3_per_w, p),
        noise(cfg.noise_inv_q),
        noise(cfg.noise_dfrac),
        cfg.seed,
    )?;

    let meta = [
        (
            "generator",
            "1/Q = gamma*P + inv_q0; df/f = delta1*P - delta2*(1 - exp(-delta3*P))".to_string(),
        ),
        ("seed", cfg.seed.to_string()),
        ("gamma_per_w", num(gamma)),
        ("inv_q0", num(cfg.inv_q0)),
        ("delta1_per_w", num(delta1)),
        ("delta2", num(cfg.delta2)),
        ("delta3_per_w", num(cfg.delta3_per_w)),
        ("noise_inv_q", num(cfg.noise_inv_q)),
        ("noise_dfrac", num(cfg.noise_dfrac)),
    ];
    let mut csv = CsvText::new(POWER_SERIES_SCHEMA, &meta, POWER_SERIES_HEADER);
    for k in 0..series.len() {
        csv.row(&[num(series.p_opt[k]), num(series.inv_q[k]), num(series.dfrac[k])]);
    }
    let path = ctx.path(cfg.output.as_deref().unwrap_or("synth_power_series.csv"));
    csv.write(&path)?;

    // Turning point of the noiseless Δf/f, where the red shift gives way.
    let turning = (delta1 > 0.0 && cfg.delta2 * cfg.delta3_per_w > delta1)
        .then(|| (cfg.delta2 * cfg.delta3_per_w / delta1).ln() / cfg.delta3_per_w);
    Ok(Output {
        result: json!({
            "kind": "power_series",
            "rows": series.len(),
            "gamma_per_w": gamma,
            "delta1_per_w": delta1,
            "dfrac_minimum_at_w": turning,
        }),
        files: vec![path],
    })
}
