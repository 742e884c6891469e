use super::in_band;
use crate::error::{CliError, CliResult};
use crate::output::{num, read_trace, Context, CsvText, Output};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::Path;
use tlsres::fit::{fit_full_s21, fit_lorentzian_dip, full_s21_from_result, LorentzianDip};
use tlsres::FitResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumModel {
    Lorentzian,
    Full,
    #[default]
    Both,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct Flags {
    /// Trace CSV with header `freq_hz,re,im`.
    #[arg(value_name = "TRACE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<SpectrumModel>,
    /// Per-point noise std of the re/im parts, used as fit weights.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_json: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub input: String,
    pub model: SpectrumModel,
    pub noise_std: Option<f64>,
    pub fit_json: String,
    pub model_csv: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            input: String::new(),
            model: SpectrumModel::Both,
            noise_std: None,
            fit_json: "fit_result.json".into(),
            model_csv: "fit_model.csv".into(),
        }
    }
}

pub fn run(cfg: &Config, ctx: &Context) -> CliResult<Output> {
    if cfg.input.is_empty() {
        return Err(CliError::Invalid("a trace file is required".into()));
    }
    if let Some(s) = cfg.noise_std {
        if !(s.is_finite() && s > 0.0) {
            return Err(CliError::Invalid("--noise-std must be positive".into()));
        }
    }
    let mut trace = read_trace(Path::new(&cfg.input))?;
    if let Some(s) = cfg.noise_std {
        let n = trace.len();
        trace = trace.with_noise_std(vec![s; n])?;
    }

    let lorentzian = match cfg.model {
        SpectrumModel::Full => None,
        _ => Some(in_band(fit_lorentzian_dip(&trace))?),
    };
    let full = match cfg.model {
        SpectrumModel::Lorentzian => None,
        _ => Some(in_band(fit_full_s21(&trace, None))?),
    };

    let mut result = json!({ "points": trace.len() });
    if let Some(l) = &lorentzian {
        result["lorentzian"] = match l {
            Ok(d) => lorentzian_summary(d),
            Err(e) => failed(e),
        };
    }
    if let Some(f) = &full {
        result["full"] = match f {
            Ok(fit) => json!({
                "status": status(fit),
                "q_int": fit.value("q_int"),
                "q_tot": fit.value("q_tot"),
                "q_ext": fit.value("q_ext"),
                "fit": fit,
            }),
            Err(e) => failed(e),
        };
    }
    if let (Some(Ok(l)), Some(Ok(f))) = (&lorentzian, &full) {
        let q_full = f.value("q_int");
        result["comparison"] = json!({
            "q_int_lorentzian": l.q_int,
            "q_int_full": q_full,
            "relative_discrepancy": (l.q_int - q_full).abs() / q_full,
        });
    }

    let fit_path = ctx.path(&cfg.fit_json);
    let text = serde_json::to_string_pretty(&result).expect("serializable");
    std::fs::write(&fit_path, text + "\n").map_err(|e| CliError::io(&fit_path, e))?;

    let csv_path = ctx.path(&cfg.model_csv);
    let ok_l = lorentzian.as_ref().and_then(|r| r.as_ref().ok());
    let ok_f = full.as_ref().and_then(|r| r.as_ref().ok());
    model_csv(&trace, ok_l, ok_f).write(&csv_path)?;

    Ok(Output {
        result,
        files: vec![fit_path, csv_path],
    })
}

fn status(fit: &FitResult) -> &'static str {
    if fit.converged {
        "converged"
    } else {
        "not_converged"
    }
}

fn failed(e: &tlsres::Error) -> Value {
    json!({ "status": "failed", "error": e.to_string() })
}

fn lorentzian_summary(d: &LorentzianDip) -> Value {
    json!({
        "status": status(&d.fit),
        "f_r_hz": d.f_r,
        "width_hz": d.width,
        "depth": d.depth,
        "baseline": d.baseline,
        "width_from_bottom_hz": d.width_from_bottom,
        "q_int": d.q_int,
        "q_tot": d.f_r / d.width,
        "fit": d.fit,
    })
}

/// Data and fitted curves side by side; columns of a model that was not
/// fitted are left empty.
fn model_csv(trace: &tlsres::ComplexTrace, l: Option<&LorentzianDip>, f: Option<&FitResult>) -> CsvText {
    let mut out = CsvText::new(
        "tlsres.fit_model/v1",
        &[],
        "freq_hz,data_re,data_im,data_mag2,full_re,full_im,full_mag2,lorentzian_mag2",
    );
    for (&freq, z) in trace.frequencies.iter().zip(&trace.values) {
        let mut row = vec![num(freq), num(z.re), num(z.im), num(z.norm_sqr())];
        match f {
            Some(fit) => {
                let m = full_s21_from_result(fit, freq);
                row.extend([num(m.re), num(m.im), num(m.norm_sqr())]);
            }
            None => row.extend([String::new(), String::new(), String::new()]),
        }
        row.push(l.map_or(String::new(), |d| num(d.model(freq))));
        out.row(&row);
    }
    out
}
