use super::hz;
use crate::error::{Checks, CliResult};
use crate::output::{Context, Output};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tlsres::units::{dbm_to_watts, watts_to_dbm};
use tlsres::{DriveCondition, ResonatorMode};

#[derive(Debug, Default, Args, Serialize)]
pub struct Flags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_r_hz: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_int: Option<f64>,
    /// Effective (real) external Q.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_ext: Option<f64>,
    /// Asymmetry phase of the coupling, rad.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    /// Input power at the device, dBm.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_in_dbm: Option<f64>,
    /// Input power in watts; takes precedence over --p-in-dbm.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_in_w: Option<f64>,
    /// Probe detuning from f_r in units of the total linewidth κ_tot/2π.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_linewidths: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub f_r_hz: f64,
    pub q_int: f64,
    pub q_ext: f64,
    pub phi: f64,
    pub p_in_dbm: f64,
    pub p_in_w: Option<f64>,
    pub detuning_linewidths: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            f_r_hz: 7.061e9,
            q_int: 34477.0,
            q_ext: 480.0,
            phi: 0.0,
            p_in_dbm: -72.0,
            p_in_w: None,
            detuning_linewidths: 0.0,
        }
    }
}

pub fn run(cfg: &Config, _ctx: &Context) -> CliResult<Output> {
    let mut c = Checks::default();
    c.positive("f_r_hz", cfg.f_r_hz)
        .positive("q_int", cfg.q_int)
        .positive("q_ext", cfg.q_ext)
        .require(
            cfg.phi.abs() < std::f64::consts::FRAC_PI_2,
            "phi",
            "must lie in (-pi/2, pi/2)",
        )
        .require(cfg.p_in_dbm.is_finite(), "p_in_dbm", "must be finite")
        .require(
            cfg.detuning_linewidths.is_finite(),
            "detuning_linewidths",
            "must be finite",
        );
    if let Some(p) = cfg.p_in_w {
        c.positive("p_in_w", p);
    }
    c.finish()?;

    let mode = ResonatorMode::with_asymmetry(cfg.f_r_hz, cfg.q_int, cfg.q_ext, cfg.phi)?;
    let power = cfg.p_in_w.unwrap_or_else(|| dbm_to_watts(cfg.p_in_dbm));
    let detuning = cfg.detuning_linewidths * hz(mode.kappa_tot());
    let drive = DriveCondition::new(power, mode.f_r + detuning)?;
    let n = mode.photon_number(&drive);
    let result = json!({
        "n_cav": n,
        "input_power_w": power,
        "input_power_dbm": watts_to_dbm(power),
        "probe_frequency_hz": drive.probe_frequency,
        "detuning_hz": detuning,
        "q_tot": mode.q_tot(),
        "kappa_int_rad_per_s": mode.kappa_int(),
        "kappa_ext_rad_per_s": mode.kappa_ext(),
        "kappa_tot_rad_per_s": mode.kappa_tot(),
        "kappa_int_hz": hz(mode.kappa_int()),
        "kappa_ext_hz": hz(mode.kappa_ext()),
        "kappa_tot_hz": hz(mode.kappa_tot()),
    });
    Ok(Output {
        result,
        files: Vec::new(),
    })
}
