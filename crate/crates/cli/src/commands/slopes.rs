use super::{hz, rad};
use crate::error::{Checks, CliError, CliResult};
use crate::output::{num, Context, CsvText, Output};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tlsres::ensemble::{self, NANOWATT};
use tlsres::EnsembleParams;

#[derive(Debug, Default, Args, Serialize)]
pub struct Flags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_r_hz: Option<f64>,
    /// TLS density of states, J⁻¹ m⁻³.
    #[arg(long, alias = "rho")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_tls: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thickness_m: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width_m: Option<f64>,
    #[arg(long, alias = "xi")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_m_per_w: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_max_hz: Option<f64>,
    /// Upper edge of the dispersive log window; defaults to f_max.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_max_hz: Option<f64>,
    /// Lower edge of the dispersive log window; defaults to f_r.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_min_hz: Option<f64>,
    /// Average population S̃ in [-1, 0].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_tilde: Option<f64>,
    /// Population change per unit frequency dS̃, s.
    #[arg(long, alias = "ds")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds_s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1_hz: Option<f64>,
    /// Defaults to gamma1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2_hz: Option<f64>,
    /// Coupling g̃/2π applied to both the transverse and longitudinal terms.
    #[arg(long, alias = "g")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_hz: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_perp_hz: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_par_hz: Option<f64>,
    /// Sweep g̃/2π over these values (comma separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_grid_hz: Option<Vec<f64>>,
    /// Sweep ξ over these values (comma separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_grid_m_per_w: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub f_r_hz: f64,
    pub rho_tls: f64,
    pub thickness_m: f64,
    pub width_m: f64,
    pub xi_m_per_w: f64,
    pub f_max_hz: f64,
    pub delta_max_hz: Option<f64>,
    pub delta_min_hz: Option<f64>,
    pub s_tilde: f64,
    pub ds_s: f64,
    pub gamma1_hz: f64,
    pub gamma2_hz: Option<f64>,
    pub g_hz: f64,
    pub g_perp_hz: Option<f64>,
    pub g_par_hz: Option<f64>,
    pub g_grid_hz: Vec<f64>,
    pub xi_grid_m_per_w: Vec<f64>,
    pub sweep_csv: String,
}

impl Default for Config {
    fn default() -> Self {
        let p = EnsembleParams::default();
        Self {
            f_r_hz: hz(p.omega_r),
            rho_tls: p.rho_tls,
            thickness_m: p.thickness,
            width_m: p.width,
            xi_m_per_w: p.xi,
            f_max_hz: hz(p.omega_max),
            delta_max_hz: None,
            delta_min_hz: None,
            s_tilde: p.s_tilde,
            ds_s: p.ds_tilde,
            gamma1_hz: hz(p.gamma1),
            gamma2_hz: None,
            g_hz: hz(p.g_par),
            g_perp_hz: None,
            g_par_hz: None,
            g_grid_hz: Vec::new(),
            xi_grid_m_per_w: Vec::new(),
            sweep_csv: "slopes_sweep.csv".into(),
        }
    }
}

impl Config {
    pub fn params(&self) -> CliResult<EnsembleParams> {
        let mut c = Checks::default();
        c.positive("f_r_hz", self.f_r_hz)
            .non_negative("rho_tls", self.rho_tls)
            .positive("thickness_m", self.thickness_m)
            .positive("width_m", self.width_m)
            .non_negative("xi_m_per_w", self.xi_m_per_w)
            .positive("f_max_hz", self.f_max_hz)
            .require((-1.0..=0.0).contains(&self.s_tilde), "s_tilde", "must lie in [-1, 0]")
            .non_negative("ds_s", self.ds_s)
            .positive("gamma1_hz", self.gamma1_hz)
            .non_negative("g_hz", self.g_hz);
        for (key, v) in [
            ("delta_max_hz", self.delta_max_hz),
            ("delta_min_hz", self.delta_min_hz),
            ("gamma2_hz", self.gamma2_hz),
        ] {
            if let Some(v) = v {
                c.positive(key, v);
            }
        }
        for (key, v) in [("g_perp_hz", self.g_perp_hz), ("g_par_hz", self.g_par_hz)] {
            if let Some(v) = v {
                c.non_negative(key, v);
            }
        }
        for (key, grid) in [
            ("g_grid_hz", &self.g_grid_hz),
            ("xi_grid_m_per_w", &self.xi_grid_m_per_w),
        ] {
            c.require(
                grid.iter().all(|v| v.is_finite() && *v >= 0.0),
                key,
                "values must be non-negative",
            );
        }
        c.finish()?;

        let omega_r = rad(self.f_r_hz);
        let omega_max = rad(self.f_max_hz);
        let gamma1 = rad(self.gamma1_hz);
        let p = EnsembleParams {
            omega_r,
            rho_tls: self.rho_tls,
            thickness: self.thickness_m,
            width: self.width_m,
            xi: self.xi_m_per_w,
            omega_max,
            delta_max: self.delta_max_hz.map_or(omega_max, rad),
            delta_min: self.delta_min_hz.map_or(omega_r, rad),
            s_tilde: self.s_tilde,
            ds_tilde: self.ds_s,
            gamma1,
            gamma2: self.gamma2_hz.map_or(gamma1, rad),
            g_perp: rad(self.g_perp_hz.unwrap_or(self.g_hz)),
            g_par: rad(self.g_par_hz.unwrap_or(self.g_hz)),
        };
        // Cross-parameter constraints, reported under the option names.
        p.validate().map_err(|e| match e {
            tlsres::Error::InvalidParameter { name, reason } => CliError::Invalid(format!(
                "--{} {}",
                option_name(name),
                reason
                    .replace("gamma2", "--gamma2-hz")
                    .replace("delta_min", "--delta-min-hz")
            )),
            other => other.into(),
        })?;
        Ok(p)
    }
}

fn option_name(field: &str) -> &str {
    match field {
        "delta_max" => "delta-max-hz",
        "delta_min" => "delta-min-hz",
        "gamma2" => "gamma2-hz",
        "omega_r" => "f-r-hz",
        "omega_max" => "f-max-hz",
        other => other,
    }
}

pub fn run(cfg: &Config, ctx: &Context) -> CliResult<Output> {
    let p = cfg.params()?;
    let slopes = |p: &EnsembleParams| -> tlsres::Result<(f64, f64)> {
        Ok((ensemble::slope_inverse_q(p)?, ensemble::slope_fractional_frequency(p)?))
    };
    let (dq, df) = slopes(&p)?;

    // Split of the frequency slope: resonant (transverse) vs Debye.
    let c = p.c_factor();
    let transverse = c * p.k_perp() * p.g_perp * p.g_perp;
    let debye = -c * p.gamma1 * p.k_par() * p.g_par * p.g_par;
    let mut result = json!({
        "slope_inverse_q_per_w": dq,
        "slope_inverse_q_per_nw": dq * NANOWATT,
        "slope_fractional_frequency_per_w": df,
        "slope_fractional_frequency_per_nw": df * NANOWATT,
        "contributions_per_nw": {
            "inverse_q_debye": dq * NANOWATT,
            "fractional_frequency_resonant": transverse * NANOWATT,
            "fractional_frequency_debye": debye * NANOWATT,
        },
        "crossover_ds_s": ensemble::crossover_ds(&p)?,
    });

    let mut files = Vec::new();
    if !cfg.g_grid_hz.is_empty() || !cfg.xi_grid_m_per_w.is_empty() {
        let gs = if cfg.g_grid_hz.is_empty() {
            vec![cfg.g_hz]
        } else {
            cfg.g_grid_hz.clone()
        };
        let xis = if cfg.xi_grid_m_per_w.is_empty() {
            vec![cfg.xi_m_per_w]
        } else {
            cfg.xi_grid_m_per_w.clone()
        };
        let mut csv = CsvText::new(
            "tlsres.slopes_sweep/v1",
            &[],
            "g_hz,xi_m_per_w,slope_inv_q_per_nw,slope_dfrac_per_nw",
        );
        for &g in &gs {
            for &xi in &xis {
                let mut q = p.with_coupling(rad(g));
                q.xi = xi;
                let (a, b) = slopes(&q)?;
                csv.row(&[num(g), num(xi), num(a * NANOWATT), num(b * NANOWATT)]);
            }
        }
        let path = ctx.path(&cfg.sweep_csv);
        csv.write(&path)?;
        result["sweep_rows"] = json!(gs.len() * xis.len());
        files.push(path);
    }
    Ok(Output { result, files })
}
