use super::{hz, rad};
use crate::error::{Checks, CliResult};
use crate::output::{num, Context, CsvText, Output, MC_SCHEMA};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tlsres::ensemble::NANOWATT;
use tlsres::monte_carlo::{self, Centering, FrequencyWindow, SampleStats};
use tlsres::McConfig;

#[derive(Debug, Default, Args, Serialize)]
pub struct Flags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_r_hz: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_max_hz: Option<f64>,
    #[arg(long, value_parser = ["up_to_cutoff", "symmetric_detuning"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<String>,
    /// No TLS is drawn within this distance of f_r.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclusion_hz: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_length_m: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_edge_m: Option<f64>,
    #[arg(long, alias = "xi")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_m_per_w: Option<f64>,
    #[arg(long, alias = "rho")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_tls: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thickness_m: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width_m: Option<f64>,
    #[arg(long, alias = "g")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_hz: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1_hz: Option<f64>,
    #[arg(long, value_parser = ["match_moments", "literal"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centering: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_mean: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_std: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_population: Option<bool>,
    #[arg(long, alias = "ds")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds_s: Option<f64>,
    /// Evenly spaced powers 0..=p_max_w, unless --p-grid-w is given.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max_w: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_points: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_grid_w: Option<Vec<f64>>,
    /// Restrict the per-trial slope fit to [lo, hi] W.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window_w: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials_csv: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate_csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub trials: usize,
    pub seed: u64,
    pub f_r_hz: f64,
    pub f_max_hz: f64,
    pub window: FrequencyWindow,
    pub exclusion_hz: f64,
    pub half_length_m: f64,
    pub l_edge_m: f64,
    pub xi_m_per_w: f64,
    pub rho_tls: f64,
    pub thickness_m: f64,
    pub width_m: f64,
    pub g_hz: f64,
    pub gamma1_hz: f64,
    pub centering: Centering,
    pub s_mean: f64,
    pub s_std: f64,
    pub clamp_population: bool,
    pub ds_s: f64,
    pub p_max_w: f64,
    pub p_points: usize,
    pub p_grid_w: Vec<f64>,
    pub fit_window_w: Option<Vec<f64>>,
    pub trials_csv: String,
    pub aggregate_csv: String,
}

/// TLS layer thickness behind the default cross-section.
const DEFAULT_THICKNESS: f64 = 2e-9;

impl Default for Config {
    fn default() -> Self {
        let m = McConfig::default();
        Self {
            trials: m.trials,
            seed: m.seed,
            f_r_hz: hz(m.omega_r),
            f_max_hz: hz(m.omega_max),
            window: m.window,
            exclusion_hz: hz(m.exclusion),
            half_length_m: m.half_length,
            l_edge_m: m.l_edge,
            xi_m_per_w: m.xi,
            rho_tls: m.rho_tls,
            thickness_m: DEFAULT_THICKNESS,
            width_m: m.area / DEFAULT_THICKNESS,
            g_hz: hz(m.g_mean),
            gamma1_hz: hz(m.gamma1_mean),
            centering: m.centering,
            s_mean: m.s_mean,
            s_std: m.s_std,
            clamp_population: m.clamp_population,
            ds_s: m.ds,
            p_max_w: *m.p_grid.last().expect("default grid"),
            p_points: m.p_grid.len(),
            p_grid_w: Vec::new(),
            fit_window_w: None,
            trials_csv: "mc_trials.csv".into(),
            aggregate_csv: "mc_aggregate.csv".into(),
        }
    }
}

impl Config {
    pub fn mc_config(&self) -> CliResult<McConfig> {
        let mut c = Checks::default();
        c.require(self.trials >= 1, "trials", "must be at least 1")
            .positive("f_r_hz", self.f_r_hz)
            .positive("f_max_hz", self.f_max_hz)
            .non_negative("exclusion_hz", self.exclusion_hz)
            .positive("half_length_m", self.half_length_m)
            .positive("l_edge_m", self.l_edge_m)
            .non_negative("xi_m_per_w", self.xi_m_per_w)
            .non_negative("rho_tls", self.rho_tls)
            .positive("thickness_m", self.thickness_m)
            .positive("width_m", self.width_m)
            .non_negative("g_hz", self.g_hz)
            .positive("gamma1_hz", self.gamma1_hz)
            .non_negative("s_std", self.s_std)
            .non_negative("ds_s", self.ds_s);
        if self.p_grid_w.is_empty() {
            c.positive("p_max_w", self.p_max_w)
                .require(self.p_points >= 2, "p_points", "must be at least 2");
        }
        if let Some(w) = &self.fit_window_w {
            c.require(
                w.len() == 2 && w[0] <= w[1],
                "fit_window_w",
                "must be two ordered powers",
            );
        }
        c.finish()?;

        let p_grid = if self.p_grid_w.is_empty() {
            let n = self.p_points - 1;
            (0..=n).map(|k| self.p_max_w * k as f64 / n as f64).collect()
        } else {
            self.p_grid_w.clone()
        };
        let m = McConfig {
            trials: self.trials,
            seed: self.seed,
            omega_r: rad(self.f_r_hz),
            omega_max: rad(self.f_max_hz),
            window: self.window,
            exclusion: rad(self.exclusion_hz),
            half_length: self.half_length_m,
            l_edge: self.l_edge_m,
            xi: self.xi_m_per_w,
            rho_tls: self.rho_tls,
            area: self.thickness_m * self.width_m,
            g_mean: rad(self.g_hz),
            gamma1_mean: rad(self.gamma1_hz),
            centering: self.centering,
            s_mean: self.s_mean,
            s_std: self.s_std,
            clamp_population: self.clamp_population,
            ds: self.ds_s,
            p_grid,
            fit_window: self.fit_window_w.as_ref().map(|w| (w[0], w[1])),
        };
        m.validate()?;
        Ok(m)
    }
}

fn stats_per_nw(s: &SampleStats) -> serde_json::Value {
    json!({
        "mean": s.mean * NANOWATT,
        "std": s.std * NANOWATT,
        "std_error": s.std_error * NANOWATT,
    })
}

pub fn run(cfg: &Config, ctx: &Context) -> CliResult<Output> {
    let m = cfg.mc_config()?;
    let res = monte_carlo::run(&m)?;

    let meta = [("seed", cfg.seed.to_string()), ("trials", cfg.trials.to_string())];
    let mut trials = CsvText::new(MC_SCHEMA, &meta, "p_opt_w,trial,dinv_q,dfrac_freq");
    for (k, t) in res.trials.iter().enumerate() {
        for (j, &p) in res.p_grid.iter().enumerate() {
            trials.row(&[num(p), k.to_string(), num(t.dinv_q[j]), num(t.dfrac[j])]);
        }
    }
    let mut aggregate = CsvText::new(MC_SCHEMA, &meta, "p_opt_w,mean_dinv_q,std_dinv_q,mean_dfrac,std_dfrac");
    for (j, &p) in res.p_grid.iter().enumerate() {
        aggregate.row(&[
            num(p),
            num(res.mean_dinv_q[j]),
            num(res.std_dinv_q[j]),
            num(res.mean_dfrac[j]),
            num(res.std_dfrac[j]),
        ]);
    }
    let trials_path = ctx.path(&cfg.trials_csv);
    let aggregate_path = ctx.path(&cfg.aggregate_csv);
    trials.write(&trials_path)?;
    aggregate.write(&aggregate_path)?;

    let mut warnings = Vec::new();
    if m.expected_count() == 0.0 {
        warnings.push("empty ensemble: the expected TLS count is zero, all curves are zero".to_string());
    } else if res.empty_trials > 0 {
        warnings.push(format!("{} of {} trials drew no TLS", res.empty_trials, m.trials));
    }
    let counts = SampleStats::of(res.trials.iter().map(|t| t.tls_count as f64));
    let result = json!({
        "seed": m.seed,
        "trials": m.trials,
        "expected_tls_count": m.expected_count(),
        "mean_tls_count": counts.mean,
        "empty_trials": res.empty_trials,
        "slope_inverse_q_per_nw": stats_per_nw(&res.slope_inv_q),
        "slope_fractional_frequency_per_nw": stats_per_nw(&res.slope_dfrac),
        "warnings": warnings,
    });
    Ok(Output {
        result,
        files: vec![trials_path, aggregate_path],
    })
}
