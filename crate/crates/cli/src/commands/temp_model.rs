use crate::error::{Checks, CliResult};
use crate::output::{num, Context, CsvText, Output};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tlsres::superconductor::{freq_shift_from_inductance_change, FilmGeometry, SuperconductorParams};
use tlsres::tls::temperature_permittivity_shift;
use tlsres::units::{K_B, PLANCK};
use tlsres::{ThermalEnvironment, TlsHostMaterial};

#[derive(Debug, Default, Args, Serialize)]
pub struct Flags {
    /// Resonance frequencies (comma separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_r_hz: Option<Vec<f64>>,
    /// Temperatures, echoed verbatim in the output (comma separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_grid_k: Option<Vec<f64>>,
    /// Log-spaced grid used when --t-grid-k is not given.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min_k: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max_k: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_points: Option<usize>,
    /// Shifts are relative to this temperature; defaults to the lowest one.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_ref_k: Option<f64>,
    /// Participation ratio times intrinsic TLS loss, p·δ_TLS.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_delta: Option<f64>,
    /// Critical temperature; enables the kinetic-inductance term.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_c_k: Option<f64>,
    /// Kinetic share of the total inductance, L_k/L_t.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kinetic_fraction: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub f_r_hz: Vec<f64>,
    pub t_grid_k: Vec<f64>,
    pub t_min_k: f64,
    pub t_max_k: f64,
    pub t_points: usize,
    pub t_ref_k: Option<f64>,
    pub p_delta: f64,
    pub t_c_k: Option<f64>,
    pub kinetic_fraction: f64,
    pub output_csv: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            f_r_hz: vec![2.418e9, 4.884e9, 7.061e9, 11.63e9],
            t_grid_k: Vec::new(),
            t_min_k: 0.01,
            t_max_k: 2.0,
            t_points: 81,
            t_ref_k: None,
            p_delta: 2e-5,
            t_c_k: None,
            kinetic_fraction: 1.0,
            output_csv: "temp_model.csv".into(),
        }
    }
}

impl Config {
    fn grid(&self) -> Vec<f64> {
        if !self.t_grid_k.is_empty() {
            return self.t_grid_k.clone();
        }
        let n = self.t_points - 1;
        let (a, b) = (self.t_min_k.ln(), self.t_max_k.ln());
        (0..=n)
            .map(|k| match k {
                0 => self.t_min_k,
                k if k == n => self.t_max_k,
                k => (a + (b - a) * k as f64 / n as f64).exp(),
            })
            .collect()
    }

    fn check(&self) -> CliResult<()> {
        let mut c = Checks::default();
        c.require(!self.f_r_hz.is_empty(), "f_r_hz", "needs at least one frequency")
            .require(
                self.f_r_hz.iter().all(|f| f.is_finite() && *f > 0.0),
                "f_r_hz",
                "values must be positive",
            )
            .require(
                self.t_grid_k.iter().all(|t| t.is_finite() && *t > 0.0),
                "t_grid_k",
                "values must be positive",
            )
            .non_negative("p_delta", self.p_delta)
            .require(
                self.kinetic_fraction > 0.0 && self.kinetic_fraction <= 1.0,
                "kinetic_fraction",
                "must lie in (0, 1]",
            );
        if self.t_grid_k.is_empty() {
            c.positive("t_min_k", self.t_min_k)
                .require(self.t_max_k > self.t_min_k, "t_max_k", "must exceed --t-min-k")
                .require(self.t_points >= 2, "t_points", "must be at least 2");
        }
        if let Some(t) = self.t_ref_k {
            c.positive("t_ref_k", t);
        }
        if let Some(tc) = self.t_c_k {
            c.positive("t_c_k", tc);
            let hottest = self.grid().into_iter().chain(self.t_ref_k).fold(0.0, f64::max);
            c.require(hottest < tc, "t_grid_k", "must stay below --t-c-k");
        }
        c.finish()
    }
}

pub fn run(cfg: &Config, ctx: &Context) -> CliResult<Output> {
    cfg.check()?;
    let temps = cfg.grid();
    let t_ref = cfg
        .t_ref_k
        .unwrap_or_else(|| temps.iter().copied().fold(f64::INFINITY, f64::min));
    let host = TlsHostMaterial::phenomenological(1.0, cfg.p_delta)?;
    let tls = |f: f64, t: f64| -> CliResult<f64> {
        Ok(temperature_permittivity_shift(f, &ThermalEnvironment::new(t)?, &host))
    };

    // With L_t = L_k(T_ref)/α the film dimensions and λ(0) cancel, so a unit
    // film stands in for the real one.
    let sc = match cfg.t_c_k {
        Some(t_c) => {
            let geom = FilmGeometry::new(1.0, 1.0, 1.0)?;
            let mut sc = SuperconductorParams::kinetic_dominated(1e-7, t_c, &geom, t_ref)?;
            sc.total_inductance_per_length /= cfg.kinetic_fraction;
            Some((sc, geom))
        }
        None => None,
    };

    let mut csv = CsvText::new(
        "tlsres.temp_model/v1",
        &[("t_ref_k", num(t_ref)), ("p_delta", num(cfg.p_delta))],
        "t_k,f_r_hz,dfrac_tls,dfrac_qp,dfrac_total",
    );
    let mut modes = Vec::new();
    for &f in &cfg.f_r_hz {
        let base = tls(f, t_ref)?;
        let mut curve = Vec::with_capacity(temps.len());
        for &t in &temps {
            let d_tls = tls(f, t)? - base;
            let d_qp = match &sc {
                Some((sc, geom)) => freq_shift_from_inductance_change(sc, geom, t, t_ref)?,
                None => 0.0,
            };
            csv.row(&[num(t), num(f), num(d_tls), num(d_qp), num(d_tls + d_qp)]);
            curve.push((t, d_tls));
        }
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        modes.push(json!({
            "f_r_hz": f,
            "hf_over_kb_k": PLANCK * f / K_B,
            "kink_t_k": kink(&curve),
        }));
    }
    let path = ctx.path(&cfg.output_csv);
    csv.write(&path)?;
    Ok(Output {
        result: json!({
            "t_ref_k": t_ref,
            "rows": temps.len() * cfg.f_r_hz.len(),
            "superconductor_term": sc.is_some(),
            "modes": modes,
        }),
        files: vec![path],
    })
}

/// Temperature of the interior minimum of the TLS term (where its slope
/// changes sign), if the grid brackets one.
fn kink(curve: &[(f64, f64)]) -> Option<f64> {
    let (i, &(t, y)) = curve.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    (i > 0 && i + 1 < curve.len() && y < curve[i - 1].1 && y < curve[i + 1].1).then_some(t)
}
