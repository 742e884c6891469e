//! Superconducting-film response: penetration depth, kinetic inductance and
//! the frequency shifts they cause, plus the field-map utilities (local
//! potential from current density, cavity-perturbation participation ratio).

use crate::error::{ensure, Error, Result};
use crate::units::MU_0;
use serde::{Deserialize, Serialize};
use std::io::Read;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilmGeometry {
    /// d, m.
    pub thickness: f64,
    /// w, m.
    pub width: f64,
    /// l, m.
    pub length: f64,
}

impl FilmGeometry {
    pub fn new(thickness: f64, width: f64, length: f64) -> Result<Self> {
        let g = Self {
            thickness,
            width,
            length,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.thickness > 0.0, "thickness", "must be positive")?;
        ensure(self.width > 0.0, "width", "must be positive")?;
        ensure(self.length > 0.0, "length", "must be positive")?;
        Ok(())
    }

    fn cross_section(&self) -> f64 {
        self.thickness * self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperconductorParams {
    /// λ(0), m.
    pub lambda0: f64,
    pub t_c: f64,
    /// Total (kinetic + geometric) inductance per length L_t,l, H/m.
    pub total_inductance_per_length: f64,
    /// Superfluid pair density, m⁻³.
    pub pair_density: Option<f64>,
    /// C_t,l, F/m; only needed for an absolute resonance frequency.
    pub capacitance_per_length: Option<f64>,
}

impl SuperconductorParams {
    pub fn new(lambda0: f64, t_c: f64, total_inductance_per_length: f64) -> Result<Self> {
        let sc = Self {
            lambda0,
            t_c,
            total_inductance_per_length,
            pair_density: None,
            capacitance_per_length: None,
        };
        sc.validate()?;
        Ok(sc)
    }

    /// L_t,l taken as L_k,l(T0), for wires whose inductance is almost
    /// entirely kinetic.
    pub fn kinetic_dominated(lambda0: f64, t_c: f64, geom: &FilmGeometry, t0: f64) -> Result<Self> {
        ensure(lambda0 > 0.0, "lambda0", "must be positive")?;
        ensure(t_c > 0.0, "t_c", "must be positive")?;
        let lambda = lambda0 / penetration_factor(t0, t_c)?;
        Self::new(lambda0, t_c, MU_0 * lambda * lambda / geom.cross_section())
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.lambda0 > 0.0, "lambda0", "must be positive")?;
        ensure(self.t_c > 0.0, "t_c", "must be positive")?;
        ensure(
            self.total_inductance_per_length > 0.0,
            "total_inductance_per_length",
            "must be positive",
        )?;
        if let Some(n) = self.pair_density {
            ensure(n > 0.0, "pair_density", "must be positive")?;
        }
        if let Some(c) = self.capacitance_per_length {
            ensure(c > 0.0, "capacitance_per_length", "must be positive")?;
        }
        Ok(())
    }

    /// Half-wave resonance f_r = 1/(2l√(L_t,l C_t,l)), when C_t,l is known.
    pub fn half_wave_frequency(&self, geom: &FilmGeometry) -> Option<f64> {
        self.capacitance_per_length
            .map(|c| 1.0 / (2.0 * geom.length * (self.total_inductance_per_length * c).sqrt()))
    }
}

fn penetration_factor(t: f64, t_c: f64) -> Result<f64> {
    if !(0.0..t_c).contains(&t) {
        return Err(Error::TemperatureOutOfRange { temperature: t, t_c });
    }
    Ok((1.0 - (t / t_c).powi(4)).sqrt())
}

/// λ(T) = λ(0)/√(1 − (T/T_c)⁴) for 0 ≤ T < T_c.
pub fn penetration_depth(sc: &SuperconductorParams, t: f64) -> Result<f64> {
    Ok(sc.lambda0 / penetration_factor(t, sc.t_c)?)
}

/// L_k,l = μ₀λ(T)²/(d w), H/m.
pub fn kinetic_inductance_per_length(sc: &SuperconductorParams, geom: &FilmGeometry, t: f64) -> Result<f64> {
    geom.validate()?;
    let lambda = penetration_depth(sc, t)?;
    Ok(MU_0 * lambda * lambda / geom.cross_section())
}

/// λ(0) for which the whole wire has kinetic inductance `l_k_total` (H) at
/// T = 0.
pub fn lambda0_from_total_kinetic_inductance(l_k_total: f64, geom: &FilmGeometry) -> Result<f64> {
    ensure(l_k_total > 0.0, "l_k_total", "must be positive")?;
    geom.validate()?;
    Ok((l_k_total * geom.cross_section() / (MU_0 * geom.length)).sqrt())
}

/// Linearised Δf/f = −(μ₀/(L_t,l d w)) λ(T0) (λ(T) − λ(T0)).
pub fn freq_shift_from_temperature(sc: &SuperconductorParams, geom: &FilmGeometry, t: f64, t0: f64) -> Result<f64> {
    geom.validate()?;
    let l = penetration_depth(sc, t)?;
    let l0 = penetration_depth(sc, t0)?;
    Ok(-MU_0 / (sc.total_inductance_per_length * geom.cross_section()) * l0 * (l - l0))
}

/// Δf/f = −ΔL_k,l/(2L_t,l) without linearising λ.
pub fn freq_shift_from_inductance_change(
    sc: &SuperconductorParams,
    geom: &FilmGeometry,
    t: f64,
    t0: f64,
) -> Result<f64> {
    let dl = kinetic_inductance_per_length(sc, geom, t)? - kinetic_inductance_per_length(sc, geom, t0)?;
    Ok(-dl / (2.0 * sc.total_inductance_per_length))
}

/// Δf/f = −Δn_qp/(2 n_s).
pub fn freq_shift_from_quasiparticles(delta_n_qp: f64, pair_density: f64) -> Result<f64> {
    ensure(pair_density > 0.0, "pair_density", "must be positive")?;
    if delta_n_qp.abs() >= pair_density {
        return Err(Error::Domain {
            value: delta_n_qp,
            reason: "quasiparticle change must be smaller than the pair density".into(),
        });
    }
    Ok(-delta_n_qp / (2.0 * pair_density))
}

/// Δf/f = −p Re(Δε).
pub fn perturbation_frequency_shift(participation: f64, d_eps_real: f64) -> Result<f64> {
    ensure(
        (0.0..=1.0).contains(&participation),
        "participation",
        "must lie in [0, 1]",
    )?;
    Ok(-participation * d_eps_real)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentSample {
    #[serde(rename = "x_m")]
    pub x: f64,
    #[serde(rename = "y_m")]
    pub y: f64,
    #[serde(rename = "j_norm")]
    pub j: f64,
}

/// Normalised current density sampled along the resonator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurrentDensityMap {
    pub samples: Vec<CurrentSample>,
}

impl CurrentDensityMap {
    pub fn new(samples: Vec<CurrentSample>) -> Result<Self> {
        let map = Self { samples };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.samples {
            if !(0.0..=1.0).contains(&s.j) {
                return Err(Error::Domain {
                    value: s.j,
                    reason: "normalised current density must lie in [0, 1]".into(),
                });
            }
        }
        Ok(())
    }

    /// Reads the `x_m,y_m,j_norm` CSV; lines starting with `#` are skipped.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        Self::new(read_csv_rows(reader)?)
    }

    /// Mean of J over the samples not flagged in `exclude` (e.g. the
    /// corners of a meander, where the current crowds).
    pub fn mean_current(&self, exclude: impl Fn(&CurrentSample) -> bool) -> Result<f64> {
        let kept: Vec<f64> = self.samples.iter().filter(|s| !exclude(s)).map(|s| s.j).collect();
        if kept.is_empty() {
            return Err(Error::EmptyRegion("current-density samples"));
        }
        Ok(kept.iter().sum::<f64>() / kept.len() as f64)
    }
}

/// |V_local| = |cos(arcsin J)| = √(1 − J²) at each sample.
pub fn local_potential(map: &CurrentDensityMap) -> Result<Vec<f64>> {
    map.validate()?;
    Ok(map.samples.iter().map(|s| (1.0 - s.j * s.j).sqrt()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    #[serde(rename = "x_m")]
    pub x: f64,
    #[serde(rename = "y_m")]
    pub y: f64,
    #[serde(rename = "z_m")]
    pub z: f64,
    /// |E₀|².
    pub e2: f64,
    /// |H₀|².
    pub h2: f64,
    pub eps_re: f64,
    pub mu_re: f64,
    #[serde(deserialize_with = "flag")]
    pub in_local: bool,
    #[serde(rename = "cell_vol_m3")]
    pub cell_volume: f64,
}

fn flag<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    match u8::deserialize(d)? {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(serde::de::Error::custom(format!(
            "in_local must be 0 or 1, got {other}"
        ))),
    }
}

/// Sampled unperturbed fields over the whole mode volume W₀; `in_local`
/// marks the cells of the perturbed region.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldEnergyMaps {
    pub samples: Vec<FieldSample>,
}

impl FieldEnergyMaps {
    pub fn new(samples: Vec<FieldSample>) -> Result<Self> {
        let maps = Self { samples };
        maps.validate()?;
        Ok(maps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::EmptyRegion("field samples"));
        }
        for s in &self.samples {
            ensure(
                s.e2 >= 0.0 && s.h2 >= 0.0,
                "e2/h2",
                "field energies must be non-negative",
            )?;
            ensure(
                s.eps_re > 0.0 && s.mu_re > 0.0,
                "eps_re/mu_re",
                "weights must be positive",
            )?;
            ensure(s.cell_volume > 0.0, "cell_vol_m3", "must be positive")?;
        }
        Ok(())
    }

    /// Reads the `x_m,y_m,z_m,e2,h2,eps_re,mu_re,in_local,cell_vol_m3` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        Self::new(read_csv_rows(reader)?)
    }
}

/// p = Σ_local |E₀|² dV / Σ_all (Re ε |E₀|² + Re μ |H₀|²) dV.
pub fn participation_ratio(fields: &FieldEnergyMaps) -> Result<f64> {
    fields.validate()?;
    let mut local = 0.0;
    let mut total = 0.0;
    for s in &fields.samples {
        if s.in_local {
            local += s.e2 * s.cell_volume;
        }
        total += (s.eps_re * s.e2 + s.mu_re * s.h2) * s.cell_volume;
    }
    if total <= 0.0 {
        return Err(Error::EmptyRegion("field energy"));
    }
    Ok(local / total)
}

fn read_csv_rows<T: serde::de::DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (k, row) in rdr.deserialize().enumerate() {
        let row: T = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(k as u64 + 2),
            reason: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nbtin() -> (SuperconductorParams, FilmGeometry) {
        let geom = FilmGeometry::new(10e-9, 150e-9, 1.5e-3).unwrap();
        let sc = SuperconductorParams::kinetic_dominated(0.7e-6, 10.0, &geom, 0.02).unwrap();
        (sc, geom)
    }

    #[test]
    fn penetration_depth_values() {
        let (sc, _) = nbtin();
        assert_eq!(penetration_depth(&sc, 0.0).unwrap(), sc.lambda0);
        let t = sc.t_c * 0.5f64.powf(0.25);
        assert!((penetration_depth(&sc, t).unwrap() / sc.lambda0 - 2f64.sqrt()).abs() < 1e-12);
        assert!(penetration_depth(&sc, sc.t_c * 0.9999).unwrap() > 30.0 * sc.lambda0);
        assert!(matches!(
            penetration_depth(&sc, sc.t_c),
            Err(Error::TemperatureOutOfRange { .. })
        ));
        assert!(penetration_depth(&sc, -1.0).is_err());
    }

    #[test]
    fn kinetic_inductance_scalings() {
        let (sc, geom) = nbtin();
        let base = kinetic_inductance_per_length(&sc, &geom, 1.0).unwrap();
        let wide = FilmGeometry {
            width: 2.0 * geom.width,
            ..geom
        };
        assert!((kinetic_inductance_per_length(&sc, &wide, 1.0).unwrap() / base - 0.5).abs() < 1e-14);
        let deep = SuperconductorParams {
            lambda0: 2.0 * sc.lambda0,
            ..sc
        };
        assert!((kinetic_inductance_per_length(&deep, &geom, 1.0).unwrap() / base - 4.0).abs() < 1e-13);
    }

    #[test]
    fn kinetic_inductance_anchor() {
        let geom = FilmGeometry::new(10e-9, 150e-9, 1.5e-3).unwrap();
        let lambda0 = lambda0_from_total_kinetic_inductance(0.656e-6, &geom).unwrap();
        assert!((lambda0 - 0.72e-6).abs() < 0.01e-6, "{lambda0}");
        let sc = SuperconductorParams::new(lambda0, 10.0, 1.0).unwrap();
        let total = kinetic_inductance_per_length(&sc, &geom, 0.0).unwrap() * geom.length;
        assert!((total - 0.656e-6).abs() < 1e-15);
    }

    #[test]
    fn temperature_shift_properties() {
        let (sc, geom) = nbtin();
        assert_eq!(freq_shift_from_temperature(&sc, &geom, 0.5, 0.5).unwrap(), 0.0);
        let mut prev = 0.0;
        for k in 1..60 {
            let t = 0.02 + k as f64 * 0.15;
            let s = freq_shift_from_temperature(&sc, &geom, t, 0.02).unwrap();
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn linearised_shift_close_to_exact_for_small_changes() {
        let (sc, geom) = nbtin();
        // Find temperatures with Δλ/λ just under 0.5 %.
        let t0 = 3.0;
        let l0 = penetration_depth(&sc, t0).unwrap();
        let mut t = t0;
        while penetration_depth(&sc, t + 0.001).unwrap() / l0 - 1.0 < 0.005 {
            t += 0.001;
        }
        let lin = freq_shift_from_temperature(&sc, &geom, t, t0).unwrap();
        let exact = freq_shift_from_inductance_change(&sc, &geom, t, t0).unwrap();
        assert!((lin / exact - 1.0).abs() < 0.01, "{lin} {exact}");
    }

    #[test]
    fn half_wave_frequency_needs_capacitance() {
        let (mut sc, geom) = nbtin();
        assert!(sc.half_wave_frequency(&geom).is_none());
        sc.capacitance_per_length = Some(1e-10);
        let f = sc.half_wave_frequency(&geom).unwrap();
        assert!((f * 2.0 * geom.length * (sc.total_inductance_per_length * 1e-10).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quasiparticle_shift() {
        assert_eq!(freq_shift_from_quasiparticles(0.0, 1e26).unwrap(), 0.0);
        assert!((freq_shift_from_quasiparticles(1e24, 1e26).unwrap() + 0.005).abs() < 1e-15);
        assert!(freq_shift_from_quasiparticles(3e22, 1e26).unwrap() < 0.0);
        assert!(freq_shift_from_quasiparticles(1e26, 1e26).is_err());
        assert!(freq_shift_from_quasiparticles(-2e26, 1e26).is_err());
    }

    #[test]
    fn local_potential_values() {
        let map = CurrentDensityMap::new(vec![
            CurrentSample { x: 0.0, y: 0.0, j: 0.0 },
            CurrentSample { x: 1.0, y: 0.0, j: 1.0 },
            CurrentSample { x: 2.0, y: 0.0, j: 0.6 },
        ])
        .unwrap();
        let v = local_potential(&map).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 0.0);
        assert!((v[2] - 0.8).abs() < 1e-15);
        assert!(CurrentDensityMap::new(vec![CurrentSample { x: 0.0, y: 0.0, j: 1.2 }]).is_err());
    }

    #[test]
    fn mean_current_excluding_corners() {
        let map = CurrentDensityMap::new(vec![
            CurrentSample { x: 0.0, y: 0.0, j: 0.9 },
            CurrentSample { x: 5.0, y: 0.0, j: 0.2 },
            CurrentSample {
                x: 10.0,
                y: 0.0,
                j: 0.4,
            },
        ])
        .unwrap();
        let m = map.mean_current(|s| s.x == 0.0).unwrap();
        assert!((m - 0.3).abs() < 1e-15);
        assert!(map.mean_current(|_| true).is_err());
    }

    #[test]
    fn current_map_csv() {
        let text = "# from solver\nx_m,y_m,j_norm\n0,0,0.5\n1e-6,0,1\n";
        let map = CurrentDensityMap::from_csv(text.as_bytes()).unwrap();
        assert_eq!(map.samples.len(), 2);
        let bad = "x_m,y_m,j_norm\n0,0,0.5\n1e-6,zero,1\n";
        match CurrentDensityMap::from_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    fn sample(e2: f64, h2: f64, local: bool) -> FieldSample {
        FieldSample {
            x: 0.0,
            y: 0.0,
            z: 0.0,
            e2,
            h2,
            eps_re: 1.0,
            mu_re: 1.0,
            in_local: local,
            cell_volume: 1e-18,
        }
    }

    #[test]
    fn participation_limits() {
        let none = FieldEnergyMaps::new(vec![sample(1.0, 0.5, false), sample(2.0, 0.0, false)]).unwrap();
        assert_eq!(participation_ratio(&none).unwrap(), 0.0);
        let all = FieldEnergyMaps::new(vec![sample(1.0, 0.0, true), sample(2.0, 0.0, true)]).unwrap();
        assert!((participation_ratio(&all).unwrap() - 1.0).abs() < 1e-15);
        assert!(FieldEnergyMaps::new(vec![]).is_err());
    }

    #[test]
    fn participation_halving_local_field() {
        let maps = FieldEnergyMaps::new(vec![sample(4.0, 1.0, true), sample(2.0, 3.0, false)]).unwrap();
        let p = participation_ratio(&maps).unwrap();
        assert!((p - 4.0 / 10.0).abs() < 1e-15);
        let halved = FieldEnergyMaps::new(vec![sample(2.0, 1.0, true), sample(2.0, 3.0, false)]).unwrap();
        assert!((participation_ratio(&halved).unwrap() - 2.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn field_csv_round_trip() {
        let text =
            "x_m,y_m,z_m,e2,h2,eps_re,mu_re,in_local,cell_vol_m3\n0,0,0,1,0,11.7,1,1,1e-18\n1,0,0,1,1,1,1,0,1e-18\n";
        let maps = FieldEnergyMaps::from_csv(text.as_bytes()).unwrap();
        assert!(maps.samples[0].in_local && !maps.samples[1].in_local);
        let p = participation_ratio(&maps).unwrap();
        assert!((p - 1.0 / 13.7).abs() < 1e-14);
        let bad = text.replace(",1,1e-18\n1,0", ",2,1e-18\n1,0");
        assert!(FieldEnergyMaps::from_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn perturbation_shift() {
        assert_eq!(perturbation_frequency_shift(0.3, 0.0).unwrap(), 0.0);
        assert!((perturbation_frequency_shift(0.1, 4e-4).unwrap() + 4e-5).abs() < 1e-18);
        assert!(perturbation_frequency_shift(0.1, -4e-4).unwrap() > 0.0);
        assert!(perturbation_frequency_shift(1.5, 1e-4).is_err());
    }

    proptest! {
        #[test]
        fn potential_and_current_are_complementary(j in 0.0f64..=1.0) {
            let map = CurrentDensityMap::new(vec![CurrentSample { x: 0.0, y: 0.0, j }]).unwrap();
            let v = local_potential(&map).unwrap()[0];
            prop_assert!((v * v + j * j - 1.0).abs() < 1e-15);
        }

        #[test]
        fn participation_scale_invariant(k in 1e-6f64..1e6, e in 0.1f64..10.0, h in 0.0f64..10.0) {
            let base = FieldEnergyMaps::new(vec![sample(e, h, true), sample(2.0, h, false)]).unwrap();
            let scaled = FieldEnergyMaps::new(vec![sample(k * e, k * h, true), sample(k * 2.0, k * h, false)]).unwrap();
            let (a, b) = (participation_ratio(&base).unwrap(), participation_ratio(&scaled).unwrap());
            prop_assert!((a - b).abs() < 1e-13 * a);
        }

        #[test]
        fn lambda_and_inductance_increase(t1 in 0.0f64..9.9, dt in 1e-3f64..0.09) {
            let (sc, geom) = nbtin();
            let t2 = t1 + dt;
            prop_assert!(penetration_depth(&sc, t2).unwrap() > penetration_depth(&sc, t1).unwrap());
            prop_assert!(kinetic_inductance_per_length(&sc, &geom, t2).unwrap() > kinetic_inductance_per_length(&sc, &geom, t1).unwrap());
            prop_assert!(freq_shift_from_temperature(&sc, &geom, t2, t1).unwrap() < 0.0);
        }
    }
}
