//! Problem data model, random scenario generation and the instance file format.
//!
//! Terminals are indexed jointly throughout the solvers: indices `0..K` are
//! SUEs and `K..K+N` are base stations. The association and allocation types
//! keep the two groups in separate matrices.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::channel::{channel_gain, ChannelParams, TerminalKind};
use crate::error::{Error, Result};
use crate::geometry::{
    boresight_angle, geodetic_to_cartesian, offset_to_geodetic, place_constellation, GeodeticPoint,
    EARTH_RADIUS_M,
};
use crate::units::{dbm_per_hz_to_watts, dbw_to_watts};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Side of the square deployment area, m.
    pub area_side: f64,
    pub center: GeodeticPoint,
    pub num_satellites: usize,
    pub num_bs: usize,
    pub num_sue: usize,
    pub mean_ues_per_bs: f64,
    /// Demand of every SUE and every terrestrial UE, bit/s.
    pub demand_per_user: f64,
    pub sat_altitude: f64,
    /// Latitude step between adjacent satellites, degrees.
    pub lat_spacing: f64,
    pub p_max_sue_dbw: f64,
    pub p_max_bs_dbw: f64,
    /// Per-satellite bandwidth in Hz; a single value applies to all satellites.
    pub w_leo: Vec<f64>,
    pub channel: ChannelParams,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_side: 5000.0,
            center: GeodeticPoint {
                latitude: 40.0,
                longitude: 20.0,
                altitude: 0.0,
            },
            num_satellites: 3,
            num_bs: 10,
            num_sue: 10,
            mean_ues_per_bs: 10.0,
            demand_per_user: 1e8,
            sat_altitude: 340e3,
            lat_spacing: 0.02,
            p_max_sue_dbw: 20.0,
            p_max_bs_dbw: 40.0,
            w_leo: vec![500e6],
            channel: ChannelParams::default(),
            rng_seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.center.validate()?;
        self.channel.validate()?;
        let positive = [
            ("area_side", self.area_side),
            ("mean_ues_per_bs", self.mean_ues_per_bs),
            ("demand_per_user", self.demand_per_user),
            ("sat_altitude", self.sat_altitude),
            ("lat_spacing", self.lat_spacing),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.num_satellites == 0 {
            return Err(Error::InvalidInput("num_satellites must be positive".into()));
        }
        if self.num_bs + self.num_sue == 0 {
            return Err(Error::InvalidInput("scenario has no terminals".into()));
        }
        if !(self.w_leo.len() == 1 || self.w_leo.len() == self.num_satellites) {
            return Err(Error::InvalidInput(format!(
                "w_leo must have 1 or {} entries, got {}",
                self.num_satellites,
                self.w_leo.len()
            )));
        }
        if self.w_leo.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidInput("w_leo entries must be positive".into()));
        }
        if !(self.p_max_sue_dbw.is_finite() && self.p_max_bs_dbw.is_finite()) {
            return Err(Error::InvalidInput("power caps must be finite".into()));
        }
        Ok(())
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        if self.w_leo.len() == 1 {
            vec![self.w_leo[0]; self.num_satellites]
        } else {
            self.w_leo.clone()
        }
    }
}

/// Data for one optimisation run. Matrices are row-per-satellite.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    /// M×K linear SUE gains.
    pub h: Vec<Vec<f64>>,
    /// M×N linear BS gains.
    pub g: Vec<Vec<f64>>,
    pub demand_sue: Vec<f64>,
    pub demand_bs: Vec<f64>,
    pub p_max_sue: Vec<f64>,
    pub p_max_bs: Vec<f64>,
    pub w_leo: Vec<f64>,
    /// Noise density per satellite, W/Hz.
    pub noise: Vec<f64>,
    pub ue_counts: Vec<u32>,
    /// Uniform per-UE demand behind `demand_bs`, when known.
    pub ue_demand: Option<f64>,
    pub seed: Option<u64>,
}

impl ProblemInstance {
    pub fn num_satellites(&self) -> usize {
        self.w_leo.len()
    }

    pub fn num_sue(&self) -> usize {
        self.demand_sue.len()
    }

    pub fn num_bs(&self) -> usize {
        self.demand_bs.len()
    }

    pub fn num_terminals(&self) -> usize {
        self.num_sue() + self.num_bs()
    }

    pub fn kind(&self, t: usize) -> TerminalKind {
        if t < self.num_sue() {
            TerminalKind::Sue
        } else {
            TerminalKind::Bs
        }
    }

    pub fn gain(&self, m: usize, t: usize) -> f64 {
        let k = self.num_sue();
        if t < k {
            self.h[m][t]
        } else {
            self.g[m][t - k]
        }
    }

    pub fn demand(&self, t: usize) -> f64 {
        let k = self.num_sue();
        if t < k {
            self.demand_sue[t]
        } else {
            self.demand_bs[t - k]
        }
    }

    pub fn p_max(&self, t: usize) -> f64 {
        let k = self.num_sue();
        if t < k {
            self.p_max_sue[t]
        } else {
            self.p_max_bs[t - k]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.num_satellites();
        let (k, n) = (self.num_sue(), self.num_bs());
        if m == 0 {
            return Err(Error::field("W_leo", "at least one satellite is required"));
        }
        check_matrix("h", &self.h, m, k)?;
        check_matrix("g", &self.g, m, n)?;
        check_len("p_max_sue", self.p_max_sue.len(), k)?;
        check_len("p_max_bs", self.p_max_bs.len(), n)?;
        check_len("noise", self.noise.len(), m)?;
        check_len("ue_counts", self.ue_counts.len(), n)?;
        for (name, v) in [
            ("demand_sue", &self.demand_sue),
            ("demand_bs", &self.demand_bs),
            ("p_max_sue", &self.p_max_sue),
            ("p_max_bs", &self.p_max_bs),
            ("W_leo", &self.w_leo),
            ("noise", &self.noise),
        ] {
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(Error::field(name, format!("entries must be positive and finite, found {x}")));
            }
        }
        if let Some(r) = self.ue_demand {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::field("ue_demand", "must be positive"));
            }
            for (i, (&d, &l)) in self.demand_bs.iter().zip(&self.ue_counts).enumerate() {
                let expected = f64::from(l) * r;
                if (d - expected).abs() > 1e-12 * expected.max(d) {
                    return Err(Error::field(
                        "demand_bs",
                        format!("entry {i} is {d} but its {l} UEs demand {expected}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = InstanceFile {
            num_satellites: self.num_satellites(),
            num_sue: self.num_sue(),
            num_bs: self.num_bs(),
            seed: self.seed,
            ue_demand: self.ue_demand,
            w_leo: self.w_leo.clone(),
            noise: self.noise.clone(),
            demand_sue: self.demand_sue.clone(),
            demand_bs: self.demand_bs.clone(),
            ue_counts: self.ue_counts.clone(),
            p_max_sue: self.p_max_sue.clone(),
            p_max_bs: self.p_max_bs.clone(),
            h: self.h.clone(),
            g: self.g.clone(),
        };
        let mut out = String::from(INSTANCE_HEADER);
        out.push_str(&toml::to_string(&file).expect("instance serialises to TOML"));
        out
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let m = read_count(&table, "num_satellites")?;
        let k = read_count(&table, "num_sue")?;
        let n = read_count(&table, "num_bs")?;
        let inst = Self {
            h: read_matrix(&table, "h")?,
            g: read_matrix(&table, "g")?,
            demand_sue: read_vec(&table, "demand_sue")?,
            demand_bs: read_vec(&table, "demand_bs")?,
            p_max_sue: read_vec(&table, "p_max_sue")?,
            p_max_bs: read_vec(&table, "p_max_bs")?,
            w_leo: read_vec(&table, "W_leo")?,
            noise: read_vec(&table, "noise")?,
            ue_counts: read_vec(&table, "ue_counts")?
                .into_iter()
                .map(|x| {
                    if x.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&x) {
                        Ok(x as u32)
                    } else {
                        Err(Error::field("ue_counts", format!("{x} is not a count")))
                    }
                })
                .collect::<Result<_>>()?,
            ue_demand: match table.get("ue_demand") {
                None => None,
                Some(v) => Some(as_f64(v).ok_or_else(|| Error::field("ue_demand", "expected a number"))?),
            },
            seed: match table.get("seed") {
                None => None,
                Some(toml::Value::Integer(s)) if *s >= 0 => Some(*s as u64),
                Some(_) => return Err(Error::field("seed", "expected a non-negative integer")),
            },
        };
        check_len("W_leo", inst.w_leo.len(), m)?;
        check_len("demand_sue", inst.demand_sue.len(), k)?;
        check_len("demand_bs", inst.demand_bs.len(), n)?;
        inst.validate()?;
        Ok(inst)
    }
}

const INSTANCE_HEADER: &str = "\
# LEO uplink association / power / bandwidth problem instance.
#
# Units: bandwidths in Hz, powers in W, rates in bit/s, noise in W/Hz,
# channel gains linear (dimensionless).
#
#   h[m][k]        gain satellite m -> SUE k          (num_satellites x num_sue)
#   g[m][n]        gain satellite m -> BS n           (num_satellites x num_bs)
#   demand_sue[k]  required SUE rate
#   demand_bs[n]   aggregate backhaul demand of BS n (ue_counts[n] * ue_demand)
#   p_max_sue[k]   SUE transmit power cap
#   p_max_bs[n]    BS transmit power cap
#   W_leo[m]       bandwidth budget of satellite m
#   noise[m]       noise power density at satellite m
#   seed           generator seed (optional)
";

#[derive(Serialize)]
struct InstanceFile {
    num_satellites: usize,
    num_sue: usize,
    num_bs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ue_demand: Option<f64>,
    #[serde(rename = "W_leo")]
    w_leo: Vec<f64>,
    noise: Vec<f64>,
    demand_sue: Vec<f64>,
    demand_bs: Vec<f64>,
    ue_counts: Vec<u32>,
    p_max_sue: Vec<f64>,
    p_max_bs: Vec<f64>,
    h: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn read_count(table: &toml::Table, key: &str) -> Result<usize> {
    match table.get(key) {
        None => Err(Error::field(key, "missing")),
        Some(toml::Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
        Some(_) => Err(Error::field(key, "expected a non-negative integer")),
    }
}

fn read_vec(table: &toml::Table, key: &str) -> Result<Vec<f64>> {
    let arr = table
        .get(key)
        .ok_or_else(|| Error::field(key, "missing"))?
        .as_array()
        .ok_or_else(|| Error::field(key, "expected an array of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| as_f64(v).ok_or_else(|| Error::field(key, format!("entry {i} is not a number"))))
        .collect()
}

fn read_matrix(table: &toml::Table, key: &str) -> Result<Vec<Vec<f64>>> {
    let rows = table
        .get(key)
        .ok_or_else(|| Error::field(key, "missing"))?
        .as_array()
        .ok_or_else(|| Error::field(key, "expected an array of rows"))?;
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            row.as_array()
                .ok_or_else(|| Error::field(key, format!("row {r} is not an array")))?
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    as_f64(v).ok_or_else(|| Error::field(key, format!("entry [{r}][{c}] is not a number")))
                })
                .collect()
        })
        .collect()
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::field(name, format!("expected {want} entries, found {got}")));
    }
    Ok(())
}

fn check_matrix(name: &str, mat: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    check_len(name, mat.len(), rows)?;
    for (r, row) in mat.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::field(name, format!("row {r} has {} entries, expected {cols}", row.len())));
        }
        if let Some(x) = row.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::field(name, format!("row {r} has non-positive gain {x}")));
        }
    }
    Ok(())
}

/// A generated instance with the terminal layout that produced it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub instance: ProblemInstance,
    pub sue_positions: Vec<GeodeticPoint>,
    pub bs_positions: Vec<GeodeticPoint>,
}

/// Draws terminal positions and UE counts, then computes all link gains.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let half = config.area_side / 2.0;
    let mut place = |count: usize| -> Vec<GeodeticPoint> {
        (0..count)
            .map(|_| {
                let east = rng.random_range(-half..half);
                let north = rng.random_range(-half..half);
                offset_to_geodetic(&config.center, east, north, 0.0)
            })
            .collect()
    };
    let sue_positions = place(config.num_sue);
    let bs_positions = place(config.num_bs);

    let poisson = Poisson::new(config.mean_ues_per_bs)
        .map_err(|e| Error::InvalidInput(format!("mean_ues_per_bs: {e}")))?;
    let ue_counts: Vec<u32> = (0..config.num_bs)
        .map(|_| loop {
            let l = poisson.sample(&mut rng) as u32;
            if l > 0 {
                break l;
            }
        })
        .collect();

    let sats = place_constellation(
        &config.center,
        config.num_satellites,
        config.lat_spacing,
        config.sat_altitude,
    )?;
    let null = config.channel.first_null_angle();
    let gains = |points: &[GeodeticPoint], kind: TerminalKind| -> Result<Vec<Vec<f64>>> {
        let cart: Vec<_> = points.iter().map(|p| geodetic_to_cartesian(p, EARTH_RADIUS_M)).collect();
        for (i, c) in cart.iter().enumerate() {
            if let Some(null) = null {
                let mut visible = false;
                for s in &sats {
                    if boresight_angle(s, c)? < null {
                        visible = true;
                    }
                }
                if !visible {
                    return Err(Error::InvalidInput(format!(
                        "{kind:?} {i} lies beyond the first beam null of every satellite"
                    )));
                }
            }
        }
        sats.iter()
            .map(|s| {
                cart.iter()
                    .map(|c| {
                        let v = channel_gain(s, c, kind, &config.channel)?;
                        if v > 0.0 && v.is_finite() {
                            Ok(v)
                        } else {
                            Err(Error::InvalidInput(format!("{kind:?} sees zero gain from satellite {}", s.id)))
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let h = gains(&sue_positions, TerminalKind::Sue)?;
    let g = gains(&bs_positions, TerminalKind::Bs)?;

    let r = config.demand_per_user;
    let instance = ProblemInstance {
        h,
        g,
        demand_sue: vec![r; config.num_sue],
        demand_bs: ue_counts.iter().map(|&l| f64::from(l) * r).collect(),
        p_max_sue: vec![dbw_to_watts(config.p_max_sue_dbw); config.num_sue],
        p_max_bs: vec![dbw_to_watts(config.p_max_bs_dbw); config.num_bs],
        w_leo: config.bandwidths(),
        noise: vec![dbm_per_hz_to_watts(config.channel.noise_density_dbm_hz); config.num_satellites],
        ue_counts,
        ue_demand: Some(r),
        seed: Some(config.rng_seed),
    };
    instance.validate()?;
    Ok(Scenario {
        instance,
        sue_positions,
        bs_positions,
    })
}

/// Renders a config as TOML with a short header.
pub fn config_to_toml(config: &ScenarioConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Scenario configuration (SI units; powers in dBW, noise in dBm/Hz)");
    s.push_str(&toml::to_string(config).expect("config serialises to TOML"));
    s
}

pub fn config_from_toml(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
