//! Link gains from geometry: free-space path loss, antenna gains and the
//! circular-aperture beam pattern.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boresight_angle, slant_range, CartesianVector, SatelliteState};
use crate::units::db_to_linear;

pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// First positive zero of J1.
pub const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalKind {
    Sue,
    Bs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Carrier frequency, Hz.
    pub carrier_frequency: f64,
    /// Satellite antenna aperture radius, m.
    pub aperture_radius: f64,
    pub gain_leo_dbi: f64,
    pub gain_sue_dbi: f64,
    pub gain_bs_dbi: f64,
    /// Receiver noise density at every satellite, dBm/Hz.
    pub noise_density_dbm_hz: f64,
    /// 2 for the tapered `4 (J1(u)/u)^2` pattern, 1 for `4 |J1(u)/u|`.
    pub beam_pattern_exponent: u8,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_frequency: 27.5e9,
            aperture_radius: 0.25,
            gain_leo_dbi: 42.0,
            gain_sue_dbi: 10.0,
            gain_bs_dbi: 32.8,
            noise_density_dbm_hz: -174.0,
            beam_pattern_exponent: 2,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency.is_finite() && self.carrier_frequency > 0.0) {
            return Err(Error::InvalidInput("carrier frequency must be positive".into()));
        }
        if !(self.aperture_radius.is_finite() && self.aperture_radius > 0.0) {
            return Err(Error::InvalidInput("aperture radius must be positive".into()));
        }
        if !matches!(self.beam_pattern_exponent, 1 | 2) {
            return Err(Error::InvalidInput(format!(
                "beam pattern exponent must be 1 or 2, got {}",
                self.beam_pattern_exponent
            )));
        }
        for g in [self.gain_leo_dbi, self.gain_sue_dbi, self.gain_bs_dbi, self.noise_density_dbm_hz] {
            if !g.is_finite() {
                return Err(Error::InvalidInput("gains and noise density must be finite".into()));
            }
        }
        Ok(())
    }

    /// k = 2π f_c / c.
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.carrier_frequency / SPEED_OF_LIGHT
    }

    /// Off-boresight angle of the first pattern null, or `None` when the
    /// aperture is too small for one to exist.
    pub fn first_null_angle(&self) -> Option<f64> {
        let s = J1_FIRST_ZERO / (self.wavenumber() * self.aperture_radius);
        (s <= 1.0).then(|| s.asin())
    }

    fn terminal_gain(&self, kind: TerminalKind) -> f64 {
        match kind {
            TerminalKind::Sue => db_to_linear(self.gain_sue_dbi),
            TerminalKind::Bs => db_to_linear(self.gain_bs_dbi),
        }
    }
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> f64 {
    if !x.is_finite() {
        return if x.is_nan() { f64::NAN } else { 0.0 };
    }
    let ax = x.abs();
    let v = if ax <= 6.0 {
        j1_series(ax)
    } else if ax <= 1000.0 {
        j1_backward_recurrence(ax)
    } else {
        j1_asymptotic(ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn j1_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    for j in 1..60 {
        term *= q / (j as f64 * (j + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Miller's algorithm normalised with J0 + 2 Σ J_2k = 1.
fn j1_backward_recurrence(x: f64) -> f64 {
    let start = 2 * ((x + 25.0 + (40.0 * x).sqrt()) as usize / 2);
    let mut j_next = 0.0;
    let mut j_cur = 1e-30;
    let mut even_sum = 0.0;
    let mut j1 = 0.0;
    for n in (1..=start).rev() {
        // J_{n-1} = (2n / x) J_n - J_{n+1}
        let j_prev = (2.0 * n as f64 / x) * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            even_sum *= 1e-250;
            j1 *= 1e-250;
        }
        if n == 2 {
            j1 = j_cur;
        }
        if (n - 1) % 2 == 0 && n - 1 > 0 {
            even_sum += j_cur;
        }
    }
    // j_cur now holds J0 (unnormalised)
    j1 / (j_cur + 2.0 * even_sum)
}

fn j1_asymptotic(x: f64) -> f64 {
    let mu = 4.0;
    let z = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    for k in 1..12 {
        let kk = (2 * k - 1) as f64;
        term *= (mu - kk * kk) / (k as f64 * z);
        if k % 2 == 1 {
            q += if (k / 2) % 2 == 0 { term } else { -term };
        } else {
            p += if (k / 2) % 2 == 0 { term } else { -term };
        }
    }
    let chi = x - 0.75 * std::f64::consts::PI;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Normalised beam gain ψ(θ) in [0, 1] for the configured exponent.
pub fn beam_pattern(theta: f64, params: &ChannelParams) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    let u = params.wavenumber() * params.aperture_radius * theta.sin();
    let ratio = (bessel_j1(u) / u).abs();
    match params.beam_pattern_exponent {
        1 => 4.0 * ratio,
        _ => 4.0 * ratio * ratio,
    }
}

/// Linear free-space path loss (4π f_c d / c)².
pub fn free_space_path_loss(distance: f64, params: &ChannelParams) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "path-loss distance must be positive, got {distance}"
        )));
    }
    let a = 4.0 * std::f64::consts::PI * params.carrier_frequency * distance / SPEED_OF_LIGHT;
    Ok(a * a)
}

/// Linear channel gain G_LEO · G_term · ψ(θ) / PL(d).
pub fn channel_gain(
    sat: &SatelliteState,
    terminal: &CartesianVector,
    kind: TerminalKind,
    params: &ChannelParams,
) -> Result<f64> {
    let theta = boresight_angle(sat, terminal)?;
    let pl = free_space_path_loss(slant_range(sat, terminal), params)?;
    let psi = beam_pattern(theta, params);
    Ok(db_to_linear(params.gain_leo_dbi) * params.terminal_gain(kind) * psi / pl)
}
