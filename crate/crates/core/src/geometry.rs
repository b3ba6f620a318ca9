//! Spherical-Earth placement of satellites and ground terminals.
//!
//! All positions live in an Earth-centred Cartesian frame (meters). Satellites
//! are static snapshots with their antenna boresight pointing at nadir.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPoint {
    /// Degrees, [-90, 90].
    pub latitude: f64,
    /// Degrees, [-180, 180].
    pub longitude: f64,
    /// Meters above the sphere.
    pub altitude: f64,
}

impl GeodeticPoint {
    pub fn new(latitude: f64, longitude: f64, altitude: f64) -> Result<Self> {
        let p = Self {
            latitude,
            longitude,
            altitude,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.latitude.is_finite() && (-90.0..=90.0).contains(&self.latitude)) {
            return Err(Error::InvalidInput(format!(
                "latitude {} outside [-90, 90]",
                self.latitude
            )));
        }
        if !(self.longitude.is_finite() && (-180.0..=180.0).contains(&self.longitude)) {
            return Err(Error::InvalidInput(format!(
                "longitude {} outside [-180, 180]",
                self.longitude
            )));
        }
        if !(self.altitude.is_finite() && self.altitude >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "altitude {} must be finite and non-negative",
                self.altitude
            )));
        }
        Ok(())
    }
}

/// Earth-centred Cartesian vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartesianVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CartesianVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Sub for CartesianVector {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Add for CartesianVector {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteState {
    pub id: usize,
    pub position: CartesianVector,
    /// Unit vector from the satellite toward the Earth centre.
    pub nadir_direction: CartesianVector,
}

impl SatelliteState {
    /// Builds a nadir-pointing satellite at `position`.
    pub fn nadir_pointing(id: usize, position: CartesianVector) -> Result<Self> {
        let r = position.norm();
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidInput(
                "satellite position must be finite and away from the Earth centre".into(),
            ));
        }
        Ok(Self {
            id,
            position,
            nadir_direction: position.scale(-1.0 / r),
        })
    }
}

pub fn geodetic_to_cartesian(p: &GeodeticPoint, earth_radius: f64) -> CartesianVector {
    let r = earth_radius + p.altitude;
    let (sin_lat, cos_lat) = p.latitude.to_radians().sin_cos();
    let (sin_lon, cos_lon) = p.longitude.to_radians().sin_cos();
    CartesianVector::new(r * cos_lat * cos_lon, r * cos_lat * sin_lon, r * sin_lat)
}

/// Places `count` satellites of one polar orbit along the meridian of `center`.
///
/// Satellite `i` sits at latitude `center.latitude + (i - (count - 1) / 2) * lat_spacing`,
/// so odd counts put the middle satellite directly above `center`.
pub fn place_constellation(
    center: &GeodeticPoint,
    count: usize,
    lat_spacing: f64,
    sat_altitude: f64,
) -> Result<Vec<SatelliteState>> {
    if count == 0 {
        return Err(Error::InvalidInput("constellation needs at least one satellite".into()));
    }
    if !(lat_spacing.is_finite() && lat_spacing > 0.0) {
        return Err(Error::InvalidInput(format!(
            "latitude spacing {lat_spacing} must be positive"
        )));
    }
    let mid = (count as f64 - 1.0) / 2.0;
    (0..count)
        .map(|i| {
            let lat = center.latitude + (i as f64 - mid) * lat_spacing;
            let point = GeodeticPoint::new(lat, center.longitude, sat_altitude)?;
            SatelliteState::nadir_pointing(i, geodetic_to_cartesian(&point, EARTH_RADIUS_M))
        })
        .collect()
}

pub fn slant_range(sat: &SatelliteState, terminal: &CartesianVector) -> f64 {
    (*terminal - sat.position).norm()
}

/// Angle between the satellite boresight (nadir) and the line of sight to `terminal`.
pub fn boresight_angle(sat: &SatelliteState, terminal: &CartesianVector) -> Result<f64> {
    let los = *terminal - sat.position;
    let d = los.norm();
    if !(d > 0.0) {
        return Err(Error::Geometry(
            "terminal coincides with the satellite position".into(),
        ));
    }
    let cos = (los.dot(&sat.nadir_direction) / d).clamp(-1.0, 1.0);
    // acos loses precision near 0; atan2 of |cross| and dot does not.
    let n = sat.nadir_direction;
    let cross = CartesianVector::new(
        los.y * n.z - los.z * n.y,
        los.z * n.x - los.x * n.z,
        los.x * n.y - los.y * n.x,
    );
    let angle = (cross.norm() / d).atan2(cos);
    Ok(angle)
}

/// Converts local east/north offsets (meters) around `center` into a ground point.
pub fn offset_to_geodetic(center: &GeodeticPoint, east: f64, north: f64, altitude: f64) -> GeodeticPoint {
    let lat = center.latitude + (north / EARTH_RADIUS_M).to_degrees();
    let lon = center.longitude
        + (east / (EARTH_RADIUS_M * center.latitude.to_radians().cos())).to_degrees();
    GeodeticPoint {
        latitude: lat,
        longitude: lon,
        altitude,
    }
}
