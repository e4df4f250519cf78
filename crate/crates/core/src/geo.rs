//! Coordinates and distances.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Mean Earth radius for WGS-84, in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon<T> {
    pub lat: T,
    pub lon: T,
}

impl<T: Scalar> LatLon<T> {
    pub fn new(lat: T, lon: T) -> Self {
        Self { lat, lon }
    }

    pub fn cast<U: Scalar>(self) -> LatLon<U> {
        LatLon::new(U::lit(self.lat.as_f64()), U::lit(self.lon.as_f64()))
    }
}

/// A distance function over coordinate pairs, in kilometres.
pub trait Metric<T: Scalar> {
    fn distance_km(&self, a: &LatLon<T>, b: &LatLon<T>) -> T;
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Haversine;

impl<T: Scalar> Metric<T> for Haversine {
    fn distance_km(&self, a: &LatLon<T>, b: &LatLon<T>) -> T {
        let two = T::lit(2.0);
        let lat1 = a.lat.to_radians();
        let lat2 = b.lat.to_radians();
        let dlat = (b.lat - a.lat).to_radians();
        let dlon = (b.lon - a.lon).to_radians();
        let s_lat = (dlat / two).sin();
        let s_lon = (dlon / two).sin();
        let h = s_lat * s_lat + lat1.cos() * lat2.cos() * s_lon * s_lon;
        // h can drift marginally above 1 for antipodal points
        let h = h.min(T::one()).max(T::zero());
        two * T::lit(EARTH_RADIUS_KM) * h.sqrt().asin()
    }
}

/// Treats `lat`/`lon` as planar `y`/`x` coordinates already expressed in kilometres.
#[derive(Debug, Clone, Copy, Default)]
pub struct Planar;

impl<T: Scalar> Metric<T> for Planar {
    fn distance_km(&self, a: &LatLon<T>, b: &LatLon<T>) -> T {
        (a.lat - b.lat).hypot(a.lon - b.lon)
    }
}

/// Unweighted arithmetic mean of the coordinates. `None` for an empty input.
pub fn centroid<T: Scalar>(points: &[LatLon<T>]) -> Option<LatLon<T>> {
    if points.is_empty() {
        return None;
    }
    let n = T::from_usize_lossy(points.len());
    let lat = points.iter().map(|p| p.lat).sum::<T>() / n;
    let lon = points.iter().map(|p| p.lon).sum::<T>() / n;
    Some(LatLon::new(lat, lon))
}

/// Moves a point `north_km`/`east_km` on the local tangent plane. Used by the
/// generator to scatter objects around a station.
pub fn offset_km(p: LatLon<f64>, north_km: f64, east_km: f64) -> LatLon<f64> {
    let dlat = (north_km / EARTH_RADIUS_KM).to_degrees();
    let dlon = (east_km / (EARTH_RADIUS_KM * p.lat.to_radians().cos())).to_degrees();
    LatLon::new(p.lat + dlat, p.lon + dlon)
}
