use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Haversine, LatLon, Metric, EARTH_RADIUS_KM};

pub const DEFAULT_PRICE_RADIUS_KM: f64 = 2.0;
/// Plausible range for an average community price, CNY/m².
pub const PRICE_SANITY_BAND: (f64, f64) = (1_000.0, 500_000.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Community {
    pub community_id: String,
    pub lat: f64,
    pub lon: f64,
    #[serde(rename = "avg_price_cny_per_m2")]
    pub avg_price: f64,
}

impl Community {
    pub fn position(&self) -> LatLon<f64> {
        LatLon::new(self.lat, self.lon)
    }
}

/// Reads a `community_id,lat,lon,avg_price_cny_per_m2` file with a header row.
/// Prices outside [`PRICE_SANITY_BAND`] are an error.
pub fn read_communities<R: Read>(reader: R) -> Result<Vec<Community>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Community>().enumerate() {
        let c = row?;
        let (lo, hi) = PRICE_SANITY_BAND;
        if !(lo..=hi).contains(&c.avg_price) {
            return Err(Error::Format {
                path: "communities".into(),
                line: i + 2,
                reason: format!("price {} outside [{lo}, {hi}]", c.avg_price),
            });
        }
        out.push(c);
    }
    Ok(out)
}

pub fn write_communities<W: Write>(writer: W, communities: &[Community]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for c in communities {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

/// Communities sorted by latitude, so a radius query only scans a latitude band.
#[derive(Debug, Clone, Default)]
pub struct CommunityIndex {
    by_lat: Vec<Community>,
}

impl CommunityIndex {
    pub fn new(mut communities: Vec<Community>) -> Self {
        communities.sort_by(|a, b| a.lat.total_cmp(&b.lat));
        CommunityIndex { by_lat: communities }
    }

    pub fn len(&self) -> usize {
        self.by_lat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_lat.is_empty()
    }

    /// Unweighted mean price of the communities within `radius_km` great-circle
    /// distance of `at`; `None` if there are none.
    pub fn price_index_near(&self, at: LatLon<f64>, radius_km: f64) -> Option<f64> {
        // a point within radius_km differs in latitude by at most this many degrees
        let band = (radius_km / EARTH_RADIUS_KM).to_degrees() * (1.0 + 1e-9);
        let start = self.by_lat.partition_point(|c| c.lat < at.lat - band);
        let (sum, n) = self.by_lat[start..]
            .iter()
            .take_while(|c| c.lat <= at.lat + band)
            .filter(|c| Haversine.distance_km(&at, &c.position()) <= radius_km)
            .fold((0.0, 0usize), |(s, n), c| (s + c.avg_price, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// See [`CommunityIndex::price_index_near`].
pub fn price_index_near(at: LatLon<f64>, communities: &CommunityIndex, radius_km: f64) -> Option<f64> {
    communities.price_index_near(at, radius_km)
}
