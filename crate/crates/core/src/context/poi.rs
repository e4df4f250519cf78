use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Haversine, LatLon, Metric};
use crate::ingest::{StationId, StationRegistry};

/// Maximum distance at which a POI is attached to its nearest station.
pub const POI_ATTACH_KM: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PoiCategory {
    PublicFacility,
    DomesticServices,
    Education,
    BusinessResidence,
    Hospital,
    Hotel,
    CarServices,
    SportLeisure,
    Scenery,
    Restaurant,
    PublicTransportation,
    FinancialServices,
}

impl PoiCategory {
    pub const ALL: [PoiCategory; 12] = [
        PoiCategory::PublicFacility,
        PoiCategory::DomesticServices,
        PoiCategory::Education,
        PoiCategory::BusinessResidence,
        PoiCategory::Hospital,
        PoiCategory::Hotel,
        PoiCategory::CarServices,
        PoiCategory::SportLeisure,
        PoiCategory::Scenery,
        PoiCategory::Restaurant,
        PoiCategory::PublicTransportation,
        PoiCategory::FinancialServices,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PoiCategory::PublicFacility => "Public Facility",
            PoiCategory::DomesticServices => "Domestic services",
            PoiCategory::Education => "Education",
            PoiCategory::BusinessResidence => "Business Residence",
            PoiCategory::Hospital => "Hospital",
            PoiCategory::Hotel => "Hotel",
            PoiCategory::CarServices => "Car services",
            PoiCategory::SportLeisure => "Sport&Leisure",
            PoiCategory::Scenery => "Scenery",
            PoiCategory::Restaurant => "Restaurant",
            PoiCategory::PublicTransportation => "Public Transportation",
            PoiCategory::FinancialServices => "Financial Services",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    /// `(residential, work, leisure)` weight of one POI.
    pub fn weights(self) -> (f64, f64, f64) {
        match self {
            PoiCategory::BusinessResidence => (0.5, 0.5, 0.0),
            PoiCategory::DomesticServices | PoiCategory::Education => (1.0, 0.0, 0.0),
            PoiCategory::FinancialServices => (0.0, 1.0, 0.0),
            PoiCategory::SportLeisure | PoiCategory::Scenery | PoiCategory::Restaurant | PoiCategory::Hotel => {
                (0.0, 0.0, 1.0)
            }
            PoiCategory::PublicFacility
            | PoiCategory::Hospital
            | PoiCategory::CarServices
            | PoiCategory::PublicTransportation => (0.0, 0.0, 0.0),
        }
    }
}

impl fmt::Display for PoiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoiCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        PoiCategory::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown POI category {s:?}"))
    }
}

/// Category counts of the POIs attached to one station.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PoiMix {
    counts: [u32; 12],
}

impl PoiMix {
    pub fn from_counts(pairs: &[(PoiCategory, u32)]) -> Self {
        let mut mix = PoiMix::default();
        for &(c, n) in pairs {
            mix.counts[c.index()] += n;
        }
        mix
    }

    pub fn add(&mut self, c: PoiCategory) {
        self.counts[c.index()] += 1;
    }

    pub fn count(&self, c: PoiCategory) -> u32 {
        self.counts[c.index()]
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// Weighted `(residential, work, leisure)` scores.
    pub fn scores(&self) -> (f64, f64, f64) {
        PoiCategory::ALL.iter().fold((0.0, 0.0, 0.0), |acc, &c| {
            let n = f64::from(self.count(c));
            let (r, w, l) = c.weights();
            (acc.0 + n * r, acc.1 + n * w, acc.2 + n * l)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poi {
    pub poi_id: String,
    pub position: LatLon<f64>,
    pub category: PoiCategory,
}

#[derive(Serialize, Deserialize)]
struct PoiRow {
    poi_id: String,
    lat: f64,
    lon: f64,
    category: String,
}

/// Reads a `poi_id,lat,lon,category` file with a header row.
pub fn read_pois<R: Read>(reader: R) -> Result<Vec<Poi>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<PoiRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row?;
            let category = row.category.parse().map_err(|reason| Error::Format {
                path: "poi".into(),
                line: i + 2,
                reason,
            })?;
            Ok(Poi {
                poi_id: row.poi_id,
                position: LatLon::new(row.lat, row.lon),
                category,
            })
        })
        .collect()
}

pub fn write_pois<W: Write>(writer: W, pois: &[Poi]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in pois {
        w.serialize(PoiRow {
            poi_id: p.poi_id.clone(),
            lat: p.position.lat,
            lon: p.position.lon,
            category: p.category.name().to_owned(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Attaches each POI to its nearest station if that station lies within `max_km`.
/// Distance ties go to the smaller station id.
pub fn attach_pois(pois: &[Poi], registry: &StationRegistry, max_km: f64) -> BTreeMap<StationId, PoiMix> {
    let mut mixes: BTreeMap<StationId, PoiMix> = BTreeMap::new();
    for poi in pois {
        let nearest = registry
            .iter()
            .map(|s| (Haversine.distance_km(&poi.position, &s.position()), s.id))
            .filter(|&(d, _)| d <= max_km)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, id)) = nearest {
            mixes.entry(id).or_default().add(poi.category);
        }
    }
    mixes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Station;

    #[test]
    fn category_names_parse() {
        for c in PoiCategory::ALL {
            assert_eq!(c.name().parse::<PoiCategory>().unwrap(), c);
        }
        assert_eq!("sport&leisure".parse::<PoiCategory>().unwrap(), PoiCategory::SportLeisure);
        assert!("Casino".parse::<PoiCategory>().is_err());
    }

    #[test]
    fn business_residence_splits() {
        let mix = PoiMix::from_counts(&[(PoiCategory::BusinessResidence, 4), (PoiCategory::Restaurant, 1)]);
        assert_eq!(mix.scores(), (2.0, 2.0, 1.0));
    }

    #[test]
    fn attach_nearest_within_radius() {
        let reg = StationRegistry::new([
            Station { id: StationId(1), name: "a".into(), lat: 31.0, lon: 121.0 },
            Station { id: StationId(2), name: "b".into(), lat: 31.0, lon: 121.02 },
        ])
        .unwrap();
        let poi = |id: &str, lon: f64| Poi {
            poi_id: id.into(),
            position: LatLon::new(31.0, lon),
            category: PoiCategory::Hotel,
        };
        // 0.002 deg of longitude is ~0.19 km; 0.05 deg is ~4.8 km
        let mixes = attach_pois(&[poi("p1", 121.002), poi("p2", 121.019), poi("p3", 121.07)], &reg, POI_ATTACH_KM);
        assert_eq!(mixes[&StationId(1)].count(PoiCategory::Hotel), 1);
        assert_eq!(mixes[&StationId(2)].count(PoiCategory::Hotel), 1);
    }

    #[test]
    fn csv_round_trip() {
        let pois = vec![Poi {
            poi_id: "p1".into(),
            position: LatLon::new(31.5, 121.25),
            category: PoiCategory::SportLeisure,
        }];
        let mut buf = Vec::new();
        write_pois(&mut buf, &pois).unwrap();
        assert_eq!(read_pois(buf.as_slice()).unwrap(), pois);
    }
}
