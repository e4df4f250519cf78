use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::LatLon;

/// Numeric station identifier, resolved from a station name through the registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationId(pub u32);

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    #[serde(rename = "station_id")]
    pub id: StationId,
    #[serde(rename = "station_name")]
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

impl Station {
    pub fn position(&self) -> LatLon<f64> {
        LatLon::new(self.lat, self.lon)
    }
}

/// Bidirectional station name/id table. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StationRegistry {
    stations: BTreeMap<StationId, Station>,
    by_name: HashMap<String, StationId>,
}

impl StationRegistry {
    pub fn new(stations: impl IntoIterator<Item = Station>) -> Result<Self> {
        let mut reg = StationRegistry::default();
        for s in stations {
            if reg.by_name.contains_key(&s.name) {
                return Err(Error::config(format!("duplicate station name {:?}", s.name)));
            }
            if reg.stations.contains_key(&s.id) {
                return Err(Error::config(format!("duplicate station id {}", s.id)));
            }
            if !(-90.0..=90.0).contains(&s.lat) || !(-180.0..=180.0).contains(&s.lon) {
                return Err(Error::config(format!("station {} has invalid coordinates", s.id)));
            }
            reg.by_name.insert(s.name.clone(), s.id);
            reg.stations.insert(s.id, s);
        }
        Ok(reg)
    }

    /// Reads a `station_id,station_name,lat,lon` file with a header row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let stations = rdr.deserialize().collect::<Result<Vec<Station>, _>>()?;
        Self::new(stations)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for s in self.stations.values() {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn resolve(&self, name: &str) -> Option<StationId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: StationId) -> Option<&Station> {
        self.stations.get(&id)
    }

    pub fn name(&self, id: StationId) -> Option<&str> {
        self.get(id).map(|s| s.name.as_str())
    }

    pub fn position(&self, id: StationId) -> Option<LatLon<f64>> {
        self.get(id).map(Station::position)
    }

    /// Stations in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Station> {
        self.stations.values()
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }
}
