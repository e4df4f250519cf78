//! Station-level context and ground-truth labeling.
//!
//! Stations get a land-use class from their commute flows and nearby POIs and a
//! housing-price index from nearby communities. Each card holder gets a home station,
//! per-station roles, and an SES class from the price index of the home station.

mod flow;
mod function;
mod label;
mod poi;
mod price;
mod roles;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use flow::{build_flow_profiles, station_flow_profile, FlowProfile};
pub use function::{classify_station_function, Classification, FunctionThresholds, StationFunction};
pub use label::{
    apportion, assign_classes, label_ses, read_labels, write_labels, LabelPolicy, SesClass, Thresholds, UserLabel,
    DEFAULT_CLASS_SHARES, DEFAULT_HIGH_THRESHOLD,
};
pub use poi::{attach_pois, read_pois, write_pois, Poi, PoiCategory, PoiMix, POI_ATTACH_KM};
pub use price::{
    price_index_near, read_communities, write_communities, Community, CommunityIndex, DEFAULT_PRICE_RADIUS_KM,
    PRICE_SANITY_BAND,
};
pub use roles::{infer_home_station, infer_user_station_roles, UserRole, UserRoles};

use crate::error::{Error, Result};
use crate::ingest::{StationId, StationRegistry, Trip, UserHistory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationProfile {
    pub station_id: StationId,
    pub lat: f64,
    pub lon: f64,
    pub function: StationFunction,
    pub price_index: Option<f64>,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextConfig {
    pub function: FunctionThresholds,
    pub price_radius_km: f64,
    pub poi_attach_km: f64,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            function: FunctionThresholds::default(),
            price_radius_km: DEFAULT_PRICE_RADIUS_KM,
            poi_attach_km: POI_ATTACH_KM,
        }
    }
}

/// Immutable per-station table shared by labeling and sequence encoding.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StationContext {
    profiles: BTreeMap<StationId, StationProfile>,
}

impl StationContext {
    pub fn from_profiles(profiles: impl IntoIterator<Item = StationProfile>) -> Self {
        StationContext {
            profiles: profiles.into_iter().map(|p| (p.station_id, p)).collect(),
        }
    }

    /// Classifies and prices every registered station.
    pub fn build(
        registry: &StationRegistry,
        trips: &[Trip],
        pois: &[Poi],
        communities: Vec<Community>,
        cfg: &ContextConfig,
    ) -> Result<Self> {
        if cfg.price_radius_km <= 0.0 {
            return Err(Error::config("price radius must be positive"));
        }
        let flows = build_flow_profiles(trips);
        let mixes = attach_pois(pois, registry, cfg.poi_attach_km);
        let index = CommunityIndex::new(communities);
        let empty_flow = FlowProfile::default();
        let empty_mix = PoiMix::default();
        let stations: Vec<_> = registry.iter().collect();
        let profiles: Vec<StationProfile> = stations
            .par_iter()
            .map(|s| {
                let c = classify_station_function(
                    flows.get(&s.id).unwrap_or(&empty_flow),
                    mixes.get(&s.id).unwrap_or(&empty_mix),
                    &cfg.function,
                );
                StationProfile {
                    station_id: s.id,
                    lat: s.lat,
                    lon: s.lon,
                    function: c.function,
                    price_index: index.price_index_near(s.position(), cfg.price_radius_km),
                    low_confidence: c.low_confidence,
                }
            })
            .collect();
        Ok(Self::from_profiles(profiles))
    }

    pub fn get(&self, id: StationId) -> Option<&StationProfile> {
        self.profiles.get(&id)
    }

    pub fn function(&self, id: StationId) -> Option<StationFunction> {
        self.get(id).map(|p| p.function)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StationProfile> {
        self.profiles.values()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Writes `station_id,lat,lon,function,price_index,low_confidence`; an absent
    /// price index is an empty field.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for p in self.iter() {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let profiles = rdr.deserialize().collect::<Result<Vec<StationProfile>, _>>()?;
        Ok(Self::from_profiles(profiles))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedUser {
    pub card_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelOutcome {
    /// In input order, minus dropped users.
    pub labels: Vec<UserLabel>,
    pub dropped: Vec<DroppedUser>,
    pub thresholds: Thresholds,
}

/// Infers home and work stations for each user and labels those whose home station
/// has a price index. Users without boardings or without a nearby community are
/// dropped and reported.
pub fn label_users(histories: &[UserHistory], context: &StationContext, policy: &LabelPolicy) -> Result<LabelOutcome> {
    let inferred: Vec<Result<(StationId, Option<StationId>, f64), DroppedUser>> = histories
        .par_iter()
        .map(|h| {
            let drop = |reason: String| DroppedUser {
                card_id: h.card_id.clone(),
                reason,
            };
            let home = infer_home_station(h).map_err(|e| drop(e.to_string()))?;
            let price = context
                .get(home)
                .and_then(|p| p.price_index)
                .ok_or_else(|| drop(format!("no community near home station {home}")))?;
            let work = infer_user_station_roles(h, home).work;
            Ok((home, work, price))
        })
        .collect();

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (h, r) in histories.iter().zip(inferred) {
        match r {
            Ok(v) => kept.push((h.card_id.as_str(), v)),
            Err(d) => dropped.push(d),
        }
    }
    let population: Vec<(&str, f64)> = kept.iter().map(|(id, v)| (*id, v.2)).collect();
    let (classes, thresholds) = assign_classes(&population, policy)?;
    let labels = kept
        .into_iter()
        .zip(classes)
        .map(|((card_id, (home, work, price)), ses)| UserLabel {
            card_id: card_id.to_owned(),
            home_station: home,
            work_station: work,
            home_price: price,
            ses,
        })
        .collect();
    Ok(LabelOutcome {
        labels,
        dropped,
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_csv_round_trip() {
        let ctx = StationContext::from_profiles([
            StationProfile {
                station_id: StationId(1),
                lat: 31.2,
                lon: 121.4,
                function: StationFunction::Residential,
                price_index: Some(55_000.0),
                low_confidence: false,
            },
            StationProfile {
                station_id: StationId(2),
                lat: 31.3,
                lon: 121.5,
                function: StationFunction::Work,
                price_index: None,
                low_confidence: true,
            },
        ]);
        let mut buf = Vec::new();
        ctx.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("2,31.3,121.5,work,,true"));
        assert_eq!(StationContext::read_csv(buf.as_slice()).unwrap(), ctx);
    }
}
