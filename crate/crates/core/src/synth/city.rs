use rand::Rng;
use serde::Serialize;

use super::config::CityConfig;
use crate::context::{apportion, Community, Poi, PoiCategory, SesClass, StationFunction};
use crate::error::{Error, Result};
use crate::geo::{offset_km, LatLon};
use crate::ingest::{Station, StationId, StationRegistry};
use crate::seed::rng_for;

/// Ground truth about one generated station.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationTruth {
    pub station_id: StationId,
    pub function: StationFunction,
    /// Price tier of residential stations.
    pub tier: Option<SesClass>,
}

#[derive(Debug, Clone)]
pub struct City {
    pub registry: StationRegistry,
    pub communities: Vec<Community>,
    pub pois: Vec<Poi>,
    pub truth: Vec<StationTruth>,
}

impl City {
    pub fn stations_with(&self, function: StationFunction) -> Vec<StationId> {
        self.truth.iter().filter(|t| t.function == function).map(|t| t.station_id).collect()
    }

    pub fn residential_tier(&self, tier: SesClass) -> Vec<StationId> {
        self.truth.iter().filter(|t| t.tier == Some(tier)).map(|t| t.station_id).collect()
    }

    pub fn position(&self, id: StationId) -> LatLon<f64> {
        self.registry.position(id).expect("generated station")
    }
}

fn poi_palette(f: StationFunction) -> &'static [PoiCategory] {
    use PoiCategory::*;
    match f {
        StationFunction::Residential => &[DomesticServices, Education, BusinessResidence, PublicFacility],
        StationFunction::Work => &[FinancialServices, BusinessResidence, FinancialServices, PublicTransportation],
        StationFunction::Entertainment => &[SportLeisure, Scenery, Restaurant, Hotel],
    }
}

/// Jittered grid; cells nearest the centre hold work and entertainment stations,
/// residential tiers follow outward from high to low.
pub fn generate_city(cfg: &CityConfig) -> Result<City> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, "city");
    let counts = apportion(cfg.stations, &cfg.function_mix);
    let (n_res, n_ent, n_work) = (counts[0], counts[1], counts[2]);
    if n_res < 2 || n_ent < 2 || n_work < 2 {
        return Err(Error::config(format!("function mix yields {n_res}/{n_ent}/{n_work} stations; need at least 2 of each")));
    }

    let side = (cfg.stations as f64).sqrt().ceil() as usize;
    let half = (side as f64 - 1.0) / 2.0;
    let mut cells: Vec<(f64, f64)> = (0..side * side)
        .map(|i| ((i / side) as f64 - half, (i % side) as f64 - half))
        .collect();
    // stable sort keeps a deterministic order among equidistant cells
    cells.sort_by(|a, b| (a.0.hypot(a.1)).total_cmp(&b.0.hypot(b.1)));
    cells.truncate(cfg.stations);

    // interleave so both classes share the core
    let mut core = Vec::with_capacity(n_ent + n_work);
    let (mut w, mut e) = (n_work, n_ent);
    while w + e > 0 {
        if w >= e {
            core.push(StationFunction::Work);
            w -= 1;
        } else {
            core.push(StationFunction::Entertainment);
            e -= 1;
        }
    }
    // residential cells ranked by a blend of distance rank and noise
    let mut res_rank: Vec<(f64, usize)> = (0..n_res)
        .map(|k| {
            let dist = k as f64 / n_res.max(1) as f64;
            (cfg.tier_gradient * dist + (1.0 - cfg.tier_gradient) * rng.random::<f64>(), k)
        })
        .collect();
    res_rank.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut res_pos = vec![0; n_res];
    for (pos, &(_, k)) in res_rank.iter().enumerate() {
        res_pos[k] = pos;
    }
    let tiers = apportion(n_res, &[1.0, 1.0, 1.0]);
    let mut truth = Vec::with_capacity(cfg.stations);
    let mut stations = Vec::with_capacity(cfg.stations);
    for (i, &(r, c)) in cells.iter().enumerate() {
        let id = StationId(i as u32 + 1);
        let (function, tier) = match core.get(i) {
            Some(&f) => (f, None),
            None => {
                let k = res_pos[i - core.len()];
                let tier = if k < tiers[2] {
                    SesClass::High
                } else if k < tiers[2] + tiers[1] {
                    SesClass::Middle
                } else {
                    SesClass::Low
                };
                (StationFunction::Residential, Some(tier))
            }
        };
        let jn = rng.random_range(-cfg.jitter_km..=cfg.jitter_km);
        let je = rng.random_range(-cfg.jitter_km..=cfg.jitter_km);
        let pos = offset_km(cfg.center, r * cfg.spacing_km + jn, c * cfg.spacing_km + je);
        stations.push(Station {
            id,
            name: format!("Station_{:03}", id.0),
            lat: pos.lat,
            lon: pos.lon,
        });
        truth.push(StationTruth {
            station_id: id,
            function,
            tier,
        });
    }
    let registry = StationRegistry::new(stations)?;

    let mut communities = Vec::new();
    let mut pois = Vec::new();
    for t in &truth {
        let at = registry.position(t.station_id).expect("just inserted");
        if let Some(tier) = t.tier {
            let (lo, hi) = cfg.tier_prices[tier.index()];
            for _ in 0..cfg.communities_per_station {
                let p = scatter(&mut rng, at, cfg.community_radius_km);
                communities.push(Community {
                    community_id: format!("C{:05}", communities.len() + 1),
                    lat: p.lat,
                    lon: p.lon,
                    avg_price: rng.random_range(lo..=hi).round(),
                });
            }
        }
        let palette = poi_palette(t.function);
        for j in 0..cfg.pois_per_station {
            let p = scatter(&mut rng, at, cfg.poi_radius_km);
            pois.push(Poi {
                poi_id: format!("P{:05}", pois.len() + 1),
                position: p,
                category: palette[j % palette.len()],
            });
        }
    }
    Ok(City {
        registry,
        communities,
        pois,
        truth,
    })
}

/// Uniform point in a disc around `at`.
fn scatter<R: Rng + ?Sized>(rng: &mut R, at: LatLon<f64>, radius_km: f64) -> LatLon<f64> {
    let r = radius_km * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    offset_km(at, r * a.sin(), r * a.cos())
}
