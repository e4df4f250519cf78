use chrono::NaiveDate;
use serde::Serialize;

use crate::context::DEFAULT_CLASS_SHARES;
use crate::error::{Error, Result};
use crate::geo::LatLon;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CityConfig {
    pub stations: usize,
    /// Shares of residential, entertainment and work stations.
    pub function_mix: [f64; 3],
    pub center: LatLon<f64>,
    pub spacing_km: f64,
    pub jitter_km: f64,
    /// `(min, max)` community price per tier, indexed low, middle, high.
    pub tier_prices: [(f64, f64); 3],
    /// 1 orders residential tiers strictly by distance from the centre (high
    /// innermost); 0 assigns tiers at random.
    pub tier_gradient: f64,
    pub communities_per_station: usize,
    pub community_radius_km: f64,
    pub pois_per_station: usize,
    pub poi_radius_km: f64,
    pub seed: u64,
}

impl Default for CityConfig {
    fn default() -> Self {
        CityConfig {
            stations: 48,
            function_mix: [0.5, 0.25, 0.25],
            center: LatLon::new(31.23, 121.47),
            spacing_km: 4.0,
            jitter_km: 0.4,
            tier_prices: [(15_000.0, 38_000.0), (42_000.0, 65_000.0), (75_000.0, 99_000.0)],
            tier_gradient: 0.5,
            communities_per_station: 4,
            community_radius_km: 0.8,
            pois_per_station: 8,
            poi_radius_km: 0.5,
            seed: 0,
        }
    }
}

impl CityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stations < 6 {
            return Err(Error::config("a city needs at least 6 stations"));
        }
        if self.function_mix.iter().any(|s| !(*s >= 0.0)) || self.function_mix.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config("function mix must be non-negative and not all zero"));
        }
        if !(self.spacing_km > 0.0) || !(self.jitter_km >= 0.0) || 2.0 * self.jitter_km >= self.spacing_km {
            return Err(Error::config("jitter must be non-negative and below half the grid spacing"));
        }
        if !(0.0..=1.0).contains(&self.tier_gradient) {
            return Err(Error::config("tier_gradient must lie in [0, 1]"));
        }
        if self.tier_prices.iter().any(|(lo, hi)| !(lo <= hi) || *lo < 1_000.0 || *hi > 500_000.0) {
            return Err(Error::config("tier price bounds must be ordered and inside the price sanity band"));
        }
        Ok(())
    }
}

/// Lifestyle parameters per SES class, arrays indexed low, middle, high.
///
/// `separation` scales every class-specific value's distance from the middle-class
/// value: 0 makes classes behaviourally identical, 1 is the default spread.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchetypeConfig {
    pub separation: f64,
    /// Mean weekday departure, hours after midnight.
    pub depart_hour: [f64; 3],
    /// Day-to-day jitter of one person's departure.
    pub depart_sd_hours: f64,
    /// Spread of personal habits around the class mean departure.
    pub person_sd_hours: f64,
    pub work_hours: [f64; 3],
    /// Chance of an entertainment stop on the way home from work.
    pub evening_outing: [f64; 3],
    /// Share of weekend outings that go to an entertainment station.
    pub weekend_entertainment: [f64; 3],
    pub weekend_depart_hour: [f64; 3],
    /// Chance of working on a given weekend day.
    pub weekend_work: [f64; 3],
    /// Share working shifts at entertainment stations.
    pub service_worker: [f64; 3],
    /// Share on half-length working days.
    pub part_time: [f64; 3],
    pub service_depart_hour: f64,
    pub weekday_active: f64,
    pub weekend_active: f64,
    /// Chance per active day of an extra errand.
    pub extra_trip_rate: f64,
}

impl Default for ArchetypeConfig {
    fn default() -> Self {
        ArchetypeConfig {
            separation: 1.0,
            depart_hour: [6.7, 7.75, 8.8],
            depart_sd_hours: 0.45,
            person_sd_hours: 0.8,
            work_hours: [9.5, 9.0, 8.5],
            evening_outing: [0.10, 0.25, 0.45],
            weekend_entertainment: [0.25, 0.50, 0.80],
            weekend_depart_hour: [9.5, 10.5, 11.5],
            weekend_work: [0.35, 0.10, 0.02],
            service_worker: [0.30, 0.10, 0.0],
            part_time: [0.20, 0.05, 0.0],
            service_depart_hour: 11.0,
            weekday_active: 0.97,
            weekend_active: 0.92,
            extra_trip_rate: 0.15,
        }
    }
}

impl ArchetypeConfig {
    /// Class value after applying the separation dial.
    pub fn value(&self, param: &[f64; 3], class: usize) -> f64 {
        param[1] + self.separation * (param[class] - param[1])
    }

    /// As [`value`](Self::value), clamped to a probability.
    pub fn prob(&self, param: &[f64; 3], class: usize) -> f64 {
        self.value(param, class).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub city: CityConfig,
    pub archetypes: ArchetypeConfig,
    pub agents: usize,
    pub days: u32,
    pub start: NaiveDate,
    pub shares: [f64; 3],
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            city: CityConfig::default(),
            archetypes: ArchetypeConfig::default(),
            agents: 3000,
            days: 8,
            start: NaiveDate::from_ymd_opt(2015, 4, 1).expect("valid date"),
            shares: DEFAULT_CLASS_SHARES,
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::config(format!("{key}: cannot parse {v:?}")))
}

fn triple(key: &str, v: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = v.split(',').map(|p| parse(key, p)).collect::<Result<_>>()?;
    parts
        .try_into()
        .map_err(|_| Error::config(format!("{key}: expected three comma-separated values")))
}

impl SynthConfig {
    pub const KEYS: &'static [&'static str] = &[
        "agents",
        "days",
        "start",
        "shares",
        "seed",
        "stations",
        "function_mix",
        "spacing_km",
        "jitter_km",
        "communities_per_station",
        "pois_per_station",
        "separation",
        "depart_hour",
        "depart_sd_hours",
        "person_sd_hours",
        "tier_gradient",
        "work_hours",
        "evening_outing",
        "weekend_entertainment",
        "weekend_depart_hour",
        "weekend_work",
        "service_worker",
        "part_time",
        "service_depart_hour",
        "weekday_active",
        "weekend_active",
        "extra_trip_rate",
    ];

    /// Applies one `key=value` override. Per-class values are `low,middle,high`.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let a = &mut self.archetypes;
        match key {
            "agents" => self.agents = parse(key, v)?,
            "days" => self.days = parse(key, v)?,
            "start" => {
                self.start = NaiveDate::parse_from_str(v.trim(), "%Y-%m-%d")
                    .map_err(|_| Error::config(format!("start: expected YYYY-MM-DD, got {v:?}")))?
            }
            "shares" => self.shares = triple(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "stations" => self.city.stations = parse(key, v)?,
            "function_mix" => self.city.function_mix = triple(key, v)?,
            "spacing_km" => self.city.spacing_km = parse(key, v)?,
            "jitter_km" => self.city.jitter_km = parse(key, v)?,
            "communities_per_station" => self.city.communities_per_station = parse(key, v)?,
            "pois_per_station" => self.city.pois_per_station = parse(key, v)?,
            "separation" => a.separation = parse(key, v)?,
            "depart_hour" => a.depart_hour = triple(key, v)?,
            "depart_sd_hours" => a.depart_sd_hours = parse(key, v)?,
            "person_sd_hours" => a.person_sd_hours = parse(key, v)?,
            "tier_gradient" => self.city.tier_gradient = parse(key, v)?,
            "work_hours" => a.work_hours = triple(key, v)?,
            "evening_outing" => a.evening_outing = triple(key, v)?,
            "weekend_entertainment" => a.weekend_entertainment = triple(key, v)?,
            "weekend_depart_hour" => a.weekend_depart_hour = triple(key, v)?,
            "weekend_work" => a.weekend_work = triple(key, v)?,
            "service_worker" => a.service_worker = triple(key, v)?,
            "part_time" => a.part_time = triple(key, v)?,
            "service_depart_hour" => a.service_depart_hour = parse(key, v)?,
            "weekday_active" => a.weekday_active = parse(key, v)?,
            "weekend_active" => a.weekend_active = parse(key, v)?,
            "extra_trip_rate" => a.extra_trip_rate = parse(key, v)?,
            _ => return Err(Error::config(format!("unknown synth key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.city.validate()?;
        if self.days == 0 {
            return Err(Error::config("days must be at least 1"));
        }
        if self.shares.iter().any(|s| !(*s >= 0.0)) || (self.shares.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::config("class shares must be non-negative and sum to 1"));
        }
        let a = &self.archetypes;
        if !(a.depart_sd_hours >= 0.0) || !(a.person_sd_hours >= 0.0) || !(a.separation >= 0.0) {
            return Err(Error::config("spreads and separation must be non-negative"));
        }
        Ok(())
    }
}
