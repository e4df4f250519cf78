use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::flow::FlowProfile;
use super::poi::PoiMix;

/// Land-use class of a station for the population at large.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationFunction {
    Residential,
    Entertainment,
    Work,
}

impl StationFunction {
    pub const ALL: [StationFunction; 3] = [
        StationFunction::Residential,
        StationFunction::Entertainment,
        StationFunction::Work,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StationFunction::Residential => "residential",
            StationFunction::Entertainment => "entertainment",
            StationFunction::Work => "work",
        }
    }
}

impl fmt::Display for StationFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StationFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "residential" => Ok(StationFunction::Residential),
            "entertainment" => Ok(StationFunction::Entertainment),
            "work" | "working" => Ok(StationFunction::Work),
            _ => Err(format!("unknown station function {s:?}")),
        }
    }
}

/// Tuning of the flow/POI station classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionThresholds {
    /// Minimum dominance ratio between boardings and alightings in a commute window.
    pub ratio: f64,
    /// Weekend share of traffic at or above which a station reads as entertainment.
    pub weekend_share: f64,
}

impl Default for FunctionThresholds {
    fn default() -> Self {
        FunctionThresholds {
            ratio: 1.5,
            weekend_share: 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub function: StationFunction,
    pub low_confidence: bool,
}

const MORNING: std::ops::Range<usize> = 6..10;
const EVENING: std::ops::Range<usize> = 17..21;

fn dominates(a: u64, b: u64, ratio: f64) -> bool {
    a > 0 && a as f64 >= ratio * b as f64
}

/// Assigns a station function from its weekday commute flows, weekend share and POIs.
///
/// Residential: morning (06-10) boardings dominate alightings and evening (17-21)
/// alightings dominate boardings, both by `ratio`. Work: the mirror image. Otherwise
/// entertainment when the weekend share reaches `weekend_share` or leisure POIs are the
/// plurality, else the larger of the residential/work POI scores, else entertainment.
/// A station with no traffic and no POIs defaults to residential, flagged low-confidence.
pub fn classify_station_function(profile: &FlowProfile, pois: &PoiMix, th: &FunctionThresholds) -> Classification {
    let sure = |function| Classification {
        function,
        low_confidence: false,
    };
    if profile.is_zero() && pois.is_empty() {
        return Classification {
            function: StationFunction::Residential,
            low_confidence: true,
        };
    }
    let (mb, ma) = profile.weekday_window(MORNING);
    let (eb, ea) = profile.weekday_window(EVENING);
    if dominates(mb, ma, th.ratio) && dominates(ea, eb, th.ratio) {
        return sure(StationFunction::Residential);
    }
    if dominates(ma, mb, th.ratio) && dominates(eb, ea, th.ratio) {
        return sure(StationFunction::Work);
    }
    let (res, work, leisure) = pois.scores();
    let weekend_share = if profile.is_zero() {
        0.0
    } else {
        profile.weekend_total() as f64 / profile.total() as f64
    };
    if weekend_share >= th.weekend_share || (leisure > res && leisure > work) {
        return sure(StationFunction::Entertainment);
    }
    if res > work {
        sure(StationFunction::Residential)
    } else if work > res {
        sure(StationFunction::Work)
    } else {
        sure(StationFunction::Entertainment)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::poi::PoiCategory;

    fn commute(morning_board: u32, morning_alight: u32, evening_board: u32, evening_alight: u32) -> FlowProfile {
        let mut p = FlowProfile::default();
        p.weekday_board[8] = morning_board;
        p.weekday_alight[8] = morning_alight;
        p.weekday_board[18] = evening_board;
        p.weekday_alight[18] = evening_alight;
        p
    }

    fn th(ratio: f64, weekend_share: f64) -> FunctionThresholds {
        FunctionThresholds { ratio, weekend_share }
    }

    #[test]
    fn residential_by_flow() {
        let c = classify_station_function(&commute(100, 10, 10, 100), &PoiMix::default(), &th(2.0, 0.35));
        assert_eq!(c.function, StationFunction::Residential);
        assert!(!c.low_confidence);
    }

    #[test]
    fn work_by_reversed_flow() {
        let c = classify_station_function(&commute(10, 100, 100, 10), &PoiMix::default(), &th(2.0, 0.35));
        assert_eq!(c.function, StationFunction::Work);
    }

    #[test]
    fn entertainment_by_weekend_share() {
        let mut p = FlowProfile::default();
        for h in 0..24 {
            p.weekday_board[h] = 1;
            p.weekday_alight[h] = 1;
        }
        // weekday total 48, weekend 72: share 0.6
        p.weekend_board[12] = 36;
        p.weekend_alight[14] = 36;
        let c = classify_station_function(&p, &PoiMix::default(), &th(2.0, 0.4));
        assert_eq!(c.function, StationFunction::Entertainment);
    }

    #[test]
    fn poi_fallbacks() {
        let flat = commute(5, 5, 5, 5);
        let leisure = PoiMix::from_counts(&[(PoiCategory::Restaurant, 3), (PoiCategory::FinancialServices, 2)]);
        assert_eq!(classify_station_function(&flat, &leisure, &th(1.5, 0.35)).function, StationFunction::Entertainment);
        let office = PoiMix::from_counts(&[(PoiCategory::FinancialServices, 3), (PoiCategory::Hotel, 1)]);
        assert_eq!(classify_station_function(&flat, &office, &th(1.5, 0.35)).function, StationFunction::Work);
        let homes = PoiMix::from_counts(&[(PoiCategory::Education, 2), (PoiCategory::BusinessResidence, 2)]);
        assert_eq!(classify_station_function(&flat, &homes, &th(1.5, 0.35)).function, StationFunction::Residential);
        assert_eq!(classify_station_function(&flat, &PoiMix::default(), &th(1.5, 0.35)).function, StationFunction::Entertainment);
    }

    #[test]
    fn degenerate_defaults_to_residential() {
        let c = classify_station_function(&FlowProfile::default(), &PoiMix::default(), &FunctionThresholds::default());
        assert_eq!(c.function, StationFunction::Residential);
        assert!(c.low_confidence);
    }

    #[test]
    fn names_round_trip() {
        for f in StationFunction::ALL {
            assert_eq!(f.as_str().parse::<StationFunction>().unwrap(), f);
        }
        assert_eq!("working".parse::<StationFunction>().unwrap(), StationFunction::Work);
    }
}
