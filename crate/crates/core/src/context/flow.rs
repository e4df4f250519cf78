use std::collections::BTreeMap;

use chrono::DateTime;
use rayon::prelude::*;

use crate::ingest::{is_weekend, StationId, Trip};

/// Hourly boarding and alighting counts at one station, split by weekday/weekend.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowProfile {
    pub weekday_board: [u32; 24],
    pub weekday_alight: [u32; 24],
    pub weekend_board: [u32; 24],
    pub weekend_alight: [u32; 24],
}

impl FlowProfile {
    fn add(&mut self, epoch_s: i64, boarding: bool) {
        let dt = DateTime::from_timestamp(epoch_s, 0)
            .expect("trip time within chrono range")
            .naive_utc();
        let hour = (epoch_s.rem_euclid(86_400) / 3600) as usize;
        let slot = match (is_weekend(dt.date()), boarding) {
            (false, true) => &mut self.weekday_board,
            (false, false) => &mut self.weekday_alight,
            (true, true) => &mut self.weekend_board,
            (true, false) => &mut self.weekend_alight,
        };
        slot[hour] += 1;
    }

    fn merge(mut self, other: &FlowProfile) -> Self {
        for h in 0..24 {
            self.weekday_board[h] += other.weekday_board[h];
            self.weekday_alight[h] += other.weekday_alight[h];
            self.weekend_board[h] += other.weekend_board[h];
            self.weekend_alight[h] += other.weekend_alight[h];
        }
        self
    }

    pub fn weekday_total(&self) -> u64 {
        sum(&self.weekday_board) + sum(&self.weekday_alight)
    }

    pub fn weekend_total(&self) -> u64 {
        sum(&self.weekend_board) + sum(&self.weekend_alight)
    }

    pub fn total(&self) -> u64 {
        self.weekday_total() + self.weekend_total()
    }

    pub fn is_zero(&self) -> bool {
        self.total() == 0
    }

    /// Weekday boardings and alightings summed over `hours`.
    pub fn weekday_window(&self, hours: std::ops::Range<usize>) -> (u64, u64) {
        let b = sum(&self.weekday_board[hours.clone()]);
        let a = sum(&self.weekday_alight[hours]);
        (b, a)
    }
}

fn sum(xs: &[u32]) -> u64 {
    xs.iter().map(|&x| u64::from(x)).sum()
}

/// Flow profile of a single station. Zero-traffic stations get an all-zero profile.
pub fn station_flow_profile(trips: &[Trip], station: StationId) -> FlowProfile {
    let mut p = FlowProfile::default();
    for t in trips {
        if t.board_station == station {
            p.add(t.board_time, true);
        }
        if t.alight_station == station {
            p.add(t.alight_time, false);
        }
    }
    p
}

/// Flow profiles of every station that appears in `trips`, via a parallel reduction.
pub fn build_flow_profiles(trips: &[Trip]) -> BTreeMap<StationId, FlowProfile> {
    trips
        .par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<StationId, FlowProfile>, t| {
            acc.entry(t.board_station).or_default().add(t.board_time, true);
            acc.entry(t.alight_station).or_default().add(t.alight_time, false);
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                let merged = a.remove(&k).unwrap_or_default().merge(&v);
                a.insert(k, merged);
            }
            a
        })
}
