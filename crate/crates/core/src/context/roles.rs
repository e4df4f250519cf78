use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{SecondOfDay, StationId, UserHistory};

/// What a station means to one particular card holder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserRole {
    Home,
    Work,
    Others,
}

impl UserRole {
    pub fn as_str(self) -> &'static str {
        match self {
            UserRole::Home => "home",
            UserRole::Work => "work",
            UserRole::Others => "others",
        }
    }
}

impl fmt::Display for UserRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The station most often used for the first boarding of a day.
///
/// Ties go to the station with more records overall, then to the smaller id.
pub fn infer_home_station(history: &UserHistory) -> Result<StationId> {
    let mut first_of_day: BTreeMap<StationId, usize> = BTreeMap::new();
    let mut seen_dates = BTreeSet::new();
    for r in history.records.iter().filter(|r| r.is_boarding()) {
        if seen_dates.insert(r.date) {
            *first_of_day.entry(r.station).or_default() += 1;
        }
    }
    let mut visits: BTreeMap<StationId, usize> = BTreeMap::new();
    for r in &history.records {
        *visits.entry(r.station).or_default() += 1;
    }
    first_of_day
        .into_iter()
        .max_by(|a, b| {
            a.1.cmp(&b.1)
                .then_with(|| visits[&a.0].cmp(&visits[&b.0]))
                // prefer the smaller id on full ties
                .then_with(|| b.0.cmp(&a.0))
        })
        .map(|(s, _)| s)
        .ok_or_else(|| Error::Unlabelable {
            card_id: history.card_id.clone(),
            reason: "no boardings".into(),
        })
}

/// Home, optional work station, and every other visited station.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRoles {
    pub home: StationId,
    pub work: Option<StationId>,
    roles: BTreeMap<StationId, UserRole>,
}

impl UserRoles {
    pub fn new(home: StationId, work: Option<StationId>) -> Self {
        let mut roles = BTreeMap::new();
        roles.insert(home, UserRole::Home);
        if let Some(w) = work {
            roles.insert(w, UserRole::Work);
        }
        UserRoles { home, work, roles }
    }

    /// Role of `station`; unvisited or unclassified stations are `Others`.
    pub fn role(&self, station: StationId) -> UserRole {
        self.roles.get(&station).copied().unwrap_or(UserRole::Others)
    }

    pub fn iter(&self) -> impl Iterator<Item = (StationId, UserRole)> + '_ {
        self.roles.iter().map(|(&s, &r)| (s, r))
    }
}

pub const WORK_WINDOW_START: u32 = 7 * 3600;
pub const WORK_WINDOW_END: u32 = 19 * 3600;
pub const MIN_WORK_VISITS: usize = 2;

/// Splits a user's stations into home, work and others.
///
/// Work is the non-home station with the most weekday records between 07:00 and
/// 19:00, if it has at least two; ties go to the smaller id.
pub fn infer_user_station_roles(history: &UserHistory, home: StationId) -> UserRoles {
    let in_window = |t: SecondOfDay| (WORK_WINDOW_START..WORK_WINDOW_END).contains(&t.secs());
    let mut counts: BTreeMap<StationId, usize> = BTreeMap::new();
    for r in &history.records {
        if r.station != home && !r.is_weekend() && in_window(r.time) {
            *counts.entry(r.station).or_default() += 1;
        }
    }
    let work = counts
        .into_iter()
        .filter(|&(_, n)| n >= MIN_WORK_VISITS)
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        .map(|(s, _)| s);
    let mut roles = UserRoles::new(home, work);
    for r in &history.records {
        roles.roles.entry(r.station).or_insert(UserRole::Others);
    }
    roles
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{CardRecord, Fare};
    use chrono::NaiveDate;

    fn rec(day: u32, h: u32, station: u32, board: bool) -> CardRecord {
        CardRecord {
            card_id: "u".into(),
            date: NaiveDate::from_ymd_opt(2015, 4, day).unwrap(),
            time: SecondOfDay::hms(h, 0, 0).unwrap(),
            station: StationId(station),
            fare: if board { Fare::ZERO } else { Fare::from_cents(300) },
        }
    }

    fn journey(day: u32, h: u32, from: u32, to: u32) -> [CardRecord; 2] {
        [rec(day, h, from, true), rec(day, h + 1, to, false)]
    }

    fn history(recs: Vec<CardRecord>) -> UserHistory {
        UserHistory::from_records("u".into(), recs)
    }

    #[test]
    fn majority_first_boarding() {
        let mut recs = Vec::new();
        for d in 1..=8 {
            let first = if d <= 6 { 1 } else { 3 };
            recs.extend(journey(d, 8, first, 2));
            recs.extend(journey(d, 18, 2, first));
        }
        assert_eq!(infer_home_station(&history(recs)).unwrap(), StationId(1));
    }

    #[test]
    fn tie_broken_by_total_visits() {
        let mut recs = Vec::new();
        for d in 1..=4 {
            recs.extend(journey(d, 8, 1, 5));
        }
        for d in 5..=8 {
            recs.extend(journey(d, 8, 2, 5));
            recs.extend(journey(d, 18, 5, 2));
        }
        assert_eq!(infer_home_station(&history(recs)).unwrap(), StationId(2));
    }

    #[test]
    fn full_tie_prefers_smaller_id() {
        let mut recs = Vec::new();
        recs.extend(journey(1, 8, 7, 9));
        recs.extend(journey(2, 8, 4, 9));
        recs.extend(journey(3, 8, 9, 7));
        recs.extend(journey(4, 8, 9, 4));
        // 7 and 4 each lead one day and have two visits; 9 leads two days
        assert_eq!(infer_home_station(&history(recs.clone())).unwrap(), StationId(9));
        let recs: Vec<_> = recs.into_iter().take(4).collect();
        assert_eq!(infer_home_station(&history(recs)).unwrap(), StationId(4));
    }

    #[test]
    fn no_boardings_is_unlabelable() {
        let h = history(vec![rec(1, 9, 1, false)]);
        assert!(matches!(infer_home_station(&h), Err(Error::Unlabelable { .. })));
    }

    #[test]
    fn commuter_roles() {
        let mut recs = Vec::new();
        // 2015-04-06..10 are Monday..Friday
        for d in 6..=10 {
            recs.extend(journey(d, 8, 1, 2));
            recs.extend(journey(d, 17, 2, 1));
        }
        let h = history(recs);
        let roles = infer_user_station_roles(&h, StationId(1));
        assert_eq!(roles.work, Some(StationId(2)));
        assert_eq!(roles.role(StationId(1)), UserRole::Home);
        assert_eq!(roles.role(StationId(2)), UserRole::Work);
        assert_eq!(roles.role(StationId(42)), UserRole::Others);
    }

    #[test]
    fn single_visits_are_others() {
        let mut recs = Vec::new();
        for (d, s) in (6..=9).zip(2..) {
            recs.push(rec(d, 8, 1, true));
            recs.push(rec(d, 9, s, false));
        }
        let roles = infer_user_station_roles(&history(recs), StationId(1));
        assert_eq!(roles.work, None);
        assert!(roles.iter().filter(|&(s, _)| s != StationId(1)).all(|(_, r)| r == UserRole::Others));
    }

    #[test]
    fn weekend_and_night_visits_do_not_count() {
        let mut recs = Vec::new();
        // Saturday and Sunday
        for d in 4..=5 {
            recs.extend(journey(d, 10, 1, 2));
        }
        for d in 6..=8 {
            recs.extend(journey(d, 20, 1, 3));
        }
        let roles = infer_user_station_roles(&history(recs), StationId(1));
        assert_eq!(roles.work, None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn home_invariant_under_input_permutation(
                days in proptest::collection::vec(proptest::collection::btree_map(3u32..11, (0u32..6, 0u32..6), 1..4), 1..10),
                seed in any::<u64>(),
            ) {
                let mut recs = Vec::new();
                for (d, trips) in days.iter().enumerate() {
                    for (&h, &(a, b)) in trips {
                        recs.extend(journey(d as u32 + 1, 2 * h, a, b));
                    }
                }
                let mut shuffled = recs.clone();
                let mut s = seed;
                for i in (1..shuffled.len()).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    shuffled.swap(i, (s >> 33) as usize % (i + 1));
                }
                prop_assert_eq!(
                    infer_home_station(&history(recs)).unwrap(),
                    infer_home_station(&history(shuffled)).unwrap()
                );
            }
        }
    }
}
