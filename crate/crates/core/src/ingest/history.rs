use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::record::CardRecord;
use super::trips::{reconstruct_trips, Trip};
use crate::error::{Error, Result};

/// Default frequent-user threshold in distinct active days.
pub const DEFAULT_MIN_DAYS: usize = 7;

/// One card's records in `(date, time)` order, with its reconstructed trips.
#[derive(Debug, Clone, PartialEq)]
pub struct UserHistory {
    pub card_id: String,
    pub records: Vec<CardRecord>,
    pub trips: Vec<Trip>,
    pub orphans: usize,
    pub active_days: usize,
}

impl UserHistory {
    /// Builds a history from one card's records in any order.
    pub fn from_records(card_id: String, mut records: Vec<CardRecord>) -> Self {
        // stable: same-second records keep their input order
        records.sort_by_key(|r| (r.date, r.time));
        let recon = reconstruct_trips(&records);
        let active_days = records.iter().map(|r| r.date).collect::<BTreeSet<_>>().len();
        UserHistory {
            card_id,
            trips: recon.trips,
            orphans: recon.orphans.len(),
            records,
            active_days,
        }
    }

    pub fn is_frequent(&self, min_days: usize) -> bool {
        self.active_days >= min_days
    }
}

/// Groups records by card and reconstructs each card's trips.
///
/// Cards are processed in parallel; the output is ordered by card id regardless of
/// the thread count.
pub fn build_histories(records: Vec<CardRecord>) -> Vec<UserHistory> {
    let mut by_card: BTreeMap<String, Vec<CardRecord>> = BTreeMap::new();
    for r in records {
        by_card.entry(r.card_id.clone()).or_default().push(r);
    }
    by_card
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(card, recs)| UserHistory::from_records(card, recs))
        .collect()
}

/// Keeps the histories with at least `min_days` distinct active days.
pub fn filter_frequent_users(histories: Vec<UserHistory>, min_days: usize) -> Result<Vec<UserHistory>> {
    if min_days == 0 {
        return Err(Error::config("min_days must be at least 1"));
    }
    Ok(histories.into_iter().filter(|h| h.is_frequent(min_days)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveDayBucket {
    pub active_days: usize,
    pub users: usize,
    pub trips: usize,
    pub user_share: f64,
    pub trip_share: f64,
}

/// User and trip distribution over active-day counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestStats {
    pub total_users: usize,
    pub total_trips: usize,
    pub total_orphans: usize,
    /// Ascending by `active_days`; only non-empty buckets appear.
    pub buckets: Vec<ActiveDayBucket>,
}

impl IngestStats {
    pub fn bucket(&self, active_days: usize) -> Option<&ActiveDayBucket> {
        self.buckets.iter().find(|b| b.active_days == active_days)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for b in &self.buckets {
            w.serialize(b)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn ingest_stats(histories: &[UserHistory]) -> IngestStats {
    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut stats = IngestStats::default();
    for h in histories {
        let e = counts.entry(h.active_days).or_default();
        e.0 += 1;
        e.1 += h.trips.len();
        stats.total_users += 1;
        stats.total_trips += h.trips.len();
        stats.total_orphans += h.orphans;
    }
    let share = |n: usize, total: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    stats.buckets = counts
        .into_iter()
        .map(|(active_days, (users, trips))| ActiveDayBucket {
            active_days,
            users,
            trips,
            user_share: share(users, stats.total_users),
            trip_share: share(trips, stats.total_trips),
        })
        .collect();
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::record::{Fare, SecondOfDay};
    use crate::ingest::registry::StationId;
    use chrono::NaiveDate;

    fn rec(card: &str, day: u32, minute: u32, board: bool) -> CardRecord {
        CardRecord {
            card_id: card.into(),
            date: NaiveDate::from_ymd_opt(2015, 4, day).unwrap(),
            time: SecondOfDay::new(minute * 60).unwrap(),
            station: StationId(if board { 0 } else { 1 }),
            fare: if board { Fare::ZERO } else { Fare::from_cents(300) },
        }
    }

    fn user_on_days(card: &str, days: &[u32]) -> Vec<CardRecord> {
        days.iter()
            .flat_map(|&d| [rec(card, d, 480, true), rec(card, d, 510, false)])
            .collect()
    }

    #[test]
    fn seven_days_kept() {
        let hs = build_histories(user_on_days("a", &[1, 2, 3, 4, 5, 6, 7]));
        assert_eq!(hs[0].active_days, 7);
        assert_eq!(filter_frequent_users(hs, 7).unwrap().len(), 1);
    }

    #[test]
    fn ten_records_one_day_dropped() {
        let recs: Vec<_> = (0..10).map(|i| rec("a", 1, 400 + i * 10, i % 2 == 0)).collect();
        let hs = build_histories(recs);
        assert_eq!(hs[0].active_days, 1);
        assert!(filter_frequent_users(hs, 7).unwrap().is_empty());
    }

    #[test]
    fn min_days_one_keeps_all() {
        let mut recs = user_on_days("a", &[1]);
        recs.extend(user_on_days("b", &[1, 2, 3]));
        let hs = build_histories(recs);
        assert_eq!(filter_frequent_users(hs, 1).unwrap().len(), 2);
        assert!(filter_frequent_users(vec![], 0).is_err());
    }

    #[test]
    fn histories_are_sorted_and_grouped() {
        let mut recs = user_on_days("b", &[3, 1]);
        recs.extend(user_on_days("a", &[2]));
        recs.reverse();
        let hs = build_histories(recs);
        assert_eq!(hs.iter().map(|h| h.card_id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        let b = &hs[1];
        assert!(b.records.windows(2).all(|w| (w[0].date, w[0].time) <= (w[1].date, w[1].time)));
        assert_eq!(b.trips.len(), 2);
        assert_eq!(b.orphans, 0);
    }

    #[test]
    fn stats_two_buckets() {
        let mut recs = Vec::new();
        recs.extend(user_on_days("a", &[1]));
        recs.extend(user_on_days("b", &[2]));
        recs.extend(user_on_days("c", &[1, 2, 3, 4, 5, 6, 7, 8]));
        recs.extend(user_on_days("d", &[1, 2, 3, 4, 5, 6, 7, 8]));
        let s = ingest_stats(&build_histories(recs));
        assert_eq!(s.bucket(1).unwrap().user_share, 0.5);
        assert_eq!(s.bucket(8).unwrap().user_share, 0.5);
        assert_eq!(s.bucket(8).unwrap().trip_share, 16.0 / 18.0);
    }

    #[test]
    fn stats_single_and_empty() {
        let s = ingest_stats(&build_histories(user_on_days("a", &[1, 2])));
        assert_eq!(s.buckets.len(), 1);
        assert_eq!(s.bucket(2).unwrap().user_share, 1.0);
        assert_eq!(s.bucket(2).unwrap().trip_share, 1.0);
        let empty = ingest_stats(&[]);
        assert_eq!(empty, IngestStats::default());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_records() -> impl Strategy<Value = Vec<CardRecord>> {
            proptest::collection::vec((0u8..12, 1u32..17, 0u32..1440, prop::bool::ANY), 0..200).prop_map(|v| {
                v.into_iter()
                    .map(|(card, day, minute, board)| rec(&format!("c{card}"), day, minute, board))
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn stats_match_recount(recs in random_records()) {
                let hs = build_histories(recs.clone());
                let s = ingest_stats(&hs);
                // independent recount straight from the raw records
                let mut days: BTreeMap<&str, BTreeSet<NaiveDate>> = BTreeMap::new();
                for r in &recs {
                    days.entry(r.card_id.as_str()).or_default().insert(r.date);
                }
                let n_users = days.len();
                for b in &s.buckets {
                    let expect = days.values().filter(|d| d.len() == b.active_days).count();
                    prop_assert_eq!(b.users, expect);
                    prop_assert!((b.user_share - expect as f64 / n_users as f64).abs() < 1e-12);
                }
                if n_users > 0 {
                    let us: f64 = s.buckets.iter().map(|b| b.user_share).sum();
                    prop_assert!((us - 1.0).abs() < 1e-9);
                }
                if s.total_trips > 0 {
                    let ts: f64 = s.buckets.iter().map(|b| b.trip_share).sum();
                    prop_assert!((ts - 1.0).abs() < 1e-9);
                }
            }

            #[test]
            fn filter_is_monotone(recs in random_records(), d1 in 1usize..10, d2 in 1usize..10) {
                let (lo, hi) = (d1.min(d2), d1.max(d2));
                let hs = build_histories(recs);
                let a: BTreeSet<String> = filter_frequent_users(hs.clone(), lo).unwrap().into_iter().map(|h| h.card_id).collect();
                let b: BTreeSet<String> = filter_frequent_users(hs, hi).unwrap().into_iter().map(|h| h.card_id).collect();
                prop_assert!(b.is_subset(&a));
            }
        }
    }
}
