use std::io::Write;

use serde::{Deserialize, Serialize};

use super::record::{CardRecord, Fare};
use super::registry::StationId;
use crate::error::Result;

/// A paired boarding and alighting of one card.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trip {
    pub card_id: String,
    pub board_station: StationId,
    /// Epoch seconds.
    pub board_time: i64,
    pub alight_station: StationId,
    pub alight_time: i64,
    pub fare: Fare,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reconstruction {
    pub trips: Vec<Trip>,
    pub orphans: Vec<CardRecord>,
}

/// Pairs boardings with alightings for one card's time-sorted records.
///
/// A boarding opens a pending trip and the next alighting on the same date closes it.
/// A second boarding while one is pending orphans the first. An alighting without a
/// pending boarding, or on a later date than the pending boarding, is an orphan, and
/// a boarding still pending at the end of its service day is orphaned as well.
/// Every record ends up in exactly one trip or in the orphan list.
pub fn reconstruct_trips(records: &[CardRecord]) -> Reconstruction {
    let mut out = Reconstruction::default();
    let mut pending: Option<&CardRecord> = None;
    for rec in records {
        if rec.is_boarding() {
            if let Some(prev) = pending.replace(rec) {
                out.orphans.push(prev.clone());
            }
            continue;
        }
        match pending.take() {
            Some(board) if board.date == rec.date && board.time < rec.time => {
                out.trips.push(Trip {
                    card_id: rec.card_id.clone(),
                    board_station: board.station,
                    board_time: board.epoch_s(),
                    alight_station: rec.station,
                    alight_time: rec.epoch_s(),
                    fare: rec.fare,
                });
            }
            Some(board) => {
                out.orphans.push(board.clone());
                out.orphans.push(rec.clone());
            }
            None => out.orphans.push(rec.clone()),
        }
    }
    if let Some(board) = pending {
        out.orphans.push(board.clone());
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct TripRow {
    card_id: String,
    board_station_id: StationId,
    board_epoch_s: i64,
    alight_station_id: StationId,
    alight_epoch_s: i64,
    fare: String,
}

pub fn write_trips<'a, W: Write>(writer: W, trips: impl IntoIterator<Item = &'a Trip>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for t in trips {
        w.serialize(TripRow {
            card_id: t.card_id.clone(),
            board_station_id: t.board_station,
            board_epoch_s: t.board_time,
            alight_station_id: t.alight_station,
            alight_epoch_s: t.alight_time,
            fare: t.fare.to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trips<R: std::io::Read>(reader: R) -> Result<Vec<Trip>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut trips = Vec::new();
    for (i, row) in rdr.deserialize::<TripRow>().enumerate() {
        let row = row?;
        let fare = Fare::parse(&row.fare).map_err(|reason| crate::error::Error::Format {
            path: "trips".into(),
            line: i + 2,
            reason,
        })?;
        trips.push(Trip {
            card_id: row.card_id,
            board_station: row.board_station_id,
            board_time: row.board_epoch_s,
            alight_station: row.alight_station_id,
            alight_time: row.alight_epoch_s,
            fare,
        });
    }
    Ok(trips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::record::{parse_records, SecondOfDay};
    use crate::ingest::registry::{Station, StationRegistry};
    use chrono::NaiveDate;

    fn registry() -> StationRegistry {
        StationRegistry::new(["station A", "station B", "station C", "station D"].iter().enumerate().map(|(i, n)| Station {
            id: StationId(i as u32),
            name: n.to_string(),
            lat: 31.0,
            lon: 121.0 + i as f64 * 0.01,
        }))
        .unwrap()
    }

    const TABLE_ONE: &str = "\
1000019,2015/04/02,17:01:05,station A,0.0
1000019,2015/04/02,17:35:49,station B,4.0
1000039,2015/04/06,18:03:04,station C,0.0
1000039,2015/04/06,18:17:49,station D,2.0
";

    fn rec(card: &str, h: u32, m: u32, station: u32, cents: u32) -> CardRecord {
        CardRecord {
            card_id: card.into(),
            date: NaiveDate::from_ymd_opt(2015, 4, 2).unwrap(),
            time: SecondOfDay::hms(h, m, 0).unwrap(),
            station: StationId(station),
            fare: Fare::from_cents(cents),
        }
    }

    #[test]
    fn single_card_from_table_one() {
        let recs = parse_records(TABLE_ONE.as_bytes(), &registry()).unwrap().records;
        let out = reconstruct_trips(&recs[..2]);
        assert_eq!(out.trips.len(), 1);
        let t = &out.trips[0];
        assert_eq!((t.board_station, t.alight_station), (StationId(0), StationId(1)));
        assert_eq!(t.alight_time - t.board_time, 34 * 60 + 44);
        assert_eq!(t.fare.to_string(), "4.0");
        assert!(out.orphans.is_empty());
    }

    #[test]
    fn both_cards_from_table_one() {
        let recs = parse_records(TABLE_ONE.as_bytes(), &registry()).unwrap().records;
        let trips: Vec<Trip> = [&recs[..2], &recs[2..]]
            .iter()
            .flat_map(|r| reconstruct_trips(r).trips)
            .collect();
        assert_eq!(trips.len(), 2);
        assert_eq!((trips[0].board_station, trips[0].alight_station, trips[0].fare.cents()), (StationId(0), StationId(1), 400));
        assert_eq!((trips[1].board_station, trips[1].alight_station, trips[1].fare.cents()), (StationId(2), StationId(3), 200));
    }

    #[test]
    fn double_boarding_orphans_first() {
        let recs = vec![rec("x", 8, 0, 0, 0), rec("x", 8, 5, 1, 0), rec("x", 8, 30, 2, 300)];
        let out = reconstruct_trips(&recs);
        assert_eq!(out.trips.len(), 1);
        assert_eq!((out.trips[0].board_station, out.trips[0].alight_station), (StationId(1), StationId(2)));
        assert_eq!(out.orphans, vec![recs[0].clone()]);
    }

    #[test]
    fn alight_without_boarding_and_overnight() {
        let mut late = rec("x", 23, 50, 0, 0);
        late.date = NaiveDate::from_ymd_opt(2015, 4, 1).unwrap();
        let recs = vec![late, rec("x", 0, 20, 1, 300), rec("x", 9, 0, 2, 300)];
        let out = reconstruct_trips(&recs);
        assert!(out.trips.is_empty());
        assert_eq!(out.orphans.len(), 3);
    }

    #[test]
    fn trip_file_round_trip() {
        let recs = parse_records(TABLE_ONE.as_bytes(), &registry()).unwrap().records;
        let trips = reconstruct_trips(&recs).trips;
        let mut buf = Vec::new();
        write_trips(&mut buf, &trips).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("card_id,board_station_id,board_epoch_s,alight_station_id,alight_epoch_s,fare\n"));
        assert_eq!(read_trips(buf.as_slice()).unwrap(), trips);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn every_record_consumed_once(events in proptest::collection::vec((0u32..1440, 0u32..4, prop::bool::ANY), 0..60)) {
                let mut recs: Vec<CardRecord> = events
                    .iter()
                    .map(|&(minute, station, board)| rec("x", minute / 60, minute % 60, station, if board { 0 } else { 250 }))
                    .collect();
                recs.sort_by_key(|r| r.time);
                let out = reconstruct_trips(&recs);
                prop_assert_eq!(out.trips.len() * 2 + out.orphans.len(), recs.len());
                for t in &out.trips {
                    prop_assert!(t.board_time < t.alight_time);
                    prop_assert!(t.fare.cents() > 0);
                }
                prop_assert_eq!(reconstruct_trips(&recs), out);
            }
        }
    }
}
