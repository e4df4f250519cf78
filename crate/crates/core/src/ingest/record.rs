//! Raw fare-system records in the `id,date,time,station_name,fare` layout.

use std::fmt;
use std::io::{BufRead, Write};

use chrono::{Datelike, NaiveDate, Weekday};

use super::registry::{StationId, StationRegistry};
use crate::error::{Error, Result};

pub const RECORD_HEADER: &str = "id,date,time,station_name,fare";
pub const DATE_FORMAT: &str = "%Y/%m/%d";
pub const SECONDS_PER_DAY: u32 = 86_400;

/// Fare in hundredths of a currency unit. Zero marks a boarding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fare(u32);

impl Fare {
    pub const ZERO: Fare = Fare(0);

    pub fn from_cents(cents: u32) -> Self {
        Fare(cents)
    }

    pub fn cents(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Parses a non-negative decimal with at most two fractional digits.
    pub fn parse(s: &str) -> Result<Self, String> {
        if let Some(rest) = s.strip_prefix('-') {
            return Err(if rest.is_empty() {
                format!("malformed fare {s:?}")
            } else {
                format!("negative fare {s:?}")
            });
        }
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
        if !digits(whole) || (s.contains('.') && !digits(frac)) {
            return Err(format!("malformed fare {s:?}"));
        }
        if frac.len() > 2 {
            return Err(format!("fare {s:?} has sub-cent precision"));
        }
        let whole: u32 = whole.parse().map_err(|_| format!("fare {s:?} out of range"))?;
        let mut cents: u32 = if frac.is_empty() { 0 } else { frac.parse().unwrap() };
        if frac.len() == 1 {
            cents *= 10;
        }
        whole
            .checked_mul(100)
            .and_then(|w| w.checked_add(cents))
            .map(Fare)
            .ok_or_else(|| format!("fare {s:?} out of range"))
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl fmt::Display for Fare {
    /// One fractional digit when exact (`4.0`, `2.5`), two otherwise (`2.35`).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (whole, cents) = (self.0 / 100, self.0 % 100);
        if cents % 10 == 0 {
            write!(f, "{whole}.{}", cents / 10)
        } else {
            write!(f, "{whole}.{cents:02}")
        }
    }
}

/// Seconds since midnight, in `[0, 86400)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SecondOfDay(u32);

impl SecondOfDay {
    pub fn new(secs: u32) -> Option<Self> {
        (secs < SECONDS_PER_DAY).then_some(SecondOfDay(secs))
    }

    pub fn hms(h: u32, m: u32, s: u32) -> Option<Self> {
        (h < 24 && m < 60 && s < 60).then(|| SecondOfDay(h * 3600 + m * 60 + s))
    }

    pub fn secs(self) -> u32 {
        self.0
    }

    pub fn hour(self) -> u32 {
        self.0 / 3600
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        let bad = || format!("malformed time {s:?}");
        let mut parts = s.split(':');
        let mut field = || -> Result<u32, String> {
            let p = parts.next().ok_or_else(bad)?;
            if p.len() != 2 || !p.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            Ok(p.parse().unwrap())
        };
        let (h, m, sec) = (field()?, field()?, field()?);
        if parts.next().is_some() {
            return Err(bad());
        }
        SecondOfDay::hms(h, m, sec).ok_or_else(|| format!("time {s:?} out of range"))
    }
}

impl fmt::Display for SecondOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0;
        write!(f, "{:02}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60)
    }
}

/// One fare-system event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CardRecord {
    pub card_id: String,
    pub date: NaiveDate,
    pub time: SecondOfDay,
    pub station: StationId,
    pub fare: Fare,
}

impl CardRecord {
    /// A zero fare marks entry into the system; a positive fare marks exit.
    pub fn is_boarding(&self) -> bool {
        self.fare.is_zero()
    }

    /// Seconds since 1970-01-01T00:00:00, reading the local date and time as UTC.
    pub fn epoch_s(&self) -> i64 {
        epoch_s(self.date, self.time)
    }

    pub fn is_weekend(&self) -> bool {
        is_weekend(self.date)
    }

    /// Renders the record in input layout. `None` if the station is not registered.
    pub fn to_line(&self, registry: &StationRegistry) -> Option<String> {
        let name = registry.name(self.station)?;
        Some(format!(
            "{},{},{},{},{}",
            self.card_id,
            self.date.format(DATE_FORMAT),
            self.time,
            name,
            self.fare
        ))
    }
}

pub fn epoch_s(date: NaiveDate, time: SecondOfDay) -> i64 {
    let days = i64::from(date.num_days_from_ce() - NaiveDate::from_ymd_opt(1970, 1, 1).unwrap().num_days_from_ce());
    days * i64::from(SECONDS_PER_DAY) + i64::from(time.secs())
}

pub fn is_weekend(date: NaiveDate) -> bool {
    matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<CardRecord>,
    pub rejects: Vec<Reject>,
}

impl ParseOutcome {
    pub fn reject_count(&self) -> usize {
        self.rejects.len()
    }
}

fn parse_line(line: &str, registry: &StationRegistry) -> Result<CardRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 fields, found {}", fields.len()));
    }
    let card_id = fields[0];
    if card_id.is_empty() || card_id.chars().any(char::is_whitespace) {
        return Err(format!("malformed card id {card_id:?}"));
    }
    let date = NaiveDate::parse_from_str(fields[1], DATE_FORMAT)
        .map_err(|_| format!("malformed date {:?}", fields[1]))?;
    let time = SecondOfDay::parse(fields[2])?;
    let station = registry
        .resolve(fields[3])
        .ok_or_else(|| format!("unknown station {:?}", fields[3]))?;
    let fare = Fare::parse(fields[4])?;
    Ok(CardRecord {
        card_id: card_id.to_owned(),
        date,
        time,
        station,
        fare,
    })
}

/// Parses comma-separated records, preserving input order.
///
/// Malformed lines are rejected and reported with their line number; they are never
/// coerced. An optional header row equal to [`RECORD_HEADER`] and blank lines are
/// skipped. I/O failures abort the parse.
pub fn parse_records<R: BufRead>(reader: R, registry: &StationRegistry) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(Error::Stream)?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || (idx == 0 && trimmed == RECORD_HEADER) {
            continue;
        }
        match parse_line(trimmed, registry) {
            Ok(r) => out.records.push(r),
            Err(reason) => {
                log::debug!("line {}: {}", idx + 1, reason);
                out.rejects.push(Reject { line: idx + 1, reason });
            }
        }
    }
    Ok(out)
}

/// Writes records in input layout, headerless, one per line.
pub fn write_records<'a, W: Write>(
    mut writer: W,
    records: impl IntoIterator<Item = &'a CardRecord>,
    registry: &StationRegistry,
) -> Result<()> {
    for r in records {
        let line = r
            .to_line(registry)
            .ok_or_else(|| Error::UnknownStation(r.station.to_string()))?;
        writeln!(writer, "{line}")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_reject_log<W: Write>(mut writer: W, rejects: &[Reject]) -> Result<()> {
    writeln!(writer, "line,reason")?;
    for r in rejects {
        writeln!(writer, "{},{}", r.line, r.reason.replace(',', ";"))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::registry::Station;

    fn registry() -> StationRegistry {
        let names = ["station A", "station B", "station C", "station D"];
        StationRegistry::new(names.iter().enumerate().map(|(i, n)| Station {
            id: StationId(i as u32),
            name: n.to_string(),
            lat: 31.0 + i as f64 * 0.01,
            lon: 121.0,
        }))
        .unwrap()
    }

    #[test]
    fn table_one_line() {
        let out = parse_records("1000019,2015/04/02,17:01:05,station A,0.0".as_bytes(), &registry()).unwrap();
        assert_eq!(out.reject_count(), 0);
        let r = &out.records[0];
        assert_eq!(r.card_id, "1000019");
        assert_eq!(r.date, NaiveDate::from_ymd_opt(2015, 4, 2).unwrap());
        assert_eq!(r.time, SecondOfDay::hms(17, 1, 5).unwrap());
        assert_eq!(r.station, StationId(0));
        assert!(r.fare.is_zero() && r.is_boarding());
    }

    #[test]
    fn empty_input() {
        let out = parse_records("".as_bytes(), &registry()).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.reject_count(), 0);
    }

    #[test]
    fn negative_fare_rejected() {
        let out = parse_records("1,2015/04/02,17:01:05,station A,-1.0".as_bytes(), &registry()).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.reject_count(), 1);
        assert!(out.rejects[0].reason.contains("negative"));
    }

    #[test]
    fn malformed_fields_rejected_with_line_numbers() {
        let text = "\
id,date,time,station_name,fare
1,2015/04/02,17:01:05,station A,0.0
1,2015/13/02,17:01:05,station A,0.0
1,2015/04/02,24:00:00,station A,0.0
1,2015/04/02,17:01:05,station Z,0.0
1,2015/04/02,17:01:05,station A,abc
1,2015/04/02,17:01:05,station A,1.005
1,2015/04/02,17:01,station A,1.0
1,2015/04/02,17:01:05,station A
";
        let out = parse_records(text.as_bytes(), &registry()).unwrap();
        assert_eq!(out.records.len(), 1);
        let lines: Vec<usize> = out.rejects.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 4, 5, 6, 7, 8, 9]);
        assert!(out.rejects[2].reason.contains("unknown station"));
    }

    #[test]
    fn fare_formats() {
        for (s, cents, back) in [("0.0", 0, "0.0"), ("4.0", 400, "4.0"), ("4", 400, "4.0"), ("2.35", 235, "2.35"), ("2.5", 250, "2.5"), ("2.50", 250, "2.5")] {
            let f = Fare::parse(s).unwrap();
            assert_eq!(f.cents(), cents, "{s}");
            assert_eq!(f.to_string(), back);
        }
        assert!(Fare::parse("").is_err());
        assert!(Fare::parse(".5").is_err());
        assert!(Fare::parse("1.").is_err());
        assert!(Fare::parse("-").is_err());
    }

    #[test]
    fn epoch_seconds() {
        let d = NaiveDate::from_ymd_opt(1970, 1, 2).unwrap();
        assert_eq!(epoch_s(d, SecondOfDay::hms(0, 0, 1).unwrap()), 86_401);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn serialize_then_parse_is_lossless(
                id in 1u32..10_000_000,
                day in 0i64..365,
                secs in 0u32..SECONDS_PER_DAY,
                station in 0u32..4,
                cents in 0u32..100_000,
            ) {
                let reg = registry();
                let rec = CardRecord {
                    card_id: id.to_string(),
                    date: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap() + chrono::Duration::days(day),
                    time: SecondOfDay::new(secs).unwrap(),
                    station: StationId(station),
                    fare: Fare::from_cents(cents),
                };
                let line = rec.to_line(&reg).unwrap();
                let out = parse_records(line.as_bytes(), &reg).unwrap();
                prop_assert_eq!(out.reject_count(), 0);
                prop_assert_eq!(&out.records[0], &rec);
            }
        }
    }
}
