//! Fixed-length per-time-bin encoding of a user's whereabouts.
//!
//! The study window is cut into bins. Bins holding a record take that record's
//! station. Empty bins between a boarding and the next alighting are in-vehicle.
//! Empty bins between an alighting and the next boarding are split: the first half
//! (plus an odd middle bin) stays at the alighting station, the rest moves to the
//! next boarding station. Bins before the first record take the first record's
//! station and bins after the last record take the last record's station.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::Serialize;

use crate::context::{StationContext, StationFunction, UserRole, UserRoles};
use crate::error::{Error, Result};
use crate::ingest::{CardRecord, StationId, UserHistory, SECONDS_PER_DAY};

/// Study window and bin width. The bin count is derived, never fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceWindow {
    pub start: NaiveDate,
    pub days: u32,
    pub bin_minutes: u32,
}

impl SequenceWindow {
    pub fn new(start: NaiveDate, days: u32, bin_minutes: u32) -> Result<Self> {
        if days == 0 {
            return Err(Error::config("window must span at least one day"));
        }
        if bin_minutes == 0 || 60 % bin_minutes != 0 {
            return Err(Error::config(format!("bin width {bin_minutes} min does not divide an hour")));
        }
        Ok(SequenceWindow {
            start,
            days,
            bin_minutes,
        })
    }

    pub fn bins_per_day(&self) -> usize {
        (24 * 60 / self.bin_minutes) as usize
    }

    /// Number of bins `N`.
    pub fn len(&self) -> usize {
        self.days as usize * self.bins_per_day()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bin index of a record, or `None` outside the window.
    pub fn bin_of(&self, r: &CardRecord) -> Option<usize> {
        let day = (r.date - self.start).num_days();
        if day < 0 || day >= i64::from(self.days) {
            return None;
        }
        let secs = day as u64 * u64::from(SECONDS_PER_DAY) + u64::from(r.time.secs());
        Some((secs / (u64::from(self.bin_minutes) * 60)) as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinLocation {
    Station(StationId),
    InVehicle,
}

/// Which station the first half of an alight-to-board gap is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapSplit {
    /// The station where the user got off.
    #[default]
    AlightStation,
    /// The boarding station of the trip that just ended.
    TripOrigin,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    station: StationId,
    boarding: bool,
    /// For alightings: boarding station of the latest preceding boarding.
    origin: Option<StationId>,
}

struct BinEvents {
    bin: usize,
    first: Event,
    last: Event,
    /// Last boarding station if the bin has one, else the last record's station.
    label: StationId,
    has_boarding: bool,
}

fn group_events(history: &UserHistory, window: &SequenceWindow) -> Vec<BinEvents> {
    let mut groups: Vec<BinEvents> = Vec::new();
    let mut last_board: Option<StationId> = None;
    for r in &history.records {
        let Some(bin) = window.bin_of(r) else { continue };
        let ev = Event {
            station: r.station,
            boarding: r.is_boarding(),
            origin: if r.is_boarding() { None } else { last_board },
        };
        if r.is_boarding() {
            last_board = Some(r.station);
        }
        match groups.last_mut() {
            Some(g) if g.bin == bin => {
                g.last = ev;
                if ev.boarding || !g.has_boarding {
                    g.label = ev.station;
                }
                g.has_boarding |= ev.boarding;
            }
            _ => groups.push(BinEvents {
                bin,
                first: ev,
                last: ev,
                label: ev.station,
                has_boarding: ev.boarding,
            }),
        }
    }
    groups
}

/// Assigns a location to every bin of the window.
pub fn assign_bin_locations(history: &UserHistory, window: &SequenceWindow, split: GapSplit) -> Result<Vec<BinLocation>> {
    let groups = group_events(history, window);
    let (first, last) = match (groups.first(), groups.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Empty("no records inside the sequence window")),
    };
    let n = window.len();
    let mut loc = vec![BinLocation::InVehicle; n];
    loc[..first.bin].fill(BinLocation::Station(first.first.station));
    loc[last.bin + 1..].fill(BinLocation::Station(last.last.station));
    for g in &groups {
        loc[g.bin] = BinLocation::Station(g.label);
    }
    for pair in groups.windows(2) {
        let (p, q) = (&pair[0], &pair[1]);
        let gap = p.bin + 1..q.bin;
        if gap.is_empty() {
            continue;
        }
        if p.last.boarding && !q.first.boarding {
            loc[gap].fill(BinLocation::InVehicle);
            continue;
        }
        let before = match split {
            GapSplit::AlightStation => p.last.station,
            GapSplit::TripOrigin => p.last.origin.unwrap_or(p.last.station),
        };
        let len = gap.len();
        let mid = gap.start + len.div_ceil(2);
        loc[gap.start..mid].fill(BinLocation::Station(before));
        loc[mid..gap.end].fill(BinLocation::Station(q.first.station));
    }
    Ok(loc)
}

/// A journey as seen at bin resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinTrip {
    pub board_station: StationId,
    pub board_bin: usize,
    pub alight_station: StationId,
    pub alight_bin: usize,
}

/// Reads journeys back from runs of in-vehicle bins.
pub fn recover_trips(locations: &[BinLocation]) -> Vec<BinTrip> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < locations.len() {
        if locations[i] != BinLocation::InVehicle {
            i += 1;
            continue;
        }
        let start = i;
        while i < locations.len() && locations[i] == BinLocation::InVehicle {
            i += 1;
        }
        if let (Some(b), Some(a)) = (start.checked_sub(1), (i < locations.len()).then_some(i)) {
            if let (BinLocation::Station(bs), BinLocation::Station(as_)) = (locations[b], locations[a]) {
                out.push(BinTrip {
                    board_station: bs,
                    board_bin: b,
                    alight_station: as_,
                    alight_bin: a,
                });
            }
        }
    }
    out
}

/// Function of the current bin's station for the population at large.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FmCategory {
    Function(StationFunction),
    Transfer,
}

/// Function of the current bin's station for this user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FuCategory {
    Role(UserRole),
    Transfer,
}

impl FmCategory {
    pub const COUNT: usize = 4;
    pub const ALL: [FmCategory; 4] = [
        FmCategory::Function(StationFunction::Residential),
        FmCategory::Function(StationFunction::Entertainment),
        FmCategory::Function(StationFunction::Work),
        FmCategory::Transfer,
    ];

    pub fn index(self) -> usize {
        match self {
            FmCategory::Function(StationFunction::Residential) => 0,
            FmCategory::Function(StationFunction::Entertainment) => 1,
            FmCategory::Function(StationFunction::Work) => 2,
            FmCategory::Transfer => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FmCategory::Function(StationFunction::Work) => "working",
            FmCategory::Function(f) => f.as_str(),
            FmCategory::Transfer => "transfer",
        }
    }
}

impl FuCategory {
    pub const COUNT: usize = 4;
    pub const ALL: [FuCategory; 4] = [
        FuCategory::Role(UserRole::Home),
        FuCategory::Role(UserRole::Work),
        FuCategory::Role(UserRole::Others),
        FuCategory::Transfer,
    ];

    pub fn index(self) -> usize {
        match self {
            FuCategory::Role(UserRole::Home) => 0,
            FuCategory::Role(UserRole::Work) => 1,
            FuCategory::Role(UserRole::Others) => 2,
            FuCategory::Transfer => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FuCategory::Role(r) => r.as_str(),
            FuCategory::Transfer => "transfer",
        }
    }
}

impl fmt::Display for FmCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for FuCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FmCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transfer" => Ok(FmCategory::Transfer),
            other => other.parse().map(FmCategory::Function),
        }
    }
}

impl FromStr for FuCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "home" => Ok(FuCategory::Role(UserRole::Home)),
            "work" => Ok(FuCategory::Role(UserRole::Work)),
            "others" => Ok(FuCategory::Role(UserRole::Others)),
            "transfer" => Ok(FuCategory::Transfer),
            _ => Err(format!("unknown user-role category {s:?}")),
        }
    }
}

/// Per-bin `(timeID, F_fm, F_fu)`; the time id of bin `i` is `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceFeature {
    pub fm: Vec<FmCategory>,
    pub fu: Vec<FuCategory>,
}

impl SequenceFeature {
    pub fn len(&self) -> usize {
        self.fm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fm.is_empty()
    }

    /// `(time_id, fm_index, fu_index)` of bin `i`.
    pub fn token(&self, i: usize) -> (usize, usize, usize) {
        (i, self.fm[i].index(), self.fu[i].index())
    }

    /// Run-length encoding as `(fm,fu)@count` tokens.
    pub fn to_rle(&self) -> String {
        let mut parts = Vec::new();
        let mut i = 0;
        while i < self.len() {
            let key = (self.fm[i], self.fu[i]);
            let start = i;
            while i < self.len() && (self.fm[i], self.fu[i]) == key {
                i += 1;
            }
            parts.push(format!("({},{})@{}", key.0, key.1, i - start));
        }
        parts.join(" ")
    }

    pub fn from_rle(tokens: &str) -> Result<Self, String> {
        let mut seq = SequenceFeature {
            fm: Vec::new(),
            fu: Vec::new(),
        };
        for tok in tokens.split_whitespace() {
            let bad = || format!("malformed sequence token {tok:?}");
            let (pair, count) = tok.rsplit_once('@').ok_or_else(bad)?;
            let inner = pair.strip_prefix('(').and_then(|p| p.strip_suffix(')')).ok_or_else(bad)?;
            let (fm, fu) = inner.split_once(',').ok_or_else(bad)?;
            let fm: FmCategory = fm.parse()?;
            let fu: FuCategory = fu.parse()?;
            let count: usize = count.parse().map_err(|_| bad())?;
            if (fm == FmCategory::Transfer) != (fu == FuCategory::Transfer) {
                return Err(format!("token {tok:?} mixes transfer and non-transfer"));
            }
            seq.fm.extend(std::iter::repeat_n(fm, count));
            seq.fu.extend(std::iter::repeat_n(fu, count));
        }
        Ok(seq)
    }
}

/// Maps bin locations to `(F_fm, F_fu)` using station functions and the user's roles.
/// Stations without a role for this user read as `others`.
pub fn build_sequence(locations: &[BinLocation], context: &StationContext, roles: &UserRoles) -> Result<SequenceFeature> {
    let mut seq = SequenceFeature {
        fm: Vec::with_capacity(locations.len()),
        fu: Vec::with_capacity(locations.len()),
    };
    for loc in locations {
        let (fm, fu) = match *loc {
            BinLocation::InVehicle => (FmCategory::Transfer, FuCategory::Transfer),
            BinLocation::Station(s) => {
                let f = context
                    .function(s)
                    .ok_or_else(|| Error::UnknownStation(format!("{s} has no function class")))?;
                (FmCategory::Function(f), FuCategory::Role(roles.role(s)))
            }
        };
        seq.fm.push(fm);
        seq.fu.push(fu);
    }
    Ok(seq)
}

/// Category shares over all bins of all users.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SequenceStats {
    pub users: usize,
    pub bins: usize,
    /// Indexed by [`FmCategory::index`].
    pub fm_share: [f64; 4],
    /// Indexed by [`FuCategory::index`].
    pub fu_share: [f64; 4],
}

pub fn sequence_stats(seqs: &[SequenceFeature]) -> SequenceStats {
    let mut fm = [0usize; 4];
    let mut fu = [0usize; 4];
    for s in seqs {
        for i in 0..s.len() {
            fm[s.fm[i].index()] += 1;
            fu[s.fu[i].index()] += 1;
        }
    }
    let bins: usize = fm.iter().sum();
    let share = |c: usize| if bins == 0 { 0.0 } else { c as f64 / bins as f64 };
    SequenceStats {
        users: seqs.len(),
        bins,
        fm_share: fm.map(share),
        fu_share: fu.map(share),
    }
}

/// One line per user: card id, then the run-length tokens.
pub fn write_sequence_dump<'a, W: Write>(
    mut writer: W,
    rows: impl IntoIterator<Item = (&'a str, &'a SequenceFeature)>,
) -> Result<()> {
    for (card, seq) in rows {
        writeln!(writer, "{card} {}", seq.to_rle())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_sequence_dump<R: BufRead>(reader: R) -> Result<Vec<(String, SequenceFeature)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (card, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
        let seq = SequenceFeature::from_rle(rest).map_err(|reason| Error::Format {
            path: "sequences".into(),
            line: i + 1,
            reason,
        })?;
        out.push((card.to_owned(), seq));
    }
    Ok(out)
}
