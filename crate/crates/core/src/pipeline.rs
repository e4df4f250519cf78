//! In-memory stage wiring shared by the command-line tool and the tests.

use std::collections::HashMap;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::context::{infer_user_station_roles, DroppedUser, SesClass, StationContext, UserLabel};
use crate::error::{Error, Result};
use crate::features::general::{compute_general_features, GeneralConfig, GeneralFeatures, GeneralLayout};
use crate::features::sequence::{assign_bin_locations, build_sequence, GapSplit, SequenceFeature, SequenceWindow};
use crate::geo::Haversine;
use crate::ingest::{build_histories, filter_frequent_users, ingest_stats, CardRecord, IngestStats, StationRegistry, Trip, UserHistory};
use crate::model::Sample;

#[derive(Debug, Clone)]
pub struct Ingested {
    /// Frequent users only, ordered by card id.
    pub frequent: Vec<UserHistory>,
    /// Trips of every user, frequent or not.
    pub all_trips: Vec<Trip>,
    /// Over all users before filtering.
    pub stats: IngestStats,
}

pub fn ingest(records: Vec<CardRecord>, min_days: usize) -> Result<Ingested> {
    let histories = build_histories(records);
    let stats = ingest_stats(&histories);
    let all_trips = histories.iter().flat_map(|h| h.trips.iter().cloned()).collect();
    let frequent = filter_frequent_users(histories, min_days)?;
    Ok(Ingested {
        frequent,
        all_trips,
        stats,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub bin_minutes: u32,
    /// First day of the sequence window; defaults to the earliest record.
    pub window_start: Option<NaiveDate>,
    /// Window length; defaults to reach the latest record.
    pub window_days: Option<u32>,
    pub gap_split: GapSplit,
    pub general: GeneralConfig,
    pub layout: GeneralLayout,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            bin_minutes: 15,
            window_start: None,
            window_days: None,
            gap_split: GapSplit::default(),
            general: GeneralConfig::default(),
            layout: GeneralLayout::default(),
        }
    }
}

/// The sequence window implied by the config and the data.
pub fn window_for(histories: &[UserHistory], cfg: &FeatureConfig) -> Result<SequenceWindow> {
    let dates = histories.iter().flat_map(|h| h.records.iter().map(|r| r.date));
    let (first, last) = dates.fold((None, None), |(lo, hi): (Option<NaiveDate>, Option<NaiveDate>), d| {
        (Some(lo.map_or(d, |x| x.min(d))), Some(hi.map_or(d, |x| x.max(d))))
    });
    let start = match (cfg.window_start, first) {
        (Some(s), _) => s,
        (None, Some(f)) => f,
        (None, None) => return Err(Error::Empty("no records to derive a window from")),
    };
    let days = match (cfg.window_days, last) {
        (Some(d), _) => d,
        (None, Some(l)) => u32::try_from((l - start).num_days() + 1).unwrap_or(0).max(1),
        (None, None) => 1,
    };
    SequenceWindow::new(start, days, cfg.bin_minutes)
}

/// Everything the model needs about one labeled user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserFeatures {
    pub card_id: String,
    pub general: GeneralFeatures<f64>,
    pub sequence: SequenceFeature,
    pub ses: SesClass,
}

#[derive(Debug, Clone)]
pub struct FeatureOutcome {
    pub rows: Vec<UserFeatures>,
    pub dropped: Vec<DroppedUser>,
    pub window: SequenceWindow,
}

/// General and sequence features for every labeled user, in history order.
pub fn build_features(
    histories: &[UserHistory],
    labels: &[UserLabel],
    registry: &StationRegistry,
    context: &StationContext,
    cfg: &FeatureConfig,
) -> Result<FeatureOutcome> {
    let window = window_for(histories, cfg)?;
    let by_card: HashMap<&str, &UserLabel> = labels.iter().map(|l| (l.card_id.as_str(), l)).collect();
    let results: Vec<std::result::Result<UserFeatures, DroppedUser>> = histories
        .par_iter()
        .filter_map(|h| by_card.get(h.card_id.as_str()).map(|l| (h, *l)))
        .map(|(h, label)| {
            let drop = |e: Error| DroppedUser {
                card_id: h.card_id.clone(),
                reason: e.to_string(),
            };
            let general = compute_general_features(h, registry, &Haversine, &cfg.general).map_err(drop)?;
            let roles = infer_user_station_roles(h, label.home_station);
            let locations = assign_bin_locations(h, &window, cfg.gap_split).map_err(drop)?;
            let sequence = build_sequence(&locations, context, &roles).map_err(drop)?;
            Ok(UserFeatures {
                card_id: h.card_id.clone(),
                general,
                sequence,
                ses: label.ses,
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for r in results {
        match r {
            Ok(u) => rows.push(u),
            Err(d) => dropped.push(d),
        }
    }
    Ok(FeatureOutcome { rows, dropped, window })
}

/// Model inputs with raw (unnormalized) general vectors.
pub fn samples(rows: &[UserFeatures], layout: &GeneralLayout) -> Vec<Sample<f64>> {
    rows.iter()
        .map(|u| Sample::new(u.card_id.clone(), &u.sequence, layout.raw_vector(&u.general), u.ses.index()))
        .collect()
}
