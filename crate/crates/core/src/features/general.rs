//! Whole-history mobility statistics: radius of gyration, k-radius of gyration,
//! distinct stations, activity entropy and travel diversity.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{centroid, LatLon, Metric};
use crate::ingest::{StationId, StationRegistry, UserHistory};
use crate::scalar::Scalar;

/// One record reduced to where it happened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Visit<T> {
    pub station: StationId,
    pub pos: LatLon<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralConfig {
    /// Number of top stations for the k-radius of gyration.
    pub k: usize,
    /// Root-mean-square radius instead of the mean distance.
    pub rms_rg: bool,
    /// Measure the k-radius from the count-weighted centroid of the top-k stations
    /// instead of the centroid of all records.
    pub topk_centroid: bool,
}

impl Default for GeneralConfig {
    fn default() -> Self {
        GeneralConfig {
            k: 2,
            rms_rg: false,
            topk_centroid: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralFeatures<T> {
    /// km
    pub f_rg: T,
    /// km
    pub f_krg: T,
    /// `f_krg >= f_rg / 2`
    pub returner: bool,
    pub f_nds: usize,
    /// nats
    pub f_ae: T,
    /// nats
    pub f_td: T,
    /// Set when there were no trips to compute travel diversity from.
    pub td_degenerate: bool,
}

fn station_counts<T>(visits: &[Visit<T>]) -> BTreeMap<StationId, (usize, LatLon<T>)>
where
    T: Scalar,
{
    let mut counts: BTreeMap<StationId, (usize, LatLon<T>)> = BTreeMap::new();
    for v in visits {
        counts.entry(v.station).or_insert((0, v.pos)).0 += 1;
    }
    counts
}

fn all_centroid<T: Scalar>(visits: &[Visit<T>]) -> Result<LatLon<T>> {
    let pts: Vec<LatLon<T>> = visits.iter().map(|v| v.pos).collect();
    centroid(&pts).ok_or(Error::Empty("history has no records"))
}

/// Mean distance of every record to the centroid of all records, or the
/// root-mean-square distance when `rms` is set.
pub fn radius_of_gyration<T: Scalar, M: Metric<T>>(visits: &[Visit<T>], metric: &M, rms: bool) -> Result<T> {
    let c = all_centroid(visits)?;
    let n = T::from_usize_lossy(visits.len());
    if rms {
        let ss: T = visits
            .iter()
            .map(|v| {
                let d = metric.distance_km(&v.pos, &c);
                d * d
            })
            .sum();
        Ok((ss / n).sqrt())
    } else {
        Ok(visits.iter().map(|v| metric.distance_km(&v.pos, &c)).sum::<T>() / n)
    }
}

/// Visit-weighted mean distance of the `k` most visited stations to the centroid,
/// with the returner flag `f_krg >= f_rg / 2`.
///
/// Count ties at the cut go to the smaller station id. With fewer than `k` distinct
/// stations, all of them are used.
pub fn k_radius_of_gyration<T: Scalar, M: Metric<T>>(
    visits: &[Visit<T>],
    k: usize,
    metric: &M,
    cfg: &GeneralConfig,
) -> Result<(T, bool)> {
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    let rg = radius_of_gyration(visits, metric, cfg.rms_rg)?;
    let mut ranked: Vec<(StationId, (usize, LatLon<T>))> = station_counts(visits).into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.0.cmp(&b.0)));
    ranked.truncate(k);

    let total = T::from_usize_lossy(ranked.iter().map(|(_, (n, _))| n).sum());
    let center = if cfg.topk_centroid {
        let w = |f: fn(&LatLon<T>) -> T| {
            ranked.iter().map(|(_, (n, p))| T::from_usize_lossy(*n) * f(p)).sum::<T>() / total
        };
        LatLon::new(w(|p| p.lat), w(|p| p.lon))
    } else {
        all_centroid(visits)?
    };
    let krg = ranked
        .iter()
        .map(|(_, (n, p))| T::from_usize_lossy(*n) * metric.distance_km(p, &center))
        .sum::<T>()
        / total;
    Ok((krg, krg >= rg / T::lit(2.0)))
}

pub fn num_distinct_stations(stations: impl IntoIterator<Item = StationId>) -> usize {
    stations.into_iter().collect::<std::collections::BTreeSet<_>>().len()
}

fn entropy_of_counts<T: Scalar>(counts: impl Iterator<Item = usize> + Clone) -> T {
    let total = T::from_usize_lossy(counts.clone().sum());
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = T::from_usize_lossy(c) / total;
            -p * p.ln()
        })
        .sum()
}

/// Shannon entropy (nats) of the per-station visit shares.
pub fn activity_entropy<T: Scalar>(stations: &[StationId]) -> Result<T> {
    if stations.is_empty() {
        return Err(Error::Empty("history has no records"));
    }
    let mut counts: BTreeMap<StationId, usize> = BTreeMap::new();
    for s in stations {
        *counts.entry(*s).or_default() += 1;
    }
    Ok(entropy_of_counts(counts.values().copied()))
}

/// Shannon entropy (nats) of the shares of undirected origin-destination pairs.
/// Returns `(0, true)` when there are no trips.
pub fn travel_diversity<T: Scalar>(od_pairs: &[(StationId, StationId)]) -> (T, bool) {
    if od_pairs.is_empty() {
        return (T::zero(), true);
    }
    let mut counts: BTreeMap<(StationId, StationId), usize> = BTreeMap::new();
    for &(a, b) in od_pairs {
        *counts.entry((a.min(b), a.max(b))).or_default() += 1;
    }
    (entropy_of_counts(counts.values().copied()), false)
}

/// Resolves record positions through the registry.
pub fn visits_of<T: Scalar>(history: &UserHistory, registry: &StationRegistry) -> Result<Vec<Visit<T>>> {
    history
        .records
        .iter()
        .map(|r| {
            registry
                .position(r.station)
                .map(|p| Visit {
                    station: r.station,
                    pos: p.cast(),
                })
                .ok_or_else(|| Error::UnknownStation(r.station.to_string()))
        })
        .collect()
}

pub fn compute_general_features<T: Scalar, M: Metric<T>>(
    history: &UserHistory,
    registry: &StationRegistry,
    metric: &M,
    cfg: &GeneralConfig,
) -> Result<GeneralFeatures<T>> {
    let visits = visits_of::<T>(history, registry)?;
    let f_rg = radius_of_gyration(&visits, metric, cfg.rms_rg)?;
    let (f_krg, returner) = k_radius_of_gyration(&visits, cfg.k, metric, cfg)?;
    let stations: Vec<StationId> = visits.iter().map(|v| v.station).collect();
    let od: Vec<(StationId, StationId)> = history.trips.iter().map(|t| (t.board_station, t.alight_station)).collect();
    let (f_td, td_degenerate) = travel_diversity(&od);
    Ok(GeneralFeatures {
        f_rg,
        f_krg,
        returner,
        f_nds: num_distinct_stations(stations.iter().copied()),
        f_ae: activity_entropy(&stations)?,
        f_td,
        td_degenerate,
    })
}

/// Which components make up the general input vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GeneralLayout {
    pub include_td: bool,
    pub include_returner_flag: bool,
}

impl GeneralLayout {
    pub fn width(&self) -> usize {
        4 + usize::from(self.include_td) + usize::from(self.include_returner_flag)
    }

    /// `[f_rg, f_krg, f_nds, f_ae]`, then `f_td` and the returner flag if enabled.
    pub fn raw_vector<T: Scalar>(&self, f: &GeneralFeatures<T>) -> Vec<T> {
        let mut v = vec![f.f_rg, f.f_krg, T::from_usize_lossy(f.f_nds), f.f_ae];
        if self.include_td {
            v.push(f.f_td);
        }
        if self.include_returner_flag {
            v.push(if f.returner { T::one() } else { T::zero() });
        }
        v
    }
}

/// Per-component mean and population standard deviation of the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> NormStats<T> {
    pub fn fit(rows: &[Vec<T>]) -> Result<Self> {
        let width = rows.first().map(Vec::len).ok_or(Error::Empty("no rows to normalize"))?;
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::shape("ragged feature rows"));
        }
        let n = T::from_usize_lossy(rows.len());
        let mean: Vec<T> = (0..width).map(|j| rows.iter().map(|r| r[j]).sum::<T>() / n).collect();
        let std = (0..width)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<T>() / n;
                var.sqrt()
            })
            .collect();
        Ok(NormStats { mean, std })
    }

    /// Z-scores `raw`; components with zero spread map to 0.
    pub fn normalize(&self, raw: &[T]) -> Vec<T> {
        raw.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&x, (&m, &s))| if s > T::zero() { (x - m) / s } else { T::zero() })
            .collect()
    }

    pub fn denormalize(&self, z: &[T]) -> Vec<T> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&z, (&m, &s))| z * s + m)
            .collect()
    }
}

pub fn assemble_general_vector<T: Scalar>(f: &GeneralFeatures<T>, stats: &NormStats<T>, layout: &GeneralLayout) -> Vec<T> {
    stats.normalize(&layout.raw_vector(f))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeatureRow {
    card_id: String,
    f_rg: f64,
    f_krg: f64,
    returner: bool,
    f_nds: usize,
    f_ae: f64,
    f_td: f64,
}

/// Writes the raw features as `card_id,f_rg,f_krg,returner,f_nds,f_ae,f_td`.
pub fn write_feature_dump<'a, W: Write>(
    writer: W,
    rows: impl IntoIterator<Item = (&'a str, &'a GeneralFeatures<f64>)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (card_id, f) in rows {
        w.serialize(FeatureRow {
            card_id: card_id.to_owned(),
            f_rg: f.f_rg,
            f_krg: f.f_krg,
            returner: f.returner,
            f_nds: f.f_nds,
            f_ae: f.f_ae,
            f_td: f.f_td,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_dump<R: Read>(reader: R) -> Result<Vec<(String, GeneralFeatures<f64>)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<FeatureRow>()
        .map(|row| {
            let r = row?;
            Ok((
                r.card_id,
                GeneralFeatures {
                    f_rg: r.f_rg,
                    f_krg: r.f_krg,
                    returner: r.returner,
                    f_nds: r.f_nds,
                    f_ae: r.f_ae,
                    f_td: r.f_td,
                    td_degenerate: false,
                },
            ))
        })
        .collect()
}
