use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::StationId;

/// Three-level socioeconomic class. The discriminant is the model's class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SesClass {
    Low = 0,
    Middle = 1,
    High = 2,
}

impl SesClass {
    pub const ALL: [SesClass; 3] = [SesClass::Low, SesClass::Middle, SesClass::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SesClass::Low => "low",
            SesClass::Middle => "middle",
            SesClass::High => "high",
        }
    }
}

impl fmt::Display for SesClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SesClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(SesClass::Low),
            "middle" => Ok(SesClass::Middle),
            "high" => Ok(SesClass::High),
            _ => Err(format!("unknown SES class {s:?}")),
        }
    }
}

/// Price cut points in CNY/m²: low below `low`, high above `high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub low: f64,
    pub high: f64,
}

pub const DEFAULT_HIGH_THRESHOLD: f64 = 70_000.0;
/// Low/middle/high population shares used for calibration.
pub const DEFAULT_CLASS_SHARES: [f64; 3] = [0.444, 0.362, 0.194];

pub fn label_ses(price: f64, th: &Thresholds) -> SesClass {
    if price > th.high {
        SesClass::High
    } else if price < th.low {
        SesClass::Low
    } else {
        SesClass::Middle
    }
}

/// How price thresholds are chosen for a labeled population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelPolicy {
    Fixed(Thresholds),
    /// Fixed high threshold; the low threshold is the price at the `low_share`
    /// quantile of the population.
    CalibrateLow { high: f64, low_share: f64 },
    /// Rank-based split reproducing `shares` to within one user. Users are ordered by
    /// price, ties broken by card id.
    Quantile { shares: [f64; 3] },
}

impl Default for LabelPolicy {
    fn default() -> Self {
        LabelPolicy::CalibrateLow {
            high: DEFAULT_HIGH_THRESHOLD,
            low_share: DEFAULT_CLASS_SHARES[0],
        }
    }
}

/// Splits `n` into integer parts proportional to `shares` (largest remainder).
pub fn apportion(n: usize, shares: &[f64]) -> Vec<usize> {
    let total: f64 = shares.iter().sum();
    let exact: Vec<f64> = shares.iter().map(|s| s / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
}

/// Labels a population of `(card_id, price)` pairs. Returns classes in input order
/// and the thresholds in force.
pub fn assign_classes(population: &[(&str, f64)], policy: &LabelPolicy) -> Result<(Vec<SesClass>, Thresholds)> {
    let validate = |th: Thresholds| {
        if th.low <= th.high {
            Ok(th)
        } else {
            Err(Error::config(format!("low threshold {} above high threshold {}", th.low, th.high)))
        }
    };
    match *policy {
        LabelPolicy::Fixed(th) => {
            let th = validate(th)?;
            Ok((population.iter().map(|&(_, p)| label_ses(p, &th)).collect(), th))
        }
        LabelPolicy::CalibrateLow { high, low_share } => {
            if !(0.0..=1.0).contains(&low_share) {
                return Err(Error::config("low_share must lie in [0, 1]"));
            }
            let mut prices: Vec<f64> = population.iter().map(|&(_, p)| p).collect();
            prices.sort_by(f64::total_cmp);
            let k = (low_share * prices.len() as f64).round() as usize;
            // strictly below the (k+1)-th smallest price is low
            let low = match prices.get(k) {
                Some(&p) => p.min(high),
                None => high,
            };
            let th = validate(Thresholds { low, high })?;
            Ok((population.iter().map(|&(_, p)| label_ses(p, &th)).collect(), th))
        }
        LabelPolicy::Quantile { shares } => {
            if shares.iter().any(|s| *s < 0.0) || shares.iter().sum::<f64>() <= 0.0 {
                return Err(Error::config("class shares must be non-negative and not all zero"));
            }
            let counts = apportion(population.len(), &shares);
            let mut order: Vec<usize> = (0..population.len()).collect();
            order.sort_by(|&a, &b| {
                population[a].1.total_cmp(&population[b].1).then_with(|| population[a].0.cmp(population[b].0))
            });
            let mut classes = vec![SesClass::Low; population.len()];
            let mut th = Thresholds {
                low: f64::NEG_INFINITY,
                high: f64::INFINITY,
            };
            for (rank, &i) in order.iter().enumerate() {
                let class = if rank < counts[0] {
                    SesClass::Low
                } else if rank < counts[0] + counts[1] {
                    SesClass::Middle
                } else {
                    SesClass::High
                };
                if rank == counts[0] {
                    th.low = population[i].1;
                }
                if rank == counts[0] + counts[1] {
                    th.high = population[i].1;
                }
                classes[i] = class;
            }
            if th.low == f64::NEG_INFINITY {
                th.low = th.high;
            }
            Ok((classes, th))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLabel {
    pub card_id: String,
    #[serde(rename = "home_station_id")]
    pub home_station: StationId,
    #[serde(skip)]
    pub work_station: Option<StationId>,
    pub home_price: f64,
    pub ses: SesClass,
}

/// Writes `card_id,home_station_id,home_price,ses`.
pub fn write_labels<W: Write>(writer: W, labels: &[UserLabel]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for l in labels {
        w.serialize(l)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<UserLabel>> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<Vec<UserLabel>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TH: Thresholds = Thresholds {
        low: 40_000.0,
        high: DEFAULT_HIGH_THRESHOLD,
    };

    #[test]
    fn fixed_thresholds() {
        assert_eq!(label_ses(80_000.0, &TH), SesClass::High);
        assert_eq!(label_ses(99_941.0, &TH), SesClass::High);
        assert_eq!(label_ses(35_000.0, &TH), SesClass::Low);
        assert_eq!(label_ses(70_000.0, &TH), SesClass::Middle);
        assert_eq!(label_ses(40_000.0, &TH), SesClass::Middle);
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(1000, &DEFAULT_CLASS_SHARES), vec![444, 362, 194]);
        assert_eq!(apportion(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(apportion(0, &[1.0, 1.0, 1.0]), vec![0, 0, 0]);
    }

    #[test]
    fn calibrate_low_splits_at_quantile() {
        let ids: Vec<String> = (0..10).map(|i| i.to_string()).collect();
        let pop: Vec<(&str, f64)> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), 10_000.0 * (i + 1) as f64)).collect();
        let (classes, th) = assign_classes(&pop, &LabelPolicy::CalibrateLow { high: 75_000.0, low_share: 0.4 }).unwrap();
        assert_eq!(th.low, 50_000.0);
        let n_low = classes.iter().filter(|&&c| c == SesClass::Low).count();
        let n_high = classes.iter().filter(|&&c| c == SesClass::High).count();
        assert_eq!((n_low, n_high), (4, 3));
    }

    #[test]
    fn labels_file_round_trip() {
        let labels = vec![UserLabel {
            card_id: "1000019".into(),
            home_station: StationId(3),
            work_station: None,
            home_price: 72_500.5,
            ses: SesClass::High,
        }];
        let mut buf = Vec::new();
        write_labels(&mut buf, &labels).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "card_id,home_station_id,home_price,ses\n1000019,3,72500.5,high\n");
        assert_eq!(read_labels(buf.as_slice()).unwrap(), labels);
    }

    proptest! {
        #[test]
        fn label_is_monotone(a in 1_000.0f64..200_000.0, b in 1_000.0f64..200_000.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(label_ses(lo, &TH) <= label_ses(hi, &TH));
        }

        #[test]
        fn quantile_shares_within_one_user(prices in proptest::collection::vec(prop_oneof![10_000.0f64..100_000.0, Just(50_000.0)], 1..400)) {
            let ids: Vec<String> = (0..prices.len()).map(|i| format!("{i:05}")).collect();
            let pop: Vec<(&str, f64)> = ids.iter().map(String::as_str).zip(prices.iter().copied()).collect();
            let (classes, _) = assign_classes(&pop, &LabelPolicy::Quantile { shares: DEFAULT_CLASS_SHARES }).unwrap();
            for c in SesClass::ALL {
                let n = classes.iter().filter(|&&x| x == c).count() as f64;
                let target = DEFAULT_CLASS_SHARES[c.index()] * prices.len() as f64;
                prop_assert!((n - target).abs() <= 1.0);
            }
            // ordering by price is respected
            for i in 0..pop.len() {
                for j in 0..pop.len() {
                    if pop[i].1 < pop[j].1 {
                        prop_assert!(classes[i] <= classes[j]);
                    }
                }
            }
        }
    }
}
