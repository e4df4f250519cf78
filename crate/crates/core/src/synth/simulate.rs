use chrono::Duration;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::city::City;
use super::config::SynthConfig;
use super::population::Agent;
use crate::context::StationFunction;
use crate::geo::{Haversine, Metric};
use crate::ingest::{is_weekend, CardRecord, Fare, SecondOfDay, StationId};
use crate::seed::rng_for;

const HOUR: f64 = 3600.0;
/// No journey may end after this second of the day, so every trip closes on its own date.
const LAST_ALIGHT: u32 = 23 * 3600 + 50 * 60;

/// Fare in cents: 3.00 up to 6 km, plus 1.00 per started 10 km beyond.
pub fn fare_for_km(km: f64) -> Fare {
    let extra = ((km - 6.0).max(0.0) / 10.0).ceil() as u32;
    Fare::from_cents(300 + 100 * extra)
}

/// Seconds in transit: 4 min plus 2 min per km.
pub fn travel_secs(km: f64) -> u32 {
    (240.0 + 120.0 * km).round() as u32
}

struct Day<'a> {
    city: &'a City,
    agent: &'a Agent,
    date: chrono::NaiveDate,
    at: StationId,
    /// Earliest second the next boarding may happen.
    now: u32,
    out: Vec<CardRecord>,
}

impl Day<'_> {
    fn record(&mut self, secs: u32, station: StationId, fare: Fare) {
        self.out.push(CardRecord {
            card_id: self.agent.card_id.clone(),
            date: self.date,
            time: SecondOfDay::new(secs).expect("bounded by LAST_ALIGHT"),
            station,
            fare,
        });
    }

    /// Travels to `dest` leaving no earlier than `depart`. Skipped when it would
    /// overrun the day or the user is already there.
    fn go<R: Rng>(&mut self, rng: &mut R, dest: StationId, depart: f64) -> bool {
        if dest == self.at {
            return false;
        }
        let depart = (depart.max(0.0) as u32).max(self.now);
        let km: f64 = Haversine.distance_km(&self.city.position(self.at), &self.city.position(dest));
        let arrive = depart + travel_secs(km) + rng.random_range(0..120);
        if arrive > LAST_ALIGHT {
            return false;
        }
        self.record(depart, self.at, Fare::ZERO);
        self.record(arrive, dest, fare_for_km(km));
        self.at = dest;
        self.now = arrive + 60;
        true
    }
}

/// Normal draw restricted to ±2 standard deviations.
fn truncated<R: Rng>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return mean;
    }
    let n = Normal::new(mean, sd).expect("positive sd");
    loop {
        let v = n.sample(rng);
        if (v - mean).abs() <= 2.0 * sd {
            return v;
        }
    }
}

fn simulate_agent(agent: &Agent, city: &City, cfg: &SynthConfig, index: usize) -> Vec<CardRecord> {
    let mut rng = rng_for(cfg.seed, &format!("agent/{index}"));
    let a = &cfg.archetypes;
    let c = agent.ses.index();
    let ent = city.stations_with(StationFunction::Entertainment);
    let all: Vec<StationId> = city.registry.iter().map(|s| s.id).collect();
    let sd = a.depart_sd_hours * HOUR;
    let mut out = Vec::new();
    for d in 0..cfg.days {
        let date = cfg.start + Duration::days(i64::from(d));
        let mut day = Day {
            city,
            agent,
            date,
            at: agent.home,
            now: 0,
            out: Vec::new(),
        };
        let weekend = is_weekend(date);
        let works = if weekend {
            rng.random_bool(a.prob(&a.weekend_work, c))
        } else {
            rng.random_bool(a.weekday_active)
        };
        if works {
            let mean = if agent.service_worker { a.service_depart_hour } else { a.value(&a.depart_hour, c) };
            let depart = truncated(&mut rng, mean * HOUR + agent.habit_offset_s, sd).clamp(4.5 * HOUR, 14.0 * HOUR);
            day.go(&mut rng, agent.work, depart);
            let mut hours = a.value(&a.work_hours, c);
            if agent.part_time {
                hours /= 2.0;
            }
            let leave = day.now as f64 + truncated(&mut rng, hours * HOUR, 0.5 * HOUR);
            if rng.random_bool(a.prob(&a.evening_outing, c)) && leave < 20.0 * HOUR {
                let spot = *ent.choose(&mut rng).expect("entertainment stations exist");
                if day.go(&mut rng, spot, leave) {
                    let stay = rng.random_range(1.5 * HOUR..3.0 * HOUR);
                    day.go(&mut rng, agent.home, day.now as f64 + stay);
                }
            }
            day.go(&mut rng, agent.home, leave);
        } else if weekend && rng.random_bool(a.weekend_active) {
            let mean = a.value(&a.weekend_depart_hour, c) * HOUR + agent.habit_offset_s;
            let depart = truncated(&mut rng, mean, HOUR);
            let dest = if rng.random_bool(a.prob(&a.weekend_entertainment, c)) {
                *ent.choose(&mut rng).expect("entertainment stations exist")
            } else {
                *all.choose(&mut rng).expect("stations exist")
            };
            if day.go(&mut rng, dest, depart) {
                let stay = rng.random_range(2.0 * HOUR..5.0 * HOUR);
                day.go(&mut rng, agent.home, day.now as f64 + stay);
            }
        }
        if !day.out.is_empty() && rng.random_bool(a.extra_trip_rate) {
            let dest = *all.choose(&mut rng).expect("stations exist");
            let depart = day.now as f64 + rng.random_range(0.5 * HOUR..1.5 * HOUR);
            if day.go(&mut rng, dest, depart) {
                let stay = rng.random_range(0.5 * HOUR..1.5 * HOUR);
                day.go(&mut rng, agent.home, day.now as f64 + stay);
            }
        }
        out.append(&mut day.out);
    }
    out
}

/// Records of all agents over the configured days, sorted by date, time and card.
pub fn simulate_records(agents: &[Agent], city: &City, cfg: &SynthConfig) -> Vec<CardRecord> {
    let per_agent: Vec<Vec<CardRecord>> = agents
        .par_iter()
        .enumerate()
        .map(|(i, a)| simulate_agent(a, city, cfg, i))
        .collect();
    let mut all: Vec<CardRecord> = per_agent.into_iter().flatten().collect();
    // stable: a card's own records keep their order
    all.sort_by(|x, y| (x.date, x.time, &x.card_id).cmp(&(y.date, y.time, &y.card_id)));
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::build_histories;
    use crate::synth::synthesize;

    #[test]
    fn fares_and_travel_times() {
        assert_eq!(fare_for_km(0.5).cents(), 300);
        assert_eq!(fare_for_km(6.0).cents(), 300);
        assert_eq!(fare_for_km(6.1).cents(), 400);
        assert_eq!(fare_for_km(16.0).cents(), 400);
        assert_eq!(fare_for_km(16.5).cents(), 500);
        assert_eq!(travel_secs(0.0), 240);
        assert_eq!(travel_secs(10.0), 1440);
    }

    #[test]
    fn round_trip_commuter_day() {
        let mut cfg = SynthConfig {
            agents: 50,
            days: 1,
            seed: 3,
            ..SynthConfig::default()
        };
        // 2015-04-01 is a Wednesday
        for (k, v) in [
            ("weekday_active", "1"),
            ("evening_outing", "0,0,0"),
            ("extra_trip_rate", "0"),
            ("part_time", "0,0,0"),
        ] {
            cfg.set(k, v).unwrap();
        }
        let out = synthesize(&cfg).unwrap();
        let hs = build_histories(out.records);
        assert_eq!(hs.len(), 50);
        for h in &hs {
            assert_eq!(h.records.len(), 4, "{}", h.card_id);
            assert_eq!(h.trips.len(), 2);
            assert_eq!(h.orphans, 0);
            assert_eq!(h.trips[0].board_station, h.trips[1].alight_station);
        }
    }
}
