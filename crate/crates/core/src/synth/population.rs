use std::io::{Read, Write};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::city::City;
use super::config::ArchetypeConfig;
use crate::context::{apportion, SesClass, StationFunction};
use crate::error::{Error, Result};
use crate::ingest::StationId;
use crate::seed::rng_for;

pub const FIRST_CARD_ID: u64 = 1_000_000;

/// One simulated card holder with the lifestyle drawn for their class.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub card_id: String,
    pub ses: SesClass,
    pub home: StationId,
    /// Work station, or the entertainment station of a service worker.
    pub work: StationId,
    pub service_worker: bool,
    pub part_time: bool,
    /// Personal shift of the usual departure time, seconds.
    pub habit_offset_s: f64,
}

/// Exact class counts by largest remainder, shuffled over agents; homes drawn from
/// the matching price tier and workplaces uniformly.
pub fn generate_population(city: &City, n_agents: usize, shares: [f64; 3], arch: &ArchetypeConfig, seed: u64) -> Result<Vec<Agent>> {
    if (shares.iter().sum::<f64>() - 1.0).abs() > 1e-6 || shares.iter().any(|s| *s < 0.0) {
        return Err(Error::config("class shares must be non-negative and sum to 1"));
    }
    let mut rng = rng_for(seed, "population");
    let counts = apportion(n_agents, &shares);
    let mut classes: Vec<SesClass> = SesClass::ALL
        .iter()
        .zip(&counts)
        .flat_map(|(&c, &n)| std::iter::repeat_n(c, n))
        .collect();
    classes.shuffle(&mut rng);

    let work = city.stations_with(StationFunction::Work);
    let ent = city.stations_with(StationFunction::Entertainment);
    let homes: Vec<Vec<StationId>> = SesClass::ALL.iter().map(|&c| city.residential_tier(c)).collect();
    if homes.iter().any(Vec::is_empty) || work.is_empty() || ent.is_empty() {
        return Err(Error::config("city lacks a station class needed by the population"));
    }
    let habit = Normal::new(0.0, arch.person_sd_hours).map_err(|e| Error::config(e.to_string()))?;
    Ok(classes
        .into_iter()
        .enumerate()
        .map(|(i, ses)| {
            let c = ses.index();
            let service_worker = rng.random_bool(arch.prob(&arch.service_worker, c));
            let pool = if service_worker { &ent } else { &work };
            Agent {
                card_id: (FIRST_CARD_ID + i as u64).to_string(),
                ses,
                home: *homes[c].choose(&mut rng).expect("non-empty tier"),
                work: *pool.choose(&mut rng).expect("non-empty pool"),
                service_worker,
                part_time: rng.random_bool(arch.prob(&arch.part_time, c)),
                habit_offset_s: habit.sample(&mut rng) * 3600.0,
            }
        })
        .collect())
}

/// Hidden truth per agent, for tests and audits only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTruth {
    pub card_id: String,
    pub ses: SesClass,
    pub home_station_id: StationId,
    pub work_station_id: StationId,
}

pub fn oracle_manifest(agents: &[Agent]) -> Vec<AgentTruth> {
    agents
        .iter()
        .map(|a| AgentTruth {
            card_id: a.card_id.clone(),
            ses: a.ses,
            home_station_id: a.home,
            work_station_id: a.work,
        })
        .collect()
}

pub fn write_manifest<W: Write>(writer: W, rows: &[AgentTruth]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest<R: Read>(reader: R) -> Result<Vec<AgentTruth>> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}
