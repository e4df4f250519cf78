//! Synthetic city and card-holder population with planted SES lifestyles.
//!
//! Everything is a pure function of the config and its seed. The oracle manifest
//! holds the hidden truth and is never read by the pipeline itself.

mod city;
mod config;
mod population;
mod simulate;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

pub use city::{generate_city, City, StationTruth};
pub use config::{ArchetypeConfig, CityConfig, SynthConfig};
pub use population::{generate_population, oracle_manifest, read_manifest, write_manifest, Agent, AgentTruth, FIRST_CARD_ID};
pub use simulate::{fare_for_km, simulate_records, travel_secs};

use crate::context::{write_communities, write_pois};
use crate::error::{Error, Result};
use crate::ingest::{write_records, CardRecord};
use crate::seed::sub_seed;

pub const STATIONS_FILE: &str = "stations.csv";
pub const COMMUNITIES_FILE: &str = "communities.csv";
pub const POIS_FILE: &str = "pois.csv";
pub const RECORDS_FILE: &str = "records.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub city: City,
    pub agents: Vec<Agent>,
    pub records: Vec<CardRecord>,
}

pub fn synthesize(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let city = generate_city(&CityConfig {
        seed: sub_seed(cfg.seed, "city"),
        ..cfg.city.clone()
    })?;
    let agents = generate_population(&city, cfg.agents, cfg.shares, &cfg.archetypes, cfg.seed)?;
    let records = simulate_records(&agents, &city, cfg);
    Ok(SynthOutput { city, agents, records })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

impl SynthOutput {
    /// Writes the four pipeline inputs and the manifest into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.city.registry.write_csv(create(dir, STATIONS_FILE)?)?;
        write_communities(create(dir, COMMUNITIES_FILE)?, &self.city.communities)?;
        write_pois(create(dir, POIS_FILE)?, &self.city.pois)?;
        write_records(create(dir, RECORDS_FILE)?, &self.records, &self.city.registry)?;
        write_manifest(create(dir, MANIFEST_FILE)?, &oracle_manifest(&self.agents))?;
        Ok(())
    }
}
