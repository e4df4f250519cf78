//! Smart-card record ingestion: parsing, trip reconstruction, per-card histories.

mod history;
mod record;
mod registry;
mod trips;

pub use history::{
    build_histories, filter_frequent_users, ingest_stats, ActiveDayBucket, IngestStats, UserHistory,
    DEFAULT_MIN_DAYS,
};
pub use record::{
    epoch_s, is_weekend, parse_records, write_records, write_reject_log, CardRecord, Fare, ParseOutcome,
    Reject, SecondOfDay, DATE_FORMAT, RECORD_HEADER, SECONDS_PER_DAY,
};
pub use registry::{Station, StationId, StationRegistry};
pub use trips::{read_trips, reconstruct_trips, write_trips, Reconstruction, Trip};
