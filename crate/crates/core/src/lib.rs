//! Voyage efficiency scoring, speed-profile optimization and vessel path
//! identification for short-sea shipping telemetry.

pub mod efficiency;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod path_id;
pub mod speed_opt;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use geo::{GeoPoint, RouteSegmentSpec, SamplePoint, Voyage};
