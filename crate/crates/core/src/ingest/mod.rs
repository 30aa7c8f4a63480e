//! Dataset loaders and vessel-track preprocessing.

pub mod ucr;
pub mod vessel;

pub use ucr::{load_ucr, UcrDataset};
pub use vessel::{segment_vessel, vessel_features, SegmentParams, SegmentSet, VesselSample, VesselTrack};
