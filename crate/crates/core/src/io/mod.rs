//! Scenario files, count tables and run output.

mod counts;
mod export;
mod scenario;

pub use counts::{
    ingest_counts, match_background, nearest_background, write_counts, BinMode, CountsData,
    PHOTOPEAK_BIN, SPECTRAL_BINS,
};
pub use export::{
    export_results, scatter_svg, summary_json, write_detector_tracks, write_particles,
    ExportInput, ExportedFiles,
};
pub use scenario::{
    load_scenario, parse_scenario, save_scenario, scenario_to_string, BackgroundDetector,
    FilterSettings, MobilitySettings, Scenario, BQ_PER_CI,
};
