//! Dataset CSV I/O, station documents, gridding and fetching.

mod csv_io;
mod delaunay;
mod fetch;
mod grid;
mod station;

pub use csv_io::{read_dataset_csv, read_dataset_csv_with, write_dataset_csv};
pub use delaunay::Triangulation;
pub use fetch::{
    default_cache_dir, fetch_observations, station_url, FetchReport, FetchedDocument, HttpTransport, Transport,
    CACHE_DIR_ENV,
};
pub use grid::{interpolate_to_grid, GridSpec, GriddedData};
pub use station::{parse_station_json, smhi_to_record, stations_to_json, StationError, StationParse, StationRecord};
