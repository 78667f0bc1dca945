//! Getting data in: CSV files, deterministic splits, synthetic experiments
//! and the public-dataset recipes.

mod csv_io;
mod recipes;
mod split;
mod synthetic;

pub use csv_io::{
    load_csv, native_header, read_csv, read_sidecar, save_csv, sidecar_path, write_csv, write_sidecar, ColumnMap,
    Provenance,
};
pub use recipes::{
    build_census, build_covtype, covtype_columns, RawTable, RecipeManifest, CENSUS_COLUMNS, CENSUS_EXPECTED_D,
    CENSUS_EXPECTED_N, COVTYPE_EXPECTED_D, COVTYPE_EXPECTED_N,
};
pub use split::{split_dataset, split_indices, SplitRatios};
pub use synthetic::{generate_synthetic, GroundTruth, LinearSpec, SyntheticConfig, TauShape, TauSpec, TreatProb};
