//! Data ingestion, phenotype preprocessing and serialization.

pub mod config;
pub mod formats;
pub mod preprocess;

pub use config::{Config, Section};
pub use formats::{
    read_ldscores, read_meanshift, read_phenotype_table, read_results, read_sumstats, results_to_csv,
    results_to_jsonl, write_csv, write_ldscores, write_meanshift, write_string, write_sumstats, ResultRow,
};
pub use preprocess::{
    compute_mean_shift, mean_shift_from_tables, rank_inverse_normal, residualize, CovariateTerm,
    MeanShiftRecord, MeanShiftSpec, PhenotypeTable,
};
