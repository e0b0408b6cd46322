//! Full-track SNR evaluation, aggregation, and paired statistics.

pub mod aggregate;
pub mod record;
pub mod snr;
pub mod stats;

pub use aggregate::{aggregate, render_table, to_csv, EvalSummary, TABLE_COLUMNS};
pub use record::{evaluate_track, read_records, snr_record, write_records, EvalRecord};
pub use snr::{snr_db, SNR_CLAMP_DB};
pub use stats::{cohens_d_paired, median, wilcoxon_signed_rank};
