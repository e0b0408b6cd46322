//! Time-frequency transforms, band partitioning, masking, loudness, and
//! audio I/O shared by the rest of the toolkit.

pub mod bands;
pub mod io;
pub mod loudness;
pub mod mask;
pub mod resample;
pub mod stft;
pub mod wave;

pub use bands::{make_band_spec, BandSpec};
pub use io::{read_audio, write_wav};
pub use loudness::{gain_to_target, measure_loudness, Loudness};
pub use mask::apply_mask;
pub use resample::resample;
pub use stft::{istft, stft, Spectrogram, StftConfig, Window};
pub use wave::{Waveform, DEFAULT_SAMPLE_RATE};
