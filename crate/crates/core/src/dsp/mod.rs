//! Log-mel spectrogram front end for the audio branch.

mod audio;
mod fft;
mod logmel;
mod mel;
mod stft;

pub use audio::{resample, AudioClip};
pub use fft::Fft;
pub use logmel::{log_mel, LogMel, LogMelConfig, LogMelExtractor};
pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz};
pub use stft::{frame_count, hann_window, stft_power};
