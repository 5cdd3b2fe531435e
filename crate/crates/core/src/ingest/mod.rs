//! Front-end for raw observations: trajectory files, video track cleanup,
//! audio features, chart digitization and temporal alignment.

mod align;
mod audio;
mod chart;
mod video;

pub use crate::integrator::read_csv_trajectory;
pub use align::{
    align, estimate_offset, interp, resample_linear, AlignedFeatures, Modality, ModalitySlot,
    MIN_OVERLAP, SPATIAL_SAMPLES,
};
pub use audio::{
    add_noise_snr, apply_audio_prior, band_peaks, decimate_by_two, read_wav, synth_tones,
    to_target_rate, wav_features, wav_file_features, write_wav, AudioFeatures, AudioPrior,
    FFT_SIZE, HOP, TARGET_RATE,
};
pub use chart::{
    digitize_chart, load_image, render_chart, resample_digitized, save_image, AxisCalibration,
    Curve, DEFAULT_COLOR_TOLERANCE,
};
pub use video::{
    kalman_smooth, pixel_to_angle, pixels_to_meters, weighted_moving_average, KalmanParams,
};
