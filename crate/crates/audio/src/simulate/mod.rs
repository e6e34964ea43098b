//! Synthetic reverberant speech: statistical room impulse responses, noise,
//! mixing, a formant speech synthesizer and dataset manifests.

mod convolve;
mod dataset;
mod mix;
mod noise;
mod rir;
mod speech;

pub use convolve::fft_convolve;
pub use dataset::{
    build_dataset, plan_conditions, read_manifest, render_condition, synthetic_sources, write_condition, write_manifest,
    Condition,
    Source, UtteranceRecord, AUDIO_DIR, MANIFEST_NAME,
};
pub use mix::{reverberate_and_mix, Mix, NoiseSpec};
pub use noise::{generate_noise, NoiseKind};
pub use rir::{generate_rir, SimConfig, TargetKind};
pub use speech::synth_speech;

/// Stateless seed derivation (SplitMix64 finalizer) so that item `index`
/// of a run gets the same stream regardless of scheduling.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
