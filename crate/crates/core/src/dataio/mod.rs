//! Dataset manifests and the synthetic domain-shift generator.

mod manifest;
mod synth;

pub use manifest::{
    load_dataset, load_manifest, load_samples, save_manifest, DatasetManifest, ManifestEntry, ManifestMeta,
    SplitName, COMPARTMENTS_VERSION, MANIFEST_FORMAT, VOCABULARY_VERSION,
};
pub use synth::{
    generate_synthetic, intensity_histogram, positive_count, sample_id, synthesize, write_dataset, DomainParams,
    LesionParams, ShiftParams, TissueIntensities,
};
