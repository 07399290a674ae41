//! Meta-dataset synthesis: glyph seed rendering, background replacement,
//! randomized transform recipes, and per-set accuracy labels.

mod background;
mod build;
mod glyph;
mod manifest;
mod recipe;
pub mod transforms;

pub use background::{crop_resize, load_png_dir, procedural_textures, BackgroundConfig, BackgroundCorpus, CropRect};
pub use build::{
    build_meta_dataset, generate_record, record_from_recipe, regenerate_bundle, MetaDataset, Provenance, SampleSetRecord,
    SplitRatio, SynthesisContext,
};
pub use glyph::{render_seed, GlyphSeedConfig, MAX_CLASSES};
pub use manifest::{encode_manifest, manifest_hash, read_manifest, write_manifest, MANIFEST_FILE, STATS_DIR};
pub use recipe::{
    apply_recipe, composite, draw_background, sample_recipe, BackgroundPatch, TransformId, TransformRecipe,
    TransformStep,
};
