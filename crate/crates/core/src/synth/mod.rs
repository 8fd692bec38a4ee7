//! Deterministic synthetic scenes, segment pools and benchmark runs.

mod benchmark;
mod pool_gen;
mod scene;

pub use benchmark::{
    evaluate_pools, prepare_corpus, prepare_image, run_benchmark, schema_for, tile_image, training_set, BenchMethod, PreparedImage,
    DEFAULT_ENUM_BUDGET, PLANTED_FEATURE, PLANTED_SCHEMA_ID,
};
pub use pool_gen::{
    adjacent_regions, generate_corpus, generate_pool, image_id, CorpusSpec, PoolSpec, SyntheticImage, SyntheticPool,
    Variant, MAX_MORPH_RADIUS, MAX_SHIFT,
};
pub use scene::{generate_scene, occluding_bar_scene, BarPlacement, BarScene, Layout, Scene, SceneSpec};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Pool(#[from] crate::pool::PoolError),
    #[error(transparent)]
    Mask(#[from] crate::mask::MaskError),
    #[error("image {image}: {message}")]
    Pipeline { image: String, message: String },
}

impl SynthError {
    pub(crate) fn at(image: &str, err: impl std::fmt::Display) -> Self {
        SynthError::Pipeline {
            image: image.to_string(),
            message: err.to_string(),
        }
    }
}
