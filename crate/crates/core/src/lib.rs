pub mod cli;
pub mod descriptors;
pub mod graph;
pub mod image;
pub mod learn;
pub mod mask;
pub mod metrics;
pub mod pool;
pub mod synth;
pub mod tiler;
