//! Execution strategies: the variant registry, layouts and the staged pipeline.

pub mod accumulate;
pub mod layout;
pub mod pipeline;
pub mod spec;

pub use layout::{ArrayLayout, ComplexArray, LayoutView, PairArray, PairOrder};
pub use pipeline::{
    array_plan, run_pipeline, Pipeline, PipelineOptions, RunMode, RunOutput, StageTiming,
};
pub use spec::{builtin_variants, find_variant, variant_names, VariantSpec};
