//! Synthetic ground-truth worlds for checking the fusion guarantees
//! numerically, plus a planted text corpus for end-to-end pipelines.

mod fixture;
mod theorem1;
mod theorem2;
mod world;

pub use fixture::{fixture_word_vectors, generate_fixture_corpus, FixtureCorpus, FIXTURE_VIEW_DIM};
pub use theorem1::{
    diagonal_world, random_world, sweep_c, verify_theorem1, Check, Estimate, Loss, SweepRow, Theorem1Options,
    Theorem1Report,
};
pub use theorem2::{hand_classifier_agreement, theorem2_world, verify_theorem2, Theorem2Options, Theorem2Report};
pub use world::{sample_world, sample_world_antithetic, SyntheticWorld, WorldSample};
