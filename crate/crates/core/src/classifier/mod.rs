//! l2-regularized multinomial logistic regression and dev-set grid search.

mod grid;
mod logreg;

pub use grid::{grid_search_with, GridEntry, GridSearchReport, HyperParams};
pub use logreg::{
    evaluate, objective, predict, train_logreg, LinearClassifier, OptimizerConfig, TrainStop,
};
