//! Aspect discovery and rating-driver analysis for rated reviews.
//!
//! The crate is organised as a pipeline of independent stages:
//!
//! * [`corpus`]: ingestion, sentence segmentation, preprocessing, bag of words
//! * [`lda`]: collapsed Gibbs LDA with fold-in inference
//! * [`coherence`]: c_v and UMass topic coherence
//! * [`hpo`]: TPE search over LDA hyperparameters
//! * [`sentiment`]: sentence sentiment providers and the log-odds transform
//! * [`features`]: per-review aspect-sentiment vectors and label schemes
//! * [`models`]: logistic regression, random forest, gradient boosting, kappa CV
//! * [`explain`]: gain importance, TreeSHAP and plot data

pub mod corpus;
pub mod seed;
pub mod lda;
pub mod coherence;
pub mod hpo;
pub mod sentiment;
pub mod features;
pub mod models;
pub mod explain;
