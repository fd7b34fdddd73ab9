//! Feature ranking and consensus feature selection.
//!
//! [`mrmr`] ranks features greedily by mutual information with the label
//! minus mean redundancy with the features already picked (the MID
//! criterion) on three-level `mu +- sigma` discretized columns. [`cncv`]
//! aggregates many such rankings over nested folds into a consensus set
//! without ever training a classifier.

pub mod cncv;
pub mod mrmr;

pub use cncv::{
    cncv_select, consensus_intersection, fold_cncv_params, rank_distinguishing_features, CnCvParams,
    ConsensusResult, DistinguishingFeatures, InnerFoldData, RankedFeatureReport, SelectionMode,
};
pub use mrmr::{
    discretize, mrmr_rank, mrmr_rank_among, mutual_information, FeatureRanking, RankedFeature, TIE_EPS,
};
