//! Study-level statistics over many scored models.

mod downstream;
mod groups;
mod rank;
mod reliability;
mod table;
mod transfer;
mod variance;

pub use downstream::{
    downstream, efficiency_ratio, statistical_efficiency, DownstreamLearner, DownstreamResult, SizeAccuracy,
    DEFAULT_SIZES, DEFAULT_TEST_SIZE,
};
pub use groups::{
    confusion_thresholds, dendrogram, independent_groups_curve, threshold_grid, Dendrogram, GroupCount, MergeEvent,
};
pub use rank::{rank_corr_table, CorrelationMatrix, RankAxis};
pub use reliability::{
    entanglement_family, reliability, reliability_between, score_encoders, EncoderScores, Reliability,
};
pub use table::{ScoreKind, ScoreRecord, ScoreTable};
pub use transfer::{transfer_protocol, TransferResult};
pub use variance::{variance_explained, Predictors, VarianceExplained};
