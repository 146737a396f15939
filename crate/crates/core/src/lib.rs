//! Multi-class boosting toolkit: mart, robust logitboost, abc-mart and
//! abc-logitboost over a numerically stable weighted regression-tree learner.
//!
//! ```no_run
//! use rboost::{boost, data};
//!
//! let opts = data::LoadOptions::new(data::DataFormat::Csv);
//! let train = data::load_dataset("train.csv", &opts).unwrap();
//! let config = boost::TrainConfig::new(boost::Algorithm::AbcLogit, 20, 0.1, 1000);
//! let (model, _log) = boost::train(&train, None, &config).unwrap();
//! let prediction = model.predict(&train.row(0)).unwrap();
//! println!("{}", model.label_names[prediction.label]);
//! ```

pub mod boost;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod model_io;
pub mod synthetic;
pub mod tree;

pub use boost::{train, Algorithm, BoostModel, BoostState, Criterion, Prediction, TrainConfig, Trainer};
pub use data::{build_sorted_index, load_dataset, DataFormat, Dataset, FeatureColumnIndex, LoadOptions};
pub use error::{Error, Result};
pub use eval::{MetricLog, MetricRow};
pub use model_io::{load_model, save_model};
pub use tree::RegressionTree;
