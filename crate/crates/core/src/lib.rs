//! Texture classification from the topology of grayscale images.
//!
//! Images are summarized by the superlevel cubical persistence of square
//! subsamples, vectorized as persistence landscapes, reduced to three
//! principal components and separated pairwise by a linear SVM. The
//! separating plane can be pulled back to landscape space for inspection.

pub mod classify;
pub mod error;
pub mod image_io;
pub mod interpret;
pub mod landscape;
pub mod persistence;
pub mod pipeline;
pub mod scalar;
pub mod synthetic;

use num_rational::Rational64;

pub use classify::{Classifier, PcaModel, Side, SvmModel, SvmParams};
pub use error::{Error, Result};
pub use image_io::{AnnotationRecord, BBox, GrayImage};
pub use landscape::{LandscapeConfig, LandscapeCurves, LandscapeEmbedding};
pub use persistence::{Barcode, PersistenceBar};
pub use pipeline::{EmbeddedAnnotation, PipelineConfig, SplitSpec};
pub use scalar::{Real, Scalar};

pub type Embedding = LandscapeEmbedding<f64>;
pub type ExactEmbedding = LandscapeEmbedding<Rational64>;
pub type Curves = LandscapeCurves<f64>;
pub type Pca = PcaModel<f64>;
pub type Svm = SvmModel<f64>;
pub type Model = Classifier<f64>;
