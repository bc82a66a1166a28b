//! Downstream processing that benefits from offset correction: k-means
//! segmentation on hue-saturation, Canny edges on saturation, region
//! chromaticity spread, and pixel-wise segmentation scores.

mod canny;
mod kmeans;
mod metrics;

pub use canny::{canny_edges, CannyParams};
pub use kmeans::{hue_saturation_features, kmeans_segment, LabelImage, KMEANS_MAX_ITERATIONS, KMEANS_TOLERANCE};
pub use metrics::{best_label_metrics, region_color_stddev, segmentation_metrics, ChromaSpace, SegMetrics};
