//! Hierarchical piecewise-constant super-regions.
//!
//! Superpixel and supervoxel over-segmentation built from three stages:
//!
//! 1. quantize the image features (normalized L\*a\*b) to a small palette with
//!    k-means++ seeded k-means,
//! 2. denoise the lattice into a piecewise-constant labeling by minimizing an
//!    edge-aware MRF energy with alpha-expansion over exact min-cuts,
//! 3. extract size-bounded connected regions and merge the small ones.
//!
//! The output region adjacency graph (with per-region mean colors) can be fed
//! back into the same pipeline to build coarser layers of super-regions.
//!
//! ```
//! use hpcs::{color, hierarchy::{self, LevelConfig, PipelineOptions}, RgbImage, Shape};
//!
//! let shape = Shape::new_2d(8, 8);
//! let data = (0..64).map(|i| if i % 8 < 4 { [200, 30, 30] } else { [20, 20, 220] }).collect();
//! let img = RgbImage::new(shape, data).unwrap();
//! let lab = color::rgb_to_lab_normalized(&img);
//!
//! let opts = PipelineOptions::default();
//! let result = hierarchy::run_hierarchy(&lab, &[LevelConfig::unconstrained(16, 0.1)], &opts).unwrap();
//! assert_eq!(result.levels[0].rag.region_count(), 2);
//! ```

pub mod color;
pub mod error;
pub mod gridgraph;
pub mod hierarchy;
pub mod imgio;
pub mod maxflow;
pub mod metrics;
pub mod mrf;
pub mod par;
pub mod quantize;
pub mod regions;
mod shape;

pub use color::{LabImage, RgbImage};
pub use error::{Error, Result};
pub use gridgraph::RegionGraph;
pub use mrf::{EnergyModel, Labeling};
pub use par::Parallelism;
pub use quantize::{Palette, QuantizeConfig};
pub use regions::{Rag, SizeBounds};
pub use shape::Shape;
