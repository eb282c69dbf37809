//! Raster types, keyed random streams, remapping, filtering and the final
//! preprocessing stage shared by every transform.

mod filter;
pub mod io;
mod patch;
mod preprocess;
mod remap;
mod rng;

pub use filter::{convolve2d, convolve_separable, gaussian_kernel_1d, Kernel2d};
pub(crate) use filter::smooth_plane;
pub use patch::{to_u8, NormalizedTensor, Patch};
pub use preprocess::{
    center_crop, normalize_imagenet, resize, IMAGENET_MEAN, IMAGENET_STD, TENSOR_SIZE,
};
pub use remap::{remap, Border, DisplacementField, Interpolation};
pub use rng::{make_rng, RngStream, StreamKey};
