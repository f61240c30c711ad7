//! Dynamic time warping, DTW k-means with barycenter averaging, and
//! Calinski-Harabasz selection of the cluster count.

mod dba;
mod dtw;
mod kmeans;

pub use dba::{dba, medoid};
pub use dtw::{dtw, dtw_path, dtw_values, DtwConfig, LocalCost};
pub use kmeans::{
    adjusted_rand_index, calinski_harabasz, kmeans_dtw, kmeans_dtw_with, select_k,
    ClusteringResult, KMeansOptions, KSelection,
};
