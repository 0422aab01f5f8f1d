//! Task streams for online continual learning.
//!
//! A [`TaskStream`] is an ordered list of [`Task`]s sharing one label space
//! (single-headed), plus the protocol deciding how each task's training data
//! is presented: once in order with repeated *glances*, or for several
//! shuffled epochs.

mod idx;
mod images;
mod stream;
mod synthetic;

use serde::{Deserialize, Serialize};

pub use idx::{load_idx, load_mnist_dir, write_idx_images, write_idx_labels, Dataset, MNIST_FILES};
pub use images::{
    invert_permutation, make_permutation_tasks, make_rotation_tasks, permute_image, rotate_image,
    rotation_angle, TaskSizing, DEFAULT_TEST_PER_TASK,
};
pub use stream::{stream_batches, Protocol, TaskStream};
pub use synthetic::{make_synthetic_tasks, SyntheticSpec};

/// One labelled input.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub y: usize,
    pub task_id: usize,
}

/// How a task's inputs were derived from the base data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Rotation { degrees: f64 },
    Permutation { pixels: Vec<usize> },
    Blobs { rotation: Vec<f64>, dim: usize },
}

#[derive(Debug, Clone)]
pub struct Task {
    pub id: usize,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub transform: Transform,
}
