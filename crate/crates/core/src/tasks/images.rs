use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::idx::Dataset;
use super::{Example, Task, Transform};
use crate::error::{Error, Result};

pub const DEFAULT_TEST_PER_TASK: usize = 500;

/// Per-task example counts. Each task gets `n_train` training examples and
/// `min(max_test, remaining / T)` test examples, all disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSizing {
    pub n_train: usize,
    pub max_test: usize,
}

impl TaskSizing {
    pub fn new(n_train: usize) -> Self {
        Self {
            n_train,
            max_test: DEFAULT_TEST_PER_TASK,
        }
    }
}

/// Disjoint `(train, test)` index lists into `base`, one pair per task.
fn split_base<R: Rng + ?Sized>(
    base_len: usize,
    tasks: usize,
    sizing: TaskSizing,
    rng: &mut R,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if tasks == 0 || sizing.n_train == 0 {
        return Err(Error::InvalidArgument("need at least one task and one training example".into()));
    }
    let needed = tasks * (sizing.n_train + 1);
    if base_len < needed {
        return Err(Error::InsufficientData {
            needed,
            available: base_len,
        });
    }
    let n_test = sizing.max_test.min((base_len - tasks * sizing.n_train) / tasks).max(1);
    let mut order: Vec<usize> = (0..base_len).collect();
    order.shuffle(rng);
    let per = sizing.n_train + n_test;
    Ok((0..tasks)
        .map(|t| {
            let chunk = &order[t * per..(t + 1) * per];
            (chunk[..sizing.n_train].to_vec(), chunk[sizing.n_train..].to_vec())
        })
        .collect())
}

fn build_tasks(
    base: &Dataset,
    splits: Vec<(Vec<usize>, Vec<usize>)>,
    transforms: Vec<Transform>,
    apply: impl Fn(&[f64], &Transform) -> Vec<f64>,
) -> Vec<Task> {
    splits
        .into_iter()
        .zip(transforms)
        .enumerate()
        .map(|(id, ((train, test), transform))| {
            let make = |idx: &[usize]| {
                idx.iter()
                    .map(|&i| Example {
                        x: apply(&base.images[i], &transform),
                        y: base.labels[i],
                        task_id: id,
                    })
                    .collect()
            };
            Task {
                id,
                train: make(&train),
                test: make(&test),
                transform,
            }
        })
        .collect()
}

/// `out[i] = image[perm[i]]`.
pub fn permute_image(image: &[f64], perm: &[usize]) -> Vec<f64> {
    perm.iter().map(|&p| image[p]).collect()
}

pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Task 0 keeps the pixel order; every later task applies its own uniformly
/// random permutation of the pixel indices.
pub fn make_permutation_tasks<R: Rng + ?Sized>(
    base: &Dataset,
    tasks: usize,
    sizing: TaskSizing,
    rng: &mut R,
) -> Result<Vec<Task>> {
    let splits = split_base(base.len(), tasks, sizing, rng)?;
    let pixels = base.rows * base.cols;
    let transforms = (0..tasks)
        .map(|t| {
            let mut perm: Vec<usize> = (0..pixels).collect();
            if t > 0 {
                perm.shuffle(rng);
            }
            Transform::Permutation { pixels: perm }
        })
        .collect();
    Ok(build_tasks(base, splits, transforms, |im, tf| match tf {
        Transform::Permutation { pixels } => permute_image(im, pixels),
        _ => unreachable!(),
    }))
}

/// Angle of task `t` (0-based) when `tasks` angles are spread evenly over
/// `[0, 180]` degrees, endpoints included.
pub fn rotation_angle(t: usize, tasks: usize) -> f64 {
    if tasks < 2 {
        0.0
    } else {
        t as f64 * 180.0 / (tasks - 1) as f64
    }
}

/// Rotates a row-major image about its centre by `degrees` (counter-clockwise
/// on screen) using bilinear interpolation; samples falling outside the
/// source read as 0.
pub fn rotate_image(image: &[f64], rows: usize, cols: usize, degrees: f64) -> Vec<f64> {
    let (s, c) = degrees.to_radians().sin_cos();
    let cy = (rows as f64 - 1.0) / 2.0;
    let cx = (cols as f64 - 1.0) / 2.0;
    let at = |r: isize, k: isize| -> f64 {
        if r < 0 || k < 0 || r >= rows as isize || k >= cols as isize {
            0.0
        } else {
            image[r as usize * cols + k as usize]
        }
    };
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for k in 0..cols {
            let dy = r as f64 - cy;
            let dx = k as f64 - cx;
            // Inverse map: where in the source does this output pixel come from.
            let sx = c * dx - s * dy + cx;
            let sy = s * dx + c * dy + cy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            out[r * cols + k] = (1.0 - fx) * (1.0 - fy) * at(y0, x0)
                + fx * (1.0 - fy) * at(y0, x0 + 1)
                + (1.0 - fx) * fy * at(y0 + 1, x0)
                + fx * fy * at(y0 + 1, x0 + 1);
        }
    }
    out
}

/// Task `t` shows the digits rotated by [`rotation_angle`]`(t, tasks)`.
pub fn make_rotation_tasks<R: Rng + ?Sized>(
    base: &Dataset,
    tasks: usize,
    sizing: TaskSizing,
    rng: &mut R,
) -> Result<Vec<Task>> {
    let splits = split_base(base.len(), tasks, sizing, rng)?;
    let transforms = (0..tasks)
        .map(|t| Transform::Rotation {
            degrees: rotation_angle(t, tasks),
        })
        .collect();
    let (rows, cols) = (base.rows, base.cols);
    Ok(build_tasks(base, splits, transforms, |im, tf| match tf {
        Transform::Rotation { degrees } if *degrees == 0.0 => im.to_vec(),
        Transform::Rotation { degrees } => rotate_image(im, rows, cols, *degrees),
        _ => unreachable!(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256StarStar;
    use std::collections::HashSet;

    fn rng(seed: u64) -> Xoshiro256StarStar {
        Xoshiro256StarStar::seed_from_u64(seed)
    }

    fn toy_base(n: usize, rows: usize, cols: usize) -> Dataset {
        let mut r = rng(99);
        Dataset {
            rows,
            cols,
            images: (0..n)
                .map(|_| (0..rows * cols).map(|_| r.gen_range(0.0..1.0)).collect())
                .collect(),
            labels: (0..n).map(|i| i % 10).collect(),
        }
    }

    #[test]
    fn zero_rotation_is_bit_exact() {
        let base = toy_base(1, 28, 28);
        assert_eq!(rotate_image(&base.images[0], 28, 28, 0.0), base.images[0]);
    }

    #[test]
    fn half_turn_matches_index_reversal() {
        let im: Vec<f64> = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        let rot = rotate_image(&im, 3, 3, 180.0);
        // (r, c) -> (2 - r, 2 - c) is index i -> 8 - i.
        for (i, v) in rot.iter().enumerate() {
            assert!((v - im[8 - i]).abs() < 1e-12, "{i}: {v} vs {}", im[8 - i]);
        }
    }

    #[test]
    fn quarter_turn_matches_coordinate_map() {
        // A counter-clockwise quarter turn sends source (r, c) to (n-1-c, r).
        let n = 5;
        let im: Vec<f64> = (0..n * n).map(|i| i as f64 / 25.0).collect();
        let rot = rotate_image(&im, n, n, 90.0);
        for r in 0..n {
            for c in 0..n {
                let want = im[r * n + c];
                let got = rot[(n - 1 - c) * n + r];
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    /// Smooth Gaussian bump centred in a 28x28 frame.
    fn bump() -> Vec<f64> {
        (0..28 * 28)
            .map(|i| {
                let (r, c) = ((i / 28) as f64 - 13.5, (i % 28) as f64 - 12.0);
                (-(r * r + c * c) / (2.0 * 16.0)).exp()
            })
            .collect()
    }

    #[test]
    fn rotation_round_trip_stays_close() {
        let im = bump();
        for deg in [10.0, 30.0, 45.0, 77.0, 135.0] {
            let back = rotate_image(&rotate_image(&im, 28, 28, deg), 28, 28, -deg);
            let linf = im.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(linf <= 0.15, "angle {deg}: {linf}");
        }
    }

    #[test]
    fn rotation_schedule_spans_zero_to_180() {
        assert_eq!(rotation_angle(0, 20), 0.0);
        assert_eq!(rotation_angle(19, 20), 180.0);
        assert!((rotation_angle(1, 20) - 180.0 / 19.0).abs() < 1e-12);
        assert_eq!(rotation_angle(0, 1), 0.0);
    }

    #[test]
    fn permutation_is_a_bijection_and_invertible() {
        let base = toy_base(50, 4, 4);
        let tasks = make_permutation_tasks(&base, 3, TaskSizing { n_train: 5, max_test: 3 }, &mut rng(1)).unwrap();
        for task in &tasks {
            let Transform::Permutation { pixels } = &task.transform else { panic!() };
            let mut sorted = pixels.clone();
            sorted.sort();
            assert_eq!(sorted, (0..16).collect::<Vec<_>>());
            let inv = invert_permutation(pixels);
            let x = &task.train[0].x;
            let restored = permute_image(x, &inv);
            assert!(base.images.contains(&restored));
        }
        let Transform::Permutation { pixels } = &tasks[0].transform else { panic!() };
        assert_eq!(pixels, &(0..16).collect::<Vec<_>>());
    }

    #[test]
    fn single_task_is_the_subsampled_base() {
        let base = toy_base(30, 3, 3);
        let tasks = make_permutation_tasks(&base, 1, TaskSizing { n_train: 10, max_test: 5 }, &mut rng(2)).unwrap();
        for e in tasks[0].train.iter().chain(&tasks[0].test) {
            let i = base.images.iter().position(|im| im == &e.x).unwrap();
            assert_eq!(base.labels[i], e.y);
        }
        let rot = make_rotation_tasks(&base, 1, TaskSizing { n_train: 10, max_test: 5 }, &mut rng(2)).unwrap();
        assert_eq!(rot[0].train, tasks[0].train);
    }

    #[test]
    fn tasks_use_disjoint_base_examples() {
        let base = toy_base(400, 2, 2);
        // Distinct images let us recover base indices.
        let tasks = make_rotation_tasks(&base, 4, TaskSizing { n_train: 20, max_test: 500 }, &mut rng(3)).unwrap();
        let mut seen = HashSet::new();
        for (t, task) in tasks.iter().enumerate() {
            assert_eq!(task.train.len(), 20);
            assert_eq!(task.test.len(), 80, "min(500, (400 - 80) / 4)");
            for e in task.train.iter().chain(&task.test) {
                assert_eq!(e.task_id, t);
                assert!(seen.insert(e.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()));
            }
        }
    }

    #[test]
    fn insufficient_base_is_an_error() {
        let base = toy_base(30, 2, 2);
        let err = make_rotation_tasks(&base, 3, TaskSizing::new(10), &mut rng(0)).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { needed: 33, available: 30 }));
    }

    #[test]
    fn low_data_sizing_fits_twenty_tasks() {
        let base = toy_base(20 * 700, 2, 2);
        let tasks = make_permutation_tasks(&base, 20, TaskSizing::new(200), &mut rng(4)).unwrap();
        assert_eq!(tasks.len(), 20);
        assert!(tasks.iter().all(|t| t.train.len() == 200 && t.test.len() == 500));
    }
}
