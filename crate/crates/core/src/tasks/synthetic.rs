use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Example, Task, Transform};
use crate::error::{Error, Result};

/// Gaussian-blob task family. Every task shares the same `classes` labels;
/// tasks differ by a random rotation of the input space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub tasks: usize,
    pub classes: usize,
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Distance between neighbouring class means.
    pub separation: f64,
}

/// Class means with nearest-neighbour distance `sep`: scaled basis vectors
/// when `dim >= classes`, otherwise a regular polygon in the first plane.
fn class_means(classes: usize, dim: usize, sep: f64) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|c| {
            let mut m = vec![0.0; dim];
            if dim >= classes {
                m[c] = sep / std::f64::consts::SQRT_2;
            } else if dim >= 2 {
                let radius = sep / (2.0 * (std::f64::consts::PI / classes as f64).sin());
                let phi = 2.0 * std::f64::consts::PI * c as f64 / classes as f64;
                m[0] = radius * phi.cos();
                m[1] = radius * phi.sin();
            } else {
                m[0] = sep * c as f64;
            }
            m
        })
        .collect()
}

/// Haar-ish random orthogonal matrix: Gram-Schmidt on Gaussian rows.
fn random_rotation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
        let mut degenerate = false;
        for _ in 0..dim {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            for u in &rows {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
            }
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n < 1e-8 {
                degenerate = true;
                break;
            }
            v.iter_mut().for_each(|a| *a /= n);
            rows.push(v);
        }
        if !degenerate {
            return rows.concat();
        }
    }
}

fn apply(rotation: &[f64], dim: usize, v: &[f64]) -> Vec<f64> {
    (0..dim)
        .map(|i| rotation[i * dim..(i + 1) * dim].iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Task 0 uses the unrotated blobs; every later task draws its own rotation.
/// Labels are balanced and examples shuffled.
pub fn make_synthetic_tasks<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<Vec<Task>> {
    if spec.tasks == 0 || spec.classes < 2 || spec.dim == 0 || spec.n_train == 0 {
        return Err(Error::InvalidArgument(format!("degenerate synthetic spec {spec:?}")));
    }
    if !(spec.separation >= 0.0 && spec.separation.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "separation must be finite and non-negative, got {}",
            spec.separation
        )));
    }
    let means = class_means(spec.classes, spec.dim, spec.separation);
    let identity: Vec<f64> = (0..spec.dim * spec.dim)
        .map(|i| if i / spec.dim == i % spec.dim { 1.0 } else { 0.0 })
        .collect();

    let mut tasks = Vec::with_capacity(spec.tasks);
    for id in 0..spec.tasks {
        let rotation = if id == 0 {
            identity.clone()
        } else {
            random_rotation(spec.dim, rng)
        };
        let draw = |n: usize, rng: &mut R| -> Vec<Example> {
            let mut out: Vec<Example> = (0..n)
                .map(|i| {
                    let y = i % spec.classes;
                    let raw: Vec<f64> = means[y]
                        .iter()
                        .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    Example {
                        x: apply(&rotation, spec.dim, &raw),
                        y,
                        task_id: id,
                    }
                })
                .collect();
            out.shuffle(rng);
            out
        };
        let train = draw(spec.n_train, rng);
        let test = draw(spec.n_test, rng);
        tasks.push(Task {
            id,
            train,
            test,
            transform: Transform::Blobs {
                rotation,
                dim: spec.dim,
            },
        });
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256StarStar;

    fn spec(sep: f64) -> SyntheticSpec {
        SyntheticSpec {
            tasks: 3,
            classes: 4,
            dim: 6,
            n_train: 40,
            n_test: 20,
            separation: sep,
        }
    }

    #[test]
    fn means_have_requested_spacing() {
        for (classes, dim) in [(4, 6), (5, 2), (2, 1)] {
            let m = class_means(classes, dim, 3.0);
            let d = |a: &Vec<f64>, b: &Vec<f64>| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!((d(&m[0], &m[1]) - 3.0).abs() < 1e-12, "{classes} classes in {dim}d");
        }
    }

    #[test]
    fn rotations_are_orthogonal() {
        let mut r = Xoshiro256StarStar::seed_from_u64(1);
        let q = random_rotation(5, &mut r);
        for i in 0..5 {
            for j in 0..5 {
                let d: f64 = (0..5).map(|k| q[i * 5 + k] * q[j * 5 + k]).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let a = make_synthetic_tasks(&spec(2.0), &mut Xoshiro256StarStar::seed_from_u64(5)).unwrap();
        let b = make_synthetic_tasks(&spec(2.0), &mut Xoshiro256StarStar::seed_from_u64(5)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.train, y.train);
            assert_eq!(x.test, y.test);
        }
    }

    #[test]
    fn labels_are_balanced_and_tagged() {
        let tasks = make_synthetic_tasks(&spec(1.0), &mut Xoshiro256StarStar::seed_from_u64(2)).unwrap();
        for (t, task) in tasks.iter().enumerate() {
            let mut counts = [0; 4];
            for e in &task.train {
                counts[e.y] += 1;
                assert_eq!(e.task_id, t);
                assert_eq!(e.x.len(), 6);
            }
            assert_eq!(counts, [10; 4]);
        }
    }

    #[test]
    fn rejects_bad_separation() {
        let mut r = Xoshiro256StarStar::seed_from_u64(0);
        assert!(make_synthetic_tasks(&spec(-1.0), &mut r).is_err());
        assert!(make_synthetic_tasks(&spec(f64::NAN), &mut r).is_err());
    }
}
