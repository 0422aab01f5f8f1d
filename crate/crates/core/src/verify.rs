//! Numerical certificates for the gradient formulas the trainers rely on.
//!
//! Every check builds small random fixtures from a seed, compares an
//! analytic quantity with a finite-difference oracle, and returns a
//! serializable report carrying its own pass/fail verdict.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    hypergradient, inner_loop, la_maml_update, meta_grad_alpha, meta_grad_theta, Algorithm, LrState, MetaBatch,
    MetaLossMode, Model, Trainer, TrainerConfig,
};
use crate::error::{Error, Result};
use crate::harness::rng::{seeded_rng, RunRng};
use crate::nn::{
    finite_diff_grad, forward, loss_and_grad, mean_loss, relative_l2_error, sgd_step, LearningRate, Network,
    ParamVector, Tensor,
};
use crate::tasks::Example;

pub const BACKWARD_TOL: f64 = 1e-6;
pub const BACKWARD_EPS: f64 = 1e-5;
pub const HYPERGRAD_TOL: f64 = 1e-5;
pub const HYPERGRAD_EPS: f64 = 1e-6;
pub const ORDER_RATIO_RANGE: (f64, f64) = (3.5, 4.5);
pub const EQUIVALENCE_ALPHAS: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
pub const HYPERGRAD_KS: [usize; 4] = [1, 2, 4, 10];

/// `½‖θ − x‖²` averaged over the batch; its gradient is `θ − mean(x)`.
/// Used to build fixtures with hand-picked gradient directions.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    pub dim: usize,
}

impl Model for Quadratic {
    fn num_params(&self) -> usize {
        self.dim
    }

    fn loss_grad(&self, params: &ParamVector, batch: &[&Example]) -> Result<(f64, ParamVector)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.dim];
        for e in batch {
            if e.x.len() != self.dim {
                return Err(Error::shape("quadratic target", self.dim, e.x.len()));
            }
            for ((g, p), x) in grad.iter_mut().zip(params.iter()).zip(&e.x) {
                loss += 0.5 * (p - x) * (p - x) / n;
                *g += (p - x) / n;
            }
        }
        Ok((loss, ParamVector::from_vec(grad)?))
    }
}

/// Smallest `|z|` over all hidden pre-activations of `x`.
fn kink_margin(net: &Network, params: &ParamVector, x: &Tensor) -> Result<f64> {
    let (_, cache) = forward(net, params, x)?;
    Ok((0..cache.depth() - 1)
        .flat_map(|l| cache.pre_activations(l).iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min))
}

fn normal_vec(rng: &mut RunRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_examples(rng: &mut RunRng, n: usize, dim: usize, classes: usize) -> Vec<Example> {
    (0..n)
        .map(|_| Example {
            x: normal_vec(rng, dim),
            y: rng.gen_range(0..classes),
            task_id: 0,
        })
        .collect()
}

fn stack(examples: &[&Example]) -> Result<Tensor> {
    Tensor::from_rows(&examples.iter().map(|e| e.x.as_slice()).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackwardReport {
    pub fixtures: usize,
    /// Fixtures discarded because a hidden unit sat too close to its kink.
    pub rejected: usize,
    pub eps: f64,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// `backward` against central differences on random single-example
/// fixtures of random small topology.
pub fn check_backward(fixtures: usize, seed: u64) -> Result<BackwardReport> {
    let mut rng = seeded_rng(seed, "verify-backward");
    let mut rejected = 0;
    let mut max_rel_err: f64 = 0.0;
    let mut done = 0;
    while done < fixtures {
        let depth = rng.gen_range(1..=2);
        let mut sizes = vec![rng.gen_range(2..=6)];
        sizes.extend((0..depth).map(|_| rng.gen_range(2..=6)));
        sizes.push(rng.gen_range(2..=5));
        let net = Network::new(sizes)?;
        let params = ParamVector::from_vec(normal_vec(&mut rng, net.num_params()))?;
        let x = Tensor::vector(normal_vec(&mut rng, net.input_size()))?;
        let y = [rng.gen_range(0..net.output_size())];
        if kink_margin(&net, &params, &x)? < 1e-3 {
            rejected += 1;
            continue;
        }
        let (_, g) = loss_and_grad(&net, &params, &x, &y)?;
        let fd = finite_diff_grad(|p| mean_loss(&net, p, &x, &y), &params, BACKWARD_EPS)?;
        max_rel_err = max_rel_err.max(relative_l2_error(&g, &fd));
        done += 1;
    }
    Ok(BackwardReport {
        fixtures,
        rejected,
        eps: BACKWARD_EPS,
        max_rel_err,
        passed: max_rel_err < BACKWARD_TOL,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypergradReport {
    pub k: usize,
    pub mode: MetaLossMode,
    pub eps: f64,
    pub max_abs_err: f64,
    /// Largest coordinate error relative to the largest hypergradient entry.
    /// This is the pass criterion.
    pub max_rel_err: f64,
    /// Largest per-coordinate `|a − b| / max(|a|, |b|)`. Coordinates far
    /// below the largest entry are dominated by the oracle's own rounding
    /// (about `u·L/ε`), so this is informational.
    pub max_coordinate_rel_err: f64,
    pub passed: bool,
}

struct HyperFixture {
    net: Network,
    theta: ParamVector,
    alpha: ParamVector,
    inner: Vec<Example>,
    meta: Vec<Example>,
}

impl HyperFixture {
    fn new(k: usize, rng: &mut RunRng) -> Result<Self> {
        let net = Network::new(vec![2, 4, 3])?;
        let theta = ParamVector::from_vec(normal_vec(rng, net.num_params()))?;
        let alpha = ParamVector::from_vec((0..net.num_params()).map(|_| rng.gen_range(0.02..0.1)).collect())?;
        let inner = random_examples(rng, k, 2, 3);
        let mut meta = inner.clone();
        meta.extend(random_examples(rng, 5, 2, 3));
        Ok(Self {
            net,
            theta,
            alpha,
            inner,
            meta,
        })
    }

    fn refs(v: &[Example]) -> Vec<&Example> {
        v.iter().collect()
    }

    /// Every inner and meta example stays clear of the ReLU kinks at every
    /// point the oracle evaluates.
    fn margin(&self, points: &[&ParamVector]) -> Result<f64> {
        let all = stack(&Self::refs(&self.meta))?;
        let mut m = f64::INFINITY;
        for p in points {
            m = m.min(kink_margin(&self.net, p, &all)?);
        }
        Ok(m)
    }
}

/// Hypergradient of the first-order unrolled meta-loss against central
/// differences in each learning-rate coordinate.
///
/// The oracle keeps the trajectory gradients at their base values and
/// rebuilds `θ_j(α') = θ_0 − α' ⊙ Σ_{i<j} g_i`, which is exactly the
/// function the first-order expression differentiates.
pub fn check_hypergradient(k: usize, mode: MetaLossMode, seed: u64) -> Result<HypergradReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let mut rng = seeded_rng(seed ^ k as u64, "verify-hypergradient");
    let fx = loop {
        let fx = HyperFixture::new(k, &mut rng)?;
        let stream: Vec<Vec<&Example>> = fx.inner.iter().map(|e| vec![e]).collect();
        let traj = inner_loop(&fx.net, &fx.theta, LearningRate::PerParam(&fx.alpha), &stream)?;
        let mut points: Vec<&ParamVector> = traj.per_step_params.iter().collect();
        points.push(&fx.theta);
        if fx.margin(&points)? > 1e-3 {
            break fx;
        }
    };
    let stream: Vec<Vec<&Example>> = fx.inner.iter().map(|e| vec![e]).collect();
    let meta_set = HyperFixture::refs(&fx.meta);
    let traj = inner_loop(&fx.net, &fx.theta, LearningRate::PerParam(&fx.alpha), &stream)?;
    let meta = meta_grad_theta(&fx.net, &traj, &meta_set, mode)?;
    let analytic = hypergradient(&meta, &traj.traj_grads)?;

    let mut prefixes = Vec::with_capacity(k);
    let mut acc = ParamVector::zeros(fx.theta.len());
    for g in &traj.traj_grads {
        acc.axpy(1.0, g)?;
        prefixes.push(acc.clone());
    }
    let (x, y) = crate::algorithms::batch_tensor(&meta_set)?;
    let objective = |a: &ParamVector| -> Result<f64> {
        let eval = |prefix: &ParamVector| sgd_step(&fx.theta, prefix, LearningRate::PerParam(a));
        match mode {
            MetaLossMode::LastStep => mean_loss(&fx.net, &eval(&prefixes[k - 1])?, &x, &y),
            MetaLossMode::AllSteps => {
                let mut total = 0.0;
                for p in &prefixes {
                    total += mean_loss(&fx.net, &eval(p)?, &x, &y)?;
                }
                Ok(total)
            }
        }
    };
    let fd = finite_diff_grad(objective, &fx.alpha, HYPERGRAD_EPS)?;

    let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut max_abs_err: f64 = 0.0;
    let mut max_coordinate_rel_err: f64 = 0.0;
    for (a, b) in analytic.iter().zip(fd.iter()) {
        let err = (a - b).abs();
        max_abs_err = max_abs_err.max(err);
        let m = a.abs().max(b.abs());
        if m > 0.0 {
            max_coordinate_rel_err = max_coordinate_rel_err.max(err / m);
        }
    }
    let max_rel_err = if scale > 0.0 { max_abs_err / scale } else { max_abs_err };
    Ok(HypergradReport {
        k,
        mode,
        eps: HYPERGRAD_EPS,
        max_abs_err,
        max_rel_err,
        max_coordinate_rel_err,
        passed: max_rel_err < HYPERGRAD_TOL,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub seed: u64,
    pub alphas: Vec<f64>,
    /// `‖G₁(α) − G₂(α)‖` for each α.
    pub discrepancies: Vec<f64>,
    /// `discrepancy[i] / discrepancy[i + 1]`.
    pub ratios: Vec<f64>,
    pub passed: bool,
}

/// One inner SGD step against its first-order surrogate.
///
/// `G₁` is the finite-difference gradient of `θ ↦ L(θ − α∇ℓ(θ))` and `G₂`
/// that of `θ ↦ L(θ) − α ∇L(θ)·∇ℓ(θ)`, where `ℓ` is the current-batch loss
/// and `L` the loss on the current batch plus replayed memories. The two
/// objectives agree to first order in α, so halving α should shrink
/// `‖G₁ − G₂‖` about fourfold.
pub fn check_equivalence_k1(alphas: &[f64], seed: u64) -> Result<EquivalenceReport> {
    check_equivalence_k1_with_replay(alphas, seed, 4)
}

/// As [`check_equivalence_k1`] with `replay` extra memories in `L`; zero
/// makes `L` the current-batch loss itself.
pub fn check_equivalence_k1_with_replay(alphas: &[f64], seed: u64, replay: usize) -> Result<EquivalenceReport> {
    if alphas.len() < 2 || alphas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidArgument("alphas must be strictly descending, at least two".into()));
    }
    let discrepancies = equivalence_discrepancies(alphas, seed, replay)?;
    let ratios: Vec<f64> = discrepancies.windows(2).map(|w| w[0] / w[1]).collect();
    let (lo, hi) = ORDER_RATIO_RANGE;
    let passed = ratios.iter().all(|r| (lo..=hi).contains(r));
    Ok(EquivalenceReport {
        seed,
        alphas: alphas.to_vec(),
        discrepancies,
        ratios,
        passed,
    })
}

fn equivalence_discrepancies(alphas: &[f64], seed: u64, replay: usize) -> Result<Vec<f64>> {
    let mut rng = seeded_rng(seed, "verify-equivalence");
    let net = Network::new(vec![2, 4, 3])?;
    let a_max = alphas.iter().cloned().fold(0.0, f64::max);
    let (theta, current, all) = loop {
        let theta = ParamVector::from_vec(normal_vec(&mut rng, net.num_params()))?;
        let current = random_examples(&mut rng, 2, 2, 3);
        let mut all = current.clone();
        all.extend(random_examples(&mut rng, replay, 2, 3));
        let x_all = stack(&all.iter().collect::<Vec<_>>())?;
        let (xc, yc) = crate::algorithms::batch_tensor(&current.iter().collect::<Vec<_>>())?;
        let (_, g) = loss_and_grad(&net, &theta, &xc, &yc)?;
        let stepped = sgd_step(&theta, &g, LearningRate::Scalar(a_max))?;
        let margin = kink_margin(&net, &theta, &x_all)?.min(kink_margin(&net, &stepped, &x_all)?);
        // The step moves pre-activations by O(α‖g‖); demand a wide berth.
        if margin > 0.1 {
            break (theta, current, all);
        }
    };
    let (xc, yc) = crate::algorithms::batch_tensor(&current.iter().collect::<Vec<_>>())?;
    let (xa, ya) = crate::algorithms::batch_tensor(&all.iter().collect::<Vec<_>>())?;

    let mut discrepancies = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let unrolled = |p: &ParamVector| -> Result<f64> {
            let (_, g) = loss_and_grad(&net, p, &xc, &yc)?;
            mean_loss(&net, &sgd_step(p, &g, LearningRate::Scalar(alpha))?, &xa, &ya)
        };
        let surrogate = |p: &ParamVector| -> Result<f64> {
            let (_, g_cur) = loss_and_grad(&net, p, &xc, &yc)?;
            let (l_all, g_all) = loss_and_grad(&net, p, &xa, &ya)?;
            Ok(l_all - alpha * g_all.dot(&g_cur)?)
        };
        let g1 = finite_diff_grad(unrolled, &theta, BACKWARD_EPS)?;
        let g2 = finite_diff_grad(surrogate, &theta, BACKWARD_EPS)?;
        discrepancies.push(g1.sub(&g2)?.norm());
    }
    Ok(discrepancies)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignFixture {
    pub name: String,
    pub g_alpha: Vec<f64>,
    pub alpha_before: Vec<f64>,
    pub alpha_after: Vec<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignReport {
    pub fixtures: Vec<SignFixture>,
    pub passed: bool,
}

fn point(x: Vec<f64>) -> Example {
    Example { x, y: 0, task_id: 0 }
}

/// Aligned, orthogonal and interfering trajectory/meta gradients on a
/// quadratic model, with one inner step from `θ_0 = 0`.
///
/// The inner target `c` gives the trajectory gradient `−c`; the meta target
/// decides the meta-gradient at `θ_1 = α c`.
pub fn check_sign_semantics() -> Result<SignReport> {
    let model = Quadratic { dim: 3 };
    let alpha0 = 0.25;
    let cfg = TrainerConfig::new(Algorithm::LaMaml)
        .with_lr_learning(alpha0, 0.1)
        .with_k(1);
    let c = vec![1.0, 2.0, -1.5];
    let fixtures = [
        ("aligned", c.iter().map(|v| 5.0 * v).collect::<Vec<_>>()),
        // Meta target equals θ_1 on the coordinate the trajectory moves and
        // pulls only along the others.
        ("orthogonal", vec![alpha0 * 1.0, 0.0, 0.0]),
        ("interfering", c.iter().map(|v| -5.0 * v).collect()),
    ];
    let mut out = Vec::new();
    for (name, meta_target) in fixtures {
        let inner_target = if name == "orthogonal" { vec![1.0, 0.0, 0.0] } else { c.clone() };
        let meta_target = if name == "orthogonal" { vec![meta_target[0], 3.0, -2.0] } else { meta_target };
        let inner_ex = point(inner_target);
        let meta_ex = point(meta_target);
        let mb = MetaBatch {
            inner: vec![vec![&inner_ex]],
            meta: vec![&meta_ex],
        };
        let theta = ParamVector::zeros(3);
        let lr = LrState::new(3, alpha0, 0.1);
        let traj = inner_loop(&model, &theta, LearningRate::PerParam(&lr.alpha), &mb.inner)?;
        let meta = meta_grad_theta(&model, &traj, &mb.meta, cfg.meta_loss)?;
        let g_alpha = meta_grad_alpha(&meta.g_meta, &traj.traj_grads)?;
        let (_, next) = la_maml_update(&model, &theta, &lr, &mb, &cfg)?;
        let moved: Vec<f64> = next.alpha.iter().zip(lr.alpha.iter()).map(|(a, b)| a - b).collect();
        let ok = match name {
            "aligned" => g_alpha.iter().all(|&g| g <= 0.0) && moved.iter().all(|&d| d > 0.0),
            "orthogonal" => g_alpha.iter().all(|&g| g == 0.0) && moved.iter().all(|&d| d == 0.0),
            _ => g_alpha.iter().all(|&g| g >= 0.0) && moved.iter().all(|&d| d < 0.0),
        };
        out.push(SignFixture {
            name: name.into(),
            g_alpha: g_alpha.into_vec(),
            alpha_before: lr.alpha.into_vec(),
            alpha_after: next.alpha.into_vec(),
            passed: ok,
        });
    }
    let passed = out.iter().all(|f| f.passed);
    Ok(SignReport { fixtures: out, passed })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeCase {
    pub name: String,
    pub steps: usize,
    /// First update after which the two trainers' weights differ.
    pub first_mismatch: Option<usize>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeReport {
    pub seed: u64,
    pub cases: Vec<LatticeCase>,
    pub passed: bool,
}

fn lockstep(name: &str, a: TrainerConfig, b: TrainerConfig, data: &[Example], seed: u64) -> Result<LatticeCase> {
    let net = Network::new(vec![4, 8, 3])?;
    let mut ta = Trainer::new(net.clone(), a, 10, seed)?;
    let mut tb = Trainer::new(net, b, 10, seed)?;
    let mut first_mismatch = None;
    let batches: Vec<Vec<&Example>> = data.chunks(10).map(|c| c.iter().collect()).collect();
    for (i, batch) in batches.iter().enumerate() {
        ta.observe(batch, true, false)?;
        tb.observe(batch, true, false)?;
        if ta.params() != tb.params() {
            first_mismatch = Some(i);
            break;
        }
    }
    Ok(LatticeCase {
        name: name.to_string(),
        steps: batches.len(),
        first_mismatch,
        passed: first_mismatch.is_none(),
    })
}

/// Runs each degenerate trainer next to the trainer it should reduce to and
/// compares the weights bit for bit after every update:
/// La-MAML with `η = 0` against C-MAML with `β = α₀`, Sync with `η = 0`
/// against C-MAML, and ER without memory against Online.
pub fn check_reduction_lattice(steps: usize, seed: u64) -> Result<LatticeReport> {
    let mut rng = seeded_rng(seed, "verify-lattice");
    let data = random_examples(&mut rng, 10 * steps, 4, 3);
    let c_maml = |alpha, beta| TrainerConfig::new(Algorithm::CMaml).with_alpha_beta(alpha, beta);
    let mut sync = TrainerConfig::new(Algorithm::Sync).with_lr_learning(0.1, 0.0);
    sync.beta = Some(0.03);
    let mut er = TrainerConfig::new(Algorithm::Er).with_lr(0.05);
    er.replay_capacity = 0;
    let cases = vec![
        lockstep(
            "la-maml(eta=0) = c-maml",
            TrainerConfig::new(Algorithm::LaMaml).with_lr_learning(0.1, 0.0),
            c_maml(0.1, 0.1),
            &data,
            seed,
        )?,
        lockstep("sync(eta=0) = c-maml", sync, c_maml(0.1, 0.03), &data, seed)?,
        lockstep(
            "er(no memory) = online",
            er,
            TrainerConfig::new(Algorithm::Online).with_lr(0.05),
            &data,
            seed,
        )?,
    ];
    let passed = cases.iter().all(|c| c.passed);
    Ok(LatticeReport { seed, cases, passed })
}

/// Everything the `verify` command runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub backward: BackwardReport,
    pub hypergradient: Vec<HypergradReport>,
    pub equivalence: Vec<EquivalenceReport>,
    pub sign_semantics: SignReport,
    pub reduction_lattice: LatticeReport,
    pub passed: bool,
}

pub fn run_all(seed: u64) -> Result<VerifyReport> {
    let backward = check_backward(50, seed)?;
    let mut hyper = Vec::new();
    for mode in [MetaLossMode::LastStep, MetaLossMode::AllSteps] {
        for k in HYPERGRAD_KS {
            hyper.push(check_hypergradient(k, mode, seed)?);
        }
    }
    let equivalence = (0..5)
        .map(|s| check_equivalence_k1(&EQUIVALENCE_ALPHAS, seed + s))
        .collect::<Result<Vec<_>>>()?;
    let sign_semantics = check_sign_semantics()?;
    let reduction_lattice = check_reduction_lattice(100, seed)?;
    let passed = backward.passed
        && reduction_lattice.passed
        && hyper.iter().all(|h| h.passed)
        && equivalence.iter().all(|e| e.passed)
        && sign_semantics.passed;
    Ok(VerifyReport {
        backward,
        hypergradient: hyper,
        equivalence,
        sign_semantics,
        reduction_lattice,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_holds_and_detects_a_real_difference() {
        let r = check_reduction_lattice(100, 21).unwrap();
        assert!(r.passed, "{r:?}");
        let mut rng = seeded_rng(0, "x");
        let data = random_examples(&mut rng, 50, 4, 3);
        let c = |b| TrainerConfig::new(Algorithm::CMaml).with_alpha_beta(0.1, b);
        let case = lockstep("differ", c(0.1), c(0.11), &data, 0).unwrap();
        assert_eq!(case.first_mismatch, Some(0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let r = check_backward(50, 3).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn hypergradient_matches_unrolled_oracle() {
        for mode in [MetaLossMode::LastStep, MetaLossMode::AllSteps] {
            for k in [1, 2, 4] {
                let r = check_hypergradient(k, mode, 11).unwrap();
                assert!(r.passed, "{r:?}");
            }
        }
    }

    #[test]
    fn zero_meta_gradient_gives_zero_hypergradient() {
        let g_meta = ParamVector::zeros(4);
        let traj = vec![ParamVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]).unwrap(); 3];
        let g = meta_grad_alpha(&g_meta, &traj).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_step_objectives_coincide() {
        let d = equivalence_discrepancies(&[0.0], 2, 4).unwrap();
        assert!(d[0] < 1e-9, "{d:?}");
    }

    #[test]
    fn quadratic_decay_with_and_without_replay() {
        for replay in [0, 4] {
            let r = check_equivalence_k1_with_replay(&EQUIVALENCE_ALPHAS, 7, replay).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn alphas_must_descend() {
        assert!(check_equivalence_k1(&[1e-3, 1e-2], 0).is_err());
        assert!(check_equivalence_k1(&[1e-3], 0).is_err());
    }

    #[test]
    fn sign_fixtures() {
        let r = check_sign_semantics().unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.fixtures.len(), 3);
    }

    #[test]
    fn quadratic_model_gradient() {
        let m = Quadratic { dim: 2 };
        let a = point(vec![1.0, 2.0]);
        let b = point(vec![3.0, -2.0]);
        let theta = ParamVector::from_vec(vec![0.5, 0.5]).unwrap();
        let (_, g) = m.loss_grad(&theta, &[&a, &b]).unwrap();
        assert_eq!(g.as_slice(), &[-1.5, 0.5]);
        let fd = finite_diff_grad(|p| Ok(m.loss_grad(p, &[&a, &b])?.0), &theta, 1e-5).unwrap();
        assert!(relative_l2_error(&g, &fd) < 1e-9);
    }
}
