use std::time::Instant;

use super::config::{Algorithm, TrainerConfig};
use super::meta::{LrState, MetaBatch};
use super::updates::{
    agem_update, c_maml_update, er_update, la_er_update, la_maml_update, online_update, sync_update,
};
use crate::error::{Error, Result};
use crate::harness::rng::{labels, seeded_rng, RunRng};
use crate::metrics::{grad_alignment, old_task_alignment, BoundaryAlignment, CurvePoint, RunRecord, RunStatus};
use crate::nn::{forward, Network, ParamVector};
use crate::replay::ReplayBuffer;
use crate::tasks::{stream_batches, Example, Protocol, TaskStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Measure replay/incoming gradient cosine on every update after the
    /// first task (two extra gradient evaluations per update).
    pub track_alignment: bool,
    /// Measure the old-task gradient dot product at every task boundary.
    pub track_old_task_alignment: bool,
    /// Also evaluate seen tasks every this many updates.
    pub eval_every: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            track_alignment: true,
            track_old_task_alignment: false,
            eval_every: None,
        }
    }
}

/// One learner: network weights, optional learnable learning rates, replay
/// memory and the random streams it draws from.
#[derive(Debug, Clone)]
pub struct Trainer {
    net: Network,
    cfg: TrainerConfig,
    batch_size: usize,
    params: ParamVector,
    lr: Option<LrState>,
    buffer: ReplayBuffer<Example>,
    buffer_rng: RunRng,
    sample_rng: RunRng,
    updates: u64,
}

impl Trainer {
    /// Validates `cfg` against `batch_size` and draws initial weights from
    /// the seed's `init` stream.
    pub fn new(net: Network, cfg: TrainerConfig, batch_size: usize, seed: u64) -> Result<Self> {
        let params = net.init_params(&mut seeded_rng(seed, labels::INIT));
        Self::with_params(net, cfg, batch_size, params, seed)
    }

    pub fn with_params(
        net: Network,
        cfg: TrainerConfig,
        batch_size: usize,
        params: ParamVector,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate(batch_size)?;
        if params.len() != net.num_params() {
            return Err(Error::shape("initial parameters", net.num_params(), params.len()));
        }
        let lr = match (cfg.algorithm.learns_lr(), cfg.alpha_init, cfg.eta) {
            (true, Some(a0), Some(eta)) => Some(LrState::new(params.len(), a0, eta)),
            _ => None,
        };
        let capacity = if cfg.algorithm.uses_replay() { cfg.replay_capacity } else { 0 };
        Ok(Self {
            buffer: ReplayBuffer::new(capacity),
            net,
            cfg,
            batch_size,
            params,
            lr,
            buffer_rng: seeded_rng(seed, labels::BUFFER),
            sample_rng: seeded_rng(seed, labels::SAMPLING),
            updates: 0,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn lr_state(&self) -> Option<&LrState> {
        self.lr.as_ref()
    }

    pub fn buffer(&self) -> &ReplayBuffer<Example> {
        &self.buffer
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// One update on `batch`. The replay sample is drawn before the update;
    /// with `push` the batch is offered to the buffer afterwards. Returns the
    /// replay/incoming gradient cosine when `measure_alignment` is set and
    /// both gradients are non-zero.
    pub fn observe(&mut self, batch: &[&Example], push: bool, measure_alignment: bool) -> Result<Option<f64>> {
        let cfg = &self.cfg;
        let net = &self.net;
        let replay: Vec<&Example> = if cfg.algorithm.uses_replay() {
            self.buffer.sample(cfg.replay_batch, &mut self.sample_rng)
        } else {
            Vec::new()
        };
        let alignment = if measure_alignment && !replay.is_empty() {
            grad_alignment(net, &self.params, &replay, batch)?
        } else {
            None
        };
        let k = cfg.inner_steps(self.batch_size);
        let theta = &self.params;
        let lr_state = || self.lr.as_ref().expect("learnable learning rates");
        let (params, lr) = match cfg.algorithm {
            Algorithm::Online => (online_update(net, theta, batch, cfg)?, None),
            Algorithm::Er => {
                let mut meta_set = batch.to_vec();
                meta_set.extend_from_slice(&replay);
                (er_update(net, theta, &meta_set, cfg)?, None)
            }
            Algorithm::Agem => (agem_update(net, theta, batch, &replay, cfg)?.params, None),
            Algorithm::CMaml => {
                let mb = MetaBatch::new(batch, &replay, k)?;
                (c_maml_update(net, theta, &mb, cfg)?, None)
            }
            Algorithm::Sync => {
                let mb = MetaBatch::new(batch, &replay, k)?;
                let (p, l) = sync_update(net, theta, lr_state(), &mb, cfg)?;
                (p, Some(l))
            }
            Algorithm::LaEr => {
                let mb = MetaBatch::new(batch, &replay, k)?;
                let (p, l) = la_er_update(net, theta, lr_state(), &mb, cfg)?;
                (p, Some(l))
            }
            Algorithm::LaMaml => {
                let mb = MetaBatch::new(batch, &replay, k)?;
                let (p, l) = la_maml_update(net, theta, lr_state(), &mb, cfg)?;
                (p, Some(l))
            }
        };
        self.params = params;
        if lr.is_some() {
            self.lr = lr;
        }
        self.updates += 1;
        if push {
            for e in batch {
                self.buffer.push((*e).clone(), &mut self.buffer_rng);
            }
        }
        Ok(alignment)
    }
}

/// Fraction of `examples` whose arg-max logit equals the label. Ties go to
/// the lowest class index.
pub fn accuracy(net: &Network, params: &ParamVector, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty test set".into()));
    }
    let mut correct = 0usize;
    for chunk in examples.chunks(256) {
        let refs: Vec<&Example> = chunk.iter().collect();
        let (x, _) = super::batch_tensor(&refs)?;
        let (logits, _) = forward(net, params, &x)?;
        for (i, e) in chunk.iter().enumerate() {
            let row = logits.row(i);
            let pred = row
                .iter()
                .enumerate()
                .fold(0, |best, (c, &v)| if v > row[best] { c } else { best });
            correct += usize::from(pred == e.y);
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

fn evaluate_seen(net: &Network, params: &ParamVector, stream: &TaskStream, upto: usize) -> Result<Vec<f64>> {
    (0..=upto).map(|j| accuracy(net, params, &stream.tasks[j].test)).collect()
}

/// Trains one learner over the whole stream and evaluates every seen task
/// after each task finishes.
///
/// Non-finite parameters end the run early with `RunStatus::Diverged` and
/// the rows finished so far; other errors propagate.
pub fn run_training(stream: &TaskStream, cfg: &TrainerConfig, opts: &RunOptions, seed: u64) -> Result<RunRecord> {
    if cfg.glances != stream.glances {
        return Err(Error::config(
            "trainer.glances",
            format!("trainer uses {} glances but the stream repeats batches {} times", cfg.glances, stream.glances),
        ));
    }
    let net = Network::mlp(stream.input_dim, &cfg.hidden, stream.num_classes)?;
    let mut trainer = Trainer::new(net, cfg.clone(), stream.batch_size, seed)?;
    let mut shuffle_rng = seeded_rng(seed, labels::SHUFFLE);
    let started = Instant::now();

    let mut acc = Vec::with_capacity(stream.num_tasks());
    let mut curve = Vec::new();
    let mut old_task = Vec::new();
    let mut align_sum = 0.0;
    let mut align_n = 0u64;
    let mut status = RunStatus::Completed;

    'tasks: for t in 0..stream.num_tasks() {
        if opts.track_old_task_alignment && t > 0 {
            let value = old_task_alignment(trainer.network(), trainer.params(), trainer.buffer().items(), t)?;
            old_task.push(BoundaryAlignment { task: t, value });
        }
        let batches = stream_batches(stream, t, &mut shuffle_rng)?;
        let per_epoch = stream.tasks[t].train.len().div_ceil(stream.batch_size);
        for (i, batch) in batches.iter().enumerate() {
            let push = match stream.protocol {
                Protocol::SinglePass => i % stream.glances == 0,
                Protocol::MultiPass => i < per_epoch,
            };
            match trainer.observe(batch, push, opts.track_alignment && t > 0) {
                Ok(Some(a)) => {
                    align_sum += a;
                    align_n += 1;
                }
                Ok(None) => {}
                Err(Error::NonFinite(what)) => {
                    status = RunStatus::Diverged {
                        message: format!("non-finite value in {what} at update {}", trainer.updates() + 1),
                    };
                    break 'tasks;
                }
                Err(e) => return Err(e),
            }
            if let Some(every) = opts.eval_every {
                if every > 0 && trainer.updates() % every == 0 {
                    let row = evaluate_seen(trainer.network(), trainer.params(), stream, t)?;
                    curve.push(CurvePoint {
                        update: trainer.updates(),
                        task: t,
                        mean_acc: row.iter().sum::<f64>() / row.len() as f64,
                    });
                }
            }
        }
        acc.push(evaluate_seen(trainer.network(), trainer.params(), stream, t)?);
    }

    Ok(RunRecord {
        algorithm: cfg.algorithm,
        seed,
        num_tasks: stream.num_tasks(),
        acc,
        wall_time_s: started.elapsed().as_secs_f64(),
        config: cfg.clone(),
        updates: trainer.updates(),
        alignment: (align_n > 0).then(|| align_sum / align_n as f64),
        alignment_samples: align_n,
        old_task_alignment: old_task,
        curve,
        status,
    })
}
