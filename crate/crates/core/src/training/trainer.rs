use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::loss::{combine, loss_and_grad, DataNorm, KernelMode, LossParts, LossProblem, LossWeights};
use super::schedule::LrSchedule;
use crate::dataset::{fmt17, FieldDataset};
use crate::error::{Error, Result};
use crate::nn::{IPinnModel, KernelHeadKind, ModelConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub alpha0: f64,
    pub weights: LossWeights,
    pub data_norm: DataNorm,
    pub sym_on_theta: bool,
    /// Time rows per optimizer step; 0 means the whole grid every step.
    pub batch_rows: usize,
    /// Seed of the row shuffling.
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            alpha0: 1e-4,
            weights: LossWeights::default(),
            data_norm: DataNorm::Two,
            sym_on_theta: false,
            batch_rows: 0,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Settings of the parametric Gaussian experiment.
    pub fn parametric() -> Self {
        Self { alpha0: 1e-3, ..Self::default() }
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule::new(self.alpha0, self.epochs)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.schedule().validate()?;
        let a = self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(Error::config("adam parameters out of range"));
        }
        Ok(())
    }
}

/// Losses of one epoch.
///
/// With minibatches the norms are combined over the epoch's batches as if
/// they were one vector, while `L_sym` and the penalty are averaged over the
/// steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss: LossParts,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    pub final_params: Vec<f64>,
    pub wall_time_s: f64,
}

const REPORT_MAGIC: &str = "# peripinn-train-report v1";
const REPORT_HEADER: &str = "epoch lr L_pde L_data L_sym penalty total";

impl TrainReport {
    /// Columnar text; wall time is not part of it so that identical runs
    /// give identical files.
    pub fn to_text(&self) -> String {
        let mut s = format!("{REPORT_MAGIC}\n{REPORT_HEADER}\n");
        for r in &self.records {
            let l = r.loss;
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {}",
                r.epoch,
                fmt17(r.lr),
                fmt17(l.pde),
                fmt17(l.data),
                fmt17(l.sym),
                fmt17(l.penalty),
                fmt17(l.total)
            );
        }
        s
    }

    /// Parses the records back; `final_params` and wall time stay empty.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |d: String| Error::parse("training report", d);
        let mut lines = text.lines();
        if lines.next() != Some(REPORT_MAGIC) || lines.next() != Some(REPORT_HEADER) {
            return Err(bad("missing header".into()));
        }
        let mut records = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split(' ').collect();
            if cols.len() != 7 {
                return Err(bad(format!("expected 7 columns: {line:?}")));
            }
            let epoch = cols[0].parse().map_err(|e| bad(format!("{e}")))?;
            let mut v = [0.0; 6];
            for (k, c) in cols[1..].iter().enumerate() {
                v[k] = c.parse().map_err(|e| bad(format!("{e}")))?;
            }
            let loss = LossParts { pde: v[1], data: v[2], sym: v[3], penalty: v[4], total: v[5] };
            records.push(EpochRecord { epoch, lr: v[0], loss });
        }
        Ok(Self { records, final_params: Vec::new(), wall_time_s: 0.0 })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Result of a training run. On divergence `model` holds the last finite
/// parameters and `diverged` the reason.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: IPinnModel,
    pub report: TrainReport,
    pub diverged: Option<Error>,
}

impl TrainOutcome {
    pub fn into_result(self) -> Result<(IPinnModel, TrainReport)> {
        match self.diverged {
            Some(e) => Err(e),
            None => Ok((self.model, self.report)),
        }
    }
}

struct EpochAccumulator {
    pde_sq: f64,
    data: f64,
    sym: f64,
    penalty: f64,
    steps: usize,
}

impl EpochAccumulator {
    fn new() -> Self {
        Self { pde_sq: 0.0, data: 0.0, sym: 0.0, penalty: 0.0, steps: 0 }
    }

    fn add(&mut self, l: &LossParts, norm: DataNorm) {
        self.pde_sq += l.pde * l.pde;
        self.data = match norm {
            DataNorm::Two => self.data + l.data * l.data,
            DataNorm::Sup => self.data.max(l.data),
        };
        self.sym += l.sym;
        self.penalty += l.penalty;
        self.steps += 1;
    }

    fn finish(&self, w: &LossWeights, norm: DataNorm) -> LossParts {
        if self.steps == 1 {
            let data = match norm {
                DataNorm::Two => self.data.sqrt(),
                DataNorm::Sup => self.data,
            };
            return combine(w, self.pde_sq.sqrt(), data, self.sym, self.penalty);
        }
        let n = self.steps as f64;
        let data = match norm {
            DataNorm::Two => self.data.sqrt(),
            DataNorm::Sup => self.data,
        };
        combine(w, self.pde_sq.sqrt(), data, self.sym / n, self.penalty / n)
    }
}

/// Generic loop: Adam on the trainable parameters of `model`, projection
/// after every step, learning rate from the quadratic schedule.
pub fn train(
    mut model: IPinnModel,
    dataset: &FieldDataset,
    kernel: KernelMode,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let problem = LossProblem {
        dataset,
        kernel,
        sign: dataset.meta.sign,
        boundary: dataset.meta.boundary,
        weights: cfg.weights,
        data_norm: cfg.data_norm,
        sym_on_theta: cfg.sym_on_theta,
    };
    problem.validate()?;
    let start = Instant::now();
    let schedule = cfg.schedule();
    let trainable = model.layout().trainable_mask();
    let nonneg = model.layout().nonneg_mask();
    let mut adam = AdamState::new(model.param_count(), cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_t = dataset.grid().n_t;
    let per_step = if cfg.batch_rows == 0 || cfg.batch_rows >= n_t { n_t } else { cfg.batch_rows };
    let mut report = TrainReport::default();
    let mut diverged = None;

    'epochs: for epoch in 0..cfg.epochs {
        let lr = schedule.lr_at(epoch);
        let mut order: Vec<usize> = (0..n_t).collect();
        if per_step < n_t {
            order.shuffle(&mut rng);
        }
        let mut acc = EpochAccumulator::new();
        for chunk in order.chunks(per_step) {
            let mut rows = chunk.to_vec();
            rows.sort_unstable();
            let step = loss_and_grad(&model, &problem, &rows).and_then(|(parts, grad)| {
                let mut params = model.params().to_vec();
                adam.step(&mut params, &grad, lr, &trainable, &nonneg)?;
                Ok((parts, params))
            });
            match step {
                Ok((parts, params)) => {
                    acc.add(&parts, cfg.data_norm);
                    model.set_params(params)?;
                }
                Err(e @ Error::Divergence(_)) | Err(e @ Error::Autodiff(_)) => {
                    diverged = Some(Error::Divergence(format!("epoch {epoch}: {e}")));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let record = EpochRecord { epoch, lr, loss: acc.finish(&cfg.weights, cfg.data_norm) };
        on_epoch(&record);
        report.records.push(record);
    }
    report.final_params = model.params().to_vec();
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(TrainOutcome { model, report, diverged })
}

/// Trains the network-kernel model on `dataset`.
pub fn train_ipinn(
    model_cfg: ModelConfig,
    model_seed: u64,
    dataset: &FieldDataset,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    if model_cfg.kernel_head != KernelHeadKind::Network {
        return Err(Error::config("train_ipinn needs the network kernel head"));
    }
    let model = IPinnModel::new(model_cfg, model_seed)?;
    train(model, dataset, KernelMode::Model, cfg, on_epoch)
}

/// Trains the field branch together with `(γ*, σ*)` of the Gaussian kernel
/// model.
pub fn train_parametric(
    model_cfg: ModelConfig,
    model_seed: u64,
    dataset: &FieldDataset,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    if model_cfg.kernel_head != KernelHeadKind::Parametric {
        return Err(Error::config("train_parametric needs the parametric kernel head"));
    }
    let model = IPinnModel::new(model_cfg, model_seed)?;
    train(model, dataset, KernelMode::Model, cfg, on_epoch)
}
