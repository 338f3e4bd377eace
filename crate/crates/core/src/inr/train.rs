use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, AdamConfig, InrModel};
use crate::encoding::GradAccumulator;
use crate::error::{Error, Result};
use crate::feature::Coreset;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Epoch number of the first epoch run (non-zero when resuming).
    pub start_epoch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            learning_rate: adam.learning_rate,
            batch_size: 1 << 16,
            max_epochs: 60,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            seed: 0,
            start_epoch: 0,
        }
    }
}

impl TrainConfig {
    /// The full-scale batch size.
    pub const FULL_SCALE_BATCH_SIZE: usize = 1 << 21;

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::argument("batch_size must be at least 1"));
        }
        // zero is allowed: it turns training into a pure evaluation pass
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::argument(format!("invalid learning rate {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon >= 0.0) {
            return Err(Error::argument("Adam betas must lie in [0, 1) and epsilon must be non-negative"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean squared error over the epoch's samples, measured before each
    /// batch's update.
    pub loss: f64,
    /// Filled in by an observer that evaluates reconstructions.
    pub psnr: Option<f64>,
}

/// Called after every epoch; may attach a PSNR and may stop training.
pub trait TrainObserver<S> {
    fn on_epoch(&mut self, record: &mut EpochRecord, model: &InrModel<S>) -> ControlFlow<()>;
}

impl<S, F> TrainObserver<S> for F
where
    F: FnMut(&mut EpochRecord, &InrModel<S>) -> ControlFlow<()>,
{
    fn on_epoch(&mut self, record: &mut EpochRecord, model: &InrModel<S>) -> ControlFlow<()> {
        self(record, model)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Shuffling seed of one epoch, so a resumed run shuffles like an
/// uninterrupted one.
fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Mini-batch Adam over shuffled coreset samples.
pub fn train<S: Scalar>(
    model: &mut InrModel<S>,
    coreset: &Coreset,
    cfg: &TrainConfig,
    observer: &mut impl TrainObserver<S>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if coreset.is_empty() {
        return Err(Error::argument("cannot train on an empty coreset"));
    }
    let queries: Vec<[S; 4]> = coreset.samples.iter().map(|s| s.coords.map(<S as Scalar>::from_f32)).collect();
    let targets: Vec<S> = coreset.samples.iter().map(|s| <S as Scalar>::from_f32(s.value)).collect();
    let mut adam = Adam::new(model, cfg.adam());
    let mut acc = GradAccumulator::for_encoder(&model.encoder);
    let mut order: Vec<usize> = (0..queries.len()).collect();
    let (mut bq, mut by) = (Vec::with_capacity(cfg.batch_size), Vec::with_capacity(cfg.batch_size));
    let mut report = TrainReport::default();

    for epoch in cfg.start_epoch..cfg.start_epoch + cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(cfg.seed, epoch)));
        let mut sq_err = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            bq.clear();
            by.clear();
            bq.extend(idx.iter().map(|&i| queries[i]));
            by.extend(idx.iter().map(|&i| targets[i]));
            let (grads, loss) = model.backward_with(&bq, &by, &mut acc)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            sq_err += loss * idx.len() as f64;
            adam.step(model, &grads);
        }
        let mut record = EpochRecord { epoch, loss: sq_err / queries.len() as f64, psnr: None };
        let flow = observer.on_epoch(&mut record, model);
        report.records.push(record);
        if flow.is_break() {
            report.stopped_early = true;
            break;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::tests::tiny_model;
    use super::super::{init_model, MlpConfig};
    use super::*;
    use crate::feature::Sample;

    fn grid_coreset(n: usize, value: impl Fn([f32; 4]) -> f32) -> Coreset {
        let c = |i: usize| -1.0 + 2.0 * i as f32 / (n - 1) as f32;
        let mut samples = Vec::new();
        for t in 0..3 {
            for z in 0..n {
                for y in 0..n {
                    for x in 0..n {
                        let coords = [-1.0 + t as f32, c(x), c(y), c(z)];
                        samples.push(Sample { coords, value: value(coords) });
                    }
                }
            }
        }
        Coreset { samples }
    }

    fn quiet(_: &mut EpochRecord, _: &InrModel<f64>) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let mut m = tiny_model::<f64>(1);
        let before = m.clone();
        let cs = grid_coreset(4, |c| c[1] * c[1]);
        let cfg = TrainConfig { learning_rate: 0.0, batch_size: 16, max_epochs: 3, ..Default::default() };
        let rep = train(&mut m, &cs, &cfg, &mut quiet).unwrap();
        assert_eq!(rep.records.len(), 3);
        assert_eq!(m, before);
    }

    #[test]
    fn constant_target_is_learned_quickly() {
        let cfg_enc = super::super::tests::tiny_config();
        let mut m = init_model::<f64>(cfg_enc, &MlpConfig { hidden_layers: 2, neurons: 4 }, 2).unwrap();
        let cs = grid_coreset(4, |_| 0.5);
        let cfg = TrainConfig { batch_size: 4, max_epochs: 10, ..Default::default() };
        let rep = train(&mut m, &cs, &cfg, &mut quiet).unwrap();
        let losses: Vec<f64> = rep.records.iter().map(|r| r.loss).collect();
        assert!(losses.iter().any(|&l| l < 1e-6), "losses {losses:?}");
    }

    #[test]
    fn observer_can_stop_and_annotate() {
        let mut m = tiny_model::<f64>(3);
        let cs = grid_coreset(3, |_| 0.1);
        let cfg = TrainConfig { batch_size: 8, max_epochs: 10, start_epoch: 5, ..Default::default() };
        let mut stop = |r: &mut EpochRecord, _: &InrModel<f64>| {
            r.psnr = Some(r.epoch as f64);
            if r.epoch == 6 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        };
        let rep = train(&mut m, &cs, &cfg, &mut stop).unwrap();
        assert!(rep.stopped_early);
        assert_eq!(rep.records.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![5, 6]);
        assert_eq!(rep.records[1].psnr, Some(6.0));
    }

    #[test]
    fn huge_learning_rate_reports_divergence_epoch() {
        let cfg_enc = super::super::tests::tiny_config();
        let mut m = init_model::<f32>(cfg_enc, &MlpConfig { hidden_layers: 2, neurons: 8 }, 1).unwrap();
        let cs = grid_coreset(4, |c| 1e30 * c[1]);
        let cfg = TrainConfig { learning_rate: 1e30, batch_size: 4, max_epochs: 50, ..Default::default() };
        match train(&mut m, &cs, &cfg, &mut |_: &mut EpochRecord, _: &InrModel<f32>| ControlFlow::Continue(())) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch < 50),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn loss_trace_is_reproducible() {
        let cs = grid_coreset(5, |c| (c[0] + c[1] * c[2]).abs() * 0.5);
        let cfg = TrainConfig { batch_size: 32, max_epochs: 4, seed: 11, ..Default::default() };
        let run = || {
            let mut m = tiny_model::<f32>(4);
            let rep = train(&mut m, &cs, &cfg, &mut |_: &mut EpochRecord, _: &InrModel<f32>| ControlFlow::Continue(()))
                .unwrap();
            rep.records.iter().map(|r| r.loss.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut m = tiny_model::<f64>(1);
        let cs = grid_coreset(3, |_| 0.0);
        for cfg in [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { learning_rate: -1.0, ..Default::default() },
            TrainConfig { learning_rate: f64::NAN, ..Default::default() },
        ] {
            assert!(train(&mut m, &cs, &cfg, &mut quiet).is_err());
        }
        assert!(train(&mut m, &Coreset::default(), &TrainConfig::default(), &mut quiet).is_err());
    }
}
