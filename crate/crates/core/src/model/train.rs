//! Symmetric InfoNCE training over in-batch image/caption pairs, SGD with
//! momentum.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DualEncoderModel, ImageInput, TextInput};
use crate::error::{Result, VlxError};
use crate::tape::Tape;
use crate::tensor::Tensor;

pub const TAU_MIN: f64 = 0.05;
pub const TAU_MAX: f64 = 100.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 8,
            lr: 0.1,
            momentum: 0.9,
            seed: 0,
        }
    }
}

/// Trains `model` in place and returns the mean loss of each epoch. The
/// learning rate follows [`cosine_lr`]; momentum carries across epochs.
///
/// Batches never contain two identical captions: a colliding sample is
/// deferred to the next batch. Samples left over at the end of an epoch
/// that cannot fill a batch are skipped for that epoch.
pub fn train_contrastive(
    model: &mut DualEncoderModel,
    pairs: &[(&ImageInput, &TextInput)],
    opts: &TrainOptions,
) -> Result<Vec<f64>> {
    if opts.batch_size < 2 {
        return Err(VlxError::Parameter("batch size must be at least 2".into()));
    }
    if pairs.len() < opts.batch_size {
        return Err(VlxError::Parameter(format!(
            "dataset of {} samples is smaller than batch size {}",
            pairs.len(),
            opts.batch_size
        )));
    }
    if !(opts.lr >= 0.0 && opts.lr.is_finite()) {
        return Err(VlxError::Parameter(format!("invalid learning rate {}", opts.lr)));
    }
    let side = model.image_side();
    let vocab_len = model.vocab().len();
    for (img, txt) in pairs {
        if img.side() != side {
            return Err(VlxError::Dimension {
                op: "training image",
                lhs: vec![side, side],
                rhs: vec![img.side(), img.side()],
            });
        }
        if txt.tokens.is_empty() || txt.tokens.iter().any(|&t| t >= vocab_len) {
            return Err(VlxError::Input(format!("caption `{}` has invalid tokens", txt.raw)));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut velocity: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| vec![0.0; p.numel()])
        .collect();
    let mut tau_velocity = 0.0;
    let mut history = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        let lr = cosine_lr(opts.lr, epoch, opts.epochs);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut rng);
        let batches = plan_batches(&order, pairs, opts.batch_size);
        if batches.is_empty() {
            return Err(VlxError::Parameter(
                "no batch without duplicate captions can be formed".into(),
            ));
        }
        let mut total = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let (loss, grads, tau_grad) = batch_gradients(model, pairs, batch)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) || !tau_grad.is_finite() {
                return Err(VlxError::Diverged {
                    epoch,
                    batch: b,
                    lr,
                    loss,
                });
            }
            total += loss;

            let (params, tau) = model.params_mut();
            for ((p, g), v) in params.iter_mut().zip(&grads).zip(velocity.iter_mut()) {
                for ((w, gi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(v.iter_mut()) {
                    *vi = opts.momentum * *vi + gi;
                    *w -= lr * *vi;
                }
            }
            tau_velocity = opts.momentum * tau_velocity + tau_grad;
            let t = &mut tau.data_mut()[0];
            *t = (*t - lr * tau_velocity).clamp(TAU_MIN, TAU_MAX);
        }
        history.push(total / batches.len() as f64);
    }
    Ok(history)
}

/// Learning rate for `epoch`, decayed from `base` towards zero on a
/// half cosine.
pub fn cosine_lr(base: f64, epoch: usize, epochs: usize) -> f64 {
    base * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs as f64).cos())
}

fn plan_batches(
    order: &[usize],
    pairs: &[(&ImageInput, &TextInput)],
    batch_size: usize,
) -> Vec<Vec<usize>> {
    let mut queue: VecDeque<usize> = order.iter().copied().collect();
    let mut batches = Vec::new();
    loop {
        let mut batch = Vec::with_capacity(batch_size);
        let mut seen = HashSet::new();
        let mut deferred = Vec::new();
        while batch.len() < batch_size {
            let Some(i) = queue.pop_front() else { break };
            if seen.insert(pairs[i].1.tokens.as_slice()) {
                batch.push(i);
            } else {
                deferred.push(i);
            }
        }
        for i in deferred.into_iter().rev() {
            queue.push_front(i);
        }
        if batch.len() < batch_size {
            break;
        }
        batches.push(batch);
    }
    batches
}

/// Loss, parameter gradients and temperature gradient for one batch.
fn batch_gradients(
    model: &DualEncoderModel,
    pairs: &[(&ImageInput, &TextInput)],
    batch: &[usize],
) -> Result<(f64, Vec<Tensor>, f64)> {
    let side = model.image_side();
    let b = batch.len();
    let mut pixels = Vec::with_capacity(b * side * side);
    for &i in batch {
        pixels.extend_from_slice(pairs[i].0.pixels());
    }
    let texts: Vec<&TextInput> = batch.iter().map(|&i| pairs[i].1).collect();

    let mut tape = Tape::new();
    let vars = model.bind(&mut tape, true);
    let images = tape.constant(Tensor::from_parts(vec![b, side * side], pixels));
    let img_emb = model.vision_graph(&mut tape, &vars, images, b)?;
    let txt_emb = model.text_graph(&mut tape, &vars, &texts)?;
    let txt_t = tape.transpose(txt_emb)?;
    let cos = tape.matmul(img_emb, txt_t)?;
    let logits = tape.mul(vars.tau, cos)?;
    let logits_t = tape.transpose(logits)?;
    let diag: std::sync::Arc<[usize]> = (0..b).map(|i| i * b + i).collect();
    let mut terms = Vec::with_capacity(2);
    for l in [logits, logits_t] {
        let ls = tape.log_softmax_rows(l)?;
        let picked = tape.gather(ls, diag.clone(), vec![b])?;
        terms.push(tape.sum(picked)?);
    }
    let both = tape.add(terms[0], terms[1])?;
    let loss = tape.scale(both, -0.5 / b as f64)?;

    let loss_value = tape.value(loss).item();
    let mut grads = tape.backward(loss)?;
    let params = vars
        .params()
        .iter()
        .map(|&v| grads.take(v).expect("trainable leaf has a gradient"))
        .collect();
    let tau_grad = grads.take(vars.tau).expect("temperature gradient").item();
    Ok((loss_value, params, tau_grad))
}
