use rand::Rng;

use crate::error::{Error, Result};
use crate::feddata::Sample;
use crate::rng;

/// Model architecture. Parameters are one flat vector:
///
/// - `Logistic`: `W[C×D]` row-major, then `b[C]`.
/// - `Mlp`: `W1[H×D]`, `b1[H]`, `W2[C×H]`, `b2[C]`, with a tanh hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Logistic {
        num_classes: usize,
        feature_dim: usize,
    },
    Mlp {
        num_classes: usize,
        feature_dim: usize,
        hidden: usize,
    },
}

impl ModelKind {
    pub fn num_classes(&self) -> usize {
        match *self {
            ModelKind::Logistic { num_classes, .. } | ModelKind::Mlp { num_classes, .. } => {
                num_classes
            }
        }
    }

    pub fn feature_dim(&self) -> usize {
        match *self {
            ModelKind::Logistic { feature_dim, .. } | ModelKind::Mlp { feature_dim, .. } => {
                feature_dim
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            ModelKind::Logistic {
                num_classes: c,
                feature_dim: d,
            } => c * d + c,
            ModelKind::Mlp {
                num_classes: c,
                feature_dim: d,
                hidden: h,
            } => h * d + h + c * h + c,
        }
    }

    /// Bytes on the wire: 32-bit floats.
    pub fn byte_size(&self) -> u64 {
        4 * self.param_count() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    kind: ModelKind,
    params: Vec<f64>,
}

impl ModelState {
    pub fn from_params(kind: ModelKind, params: Vec<f64>) -> Result<Self> {
        if params.len() != kind.param_count() {
            return Err(Error::DimensionMismatch {
                expected: kind.param_count(),
                got: params.len(),
            });
        }
        Ok(Self { kind, params })
    }

    pub fn zeros(kind: ModelKind) -> Self {
        Self {
            kind,
            params: vec![0.0; kind.param_count()],
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn byte_size(&self) -> u64 {
        self.kind.byte_size()
    }

    pub fn predict(&self, x: &[f32]) -> u32 {
        let mut scratch = Scratch::new(self.kind);
        forward(self.kind, &self.params, x, &mut scratch);
        argmax(&scratch.logits)
    }
}

fn argmax(v: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best as u32
}

/// Scaled-uniform weights with bound `1/√fan_in`; zero biases.
pub fn init_model(kind: ModelKind, seed: u64) -> ModelState {
    let mut rng = rng::stream(seed, "model.init", 0, "");
    let mut params = vec![0.0; kind.param_count()];
    let mut fill = |slice: &mut [f64], fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for w in slice {
            *w = rng.random_range(-bound..bound);
        }
    };
    match kind {
        ModelKind::Logistic {
            num_classes: c,
            feature_dim: d,
        } => fill(&mut params[..c * d], d),
        ModelKind::Mlp {
            num_classes: c,
            feature_dim: d,
            hidden: h,
        } => {
            fill(&mut params[..h * d], d);
            let w2 = h * d + h;
            fill(&mut params[w2..w2 + c * h], h);
        }
    }
    ModelState { kind, params }
}

pub(crate) struct Scratch {
    hidden: Vec<f64>,
    logits: Vec<f64>,
    dlogits: Vec<f64>,
    dhidden: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(kind: ModelKind) -> Self {
        let h = match kind {
            ModelKind::Mlp { hidden, .. } => hidden,
            ModelKind::Logistic { .. } => 0,
        };
        let c = kind.num_classes();
        Self {
            hidden: vec![0.0; h],
            logits: vec![0.0; c],
            dlogits: vec![0.0; c],
            dhidden: vec![0.0; h],
        }
    }
}

fn affine(w: &[f64], b: &[f64], x: impl Fn(usize) -> f64, in_dim: usize, out: &mut [f64]) {
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(in_dim).zip(b)) {
        let mut acc = *bias;
        for (j, wj) in row.iter().enumerate() {
            acc += wj * x(j);
        }
        *o = acc;
    }
}

fn forward(kind: ModelKind, params: &[f64], x: &[f32], s: &mut Scratch) {
    match kind {
        ModelKind::Logistic {
            num_classes: c,
            feature_dim: d,
        } => {
            let (w, b) = params.split_at(c * d);
            affine(w, b, |j| f64::from(x[j]), d, &mut s.logits);
        }
        ModelKind::Mlp {
            num_classes: c,
            feature_dim: d,
            hidden: h,
        } => {
            let (w1, rest) = params.split_at(h * d);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(c * h);
            affine(w1, b1, |j| f64::from(x[j]), d, &mut s.hidden);
            s.hidden.iter_mut().for_each(|a| *a = a.tanh());
            let hidden = &s.hidden;
            affine(w2, b2, |j| hidden[j], h, &mut s.logits);
        }
    }
}

/// Adds `scale · ∇(−log softmax(x)_y)` into `grad`; returns the sample loss.
fn backward(
    kind: ModelKind,
    params: &[f64],
    sample: &Sample,
    scale: f64,
    grad: &mut [f64],
    s: &mut Scratch,
) -> f64 {
    let x = &sample.features;
    let y = sample.label as usize;
    forward(kind, params, x, s);
    let max = s.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = s.logits.iter().map(|z| (z - max).exp()).sum();
    let log_z = max + sum_exp.ln();
    let loss = log_z - s.logits[y];
    for (k, (dz, z)) in s.dlogits.iter_mut().zip(&s.logits).enumerate() {
        let p = (z - log_z).exp();
        *dz = scale * (p - f64::from(u8::from(k == y)));
    }
    match kind {
        ModelKind::Logistic {
            num_classes: c,
            feature_dim: d,
        } => {
            let (gw, gb) = grad.split_at_mut(c * d);
            for (k, &dz) in s.dlogits.iter().enumerate() {
                for (g, xj) in gw[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *g += dz * f64::from(*xj);
                }
                gb[k] += dz;
            }
        }
        ModelKind::Mlp {
            num_classes: c,
            feature_dim: d,
            hidden: h,
        } => {
            let w2 = &params[h * d + h..h * d + h + c * h];
            let (gw1, rest) = grad.split_at_mut(h * d);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(c * h);
            s.dhidden.iter_mut().for_each(|v| *v = 0.0);
            for (k, &dz) in s.dlogits.iter().enumerate() {
                let row = &w2[k * h..(k + 1) * h];
                for j in 0..h {
                    gw2[k * h + j] += dz * s.hidden[j];
                    s.dhidden[j] += dz * row[j];
                }
                gb2[k] += dz;
            }
            for j in 0..h {
                let da = s.dhidden[j] * (1.0 - s.hidden[j] * s.hidden[j]);
                for (g, xi) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *g += da * f64::from(*xi);
                }
                gb1[j] += da;
            }
        }
    }
    loss
}

/// Mean cross-entropy over `batch` and its gradient, accumulated into a
/// zeroed `grad`. Samples are visited in iteration order.
pub(crate) fn accumulate<'a>(
    kind: ModelKind,
    params: &[f64],
    batch: impl ExactSizeIterator<Item = &'a Sample>,
    grad: &mut [f64],
    scratch: &mut Scratch,
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for s in batch {
        loss += backward(kind, params, s, scale, grad, scratch);
    }
    loss * scale
}

pub(crate) fn check_batch(kind: ModelKind, batch: &[Sample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    for s in batch {
        if s.features.len() != kind.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: kind.feature_dim(),
                got: s.features.len(),
            });
        }
        if s.label as usize >= kind.num_classes() {
            return Err(Error::Invalid(format!("label {} out of range", s.label)));
        }
    }
    Ok(())
}

/// Mean cross-entropy over the batch and its exact gradient.
pub fn loss_and_grad(model: &ModelState, batch: &[Sample]) -> Result<(f64, Vec<f64>)> {
    check_batch(model.kind, batch)?;
    let mut grad = vec![0.0; model.params.len()];
    let mut scratch = Scratch::new(model.kind);
    let loss = accumulate(
        model.kind,
        &model.params,
        batch.iter(),
        &mut grad,
        &mut scratch,
    );
    Ok((loss, grad))
}
