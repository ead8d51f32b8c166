//! A two-stage convolutional classifier whose downsampling blocks are the
//! pooling method under test: `[conv3x3 -> ReLU -> pool] x stages -> dense`.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::math;
use crate::nn;
use crate::params::{Grads, ParamEntry, ParamId, ParamStore};
use crate::pool::{ops, Method, PoolBlock, PoolSpec};
use crate::tensor::{Tensor, WindowSpec};

/// Initial LNP exponent.
pub const LNP_INITIAL_P: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToyNetConfig {
    /// Input `(channels, height, width)`.
    pub input: (usize, usize, usize),
    /// Output channels of the convolution in front of each pooling block.
    pub stage_channels: Vec<usize>,
    pub method: Method,
    pub classes: usize,
    pub se_ratio: usize,
    /// Fixed sharpness of LSE blocks.
    pub lse_r: f64,
}

impl ToyNetConfig {
    /// `1 x 16 x 16` input, stages of 8 and 16 channels, 4 classes, SE ratio 4.
    pub fn new(method: Method) -> Self {
        Self { input: (1, 16, 16), stage_channels: vec![8, 16], method, classes: 4, se_ratio: 4, lse_r: 1.0 }
    }
}

#[derive(Debug, Clone)]
struct Stage {
    in_c: usize,
    out_c: usize,
    h: usize,
    w: usize,
    conv_w: ParamId,
    conv_b: ParamId,
    pool: PoolBlock,
    pool_slots: Vec<ParamId>,
}

#[derive(Debug, Clone)]
pub struct ToyNet {
    config: ToyNetConfig,
    stages: Vec<Stage>,
    head_w: ParamId,
    head_b: ParamId,
    features: usize,
    param_count: usize,
}

/// Mean loss, accuracy and mean gradient over a batch.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub loss: f64,
    pub accuracy: f64,
    pub grads: Grads,
}

struct Trace {
    /// Per stage: input, conv pre-activation, post-ReLU.
    stages: Vec<(Vec<f64>, Vec<f64>, Tensor)>,
    features: Vec<f64>,
    logits: Vec<f64>,
}

impl ToyNet {
    pub fn new(config: ToyNetConfig) -> Result<Self> {
        let (mut c, mut h, mut w) = config.input;
        if c == 0 || config.classes < 2 || config.stage_channels.is_empty() {
            return Err(Error::Config("network needs input channels, >= 2 classes and a stage".into()));
        }
        let mut next = 0;
        let mut id = || {
            next += 1;
            ParamId(next - 1)
        };
        let mut stages = Vec::new();
        for &out_c in &config.stage_channels {
            if h % 2 != 0 || w % 2 != 0 || h < 2 || w < 2 {
                return Err(Error::Config(format!("pooling stage needs even spatial size, got {h}x{w}")));
            }
            let pool = PoolBlock::new(PoolSpec::new(config.method, WindowSpec::halving(), out_c)?, config.se_ratio)?;
            let conv_w = id();
            let conv_b = id();
            let pool_slots = pool.layout().iter().map(|_| id()).collect();
            stages.push(Stage { in_c: c, out_c, h, w, conv_w, conv_b, pool, pool_slots });
            c = out_c;
            h /= 2;
            w /= 2;
        }
        let head_w = id();
        let head_b = id();
        let param_count = next;
        Ok(Self { config, stages, head_w, head_b, features: c * h * w, param_count })
    }

    pub fn config(&self) -> &ToyNetConfig {
        &self.config
    }

    pub fn method(&self) -> Method {
        self.config.method
    }

    pub fn pool_blocks(&self) -> usize {
        self.stages.len()
    }

    /// He-normal convolutions, `N(0, 0.01^2)` head, zero biases, and the
    /// method-specific pooling initialisation. Same seed, same parameters.
    pub fn init_weights(&self, seed: u64) -> Result<ParamStore> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let entry = |name: &str, block, values, trainable, simplex| ParamEntry {
            name: name.to_string(),
            block,
            values,
            trainable,
            simplex,
        };
        for (b, st) in self.stages.iter().enumerate() {
            let fan_in = (st.in_c * 9) as f64;
            let he = Normal::new(0.0, math::sqrt(2.0 / fan_in)).map_err(|e| Error::Param(e.to_string()))?;
            let cw = (0..st.out_c * st.in_c * 9).map(|_| he.sample(&mut rng)).collect();
            store.push(entry("conv_w", None, cw, true, false));
            store.push(entry("conv_b", None, vec![0.0; st.out_c], true, false));
            let n = st.pool.spec.window.len();
            let channels = st.out_c;
            for shape in st.pool.layout() {
                let values = match (self.config.method, shape.name) {
                    (Method::Conv, _) | (Method::Op, _) => vec![1.0 / n as f64; n],
                    (Method::Gp, _) => vec![0.0; n],
                    (Method::Lnp, _) => vec![ops::lnp_p_tilde(LNP_INITIAL_P)?],
                    (Method::Lse, _) => vec![self.config.lse_r],
                    (Method::SmpFixed, _) => ops::smp_fixed_init(channels)?,
                    (Method::Smp, _) => (0..channels).map(|_| StandardNormal.sample(&mut rng)).collect(),
                    (_, "se_f1_w") => kaiming_uniform(&mut rng, shape.len, channels)?,
                    (_, "se_f2_w") => kaiming_uniform(&mut rng, shape.len, channels / st.pool.se_ratio)?,
                    _ => vec![0.0; shape.len],
                };
                store.push(entry(shape.name, Some(b), values, shape.trainable, shape.simplex));
            }
        }
        let head = Normal::new(0.0, 0.01).map_err(|e| Error::Param(e.to_string()))?;
        let hw = (0..self.config.classes * self.features).map(|_| head.sample(&mut rng)).collect();
        store.push(entry("head_w", None, hw, true, false));
        store.push(entry("head_b", None, vec![0.0; self.config.classes], true, false));
        debug_assert_eq!(store.len(), self.param_count);
        Ok(store)
    }

    fn check_store(&self, params: &ParamStore) -> Result<()> {
        if params.len() != self.param_count {
            return Err(Error::Shape(format!(
                "parameter store has {} entries, network expects {}",
                params.len(),
                self.param_count
            )));
        }
        Ok(())
    }

    fn trace(&self, params: &ParamStore, image: &Tensor) -> Result<Trace> {
        let (c, h, w) = image.dims3()?;
        if (c, h, w) != self.config.input {
            return Err(Error::Shape(format!("image is {c}x{h}x{w}, expected {:?}", self.config.input)));
        }
        let mut x = image.data().to_vec();
        let mut stages = Vec::with_capacity(self.stages.len());
        for st in &self.stages {
            let pre = nn::conv3x3_forward(&x, st.in_c, st.h, st.w, params.get(st.conv_w), params.get(st.conv_b));
            let act = Tensor::new(vec![st.out_c, st.h, st.w], nn::relu(&pre))?;
            let slots: Vec<&[f64]> = st.pool_slots.iter().map(|&id| params.get(id)).collect();
            let pooled = st.pool.forward(&act, &st.pool.bind(&slots)?)?;
            stages.push((x, pre, act));
            x = pooled.into_data();
        }
        let logits = nn::dense_forward(&x, params.get(self.head_w), params.get(self.head_b));
        Ok(Trace { stages, features: x, logits })
    }

    pub fn logits(&self, params: &ParamStore, image: &Tensor) -> Result<Vec<f64>> {
        self.check_store(params)?;
        Ok(self.trace(params, image)?.logits)
    }

    /// Mean loss and accuracy over `(image, label)` pairs, without gradients.
    pub fn evaluate<'a, I>(&self, params: &ParamStore, samples: I) -> Result<(f64, f64)>
    where
        I: IntoIterator<Item = (&'a Tensor, usize)>,
    {
        self.check_store(params)?;
        let (mut loss, mut hits, mut n) = (0.0, 0usize, 0usize);
        for (image, label) in samples {
            let logits = self.trace(params, image)?.logits;
            loss += nn::softmax_cross_entropy(&logits, label).0;
            hits += usize::from(math::argmax(&logits) == label);
            n += 1;
        }
        if n == 0 {
            return Err(Error::Shape("empty evaluation set".into()));
        }
        Ok((loss / n as f64, hits as f64 / n as f64))
    }

    /// Loss, accuracy and gradient of the mean softmax cross-entropy over the batch.
    pub fn forward_backward<'a, I>(&self, params: &ParamStore, batch: I) -> Result<BatchResult>
    where
        I: IntoIterator<Item = (&'a Tensor, usize)>,
    {
        self.check_store(params)?;
        let mut grads = params.zero_grads();
        let (mut loss, mut hits, mut n) = (0.0, 0usize, 0usize);
        for (image, label) in batch {
            if label >= self.config.classes {
                return Err(Error::Shape(format!("label {label} outside {} classes", self.config.classes)));
            }
            let trace = self.trace(params, image)?;
            let (l, d_logits) = nn::softmax_cross_entropy(&trace.logits, label);
            if !l.is_finite() {
                return Err(Error::NonFinite(format!("loss {l}")));
            }
            loss += l;
            hits += usize::from(math::argmax(&trace.logits) == label);
            n += 1;

            let (dw, db) = two_mut(&mut grads, self.head_w, self.head_b);
            let mut d = nn::dense_backward(&trace.features, params.get(self.head_w), &d_logits, dw, db);
            for (st, (input, pre, act)) in self.stages.iter().zip(&trace.stages).rev() {
                let slots: Vec<&[f64]> = st.pool_slots.iter().map(|&id| params.get(id)).collect();
                let dy = Tensor::new(vec![st.out_c, st.h / 2, st.w / 2], d)?;
                let (dx, dslots) = st.pool.backward(act, &st.pool.bind(&slots)?, &dy)?;
                for (&id, ds) in st.pool_slots.iter().zip(dslots) {
                    for (a, b) in grads.get_mut(id).iter_mut().zip(ds) {
                        *a += b;
                    }
                }
                let mut d_pre = dx.into_data();
                nn::relu_backward(pre, &mut d_pre);
                let (dw, db) = two_mut(&mut grads, st.conv_w, st.conv_b);
                d = nn::conv3x3_backward(input, st.in_c, st.h, st.w, params.get(st.conv_w), &d_pre, dw, db);
            }
        }
        if n == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        grads.scale(1.0 / n as f64);
        Ok(BatchResult { loss: loss / n as f64, accuracy: hits as f64 / n as f64, grads })
    }
}

fn two_mut(grads: &mut Grads, a: ParamId, b: ParamId) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a.0 < b.0);
    let (lo, hi) = grads.0.split_at_mut(b.0);
    (&mut lo[a.0], &mut hi[0])
}

fn kaiming_uniform<R: Rng + ?Sized>(rng: &mut R, len: usize, fan_in: usize) -> Result<Vec<f64>> {
    let bound = math::sqrt(6.0 / fan_in as f64);
    let dist = Uniform::new(-bound, bound).map_err(|e| Error::Param(e.to_string()))?;
    Ok((0..len).map(|_| dist.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_resolutions() {
        let mut cfg = ToyNetConfig::new(Method::Mp);
        cfg.input = (1, 6, 6);
        assert!(ToyNet::new(cfg).is_err());
        let mut cfg = ToyNetConfig::new(Method::Sesmp);
        cfg.se_ratio = 3;
        assert!(ToyNet::new(cfg).is_err());
    }

    #[test]
    fn initialisation_is_seeded() {
        let net = ToyNet::new(ToyNetConfig::new(Method::Smp)).unwrap();
        assert_eq!(net.init_weights(5).unwrap(), net.init_weights(5).unwrap());
        assert_ne!(net.init_weights(5).unwrap(), net.init_weights(6).unwrap());
    }

    #[test]
    fn pooling_initialisation() {
        let lnp = ToyNet::new(ToyNetConfig::new(Method::Lnp)).unwrap().init_weights(1).unwrap();
        let p = lnp.entries().iter().find(|e| e.name == "p_tilde").unwrap();
        assert!((p.values[0] - 1.854586542131141).abs() < 1e-12);
        assert!((ops::lnp_exponent(p.values[0]) - 3.0).abs() < 1e-12);

        let mut cfg = ToyNetConfig::new(Method::SmpFixed);
        cfg.stage_channels = vec![4, 4];
        let fixed = ToyNet::new(cfg).unwrap().init_weights(1).unwrap();
        let tau = fixed.entries().iter().find(|e| e.name == "tau").unwrap();
        assert!(!tau.trainable);
        assert_eq!(tau.values, ops::smp_fixed_init(4).unwrap());

        let op = ToyNet::new(ToyNetConfig::new(Method::Op)).unwrap().init_weights(1).unwrap();
        let w = op.entries().iter().find(|e| e.name == "ordinal_w").unwrap();
        assert_eq!(w.values, vec![0.25; 4]);
        assert!(w.simplex);
    }

    #[test]
    fn he_normal_scale() {
        let mut cfg = ToyNetConfig::new(Method::Mp);
        cfg.input = (16, 16, 16);
        cfg.stage_channels = vec![64, 8];
        let store = ToyNet::new(cfg).unwrap().init_weights(3).unwrap();
        let w = &store.entries()[0].values;
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        let expected = 2.0 / (16.0 * 9.0);
        assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    }

    #[test]
    fn zero_head_gives_log_k_loss() {
        let net = ToyNet::new(ToyNetConfig::new(Method::Ap)).unwrap();
        let mut params = net.init_weights(2).unwrap();
        params.get_mut(net.head_w).iter_mut().for_each(|v| *v = 0.0);
        let image = Tensor::from_fn(vec![1, 16, 16], |k| (k % 7) as f64 / 7.0).unwrap();
        let out = net.forward_backward(&params, [(&image, 1)]).unwrap();
        assert_eq!(out.loss, math::ln(4.0));
    }
}
