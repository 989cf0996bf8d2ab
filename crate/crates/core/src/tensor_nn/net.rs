use crate::exec::Exec;
use crate::signal_store::ChannelMap;

use super::init::{kaiming_uniform, Rng};
use super::layers::{bce_loss, maxpool1d, maxpool1d_backward, out_len, relu_inplace, sigmoid, PROB_CLAMP};
use super::{Conv1d, Dense, PoolSpec, Result, Tensor1, TensorError};

/// Samples per partial gradient sum. The batch is cut into fixed chunks of
/// this size, each chunk is summed in sample order, and the chunk sums are
/// added in chunk order. The partition never depends on the thread count.
pub const REDUCTION_CHUNK: usize = 4;

/// One channel's conv stack: conv (+ReLU) layers, then max-pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvStack {
    pub channel: String,
    pub input_len: usize,
    pub convs: Vec<Conv1d>,
    pub pool: PoolSpec,
}

impl ConvStack {
    /// Lengths after each conv layer, then the pooled length.
    pub fn lengths(&self) -> Result<Vec<usize>> {
        let mut lens = Vec::with_capacity(self.convs.len() + 1);
        let mut len = self.input_len;
        for conv in &self.convs {
            len = out_len(len, conv.kernel, conv.stride)?;
            lens.push(len);
        }
        lens.push(out_len(len, self.pool.size, self.pool.stride)?);
        Ok(lens)
    }

    /// Flattened feature count this stack contributes to the head.
    pub fn feature_len(&self) -> Result<usize> {
        let pooled = *self.lengths()?.last().expect("pool length");
        let ch = self.convs.last().map_or(1, |c| c.out_channels);
        Ok(pooled * ch)
    }
}

/// Per-channel conv stacks whose pooled features are concatenated (in stack
/// order) and fed through dense layers. Hidden dense layers use ReLU; the
/// last layer has one output passed through a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub stacks: Vec<ConvStack>,
    pub head: Vec<Dense>,
}

/// Shape recipe for one stack, used by [`Network::init`].
#[derive(Debug, Clone, PartialEq)]
pub struct StackLayout {
    pub channel: String,
    pub input_len: usize,
    pub kernel: usize,
    pub filters: Vec<usize>,
    pub strides: Vec<usize>,
    pub pool: PoolSpec,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    // acts[0] is the input; acts[i + 1] the post-ReLU output of conv i.
    stack_acts: Vec<Vec<Tensor1>>,
    stack_argmax: Vec<Vec<usize>>,
    // head_in[0] is the concatenated feature vector; head_in[i] the
    // post-ReLU output of dense i - 1.
    head_in: Vec<Vec<f64>>,
    logit: f64,
    prob: f64,
}

impl ForwardCache {
    pub fn probability(&self) -> f64 {
        self.prob
    }

    pub fn logit(&self) -> f64 {
        self.logit
    }

    /// ReLU on/off bits and pool winners. Two inputs with equal patterns lie
    /// in the same linear region of the network.
    pub fn activation_pattern(&self) -> Vec<usize> {
        let mut p = Vec::new();
        for (acts, argmax) in self.stack_acts.iter().zip(&self.stack_argmax) {
            for a in &acts[1..] {
                p.extend(a.data().iter().map(|&v| (v > 0.0) as usize));
            }
            p.extend_from_slice(argmax);
        }
        for h in &self.head_in[1..] {
            p.extend(h.iter().map(|&v| (v > 0.0) as usize));
        }
        p
    }
}

/// Parameter gradients in [`Network::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub tensors: Vec<Vec<f64>>,
}

impl LayerGrads {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            tensors: net.params().iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for t in &mut self.tensors {
            t.fill(0.0);
        }
    }

    pub fn add_assign(&mut self, other: &LayerGrads) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            for x in t {
                *x *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|x| x.is_finite())
    }

    fn pair_mut(&mut self, idx: usize) -> (&mut [f64], &mut [f64]) {
        let (left, right) = self.tensors.split_at_mut(idx + 1);
        (&mut left[idx], &mut right[0])
    }
}

impl Network {
    /// Build a network with Kaiming-uniform weights and zero biases.
    pub fn init(stacks: &[StackLayout], hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let relu_gain = std::f64::consts::SQRT_2;
        let mut built = Vec::with_capacity(stacks.len());
        for layout in stacks {
            if layout.filters.len() != layout.strides.len() {
                return Err(TensorError::Shape {
                    op: "init",
                    detail: format!("{}: filters and strides differ in length", layout.channel),
                });
            }
            let mut in_ch = 1;
            let mut convs = Vec::with_capacity(layout.filters.len());
            for (&out_ch, &stride) in layout.filters.iter().zip(&layout.strides) {
                let mut conv = Conv1d::zeros(in_ch, out_ch, layout.kernel, stride);
                let fan_in = in_ch * layout.kernel;
                conv.weight = kaiming_uniform(rng, fan_in, conv.weight.len(), relu_gain);
                convs.push(conv);
                in_ch = out_ch;
            }
            built.push(ConvStack {
                channel: layout.channel.clone(),
                input_len: layout.input_len,
                convs,
                pool: layout.pool,
            });
        }
        let mut width = built
            .iter()
            .map(ConvStack::feature_len)
            .sum::<Result<usize>>()?;
        let mut head = Vec::with_capacity(hidden.len() + 1);
        for &units in hidden {
            let mut d = Dense::zeros(width, units);
            d.weight = kaiming_uniform(rng, width, d.weight.len(), relu_gain);
            head.push(d);
            width = units;
        }
        let mut out = Dense::zeros(width, 1);
        out.weight = kaiming_uniform(rng, width, out.weight.len(), 1.0);
        head.push(out);
        let net = Self { stacks: built, head };
        net.validate()?;
        Ok(net)
    }

    /// Check that every layer's shape matches its neighbours.
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| TensorError::Shape { op: "network", detail };
        let mut features = 0;
        for stack in &self.stacks {
            let mut in_ch = 1;
            for (i, conv) in stack.convs.iter().enumerate() {
                if conv.in_channels != in_ch
                    || conv.weight.len() != conv.out_channels * conv.in_channels * conv.kernel
                    || conv.bias.len() != conv.out_channels
                {
                    return Err(bad(format!("{} conv{i} has inconsistent shape", stack.channel)));
                }
                in_ch = conv.out_channels;
            }
            features += stack.feature_len()?;
        }
        let mut width = features;
        for (i, d) in self.head.iter().enumerate() {
            if d.in_dim != width || d.weight.len() != d.in_dim * d.out_dim || d.bias.len() != d.out_dim {
                return Err(bad(format!("head dense{i} has inconsistent shape")));
            }
            width = d.out_dim;
        }
        if self.head.is_empty() || width != 1 {
            return Err(bad("head must end in a single output unit".into()));
        }
        Ok(())
    }

    /// Total concatenated feature length entering the head.
    pub fn feature_len(&self) -> Result<usize> {
        self.stacks.iter().map(ConvStack::feature_len).sum()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for s in &self.stacks {
            for c in &s.convs {
                out.push(&c.weight);
                out.push(&c.bias);
            }
        }
        for d in &self.head {
            out.push(&d.weight);
            out.push(&d.bias);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for s in &mut self.stacks {
            for c in &mut s.convs {
                out.push(&mut c.weight);
                out.push(&mut c.bias);
            }
        }
        for d in &mut self.head {
            out.push(&mut d.weight);
            out.push(&mut d.bias);
        }
        out
    }

    /// Names and shapes in [`Network::params`] order.
    pub fn param_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for s in &self.stacks {
            for (i, c) in s.convs.iter().enumerate() {
                out.push((format!("{}.conv{i}.weight", s.channel), c.weight_shape().to_vec()));
                out.push((format!("{}.conv{i}.bias", s.channel), vec![c.out_channels]));
            }
        }
        for (i, d) in self.head.iter().enumerate() {
            out.push((format!("head.dense{i}.weight"), vec![d.out_dim, d.in_dim]));
            out.push((format!("head.dense{i}.bias"), vec![d.out_dim]));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn forward(&self, input: &ChannelMap) -> Result<f64> {
        Ok(self.forward_cached(input)?.prob)
    }

    pub fn forward_cached(&self, input: &ChannelMap) -> Result<ForwardCache> {
        let mut stack_acts = Vec::with_capacity(self.stacks.len());
        let mut stack_argmax = Vec::with_capacity(self.stacks.len());
        let mut features = Vec::new();
        for stack in &self.stacks {
            let xs = input
                .get(&stack.channel)
                .ok_or_else(|| TensorError::MissingChannel(stack.channel.clone()))?;
            if xs.len() != stack.input_len {
                return Err(TensorError::Shape {
                    op: "forward",
                    detail: format!(
                        "channel {} has {} samples, network expects {}",
                        stack.channel,
                        xs.len(),
                        stack.input_len
                    ),
                });
            }
            let mut acts = Vec::with_capacity(stack.convs.len() + 1);
            acts.push(Tensor1::from_row(xs.clone())?);
            for conv in &stack.convs {
                let mut y = conv.forward(acts.last().expect("input"))?;
                relu_inplace(y.data_mut());
                acts.push(y);
            }
            let (pooled, argmax) = maxpool1d(acts.last().expect("act"), stack.pool.size, stack.pool.stride)?;
            features.extend_from_slice(pooled.data());
            stack_acts.push(acts);
            stack_argmax.push(argmax);
        }

        let mut head_in = Vec::with_capacity(self.head.len());
        head_in.push(features);
        let last = self.head.len() - 1;
        let mut logit = 0.0;
        for (i, dense) in self.head.iter().enumerate() {
            let mut y = dense.forward(head_in.last().expect("head input"))?;
            if i == last {
                logit = y[0];
            } else {
                relu_inplace(&mut y);
                head_in.push(y);
            }
        }
        Ok(ForwardCache {
            stack_acts,
            stack_argmax,
            head_in,
            logit,
            prob: sigmoid(logit),
        })
    }

    /// Accumulate `d BCE / d params` for one cached sample into `grads`.
    /// Returns that sample's loss.
    pub fn backward(&self, cache: &ForwardCache, target: f64, grads: &mut LayerGrads) -> Result<f64> {
        if cache.stack_acts.len() != self.stacks.len()
            || cache.head_in.len() != self.head.len()
            || grads.tensors.len() != 2 * (self.head.len() + self.stacks.iter().map(|s| s.convs.len()).sum::<usize>())
        {
            return Err(TensorError::MissingCache);
        }
        let (loss, _) = bce_loss(cache.prob, target);
        // sigmoid + BCE collapse to p - y; zero inside the clamped tails
        let dlogit = if cache.prob < PROB_CLAMP || cache.prob > 1.0 - PROB_CLAMP {
            0.0
        } else {
            cache.prob - target
        };

        let conv_tensors: usize = 2 * self.stacks.iter().map(|s| s.convs.len()).sum::<usize>();
        let mut g = vec![dlogit];
        for (i, dense) in self.head.iter().enumerate().rev() {
            let x = &cache.head_in[i];
            let (dw, db) = grads.pair_mut(conv_tensors + 2 * i);
            let mut dx = dense
                .backward(x, &g, dw, db, true)
                .expect("input grad requested");
            if i > 0 {
                for (d, &a) in dx.iter_mut().zip(x) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            g = dx;
        }

        let mut offset = 0;
        let mut tensor_idx = 0;
        for ((stack, acts), argmax) in self.stacks.iter().zip(&cache.stack_acts).zip(&cache.stack_argmax) {
            let top = acts.last().expect("act");
            let pooled_len = argmax.len() / top.channels();
            let n = pooled_len * top.channels();
            let gpool = Tensor1::from_parts_unchecked(top.channels(), pooled_len, g[offset..offset + n].to_vec());
            offset += n;
            let mut gact = maxpool1d_backward(&gpool, argmax, top.len());
            let first_idx = tensor_idx;
            tensor_idx += 2 * stack.convs.len();
            for (layer, conv) in stack.convs.iter().enumerate().rev() {
                let out = &acts[layer + 1];
                for (d, &a) in gact.data_mut().iter_mut().zip(out.data()) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
                let (dw, db) = grads.pair_mut(first_idx + 2 * layer);
                match conv.backward(&acts[layer], &gact, dw, db, layer > 0) {
                    Some(dx) => gact = dx,
                    None => break,
                }
            }
        }
        Ok(loss)
    }

    /// Mean BCE and its gradient over a batch of `(input, target)` pairs.
    ///
    /// Per-sample work may run on worker threads; the reduction order is
    /// fixed by [`REDUCTION_CHUNK`], so `exec` never changes the result.
    pub fn batch_gradients(&self, batch: &[(&ChannelMap, f64)], exec: Exec) -> Result<(f64, LayerGrads)> {
        if batch.is_empty() {
            return Err(TensorError::Shape {
                op: "batch_gradients",
                detail: "empty batch".into(),
            });
        }
        let chunks: Vec<&[(&ChannelMap, f64)]> = batch.chunks(REDUCTION_CHUNK).collect();
        let partials = exec.map(&chunks, |chunk| -> Result<(f64, LayerGrads)> {
            let mut grads = LayerGrads::zeros_like(self);
            let mut loss = 0.0;
            for (input, target) in chunk.iter() {
                let cache = self.forward_cached(input)?;
                loss += self.backward(&cache, *target, &mut grads)?;
            }
            Ok((loss, grads))
        });
        let mut iter = partials.into_iter();
        let (mut loss, mut grads) = iter.next().expect("non-empty batch")?;
        for part in iter {
            let (l, g) = part?;
            loss += l;
            grads.add_assign(&g);
        }
        let scale = 1.0 / batch.len() as f64;
        grads.scale(scale);
        if !grads.is_finite() {
            return Err(TensorError::NonFinite("backward"));
        }
        Ok((loss * scale, grads))
    }

    /// Mean BCE over a batch without gradients.
    pub fn batch_loss(&self, batch: &[(&ChannelMap, f64)], exec: Exec) -> Result<f64> {
        let losses = exec.map(batch, |(x, y)| self.forward(x).map(|p| bce_loss(p, *y).0));
        let mut total = 0.0;
        for l in losses {
            total += l?;
        }
        Ok(total / batch.len().max(1) as f64)
    }

    pub fn predict_batch(&self, inputs: &[&ChannelMap], exec: Exec) -> Result<Vec<f64>> {
        exec.map(inputs, |x| self.forward(x)).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::seeded_rng;
    use super::*;

    fn tiny(rng: &mut Rng) -> Network {
        let stacks = vec![
            StackLayout {
                channel: "a".into(),
                input_len: 24,
                kernel: 3,
                filters: vec![2, 3, 2],
                strides: vec![2, 1, 1],
                pool: PoolSpec { size: 2, stride: 2 },
            },
            StackLayout {
                channel: "b".into(),
                input_len: 12,
                kernel: 3,
                filters: vec![2, 3, 2],
                strides: vec![1, 1, 1],
                pool: PoolSpec { size: 2, stride: 2 },
            },
        ];
        Network::init(&stacks, &[5], rng).unwrap()
    }

    fn input(rng: &mut Rng) -> ChannelMap {
        use rand::Rng as _;
        let mut m = ChannelMap::new();
        m.insert("a".into(), (0..24).map(|_| rng.random_range(-1.0..1.0)).collect());
        m.insert("b".into(), (0..12).map(|_| rng.random_range(-1.0..1.0)).collect());
        m
    }

    #[test]
    fn zero_final_layer_kills_upstream_grads() {
        let mut rng = seeded_rng(3);
        let mut net = tiny(&mut rng);
        let last = net.head.len() - 1;
        net.head[last].weight.fill(0.0);
        let x = input(&mut rng);
        let (_, grads) = net.batch_gradients(&[(&x, 1.0)], Exec::Sequential).unwrap();
        let conv_tensors = 2 * net.stacks.iter().map(|s| s.convs.len()).sum::<usize>();
        for t in &grads.tensors[..conv_tensors] {
            assert!(t.iter().all(|&g| g == 0.0));
        }
        // the output bias still sees p - y
        assert!(grads.tensors.last().unwrap()[0] != 0.0);
    }

    #[test]
    fn duplicated_sample_matches_single() {
        let mut rng = seeded_rng(5);
        let net = tiny(&mut rng);
        let x = input(&mut rng);
        let (l1, g1) = net.batch_gradients(&[(&x, 1.0)], Exec::Sequential).unwrap();
        let (l2, g2) = net.batch_gradients(&[(&x, 1.0), (&x, 1.0)], Exec::Sequential).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn exec_modes_agree_bitwise() {
        let mut rng = seeded_rng(11);
        let net = tiny(&mut rng);
        let xs: Vec<ChannelMap> = (0..13).map(|_| input(&mut rng)).collect();
        let batch: Vec<(&ChannelMap, f64)> = xs.iter().enumerate().map(|(i, x)| (x, (i % 2) as f64)).collect();
        let seq = net.batch_gradients(&batch, Exec::Sequential).unwrap();
        let par = net.batch_gradients(&batch, Exec::Parallel).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn missing_channel_and_bad_length() {
        let mut rng = seeded_rng(1);
        let net = tiny(&mut rng);
        let mut x = input(&mut rng);
        x.remove("b");
        assert_eq!(net.forward(&x), Err(TensorError::MissingChannel("b".into())));
        let mut x = input(&mut rng);
        x.get_mut("a").unwrap().pop();
        assert!(matches!(net.forward(&x), Err(TensorError::Shape { .. })));
    }

    #[test]
    fn foreign_cache_rejected() {
        let mut rng = seeded_rng(1);
        let net = tiny(&mut rng);
        let x = input(&mut rng);
        let cache = net.forward_cached(&x).unwrap();
        let mut other = net.clone();
        other.stacks.pop();
        let mut grads = LayerGrads::zeros_like(&other);
        assert_eq!(other.backward(&cache, 1.0, &mut grads), Err(TensorError::MissingCache));
    }
}
