use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use super::layers::*;
use super::params::ParamStore;
use super::{receptive_field, Fusion, NnetError, TcnConfig};
use crate::dsp::FeatureSequence;
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy)]
struct BnIds {
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
}

#[derive(Debug, Clone, Copy)]
struct DenseIds {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct BlockIds {
    pw1: DenseIds,
    a1: usize,
    bn1: BnIds,
    dw: DenseIds,
    a2: usize,
    bn2: BnIds,
    pw2: DenseIds,
    dilation: usize,
}

#[derive(Debug, Clone)]
struct Arch {
    bn_y: BnIds,
    bn_r: Option<BnIds>,
    init: DenseIds,
    blocks: Vec<BlockIds>,
    fuse: Option<DenseIds>,
    head: DenseIds,
}

/// Post-encoder representation, `T x D`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSequence {
    pub values: Array2<f64>,
}

/// One minibatch of equal-length sequences. Row `s * frames + i` of `x_y`
/// and `x_r` is frame `i` of example `s`. Reference rows of examples whose
/// `playback` flag is false are ignored.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x_y: Array2<f64>,
    pub x_r: Option<Array2<f64>>,
    pub playback: Vec<bool>,
    pub frames: usize,
    /// Optional 0/1 masks applied after the input batch norms.
    pub mask_y: Option<Array2<f64>>,
    pub mask_r: Option<Array2<f64>>,
}

impl Batch {
    pub fn new(x_y: Array2<f64>, x_r: Option<Array2<f64>>, playback: Vec<bool>, frames: usize) -> Self {
        Self {
            x_y,
            x_r,
            playback,
            frames,
            mask_y: None,
            mask_r: None,
        }
    }

    /// Stacks feature sequences that already share a length.
    pub fn from_sequences(
        mixtures: &[&FeatureSequence],
        references: &[Option<&FeatureSequence>],
    ) -> Result<Self, NnetError> {
        let frames = mixtures.first().map(|m| m.n_frames()).unwrap_or(0);
        if mixtures.len() != references.len() {
            return Err(NnetError::Shape("one reference slot per mixture".into()));
        }
        let width = mixtures.first().map(|m| m.n_features()).unwrap_or(0);
        let mut x_y = Array2::zeros((mixtures.len() * frames, width));
        let mut x_r = Array2::zeros((mixtures.len() * frames, width));
        let mut playback = Vec::with_capacity(mixtures.len());
        for (s, (m, r)) in mixtures.iter().zip(references).enumerate() {
            if m.n_frames() != frames || m.n_features() != width {
                return Err(NnetError::Shape("mixtures differ in shape".into()));
            }
            x_y.slice_mut(s![s * frames..(s + 1) * frames, ..]).assign(m.values());
            if let Some(r) = r {
                if r.n_frames() != frames || r.n_features() != width {
                    return Err(NnetError::Shape("reference differs from mixture shape".into()));
                }
                x_r.slice_mut(s![s * frames..(s + 1) * frames, ..]).assign(r.values());
            }
            playback.push(r.is_some());
        }
        let any = playback.iter().any(|p| *p);
        Ok(Self::new(x_y, any.then_some(x_r), playback, frames))
    }

    pub fn n_seq(&self) -> usize {
        self.playback.len()
    }
}

#[derive(Debug, Clone)]
struct BlockCache {
    x: Array2<f64>,
    h1: Array2<f64>,
    bn1: BnCache,
    b1: Array2<f64>,
    h2: Array2<f64>,
    bn2: BnCache,
    b2: Array2<f64>,
    n_seq: usize,
    t: usize,
}

#[derive(Debug, Clone)]
struct RefCache {
    /// Examples whose reference went through the reference batch norm.
    play: Vec<usize>,
    /// Examples whose reference was replaced by the batch-norm shift.
    substituted: Vec<usize>,
    bn_r: Option<BnCache>,
    mask_r: Option<Array2<f64>>,
}

#[derive(Debug, Clone)]
enum FuseCache {
    Concat {
        input: Array2<f64>,
    },
    Mask {
        play: Vec<usize>,
        zy_play: Array2<f64>,
        input: Array2<f64>,
        gate: Array2<f64>,
    },
    Skipped,
}

/// Intermediate values of one forward pass, consumed by
/// [`TcnModel::backward`] and the batch-norm statistic updates.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    train: bool,
    n: usize,
    t: usize,
    t_out: usize,
    bn_y: BnCache,
    mask_y: Option<Array2<f64>>,
    reference: Option<RefCache>,
    enc_seqs: usize,
    conv_cols: Array2<f64>,
    conv_cin: usize,
    blocks: Vec<BlockCache>,
    fuse: Option<FuseCache>,
    latent: Array2<f64>,
    head_in: Array2<f64>,
    pool_idx: Vec<usize>,
}

impl ForwardCache {
    /// Latent after fusion (or after the encoder stage for non-fused modes).
    pub fn fused_latent(&self) -> LatentSequence {
        LatentSequence {
            values: self.latent.clone(),
        }
    }

    pub fn output_frames(&self) -> usize {
        self.t_out
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `(n_seq * t_out) x C` per-frame logits.
    pub frame_logits: Array2<f64>,
    /// `n_seq x C` max-pooled logits.
    pub pooled: Array2<f64>,
    pub t_out: usize,
}

/// Per-class maximum over time of a `T' x C` logit sequence.
pub fn max_pool_logits(frame_logits: &Array2<f64>) -> Array1<f64> {
    let t = frame_logits.nrows();
    let (p, _) = maxpool_forward(frame_logits.view(), 1, t);
    p.row(0).to_owned()
}

#[derive(Debug, Clone)]
pub struct TcnModel {
    config: TcnConfig,
    arch: Arch,
    params: ParamStore,
}

fn uniform(rng: &mut impl Rng, shape: (usize, usize), bound: f64) -> Array2<f64> {
    Array2::from_shape_fn(shape, |_| rng.random_range(-bound..bound))
}

fn add_bn(store: &mut ParamStore, name: &str, ch: usize) -> BnIds {
    BnIds {
        gamma: store.add(format!("{name}.gamma"), Array2::ones((1, ch)), true),
        beta: store.add(format!("{name}.beta"), Array2::zeros((1, ch)), true),
        mean: store.add(format!("{name}.running_mean"), Array2::zeros((1, ch)), false),
        var: store.add(format!("{name}.running_var"), Array2::ones((1, ch)), false),
    }
}

fn add_dense(
    store: &mut ParamStore,
    rng: &mut impl Rng,
    name: &str,
    fan_in: usize,
    rows: usize,
    cols: usize,
) -> DenseIds {
    let bound = 1.0 / (fan_in as f64).sqrt();
    DenseIds {
        w: store.add(format!("{name}.w"), uniform(rng, (rows, cols), bound), true),
        b: store.add(format!("{name}.b"), uniform(rng, (1, cols), bound), true),
    }
}

fn acc(grads: &mut [Array2<f64>], id: usize, g: &Array2<f64>) {
    grads[id] += g;
}

fn acc_row(grads: &mut [Array2<f64>], id: usize, g: &Array1<f64>) {
    let mut row = grads[id].row_mut(0);
    row += g;
}

impl TcnModel {
    pub fn new(config: TcnConfig, seed: u64) -> Result<Self, NnetError> {
        config.validate()?;
        let mut rng = rng_for(seed, &[0x1417]);
        let mut store = ParamStore::new();
        let (f, d, h, k0, kd) = (
            config.in_features,
            config.bottleneck_d,
            config.hidden_h,
            config.init_kernel,
            config.dw_kernel,
        );
        let bn_y = add_bn(&mut store, "bn_in_y", f);
        let bn_r = config.fusion.uses_reference().then(|| add_bn(&mut store, "bn_in_r", f));
        let cin = if config.fusion == Fusion::ConcatInput { 2 * f } else { f };
        let init = add_dense(&mut store, &mut rng, "init", k0 * cin, k0 * cin, d);
        let mut blocks = Vec::new();
        for i in 0..config.n_blocks() {
            let p = format!("block{i}");
            let pw1 = add_dense(&mut store, &mut rng, &format!("{p}.pw1"), d, d, h);
            let a1 = store.add(format!("{p}.prelu1.a"), Array2::from_elem((1, 1), 0.25), true);
            let bn1 = add_bn(&mut store, &format!("{p}.bn1"), h);
            let dw = add_dense(&mut store, &mut rng, &format!("{p}.dw"), kd, kd, h);
            let a2 = store.add(format!("{p}.prelu2.a"), Array2::from_elem((1, 1), 0.25), true);
            let bn2 = add_bn(&mut store, &format!("{p}.bn2"), h);
            let pw2 = add_dense(&mut store, &mut rng, &format!("{p}.pw2"), h, h, d);
            blocks.push(BlockIds {
                pw1,
                a1,
                bn1,
                dw,
                a2,
                bn2,
                pw2,
                dilation: config.dilation(i),
            });
        }
        let fuse = config
            .fusion
            .encoder_blocks()
            .map(|_| add_dense(&mut store, &mut rng, "fuse", 2 * d, 2 * d, d));
        let head = add_dense(&mut store, &mut rng, "head", d, d, config.n_classes);
        Ok(Self {
            config,
            arch: Arch {
                bn_y,
                bn_r,
                init,
                blocks,
                fuse,
                head,
            },
            params: store,
        })
    }

    pub fn config(&self) -> &TcnConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn fusion(&self) -> Fusion {
        self.config.fusion
    }

    /// Minimum input length; shorter inputs are zero-padded by [`Self::predict`].
    pub fn segment_frames(&self) -> usize {
        receptive_field(&self.config)
    }

    fn vec(&self, id: usize) -> ArrayView1<'_, f64> {
        self.params.value(id).row(0)
    }

    fn scalar(&self, id: usize) -> f64 {
        self.params.value(id)[[0, 0]]
    }

    fn bn(&self, ids: BnIds, x: &Array2<f64>, train: bool) -> (Array2<f64>, BnCache) {
        bn_forward(
            x,
            self.vec(ids.gamma),
            self.vec(ids.beta),
            self.vec(ids.mean),
            self.vec(ids.var),
            self.config.bn_eps,
            train,
        )
    }

    fn block_forward(
        &self,
        b: &BlockIds,
        x: Array2<f64>,
        n_seq: usize,
        t: usize,
        train: bool,
    ) -> (Array2<f64>, BlockCache) {
        let h1 = dense_forward(&x, self.params.value(b.pw1.w), self.vec(b.pw1.b));
        let p1 = prelu_forward(&h1, self.scalar(b.a1));
        let (b1, bn1) = self.bn(b.bn1, &p1, train);
        let h2 = depthwise_forward(&b1, n_seq, t, self.params.value(b.dw.w), self.vec(b.dw.b), b.dilation);
        let p2 = prelu_forward(&h2, self.scalar(b.a2));
        let (b2, bn2) = self.bn(b.bn2, &p2, train);
        let h3 = dense_forward(&b2, self.params.value(b.pw2.w), self.vec(b.pw2.b));
        let y = &x + &h3;
        (
            y,
            BlockCache {
                x,
                h1,
                bn1,
                b1,
                h2,
                bn2,
                b2,
                n_seq,
                t,
            },
        )
    }

    fn block_backward(&self, b: &BlockIds, c: &BlockCache, dy: &Array2<f64>, grads: &mut [Array2<f64>]) -> Array2<f64> {
        let (db2, dw, dbias) = dense_backward(dy, &c.b2, self.params.value(b.pw2.w));
        acc(grads, b.pw2.w, &dw);
        acc_row(grads, b.pw2.b, &dbias);
        let (dp2, dg, dbeta) = bn_backward(&db2, self.vec(b.bn2.gamma), &c.bn2);
        acc_row(grads, b.bn2.gamma, &dg);
        acc_row(grads, b.bn2.beta, &dbeta);
        let (dh2, da2) = prelu_backward(&dp2, &c.h2, self.scalar(b.a2));
        grads[b.a2][[0, 0]] += da2;
        let (db1, dww, dwb) = depthwise_backward(&dh2, &c.b1, c.n_seq, c.t, self.params.value(b.dw.w), b.dilation);
        acc(grads, b.dw.w, &dww);
        acc_row(grads, b.dw.b, &dwb);
        let (dp1, dg, dbeta) = bn_backward(&db1, self.vec(b.bn1.gamma), &c.bn1);
        acc_row(grads, b.bn1.gamma, &dg);
        acc_row(grads, b.bn1.beta, &dbeta);
        let (dh1, da1) = prelu_backward(&dp1, &c.h1, self.scalar(b.a1));
        grads[b.a1][[0, 0]] += da1;
        let (dx, dw, dbias) = dense_backward(&dh1, &c.x, self.params.value(b.pw1.w));
        acc(grads, b.pw1.w, &dw);
        acc_row(grads, b.pw1.b, &dbias);
        dx + dy
    }

    fn check_batch(&self, batch: &Batch) -> Result<(), NnetError> {
        let n = batch.n_seq();
        let rows = n * batch.frames;
        let f = self.config.in_features;
        if batch.x_y.ncols() != f {
            return Err(NnetError::FeatureWidth {
                got: batch.x_y.ncols(),
                expected: f,
            });
        }
        if batch.x_y.nrows() != rows || n == 0 {
            return Err(NnetError::Shape(format!(
                "{} mixture rows for {n} sequences of {} frames",
                batch.x_y.nrows(),
                batch.frames
            )));
        }
        if batch.frames < self.config.init_kernel {
            return Err(NnetError::TooShort {
                got: batch.frames,
                min: self.config.init_kernel,
            });
        }
        let needs_ref = self.config.fusion.uses_reference() && batch.playback.iter().any(|p| *p);
        match &batch.x_r {
            None if needs_ref => return Err(NnetError::MissingReference(self.config.fusion)),
            Some(r) if r.dim() != batch.x_y.dim() => {
                return Err(NnetError::Shape("reference and mixture shapes differ".into()))
            }
            _ => {}
        }
        for m in [&batch.mask_y, &batch.mask_r].into_iter().flatten() {
            if m.dim() != batch.x_y.dim() {
                return Err(NnetError::Shape("mask shape differs from features".into()));
            }
        }
        Ok(())
    }

    /// Runs the network. In train mode batch norms use batch statistics and
    /// the running statistics are left untouched (see
    /// [`Self::update_bn_stats`]).
    pub fn forward(&self, batch: &Batch, train: bool) -> Result<(ForwardOutput, ForwardCache), NnetError> {
        self.check_batch(batch)?;
        let fusion = self.config.fusion;
        let (n, t) = (batch.n_seq(), batch.frames);

        let (mut y0, bn_y) = self.bn(self.arch.bn_y, &batch.x_y, train);
        if let Some(m) = &batch.mask_y {
            y0 *= m;
        }

        // reference branch after its input batch norm
        let mut reference = None;
        let mut r0 = None;
        if let Some(bn_r) = self.arch.bn_r {
            let play: Vec<usize> = (0..n).filter(|&s| batch.playback[s]).collect();
            let substituted: Vec<usize> = if fusion == Fusion::MaskD2 {
                Vec::new()
            } else {
                (0..n).filter(|&s| !batch.playback[s]).collect()
            };
            let (play_rows, bn_cache, mask_r) = if play.is_empty() {
                (None, None, None)
            } else {
                let xr = gather_seqs(batch.x_r.as_ref().expect("checked"), t, &play);
                let (mut out, c) = self.bn(bn_r, &xr, train);
                let mask = batch.mask_r.as_ref().map(|m| gather_seqs(m, t, &play));
                if let Some(m) = &mask {
                    out *= m;
                }
                (Some(out), Some(c), mask)
            };
            let rows = if fusion == Fusion::MaskD2 {
                play_rows
            } else {
                let mut full = Array2::zeros((n * t, self.config.in_features));
                full += &self.vec(bn_r.beta);
                if let Some(p) = &play_rows {
                    scatter_seqs(&mut full, p, t, &play);
                }
                Some(full)
            };
            r0 = rows;
            reference = Some(RefCache {
                play,
                substituted,
                bn_r: bn_cache,
                mask_r,
            });
        }

        let (enc_in, enc_seqs) = match (fusion, &r0) {
            (Fusion::ConcatInput, Some(r)) => (hconcat(&y0, r), n),
            (Fusion::Baseline | Fusion::ConcatInput, _) | (_, None) => (y0, n),
            (_, Some(r)) => (vconcat(&y0, r), n + r.nrows() / t),
        };
        let conv_cin = enc_in.ncols();
        let (mut z, t_out, conv_cols) = conv_forward(
            &enc_in,
            enc_seqs,
            t,
            self.params.value(self.arch.init.w),
            self.vec(self.arch.init.b),
            self.config.init_kernel,
            self.config.init_stride,
        );
        if t_out == 0 {
            return Err(NnetError::TooShort {
                got: t,
                min: self.config.init_kernel,
            });
        }

        let split = fusion.encoder_blocks().unwrap_or(0);
        let mut blocks = Vec::with_capacity(self.arch.blocks.len());
        for b in &self.arch.blocks[..split] {
            let (out, c) = self.block_forward(b, z, enc_seqs, t_out, train);
            z = out;
            blocks.push(c);
        }

        let mut fuse = None;
        if let Some(fids) = self.arch.fuse {
            let rows_y = n * t_out;
            let zy = z.slice(s![..rows_y, ..]).to_owned();
            let zr = z.slice(s![rows_y.., ..]).to_owned();
            match fusion {
                Fusion::MaskD2 => {
                    let play = reference.as_ref().map(|r| r.play.clone()).unwrap_or_default();
                    if play.is_empty() {
                        z = zy;
                        fuse = Some(FuseCache::Skipped);
                    } else {
                        let zy_play = gather_seqs(&zy, t_out, &play);
                        let input = hconcat(&zy_play, &zr);
                        let pre = dense_forward(&input, self.params.value(fids.w), self.vec(fids.b));
                        let gate = pre.mapv(sigmoid);
                        let gated = &gate * &zy_play;
                        let mut out = zy;
                        scatter_seqs(&mut out, &gated, t_out, &play);
                        z = out;
                        fuse = Some(FuseCache::Mask {
                            play,
                            zy_play,
                            input,
                            gate,
                        });
                    }
                }
                _ => {
                    let input = hconcat(&zy, &zr);
                    z = dense_forward(&input, self.params.value(fids.w), self.vec(fids.b));
                    fuse = Some(FuseCache::Concat { input });
                }
            }
        }
        let latent = z.clone();

        for b in &self.arch.blocks[split..] {
            let (out, c) = self.block_forward(b, z, n, t_out, train);
            z = out;
            blocks.push(c);
        }

        let frame_logits = dense_forward(&z, self.params.value(self.arch.head.w), self.vec(self.arch.head.b));
        let (pooled, pool_idx) = maxpool_forward(frame_logits.view(), n, t_out);
        let cache = ForwardCache {
            train,
            n,
            t,
            t_out,
            bn_y,
            mask_y: batch.mask_y.clone(),
            reference,
            enc_seqs,
            conv_cols,
            conv_cin,
            blocks,
            fuse,
            latent,
            head_in: z,
            pool_idx,
        };
        Ok((
            ForwardOutput {
                frame_logits,
                pooled,
                t_out,
            },
            cache,
        ))
    }

    /// Gradients of a loss with respect to every parameter entry, given the
    /// loss gradient on the pooled logits (`n_seq x C`). Entries of
    /// non-trainable statistics stay zero.
    pub fn backward(&self, cache: &ForwardCache, d_pooled: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut grads = self.params.zeros_like();
        let g = &mut grads;
        let (n, t, t_out) = (cache.n, cache.t, cache.t_out);
        let fusion = self.config.fusion;

        let d_frames = maxpool_backward(d_pooled, &cache.pool_idx, t_out);
        let (mut dz, dw, db) = dense_backward(&d_frames, &cache.head_in, self.params.value(self.arch.head.w));
        acc(g, self.arch.head.w, &dw);
        acc_row(g, self.arch.head.b, &db);

        let split = fusion.encoder_blocks().unwrap_or(0);
        for (b, c) in self.arch.blocks[split..].iter().zip(&cache.blocks[split..]).rev() {
            dz = self.block_backward(b, c, &dz, g);
        }

        if let (Some(fids), Some(fc)) = (self.arch.fuse, &cache.fuse) {
            let d = self.config.bottleneck_d;
            dz = match fc {
                FuseCache::Skipped => dz,
                FuseCache::Concat { input } => {
                    let (dinput, dw, db) = dense_backward(&dz, input, self.params.value(fids.w));
                    acc(g, fids.w, &dw);
                    acc_row(g, fids.b, &db);
                    vconcat(
                        &dinput.slice(s![.., ..d]).to_owned(),
                        &dinput.slice(s![.., d..]).to_owned(),
                    )
                }
                FuseCache::Mask {
                    play,
                    zy_play,
                    input,
                    gate,
                } => {
                    let dgated = gather_seqs(&dz, t_out, play);
                    let dgate = &dgated * zy_play;
                    let dpre = &dgate * &gate.mapv(|m| m * (1.0 - m));
                    let (dinput, dw, db) = dense_backward(&dpre, input, self.params.value(fids.w));
                    acc(g, fids.w, &dw);
                    acc_row(g, fids.b, &db);
                    let dzy_play = &dgated * gate + &dinput.slice(s![.., ..d]);
                    let mut dzy = dz;
                    scatter_seqs(&mut dzy, &dzy_play, t_out, play);
                    vconcat(&dzy, &dinput.slice(s![.., d..]).to_owned())
                }
            };
        }

        for (b, c) in self.arch.blocks[..split].iter().zip(&cache.blocks[..split]).rev() {
            dz = self.block_backward(b, c, &dz, g);
        }

        let (d_in, dw, db) = conv_backward(
            &dz,
            &cache.conv_cols,
            self.params.value(self.arch.init.w),
            cache.enc_seqs,
            t,
            cache.conv_cin,
            self.config.init_kernel,
            self.config.init_stride,
        );
        acc(g, self.arch.init.w, &dw);
        acc_row(g, self.arch.init.b, &db);

        let f = self.config.in_features;
        let rows_y = n * t;
        let (mut dy0, dr0) = match fusion {
            Fusion::Baseline => (d_in, None),
            Fusion::ConcatInput => (
                d_in.slice(s![.., ..f]).to_owned(),
                Some(d_in.slice(s![.., f..]).to_owned()),
            ),
            _ if d_in.nrows() > rows_y => (
                d_in.slice(s![..rows_y, ..]).to_owned(),
                Some(d_in.slice(s![rows_y.., ..]).to_owned()),
            ),
            _ => (d_in, None),
        };
        if let Some(m) = &cache.mask_y {
            dy0 *= m;
        }
        let (_, dg, dbeta) = bn_backward(&dy0, self.vec(self.arch.bn_y.gamma), &cache.bn_y);
        acc_row(g, self.arch.bn_y.gamma, &dg);
        acc_row(g, self.arch.bn_y.beta, &dbeta);

        if let (Some(dr0), Some(rc), Some(bn_r)) = (dr0, &cache.reference, self.arch.bn_r) {
            // rows of dr0 are all examples (concat modes) or only the
            // playback examples in order (mask mode)
            let mut d_play = if fusion == Fusion::MaskD2 {
                dr0.clone()
            } else {
                gather_seqs(&dr0, t, &rc.play)
            };
            if !rc.substituted.is_empty() {
                let d_sub = gather_seqs(&dr0, t, &rc.substituted);
                acc_row(g, bn_r.beta, &d_sub.sum_axis(Axis(0)));
            }
            if let Some(bc) = &rc.bn_r {
                if let Some(m) = &rc.mask_r {
                    d_play *= m;
                }
                let (_, dg, dbeta) = bn_backward(&d_play, self.vec(bn_r.gamma), bc);
                acc_row(g, bn_r.gamma, &dg);
                acc_row(g, bn_r.beta, &dbeta);
            }
        }
        grads
    }

    /// Exponential moving update of running statistics from a train-mode
    /// pass (unbiased variance).
    pub fn update_bn_stats(&mut self, cache: &ForwardCache) {
        let m = self.config.bn_momentum;
        for (ids, bc) in self.bn_caches(cache) {
            let rows = bc.rows as f64;
            let unbiased = if bc.rows > 1 {
                &bc.var * (rows / (rows - 1.0))
            } else {
                bc.var.clone()
            };
            let mean = self.params.value_mut(ids.mean);
            *mean = &*mean * (1.0 - m) + &bc.mean.view().insert_axis(Axis(0)) * m;
            let var = self.params.value_mut(ids.var);
            *var = &*var * (1.0 - m) + &unbiased.view().insert_axis(Axis(0)) * m;
        }
    }

    /// Sets running statistics to the batch statistics (biased variance) of
    /// a train-mode pass, so eval mode reproduces that pass.
    pub fn freeze_bn_stats(&mut self, cache: &ForwardCache) {
        for (ids, bc) in self.bn_caches(cache) {
            self.params.value_mut(ids.mean).row_mut(0).assign(&bc.mean);
            self.params.value_mut(ids.var).row_mut(0).assign(&bc.var);
        }
    }

    fn bn_caches(&self, cache: &ForwardCache) -> Vec<(BnIds, BnCache)> {
        if !cache.train {
            return Vec::new();
        }
        let mut out = vec![(self.arch.bn_y, cache.bn_y.clone())];
        if let (Some(rc), Some(ids)) = (&cache.reference, self.arch.bn_r) {
            if let Some(bc) = &rc.bn_r {
                out.push((ids, bc.clone()));
            }
        }
        for (b, c) in self.arch.blocks.iter().zip(&cache.blocks) {
            out.push((b.bn1, c.bn1.clone()));
            out.push((b.bn2, c.bn2.clone()));
        }
        out
    }

    /// Pooled logits for one utterance in eval mode. Inputs shorter than the
    /// receptive field are zero-padded at the tail; the reference is fitted
    /// to the mixture length.
    pub fn predict(&self, x_y: &FeatureSequence, x_r: Option<&FeatureSequence>) -> Result<Array1<f64>, NnetError> {
        let frames = x_y.n_frames().max(self.segment_frames());
        let y = x_y.pad_to(frames);
        let r = x_r.map(|r| r.window(0, frames));
        let batch = Batch::from_sequences(&[&y], &[r.as_ref()])?;
        let (out, _) = self.forward(&batch, false)?;
        Ok(out.pooled.row(0).to_owned())
    }

    /// Number of conv/dense multiply-accumulates per output frame, summed
    /// layer by layer from the instantiated weights.
    pub fn enumerate_macs(&self, playback: bool) -> usize {
        let rows = |id: usize| self.params.value(id).len();
        let mut macs = rows(self.arch.init.w) + rows(self.arch.head.w);
        let block = |b: &BlockIds| rows(b.pw1.w) + rows(b.dw.w) + rows(b.pw2.w);
        macs += self.arch.blocks.iter().map(block).sum::<usize>();
        if let (Some(k), Some(fuse)) = (self.config.fusion.encoder_blocks(), self.arch.fuse) {
            if playback || self.config.fusion != Fusion::MaskD2 {
                macs += rows(self.arch.init.w) + self.arch.blocks[..k].iter().map(block).sum::<usize>() + rows(fuse.w);
            }
        }
        macs
    }
}
