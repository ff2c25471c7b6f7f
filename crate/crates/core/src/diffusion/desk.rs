//! Small conditional U-shaped denoiser with a hand-written backward pass.
//!
//! ```text
//! e    = silu(time_lin(sinusoid(t)))
//! h    = conv3(z)                                   2 -> C0
//! enc  = [res_0(h), res_1(down_1(pool(enc_0))), ...] level l has C0 * 2^l channels
//! dec  = res'_l(up_l(upsample(dec_{l+1})) + enc_l)  down to level 0
//! out  = conv3(silu(dec_0)) + s0(e) * x_t + s1(e) * y
//! ```
//! `res(x) = x + conv2(silu(conv1(silu(x)) + temb(e)))`. Convolutions are
//! zero-padded; `down`/`up` are 1x1 convolutions, `pool` is 2x2 averaging and
//! `upsample` is nearest-neighbour.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volumes::Slice;

use super::condition::{ConditionStack, CHANNEL_PRIOR, CHANNEL_XT};
use super::embedding::TimeEmbedding;
use super::predictor::{mse, mse_grad, EpsilonPredictor, Trainable};

pub const DESK_ARCH: &str = "desk-unet-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeskConfig {
    pub base_channels: usize,
    pub levels: usize,
    pub time_dim: usize,
}

impl Default for DeskConfig {
    fn default() -> Self {
        DeskConfig {
            base_channels: 8,
            levels: 3,
            time_dim: 32,
        }
    }
}

impl DeskConfig {
    fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }

    fn validate(&self) -> Result<()> {
        if self.base_channels == 0 || self.levels == 0 || self.levels > 8 {
            return Err(Error::domain(format!("invalid desk config {self:?}")));
        }
        TimeEmbedding::new(self.time_dim).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy)]
struct Lin {
    w: usize,
    b: usize,
    cin: usize,
    cout: usize,
}

#[derive(Debug, Clone, Copy)]
struct Conv3 {
    w: usize,
    b: usize,
    cin: usize,
    cout: usize,
}

#[derive(Debug, Clone, Copy)]
struct Res {
    conv1: Conv3,
    conv2: Conv3,
    temb: Lin,
}

#[derive(Debug, Clone)]
struct Layout {
    time: Lin,
    input: Conv3,
    enc: Vec<Res>,
    down: Vec<Lin>,
    up: Vec<Lin>,
    dec: Vec<Res>,
    out: Conv3,
    skip: Lin,
    total: usize,
    /// (offset, len, init std) for every weight tensor, in allocation order.
    init: Vec<(usize, usize, f64)>,
}

struct Alloc {
    n: usize,
    init: Vec<(usize, usize, f64)>,
}

impl Alloc {
    fn take(&mut self, len: usize, std: f64) -> usize {
        let o = self.n;
        self.n += len;
        if std > 0.0 {
            self.init.push((o, len, std));
        }
        o
    }

    fn lin(&mut self, cin: usize, cout: usize, gain: f64) -> Lin {
        let w = self.take(cin * cout, gain / (cin as f64).sqrt());
        Lin {
            w,
            b: self.take(cout, 0.0),
            cin,
            cout,
        }
    }

    fn conv(&mut self, cin: usize, cout: usize, gain: f64) -> Conv3 {
        let w = self.take(cin * cout * 9, gain / ((cin * 9) as f64).sqrt());
        Conv3 {
            w,
            b: self.take(cout, 0.0),
            cin,
            cout,
        }
    }

    fn res(&mut self, c: usize, tdim: usize) -> Res {
        Res {
            conv1: self.conv(c, c, 1.0),
            conv2: self.conv(c, c, 0.1),
            temb: self.lin(tdim, c, 0.1),
        }
    }
}

impl Layout {
    fn new(cfg: &DeskConfig) -> Self {
        let mut a = Alloc { n: 0, init: Vec::new() };
        let td = cfg.time_dim;
        let time = a.lin(td, td, 1.0);
        let input = a.conv(2, cfg.channels(0), 1.0);
        let mut enc = vec![a.res(cfg.channels(0), td)];
        let mut down = Vec::new();
        for l in 1..cfg.levels {
            down.push(a.lin(cfg.channels(l - 1), cfg.channels(l), 1.0));
            enc.push(a.res(cfg.channels(l), td));
        }
        let mut up = Vec::new();
        let mut dec = Vec::new();
        for l in 0..cfg.levels - 1 {
            up.push(a.lin(cfg.channels(l + 1), cfg.channels(l), 1.0));
            dec.push(a.res(cfg.channels(l), td));
        }
        let out = a.conv(cfg.channels(0), 1, 0.1);
        let skip = a.lin(td, 2, 0.01);
        Layout {
            time,
            input,
            enc,
            down,
            up,
            dec,
            out,
            skip,
            total: a.n,
            init: a.init,
        }
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn silu(v: f64) -> f64 {
    v * sigmoid(v)
}

fn dsilu(v: f64) -> f64 {
    let s = sigmoid(v);
    s * (1.0 + v * (1.0 - s))
}

/// `dst[y][x] += k * src[y + dy][x + dx]` wherever the source is in bounds.
fn shifted_axpy(dst: &mut [f64], src: &[f64], h: usize, w: usize, dy: isize, dx: isize, k: f64) {
    let (y0, y1) = ((-dy).max(0), (h as isize - dy).min(h as isize));
    let (x0, x1) = ((-dx).max(0), (w as isize - dx).min(w as isize));
    if y0 >= y1 || x0 >= x1 {
        return;
    }
    let n = (x1 - x0) as usize;
    for y in y0..y1 {
        let d = (y * w as isize + x0) as usize;
        let s = ((y + dy) * w as isize + x0 + dx) as usize;
        for (a, b) in dst[d..d + n].iter_mut().zip(&src[s..s + n]) {
            *a += k * b;
        }
    }
}

/// `sum a[y][x] * src[y + dy][x + dx]` over in-bounds positions.
fn shifted_dot(a: &[f64], src: &[f64], h: usize, w: usize, dy: isize, dx: isize) -> f64 {
    let (y0, y1) = ((-dy).max(0), (h as isize - dy).min(h as isize));
    let (x0, x1) = ((-dx).max(0), (w as isize - dx).min(w as isize));
    if y0 >= y1 || x0 >= x1 {
        return 0.0;
    }
    let n = (x1 - x0) as usize;
    let mut acc = 0.0;
    for y in y0..y1 {
        let d = (y * w as isize + x0) as usize;
        let s = ((y + dy) * w as isize + x0 + dx) as usize;
        acc += a[d..d + n].iter().zip(&src[s..s + n]).map(|(p, q)| p * q).sum::<f64>();
    }
    acc
}

fn conv3_fwd(p: &[f64], c: Conv3, x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut out = vec![0.0; c.cout * hw];
    for (o, dst) in out.chunks_mut(hw).enumerate() {
        dst.fill(p[c.b + o]);
        for i in 0..c.cin {
            let src = &x[i * hw..(i + 1) * hw];
            for k in 0..9 {
                let wv = p[c.w + (o * c.cin + i) * 9 + k];
                shifted_axpy(dst, src, h, w, k as isize / 3 - 1, k as isize % 3 - 1, wv);
            }
        }
    }
    out
}

fn conv3_bwd(p: &[f64], c: Conv3, x: &[f64], h: usize, w: usize, dy: &[f64], g: &mut [f64]) -> Vec<f64> {
    let hw = h * w;
    let mut dx = vec![0.0; c.cin * hw];
    for o in 0..c.cout {
        let dyo = &dy[o * hw..(o + 1) * hw];
        g[c.b + o] += dyo.iter().sum::<f64>();
        for i in 0..c.cin {
            let xi = &x[i * hw..(i + 1) * hw];
            let dxi = &mut dx[i * hw..(i + 1) * hw];
            for k in 0..9 {
                let (ky, kx) = (k as isize / 3 - 1, k as isize % 3 - 1);
                let idx = c.w + (o * c.cin + i) * 9 + k;
                g[idx] += shifted_dot(dyo, xi, h, w, ky, kx);
                shifted_axpy(dxi, dyo, h, w, -ky, -kx, p[idx]);
            }
        }
    }
    dx
}

fn pix_fwd(p: &[f64], l: Lin, x: &[f64], hw: usize) -> Vec<f64> {
    let mut out = vec![0.0; l.cout * hw];
    for (o, dst) in out.chunks_mut(hw).enumerate() {
        dst.fill(p[l.b + o]);
        for i in 0..l.cin {
            let k = p[l.w + o * l.cin + i];
            for (a, b) in dst.iter_mut().zip(&x[i * hw..(i + 1) * hw]) {
                *a += k * b;
            }
        }
    }
    out
}

fn pix_bwd(p: &[f64], l: Lin, x: &[f64], hw: usize, dy: &[f64], g: &mut [f64]) -> Vec<f64> {
    let mut dx = vec![0.0; l.cin * hw];
    for o in 0..l.cout {
        let dyo = &dy[o * hw..(o + 1) * hw];
        g[l.b + o] += dyo.iter().sum::<f64>();
        for i in 0..l.cin {
            let idx = l.w + o * l.cin + i;
            let xi = &x[i * hw..(i + 1) * hw];
            g[idx] += dyo.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            for (a, b) in dx[i * hw..(i + 1) * hw].iter_mut().zip(dyo) {
                *a += p[idx] * b;
            }
        }
    }
    dx
}

fn vec_fwd(p: &[f64], l: Lin, x: &[f64]) -> Vec<f64> {
    (0..l.cout)
        .map(|o| p[l.b + o] + (0..l.cin).map(|i| p[l.w + o * l.cin + i] * x[i]).sum::<f64>())
        .collect()
}

fn vec_bwd(p: &[f64], l: Lin, x: &[f64], dy: &[f64], g: &mut [f64]) -> Vec<f64> {
    let mut dx = vec![0.0; l.cin];
    for o in 0..l.cout {
        g[l.b + o] += dy[o];
        for i in 0..l.cin {
            g[l.w + o * l.cin + i] += dy[o] * x[i];
            dx[i] += p[l.w + o * l.cin + i] * dy[o];
        }
    }
    dx
}

fn pool2(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (h / 2, w / 2);
    let mut out = vec![0.0; c * h2 * w2];
    for ch in 0..c {
        for y in 0..h2 {
            for xx in 0..w2 {
                let s = ch * h * w + 2 * y * w + 2 * xx;
                out[ch * h2 * w2 + y * w2 + xx] = 0.25 * (x[s] + x[s + 1] + x[s + w] + x[s + w + 1]);
            }
        }
    }
    out
}

fn pool2_bwd(dy: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (h / 2, w / 2);
    let mut dx = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            for xx in 0..w {
                dx[ch * h * w + y * w + xx] = 0.25 * dy[ch * h2 * w2 + (y / 2) * w2 + xx / 2];
            }
        }
    }
    dx
}

/// Nearest-neighbour upsampling from `(h, w)` to `(2h, 2w)`.
fn up2(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (2 * h, 2 * w);
    let mut out = vec![0.0; c * h2 * w2];
    for ch in 0..c {
        for y in 0..h2 {
            for xx in 0..w2 {
                out[ch * h2 * w2 + y * w2 + xx] = x[ch * h * w + (y / 2) * w + xx / 2];
            }
        }
    }
    out
}

fn up2_bwd(dy: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (2 * h, 2 * w);
    let mut dx = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h2 {
            for xx in 0..w2 {
                dx[ch * h * w + (y / 2) * w + xx / 2] += dy[ch * h2 * w2 + y * w2 + xx];
            }
        }
    }
    dx
}

struct ResCache {
    x: Vec<f64>,
    a: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

fn res_fwd(p: &[f64], r: Res, x: Vec<f64>, e: &[f64], h: usize, w: usize) -> (Vec<f64>, ResCache) {
    let hw = h * w;
    let a: Vec<f64> = x.iter().map(|&v| silu(v)).collect();
    let mut c = conv3_fwd(p, r.conv1, &a, h, w);
    let tp = vec_fwd(p, r.temb, e);
    for (ch, plane) in c.chunks_mut(hw).enumerate() {
        plane.iter_mut().for_each(|v| *v += tp[ch]);
    }
    let d: Vec<f64> = c.iter().map(|&v| silu(v)).collect();
    let f = conv3_fwd(p, r.conv2, &d, h, w);
    let out = x.iter().zip(&f).map(|(a, b)| a + b).collect();
    (out, ResCache { x, a, c, d })
}

/// Returns the input gradient; accumulates the embedding gradient into `de`.
fn res_bwd(p: &[f64], r: Res, k: &ResCache, dout: &[f64], e: &[f64], h: usize, w: usize, g: &mut [f64], de: &mut [f64]) -> Vec<f64> {
    let hw = h * w;
    let dd = conv3_bwd(p, r.conv2, &k.d, h, w, dout, g);
    let dc: Vec<f64> = dd.iter().zip(&k.c).map(|(g, &c)| g * dsilu(c)).collect();
    let dtp: Vec<f64> = dc.chunks(hw).map(|pl| pl.iter().sum()).collect();
    for (a, b) in de.iter_mut().zip(vec_bwd(p, r.temb, e, &dtp, g)) {
        *a += b;
    }
    let da = conv3_bwd(p, r.conv1, &k.a, h, w, &dc, g);
    dout.iter().zip(&da).zip(&k.x).map(|((d0, d1), &x)| d0 + d1 * dsilu(x)).collect()
}

struct Cache {
    emb: Vec<f64>,
    e_pre: Vec<f64>,
    e: Vec<f64>,
    enc: Vec<ResCache>,
    pooled: Vec<Vec<f64>>,
    upin: Vec<Vec<f64>>,
    dec: Vec<ResCache>,
    head_in: Vec<f64>,
    head_act: Vec<f64>,
}

/// Trainable desk-scale epsilon predictor.
#[derive(Debug, Clone)]
pub struct DeskDenoiser {
    config: DeskConfig,
    layout: Layout,
    embed: TimeEmbedding,
    params: Vec<f64>,
}

impl DeskDenoiser {
    /// Seeded initialisation; biases start at zero except the input skip,
    /// which starts as `eps_hat = x_t`.
    pub fn new(config: DeskConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &(off, len, std) in &layout.init {
            for v in &mut params[off..off + len] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = std * z;
            }
        }
        params[layout.skip.b] = 1.0;
        Ok(DeskDenoiser {
            embed: TimeEmbedding::new(config.time_dim)?,
            config,
            layout,
            params,
        })
    }

    pub fn from_params(config: DeskConfig, params: Vec<f64>) -> Result<Self> {
        let mut d = Self::new(config, 0)?;
        if params.len() != d.params.len() {
            return Err(Error::shape(format!(
                "desk config {config:?} has {} parameters, got {}",
                d.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite parameter".into()));
        }
        d.params = params;
        Ok(d)
    }

    pub fn config(&self) -> DeskConfig {
        self.config
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check_dims(&self, w: usize, h: usize) -> Result<()> {
        let m = 1usize << (self.config.levels - 1);
        if w == 0 || h == 0 || w % m != 0 || h % m != 0 {
            return Err(Error::shape(format!("slice {w}x{h} must be a non-empty multiple of {m}")));
        }
        Ok(())
    }

    fn forward(&self, z: &ConditionStack, t: usize) -> Result<(Vec<f64>, Cache)> {
        let (w, h) = (z.width(), z.height());
        self.check_dims(w, h)?;
        let (p, ly, cfg) = (&self.params[..], &self.layout, &self.config);
        let levels = cfg.levels;
        let dims = |l: usize| (h >> l, w >> l);

        let emb = self.embed.encode(t);
        let e_pre = vec_fwd(p, ly.time, &emb);
        let e: Vec<f64> = e_pre.iter().map(|&v| silu(v)).collect();

        let mut x = conv3_fwd(p, ly.input, z.as_channels(), h, w);
        let mut enc = Vec::with_capacity(levels);
        let mut skips = Vec::with_capacity(levels);
        let mut pooled = Vec::with_capacity(levels.saturating_sub(1));
        for l in 0..levels {
            let (hl, wl) = dims(l);
            if l > 0 {
                let (hp, wp) = dims(l - 1);
                let pin = pool2(&x, cfg.channels(l - 1), hp, wp);
                x = pix_fwd(p, ly.down[l - 1], &pin, hl * wl);
                pooled.push(pin);
            }
            let (y, c) = res_fwd(p, ly.enc[l], x, &e, hl, wl);
            enc.push(c);
            skips.push(y.clone());
            x = y;
        }
        let mut upin = vec![Vec::new(); levels - 1];
        let mut dec: Vec<Option<ResCache>> = (0..levels - 1).map(|_| None).collect();
        for l in (0..levels - 1).rev() {
            let (hl, wl) = dims(l);
            let (hn, wn) = dims(l + 1);
            let u = up2(&x, cfg.channels(l + 1), hn, wn);
            let mut s = pix_fwd(p, ly.up[l], &u, hl * wl);
            s.iter_mut().zip(&skips[l]).for_each(|(a, b)| *a += b);
            upin[l] = u;
            let (y, c) = res_fwd(p, ly.dec[l], s, &e, hl, wl);
            dec[l] = Some(c);
            x = y;
        }
        let head_act: Vec<f64> = x.iter().map(|&v| silu(v)).collect();
        let mut out = conv3_fwd(p, ly.out, &head_act, h, w);
        let s = vec_fwd(p, ly.skip, &e);
        let (xt, y) = (z.channel(CHANNEL_XT), z.channel(CHANNEL_PRIOR));
        for i in 0..out.len() {
            out[i] += s[0] * xt[i] + s[1] * y[i];
        }
        let cache = Cache {
            emb,
            e_pre,
            e,
            enc,
            pooled,
            upin,
            dec: dec.into_iter().map(|c| c.expect("filled")).collect(),
            head_in: x,
            head_act,
        };
        Ok((out, cache))
    }

    fn backward(&self, z: &ConditionStack, k: &Cache, dout: &[f64]) -> Vec<f64> {
        let (w, h) = (z.width(), z.height());
        let (p, ly, cfg) = (&self.params[..], &self.layout, &self.config);
        let levels = cfg.levels;
        let dims = |l: usize| (h >> l, w >> l);
        let mut g = vec![0.0; p.len()];
        let mut de = vec![0.0; cfg.time_dim];

        let (xt, y) = (z.channel(CHANNEL_XT), z.channel(CHANNEL_PRIOR));
        let ds = [
            dout.iter().zip(xt).map(|(a, b)| a * b).sum::<f64>(),
            dout.iter().zip(y).map(|(a, b)| a * b).sum::<f64>(),
        ];
        de.iter_mut().zip(vec_bwd(p, ly.skip, &k.e, &ds, &mut g)).for_each(|(a, b)| *a += b);

        let da = conv3_bwd(p, ly.out, &k.head_act, h, w, dout, &mut g);
        let mut dx: Vec<f64> = da.iter().zip(&k.head_in).map(|(g, &v)| g * dsilu(v)).collect();

        let mut dskip = vec![Vec::new(); levels];
        for l in 0..levels - 1 {
            let (hl, wl) = dims(l);
            let (hn, wn) = dims(l + 1);
            dx = res_bwd(p, ly.dec[l], &k.dec[l], &dx, &k.e, hl, wl, &mut g, &mut de);
            let du = pix_bwd(p, ly.up[l], &k.upin[l], hl * wl, &dx, &mut g);
            dskip[l] = std::mem::replace(&mut dx, up2_bwd(&du, cfg.channels(l + 1), hn, wn));
        }
        for l in (0..levels).rev() {
            let (hl, wl) = dims(l);
            if l < levels - 1 {
                dx.iter_mut().zip(&dskip[l]).for_each(|(a, b)| *a += b);
            }
            dx = res_bwd(p, ly.enc[l], &k.enc[l], &dx, &k.e, hl, wl, &mut g, &mut de);
            if l > 0 {
                let (hp, wp) = dims(l - 1);
                let dp = pix_bwd(p, ly.down[l - 1], &k.pooled[l - 1], hl * wl, &dx, &mut g);
                dx = pool2_bwd(&dp, cfg.channels(l - 1), hp, wp);
            }
        }
        conv3_bwd(p, ly.input, z.as_channels(), h, w, &dx, &mut g);
        let de_pre: Vec<f64> = de.iter().zip(&k.e_pre).map(|(g, &v)| g * dsilu(v)).collect();
        vec_bwd(p, ly.time, &k.emb, &de_pre, &mut g);
        g
    }
}

impl EpsilonPredictor for DeskDenoiser {
    fn predict(&self, z: &ConditionStack, t: usize) -> Result<Slice> {
        let (out, _) = self.forward(z, t)?;
        Slice::from_vec(z.width(), z.height(), out)
    }
}

impl Trainable for DeskDenoiser {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn loss_and_grad(&self, z: &ConditionStack, t: usize, eps: &Slice) -> Result<(f64, Vec<f64>)> {
        if eps.width() != z.width() || eps.height() != z.height() {
            return Err(Error::shape("noise and input differ in shape"));
        }
        let (out, cache) = self.forward(z, t)?;
        let dout = mse_grad(&out, eps.data());
        Ok((mse(&out, eps.data()), self.backward(z, &cache, &dout)))
    }
}
