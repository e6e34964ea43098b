use rand::Rng;

use crate::cx::CxVar;
use crate::error::{shape_err, Result};
use crate::gan::config::GeneratorConfig;
use crate::layers::{DecoderBlock, EncoderBlock, SkipConvBlock};
use crate::params::{Binder, Mode, ParamSet};
use crate::tape::Tape;
use crate::tensor::CxTensor;
use crate::tfsa::Tfsa;
use crate::Scalar;

/// Complex U-Net with SkipConv blocks on the skip connections and TF-SA
/// modules between levels. Maps a `(B, 1, T, F)` spectrogram to a complex
/// ratio mask of the same shape.
#[derive(Clone, Debug)]
pub struct Generator {
    pub cfg: GeneratorConfig,
    pub encoders: Vec<EncoderBlock>,
    /// `skips[i]` processes the output of encoder `i + 1`.
    pub skips: Vec<Vec<SkipConvBlock>>,
    /// `decoders[i]` is decoder `i + 1`; decoder 1 emits the mask.
    pub decoders: Vec<DecoderBlock>,
    pub encoder_tfsa: Vec<Option<Tfsa>>,
    pub decoder_tfsa: Vec<Option<Tfsa>>,
}

impl Generator {
    pub fn new<T: Scalar, R: Rng + ?Sized>(cfg: &GeneratorConfig, params: &mut ParamSet<T>, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.depth;
        let l = &cfg.ladder;
        let sb_pad = (cfg.sb_kernel.0 / 2, cfg.sb_kernel.1 / 2);
        let mut encoders = Vec::with_capacity(n);
        let mut encoder_tfsa = Vec::with_capacity(n);
        let mut skips = Vec::with_capacity(n - 1);
        for i in 1..=n {
            let name = format!("gen.enc{i}");
            encoders.push(EncoderBlock::new(params, &name, l[i - 1], l[i], cfg.kernel, cfg.stride, cfg.padding, cfg.batch_norm, rng)?);
            encoder_tfsa.push(if cfg.tfsa_encoder.contains(&i) {
                Some(Tfsa::new(params, &format!("{name}.tfsa"), l[i], cfg.tfsa_scaled, rng)?)
            } else {
                None
            });
            if i < n {
                let blocks = (0..cfg.sb_counts[i - 1])
                    .map(|j| {
                        let name = format!("gen.skip{i}.sb{j}");
                        SkipConvBlock::new(params, &name, l[i], cfg.sb_kernel, (1, 1), sb_pad, cfg.batch_norm, rng)
                    })
                    .collect::<Result<Vec<_>>>()?;
                skips.push(blocks);
            }
        }
        let mut decoders = Vec::with_capacity(n);
        let mut decoder_tfsa = Vec::with_capacity(n);
        for i in 1..=n {
            let name = format!("gen.dec{i}");
            let c_in = if i == n { l[n] } else { 2 * l[i] };
            decoder_tfsa.push(if cfg.tfsa_decoder.contains(&i) {
                Some(Tfsa::new(params, &format!("{name}.tfsa"), l[i], cfg.tfsa_scaled, rng)?)
            } else {
                None
            });
            decoders.push(DecoderBlock::new(
                params,
                &name,
                c_in,
                l[i - 1],
                cfg.kernel,
                cfg.stride,
                cfg.padding,
                i == 1,
                cfg.batch_norm,
                rng,
            )?);
        }
        Ok(Self { cfg: cfg.clone(), encoders, skips, decoders, encoder_tfsa, decoder_tfsa })
    }

    pub fn skipconv_count(&self) -> usize {
        self.skips.iter().map(Vec::len).sum()
    }

    pub fn tfsa_count(&self) -> usize {
        self.encoder_tfsa.iter().chain(&self.decoder_tfsa).filter(|t| t.is_some()).count()
    }

    /// Spatial extents after each encoder, input first. Fails when the
    /// frequency axis shrinks below the kernel width.
    pub fn extents(&self, t: usize, f: usize) -> Result<Vec<(usize, usize)>> {
        let mut out = vec![(t, f)];
        for (i, e) in self.encoders.iter().enumerate() {
            let (pt, pf) = *out.last().unwrap();
            let next = e.conv.out_len(pt, pf)?;
            if next.1 < self.cfg.kernel.1 {
                return Err(shape_err!(
                    "frequency extent {f} too small for depth {}: encoder {} leaves {} bins (< kernel width {})",
                    self.cfg.depth,
                    i + 1,
                    next.1,
                    self.cfg.kernel.1
                ));
            }
            out.push(next);
        }
        Ok(out)
    }

    /// Mask estimate for `y` of shape `(B, 1, T, F)`.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, b: &mut Binder<T>, y: CxVar) -> Result<CxVar> {
        let d = tape.cx_dims(y);
        if d.len() != 4 || d[1] != self.cfg.ladder[0] {
            return Err(shape_err!("generator expects (B,{},T,F), got {d:?}", self.cfg.ladder[0]));
        }
        let extents = self.extents(d[2], d[3])?;
        let n = self.cfg.depth;
        let mut h = y;
        let mut skip_out = Vec::with_capacity(n - 1);
        for i in 0..n {
            h = self.encoders[i].forward(tape, b, h)?;
            if let Some(sa) = &self.encoder_tfsa[i] {
                h = sa.forward(tape, b, h)?;
            }
            if i + 1 < n {
                let mut s = h;
                for blk in &self.skips[i] {
                    s = blk.forward(tape, b, s)?;
                }
                skip_out.push(s);
            }
        }
        for i in (0..n).rev() {
            let skip = if i + 1 < n { Some(skip_out[i]) } else { None };
            if let Some(sa) = &self.decoder_tfsa[i] {
                h = sa.forward(tape, b, h)?;
            }
            h = self.decoders[i].forward(tape, b, h, skip, extents[i])?;
        }
        if self.cfg.bounded_mask {
            let mag = tape.cx_magnitude(h)?;
            let denom = tape.add_const(mag, T::one());
            h = CxVar { re: tape.div(h.re, denom)?, im: tape.div(h.im, denom)? };
        }
        Ok(h)
    }

    /// Value-level mask estimate without recording gradients.
    pub fn infer<T: Scalar>(&self, params: &ParamSet<T>, y: &CxTensor<T>, mode: Mode) -> Result<CxTensor<T>> {
        let mut tape = Tape::new();
        let mut b = Binder::new(params, false, mode);
        let yv = tape.cx_constant(y);
        let m = self.forward(&mut tape, &mut b, yv)?;
        Ok(tape.cx_value(m))
    }
}

/// Closed-form count of complex trainable entries for a generator topology.
pub fn generator_param_count(cfg: &GeneratorConfig) -> usize {
    let l = &cfg.ladder;
    let n = cfg.depth;
    let k = cfg.kernel.0 * cfg.kernel.1;
    let ks = cfg.sb_kernel.0 * cfg.sb_kernel.1;
    let conv = |ci: usize, co: usize, k: usize| ci * co * k + co;
    let bn = |c: usize| 2 * c;
    let tfsa = |c: usize| 6 * c * c + 3 * c * c;
    let mut total = 0;
    for i in 1..=n {
        total += conv(l[i - 1], l[i], k) + bn(l[i]);
        let c_in = if i == n { l[n] } else { 2 * l[i] };
        total += conv(c_in, l[i - 1], k) + if i == 1 { 0 } else { bn(l[i - 1]) };
        if i < n {
            total += cfg.sb_counts[i - 1] * (conv(l[i], l[i], ks) + bn(l[i]));
        }
    }
    total += cfg.tfsa_encoder.iter().map(|&i| tfsa(l[i])).sum::<usize>();
    total += cfg.tfsa_decoder.iter().map(|&i| tfsa(l[i])).sum::<usize>();
    total
}
