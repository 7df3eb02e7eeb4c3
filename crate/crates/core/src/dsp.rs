//! Receiver signal chain: FIR design, frequency translation, decimation,
//! spectrograms, FM discrimination, rational resampling and SNR measurement.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::IqBuffer;
use crate::error::{Error, Result};

/// Hamming windowed-sinc rule of thumb: taps ≈ 3.3 · rate / transition.
const HAMMING_TRANSITION_FACTOR: f64 = 3.3;
/// Magnitude floor for dB conversions.
pub const DB_FLOOR: f64 = -300.0;
/// Largest reduced interpolation or decimation factor the resampler accepts.
pub const MAX_RESAMPLE_FACTOR: u64 = 1024;
/// Welch segment length used by [`measure_snr`].
pub const WELCH_NFFT: usize = 4096;
/// Minimum Welch segment count before the segment length is shortened.
pub const WELCH_MIN_FRAMES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub design_cutoff: f64,
    pub design_rate: f64,
}

impl FirFilter {
    /// Single-tap pass-through.
    pub fn unity(rate: f64) -> Self {
        FirFilter {
            taps: vec![1.0],
            design_cutoff: rate / 2.0,
            design_rate: rate,
        }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Complex frequency response at `f` hertz.
    pub fn response(&self, f: f64) -> Complex64 {
        let w = -2.0 * PI * f / self.design_rate;
        self.taps
            .iter()
            .enumerate()
            .map(|(k, h)| Complex64::from_polar(*h, w * k as f64))
            .sum()
    }

    /// Response magnitude in dB.
    pub fn response_db(&self, f: f64) -> f64 {
        to_db(self.response(f).norm_sqr())
    }
}

pub fn to_db(power: f64) -> f64 {
    if power > 0.0 {
        (10.0 * power.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn hamming(n: usize, len: usize) -> f64 {
    if len == 1 {
        return 1.0;
    }
    0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos()
}

/// Hamming-windowed sinc low-pass with unit DC gain. Tap count follows the
/// transition width and is always odd.
pub fn design_lowpass(cutoff: f64, rate: f64, transition: f64) -> Result<FirFilter> {
    if !(cutoff > 0.0 && cutoff < rate / 2.0) {
        return Err(Error::invalid(format!(
            "cutoff {cutoff} Hz outside (0, {}) Hz",
            rate / 2.0
        )));
    }
    if !(transition > 0.0) {
        return Err(Error::invalid("transition width must be positive"));
    }
    let mut n = (HAMMING_TRANSITION_FACTOR * rate / transition).ceil() as usize;
    if n.is_multiple_of(2) {
        n += 1;
    }
    let mid = (n - 1) as f64 / 2.0;
    let fc = cutoff / rate;
    let mut taps: Vec<f64> = (0..n)
        .map(|k| {
            let x = k as f64 - mid;
            let sinc = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            sinc * hamming(k, n)
        })
        .collect();
    for k in 0..n / 2 {
        taps[n - 1 - k] = taps[k];
    }
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    Ok(FirFilter {
        taps,
        design_cutoff: cutoff,
        design_rate: rate,
    })
}

/// Zero-delay ("same" length) FIR over a complex buffer.
pub fn fir_filter(iq: &IqBuffer, filter: &FirFilter) -> IqBuffer {
    filter_decimate(iq, 0.0, filter, 1)
}

/// Multiplies by `exp(-j 2π offset n / fs)`.
pub fn frequency_translate(iq: &IqBuffer, offset: f64) -> Result<IqBuffer> {
    if !(offset.abs() < iq.sample_rate / 2.0) {
        return Err(Error::invalid(format!(
            "offset {offset} Hz beyond Nyquist at {} Hz",
            iq.sample_rate
        )));
    }
    if offset == 0.0 {
        return Ok(iq.clone());
    }
    let step = offset / iq.sample_rate;
    let samples = iq
        .samples
        .iter()
        .enumerate()
        .map(|(n, s)| s * rotation(n, step))
        .collect();
    Ok(IqBuffer::new(iq.sample_rate, samples))
}

fn rotation(n: usize, step: f64) -> Complex64 {
    let cycles = (n as f64 * step).fract();
    let (s, c) = (-2.0 * PI * cycles).sin_cos();
    Complex64::new(c, s)
}

/// Anti-alias filter then keep every `factor`-th sample.
pub fn decimate(iq: &IqBuffer, factor: usize, anti_alias: &FirFilter) -> Result<IqBuffer> {
    translate_decimate(iq, 0.0, anti_alias, factor)
}

/// Fused translate → filter → decimate. Only kept outputs are computed and
/// the input is rotated block by block, so no full-rate copy is made.
/// Output sample `m` is aligned with input sample `m · factor`.
pub fn translate_decimate(
    iq: &IqBuffer,
    offset: f64,
    filter: &FirFilter,
    factor: usize,
) -> Result<IqBuffer> {
    if factor == 0 {
        return Err(Error::invalid("decimation factor must be at least 1"));
    }
    let limit = iq.sample_rate / (2.0 * factor as f64);
    if filter.design_cutoff > limit * (1.0 + 1e-12) {
        return Err(Error::AliasingRisk {
            cutoff: filter.design_cutoff,
            limit,
        });
    }
    if !(offset.abs() < iq.sample_rate / 2.0) {
        return Err(Error::invalid(format!(
            "offset {offset} Hz beyond Nyquist at {} Hz",
            iq.sample_rate
        )));
    }
    Ok(filter_decimate(iq, offset, filter, factor))
}

fn filter_decimate(iq: &IqBuffer, offset: f64, filter: &FirFilter, factor: usize) -> IqBuffer {
    const BLOCK_OUT: usize = 4096;
    let n_in = iq.samples.len();
    let n_out = n_in.div_ceil(factor);
    let ntaps = filter.taps.len();
    let d = filter.delay() as isize;
    let step = offset / iq.sample_rate;
    // Reversed taps so the inner loop walks input and taps forward together.
    let rev: Vec<f64> = filter.taps.iter().rev().copied().collect();
    let mut out = Vec::with_capacity(n_out);
    let mut scratch: Vec<Complex64> = Vec::new();

    let mut m0 = 0;
    while m0 < n_out {
        let m1 = (m0 + BLOCK_OUT).min(n_out);
        // Inputs needed: [m0·f − d, (m1−1)·f + (ntaps−1−d)].
        let lo = (m0 * factor) as isize - d;
        let hi = ((m1 - 1) * factor) as isize + (ntaps as isize - 1 - d);
        scratch.clear();
        scratch.reserve((hi - lo + 1) as usize);
        let first = lo.max(0);
        let mut phasor = Complex64::new(1.0, 0.0);
        let (s, c) = (-2.0 * PI * step).sin_cos();
        let w = Complex64::new(c, s);
        for i in lo..=hi {
            let x = if i >= 0 && (i as usize) < n_in {
                iq.samples[i as usize]
            } else {
                Complex64::new(0.0, 0.0)
            };
            if offset == 0.0 {
                scratch.push(x);
            } else {
                if i >= first && (i - first) % 1024 == 0 {
                    phasor = rotation(i as usize, step);
                }
                scratch.push(x * phasor);
                phasor *= w;
            }
        }
        for m in m0..m1 {
            let start = m * factor - m0 * factor;
            let window = &scratch[start..start + ntaps];
            let (mut re, mut im) = (0.0, 0.0);
            for (x, h) in window.iter().zip(&rev) {
                re += x.re * h;
                im += x.im * h;
            }
            out.push(Complex64::new(re, im));
        }
        m0 = m1;
    }
    IqBuffer::new(iq.sample_rate / factor as f64, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Hamming,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| match self {
                // Periodic form: exact overlap-add at hop n/4.
                Window::Hann => 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos(),
                Window::Hamming => hamming(k, n),
                Window::Rectangular => 1.0,
            })
            .collect()
    }
}

/// Short-time magnitude spectrum, frames × bins in dB, bins fftshifted so
/// bin `k` sits at `origin_offset + (k − nfft/2) · bin_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub sample_rate: f64,
    pub nfft: usize,
    pub hop: usize,
    pub frame_rate: f64,
    pub bin_width: f64,
    pub origin_offset: f64,
    pub magnitudes: Vec<Vec<f64>>,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        self.origin_offset + (k as f64 - (self.nfft / 2) as f64) * self.bin_width
    }

    /// Nearest bin to `f`, or `None` outside the span.
    pub fn bin_of(&self, f: f64) -> Option<usize> {
        let k = ((f - self.origin_offset) / self.bin_width).round() + (self.nfft / 2) as f64;
        (k >= 0.0 && k < self.nfft as f64).then_some(k as usize)
    }

    /// Center time of frame `i`, seconds.
    pub fn frame_time(&self, i: usize) -> f64 {
        (i * self.hop + self.nfft / 2) as f64 / self.sample_rate
    }

    /// Lowest and highest bin frequencies.
    pub fn span(&self) -> (f64, f64) {
        (self.bin_frequency(0), self.bin_frequency(self.nfft - 1))
    }
}

/// Magnitudes are scaled so a complex tone of amplitude `A` on a bin center
/// reads `20·log10(A)` dB.
pub fn spectrogram(iq: &IqBuffer, nfft: usize, hop: usize, window: Window) -> Result<Spectrogram> {
    spectrogram_with_origin(iq, nfft, hop, window, 0.0)
}

/// As [`spectrogram`], for a buffer whose 0 Hz sits at `origin_offset`.
pub fn spectrogram_with_origin(
    iq: &IqBuffer,
    nfft: usize,
    hop: usize,
    window: Window,
    origin_offset: f64,
) -> Result<Spectrogram> {
    if !nfft.is_power_of_two() || nfft < 2 {
        return Err(Error::invalid(format!("nfft {nfft} is not a power of two")));
    }
    if hop == 0 || hop > nfft {
        return Err(Error::invalid(format!("hop {hop} outside (0, {nfft}]")));
    }
    if iq.len() < nfft {
        return Err(Error::InsufficientData(format!(
            "{} samples is shorter than nfft {nfft}",
            iq.len()
        )));
    }
    let win = window.coefficients(nfft);
    let gain: f64 = win.iter().sum();
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let frames = 1 + (iq.len() - nfft) / hop;
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut magnitudes = Vec::with_capacity(frames);
    let half = nfft / 2;
    for i in 0..frames {
        let seg = &iq.samples[i * hop..i * hop + nfft];
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&win) {
            *b = x * w;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        let row = (0..nfft)
            .map(|k| to_db(buf[(k + half) % nfft].norm_sqr() / (gain * gain)))
            .collect();
        magnitudes.push(row);
    }
    Ok(Spectrogram {
        sample_rate: iq.sample_rate,
        nfft,
        hop,
        frame_rate: iq.sample_rate / hop as f64,
        bin_width: iq.sample_rate / nfft as f64,
        origin_offset,
        magnitudes,
    })
}

/// Phase-difference discriminator normalized to `deviation`.
pub fn wbfm_demod(iq: &IqBuffer, deviation: f64) -> Result<Vec<f64>> {
    if !(deviation > 0.0) {
        return Err(Error::invalid("deviation must be positive"));
    }
    let k = iq.sample_rate / (2.0 * PI * deviation);
    let mut out = Vec::with_capacity(iq.len());
    if iq.is_empty() {
        return Ok(out);
    }
    out.push(0.0);
    for w in iq.samples.windows(2) {
        out.push((w[1] * w[0].conj()).arg() * k);
    }
    Ok(out)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Reduced `(up, down)` factors for an `in_rate → out_rate` conversion.
pub fn resample_factors(in_rate: f64, out_rate: f64) -> Result<(u64, u64)> {
    let unsupported = || Error::UnsupportedRatio { in_rate, out_rate };
    if !(in_rate > 0.0 && out_rate > 0.0) {
        return Err(unsupported());
    }
    let integral = |r: f64| (r - r.round()).abs() <= 1e-9 * r && r.round() < 1e15;
    if !integral(in_rate) || !integral(out_rate) {
        return Err(unsupported());
    }
    let (a, b) = (in_rate.round() as u64, out_rate.round() as u64);
    let g = gcd(a, b);
    let (up, down) = (b / g, a / g);
    if up > MAX_RESAMPLE_FACTOR || down > MAX_RESAMPLE_FACTOR {
        return Err(unsupported());
    }
    Ok((up, down))
}

/// Polyphase rational resampler with a zero-delay anti-imaging filter.
/// Output sample `m` is aligned with time `m / out_rate`.
pub fn resample(samples: &[f64], in_rate: f64, out_rate: f64) -> Result<Vec<f64>> {
    let (up, down) = resample_factors(in_rate, out_rate)?;
    if up == 1 && down == 1 {
        return Ok(samples.to_vec());
    }
    let (up, down) = (up as usize, down as usize);
    let fast = in_rate * up as f64;
    let narrow = in_rate.min(out_rate);
    let proto = design_lowpass(0.45 * narrow, fast, 0.1 * narrow)?;
    let taps: Vec<f64> = proto.taps.iter().map(|t| t * up as f64).collect();
    let d = proto.delay() as isize;
    let n_out = (samples.len() * up).div_ceil(down);
    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out {
        // y[m] = Σ_k h[k] · u[m·down + d − k], where u is zero-stuffed.
        let center = (m * down) as isize + d;
        // Only k with (center − k) divisible by `up` touch real samples.
        let k0 = center.rem_euclid(up as isize) as usize;
        let mut acc = 0.0;
        let mut k = k0;
        while k < taps.len() {
            let j = (center - k as isize) / up as isize;
            if j >= 0 && (j as usize) < samples.len() {
                acc += taps[k] * samples[j as usize];
            }
            k += up;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Direct-form-I second-order section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn normalized(b: [f64; 3], a0: f64, a1: f64, a2: f64) -> Self {
        Biquad {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [a1 / a0, a2 / a0],
        }
    }

    pub fn lowpass(f: f64, rate: f64, q: f64) -> Self {
        let w = 2.0 * PI * f / rate;
        let alpha = w.sin() / (2.0 * q);
        let c = w.cos();
        Self::normalized(
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0],
            1.0 + alpha,
            -2.0 * c,
            1.0 - alpha,
        )
    }

    pub fn highpass(f: f64, rate: f64, q: f64) -> Self {
        let w = 2.0 * PI * f / rate;
        let alpha = w.sin() / (2.0 * q);
        let c = w.cos();
        Self::normalized(
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
            1.0 + alpha,
            -2.0 * c,
            1.0 - alpha,
        )
    }

    pub fn process(&self, x: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for s in x.iter_mut() {
            let y =
                self.b[0] * *s + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = *s;
            y2 = y1;
            y1 = y;
            *s = y;
        }
    }

    pub fn response(&self, f: f64, rate: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / rate);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[0] * z1 + self.a[1] * z2)
    }
}

/// Q values of a 4th-order Butterworth split into two sections.
const BUTTERWORTH4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_6];

/// 4th-order Butterworth high-pass at `low` cascaded with a 4th-order
/// low-pass at `high`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPass {
    pub sections: Vec<Biquad>,
    pub rate: f64,
}

impl BandPass {
    pub fn new(low: f64, high: f64, rate: f64) -> Result<Self> {
        if !(low > 0.0 && high > low && high < rate / 2.0) {
            return Err(Error::invalid(format!(
                "band-pass {low}..{high} Hz invalid at {rate} Hz"
            )));
        }
        let mut sections = Vec::new();
        for q in BUTTERWORTH4_Q {
            sections.push(Biquad::highpass(low, rate, q));
        }
        for q in BUTTERWORTH4_Q {
            sections.push(Biquad::lowpass(high, rate, q));
        }
        Ok(BandPass { sections, rate })
    }

    pub fn process(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.process(x);
        }
    }

    pub fn response_db(&self, f: f64) -> f64 {
        let h: Complex64 = self
            .sections
            .iter()
            .map(|s| s.response(f, self.rate))
            .product();
        to_db(h.norm_sqr())
    }
}

/// Welch power spectral density; returns `(frequencies, psd)` with bins
/// fftshifted to ascending frequency. Power per hertz.
pub fn welch_psd(iq: &IqBuffer) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut nfft = WELCH_NFFT;
    // Halve the segment until 50%-overlap framing gives enough averages.
    while nfft > 64 && iq.len() < nfft / 2 * (WELCH_MIN_FRAMES + 1) {
        nfft /= 2;
    }
    if iq.len() < nfft {
        return Err(Error::InsufficientData(format!(
            "{} samples is too short for a PSD",
            iq.len()
        )));
    }
    let hop = nfft / 2;
    let win = Window::Hann.coefficients(nfft);
    let norm: f64 = win.iter().map(|w| w * w).sum::<f64>() * iq.sample_rate;
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let frames = 1 + (iq.len() - nfft) / hop;
    let mut acc = vec![0.0; nfft];
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for i in 0..frames {
        for ((b, x), w) in buf.iter_mut().zip(&iq.samples[i * hop..]).zip(&win) {
            *b = x * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let df = iq.sample_rate / nfft as f64;
    let half = nfft / 2;
    let freqs = (0..nfft).map(|k| (k as f64 - half as f64) * df).collect();
    let psd = (0..nfft)
        .map(|k| acc[(k + half) % nfft] / (frames as f64 * norm))
        .collect();
    Ok((freqs, psd))
}

/// `10·log10(P_signal / (N0 · B_signal))` with `N0` averaged over the noise
/// band. Bands are `(low, high)` in hertz and may be negative.
pub fn measure_snr(iq: &IqBuffer, signal_band: (f64, f64), noise_band: (f64, f64)) -> Result<f64> {
    let nyq = iq.sample_rate / 2.0;
    for (name, (lo, hi)) in [("signal", signal_band), ("noise", noise_band)] {
        if !(lo < hi && lo >= -nyq && hi <= nyq) {
            return Err(Error::BandSpec(format!(
                "{name} band ({lo}, {hi}) Hz invalid at {} Hz",
                iq.sample_rate
            )));
        }
    }
    if signal_band.0 < noise_band.1 && noise_band.0 < signal_band.1 {
        return Err(Error::BandSpec(format!(
            "signal band {signal_band:?} overlaps noise band {noise_band:?}"
        )));
    }
    let (freqs, psd) = welch_psd(iq)?;
    let df = iq.sample_rate / freqs.len() as f64;
    let sum = |(lo, hi): (f64, f64)| -> (f64, usize) {
        freqs
            .iter()
            .zip(&psd)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .fold((0.0, 0), |(s, n), (_, p)| (s + p * df, n + 1))
    };
    let (p_sig, n_sig) = sum(signal_band);
    let (p_noise, n_noise) = sum(noise_band);
    if n_sig == 0 || n_noise == 0 {
        return Err(Error::BandSpec("band narrower than one PSD bin".into()));
    }
    let density = p_noise / (n_noise as f64 * df);
    Ok(10.0 * (p_sig / (density * n_sig as f64 * df)).log10())
}

/// Total power in `(low, high)` hertz from a Welch PSD.
pub fn band_power(iq: &IqBuffer, band: (f64, f64)) -> Result<f64> {
    let (freqs, psd) = welch_psd(iq)?;
    let df = iq.sample_rate / freqs.len() as f64;
    Ok(freqs
        .iter()
        .zip(&psd)
        .filter(|(f, _)| **f >= band.0 && **f < band.1)
        .map(|(_, p)| p * df)
        .sum())
}
