//! Receiver IQ synthesis: carrier leak, per-tag double-sideband subcarriers
//! scaled from a distance-calibrated SNR model, and complex white noise.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tag::FrequencyTrack;
use crate::units;

/// Measured SNR anchors: (feet, dB).
pub const DEFAULT_SNR_ANCHORS: [(f64, f64); 3] = [(3.0, 45.0), (9.0, 38.0), (49.0, 15.0)];
pub const DEFAULT_CARRIER_LEAK: f64 = 0.3;
/// Complex noise density, dB relative to full-scale power per hertz.
pub const DEFAULT_NOISE_DENSITY: f64 = -130.0;
/// Channel width over which a discrete-interaction tag's SNR is defined.
pub const DISCRETE_BANDWIDTH: f64 = 20e3;
/// Channel width over which an audio tag's SNR is defined.
pub const AUDIO_BANDWIDTH: f64 = 120e3;
pub const MIN_RATE_DISCRETE: f64 = 1e6;
pub const MIN_RATE_AUDIO: f64 = 2e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    #[serde(deserialize_with = "units::hertz::deserialize")]
    pub sample_rate: f64,
    #[serde(deserialize_with = "units::second::deserialize")]
    pub duration: f64,
    #[serde(default = "default_leak")]
    pub carrier_leak_amplitude: f64,
    /// dBFS per hertz.
    #[serde(default = "default_density")]
    pub noise_floor_density: f64,
    /// When false the noise term is omitted; amplitudes still follow the
    /// nominal density so SNR-scaled signals keep their level.
    #[serde(default = "yes")]
    pub add_noise: bool,
    #[serde(default = "default_anchors")]
    pub snr_anchors: Vec<(f64, f64)>,
    /// Feet from the reader, per tag.
    #[serde(default)]
    pub tag_distances: BTreeMap<String, f64>,
    /// SNR reference bandwidth per tag; tags not listed use 20 kHz.
    #[serde(default)]
    pub tag_bandwidths: BTreeMap<String, f64>,
}

fn default_leak() -> f64 {
    DEFAULT_CARRIER_LEAK
}
fn default_density() -> f64 {
    DEFAULT_NOISE_DENSITY
}
fn yes() -> bool {
    true
}
fn default_anchors() -> Vec<(f64, f64)> {
    DEFAULT_SNR_ANCHORS.to_vec()
}

impl ChannelParams {
    pub fn new(sample_rate: f64, duration: f64) -> Self {
        ChannelParams {
            sample_rate,
            duration,
            carrier_leak_amplitude: DEFAULT_CARRIER_LEAK,
            noise_floor_density: DEFAULT_NOISE_DENSITY,
            add_noise: true,
            snr_anchors: default_anchors(),
            tag_distances: BTreeMap::new(),
            tag_bandwidths: BTreeMap::new(),
        }
    }

    pub fn with_tag(mut self, tag_id: &str, distance_ft: f64, bandwidth: f64) -> Self {
        self.tag_distances.insert(tag_id.to_string(), distance_ft);
        self.tag_bandwidths.insert(tag_id.to_string(), bandwidth);
        self
    }

    pub fn len(&self) -> usize {
        (self.sample_rate * self.duration).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bandwidth(&self, tag_id: &str) -> f64 {
        self.tag_bandwidths
            .get(tag_id)
            .copied()
            .unwrap_or(DISCRETE_BANDWIDTH)
    }

    /// Linear noise power per hertz.
    pub fn noise_density_linear(&self) -> f64 {
        10f64.powf(self.noise_floor_density / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::invalid("duration must be positive"));
        }
        let audio = self.tag_bandwidths.values().any(|b| *b >= AUDIO_BANDWIDTH);
        let min_rate = if audio {
            MIN_RATE_AUDIO
        } else {
            MIN_RATE_DISCRETE
        };
        if !(self.sample_rate >= min_rate) {
            return Err(Error::invalid(format!(
                "sample_rate {} Hz below the {min_rate} Hz minimum",
                self.sample_rate
            )));
        }
        if !(0.0..1.0).contains(&self.carrier_leak_amplitude) {
            return Err(Error::invalid("carrier_leak_amplitude must be in [0, 1)"));
        }
        if !self.noise_floor_density.is_finite() {
            return Err(Error::invalid("noise_floor_density must be finite"));
        }
        if self.snr_anchors.len() < 2 {
            return Err(Error::invalid("need at least two SNR anchors"));
        }
        let mut a = self.snr_anchors.clone();
        a.sort_by(|x, y| x.0.total_cmp(&y.0));
        if a.iter().any(|(d, _)| !(*d > 0.0)) {
            return Err(Error::invalid("anchor distances must be positive"));
        }
        for w in a.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 < w[0].1) {
                return Err(Error::invalid(
                    "SNR anchors must strictly decrease with increasing distance",
                ));
            }
        }
        for (id, d) in &self.tag_distances {
            if !(*d > 0.0) {
                return Err(Error::invalid(format!(
                    "tag '{id}': distance must be positive"
                )));
            }
        }
        for (id, b) in &self.tag_bandwidths {
            if !(*b > 0.0) {
                return Err(Error::invalid(format!(
                    "tag '{id}': bandwidth must be positive"
                )));
            }
        }
        Ok(())
    }

    fn sorted_anchors(&self) -> Vec<(f64, f64)> {
        let mut a = self.snr_anchors.clone();
        a.sort_by(|x, y| x.0.total_cmp(&y.0));
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqBuffer {
    pub sample_rate: f64,
    pub samples: Vec<Complex64>,
}

impl IqBuffer {
    pub fn new(sample_rate: f64, samples: Vec<Complex64>) -> Self {
        IqBuffer {
            sample_rate,
            samples,
        }
    }

    pub fn zeros(sample_rate: f64, len: usize) -> Self {
        IqBuffer::new(sample_rate, vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// SNR at `d` feet by piecewise-linear interpolation in log10(distance).
pub fn snr_at_distance(params: &ChannelParams, d: f64) -> Result<f64> {
    let a = params.sorted_anchors();
    let (min, max) = (a[0].0, a[a.len() - 1].0);
    if !(d >= min && d <= max) {
        return Err(Error::Extrapolation {
            distance: d,
            min,
            max,
        });
    }
    for w in a.windows(2) {
        let ((d0, s0), (d1, s1)) = (w[0], w[1]);
        if d <= d1 {
            if d == d1 {
                return Ok(s1);
            }
            let u = (d.log10() - d0.log10()) / (d1.log10() - d0.log10());
            return Ok(s0 + u * (s1 - s0));
        }
    }
    unreachable!("d is inside the anchor hull")
}

/// Inverse of [`snr_at_distance`].
pub fn distance_for_snr(params: &ChannelParams, snr_db: f64) -> Result<f64> {
    let a = params.sorted_anchors();
    let (hi, lo) = (a[0].1, a[a.len() - 1].1);
    if !(snr_db <= hi && snr_db >= lo) {
        return Err(Error::invalid(format!(
            "SNR {snr_db} dB outside the anchor range [{lo}, {hi}] dB"
        )));
    }
    for w in a.windows(2) {
        let ((d0, s0), (d1, s1)) = (w[0], w[1]);
        if snr_db >= s1 {
            let u = (s0 - snr_db) / (s0 - s1);
            return Ok(10f64.powf(d0.log10() + u * (d1.log10() - d0.log10())));
        }
    }
    unreachable!("snr is inside the anchor range")
}

/// Subcarrier amplitude for `tag_id`: one sideband carries `a²/4`, and that
/// power over the tag's bandwidth of noise equals the distance SNR.
pub fn tag_amplitude(params: &ChannelParams, tag_id: &str) -> Result<f64> {
    let d = params
        .tag_distances
        .get(tag_id)
        .ok_or_else(|| Error::invalid(format!("tag '{tag_id}' has no distance")))?;
    let snr = snr_at_distance(params, *d)?;
    let noise = params.noise_density_linear() * params.bandwidth(tag_id);
    Ok(2.0 * (noise * 10f64.powf(snr / 10.0)).sqrt())
}

/// Running phase in radians: `φ[0] = 0`, `φ[n] = φ[n-1] + 2π f[n] / fs`.
pub fn phase_accumulate(track: &FrequencyTrack) -> Vec<f64> {
    let step = 2.0 * PI / track.sample_rate;
    let mut out = Vec::with_capacity(track.samples.len());
    let mut phi = 0.0;
    for (n, f) in track.samples.iter().enumerate() {
        if n > 0 {
            phi += step * f;
        }
        out.push(phi);
    }
    out
}

/// Incremental IQ builder. Adds one track at a time so long captures never
/// hold more than one frequency track alongside the output buffer.
#[derive(Debug)]
pub struct Synthesizer {
    params: ChannelParams,
    buffer: IqBuffer,
    amplitudes: Vec<(String, f64)>,
}

impl Synthesizer {
    pub fn new(params: &ChannelParams) -> Result<Self> {
        params.validate()?;
        let n = params.len();
        let leak = Complex64::new(params.carrier_leak_amplitude, 0.0);
        Ok(Synthesizer {
            params: params.clone(),
            buffer: IqBuffer::new(params.sample_rate, vec![leak; n]),
            amplitudes: Vec::new(),
        })
    }

    pub fn add_track(&mut self, tag_id: &str, track: &FrequencyTrack) -> Result<f64> {
        if track.sample_rate != self.params.sample_rate {
            return Err(Error::Mismatch(format!(
                "track '{tag_id}' rate {} Hz != channel rate {} Hz",
                track.sample_rate, self.params.sample_rate
            )));
        }
        if track.samples.len() != self.buffer.len() {
            return Err(Error::Mismatch(format!(
                "track '{tag_id}' has {} samples, channel expects {}",
                track.samples.len(),
                self.buffer.len()
            )));
        }
        let a = tag_amplitude(&self.params, tag_id)?;
        add_subcarrier(&mut self.buffer, track, a);
        self.amplitudes.push((tag_id.to_string(), a));
        Ok(a)
    }

    /// Adds noise (if enabled) and checks full scale.
    pub fn finish(mut self, seed: u64) -> Result<IqBuffer> {
        if self.params.add_noise {
            add_noise(&mut self.buffer, self.params.noise_density_linear(), seed);
        }
        check_clipping(&self.buffer, &self.amplitudes)?;
        Ok(self.buffer)
    }
}

/// Adds `a · cos φ[n]` to the real part wherever the track is active.
pub fn add_subcarrier(buf: &mut IqBuffer, track: &FrequencyTrack, a: f64) {
    // Phase kept in wrapped cycles so hour-long captures keep full precision.
    let inv_fs = 1.0 / track.sample_rate;
    let mut cycles = 0.0f64;
    for (n, ((s, f), active)) in buf
        .samples
        .iter_mut()
        .zip(&track.samples)
        .zip(&track.active_mask)
        .enumerate()
    {
        if n > 0 {
            cycles += f * inv_fs;
            cycles -= cycles.floor();
        }
        if *active {
            s.re += a * (2.0 * PI * cycles).cos();
        }
    }
}

/// Complex AWGN with `density` power per hertz (total power `density · fs`).
pub fn add_noise(buf: &mut IqBuffer, density: f64, seed: u64) {
    let sigma = (density * buf.sample_rate / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in &mut buf.samples {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *s += Complex64::new(sigma * re, sigma * im);
    }
}

fn check_clipping(buf: &IqBuffer, amplitudes: &[(String, f64)]) -> Result<()> {
    let peak = buf.peak();
    if peak > 1.0 {
        let mut tags = amplitudes.to_vec();
        tags.sort_by(|a, b| b.1.total_cmp(&a.1));
        return Err(Error::Clipping {
            tags: tags.into_iter().map(|(t, _)| t).collect(),
            peak,
        });
    }
    Ok(())
}

/// `s[n] = leak + Σ a_k cos φ_k[n] + w[n]`.
pub fn synthesize(
    tracks: &[(String, FrequencyTrack)],
    params: &ChannelParams,
    seed: u64,
) -> Result<IqBuffer> {
    let mut synth = Synthesizer::new(params)?;
    for (id, track) in tracks {
        synth.add_track(id, track)?;
    }
    synth.finish(seed)
}

/// Pointwise sum of equal-shape buffers, checked for full scale.
pub fn mix_buffers(buffers: &[IqBuffer]) -> Result<IqBuffer> {
    let first = buffers
        .first()
        .ok_or_else(|| Error::invalid("nothing to mix"))?;
    let mut out = first.clone();
    for (i, b) in buffers.iter().enumerate().skip(1) {
        if b.sample_rate != first.sample_rate || b.len() != first.len() {
            return Err(Error::Mismatch(format!(
                "buffer {i} is {} samples at {} Hz, expected {} at {} Hz",
                b.len(),
                b.sample_rate,
                first.len(),
                first.sample_rate
            )));
        }
        for (o, s) in out.samples.iter_mut().zip(&b.samples) {
            *o += s;
        }
    }
    let peak = out.peak();
    if peak > 1.0 {
        return Err(Error::Clipping {
            tags: Vec::new(),
            peak,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rustfft::FftPlanner;

    fn quiet(rate: f64, dur: f64) -> ChannelParams {
        let mut p = ChannelParams::new(rate, dur);
        p.add_noise = false;
        p
    }

    fn spectrum(buf: &IqBuffer) -> Vec<f64> {
        let mut x = buf.samples.clone();
        FftPlanner::new().plan_fft_forward(x.len()).process(&mut x);
        let n = x.len() as f64;
        x.iter().map(|c| c.norm_sqr() / (n * n)).collect()
    }

    #[test]
    fn anchors_exact() {
        let p = ChannelParams::new(1e6, 1.0);
        assert_eq!(snr_at_distance(&p, 3.0).unwrap(), 45.0);
        assert_eq!(snr_at_distance(&p, 9.0).unwrap(), 38.0);
        assert_eq!(snr_at_distance(&p, 49.0).unwrap(), 15.0);
        assert!(matches!(
            snr_at_distance(&p, 2.0),
            Err(Error::Extrapolation { .. })
        ));
        assert!(snr_at_distance(&p, 50.0).is_err());
    }

    #[test]
    fn inverse_distance() {
        let p = ChannelParams::new(1e6, 1.0);
        let d = distance_for_snr(&p, 30.0).unwrap();
        assert!((d - 16.2).abs() < 0.1, "{d}");
        assert!((snr_at_distance(&p, d).unwrap() - 30.0).abs() < 1e-9);
        assert!((distance_for_snr(&p, 45.0).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn anchor_validation() {
        let mut p = ChannelParams::new(1e6, 1.0);
        p.snr_anchors = vec![(3.0, 45.0), (9.0, 46.0)];
        assert!(p.validate().is_err());
        let mut p = ChannelParams::new(1e6, 1.0).with_tag("a", 3.0, AUDIO_BANDWIDTH);
        assert!(p.validate().is_err());
        p.sample_rate = 2e6;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn no_tags_is_constant_leak() {
        let p = quiet(1e6, 1e-3);
        let b = synthesize(&[], &p, 0).unwrap();
        assert_eq!(b.len(), 1000);
        assert!(b.samples.iter().all(|s| *s == Complex64::new(0.3, 0.0)));
    }

    #[test]
    fn spectral_lines_only_at_subcarrier_and_dc() {
        let p = quiet(1e6, 0.01).with_tag("t", 3.0, DISCRETE_BANDWIDTH);
        let tr = FrequencyTrack::constant(350e3, 1e6, p.len());
        let b = synthesize(&[("t".into(), tr)], &p, 0).unwrap();
        let s = spectrum(&b);
        let bin = |f: f64| ((f / 100.0).round() as isize).rem_euclid(10_000) as usize;
        let dc = s[0];
        let line = s[bin(350e3)];
        assert!((s[bin(-350e3)] - line).abs() < 1e-3 * line);
        for (k, v) in s.iter().enumerate() {
            if k != 0 && k != bin(350e3) && k != bin(-350e3) {
                assert!(10.0 * (v / dc).log10() < -80.0, "bin {k}");
            }
        }
    }

    #[test]
    fn energy_bookkeeping() {
        let p = quiet(1e6, 0.02).with_tag("t", 9.0, DISCRETE_BANDWIDTH);
        let a = tag_amplitude(&p, "t").unwrap();
        let tr = FrequencyTrack::constant(289_123.0, 1e6, p.len());
        let b = synthesize(&[("t".into(), tr)], &p, 0).unwrap();
        let s = spectrum(&b);
        let n = s.len();
        let df = 1e6 / n as f64;
        let band = |c: f64| -> f64 {
            (0..n)
                .filter(|k| {
                    let f = if *k < n / 2 {
                        *k as f64
                    } else {
                        *k as f64 - n as f64
                    } * df;
                    (f - c).abs() <= DISCRETE_BANDWIDTH
                })
                .map(|k| s[k])
                .sum()
        };
        let total = band(289_123.0) + band(-289_123.0);
        let err_db = 10.0 * (total / (a * a / 2.0)).log10();
        assert!(err_db.abs() < 0.5, "{err_db}");
    }

    #[test]
    fn inactive_samples_are_silent() {
        let p = quiet(1e6, 1e-3).with_tag("t", 3.0, DISCRETE_BANDWIDTH);
        let mut tr = FrequencyTrack::constant(300e3, 1e6, p.len());
        tr.active_mask.iter_mut().for_each(|a| *a = false);
        let b = synthesize(&[("t".into(), tr)], &p, 0).unwrap();
        assert!(b.samples.iter().all(|s| *s == Complex64::new(0.3, 0.0)));
    }

    #[test]
    fn seeded_noise_reproducible_with_expected_power() {
        let p = ChannelParams::new(1e6, 0.05);
        let a = synthesize(&[], &p, 7).unwrap();
        let b = synthesize(&[], &p, 7).unwrap();
        let c = synthesize(&[], &p, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let noise: f64 = a
            .samples
            .iter()
            .map(|s| (s - Complex64::new(0.3, 0.0)).norm_sqr())
            .sum::<f64>()
            / a.len() as f64;
        let expect = p.noise_density_linear() * 1e6;
        assert!((noise / expect - 1.0).abs() < 0.02);
    }

    #[test]
    fn clipping_names_tags() {
        let mut p = quiet(1e6, 1e-3).with_tag("loud", 3.0, DISCRETE_BANDWIDTH);
        p.noise_floor_density = -60.0;
        let tr = FrequencyTrack::constant(300e3, 1e6, p.len());
        match synthesize(&[("loud".into(), tr)], &p, 0) {
            Err(Error::Clipping { tags, peak }) => {
                assert_eq!(tags, vec!["loud".to_string()]);
                assert!(peak > 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mismatched_track_rejected() {
        let p = quiet(1e6, 1e-3).with_tag("t", 3.0, DISCRETE_BANDWIDTH);
        let tr = FrequencyTrack::constant(300e3, 1e6, 10);
        assert!(matches!(
            synthesize(&[("t".into(), tr)], &p, 0),
            Err(Error::Mismatch(_))
        ));
        let tr = FrequencyTrack::constant(300e3, 2e6, p.len());
        assert!(synthesize(&[("t".into(), tr)], &p, 0).is_err());
        let tr = FrequencyTrack::constant(300e3, 1e6, p.len());
        assert!(synthesize(&[("nodist".into(), tr)], &p, 0).is_err());
    }

    #[test]
    fn phase_progression() {
        let tr = FrequencyTrack::constant(1234.5, 1e5, 1000);
        let phi = phase_accumulate(&tr);
        assert_eq!(phi[0], 0.0);
        let expect = 2.0 * PI * 1234.5 * 999.0 / 1e5;
        assert!((phi[999] - expect).abs() < 1e-9);
        let zero = FrequencyTrack::constant(0.0, 1e5, 100);
        assert!(phase_accumulate(&zero).iter().all(|p| *p == 0.0));
    }

    #[test]
    fn triangle_phase_matches_closed_form() {
        let fs = 1e6;
        let n = 20_000;
        let f = |k: usize| {
            let u = k as f64 / n as f64;
            300e3 + 20e3 * if u < 0.5 { 2.0 * u } else { 2.0 - 2.0 * u }
        };
        let tr = FrequencyTrack {
            sample_rate: fs,
            f0: 300e3,
            samples: (0..n).map(f).collect(),
            active_mask: vec![true; n],
        };
        let phi = phase_accumulate(&tr);
        // Closed-form sum of the piecewise-linear sequence, each segment an
        // arithmetic series.
        let half = n / 2;
        let slope = 40e3 / n as f64;
        let tri = |a: usize, b: usize| (b * (b + 1) - a * (a + 1)) as f64 / 2.0;
        let closed = |m: usize| -> f64 {
            let up = m.min(half);
            let mut cycles = up as f64 * 300e3 + slope * tri(0, up);
            if m > half {
                cycles += (m - half) as f64 * 340e3 - slope * tri(half, m);
            }
            2.0 * PI * cycles / fs
        };
        for m in (1..n).step_by(997) {
            let err = (phi[m] - closed(m)).abs();
            assert!(err / m as f64 <= 1e-6, "m={m} err={err}");
        }
    }

    #[test]
    fn mixing_identities() {
        let p = quiet(1e6, 1e-3).with_tag("t", 3.0, DISCRETE_BANDWIDTH);
        let tr = FrequencyTrack::constant(300e3, 1e6, p.len());
        let b = synthesize(&[("t".into(), tr)], &p, 0).unwrap();
        let zero = IqBuffer::zeros(1e6, b.len());
        assert_eq!(mix_buffers(&[b.clone(), zero]).unwrap(), b);
        let neg = IqBuffer::new(1e6, b.samples.iter().map(|s| -s).collect());
        assert!(mix_buffers(&[b.clone(), neg])
            .unwrap()
            .samples
            .iter()
            .all(|s| s.norm() == 0.0));
        let short = IqBuffer::zeros(1e6, 5);
        assert!(mix_buffers(&[b, short]).is_err());
    }

    #[test]
    fn linearity_union_equals_mix() {
        let mut p = quiet(1e6, 2e-3)
            .with_tag("a", 3.0, DISCRETE_BANDWIDTH)
            .with_tag("b", 20.0, DISCRETE_BANDWIDTH);
        let ta = FrequencyTrack::constant(289e3, 1e6, p.len());
        let tb = FrequencyTrack::constant(349e3, 1e6, p.len());
        let both =
            synthesize(&[("a".into(), ta.clone()), ("b".into(), tb.clone())], &p, 0).unwrap();
        let only_a = synthesize(&[("a".into(), ta)], &p, 0).unwrap();
        p.carrier_leak_amplitude = 0.0;
        let only_b = synthesize(&[("b".into(), tb)], &p, 0).unwrap();
        assert_eq!(mix_buffers(&[only_a, only_b]).unwrap(), both);
    }

    proptest! {
        #[test]
        fn snr_monotone_and_bounded(d1 in 3.0f64..49.0, d2 in 3.0f64..49.0) {
            let p = ChannelParams::new(1e6, 1.0);
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let (s_lo, s_hi) = (snr_at_distance(&p, lo).unwrap(), snr_at_distance(&p, hi).unwrap());
            prop_assert!(s_lo >= s_hi);
            prop_assert!((15.0..=45.0).contains(&s_lo));
        }
    }
}
