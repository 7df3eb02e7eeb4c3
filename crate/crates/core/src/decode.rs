//! Interaction decoders on top of the DSP chain, plus the channel planner.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{IqBuffer, AUDIO_BANDWIDTH, DISCRETE_BANDWIDTH};
use crate::dsp::{self, from_db, BandPass, Spectrogram, Window};
use crate::error::{Error, Result};
use crate::tag::{BAND_HIGH, BAND_LOW};
use crate::units;

/// Discrete chain: low-pass and decimation to 100 kHz at 1 MHz input.
pub const DISCRETE_CUTOFF: f64 = 30e3;
pub const DISCRETE_TRANSITION: f64 = 20e3;
pub const DISCRETE_OUTPUT_RATE: f64 = 100e3;
pub const SPECTROGRAM_NFFT: usize = 512;
pub const SPECTROGRAM_HOP: usize = 128;
/// Half-width of the window summed around each touch landmark.
pub const TOUCH_HALF_WIDTH: f64 = 3e3;
/// Noise floor is estimated over this half-width around the band center.
pub const FLOOR_HALF_WIDTH: f64 = 20e3;
pub const TOUCH_THRESHOLD_DB: f64 = 10.0;
pub const TOUCH_HYSTERESIS_DB: f64 = 3.0;
/// A press must stay above threshold this long; rejects glides through
/// intermediate landmarks.
pub const TOUCH_MIN_HOLD: f64 = 20e-3;
/// Peak-track frames below floor + this margin are "no carrier".
pub const PEAK_MARGIN_DB: f64 = 6.0;
/// Frames this far below idle belong to a swipe.
pub const SWIPE_MARGIN: f64 = 2.5e3;
pub const SWIPE_SMOOTH_WINDOW: usize = 31;
/// Slope dead band, hertz per second.
pub const SWIPE_EPSILON: f64 = 1e3;
/// Swipe gaps shorter than this are bridged.
pub const SWIPE_MERGE_GAP: f64 = 30e-3;
pub const ID_MIN_DWELL: f64 = 0.1;
pub const ID_SMOOTH_WINDOW: usize = 9;
/// Digit dwells separated by more idle than this start a new read.
pub const ID_SEQUENCE_GAP: f64 = 1.0;
/// Frames within this distance of idle count as idle for ID segmentation.
pub const IDLE_TOLERANCE: f64 = 2.5e3;
/// Audio chain.
pub const AUDIO_DEVIATION: f64 = 60e3;
pub const AUDIO_CUTOFF: f64 = 62e3;
pub const AUDIO_TRANSITION: f64 = 16e3;
pub const AUDIO_INTERMEDIATE_RATE: f64 = 200e3;
pub const AUDIO_BAND: (f64, f64) = (60.0, 4e3);
pub const AUDIO_OUTPUT_RATE: f64 = 48e3;
/// Planner guard between neighboring channels.
pub const GUARD: f64 = 5e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    Touch,
    Swipe,
    Id,
    Audio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitBand {
    pub digit: u8,
    #[serde(deserialize_with = "units::hertz::deserialize")]
    pub low: f64,
    #[serde(deserialize_with = "units::hertz::deserialize")]
    pub high: f64,
}

impl DigitBand {
    pub fn contains(&self, f: f64) -> bool {
        f >= self.low && f <= self.high
    }
}

/// The published digit bands for a 345 kHz barcode tag.
pub fn default_digit_bands() -> Vec<DigitBand> {
    vec![
        DigitBand {
            digit: 3,
            low: 318e3,
            high: 325e3,
        },
        DigitBand {
            digit: 2,
            low: 330e3,
            high: 335e3,
        },
        DigitBand {
            digit: 1,
            low: 339e3,
            high: 341e3,
        },
    ]
}

/// Receiver-side description of one tag's channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagBandSpec {
    pub tag_id: String,
    pub mode: BandMode,
    #[serde(deserialize_with = "units::hertz::deserialize")]
    pub center: f64,
    #[serde(default, deserialize_with = "units::hertz::option::deserialize")]
    pub bandwidth: Option<f64>,
    /// Label → frequency; must include "idle" for discrete modes.
    #[serde(default)]
    pub landmarks: BTreeMap<String, f64>,
    #[serde(default)]
    pub digit_bands: Vec<DigitBand>,
    #[serde(default, deserialize_with = "units::hertz::option::deserialize")]
    pub deviation: Option<f64>,
}

impl TagBandSpec {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth.unwrap_or(match self.mode {
            BandMode::Audio => AUDIO_BANDWIDTH,
            _ => DISCRETE_BANDWIDTH,
        })
    }

    pub fn deviation(&self) -> f64 {
        self.deviation.unwrap_or(AUDIO_DEVIATION)
    }

    pub fn idle(&self) -> Option<f64> {
        self.landmarks.get("idle").copied()
    }

    /// Frequency the discrete chain translates to 0 Hz: the midpoint of all
    /// landmarks and digit bands, or `center` if there are none.
    pub fn analysis_center(&self) -> f64 {
        let pts = self
            .landmarks
            .values()
            .copied()
            .chain(self.digit_bands.iter().flat_map(|b| [b.low, b.high]));
        let (lo, hi) = pts.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| {
            (lo.min(f), hi.max(f))
        });
        if lo.is_finite() {
            (lo + hi) / 2.0
        } else {
            self.center
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BandSpec(format!("band '{}': {m}", self.tag_id)));
        if !(self.center > 0.0) {
            return bad("center must be positive".into());
        }
        if !(self.bandwidth() > 0.0) {
            return bad("bandwidth must be positive".into());
        }
        if self.mode != BandMode::Audio && self.idle().is_none() {
            return bad("discrete bands need an 'idle' landmark".into());
        }
        match self.mode {
            BandMode::Touch => {
                if self.landmarks.len() < 2 {
                    return bad("touch needs idle plus at least one button landmark".into());
                }
                let l: Vec<(&String, &f64)> = self.landmarks.iter().collect();
                for (i, a) in l.iter().enumerate() {
                    for b in &l[i + 1..] {
                        if (a.1 - b.1).abs() < 2.0 * TOUCH_HALF_WIDTH {
                            return bad(format!(
                                "landmark windows '{}' and '{}' overlap",
                                a.0, b.0
                            ));
                        }
                    }
                }
            }
            BandMode::Id => {
                if self.digit_bands.is_empty() {
                    return bad("id mode needs digit bands".into());
                }
                for (i, a) in self.digit_bands.iter().enumerate() {
                    if !(a.low < a.high) {
                        return bad(format!("digit {} band is empty", a.digit));
                    }
                    for b in &self.digit_bands[i + 1..] {
                        if a.low <= b.high && b.low <= a.high {
                            return bad(format!("digit bands {} and {} overlap", a.digit, b.digit));
                        }
                    }
                }
            }
            BandMode::Swipe | BandMode::Audio => {}
        }
        if self.mode == BandMode::Audio && !(self.deviation() > 0.0) {
            return bad("deviation must be positive".into());
        }
        Ok(())
    }

    /// Landmarks outside `center ± bandwidth`. Wide digit bands are legal
    /// but reported.
    pub fn warnings(&self) -> Vec<String> {
        let (lo, hi) = (
            self.center - self.bandwidth(),
            self.center + self.bandwidth(),
        );
        let mut out = Vec::new();
        for (label, f) in &self.landmarks {
            if *f < lo || *f > hi {
                out.push(format!(
                    "band '{}': landmark '{label}' at {:.1} kHz lies outside center ± bandwidth",
                    self.tag_id,
                    f / 1e3
                ));
            }
        }
        for b in &self.digit_bands {
            if b.low < lo || b.high > hi {
                out.push(format!(
                    "band '{}': digit {} band {:.1}-{:.1} kHz exceeds center ± bandwidth",
                    self.tag_id,
                    b.digit,
                    b.low / 1e3,
                    b.high / 1e3
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwipeDirection {
    Left,
    Right,
    NoSwipe,
}

impl SwipeDirection {
    pub fn label(self) -> &'static str {
        match self {
            SwipeDirection::Left => "left",
            SwipeDirection::Right => "right",
            SwipeDirection::NoSwipe => "none",
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            SwipeDirection::Left => SwipeDirection::Right,
            SwipeDirection::Right => SwipeDirection::Left,
            SwipeDirection::NoSwipe => SwipeDirection::NoSwipe,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    TouchPress(String),
    TouchRelease(String),
    Swipe(SwipeDirection),
    IdRead(Vec<u8>),
    AudioSegment(String),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::TouchPress(_) => "touch_press",
            EventKind::TouchRelease(_) => "touch_release",
            EventKind::Swipe(_) => "swipe",
            EventKind::IdRead(_) => "id_read",
            EventKind::AudioSegment(_) => "audio_segment",
        }
    }

    pub fn payload(&self) -> String {
        match self {
            EventKind::TouchPress(l) | EventKind::TouchRelease(l) => l.clone(),
            EventKind::Swipe(d) => d.label().to_string(),
            EventKind::IdRead(d) => d.iter().map(u8::to_string).collect::<Vec<_>>().join(","),
            EventKind::AudioSegment(p) => p.clone(),
        }
    }

    pub fn parse(name: &str, payload: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad event '{name}' payload '{payload}'"));
        Ok(match name {
            "touch_press" => EventKind::TouchPress(payload.to_string()),
            "touch_release" => EventKind::TouchRelease(payload.to_string()),
            "swipe" => EventKind::Swipe(match payload {
                "left" => SwipeDirection::Left,
                "right" => SwipeDirection::Right,
                "none" => SwipeDirection::NoSwipe,
                _ => return Err(bad()),
            }),
            "id_read" => EventKind::IdRead(if payload.is_empty() {
                Vec::new()
            } else {
                payload
                    .split(',')
                    .map(|d| d.parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?
            }),
            "audio_segment" => EventKind::AudioSegment(payload.to_string()),
            _ => return Err(bad()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedEvent {
    pub tag_id: String,
    pub timestamp: f64,
    pub kind: EventKind,
    pub confidence: f64,
}

impl fmt::Display for DecodedEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.6}\t{}\t{}\t{}\t{:.3}",
            self.timestamp,
            self.tag_id,
            self.kind.name(),
            self.kind.payload(),
            self.confidence
        )
    }
}

/// Sorts by timestamp, keeping per-tag order stable.
pub fn merge_events(mut events: Vec<DecodedEvent>) -> Vec<DecodedEvent> {
    events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    events
}

// ---------------------------------------------------------------------------
// Spectrogram helpers

/// Per-frame noise power per bin: median over `(lo, hi)` divided by ln 2,
/// which is the mean of exponentially distributed bin powers.
fn frame_floor(row: &[f64], bins: std::ops::Range<usize>) -> f64 {
    let mut p: Vec<f64> = row[bins].iter().map(|db| from_db(*db)).collect();
    if p.is_empty() {
        return 0.0;
    }
    let mid = p.len() / 2;
    let (_, m, _) = p.select_nth_unstable_by(mid, f64::total_cmp);
    *m / std::f64::consts::LN_2
}

fn bin_range(spec: &Spectrogram, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let first = spec.bin_of(lo).unwrap_or(0);
    let last = spec.bin_of(hi).unwrap_or(spec.nfft - 1);
    first..last + 1
}

/// Per-frame argmax frequency inside `band`; `None` where the peak is less
/// than 6 dB over the in-band noise floor.
pub fn peak_track(spec: &Spectrogram, band: (f64, f64)) -> Result<Vec<Option<f64>>> {
    let (lo, hi) = spec.span();
    if !(band.0 < band.1) || band.1 < lo || band.0 > hi {
        return Err(Error::BandSpec(format!(
            "peak band {:?} empty or outside {:.0}..{:.0} Hz",
            band, lo, hi
        )));
    }
    let bins = bin_range(spec, band.0.max(lo), band.1.min(hi));
    if bins.is_empty() {
        return Err(Error::BandSpec("peak band has no bins".into()));
    }
    let floor_bins = bin_range(
        spec,
        (spec.origin_offset - FLOOR_HALF_WIDTH).max(lo),
        (spec.origin_offset + FLOOR_HALF_WIDTH).min(hi),
    );
    Ok(spec
        .magnitudes
        .iter()
        .map(|row| {
            let mut best = bins.start;
            for k in bins.clone() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            let floor = frame_floor(row, floor_bins.clone());
            (from_db(row[best]) >= floor * from_db(PEAK_MARGIN_DB))
                .then(|| spec.bin_frequency(best))
        })
        .collect())
}

/// Centered moving average ignoring `None` frames.
pub fn smooth_track(track: &[Option<f64>], window: usize) -> Result<Vec<Option<f64>>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "smoothing window {window} must be odd"
        )));
    }
    let h = window / 2;
    let n = track.len();
    // Prefix sums over valid frames.
    let mut sum = vec![0.0; n + 1];
    let mut cnt = vec![0usize; n + 1];
    for (i, v) in track.iter().enumerate() {
        sum[i + 1] = sum[i] + v.unwrap_or(0.0);
        cnt[i + 1] = cnt[i] + v.is_some() as usize;
    }
    Ok((0..n)
        .map(|i| {
            if window == 1 {
                return track[i];
            }
            let (a, b) = (i.saturating_sub(h), (i + h + 1).min(n));
            let c = cnt[b] - cnt[a];
            (c > 0).then(|| (sum[b] - sum[a]) / c as f64)
        })
        .collect())
}

/// Direction of a single swipe track. The track is smoothed, the span
/// between its global extremes is fitted with a line, and the slope sign
/// decides: ascending frequency is `Right`.
pub fn swipe_direction(
    track: &[Option<f64>],
    frame_rate: f64,
    window: usize,
    epsilon: f64,
) -> Result<SwipeDirection> {
    Ok(swipe_fit(track, frame_rate, window, epsilon)?.0)
}

/// Direction and the fraction of fitted steps that agree with it.
fn swipe_fit(
    track: &[Option<f64>],
    frame_rate: f64,
    window: usize,
    epsilon: f64,
) -> Result<(SwipeDirection, f64)> {
    if track.len() < 2 * window {
        return Err(Error::InsufficientData(format!(
            "swipe track of {} frames is shorter than twice the {window}-frame window",
            track.len()
        )));
    }
    let s = smooth_track(track, window)?;
    let valid: Vec<(usize, f64)> = s
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|f| (i, f)))
        .collect();
    if valid.len() < 2 {
        return Ok((SwipeDirection::NoSwipe, 0.0));
    }
    let min = valid.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let max = valid.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok((SwipeDirection::NoSwipe, 1.0));
    }
    // Span from the first frame at either extreme to the last one, which is
    // symmetric under time reversal. The tolerance absorbs rounding in the
    // running sums, which differs between a track and its reverse.
    const EXTREME_TOLERANCE: f64 = 1e-3;
    let at_extreme = |f: f64| f - min <= EXTREME_TOLERANCE || max - f <= EXTREME_TOLERANCE;
    let a = valid.iter().find(|v| at_extreme(v.1)).unwrap().0;
    let b = valid.iter().rev().find(|v| at_extreme(v.1)).unwrap().0;
    let pts: Vec<(f64, f64)> = valid
        .iter()
        .filter(|v| v.0 >= a && v.0 <= b)
        .map(|v| (v.0 as f64 / frame_rate, v.1))
        .collect();
    if pts.len() < 2 {
        return Ok((SwipeDirection::NoSwipe, 0.0));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    let dir = if slope > epsilon {
        SwipeDirection::Right
    } else if slope < -epsilon {
        SwipeDirection::Left
    } else {
        SwipeDirection::NoSwipe
    };
    let agree = pts
        .windows(2)
        .filter(|w| match dir {
            SwipeDirection::Right => w[1].1 >= w[0].1,
            SwipeDirection::Left => w[1].1 <= w[0].1,
            SwipeDirection::NoSwipe => true,
        })
        .count() as f64
        / (pts.len() - 1) as f64;
    Ok((dir, agree))
}

/// Frame ranges where the track sits more than [`SWIPE_MARGIN`] below idle,
/// with short dropouts bridged.
pub fn swipe_segments(track: &[Option<f64>], idle: f64, frame_rate: f64) -> Vec<(usize, usize)> {
    let below = |v: &Option<f64>| matches!(v, Some(f) if *f < idle - SWIPE_MARGIN);
    let gap = (SWIPE_MERGE_GAP * frame_rate).round() as usize;
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < track.len() {
        if below(&track[i]) {
            let start = i;
            while i < track.len() && below(&track[i]) {
                i += 1;
            }
            match out.last_mut() {
                Some(last) if start - last.1 <= gap => last.1 = i,
                _ => out.push((start, i)),
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Decodes every swipe in a peak track.
pub fn decode_swipes(
    tag_id: &str,
    track: &[Option<f64>],
    idle: f64,
    spec: &Spectrogram,
) -> Vec<DecodedEvent> {
    let mut out = Vec::new();
    for (a, b) in swipe_segments(track, idle, spec.frame_rate) {
        let Ok((dir, conf)) = swipe_fit(
            &track[a..b],
            spec.frame_rate,
            SWIPE_SMOOTH_WINDOW,
            SWIPE_EPSILON,
        ) else {
            continue;
        };
        if dir != SwipeDirection::NoSwipe {
            out.push(DecodedEvent {
                tag_id: tag_id.to_string(),
                timestamp: spec.frame_time(a),
                kind: EventKind::Swipe(dir),
                confidence: conf,
            });
        }
    }
    out
}

/// One classified digit dwell.
#[derive(Debug, Clone, PartialEq)]
pub struct Dwell {
    pub start: usize,
    pub end: usize,
    pub digit: Option<u8>,
    /// Share of the dwell's frames inside the winning band.
    pub purity: f64,
}

fn id_dwells(track: &[Option<f64>], spec: &TagBandSpec, min_dwell: usize) -> Vec<Dwell> {
    let idle = spec.idle().unwrap_or(spec.center);
    let is_idle = |v: &Option<f64>| match v {
        None => true,
        Some(f) => (f - idle).abs() <= IDLE_TOLERANCE,
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < track.len() {
        if is_idle(&track[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < track.len() && !is_idle(&track[i]) {
            i += 1;
        }
        let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
        for f in track[start..i].iter().flatten() {
            if let Some(b) = spec.digit_bands.iter().find(|b| b.contains(*f)) {
                *counts.entry(b.digit).or_default() += 1;
            }
        }
        let best = counts
            .iter()
            .max_by_key(|(_, c)| **c)
            .map(|(d, c)| (*d, *c));
        let len = i - start;
        let (digit, purity) = match best {
            Some((d, c)) if c >= min_dwell => (Some(d), c as f64 / len as f64),
            Some((_, c)) => (None, c as f64 / len as f64),
            None => (None, 0.0),
        };
        out.push(Dwell {
            start,
            end: i,
            digit,
            purity,
        });
    }
    out
}

/// Digit sequence of a single read and its confidence (mean purity, with
/// skipped dwells counting as zero).
pub fn classify_id(
    track: &[Option<f64>],
    spec: &TagBandSpec,
    min_dwell_frames: usize,
) -> (Vec<u8>, f64) {
    let dwells = id_dwells(track, spec, min_dwell_frames.max(1));
    if dwells.is_empty() {
        return (Vec::new(), 1.0);
    }
    let digits = dwells.iter().filter_map(|d| d.digit).collect();
    let conf = dwells
        .iter()
        .map(|d| if d.digit.is_some() { d.purity } else { 0.0 })
        .sum::<f64>()
        / dwells.len() as f64;
    (digits, conf)
}

/// Splits a track into reads separated by long idle stretches and
/// classifies each.
pub fn decode_ids(
    band: &TagBandSpec,
    track: &[Option<f64>],
    spec: &Spectrogram,
) -> Result<Vec<DecodedEvent>> {
    let smoothed = smooth_track(track, ID_SMOOTH_WINDOW)?;
    let min_dwell = (ID_MIN_DWELL * spec.frame_rate).round() as usize;
    let gap = (ID_SEQUENCE_GAP * spec.frame_rate).round() as usize;
    let dwells = id_dwells(&smoothed, band, min_dwell);
    let mut out = Vec::new();
    let mut group: Vec<&Dwell> = Vec::new();
    let flush = |group: &mut Vec<&Dwell>, out: &mut Vec<DecodedEvent>| {
        if group.is_empty() {
            return;
        }
        let digits: Vec<u8> = group.iter().filter_map(|d| d.digit).collect();
        if !digits.is_empty() {
            let conf = group
                .iter()
                .map(|d| if d.digit.is_some() { d.purity } else { 0.0 })
                .sum::<f64>()
                / group.len() as f64;
            let first = group.iter().find(|d| d.digit.is_some()).unwrap();
            out.push(DecodedEvent {
                tag_id: band.tag_id.clone(),
                timestamp: spec.frame_time(first.start),
                kind: EventKind::IdRead(digits),
                confidence: conf,
            });
        }
        group.clear();
    };
    for d in &dwells {
        if let Some(last) = group.last() {
            if d.start - last.end > gap {
                flush(&mut group, &mut out);
            }
        }
        group.push(d);
    }
    flush(&mut group, &mut out);
    Ok(out)
}

/// Threshold detector over the landmark windows. Every non-idle landmark
/// whose window power rises `threshold_db` over the noise floor for at
/// least [`TOUCH_MIN_HOLD`] yields a press/release pair; release happens
/// when it falls below `threshold_db − 3 dB`.
pub fn detect_touch(
    spec: &Spectrogram,
    band: &TagBandSpec,
    threshold_db: f64,
) -> Result<Vec<DecodedEvent>> {
    band.validate()?;
    if band.mode != BandMode::Touch {
        return Err(Error::BandSpec(format!(
            "band '{}' is not a touch band",
            band.tag_id
        )));
    }
    let (lo, hi) = spec.span();
    let floor_bins = bin_range(
        spec,
        (spec.origin_offset - FLOOR_HALF_WIDTH).max(lo),
        (spec.origin_offset + FLOOR_HALF_WIDTH).min(hi),
    );
    let floors: Vec<f64> = spec
        .magnitudes
        .iter()
        .map(|row| frame_floor(row, floor_bins.clone()))
        .collect();
    let min_hold = (TOUCH_MIN_HOLD * spec.frame_rate).ceil() as usize;
    let release_db = threshold_db - TOUCH_HYSTERESIS_DB;
    let mut events = Vec::new();
    for (label, f) in &band.landmarks {
        if label == "idle" {
            continue;
        }
        let (a, b) = (f - TOUCH_HALF_WIDTH, f + TOUCH_HALF_WIDTH);
        if a < lo || b > hi {
            return Err(Error::BandSpec(format!(
                "landmark '{label}' window outside the spectrogram span"
            )));
        }
        let bins = bin_range(spec, a, b);
        let nb = bins.len() as f64;
        let metric: Vec<f64> = spec
            .magnitudes
            .iter()
            .zip(&floors)
            .map(|(row, floor)| {
                let p: f64 = row[bins.clone()].iter().map(|db| from_db(*db)).sum();
                if *floor > 0.0 {
                    10.0 * (p / (nb * floor)).log10()
                } else if p > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let mut i = 0;
        while i < metric.len() {
            if metric[i] < threshold_db {
                i += 1;
                continue;
            }
            let start = i;
            let mut peak = metric[i];
            while i < metric.len() && metric[i] >= release_db {
                peak = peak.max(metric[i]);
                i += 1;
            }
            let end = i - 1;
            if end + 1 - start < min_hold {
                continue;
            }
            let confidence = ((peak - threshold_db) / 20.0).clamp(0.0, 1.0);
            events.push(DecodedEvent {
                tag_id: band.tag_id.clone(),
                timestamp: spec.frame_time(start),
                kind: EventKind::TouchPress(label.clone()),
                confidence,
            });
            events.push(DecodedEvent {
                tag_id: band.tag_id.clone(),
                timestamp: spec.frame_time(end),
                kind: EventKind::TouchRelease(label.clone()),
                confidence,
            });
        }
    }
    Ok(merge_events(events))
}

/// Discrete-chain front end: translate the band's analysis center to 0 Hz,
/// low-pass and decimate to 100 kHz, then take the spectrogram.
pub fn discrete_spectrogram(iq: &IqBuffer, band: &TagBandSpec) -> Result<Spectrogram> {
    let factor = (iq.sample_rate / DISCRETE_OUTPUT_RATE).round() as usize;
    if factor == 0 || (factor as f64 * DISCRETE_OUTPUT_RATE - iq.sample_rate).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "input rate {} Hz is not a multiple of {DISCRETE_OUTPUT_RATE} Hz",
            iq.sample_rate
        )));
    }
    let lp = dsp::design_lowpass(DISCRETE_CUTOFF, iq.sample_rate, DISCRETE_TRANSITION)?;
    let center = band.analysis_center();
    let base = dsp::translate_decimate(iq, center, &lp, factor)?;
    dsp::spectrogram_with_origin(
        &base,
        SPECTROGRAM_NFFT,
        SPECTROGRAM_HOP,
        Window::Hann,
        center,
    )
}

/// Peak track over the band's ±20 kHz analysis window.
pub fn band_peak_track(spec: &Spectrogram) -> Result<Vec<Option<f64>>> {
    peak_track(
        spec,
        (
            spec.origin_offset - FLOOR_HALF_WIDTH,
            spec.origin_offset + FLOOR_HALF_WIDTH,
        ),
    )
}

/// Audio chain output.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioDecode {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub event: DecodedEvent,
}

/// translate → low-pass → decimate to 200 kHz → FM discriminator →
/// 60 Hz–4 kHz band-pass → resample to 48 kHz.
pub fn decode_audio(iq: &IqBuffer, band: &TagBandSpec, wav_ref: &str) -> Result<AudioDecode> {
    if band.bandwidth() < AUDIO_BANDWIDTH {
        return Err(Error::BandSpec(format!(
            "audio band '{}' is narrower than {AUDIO_BANDWIDTH} Hz",
            band.tag_id
        )));
    }
    let factor = (iq.sample_rate / AUDIO_INTERMEDIATE_RATE).round() as usize;
    if factor == 0 || (factor as f64 * AUDIO_INTERMEDIATE_RATE - iq.sample_rate).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "input rate {} Hz is not a multiple of {AUDIO_INTERMEDIATE_RATE} Hz",
            iq.sample_rate
        )));
    }
    let lp = dsp::design_lowpass(AUDIO_CUTOFF, iq.sample_rate, AUDIO_TRANSITION)?;
    let base = dsp::translate_decimate(iq, band.center, &lp, factor)?;
    let mut audio = dsp::wbfm_demod(&base, band.deviation())?;
    BandPass::new(AUDIO_BAND.0, AUDIO_BAND.1, base.sample_rate)?.process(&mut audio);
    let samples = dsp::resample(&audio, base.sample_rate, AUDIO_OUTPUT_RATE)?;
    Ok(AudioDecode {
        samples,
        sample_rate: AUDIO_OUTPUT_RATE,
        event: DecodedEvent {
            tag_id: band.tag_id.clone(),
            timestamp: 0.0,
            kind: EventKind::AudioSegment(wav_ref.to_string()),
            confidence: 1.0,
        },
    })
}

/// Runs the decoder matching the band's mode. Audio bands yield their
/// segment event here; use [`decode_audio`] for the samples.
pub fn decode_band(iq: &IqBuffer, band: &TagBandSpec) -> Result<Vec<DecodedEvent>> {
    band.validate()?;
    match band.mode {
        BandMode::Touch => {
            let spec = discrete_spectrogram(iq, band)?;
            detect_touch(&spec, band, TOUCH_THRESHOLD_DB)
        }
        BandMode::Swipe => {
            let spec = discrete_spectrogram(iq, band)?;
            let track = band_peak_track(&spec)?;
            Ok(decode_swipes(
                &band.tag_id,
                &track,
                band.idle().unwrap(),
                &spec,
            ))
        }
        BandMode::Id => {
            let spec = discrete_spectrogram(iq, band)?;
            let track = band_peak_track(&spec)?;
            decode_ids(band, &track, &spec)
        }
        BandMode::Audio => {
            let out = decode_audio(iq, band, &format!("{}.wav", band.tag_id))?;
            Ok(vec![out.event])
        }
    }
}

// ---------------------------------------------------------------------------
// Channel planning

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    Discrete,
    Audio,
}

impl TagKind {
    pub fn bandwidth(self) -> f64 {
        match self {
            TagKind::Discrete => DISCRETE_BANDWIDTH,
            TagKind::Audio => AUDIO_BANDWIDTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub tag_id: String,
    pub kind: TagKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub tag_id: String,
    pub kind: TagKind,
    pub center: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub assignments: Vec<Assignment>,
    pub guard: f64,
}

impl ChannelPlan {
    /// Neighbors share one guard: each channel owns `center ± (bw + guard)/2`.
    pub fn validate(&self) -> Result<()> {
        let mut a = self.assignments.clone();
        a.sort_by(|x, y| x.center.total_cmp(&y.center));
        for x in &a {
            if !(BAND_LOW..=BAND_HIGH).contains(&x.center) {
                return Err(Error::Capacity {
                    tag_id: x.tag_id.clone(),
                });
            }
        }
        for w in a.windows(2) {
            let reach = (w[0].bandwidth + w[1].bandwidth) / 2.0 + self.guard;
            if w[1].center - w[0].center < reach * (1.0 - 1e-12) {
                return Err(Error::invalid(format!(
                    "channels '{}' and '{}' overlap",
                    w[0].tag_id, w[1].tag_id
                )));
            }
        }
        Ok(())
    }
}

/// Greedy first-fit, ascending from 100 kHz. Channel centers stay within
/// [100 kHz, 1 MHz]; adjacent channels are separated by half of each
/// bandwidth plus one guard.
pub fn plan_channels(requests: &[PlanRequest]) -> Result<ChannelPlan> {
    let mut assignments: Vec<Assignment> = Vec::with_capacity(requests.len());
    for r in requests {
        let bw = r.kind.bandwidth();
        let center = match assignments.last() {
            None => BAND_LOW,
            Some(prev) => prev.center + prev.bandwidth / 2.0 + GUARD + bw / 2.0,
        };
        if center > BAND_HIGH {
            return Err(Error::Capacity {
                tag_id: r.tag_id.clone(),
            });
        }
        assignments.push(Assignment {
            tag_id: r.tag_id.clone(),
            kind: r.kind,
            center,
            bandwidth: bw,
        });
    }
    Ok(ChannelPlan {
        assignments,
        guard: GUARD,
    })
}
