//! End-to-end workflows: scenario → IQ, IQ → events, and oscillator tuning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::channel::{snr_at_distance, IqBuffer, Synthesizer};
use crate::circuit::{reduce_tank, OscillatorDesign, Topology};
use crate::decode::{self, AudioDecode, BandMode, DecodedEvent, TagBandSpec};
use crate::dsp::{self, Spectrogram, Window};
use crate::error::{Error, Result};
use crate::formats::IqSidecar;
use crate::scenario::PreparedScenario;
use crate::tables::{nearest_mco_row, McoRow};
use crate::tag::{frequency_track, idle_frequency, BAND_HIGH, BAND_LOW};

/// Time tolerance when matching decoded events against ground truth.
pub const MATCH_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagSummary {
    pub tag_id: String,
    pub idle_frequency: f64,
    pub distance: f64,
    pub snr_db: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub iq: IqBuffer,
    pub seed: u64,
    pub tags: Vec<TagSummary>,
    pub truth: Vec<DecodedEvent>,
    pub bands: Vec<TagBandSpec>,
}

/// Renders every tag and the channel. Tracks are built and mixed one at a
/// time, so peak memory is one track plus the output buffer.
pub fn simulate(scenario: &PreparedScenario, seed: Option<u64>) -> Result<Simulation> {
    let seed = seed.unwrap_or(scenario.seed);
    let ch = &scenario.channel;
    let mut synth = Synthesizer::new(ch)?;
    let mut tags = Vec::with_capacity(scenario.tags.len());
    for t in &scenario.tags {
        let track = frequency_track(&t.config, &t.supply, &t.script, ch.duration, ch.sample_rate)?;
        let amplitude = synth.add_track(t.tag_id(), &track)?;
        tags.push(TagSummary {
            tag_id: t.tag_id().to_string(),
            idle_frequency: track.f0,
            distance: t.distance,
            snr_db: snr_at_distance(ch, t.distance)?,
            amplitude,
        });
    }
    Ok(Simulation {
        iq: synth.finish(seed)?,
        seed,
        tags,
        truth: scenario.ground_truth()?,
        bands: scenario.band_specs()?,
    })
}

fn event_json(e: &DecodedEvent) -> serde_json::Value {
    json!({
        "timestamp": e.timestamp,
        "tag_id": e.tag_id,
        "kind": e.kind.name(),
        "payload": e.kind.payload(),
    })
}

/// Sidecar manifest for a simulated capture: rate, duration, seed, tag
/// summaries, ground truth and the receiver bands.
pub fn manifest(scenario: &PreparedScenario, sim: &Simulation) -> Result<IqSidecar> {
    let mut side = IqSidecar::for_buffer(&sim.iq);
    let e = |x: serde_json::Error| Error::Format(x.to_string());
    side.extra.insert("scenario".into(), json!(scenario.name));
    side.extra
        .insert("duration".into(), json!(sim.iq.duration()));
    side.extra.insert("seed".into(), json!(sim.seed));
    side.extra
        .insert("tags".into(), serde_json::to_value(&sim.tags).map_err(e)?);
    side.extra.insert(
        "truth".into(),
        sim.truth.iter().map(event_json).collect::<Vec<_>>().into(),
    );
    side.extra
        .insert("bands".into(), serde_json::to_value(&sim.bands).map_err(e)?);
    Ok(side)
}

/// Ground truth stored in a manifest.
pub fn manifest_truth(side: &IqSidecar) -> Result<Vec<DecodedEvent>> {
    let Some(list) = side.extra.get("truth").and_then(|v| v.as_array()) else {
        return Ok(Vec::new());
    };
    list.iter()
        .map(|v| {
            let s = |k: &str| v.get(k).and_then(|x| x.as_str()).unwrap_or_default();
            Ok(DecodedEvent {
                tag_id: s("tag_id").to_string(),
                timestamp: v.get("timestamp").and_then(|x| x.as_f64()).unwrap_or(0.0),
                kind: decode::EventKind::parse(s("kind"), s("payload"))?,
                confidence: 1.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct DecodeOutput {
    pub events: Vec<DecodedEvent>,
    /// Audio per tag id, 48 kHz.
    pub audio: Vec<(String, AudioDecode)>,
}

/// Runs the decoder for every band. Audio bands reference `<tag_id>.wav`.
pub fn decode_all(iq: &IqBuffer, bands: &[TagBandSpec]) -> Result<DecodeOutput> {
    let mut out = DecodeOutput::default();
    for b in bands {
        b.validate()?;
        if b.mode == BandMode::Audio {
            let a = decode::decode_audio(iq, b, &format!("{}.wav", b.tag_id))?;
            out.events.push(a.event.clone());
            out.audio.push((b.tag_id.clone(), a));
        } else {
            out.events.extend(decode::decode_band(iq, b)?);
        }
    }
    out.events = decode::merge_events(out.events);
    Ok(out)
}

/// Whole-capture overview spectrogram with at most ~1000 rows. Long
/// captures average runs of adjacent non-overlapping frames in power.
pub fn overview_spectrogram(iq: &IqBuffer) -> Result<Spectrogram> {
    const NFFT: usize = 1024;
    const MAX_ROWS: usize = 1000;
    let frames = iq.len() / NFFT;
    if frames <= MAX_ROWS {
        return dsp::spectrogram(iq, NFFT, NFFT / 2, Window::Hann);
    }
    let group = frames.div_ceil(MAX_ROWS);
    let span = group * NFFT;
    let mut out: Option<Spectrogram> = None;
    let mut rows = Vec::with_capacity(frames / group);
    for chunk in iq.samples.chunks_exact(span) {
        let part = dsp::spectrogram(
            &IqBuffer::new(iq.sample_rate, chunk.to_vec()),
            NFFT,
            NFFT,
            Window::Hann,
        )?;
        let mean: Vec<f64> = (0..NFFT)
            .map(|k| {
                let p = part
                    .magnitudes
                    .iter()
                    .map(|r| 10f64.powf(r[k] / 10.0))
                    .sum::<f64>();
                10.0 * (p / part.magnitudes.len() as f64).log10()
            })
            .collect();
        rows.push(mean);
        out.get_or_insert(part);
    }
    let mut spec = out.expect("frames > MAX_ROWS implies at least one group");
    spec.hop = span;
    spec.frame_rate = iq.sample_rate / span as f64;
    spec.magnitudes = rows;
    Ok(spec)
}

/// Result of matching decoded events against ground truth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventMatch {
    pub matched: Vec<(DecodedEvent, DecodedEvent)>,
    pub missed: Vec<DecodedEvent>,
    pub spurious: Vec<DecodedEvent>,
}

impl EventMatch {
    pub fn exact(&self) -> bool {
        self.missed.is_empty() && self.spurious.is_empty()
    }
}

/// Per tag, in order: each truth event takes the next decoded event of the
/// same kind and payload within `tolerance` seconds.
pub fn compare_events(
    truth: &[DecodedEvent],
    decoded: &[DecodedEvent],
    tolerance: f64,
) -> EventMatch {
    let mut by_tag: BTreeMap<&str, (Vec<&DecodedEvent>, Vec<&DecodedEvent>)> = BTreeMap::new();
    for t in truth {
        by_tag.entry(&t.tag_id).or_default().0.push(t);
    }
    for d in decoded {
        by_tag.entry(&d.tag_id).or_default().1.push(d);
    }
    let mut m = EventMatch::default();
    for (_, (ts, ds)) in by_tag {
        let mut used = vec![false; ds.len()];
        let mut cursor = 0;
        for t in ts {
            let hit = (cursor..ds.len()).find(|&j| {
                !used[j]
                    && ds[j].kind == t.kind
                    && (ds[j].timestamp - t.timestamp).abs() <= tolerance
            });
            match hit {
                Some(j) => {
                    used[j] = true;
                    cursor = j + 1;
                    m.matched.push((t.clone(), ds[j].clone()));
                }
                None => m.missed.push(t.clone()),
            }
        }
        m.spurious.extend(
            ds.iter()
                .zip(&used)
                .filter(|(_, u)| !**u)
                .map(|(d, _)| (*d).clone()),
        );
    }
    m
}

// ---------------------------------------------------------------------------
// Tuning

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeComponent {
    C1,
    C2,
    CBlocking,
    CShift,
    CJfet,
}

impl FreeComponent {
    fn get(self, d: &OscillatorDesign) -> Option<f64> {
        match self {
            FreeComponent::C1 => Some(d.c1),
            FreeComponent::C2 => Some(d.c2),
            FreeComponent::CBlocking => Some(d.c_blocking),
            FreeComponent::CShift => d.c_shift,
            FreeComponent::CJfet => Some(d.c_jfet),
        }
    }

    fn set(self, d: &mut OscillatorDesign, v: f64) {
        match self {
            FreeComponent::C1 => d.c1 = v,
            FreeComponent::C2 => d.c2 = v,
            FreeComponent::CBlocking => d.c_blocking = v,
            FreeComponent::CShift => d.c_shift = Some(v),
            FreeComponent::CJfet => d.c_jfet = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub design: OscillatorDesign,
    pub achieved: f64,
    pub target: f64,
    pub changed: bool,
    #[serde(skip)]
    pub nearest_row: McoRow,
}

/// Search range for the free capacitor.
const FREE_RANGE: (f64, f64) = (1e-15, 1e-3);

/// Adjusts one capacitor so the tank resonates at `target`. Frequency falls
/// monotonically with every tank capacitor, so bisection in log space
/// converges; a target outside the reachable range is infeasible.
pub fn tune(base: &OscillatorDesign, target: f64, free: FreeComponent) -> Result<TuneResult> {
    if !(BAND_LOW..=BAND_HIGH).contains(&target) {
        return Err(Error::invalid(format!(
            "target {target} Hz outside [100 kHz, 1 MHz]"
        )));
    }
    base.validate()?;
    if free == FreeComponent::CShift && base.topology == Topology::EscoDrain {
        return Err(Error::invalid("ESCO designs have no C_shift"));
    }
    let nearest_row = nearest_mco_row(target);
    let f_base = reduce_tank(base)?.f_resonant;
    if ((f_base - target) / target).abs() <= 1e-12 {
        return Ok(TuneResult {
            design: base.clone(),
            achieved: f_base,
            target,
            changed: false,
            nearest_row,
        });
    }
    let f_at = |c: f64| -> Result<f64> {
        let mut d = base.clone();
        free.set(&mut d, c);
        Ok(reduce_tank(&d)?.f_resonant)
    };
    let (mut lo, mut hi) = FREE_RANGE;
    let (f_hi_cap, f_lo_cap) = (f_at(hi)?, f_at(lo)?);
    if !(target >= f_hi_cap && target <= f_lo_cap) {
        return Err(Error::Calibration(format!(
            "{:?} alone reaches only {:.3}..{:.3} kHz with the other components fixed",
            free,
            f_hi_cap / 1e3,
            f_lo_cap / 1e3
        )));
    }
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        if f_at(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    let c = (lo * hi).sqrt();
    let mut design = base.clone();
    free.set(&mut design, c);
    let achieved = reduce_tank(&design)?.f_resonant;
    debug_assert!(free.get(&design).is_some());
    Ok(TuneResult {
        design,
        achieved,
        target,
        changed: true,
        nearest_row,
    })
}

/// Idle frequency of each tag in a prepared scenario.
pub fn idle_frequencies(scenario: &PreparedScenario) -> Result<Vec<(String, f64)>> {
    scenario
        .tags
        .iter()
        .map(|t| Ok((t.tag_id().to_string(), idle_frequency(&t.config)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::{EventKind, SwipeDirection};
    use crate::tables::mco_table;
    use proptest::prelude::*;

    fn ev(tag: &str, t: f64, kind: EventKind) -> DecodedEvent {
        DecodedEvent {
            tag_id: tag.into(),
            timestamp: t,
            kind,
            confidence: 1.0,
        }
    }

    #[test]
    fn compare_matches_per_tag_in_order() {
        let truth = vec![
            ev("a", 1.0, EventKind::TouchPress("up".into())),
            ev("a", 1.5, EventKind::TouchRelease("up".into())),
            ev("b", 1.2, EventKind::Swipe(SwipeDirection::Left)),
        ];
        let mut dec = truth.clone();
        dec[0].timestamp += 0.05;
        assert!(compare_events(&truth, &dec, 0.1).exact());
        dec[2].kind = EventKind::Swipe(SwipeDirection::Right);
        let m = compare_events(&truth, &dec, 0.1);
        assert_eq!(
            (m.matched.len(), m.missed.len(), m.spurious.len()),
            (2, 1, 1)
        );
        dec[0].timestamp += 0.2;
        assert_eq!(compare_events(&truth, &dec, 0.1).missed.len(), 2);
    }

    #[test]
    fn tune_row_200() {
        let row = mco_table()
            .into_iter()
            .find(|r| r.nominal_khz == 200)
            .unwrap();
        // Under the gate-output tank the row's parts top out near 247 kHz
        // even with C0 shorted, so 202 kHz is out of reach...
        for free in [FreeComponent::C1, FreeComponent::C2, FreeComponent::CJfet] {
            assert!(matches!(
                tune(&row.design(), 202e3, free),
                Err(Error::Calibration(_))
            ));
        }
        // ...while the drain-output tank gets there with C_JFET free.
        let esco = OscillatorDesign::esco(row.l1, row.l2, row.c1, row.c2, row.c_blocking);
        let r = tune(&esco, 202e3, FreeComponent::CJfet).unwrap();
        assert!(((r.achieved - 202e3) / 202e3).abs() < 1e-3);
        assert!((r.design.c_jfet - 8.5e-12).abs() < 0.5e-12);
        assert_eq!(r.nearest_row.nominal_khz, 200);
    }

    #[test]
    fn tune_identity_and_errors() {
        let d = OscillatorDesign::esco(1e-3, 1e-3, 470e-12, 470e-12, 100e-9);
        let f = reduce_tank(&d).unwrap().f_resonant;
        let r = tune(&d, f, FreeComponent::C1).unwrap();
        assert!(!r.changed);
        assert_eq!(r.design, d);
        assert!(matches!(
            tune(&d, 50e3, FreeComponent::C1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(tune(&d, 300e3, FreeComponent::CShift).is_err());
        // C1 in series with 470 pF caps the tank near 480 pF: f >= 229 kHz.
        assert!(matches!(
            tune(&d, 100e3, FreeComponent::C1),
            Err(Error::Calibration(_))
        ));
    }

    proptest! {
        #[test]
        fn tune_forward_checks(f in 150e3f64..900e3) {
            let d = OscillatorDesign::esco(1e-3, 1e-3, 470e-12, 470e-12, 100e-9);
            match tune(&d, f, FreeComponent::C1) {
                Ok(r) => prop_assert!(((reduce_tank(&r.design).unwrap().f_resonant - f) / f).abs() < 1e-3),
                Err(e) => prop_assert!(matches!(e, Error::Calibration(_))),
            }
        }
    }

    #[test]
    fn overview_is_bounded_and_finds_a_tone() {
        let rate = 1e6;
        let n = 2_500_000;
        let w = 2.0 * std::f64::consts::PI * 250e3 / rate;
        let iq = IqBuffer::new(
            rate,
            (0..n)
                .map(|k| num_complex::Complex64::from_polar(1.0, w * k as f64))
                .collect(),
        );
        let spec = overview_spectrogram(&iq).unwrap();
        assert!(
            spec.frames() <= 1000 && spec.frames() > 500,
            "{}",
            spec.frames()
        );
        let row = &spec.magnitudes[spec.frames() / 2];
        let peak = (0..row.len())
            .max_by(|&a, &b| row[a].total_cmp(&row[b]))
            .unwrap();
        assert_eq!(peak, 512 + 256);
        assert_eq!(spec.hop, 3 * 1024);
    }
}
