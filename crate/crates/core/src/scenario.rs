//! Scenario files: tags, supplies, distances, scripts and a noise seed.
//!
//! Quantities accept SI suffixes ("4.7mH", "345kHz", "16.2ft"). Semantic
//! errors carry a location such as `pong.json:12: tags[1].distance`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{snr_at_distance, ChannelParams, AUDIO_BANDWIDTH, DISCRETE_BANDWIDTH};
use crate::decode::{
    default_digit_bands, BandMode, DecodedEvent, DigitBand, EventKind, SwipeDirection, TagBandSpec,
    ID_SEQUENCE_GAP, SWIPE_MERGE_GAP,
};
use crate::error::{Error, Result};
use crate::tag::{
    calibrate_sensor, event_frequency, idle_frequency, Button, CalibrationTarget,
    InteractionScript, PowerSupply, ScriptEvent, SensorModel, SensorState, TagConfig,
};
use crate::units;

/// One tag as written in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTag {
    #[serde(flatten)]
    pub config: TagConfig,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::feet::option::deserialize"
    )]
    pub distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supply: Option<PowerSupply>,
    /// Applied at load time before anything else.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub calibration: Vec<CalibrationTarget>,
    /// Decoder for this tag; defaults from the sensor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<BandMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Free-form provenance, ignored by the simulator.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub metadata: serde_json::Map<String, serde_json::Value>,
    pub channel: ChannelParams,
    pub tags: Vec<ScenarioTag>,
    #[serde(default)]
    pub scripts: BTreeMap<String, Vec<ScriptEvent>>,
}

/// A tag after calibration and validation.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTag {
    pub config: TagConfig,
    pub supply: PowerSupply,
    pub distance: f64,
    pub mode: Option<BandMode>,
    pub script: InteractionScript,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedScenario {
    pub name: String,
    pub seed: u64,
    pub channel: ChannelParams,
    pub tags: Vec<PreparedTag>,
}

fn default_mode(sensor: &SensorModel) -> Option<BandMode> {
    match sensor {
        SensorModel::Plain => None,
        SensorModel::InductiveButtons { .. } => Some(BandMode::Touch),
        SensorModel::CapacitiveBarcode { .. } => Some(BandMode::Id),
        SensorModel::AudioVaractor { .. } => Some(BandMode::Audio),
    }
}

fn mode_fits(mode: BandMode, sensor: &SensorModel) -> bool {
    matches!(
        (mode, sensor),
        (BandMode::Touch, SensorModel::InductiveButtons { .. })
            | (
                BandMode::Swipe | BandMode::Id,
                SensorModel::CapacitiveBarcode { .. }
            )
            | (BandMode::Audio, SensorModel::AudioVaractor { .. })
    )
}

fn v(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::validation(location, message)
}

fn script_end(e: &ScriptEvent) -> f64 {
    match e {
        ScriptEvent::ButtonPress { t, .. } | ScriptEvent::ButtonRelease { t, .. } => *t,
        ScriptEvent::SwipeTooth { t_end, .. } => *t_end,
        ScriptEvent::AudioWaveform {
            samples,
            rate,
            t_start,
        } => t_start + samples.len() as f64 / rate,
        ScriptEvent::AudioTone {
            t_start, duration, ..
        }
        | ScriptEvent::TouchTeg { t_start, duration } => t_start + duration,
    }
}

impl Scenario {
    /// Parses JSON; syntax errors are located by line and column.
    pub fn from_json(text: &str, origin: &str) -> Result<Scenario> {
        serde_json::from_str(text).map_err(|e| {
            Error::validation(
                format!("{origin}:{}:{}", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Reads, parses and prepares a scenario file.
    pub fn load(path: &Path) -> Result<(Scenario, PreparedScenario)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let origin = path.display().to_string();
        let sc = Scenario::from_json(&text, &origin)?;
        let prepared = sc.prepare().map_err(|e| locate(e, &origin, &text))?;
        Ok((sc, prepared))
    }

    /// Validates every invariant, calibrates tags and fills the channel's
    /// per-tag distance and bandwidth maps.
    pub fn prepare(&self) -> Result<PreparedScenario> {
        if self.name.trim().is_empty() {
            return Err(v("name", "scenario name is empty"));
        }
        let seed = self
            .seed
            .ok_or_else(|| v("seed", "a noise seed is mandatory"))?;
        let duration = self.channel.duration;
        if !(duration > 0.0) {
            return Err(v("channel.duration", "duration must be positive"));
        }

        let mut channel = self.channel.clone();
        let mut ids = BTreeSet::new();
        let mut tags = Vec::with_capacity(self.tags.len());
        for (i, st) in self.tags.iter().enumerate() {
            let at = |field: &str| {
                if field.is_empty() {
                    format!("tags[{i}]")
                } else {
                    format!("tags[{i}].{field}")
                }
            };
            let id = &st.config.tag_id;
            if id.is_empty() || id.contains(char::is_whitespace) {
                return Err(v(
                    at("tag_id"),
                    "tag ids must be non-empty without whitespace",
                ));
            }
            if !ids.insert(id.clone()) {
                return Err(v(at("tag_id"), format!("duplicate tag id '{id}'")));
            }
            st.config.validate().map_err(|e| v(at(""), e.to_string()))?;
            let config = calibrate_sensor(&st.config, &st.calibration)
                .map_err(|e| v(at("calibration"), e.to_string()))?;
            let supply = st
                .supply
                .clone()
                .ok_or_else(|| v(at("supply"), format!("tag '{id}' has no power supply")))?;
            supply
                .validate()
                .map_err(|e| v(at("supply"), e.to_string()))?;
            let distance = st
                .distance
                .or_else(|| self.channel.tag_distances.get(id).copied())
                .ok_or_else(|| v(at("distance"), format!("tag '{id}' has no distance")))?;
            snr_at_distance(&self.channel, distance)
                .map_err(|e| v(at("distance"), e.to_string()))?;
            let mode = match st.mode {
                Some(m) if !mode_fits(m, &config.sensor) => {
                    return Err(v(
                        at("mode"),
                        format!("mode {m:?} does not match the sensor"),
                    ))
                }
                Some(m) => Some(m),
                None => default_mode(&config.sensor),
            };
            let bw = if mode == Some(BandMode::Audio) {
                AUDIO_BANDWIDTH
            } else {
                DISCRETE_BANDWIDTH
            };
            channel.tag_distances.insert(id.clone(), distance);
            channel.tag_bandwidths.insert(id.clone(), bw);
            tags.push(PreparedTag {
                config,
                supply,
                distance,
                mode,
                script: InteractionScript::default(),
            });
        }
        channel
            .validate()
            .map_err(|e| v("channel", e.to_string()))?;

        for (id, events) in &self.scripts {
            let at = format!("scripts.{id}");
            let Some(tag) = tags.iter_mut().find(|t| &t.config.tag_id == id) else {
                return Err(v(at, format!("script for unknown tag '{id}'")));
            };
            for (k, e) in events.iter().enumerate() {
                if e.start() < 0.0 || script_end(e) > duration {
                    return Err(v(
                        format!("{at}[{k}]"),
                        format!("event outside the {duration} s capture"),
                    ));
                }
            }
            let script = InteractionScript::new(events.clone());
            script
                .state_spans(duration)
                .map_err(|e| v(&at, e.to_string()))?;
            tag.script = script;
        }
        Ok(PreparedScenario {
            name: self.name.clone(),
            seed,
            channel,
            tags,
        })
    }
}

/// Prefixes a validation location with the file and the best-guess line.
pub fn locate(err: Error, origin: &str, text: &str) -> Error {
    let Error::Validation { location, message } = err else {
        return err;
    };
    let line_of = |needle: &str, after: usize| {
        text.lines()
            .enumerate()
            .skip(after)
            .find(|(_, l)| l.contains(needle))
            .map(|(n, _)| n)
    };
    let line = if let Some(rest) = location.strip_prefix("tags[") {
        let i: usize = rest
            .split(']')
            .next()
            .and_then(|s| s.parse().ok())
            .unwrap_or(0);
        let start = line_of("\"tags\"", 0).unwrap_or(0);
        // The i-th "tag_id" key after "tags".
        let mut n = start;
        let mut found = None;
        for _ in 0..=i {
            match line_of("\"tag_id\"", n) {
                Some(l) => {
                    found = Some(l);
                    n = l + 1;
                }
                None => break,
            }
        }
        found
    } else if let Some(rest) = location.strip_prefix("scripts.") {
        let id = rest.split('[').next().unwrap_or(rest);
        let start = line_of("\"scripts\"", 0).unwrap_or(0);
        line_of(&format!("\"{id}\""), start)
    } else {
        let key = location.split('.').next().unwrap_or(&location);
        line_of(&format!("\"{key}\""), 0)
    };
    let location = match line {
        Some(n) => format!("{origin}:{}: {location}", n + 1),
        None => format!("{origin}: {location}"),
    };
    Error::Validation { location, message }
}

impl PreparedTag {
    pub fn tag_id(&self) -> &str {
        &self.config.tag_id
    }

    fn tooth_frequency(&self, index: usize, jitter: f64) -> Result<f64> {
        event_frequency(&self.config, SensorState::Tooth { index, jitter })
    }

    /// Receiver band for this tag, or `None` for plain tags.
    pub fn band_spec(&self) -> Result<Option<TagBandSpec>> {
        let Some(mode) = self.mode else {
            return Ok(None);
        };
        let idle = idle_frequency(&self.config)?;
        let mut landmarks = BTreeMap::new();
        landmarks.insert("idle".to_string(), idle);
        let mut digit_bands = Vec::new();
        match &self.config.sensor {
            SensorModel::InductiveButtons { .. } => {
                for b in [Button::Up, Button::Down] {
                    landmarks.insert(
                        b.label().to_string(),
                        event_frequency(&self.config, SensorState::Pressed(b))?,
                    );
                }
            }
            SensorModel::CapacitiveBarcode { tooth_caps, .. } => {
                let teeth = (0..tooth_caps.len())
                    .map(|i| self.tooth_frequency(i, 0.0))
                    .collect::<Result<Vec<_>>>()?;
                for (i, f) in teeth.iter().enumerate() {
                    landmarks.insert(format!("tooth{i}"), *f);
                }
                if mode == BandMode::Id {
                    digit_bands = derive_digit_bands(&teeth);
                }
            }
            _ => {}
        }
        if mode == BandMode::Audio {
            landmarks.clear();
        }
        Ok(Some(TagBandSpec {
            tag_id: self.config.tag_id.clone(),
            mode,
            center: idle,
            bandwidth: Some(if mode == BandMode::Audio {
                AUDIO_BANDWIDTH
            } else {
                DISCRETE_BANDWIDTH
            }),
            landmarks,
            digit_bands,
            deviation: None,
        }))
    }

    /// Events an ideal decoder would report for this tag's script.
    pub fn ground_truth(&self) -> Result<Vec<DecodedEvent>> {
        let Some(mode) = self.mode else {
            return Ok(Vec::new());
        };
        let id = self.config.tag_id.clone();
        let ev = |timestamp, kind| DecodedEvent {
            tag_id: id.clone(),
            timestamp,
            kind,
            confidence: 1.0,
        };
        let mut out = Vec::new();
        let teeth: Vec<(usize, f64, f64, f64)> = self
            .script
            .events
            .iter()
            .filter_map(|e| match e {
                ScriptEvent::SwipeTooth {
                    tooth_index,
                    t_start,
                    t_end,
                    jitter,
                } => Some((*tooth_index, *t_start, *t_end, *jitter)),
                _ => None,
            })
            .collect();
        match mode {
            BandMode::Touch => {
                for e in &self.script.events {
                    match e {
                        ScriptEvent::ButtonPress { button, t } => {
                            out.push(ev(*t, EventKind::TouchPress(button.label().into())))
                        }
                        ScriptEvent::ButtonRelease { button, t } => {
                            out.push(ev(*t, EventKind::TouchRelease(button.label().into())))
                        }
                        _ => {}
                    }
                }
            }
            BandMode::Swipe => {
                for group in group_teeth(&teeth, SWIPE_MERGE_GAP) {
                    let first = self.tooth_frequency(group[0].0, group[0].3)?;
                    let l = group[group.len() - 1];
                    let last = self.tooth_frequency(l.0, l.3)?;
                    let dir = if last > first {
                        SwipeDirection::Right
                    } else if last < first {
                        SwipeDirection::Left
                    } else {
                        continue;
                    };
                    out.push(ev(group[0].1, EventKind::Swipe(dir)));
                }
            }
            BandMode::Id => {
                let bands = self.band_spec()?.map(|b| b.digit_bands).unwrap_or_default();
                for group in group_teeth(&teeth, ID_SEQUENCE_GAP) {
                    let mut digits = Vec::new();
                    for t in &group {
                        let f = self.tooth_frequency(t.0, t.3)?;
                        if let Some(b) = bands.iter().find(|b| b.contains(f)) {
                            digits.push(b.digit);
                        }
                    }
                    if !digits.is_empty() {
                        out.push(ev(group[0].1, EventKind::IdRead(digits)));
                    }
                }
            }
            BandMode::Audio => {
                out.push(ev(0.0, EventKind::AudioSegment(format!("{id}.wav"))));
            }
        }
        Ok(out)
    }
}

fn group_teeth(teeth: &[(usize, f64, f64, f64)], gap: f64) -> Vec<Vec<(usize, f64, f64, f64)>> {
    let mut sorted = teeth.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out: Vec<Vec<(usize, f64, f64, f64)>> = Vec::new();
    for t in sorted {
        match out.last_mut() {
            Some(g) if t.1 - g[g.len() - 1].2 <= gap => g.push(t),
            _ => out.push(vec![t]),
        }
    }
    out
}

/// Digit `i + 1` for tooth `i`. Uses the published 345 kHz bands when they
/// fit, otherwise a band around each tooth.
pub fn derive_digit_bands(teeth: &[f64]) -> Vec<DigitBand> {
    let n = teeth.len();
    let published = default_digit_bands();
    let fits = n == published.len()
        && teeth.iter().enumerate().all(|(i, f)| {
            published
                .iter()
                .any(|b| b.digit as usize == i + 1 && b.contains(*f))
        });
    if fits {
        return published;
    }
    teeth
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let gap = teeth
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, g)| (g - f).abs())
                .fold(f64::INFINITY, f64::min);
            let half = (0.45 * gap).min(3.5e3);
            DigitBand {
                digit: (i + 1).min(u8::MAX as usize) as u8,
                low: f - half,
                high: f + half,
            }
        })
        .collect()
}

impl PreparedScenario {
    pub fn band_specs(&self) -> Result<Vec<TagBandSpec>> {
        let mut out = Vec::new();
        for t in &self.tags {
            if let Some(b) = t.band_spec()? {
                out.push(b);
            }
        }
        Ok(out)
    }

    /// All tags' ground truth, time ordered.
    pub fn ground_truth(&self) -> Result<Vec<DecodedEvent>> {
        let mut all = Vec::new();
        for t in &self.tags {
            all.extend(t.ground_truth()?);
        }
        Ok(crate::decode::merge_events(all))
    }
}
