//! Tag-side simulation: sensor couplings, interaction scripts, power gating
//! and the instantaneous-frequency track a tag emits.

use serde::{Deserialize, Serialize};

use crate::circuit::{
    parallel_inductance, reduce_tank_adjusted, required_inductance, tank_capacitance,
    OscillatorDesign, TankAdjust, VaractorModel,
};
use crate::error::{Error, Result};
use crate::units;

/// Time constant of the first-order glide between discrete frequency levels.
pub const TRANSITION_TAU: f64 = 2e-3;
/// Active samples must stay within this distance of the idle frequency.
pub const MAX_DEVIATION: f64 = 70e3;
/// Lowest and highest permitted channel centers (offset from the carrier).
pub const BAND_LOW: f64 = 100e3;
pub const BAND_HIGH: f64 = 1e6;
/// Minimum spacing between barcode tooth capacitances.
pub const TOOTH_SEPARATION: f64 = 0.5e-12;
/// Calibrated tooth shifts must differ by at least this much.
pub const TOOTH_SHIFT_SEPARATION: f64 = 2e3;
/// Calibration must land every target within this many hertz.
pub const CALIBRATION_TOLERANCE: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Button {
    Up,
    Down,
}

impl Button {
    pub fn label(self) -> &'static str {
        match self {
            Button::Up => "up",
            Button::Down => "down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttachNode {
    C1,
    C2,
    MidNode,
}

/// How the tag's sensor couples into the oscillator tank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SensorModel {
    /// No sensor; the tag sits at its design frequency.
    Plain,
    /// Two button inductors in series with each other and in parallel with
    /// L1. Pressing a button shorts its inductor: Up leaves `L1 ∥ L12`,
    /// Down leaves `L1 ∥ L11`.
    InductiveButtons {
        #[serde(deserialize_with = "units::henry::deserialize")]
        l11: f64,
        #[serde(deserialize_with = "units::henry::deserialize")]
        l12: f64,
    },
    /// Finger-touched capacitive teeth, each adding its capacitance at
    /// `attach_node` while touched.
    CapacitiveBarcode {
        #[serde(deserialize_with = "units::farad_list")]
        tooth_caps: Vec<f64>,
        attach_node: AttachNode,
    },
    /// Microphone driving a reverse-biased varactor that sits (through
    /// blocking capacitors) across C2.
    AudioVaractor {
        varactor: VaractorModel,
        /// Volts of varactor drive per pascal at the microphone.
        mic_sensitivity: f64,
        #[serde(deserialize_with = "units::farad::deserialize")]
        blocking_caps: f64,
        #[serde(default, deserialize_with = "units::volt::deserialize")]
        bias: f64,
    },
}

/// Instantaneous condition of a tag's sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensorState {
    Rest,
    Pressed(Button),
    /// Tooth `index` touched; `jitter` adds to its nominal capacitance.
    Tooth {
        index: usize,
        jitter: f64,
    },
    /// Sound pressure at the microphone, pascals.
    Audio {
        pressure: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagConfig {
    pub tag_id: String,
    pub design: OscillatorDesign,
    pub sensor: SensorModel,
    #[serde(deserialize_with = "units::volt::deserialize")]
    pub startup_voltage: f64,
    #[serde(deserialize_with = "units::ampere::deserialize")]
    pub startup_current: f64,
    #[serde(deserialize_with = "units::hertz::deserialize")]
    pub channel_center: f64,
    #[serde(default = "default_depth")]
    pub modulation_depth: f64,
}

fn default_depth() -> f64 {
    0.5
}

impl TagConfig {
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        if !(BAND_LOW..=BAND_HIGH).contains(&self.channel_center) {
            return Err(Error::invalid(format!(
                "tag '{}': channel_center {} Hz outside [100 kHz, 1 MHz]",
                self.tag_id, self.channel_center
            )));
        }
        if !(self.startup_voltage > 0.0 && self.startup_current > 0.0) {
            return Err(Error::invalid(format!(
                "tag '{}': startup voltage and current must be positive",
                self.tag_id
            )));
        }
        if !(0.0..=1.0).contains(&self.modulation_depth) {
            return Err(Error::invalid(format!(
                "tag '{}': modulation_depth {} outside [0, 1]",
                self.tag_id, self.modulation_depth
            )));
        }
        match &self.sensor {
            SensorModel::Plain => {}
            SensorModel::InductiveButtons { l11, l12 } => {
                if !(*l11 > 0.0 && *l12 > 0.0) {
                    return Err(Error::invalid("button inductors must be positive"));
                }
            }
            SensorModel::CapacitiveBarcode { tooth_caps, .. } => {
                if tooth_caps.is_empty() {
                    return Err(Error::invalid("barcode needs at least one tooth"));
                }
                if tooth_caps.iter().any(|c| !(*c > 0.0)) {
                    return Err(Error::invalid("tooth capacitances must be positive"));
                }
                let mut sorted = tooth_caps.clone();
                sorted.sort_by(f64::total_cmp);
                if sorted
                    .windows(2)
                    .any(|w| w[1] - w[0] < TOOTH_SEPARATION * (1.0 - 1e-9))
                {
                    return Err(Error::invalid(
                        "tooth capacitances must differ by at least 0.5 pF",
                    ));
                }
            }
            SensorModel::AudioVaractor {
                varactor,
                mic_sensitivity,
                blocking_caps,
                bias,
            } => {
                varactor.capacitance(*bias)?;
                if !(*mic_sensitivity > 0.0 && *blocking_caps > 0.0) {
                    return Err(Error::invalid(
                        "mic sensitivity and blocking capacitance must be positive",
                    ));
                }
            }
        }
        Ok(())
    }

    fn tank_adjust(&self, state: SensorState) -> Result<TankAdjust> {
        let mut adj = TankAdjust::default();
        match (&self.sensor, state) {
            (_, SensorState::Rest) => match &self.sensor {
                SensorModel::InductiveButtons { l11, l12 } => {
                    adj.l_eq = Some(parallel_inductance(self.design.l1, l11 + l12)?);
                }
                SensorModel::AudioVaractor { .. } => {
                    return self.tank_adjust(SensorState::Audio { pressure: 0.0 });
                }
                _ => {}
            },
            (SensorModel::InductiveButtons { l11, l12 }, SensorState::Pressed(b)) => {
                let remaining = match b {
                    Button::Up => *l12,
                    Button::Down => *l11,
                };
                adj.l_eq = Some(parallel_inductance(self.design.l1, remaining)?);
            }
            (
                SensorModel::CapacitiveBarcode {
                    tooth_caps,
                    attach_node,
                },
                SensorState::Tooth { index, jitter },
            ) => {
                let base = tooth_caps.get(index).ok_or_else(|| {
                    Error::invalid(format!(
                        "tooth index {index} out of range (tag has {})",
                        tooth_caps.len()
                    ))
                })?;
                let c = base + jitter;
                if !(c > 0.0) {
                    return Err(Error::invalid(format!(
                        "tooth {index} capacitance {c} F is not positive"
                    )));
                }
                match attach_node {
                    AttachNode::C1 => adj.extra_c1 = c,
                    AttachNode::C2 => adj.extra_c2 = c,
                    AttachNode::MidNode => adj.extra_mid = c,
                }
            }
            (
                SensorModel::AudioVaractor {
                    varactor,
                    mic_sensitivity,
                    blocking_caps,
                    bias,
                },
                SensorState::Audio { pressure },
            ) => {
                let cv = varactor.capacitance(bias + mic_sensitivity * pressure)?;
                adj.extra_c2 = 1.0 / (1.0 / cv + 1.0 / blocking_caps);
            }
            (sensor, state) => {
                return Err(Error::invalid(format!(
                    "sensor state {state:?} is illegal for {}",
                    sensor_kind(sensor)
                )))
            }
        }
        Ok(adj)
    }
}

fn sensor_kind(s: &SensorModel) -> &'static str {
    match s {
        SensorModel::Plain => "a plain tag",
        SensorModel::InductiveButtons { .. } => "inductive buttons",
        SensorModel::CapacitiveBarcode { .. } => "a capacitive barcode",
        SensorModel::AudioVaractor { .. } => "an audio varactor",
    }
}

/// Oscillation frequency with the sensor at rest.
pub fn idle_frequency(tag: &TagConfig) -> Result<f64> {
    event_frequency(tag, SensorState::Rest)
}

pub fn event_frequency(tag: &TagConfig, state: SensorState) -> Result<f64> {
    let adj = tag.tank_adjust(state)?;
    Ok(reduce_tank_adjusted(&tag.design, &adj)?.f_resonant)
}

// ---------------------------------------------------------------------------
// Scripts

/// One scripted interaction. Times are seconds from the start of the capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScriptEvent {
    ButtonPress {
        button: Button,
        #[serde(deserialize_with = "units::second::deserialize")]
        t: f64,
    },
    ButtonRelease {
        button: Button,
        #[serde(deserialize_with = "units::second::deserialize")]
        t: f64,
    },
    SwipeTooth {
        tooth_index: usize,
        #[serde(deserialize_with = "units::second::deserialize")]
        t_start: f64,
        #[serde(deserialize_with = "units::second::deserialize")]
        t_end: f64,
        /// Finger-to-finger variation added to the tooth capacitance.
        #[serde(default, skip_serializing_if = "is_zero")]
        jitter: f64,
    },
    /// Sampled sound pressure in pascals.
    AudioWaveform {
        samples: Vec<f64>,
        #[serde(deserialize_with = "units::hertz::deserialize")]
        rate: f64,
        #[serde(deserialize_with = "units::second::deserialize")]
        t_start: f64,
    },
    /// Analytic sine tone, sample-accurate at any track rate.
    AudioTone {
        #[serde(deserialize_with = "units::hertz::deserialize")]
        frequency: f64,
        amplitude_pa: f64,
        #[serde(deserialize_with = "units::second::deserialize")]
        t_start: f64,
        #[serde(deserialize_with = "units::second::deserialize")]
        duration: f64,
    },
    /// A finger on the thermoelectric harvester.
    TouchTeg {
        #[serde(deserialize_with = "units::second::deserialize")]
        t_start: f64,
        #[serde(deserialize_with = "units::second::deserialize")]
        duration: f64,
    },
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl ScriptEvent {
    pub fn start(&self) -> f64 {
        match self {
            ScriptEvent::ButtonPress { t, .. } | ScriptEvent::ButtonRelease { t, .. } => *t,
            ScriptEvent::SwipeTooth { t_start, .. }
            | ScriptEvent::AudioWaveform { t_start, .. }
            | ScriptEvent::AudioTone { t_start, .. }
            | ScriptEvent::TouchTeg { t_start, .. } => *t_start,
        }
    }

    fn is_audio(&self) -> bool {
        matches!(
            self,
            ScriptEvent::AudioWaveform { .. } | ScriptEvent::AudioTone { .. }
        )
    }

    /// Pressure contribution at time `t`, zero outside the event.
    fn pressure_at(&self, t: f64) -> f64 {
        match self {
            ScriptEvent::AudioTone {
                frequency,
                amplitude_pa,
                t_start,
                duration,
            } => {
                if t < *t_start || t >= t_start + duration {
                    0.0
                } else {
                    amplitude_pa * (2.0 * std::f64::consts::PI * frequency * (t - t_start)).sin()
                }
            }
            ScriptEvent::AudioWaveform {
                samples,
                rate,
                t_start,
            } => {
                let pos = (t - t_start) * rate;
                if pos < 0.0 || samples.is_empty() {
                    return 0.0;
                }
                let i = pos.floor() as usize;
                if i + 1 >= samples.len() {
                    return if i + 1 == samples.len() && pos == i as f64 {
                        samples[i]
                    } else {
                        0.0
                    };
                }
                let frac = pos - i as f64;
                samples[i] * (1.0 - frac) + samples[i + 1] * frac
            }
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionScript {
    pub events: Vec<ScriptEvent>,
}

/// A span of constant discrete sensor state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpan {
    pub t_start: f64,
    pub t_end: f64,
    pub state: SensorState,
}

/// A TEG touch, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Touch {
    pub t_start: f64,
    pub duration: f64,
}

impl InteractionScript {
    pub fn new(events: Vec<ScriptEvent>) -> Self {
        InteractionScript { events }
    }

    /// Checks ordering and overlap rules and resolves the discrete events
    /// into non-overlapping state spans. An unreleased button holds until
    /// `horizon`.
    pub fn state_spans(&self, horizon: f64) -> Result<Vec<StateSpan>> {
        let mut last_start = f64::NEG_INFINITY;
        for (i, ev) in self.events.iter().enumerate() {
            let s = ev.start();
            if !s.is_finite() || s < 0.0 {
                return Err(Error::Script(format!(
                    "event {i} starts at invalid time {s}"
                )));
            }
            if s < last_start {
                return Err(Error::Script(format!(
                    "event {i} at t={s} s is out of time order"
                )));
            }
            last_start = s;
        }

        let mut spans = Vec::new();
        let mut held: Option<(Button, f64)> = None;
        for (i, ev) in self.events.iter().enumerate() {
            match *ev {
                ScriptEvent::ButtonPress { button, t } => {
                    if let Some((other, _)) = held {
                        return Err(Error::Script(format!(
                            "event {i}: {button:?} pressed at t={t} while {other:?} is held"
                        )));
                    }
                    held = Some((button, t));
                }
                ScriptEvent::ButtonRelease { button, t } => match held {
                    Some((b, t0)) if b == button => {
                        if t <= t0 {
                            return Err(Error::Script(format!(
                                "event {i}: zero-length press of {button:?}"
                            )));
                        }
                        spans.push(StateSpan {
                            t_start: t0,
                            t_end: t,
                            state: SensorState::Pressed(b),
                        });
                        held = None;
                    }
                    _ => {
                        return Err(Error::Script(format!(
                            "event {i}: release of {button:?} that is not pressed"
                        )))
                    }
                },
                ScriptEvent::SwipeTooth {
                    tooth_index,
                    t_start,
                    t_end,
                    jitter,
                } => {
                    if held.is_some() {
                        return Err(Error::Script(format!(
                            "event {i}: tooth touched while a button is held"
                        )));
                    }
                    if !(t_end > t_start) {
                        return Err(Error::Script(format!(
                            "event {i}: tooth span must have positive length"
                        )));
                    }
                    spans.push(StateSpan {
                        t_start,
                        t_end,
                        state: SensorState::Tooth {
                            index: tooth_index,
                            jitter,
                        },
                    });
                }
                ScriptEvent::AudioWaveform { rate, .. } if !(rate > 0.0) => {
                    return Err(Error::Script(format!(
                        "event {i}: audio rate must be positive"
                    )))
                }
                ScriptEvent::AudioTone { duration, .. }
                | ScriptEvent::TouchTeg { duration, .. }
                    if !(duration > 0.0) =>
                {
                    return Err(Error::Script(format!(
                        "event {i}: duration must be positive"
                    )))
                }
                _ => {}
            }
        }
        if let Some((b, t0)) = held {
            if horizon > t0 {
                spans.push(StateSpan {
                    t_start: t0,
                    t_end: horizon,
                    state: SensorState::Pressed(b),
                });
            }
        }
        spans.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
        for w in spans.windows(2) {
            if w[1].t_start < w[0].t_end {
                return Err(Error::Script(format!(
                    "overlapping interactions at t={} s and t={} s",
                    w[0].t_start, w[1].t_start
                )));
            }
        }
        Ok(spans)
    }

    pub fn touches(&self) -> Vec<Touch> {
        self.events
            .iter()
            .filter_map(|e| match *e {
                ScriptEvent::TouchTeg { t_start, duration } => Some(Touch { t_start, duration }),
                _ => None,
            })
            .collect()
    }

    fn audio_events(&self) -> Vec<&ScriptEvent> {
        self.events.iter().filter(|e| e.is_audio()).collect()
    }
}

// ---------------------------------------------------------------------------
// Power

/// Energy source feeding a tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowerSupply {
    ConstantDc {
        #[serde(deserialize_with = "units::volt::deserialize")]
        voltage: f64,
        #[serde(deserialize_with = "units::ampere::deserialize")]
        current: f64,
    },
    /// Thermoelectric generator driven by finger touches. Each touch charges
    /// with `rise_tau` while the finger is down and decays with `decay_tau`
    /// afterwards; a one-second touch peaks at exactly the given values.
    TegTouch {
        #[serde(default = "teg_v", deserialize_with = "units::volt::deserialize")]
        peak_voltage: f64,
        #[serde(default = "teg_i", deserialize_with = "units::ampere::deserialize")]
        peak_current: f64,
        #[serde(default = "teg_rise", deserialize_with = "units::second::deserialize")]
        rise_tau: f64,
        #[serde(default = "teg_decay", deserialize_with = "units::second::deserialize")]
        decay_tau: f64,
    },
}

fn teg_v() -> f64 {
    0.4
}
fn teg_i() -> f64 {
    2.5e-6
}
fn teg_rise() -> f64 {
    0.2
}
fn teg_decay() -> f64 {
    1.5
}

/// Reference touch length at which the TEG reaches its rated peak.
pub const TEG_REFERENCE_TOUCH: f64 = 1.0;

impl PowerSupply {
    pub fn teg_default() -> Self {
        PowerSupply::TegTouch {
            peak_voltage: teg_v(),
            peak_current: teg_i(),
            rise_tau: teg_rise(),
            decay_tau: teg_decay(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PowerSupply::ConstantDc { voltage, current } => voltage >= 0.0 && current >= 0.0,
            PowerSupply::TegTouch {
                peak_voltage,
                peak_current,
                rise_tau,
                decay_tau,
            } => peak_voltage > 0.0 && peak_current > 0.0 && rise_tau > 0.0 && decay_tau > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid power supply {self:?}")))
        }
    }

    /// Normalized harvester output in `[0, ~1]` at `t`.
    fn teg_level(rise_tau: f64, decay_tau: f64, touches: &[Touch], t: f64) -> f64 {
        let norm = 1.0 - (-TEG_REFERENCE_TOUCH / rise_tau).exp();
        touches
            .iter()
            .map(|touch| {
                let dt = t - touch.t_start;
                if dt < 0.0 {
                    0.0
                } else if dt <= touch.duration {
                    1.0 - (-dt / rise_tau).exp()
                } else {
                    (1.0 - (-touch.duration / rise_tau).exp())
                        * (-(dt - touch.duration) / decay_tau).exp()
                }
            })
            .fold(0.0, f64::max)
            / norm
    }

    /// Supply `(voltage, current)` at `t`.
    pub fn output_at(&self, touches: &[Touch], t: f64) -> (f64, f64) {
        match *self {
            PowerSupply::ConstantDc { voltage, current } => (voltage, current),
            PowerSupply::TegTouch {
                peak_voltage,
                peak_current,
                rise_tau,
                decay_tau,
            } => {
                let g = Self::teg_level(rise_tau, decay_tau, touches, t);
                (peak_voltage * g, peak_current * g)
            }
        }
    }
}

/// True iff the supply meets both startup thresholds at `t`.
pub fn power_gate(tag: &TagConfig, supply: &PowerSupply, touches: &[Touch], t: f64) -> bool {
    let (v, i) = supply.output_at(touches, t);
    v >= tag.startup_voltage && i >= tag.startup_current
}

/// Interval during which a single TEG touch keeps the tag running, found by
/// bisection on the rising and falling edges. `None` if never powered.
pub fn teg_active_window(
    tag: &TagConfig,
    supply: &PowerSupply,
    touch: Touch,
) -> Option<(f64, f64)> {
    let PowerSupply::TegTouch { decay_tau, .. } = *supply else {
        return None;
    };
    let touches = [touch];
    let on = |t: f64| power_gate(tag, supply, &touches, t);
    let peak = touch.t_start + touch.duration;
    if !on(peak) {
        return None;
    }
    let bisect = |mut off: f64, mut on_t: f64| {
        for _ in 0..80 {
            let mid = 0.5 * (off + on_t);
            if on(mid) {
                on_t = mid;
            } else {
                off = mid;
            }
        }
        on_t
    };
    let start = bisect(touch.t_start, peak);
    let end = bisect(peak + 50.0 * decay_tau, peak);
    Some((start, end))
}

// ---------------------------------------------------------------------------
// Frequency tracks

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTrack {
    pub sample_rate: f64,
    /// Idle frequency.
    pub f0: f64,
    /// Instantaneous frequency offsets from the carrier, hertz.
    pub samples: Vec<f64>,
    pub active_mask: Vec<bool>,
}

impl FrequencyTrack {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// A constant, always-active track.
    pub fn constant(f: f64, sample_rate: f64, len: usize) -> Self {
        FrequencyTrack {
            sample_rate,
            f0: f,
            samples: vec![f; len],
            active_mask: vec![true; len],
        }
    }
}

/// Renders a tag's instantaneous frequency at `rate` for `duration` seconds.
///
/// Discrete sensor states glide between levels with a first-order lag of
/// [`TRANSITION_TAU`]; audio drives the varactor sample by sample.
pub fn frequency_track(
    tag: &TagConfig,
    supply: &PowerSupply,
    script: &InteractionScript,
    duration: f64,
    rate: f64,
) -> Result<FrequencyTrack> {
    tag.validate()?;
    supply.validate()?;
    if !(duration > 0.0) {
        return Err(Error::invalid("track duration must be positive"));
    }
    if !(rate >= 2.0 * MAX_DEVIATION) {
        return Err(Error::invalid(format!(
            "track rate {rate} Hz is below twice the {MAX_DEVIATION} Hz deviation bound"
        )));
    }
    let spans = script.state_spans(duration)?;
    let audio = script.audio_events();
    let is_audio_tag = matches!(tag.sensor, SensorModel::AudioVaractor { .. });
    if !audio.is_empty() && !is_audio_tag {
        return Err(Error::Script(format!(
            "tag '{}' has audio events but no audio sensor",
            tag.tag_id
        )));
    }
    if is_audio_tag && !spans.is_empty() {
        return Err(Error::Script(format!(
            "audio tag '{}' cannot take button or tooth events",
            tag.tag_id
        )));
    }

    let f0 = idle_frequency(tag)?;
    let levels = spans
        .iter()
        .map(|s| event_frequency(tag, s.state))
        .collect::<Result<Vec<_>>>()?;
    let touches = script.touches();

    let n = (duration * rate).round() as usize;
    let mut samples = Vec::with_capacity(n);
    let mut active_mask = Vec::with_capacity(n);
    let alpha = 1.0 - (-1.0 / (TRANSITION_TAU * rate)).exp();
    let constant_gate = match supply {
        PowerSupply::ConstantDc { .. } => Some(power_gate(tag, supply, &[], 0.0)),
        PowerSupply::TegTouch { .. } => None,
    };
    let mut span_idx = 0;
    let mut smoothed = f0;
    for k in 0..n {
        let t = k as f64 / rate;
        let f = if is_audio_tag {
            let p: f64 = audio.iter().map(|e| e.pressure_at(t)).sum();
            if p == 0.0 {
                f0
            } else {
                event_frequency(tag, SensorState::Audio { pressure: p })?
            }
        } else {
            while span_idx < spans.len() && spans[span_idx].t_end <= t {
                span_idx += 1;
            }
            let target = match spans.get(span_idx) {
                Some(s) if s.t_start <= t => levels[span_idx],
                _ => f0,
            };
            if k == 0 {
                smoothed = target;
            } else {
                smoothed += alpha * (target - smoothed);
            }
            smoothed
        };
        let active = constant_gate.unwrap_or_else(|| power_gate(tag, supply, &touches, t));
        if active && (f - f0).abs() > MAX_DEVIATION {
            return Err(Error::invalid(format!(
                "tag '{}' deviates {:.1} kHz from idle at t={t:.6} s, beyond the 70 kHz bound",
                tag.tag_id,
                (f - f0) / 1e3
            )));
        }
        samples.push(f);
        active_mask.push(active);
    }
    Ok(FrequencyTrack {
        sample_rate: rate,
        f0,
        samples,
        active_mask,
    })
}

// ---------------------------------------------------------------------------
// Calibration

/// What a calibration target pins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum CalibrationState {
    Idle,
    Button {
        button: Button,
    },
    Tooth {
        index: usize,
    },
    /// Half the peak-to-peak swing produced by a ±`peak_pressure` sine.
    AudioDeviation {
        peak_pressure: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    #[serde(flatten)]
    pub state: CalibrationState,
    #[serde(deserialize_with = "units::hertz::deserialize")]
    pub frequency: f64,
}

impl CalibrationTarget {
    pub fn new(state: CalibrationState, frequency: f64) -> Self {
        CalibrationTarget { state, frequency }
    }
}

/// Frequency (or deviation) the tag currently produces for a target state.
pub fn calibrated_value(tag: &TagConfig, state: CalibrationState) -> Result<f64> {
    match state {
        CalibrationState::Idle => idle_frequency(tag),
        CalibrationState::Button { button } => event_frequency(tag, SensorState::Pressed(button)),
        CalibrationState::Tooth { index } => {
            event_frequency(tag, SensorState::Tooth { index, jitter: 0.0 })
        }
        CalibrationState::AudioDeviation { peak_pressure } => {
            let hi = event_frequency(
                tag,
                SensorState::Audio {
                    pressure: peak_pressure,
                },
            )?;
            let lo = event_frequency(
                tag,
                SensorState::Audio {
                    pressure: -peak_pressure,
                },
            )?;
            Ok((hi - lo) / 2.0)
        }
    }
}

fn infeasible(t: &CalibrationTarget, why: &str) -> Error {
    Error::Calibration(format!(
        "target {:?} at {:.3} kHz unreachable: {why}",
        t.state,
        t.frequency / 1e3
    ))
}

/// Monotone bisection for `g(x) = goal` on `[lo, hi]` in log space.
fn solve_log(
    mut lo: f64,
    mut hi: f64,
    goal: f64,
    g: impl Fn(f64) -> Result<f64>,
) -> Result<Option<f64>> {
    let g_lo = g(lo)?;
    let g_hi = g(hi)?;
    if (g_lo - goal).signum() == (g_hi - goal).signum() {
        return Ok(None);
    }
    let increasing = g_hi > g_lo;
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let below = g(mid)? < goal;
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok(Some((lo * hi).sqrt()))
}

/// Chooses sensor components so that each target state lands on its
/// frequency. Button triples are solved in closed form; everything else by
/// monotone bisection. Targets already met to 1e-9 leave the tag untouched.
pub fn calibrate_sensor(tag: &TagConfig, targets: &[CalibrationTarget]) -> Result<TagConfig> {
    tag.validate()?;
    let mut out = tag.clone();
    let pending: Vec<&CalibrationTarget> = targets
        .iter()
        .filter(|t| match calibrated_value(tag, t.state) {
            Ok(v) => ((v - t.frequency) / t.frequency).abs() > 1e-9,
            Err(_) => true,
        })
        .collect();
    if pending.is_empty() {
        return Ok(out);
    }
    for t in targets {
        if !(t.frequency > 0.0) {
            return Err(infeasible(t, "frequency must be positive"));
        }
    }

    let idle = targets.iter().find(|t| t.state == CalibrationState::Idle);
    match out.sensor.clone() {
        SensorModel::InductiveButtons { .. } => calibrate_buttons(&mut out, targets)?,
        SensorModel::Plain => {
            for t in targets {
                if t.state != CalibrationState::Idle {
                    return Err(infeasible(t, "plain tags only take an idle target"));
                }
            }
            if let Some(t) = idle {
                set_idle_by_l1(&mut out, t)?;
            }
        }
        SensorModel::CapacitiveBarcode { .. } => {
            if let Some(t) = idle {
                set_idle_by_l1(&mut out, t)?;
            }
            for t in targets {
                match t.state {
                    CalibrationState::Idle => {}
                    CalibrationState::Tooth { index } => calibrate_tooth(&mut out, index, t)?,
                    _ => return Err(infeasible(t, "not a barcode state")),
                }
            }
        }
        SensorModel::AudioVaractor { .. } => {
            if let Some(t) = idle {
                set_idle_by_l1(&mut out, t)?;
            }
            for t in targets {
                match t.state {
                    CalibrationState::Idle => {}
                    CalibrationState::AudioDeviation { peak_pressure } => {
                        calibrate_audio(&mut out, peak_pressure, t)?
                    }
                    _ => return Err(infeasible(t, "not an audio state")),
                }
            }
        }
    }

    for t in targets {
        let got = calibrated_value(&out, t.state)?;
        if (got - t.frequency).abs() > CALIBRATION_TOLERANCE {
            return Err(infeasible(
                t,
                &format!("best achievable {:.3} kHz", got / 1e3),
            ));
        }
    }
    if let SensorModel::CapacitiveBarcode { tooth_caps, .. } = &out.sensor {
        let mut shifts = (0..tooth_caps.len())
            .map(|i| {
                event_frequency(
                    &out,
                    SensorState::Tooth {
                        index: i,
                        jitter: 0.0,
                    },
                )
            })
            .collect::<Result<Vec<_>>>()?;
        shifts.sort_by(f64::total_cmp);
        if shifts
            .windows(2)
            .any(|w| w[1] - w[0] < TOOTH_SHIFT_SEPARATION)
        {
            return Err(Error::Calibration(
                "calibrated tooth frequencies are closer than 2 kHz".into(),
            ));
        }
    }
    out.validate()?;
    Ok(out)
}

fn set_idle_by_l1(tag: &mut TagConfig, t: &CalibrationTarget) -> Result<()> {
    let c_rest = tank_capacitance(&tag.design, &tag.tank_adjust(SensorState::Rest)?)?;
    let l_eq = required_inductance(t.frequency, c_rest)?;
    tag.design.l1 = match &tag.sensor {
        SensorModel::InductiveButtons { l11, l12 } => {
            let g = 1.0 / l_eq - 1.0 / (l11 + l12);
            if !(g > 0.0) {
                return Err(infeasible(t, "button inductors alone already exceed it"));
            }
            1.0 / g
        }
        _ => l_eq,
    };
    Ok(())
}

fn calibrate_buttons(tag: &mut TagConfig, targets: &[CalibrationTarget]) -> Result<()> {
    let find = |s: CalibrationState| targets.iter().find(|t| t.state == s);
    let idle = find(CalibrationState::Idle);
    let up = find(CalibrationState::Button { button: Button::Up });
    let down = find(CalibrationState::Button {
        button: Button::Down,
    });
    for t in targets {
        if matches!(
            t.state,
            CalibrationState::Tooth { .. } | CalibrationState::AudioDeviation { .. }
        ) {
            return Err(infeasible(t, "not a button state"));
        }
    }
    // Buttons only change L, so every state shares the rest capacitance.
    let c = tank_capacitance(&tag.design, &TankAdjust::default())?;
    let g = |t: &CalibrationTarget| required_inductance(t.frequency, c).map(|l| 1.0 / l);

    if let (Some(ti), Some(tu), Some(td)) = (idle, up, down) {
        // 1/L1 + 1/(L11+L12) = gi, 1/L1 + 1/L12 = gu, 1/L1 + 1/L11 = gd.
        // With a = gi - 1/L1 this reduces to a² = (gd - gi)(gu - gi).
        let (gi, gu, gd) = (g(ti)?, g(tu)?, g(td)?);
        if gu <= gi {
            return Err(infeasible(tu, "button frequencies must exceed idle"));
        }
        if gd <= gi {
            return Err(infeasible(td, "button frequencies must exceed idle"));
        }
        let a = ((gd - gi) * (gu - gi)).sqrt();
        let x = gi - a;
        if !(x > 0.0) {
            return Err(infeasible(ti, "needs a negative L1"));
        }
        tag.design.l1 = 1.0 / x;
        tag.sensor = SensorModel::InductiveButtons {
            l11: 1.0 / (gd - x),
            l12: 1.0 / (gu - x),
        };
        return Ok(());
    }

    // Partial target sets: adjust one inductor per target until consistent.
    for _ in 0..200 {
        if let Some(t) = idle {
            set_idle_by_l1(tag, t)?;
        }
        for (tb, button) in [(up, Button::Up), (down, Button::Down)] {
            let Some(t) = tb else { continue };
            let x = 1.0 / tag.design.l1;
            let rem = g(t)? - x;
            if !(rem > 0.0) {
                return Err(infeasible(t, "below the L1-only frequency"));
            }
            if let SensorModel::InductiveButtons { l11, l12 } = &mut tag.sensor {
                match button {
                    Button::Up => *l12 = 1.0 / rem,
                    Button::Down => *l11 = 1.0 / rem,
                }
            }
        }
        let worst = targets
            .iter()
            .map(|t| calibrated_value(tag, t.state).map(|v| (v - t.frequency).abs()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if worst < 1e-6 {
            break;
        }
    }
    Ok(())
}

fn calibrate_tooth(tag: &mut TagConfig, index: usize, t: &CalibrationTarget) -> Result<()> {
    let SensorModel::CapacitiveBarcode { tooth_caps, .. } = &tag.sensor else {
        unreachable!("caller matched barcode");
    };
    if index >= tooth_caps.len() {
        return Err(infeasible(t, "tooth index out of range"));
    }
    let idle = idle_frequency(tag)?;
    if t.frequency >= idle {
        return Err(infeasible(
            t,
            "a touched tooth can only lower the frequency",
        ));
    }
    let probe = |c: f64| -> Result<f64> {
        let mut trial = tag.clone();
        if let SensorModel::CapacitiveBarcode { tooth_caps, .. } = &mut trial.sensor {
            tooth_caps[index] = c;
        }
        event_frequency(&trial, SensorState::Tooth { index, jitter: 0.0 })
    };
    let c = solve_log(1e-16, 1e-6, t.frequency, probe)?
        .ok_or_else(|| infeasible(t, "outside the tooth capacitance range"))?;
    if let SensorModel::CapacitiveBarcode { tooth_caps, .. } = &mut tag.sensor {
        tooth_caps[index] = c;
    }
    Ok(())
}

fn calibrate_audio(tag: &mut TagConfig, peak_pressure: f64, t: &CalibrationTarget) -> Result<()> {
    let SensorModel::AudioVaractor { varactor, bias, .. } = &tag.sensor else {
        unreachable!("caller matched audio");
    };
    if !(peak_pressure > 0.0) {
        return Err(infeasible(t, "peak pressure must be positive"));
    }
    // Keep the most negative excursion inside the varactor's domain.
    let max_swing = (bias + varactor.junction_potential) * 0.999;
    let s_max = max_swing / peak_pressure;
    let probe = |s: f64| -> Result<f64> {
        let mut trial = tag.clone();
        if let SensorModel::AudioVaractor {
            mic_sensitivity, ..
        } = &mut trial.sensor
        {
            *mic_sensitivity = s;
        }
        calibrated_value(&trial, CalibrationState::AudioDeviation { peak_pressure })
    };
    let s = solve_log(s_max * 1e-9, s_max, t.frequency, probe)?
        .ok_or_else(|| infeasible(t, "varactor swing cannot reach it"))?;
    if let SensorModel::AudioVaractor {
        mic_sensitivity, ..
    } = &mut tag.sensor
    {
        *mic_sensitivity = s;
    }
    Ok(())
}

/// Tooth capacitance offset that moves tooth `index` to `target` hertz.
pub fn tooth_jitter_for(tag: &TagConfig, index: usize, target: f64) -> Result<f64> {
    let SensorModel::CapacitiveBarcode { tooth_caps, .. } = &tag.sensor else {
        return Err(Error::invalid("tag has no barcode"));
    };
    let base = *tooth_caps
        .get(index)
        .ok_or_else(|| Error::invalid(format!("tooth index {index} out of range")))?;
    let probe = |c: f64| {
        event_frequency(
            tag,
            SensorState::Tooth {
                index,
                jitter: c - base,
            },
        )
    };
    let c = solve_log(1e-16, 1e-6, target, probe)?
        .ok_or_else(|| Error::Calibration(format!("tooth {index} cannot reach {target} Hz")))?;
    Ok(c - base)
}

/// Peak deviation of `track` from its idle frequency over active samples.
pub fn max_deviation(track: &FrequencyTrack) -> f64 {
    track
        .samples
        .iter()
        .zip(&track.active_mask)
        .filter(|(_, a)| **a)
        .map(|(f, _)| (f - track.f0).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::OscillatorDesign;
    use proptest::prelude::*;

    fn mco_tag(sensor: SensorModel) -> TagConfig {
        TagConfig {
            tag_id: "t".into(),
            design: OscillatorDesign::mco(
                4.64e-3,
                1e-3,
                470e-12,
                470e-12,
                100e-9,
                Some(47e-12),
                200e3,
            ),
            sensor,
            startup_voltage: 0.2,
            startup_current: 1e-6,
            channel_center: 345e3,
            modulation_depth: 0.5,
        }
    }

    fn button_tag() -> TagConfig {
        let mut t = mco_tag(SensorModel::InductiveButtons {
            l11: 5e-3,
            l12: 5e-3,
        });
        t.channel_center = 289e3;
        calibrate_sensor(
            &t,
            &[
                CalibrationTarget::new(CalibrationState::Idle, 289e3),
                CalibrationTarget::new(CalibrationState::Button { button: Button::Up }, 303e3),
                CalibrationTarget::new(
                    CalibrationState::Button {
                        button: Button::Down,
                    },
                    314e3,
                ),
            ],
        )
        .unwrap()
    }

    fn barcode_tag() -> TagConfig {
        mco_tag(SensorModel::CapacitiveBarcode {
            tooth_caps: vec![1e-12, 2e-12, 3e-12],
            attach_node: AttachNode::MidNode,
        })
    }

    #[test]
    fn closed_form_buttons_hit_targets() {
        let t = button_tag();
        assert!((idle_frequency(&t).unwrap() - 289e3).abs() < 1e-3);
        let up = event_frequency(&t, SensorState::Pressed(Button::Up)).unwrap();
        let down = event_frequency(&t, SensorState::Pressed(Button::Down)).unwrap();
        assert!((up - 303e3).abs() < 1e-3);
        assert!((down - 314e3).abs() < 1e-3);
        // Down shorts L12 and leaves the smaller L11 in parallel.
        let SensorModel::InductiveButtons { l11, l12 } = t.sensor else {
            panic!()
        };
        assert!(l11 < l12);
    }

    #[test]
    fn calibration_is_identity_when_met() {
        let t = button_tag();
        let again = calibrate_sensor(
            &t,
            &[CalibrationTarget::new(
                CalibrationState::Idle,
                idle_frequency(&t).unwrap(),
            )],
        )
        .unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn partial_button_targets() {
        let t = mco_tag(SensorModel::InductiveButtons {
            l11: 5e-3,
            l12: 5e-3,
        });
        let out = calibrate_sensor(
            &t,
            &[CalibrationTarget::new(
                CalibrationState::Button { button: Button::Up },
                450e3,
            )],
        )
        .unwrap();
        let up = event_frequency(&out, SensorState::Pressed(Button::Up)).unwrap();
        assert!((up - 450e3).abs() < 1.0);
    }

    #[test]
    fn teeth_lower_frequency_monotonically() {
        let t = barcode_tag();
        let f0 = idle_frequency(&t).unwrap();
        let f: Vec<f64> = (0..3)
            .map(|i| {
                event_frequency(
                    &t,
                    SensorState::Tooth {
                        index: i,
                        jitter: 0.0,
                    },
                )
                .unwrap()
            })
            .collect();
        assert!(f0 > f[0] && f[0] > f[1] && f[1] > f[2]);
    }

    #[test]
    fn tooth_calibration_and_jitter_inverse() {
        let t = barcode_tag();
        let out = calibrate_sensor(
            &t,
            &[
                CalibrationTarget::new(CalibrationState::Idle, 345e3),
                CalibrationTarget::new(CalibrationState::Tooth { index: 0 }, 340e3),
                CalibrationTarget::new(CalibrationState::Tooth { index: 1 }, 334e3),
                CalibrationTarget::new(CalibrationState::Tooth { index: 2 }, 326e3),
            ],
        )
        .unwrap();
        for (i, f) in [(0, 340e3), (1, 334e3), (2, 326e3)] {
            let got = event_frequency(
                &out,
                SensorState::Tooth {
                    index: i,
                    jitter: 0.0,
                },
            )
            .unwrap();
            assert!((got - f).abs() < CALIBRATION_TOLERANCE, "{i}: {got}");
        }
        let j = tooth_jitter_for(&out, 1, 333e3).unwrap();
        let got = event_frequency(
            &out,
            SensorState::Tooth {
                index: 1,
                jitter: j,
            },
        )
        .unwrap();
        assert!((got - 333e3).abs() < 1.0);
    }

    #[test]
    fn unreachable_tooth_target() {
        let t = barcode_tag();
        let err = calibrate_sensor(
            &t,
            &[CalibrationTarget::new(
                CalibrationState::Tooth { index: 0 },
                400e3,
            )],
        );
        assert!(matches!(err, Err(Error::Calibration(_))));
        let err = calibrate_sensor(
            &t,
            &[CalibrationTarget::new(
                CalibrationState::Tooth { index: 0 },
                100e3,
            )],
        );
        assert!(matches!(err, Err(Error::Calibration(_))));
    }

    #[test]
    fn illegal_state_rejected() {
        let t = barcode_tag();
        assert!(event_frequency(&t, SensorState::Pressed(Button::Up)).is_err());
        assert!(event_frequency(
            &t,
            SensorState::Tooth {
                index: 9,
                jitter: 0.0
            }
        )
        .is_err());
    }

    #[test]
    fn validation_rules() {
        let mut t = barcode_tag();
        t.channel_center = 50e3;
        assert!(t.validate().is_err());
        let mut t = barcode_tag();
        t.sensor = SensorModel::CapacitiveBarcode {
            tooth_caps: vec![1e-12, 1.2e-12],
            attach_node: AttachNode::C1,
        };
        assert!(t.validate().is_err());
        let mut t = barcode_tag();
        t.startup_voltage = 0.0;
        assert!(t.validate().is_err());
    }

    #[test]
    fn script_ordering_and_overlap() {
        let bad_order = InteractionScript::new(vec![
            ScriptEvent::ButtonPress {
                button: Button::Up,
                t: 0.5,
            },
            ScriptEvent::ButtonRelease {
                button: Button::Up,
                t: 0.2,
            },
        ]);
        assert!(matches!(bad_order.state_spans(1.0), Err(Error::Script(_))));
        let double = InteractionScript::new(vec![
            ScriptEvent::ButtonPress {
                button: Button::Up,
                t: 0.1,
            },
            ScriptEvent::ButtonPress {
                button: Button::Down,
                t: 0.2,
            },
        ]);
        assert!(double.state_spans(1.0).is_err());
        let overlap = InteractionScript::new(vec![
            ScriptEvent::SwipeTooth {
                tooth_index: 0,
                t_start: 0.1,
                t_end: 0.3,
                jitter: 0.0,
            },
            ScriptEvent::SwipeTooth {
                tooth_index: 1,
                t_start: 0.2,
                t_end: 0.4,
                jitter: 0.0,
            },
        ]);
        assert!(overlap.state_spans(1.0).is_err());
        let stray = InteractionScript::new(vec![ScriptEvent::ButtonRelease {
            button: Button::Down,
            t: 0.1,
        }]);
        assert!(stray.state_spans(1.0).is_err());
    }

    #[test]
    fn track_glides_between_levels() {
        let t = button_tag();
        let script = InteractionScript::new(vec![
            ScriptEvent::ButtonPress {
                button: Button::Up,
                t: 0.1,
            },
            ScriptEvent::ButtonRelease {
                button: Button::Up,
                t: 0.2,
            },
        ]);
        let supply = PowerSupply::ConstantDc {
            voltage: 1.0,
            current: 1e-3,
        };
        let rate = 200e3;
        let tr = frequency_track(&t, &supply, &script, 0.3, rate).unwrap();
        assert_eq!(tr.len(), 60_000);
        assert!((tr.samples[0] - 289e3).abs() < 1e-6);
        // One time constant after the press: 1 - 1/e of the step.
        let k = ((0.1 + TRANSITION_TAU) * rate) as usize;
        let frac = (tr.samples[k] - 289e3) / 14e3;
        assert!((frac - (1.0 - (-1.0f64).exp())).abs() < 0.01, "{frac}");
        assert!((tr.samples[(0.19 * rate) as usize] - 303e3).abs() < 1.0);
        assert!((tr.samples[(0.29 * rate) as usize] - 289e3).abs() < 1.0);
        assert!(tr.active_mask.iter().all(|a| *a));
    }

    #[test]
    fn deviation_bound_enforced() {
        let mut t = button_tag();
        t.sensor = SensorModel::InductiveButtons {
            l11: 1e-4,
            l12: 1e-3,
        };
        let script = InteractionScript::new(vec![
            ScriptEvent::ButtonPress {
                button: Button::Down,
                t: 0.01,
            },
            ScriptEvent::ButtonRelease {
                button: Button::Down,
                t: 0.05,
            },
        ]);
        let supply = PowerSupply::ConstantDc {
            voltage: 1.0,
            current: 1e-3,
        };
        assert!(frequency_track(&t, &supply, &script, 0.06, 200e3).is_err());
    }

    #[test]
    fn teg_pulse_shape() {
        let supply = PowerSupply::teg_default();
        let touch = [Touch {
            t_start: 1.0,
            duration: 1.0,
        }];
        let (v, i) = supply.output_at(&touch, 2.0);
        assert!((v - 0.4).abs() < 1e-12 && (i - 2.5e-6).abs() < 1e-18);
        assert_eq!(supply.output_at(&touch, 0.5), (0.0, 0.0));
        let (v_late, _) = supply.output_at(&touch, 3.5);
        assert!((v_late - 0.4 * (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn teg_window_matches_dense_scan() {
        let mut t = barcode_tag();
        t.startup_voltage = 0.2;
        t.startup_current = 1e-6;
        let supply = PowerSupply::teg_default();
        let touch = Touch {
            t_start: 0.5,
            duration: 1.0,
        };
        let (on, off) = teg_active_window(&t, &supply, touch).unwrap();
        let dt = 1e-4;
        let powered: Vec<f64> = (0..100_000)
            .map(|k| k as f64 * dt)
            .filter(|x| power_gate(&t, &supply, &[touch], *x))
            .collect();
        assert!((powered[0] - on).abs() <= dt);
        assert!((powered[powered.len() - 1] - off).abs() <= dt);
        // Current needs 40% of peak, voltage 50%: voltage is the binding limit.
        assert!(off - on > 1.0);
        t.startup_voltage = 0.5;
        assert!(teg_active_window(&t, &supply, touch).is_none());
    }

    #[test]
    fn teg_gates_track() {
        let t = barcode_tag();
        let script = InteractionScript::new(vec![ScriptEvent::TouchTeg {
            t_start: 0.05,
            duration: 0.5,
        }]);
        let tr = frequency_track(&t, &PowerSupply::teg_default(), &script, 0.3, 200e3).unwrap();
        assert!(!tr.active_mask[0]);
        assert!(tr.active_mask.iter().any(|a| *a));
    }

    fn audio_tag() -> TagConfig {
        let mut t = mco_tag(SensorModel::AudioVaractor {
            varactor: VaractorModel {
                c_zero_bias: 100e-12,
                junction_potential: 0.7,
                grading_exponent: 2.0,
            },
            mic_sensitivity: 0.1,
            blocking_caps: 1e-9,
            bias: 3.0,
        });
        t.design =
            OscillatorDesign::mco(0.5e-3, 1e-3, 470e-12, 470e-12, 100e-9, Some(47e-12), 200e3);
        t.channel_center = 670e3;
        t
    }

    #[test]
    fn audio_deviation_calibration() {
        let t = audio_tag();
        let out = calibrate_sensor(
            &t,
            &[CalibrationTarget::new(
                CalibrationState::AudioDeviation { peak_pressure: 1.0 },
                5e3,
            )],
        )
        .unwrap();
        let dev = calibrated_value(
            &out,
            CalibrationState::AudioDeviation { peak_pressure: 1.0 },
        )
        .unwrap();
        assert!((dev - 5e3).abs() < 1.0);
    }

    #[test]
    fn audio_track_follows_tone() {
        let t = audio_tag();
        let script = InteractionScript::new(vec![ScriptEvent::AudioTone {
            frequency: 1e3,
            amplitude_pa: 1.0,
            t_start: 0.0,
            duration: 0.01,
        }]);
        let supply = PowerSupply::ConstantDc {
            voltage: 1.0,
            current: 1e-3,
        };
        let tr = frequency_track(&t, &supply, &script, 0.01, 400e3).unwrap();
        // Quarter period: maximum positive pressure raises the varactor bias,
        // shrinking its capacitance and raising the frequency.
        let q = tr.samples[100] - tr.f0;
        let tq = tr.samples[300] - tr.f0;
        assert!(q > 0.0 && tq < 0.0);
        assert!((q + tq).abs() < 0.1 * q.abs());
    }

    #[test]
    fn audio_events_need_audio_sensor() {
        let t = barcode_tag();
        let script = InteractionScript::new(vec![ScriptEvent::AudioTone {
            frequency: 1e3,
            amplitude_pa: 1.0,
            t_start: 0.0,
            duration: 0.01,
        }]);
        let supply = PowerSupply::ConstantDc {
            voltage: 1.0,
            current: 1e-3,
        };
        assert!(frequency_track(&t, &supply, &script, 0.01, 200e3).is_err());
    }

    #[test]
    fn waveform_interpolates() {
        let ev = ScriptEvent::AudioWaveform {
            samples: vec![0.0, 1.0, 0.0],
            rate: 10.0,
            t_start: 1.0,
        };
        assert_eq!(ev.pressure_at(0.9), 0.0);
        assert!((ev.pressure_at(1.05) - 0.5).abs() < 1e-12);
        assert!((ev.pressure_at(1.1) - 1.0).abs() < 1e-12);
        assert_eq!(ev.pressure_at(5.0), 0.0);
    }

    #[test]
    fn sensor_json_roundtrip() {
        let json = r#"{"kind":"inductive_buttons","l11":"2mH","l12":"3mH"}"#;
        let s: SensorModel = serde_json::from_str(json).unwrap();
        assert_eq!(
            s,
            SensorModel::InductiveButtons {
                l11: 2e-3,
                l12: 3e-3
            }
        );
    }

    proptest! {
        #[test]
        fn any_button_triple_above_idle_solves(
            fi in 150e3f64..900e3,
            du in 1e3f64..40e3,
            dd in 1e3f64..40e3,
        ) {
            let mut t = mco_tag(SensorModel::InductiveButtons { l11: 5e-3, l12: 5e-3 });
            t.channel_center = fi.clamp(BAND_LOW, BAND_HIGH);
            let targets = [
                CalibrationTarget::new(CalibrationState::Idle, fi),
                CalibrationTarget::new(CalibrationState::Button { button: Button::Up }, fi + du),
                CalibrationTarget::new(CalibrationState::Button { button: Button::Down }, fi + du + dd),
            ];
            let out = calibrate_sensor(&t, &targets).unwrap();
            for tg in &targets {
                let got = calibrated_value(&out, tg.state).unwrap();
                prop_assert!((got - tg.frequency).abs() < 1e-3 * tg.frequency * 1e-3);
            }
        }

        #[test]
        fn extra_capacitance_never_raises_frequency(c in 0.01e-12f64..20e-12) {
            let mut t = barcode_tag();
            t.sensor = SensorModel::CapacitiveBarcode { tooth_caps: vec![c], attach_node: AttachNode::MidNode };
            let f = event_frequency(&t, SensorState::Tooth { index: 0, jitter: 0.0 }).unwrap();
            prop_assert!(f < idle_frequency(&t).unwrap());
        }

        #[test]
        fn power_gate_is_monotone_in_thresholds(v in 0.01f64..0.5, i in 1e-7f64..3e-6, t in 0.0f64..5.0) {
            let mut tag = barcode_tag();
            tag.startup_voltage = v;
            tag.startup_current = i;
            let supply = PowerSupply::teg_default();
            let touches = [Touch { t_start: 0.2, duration: 1.0 }];
            if power_gate(&tag, &supply, &touches, t) {
                tag.startup_voltage *= 0.9;
                tag.startup_current *= 0.9;
                prop_assert!(power_gate(&tag, &supply, &touches, t));
            }
        }
    }
}
