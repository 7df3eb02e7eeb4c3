//! Ready-made scenarios: the bundled demos and the randomized workloads the
//! acceptance suite runs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::channel::{distance_for_snr, ChannelParams};
use crate::circuit::{OscillatorDesign, VaractorModel};
use crate::decode::{
    default_digit_bands, plan_channels, BandMode, PlanRequest, SwipeDirection, TagKind,
};
use crate::error::{Error, Result};
use crate::scenario::{Scenario, ScenarioTag};
use crate::tag::{
    calibrate_sensor, tooth_jitter_for, AttachNode, Button, CalibrationState, CalibrationTarget,
    PowerSupply, ScriptEvent, SensorModel, TagConfig,
};

pub const DISCRETE_RATE: f64 = 1e6;
pub const AUDIO_RATE: f64 = 2e6;
/// The menu tag's idle frequency and its three tooth landmarks, as
/// (dimmer swipe, ID digit) targets. Tooth `i` is labeled `i + 1`.
pub const MENU_IDLE: f64 = 345e3;
pub const SWIPE_TEETH: [f64; 3] = [340e3, 334e3, 326e3];
pub const ID_TEETH: [f64; 3] = [340e3, 332.5e3, 321.5e3];
/// Right swipe over teeth 3, 2, 1 (indices 2, 1, 0): 326 → 334 → 340 kHz.
pub const RIGHT_SWIPE: [usize; 3] = [2, 1, 0];
pub const PONG_TAGS: [(&str, f64, f64, f64); 2] = [
    ("paddle1", 289e3, 303e3, 314e3),
    ("paddle2", 349e3, 366e3, 379e3),
];
pub const SPEECH_IDLE: f64 = 670e3;
pub const SPEECH_DEVIATION: f64 = 60e3;
pub const MULTI_AUDIO_DEVIATION: f64 = 48e3;
/// One tone per tag for the eight-tag capture; no tone is within 30 Hz of
/// a low harmonic of another.
pub const MULTI_AUDIO_TONES: [f64; 8] =
    [430.0, 670.0, 1010.0, 1230.0, 1570.0, 1790.0, 2110.0, 2530.0];

/// Gate-output oscillator used by the discrete demo tags.
pub fn discrete_design(l1: f64) -> OscillatorDesign {
    OscillatorDesign::mco(l1, 1e-3, 470e-12, 470e-12, 100e-9, Some(47e-12), 200e3)
}

/// Gate-output oscillator with a large C1 and small C2 so a varactor across
/// C2 dominates the tank.
pub fn audio_design(l1: f64) -> OscillatorDesign {
    OscillatorDesign::mco(l1, 1e-3, 1e-9, 5e-12, 100e-9, Some(1e-9), 200e3)
}

fn dc_supply() -> PowerSupply {
    PowerSupply::ConstantDc {
        voltage: 1.0,
        current: 10e-6,
    }
}

fn base_config(
    tag_id: &str,
    design: OscillatorDesign,
    sensor: SensorModel,
    center: f64,
) -> TagConfig {
    TagConfig {
        tag_id: tag_id.to_string(),
        design,
        sensor,
        startup_voltage: 0.2,
        startup_current: 1e-6,
        channel_center: center,
        modulation_depth: 0.5,
    }
}

/// Builds a scenario tag and applies its calibration so the stored config
/// already meets its targets.
fn tag(
    config: TagConfig,
    calibration: Vec<CalibrationTarget>,
    distance: f64,
    mode: Option<BandMode>,
) -> Result<ScenarioTag> {
    let config = calibrate_sensor(&config, &calibration)?;
    Ok(ScenarioTag {
        config,
        distance: Some(distance),
        supply: Some(dc_supply()),
        calibration,
        mode,
    })
}

pub fn button_tag(
    tag_id: &str,
    idle: f64,
    up: f64,
    down: f64,
    distance: f64,
) -> Result<ScenarioTag> {
    let cfg = base_config(
        tag_id,
        discrete_design(4.64e-3),
        SensorModel::InductiveButtons {
            l11: 40e-3,
            l12: 60e-3,
        },
        idle,
    );
    tag(
        cfg,
        vec![
            CalibrationTarget::new(CalibrationState::Idle, idle),
            CalibrationTarget::new(CalibrationState::Button { button: Button::Up }, up),
            CalibrationTarget::new(
                CalibrationState::Button {
                    button: Button::Down,
                },
                down,
            ),
        ],
        distance,
        None,
    )
}

pub fn barcode_tag(
    tag_id: &str,
    teeth: &[f64],
    mode: BandMode,
    distance: f64,
) -> Result<ScenarioTag> {
    let cfg = base_config(
        tag_id,
        discrete_design(4.64e-3),
        SensorModel::CapacitiveBarcode {
            tooth_caps: (0..teeth.len()).map(|i| (i as f64 + 1.0) * 2e-12).collect(),
            attach_node: AttachNode::MidNode,
        },
        MENU_IDLE,
    );
    let mut cal = vec![CalibrationTarget::new(CalibrationState::Idle, MENU_IDLE)];
    cal.extend(
        teeth
            .iter()
            .enumerate()
            .map(|(index, f)| CalibrationTarget::new(CalibrationState::Tooth { index }, *f)),
    );
    tag(cfg, cal, distance, Some(mode))
}

pub fn audio_tag(tag_id: &str, idle: f64, deviation: f64, distance: f64) -> Result<ScenarioTag> {
    let cfg = base_config(
        tag_id,
        audio_design(2.717e-3),
        SensorModel::AudioVaractor {
            varactor: VaractorModel {
                c_zero_bias: 100e-12,
                junction_potential: 0.7,
                grading_exponent: 2.0,
            },
            mic_sensitivity: 0.1,
            blocking_caps: 1e-9,
            bias: 1.0,
        },
        idle,
    );
    tag(
        cfg,
        vec![
            CalibrationTarget::new(CalibrationState::Idle, idle),
            CalibrationTarget::new(
                CalibrationState::AudioDeviation { peak_pressure: 1.0 },
                deviation,
            ),
        ],
        distance,
        None,
    )
}

pub fn plain_tag(tag_id: &str, f: f64, distance: f64) -> Result<ScenarioTag> {
    let cfg = base_config(tag_id, discrete_design(4.64e-3), SensorModel::Plain, f);
    tag(
        cfg,
        vec![CalibrationTarget::new(CalibrationState::Idle, f)],
        distance,
        None,
    )
}

fn scenario(
    name: &str,
    seed: u64,
    rate: f64,
    duration: f64,
    tags: Vec<ScenarioTag>,
    scripts: BTreeMap<String, Vec<ScriptEvent>>,
) -> Scenario {
    let mut metadata = serde_json::Map::new();
    metadata.insert(
        "transmitter".into(),
        json!("monostatic 915 MHz carrier, 16 dBm amplified to 29 dBm (provenance only)"),
    );
    Scenario {
        name: name.to_string(),
        seed: Some(seed),
        metadata,
        channel: ChannelParams::new(rate, duration),
        tags,
        scripts,
    }
}

/// Distance at which the default anchors give `snr_db`.
pub fn distance_for(snr_db: f64) -> Result<f64> {
    distance_for_snr(&ChannelParams::new(DISCRETE_RATE, 1.0), snr_db)
}

// ---------------------------------------------------------------------------

/// Two button paddles; `presses` press/release pairs split between them,
/// each paddle pressing within its own time slots so presses on different
/// paddles overlap freely.
pub fn pong(seed: u64, duration: f64, presses: usize, snr_db: f64) -> Result<Scenario> {
    let d = distance_for(snr_db)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tags = Vec::new();
    let mut scripts = BTreeMap::new();
    for (k, (id, idle, up, down)) in PONG_TAGS.iter().enumerate() {
        tags.push(button_tag(id, *idle, *up, *down, d)?);
        let n = presses / PONG_TAGS.len() + usize::from(k < presses % PONG_TAGS.len());
        let mut events = Vec::new();
        if n > 0 {
            let slot = (duration - 0.4) / n as f64;
            for i in 0..n {
                let start = 0.2 + i as f64 * slot;
                let hold = rng.random_range(0.2..0.6f64).min(slot * 0.5);
                let t = start + rng.random_range(0.05..0.4f64) * (slot - hold);
                let button = if rng.random_bool(0.5) {
                    Button::Up
                } else {
                    Button::Down
                };
                events.push(ScriptEvent::ButtonPress { button, t });
                events.push(ScriptEvent::ButtonRelease {
                    button,
                    t: t + hold,
                });
            }
        }
        scripts.insert(id.to_string(), events);
    }
    Ok(scenario(
        "pong",
        seed,
        DISCRETE_RATE,
        duration,
        tags,
        scripts,
    ))
}

/// Tooth events for one swipe over `teeth` taking `speed` seconds.
pub fn swipe_events(teeth: &[usize], t0: f64, speed: f64) -> Vec<ScriptEvent> {
    let dwell = speed / teeth.len() as f64;
    teeth
        .iter()
        .enumerate()
        .map(|(k, &i)| ScriptEvent::SwipeTooth {
            tooth_index: i,
            t_start: t0 + k as f64 * dwell,
            t_end: t0 + (k + 1) as f64 * dwell,
            jitter: 0.0,
        })
        .collect()
}

/// Dimmer: one swipe-mode barcode tag and the given swipes, separated by
/// idle gaps. Returns the scenario and the scripted directions.
pub fn dimmer(seed: u64, swipes: &[(SwipeDirection, f64)], snr_db: f64) -> Result<Scenario> {
    let d = distance_for(snr_db)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.3;
    let mut events = Vec::new();
    for (dir, speed) in swipes {
        let teeth: Vec<usize> = match dir {
            SwipeDirection::Right => RIGHT_SWIPE.to_vec(),
            SwipeDirection::Left => RIGHT_SWIPE.iter().rev().copied().collect(),
            SwipeDirection::NoSwipe => return Err(Error::invalid("cannot script a non-swipe")),
        };
        events.extend(swipe_events(&teeth, t, *speed));
        t += speed + rng.random_range(0.4..0.7f64);
    }
    let tags = vec![barcode_tag("dimmer", &SWIPE_TEETH, BandMode::Swipe, d)?];
    let scripts = [("dimmer".to_string(), events)].into();
    Ok(scenario(
        "dimmer",
        seed,
        DISCRETE_RATE,
        t + 0.2,
        tags,
        scripts,
    ))
}

/// `n` random swipes with speeds in 0.3–2 s.
pub fn random_swipes(seed: u64, right: usize, left: usize) -> Vec<(SwipeDirection, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs: Vec<SwipeDirection> = std::iter::repeat_n(SwipeDirection::Right, right)
        .chain(std::iter::repeat_n(SwipeDirection::Left, left))
        .collect();
    // Fisher-Yates.
    for i in (1..dirs.len()).rev() {
        dirs.swap(i, rng.random_range(0..=i));
    }
    dirs.into_iter()
        .map(|d| (d, rng.random_range(0.3..=2.0f64)))
        .collect()
}

/// Menu: an ID-mode barcode tag reading each digit sequence in turn. Each
/// digit dwell lands at a random point in the middle 60% of its band.
pub fn menu(seed: u64, reads: &[Vec<u8>], snr_db: f64) -> Result<Scenario> {
    let d = distance_for(snr_db)?;
    let st = barcode_tag("menu", &ID_TEETH, BandMode::Id, d)?;
    let bands = default_digit_bands();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.3;
    let mut events = Vec::new();
    for read in reads {
        for &digit in read {
            let band = bands
                .iter()
                .find(|b| b.digit == digit)
                .ok_or_else(|| Error::invalid(format!("digit {digit} has no band")))?;
            let index = digit as usize - 1;
            let w = band.high - band.low;
            let target = band.low + w * rng.random_range(0.2..0.8f64);
            let jitter = tooth_jitter_for(&st.config, index, target)?;
            let dwell = rng.random_range(0.15..0.3f64);
            events.push(ScriptEvent::SwipeTooth {
                tooth_index: index,
                t_start: t,
                t_end: t + dwell,
                jitter,
            });
            t += dwell + rng.random_range(0.12..0.25f64);
        }
        t += rng.random_range(1.3..1.6f64);
    }
    let scripts = [("menu".to_string(), events)].into();
    Ok(scenario("menu", seed, DISCRETE_RATE, t, vec![st], scripts))
}

/// `n` random digit sequences of length 2–5 over digits 1–3.
pub fn random_reads(seed: u64, n: usize) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(2..=5usize);
            (0..len).map(|_| rng.random_range(1..=3u8)).collect()
        })
        .collect()
}

/// One audio tag at 670 kHz carrying a steady tone.
pub fn speech(seed: u64, tone: f64, duration: f64, snr_db: f64) -> Result<Scenario> {
    let d = distance_for(snr_db)?;
    let tags = vec![audio_tag("speech", SPEECH_IDLE, SPEECH_DEVIATION, d)?];
    let scripts = [(
        "speech".to_string(),
        vec![ScriptEvent::AudioTone {
            frequency: tone,
            amplitude_pa: 1.0,
            t_start: 0.0,
            duration,
        }],
    )]
    .into();
    Ok(scenario(
        "speech", seed, AUDIO_RATE, duration, tags, scripts,
    ))
}

/// Eight audio tags on the planner's channels, each with its own tone.
pub fn eight_audio(seed: u64, duration: f64, snr_db: f64) -> Result<Scenario> {
    let d = distance_for(snr_db)?;
    let reqs: Vec<PlanRequest> = (0..8)
        .map(|i| PlanRequest {
            tag_id: format!("mic{}", i + 1),
            kind: TagKind::Audio,
        })
        .collect();
    let plan = plan_channels(&reqs)?;
    let mut tags = Vec::new();
    let mut scripts = BTreeMap::new();
    for (a, tone) in plan.assignments.iter().zip(MULTI_AUDIO_TONES) {
        tags.push(audio_tag(&a.tag_id, a.center, MULTI_AUDIO_DEVIATION, d)?);
        scripts.insert(
            a.tag_id.clone(),
            vec![ScriptEvent::AudioTone {
                frequency: tone,
                amplitude_pa: 1.0,
                t_start: 0.0,
                duration,
            }],
        );
    }
    Ok(scenario(
        "8-audio-tags",
        seed,
        AUDIO_RATE,
        duration,
        tags,
        scripts,
    ))
}

/// Plain tags at each distance anchor plus mid-range points.
pub fn range_sweep(seed: u64, duration: f64) -> Result<Scenario> {
    let points = [
        (3.0, 150e3),
        (9.0, 300e3),
        (16.2, 450e3),
        (30.0, 600e3),
        (49.0, 750e3),
    ];
    let tags = points
        .iter()
        .map(|(d, f)| plain_tag(&format!("r{}ft", d), *f, *d))
        .collect::<Result<Vec<_>>>()?;
    Ok(scenario(
        "range-sweep",
        seed,
        DISCRETE_RATE,
        duration,
        tags,
        BTreeMap::new(),
    ))
}

/// The bundled demo scenarios by name.
pub fn bundled(name: &str) -> Result<Scenario> {
    match name {
        "pong" => pong(1, 60.0, 40, 30.0),
        "menu" => menu(
            2,
            &[vec![1, 2, 3], vec![3, 1], vec![2, 2, 1], vec![3, 3, 2, 1]],
            30.0,
        ),
        "dimmer" => dimmer(
            3,
            &[
                (SwipeDirection::Right, 0.9),
                (SwipeDirection::Left, 1.2),
                (SwipeDirection::Right, 0.4),
                (SwipeDirection::Left, 1.8),
            ],
            30.0,
        ),
        "speech" => speech(4, 1e3, 2.0, 45.0),
        "8-audio-tags" => eight_audio(5, 1.0, 38.0),
        "range-sweep" => range_sweep(6, 1.0),
        _ => Err(Error::invalid(format!("no bundled scenario '{name}'"))),
    }
}

pub const BUNDLED: [&str; 6] = [
    "pong",
    "menu",
    "dimmer",
    "speech",
    "8-audio-tags",
    "range-sweep",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tag::{event_frequency, idle_frequency, SensorState};

    #[test]
    fn bundled_scenarios_prepare() {
        for name in BUNDLED {
            let sc = bundled(name).unwrap();
            sc.prepare().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn calibrated_landmarks() {
        let t = button_tag("p", 289e3, 303e3, 314e3, 10.0).unwrap();
        let f = |s| event_frequency(&t.config, s).unwrap();
        assert!((f(SensorState::Rest) - 289e3).abs() < 1.0);
        assert!((f(SensorState::Pressed(Button::Up)) - 303e3).abs() < 1.0);
        assert!((f(SensorState::Pressed(Button::Down)) - 314e3).abs() < 1.0);
        let m = barcode_tag("m", &SWIPE_TEETH, BandMode::Swipe, 10.0).unwrap();
        assert!((idle_frequency(&m.config).unwrap() - MENU_IDLE).abs() < 1.0);
        let tooth = |i| {
            event_frequency(
                &m.config,
                SensorState::Tooth {
                    index: i,
                    jitter: 0.0,
                },
            )
            .unwrap()
        };
        let right: Vec<f64> = RIGHT_SWIPE.iter().map(|i| tooth(*i)).collect();
        assert!(right.windows(2).all(|w| w[1] > w[0]));
        assert!((right[0] - 326e3).abs() < 1.0);
    }

    #[test]
    fn random_workloads_are_seeded() {
        assert_eq!(random_reads(9, 5), random_reads(9, 5));
        let s = random_swipes(1, 10, 10);
        assert_eq!(
            s.iter().filter(|x| x.0 == SwipeDirection::Right).count(),
            10
        );
        assert!(s.iter().all(|x| (0.3..=2.0).contains(&x.1)));
    }

    #[test]
    fn pong_press_count() {
        let sc = pong(1, 60.0, 40, 30.0).unwrap();
        let presses: usize = sc
            .scripts
            .values()
            .map(|e| {
                e.iter()
                    .filter(|x| matches!(x, ScriptEvent::ButtonPress { .. }))
                    .count()
            })
            .sum();
        assert_eq!(presses, 40);
    }
}
