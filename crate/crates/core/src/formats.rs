//! On-disk formats: cf32 IQ with a JSON sidecar, 16-bit WAV, the tab-separated
//! event log and spectrogram CSV.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::IqBuffer;
use crate::decode::{ChannelPlan, DecodedEvent, EventKind, PlanRequest, TagBandSpec};
use crate::dsp::Spectrogram;
use crate::error::{Error, Result};

pub const CF32: &str = "cf32";
pub const EVENT_HEADER: &str = "timestamp\ttag_id\tkind\tpayload\tconfidence";
/// WAV peak level, dBFS.
pub const WAV_PEAK_DBFS: f64 = -3.0;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// `capture.cf32` → `capture.cf32.json`.
pub fn sidecar_path(iq_path: &Path) -> PathBuf {
    let mut s = iq_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Sidecar manifest. Anything beyond the required fields (ground truth,
/// seed, band specs) rides in `extra`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqSidecar {
    pub format: String,
    pub sample_rate: f64,
    pub samples: usize,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl IqSidecar {
    pub fn for_buffer(iq: &IqBuffer) -> Self {
        IqSidecar {
            format: CF32.to_string(),
            sample_rate: iq.sample_rate,
            samples: iq.len(),
            extra: Default::default(),
        }
    }
}

pub fn encode_cf32(samples: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 8);
    for s in samples {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_cf32(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Format(format!(
            "cf32 payload of {} bytes is not a whole number of I/Q pairs",
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(8)
        .enumerate()
        .map(|(i, c)| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::Format(format!("non-finite sample at index {i}")));
            }
            Ok(Complex64::new(re as f64, im as f64))
        })
        .collect()
}

/// Writes samples to `path` and the sidecar next to it.
pub fn write_cf32(path: &Path, iq: &IqBuffer, sidecar: &IqSidecar) -> Result<()> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, f);
    for chunk in iq.samples.chunks(1 << 16) {
        w.write_all(&encode_cf32(chunk))
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    let mut meta = sidecar.clone();
    meta.format = CF32.to_string();
    meta.sample_rate = iq.sample_rate;
    meta.samples = iq.len();
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&side, text + "\n").map_err(|e| io_err(&side, e))
}

pub fn read_sidecar(iq_path: &Path) -> Result<IqSidecar> {
    let side = sidecar_path(iq_path);
    let text = std::fs::read_to_string(&side).map_err(|e| io_err(&side, e))?;
    let meta: IqSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", side.display())))?;
    if meta.format != CF32 {
        return Err(Error::Format(format!(
            "{}: format '{}' is not {CF32}",
            side.display(),
            meta.format
        )));
    }
    if !(meta.sample_rate > 0.0) || !meta.sample_rate.is_finite() {
        return Err(Error::Format(format!(
            "{}: bad sample rate",
            side.display()
        )));
    }
    Ok(meta)
}

pub fn read_cf32(path: &Path) -> Result<(IqBuffer, IqSidecar)> {
    let meta = read_sidecar(path)?;
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    let samples = decode_cf32(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if samples.len() != meta.samples {
        return Err(Error::Format(format!(
            "{}: {} samples on disk, sidecar says {}",
            path.display(),
            samples.len(),
            meta.samples
        )));
    }
    Ok((IqBuffer::new(meta.sample_rate, samples), meta))
}

// ---------------------------------------------------------------------------

/// Scales to −3 dBFS peak and quantizes. Silence stays silent.
pub fn wav_pcm(samples: &[f64]) -> Vec<i16> {
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gain = if peak > 0.0 {
        10f64.powf(WAV_PEAK_DBFS / 20.0) * i16::MAX as f64 / peak
    } else {
        0.0
    };
    samples
        .iter()
        .map(|x| (x * gain).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16)
        .collect()
}

fn wav_spec(rate: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels: 1,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

/// 16-bit mono PCM, peak-normalized.
pub fn write_wav(path: &Path, samples: &[f64], rate: f64) -> Result<()> {
    write_wav_pcm(path, &wav_pcm(samples), rate)
}

pub fn write_wav_pcm(path: &Path, pcm: &[i16], rate: f64) -> Result<()> {
    if rate.fract() != 0.0 || !(rate > 0.0) || rate > u32::MAX as f64 {
        return Err(Error::invalid(format!(
            "WAV rate {rate} must be a positive integer"
        )));
    }
    let wav = |e: hound::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut w = hound::WavWriter::create(path, wav_spec(rate as u32)).map_err(wav)?;
    for s in pcm {
        w.write_sample(*s).map_err(wav)?;
    }
    w.finalize().map_err(wav)
}

/// Raw PCM and rate.
pub fn read_wav(path: &Path) -> Result<(Vec<i16>, f64)> {
    let fmt = |e: hound::Error| Error::Format(format!("{}: {e}", path.display()));
    let r = hound::WavReader::open(path).map_err(fmt)?;
    let spec = r.spec();
    if spec.channels != 1
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
    {
        return Err(Error::Format(format!(
            "{}: expected 16-bit mono PCM",
            path.display()
        )));
    }
    let rate = spec.sample_rate as f64;
    let pcm = r
        .into_samples::<i16>()
        .collect::<std::result::Result<_, _>>()
        .map_err(fmt)?;
    Ok((pcm, rate))
}

// ---------------------------------------------------------------------------

pub fn format_events(events: &[DecodedEvent]) -> String {
    let mut s = String::from(EVENT_HEADER);
    s.push('\n');
    for e in events {
        s.push_str(&e.to_string());
        s.push('\n');
    }
    s
}

pub fn parse_events(text: &str) -> Result<Vec<DecodedEvent>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() || (n == 0 && line == EVENT_HEADER) {
            continue;
        }
        let bad = |m: &str| Error::Format(format!("event log line {}: {m}", n + 1));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(&format!("expected 5 fields, found {}", f.len())));
        }
        let timestamp: f64 = f[0].parse().map_err(|_| bad("bad timestamp"))?;
        let confidence: f64 = f[4].parse().map_err(|_| bad("bad confidence"))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(bad("confidence outside [0, 1]"));
        }
        out.push(DecodedEvent {
            tag_id: f[1].to_string(),
            timestamp,
            kind: EventKind::parse(f[2], f[3]).map_err(|e| bad(&e.to_string()))?,
            confidence,
        });
    }
    Ok(out)
}

pub fn write_events(path: &Path, events: &[DecodedEvent]) -> Result<()> {
    std::fs::write(path, format_events(events)).map_err(|e| io_err(path, e))
}

pub fn read_events(path: &Path) -> Result<Vec<DecodedEvent>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_events(&text)
}

// ---------------------------------------------------------------------------

/// Header `t_seconds,f_<hz>,...`, one row per frame, dB to 2 decimals.
pub fn write_spectrogram_csv<W: Write>(out: W, spec: &Spectrogram) -> Result<()> {
    let mut w = BufWriter::new(out);
    let io = |e: std::io::Error| Error::Io(e.to_string());
    write!(w, "t_seconds").map_err(io)?;
    for k in 0..spec.nfft {
        write!(w, ",f_{}", spec.bin_frequency(k)).map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (i, row) in spec.magnitudes.iter().enumerate() {
        write!(w, "{:.6}", spec.frame_time(i)).map_err(io)?;
        for v in row {
            write!(w, ",{v:.2}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Parsed spectrogram CSV: bin frequencies, frame times, dB rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramTable {
    pub frequencies: Vec<f64>,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_spectrogram_csv<R: Read>(input: R) -> Result<SpectrogramTable> {
    let mut lines = BufReader::new(input).lines();
    let fmt = |m: String| Error::Format(format!("spectrogram CSV: {m}"));
    let header = lines
        .next()
        .ok_or_else(|| fmt("empty file".into()))?
        .map_err(|e| Error::Io(e.to_string()))?;
    let mut cols = header.split(',');
    if cols.next() != Some("t_seconds") {
        return Err(fmt("first column must be t_seconds".into()));
    }
    let frequencies = cols
        .map(|c| {
            c.strip_prefix("f_")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| fmt(format!("bad column '{c}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mut times, mut rows) = (Vec::new(), Vec::new());
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Io(e.to_string()))?;
        let vals = line
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| fmt(format!("row {}: bad value '{v}'", n + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != frequencies.len() + 1 {
            return Err(fmt(format!("row {} has {} columns", n + 1, vals.len())));
        }
        times.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    Ok(SpectrogramTable {
        frequencies,
        times,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Band specs, plan requests, plans

#[derive(Deserialize)]
struct Wrapped<T> {
    #[serde(alias = "requests")]
    bands: Vec<T>,
}

/// A bare JSON list, or an object carrying the list under `key`.
fn parse_list<T: serde::de::DeserializeOwned>(
    text: &str,
    origin: &str,
    what: &str,
) -> Result<Vec<T>> {
    let located = |e: serde_json::Error| {
        Error::validation(
            format!("{origin}:{}:{}", e.line(), e.column()),
            format!("{what}: {e}"),
        )
    };
    if text.trim_start().starts_with('[') {
        serde_json::from_str(text).map_err(located)
    } else {
        serde_json::from_str::<Wrapped<T>>(text)
            .map(|w| w.bands)
            .map_err(located)
    }
}

/// Accepts a bare list of band specs or any object with a `bands` field,
/// which includes a simulation manifest.
pub fn parse_bands(text: &str, origin: &str) -> Result<Vec<TagBandSpec>> {
    let bands: Vec<TagBandSpec> = parse_list(text, origin, "invalid band spec")?;
    for (i, b) in bands.iter().enumerate() {
        b.validate()
            .map_err(|e| Error::validation(format!("{origin}: bands[{i}]"), e.to_string()))?;
    }
    Ok(bands)
}

pub fn read_bands(path: &Path) -> Result<Vec<TagBandSpec>> {
    parse_bands(&std::fs::read_to_string(path)?, &path.display().to_string())
}

pub fn write_bands(path: &Path, bands: &[TagBandSpec]) -> Result<()> {
    let text = serde_json::to_string_pretty(bands).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_plan_requests(path: &Path) -> Result<Vec<PlanRequest>> {
    let text = std::fs::read_to_string(path)?;
    parse_list(&text, &path.display().to_string(), "invalid plan request")
}

pub fn write_plan(path: &Path, plan: &ChannelPlan) -> Result<()> {
    let text = serde_json::to_string_pretty(plan).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_plan(path: &Path) -> Result<ChannelPlan> {
    serde_json::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::SwipeDirection;
    use proptest::prelude::*;

    #[test]
    fn cf32_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.cf32");
        let iq = IqBuffer::new(
            1e6,
            (0..1000)
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos() * 0.3))
                .collect(),
        );
        let mut side = IqSidecar::for_buffer(&iq);
        side.extra.insert("seed".into(), 7.into());
        write_cf32(&p, &iq, &side).unwrap();
        let first = std::fs::read(&p).unwrap();
        let (back, meta) = read_cf32(&p).unwrap();
        assert_eq!(meta, side);
        write_cf32(&p, &back, &meta).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), first);
        for (a, b) in iq.samples.iter().zip(&back.samples) {
            assert_eq!(a.re as f32 as f64, b.re);
        }
    }

    #[test]
    fn cf32_rejects_malformed() {
        assert!(matches!(decode_cf32(&[0u8; 12]), Err(Error::Format(_))));
        let mut b = encode_cf32(&[Complex64::new(1.0, 0.0)]);
        b[4..8].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_cf32(&b), Err(Error::Format(_))));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("missing.cf32");
        std::fs::write(&p, [0u8; 8]).unwrap();
        assert!(matches!(read_cf32(&p), Err(Error::Io(_))));
    }

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let x: Vec<f64> = (0..4800)
            .map(|i| (i as f64 * 0.1309).sin() * 0.01)
            .collect();
        write_wav(&p, &x, 48e3).unwrap();
        let (pcm, rate) = read_wav(&p).unwrap();
        assert_eq!(rate, 48e3);
        assert_eq!(pcm, wav_pcm(&x));
        let peak = pcm.iter().map(|s| s.unsigned_abs()).max().unwrap() as f64;
        assert!((20.0 * (peak / i16::MAX as f64).log10() + 3.0).abs() < 0.01);
        let bytes = std::fs::read(&p).unwrap();
        write_wav_pcm(&p, &pcm, rate).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), bytes);
        assert!(wav_pcm(&[0.0; 4]).iter().all(|s| *s == 0));
    }

    #[test]
    fn event_log_round_trip() {
        let ev = vec![
            DecodedEvent {
                tag_id: "p1".into(),
                timestamp: 1.25,
                kind: EventKind::TouchPress("up".into()),
                confidence: 0.8,
            },
            DecodedEvent {
                tag_id: "menu".into(),
                timestamp: 3.0,
                kind: EventKind::IdRead(vec![3, 1]),
                confidence: 1.0,
            },
            DecodedEvent {
                tag_id: "dim".into(),
                timestamp: 4.5,
                kind: EventKind::Swipe(SwipeDirection::Right),
                confidence: 0.5,
            },
        ];
        let text = format_events(&ev);
        assert_eq!(parse_events(&text).unwrap(), ev);
        assert_eq!(format_events(&parse_events(&text).unwrap()), text);
        assert!(parse_events("1.0\tx\tswipe\tright\n").is_err());
        assert!(parse_events("1.0\tx\tswipe\tright\t2.0\n").is_err());
        assert_eq!(format_events(&[]), format!("{EVENT_HEADER}\n"));
    }

    #[test]
    fn spectrogram_csv_round_trip() {
        let iq = IqBuffer::new(
            1e3,
            (0..256)
                .map(|i| Complex64::from_polar(1.0, i as f64 * 0.5))
                .collect(),
        );
        let s = crate::dsp::spectrogram(&iq, 32, 16, crate::dsp::Window::Hann).unwrap();
        let mut buf = Vec::new();
        write_spectrogram_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_seconds,f_-500,"));
        let t = read_spectrogram_csv(&buf[..]).unwrap();
        assert_eq!(t.rows.len(), s.frames());
        assert_eq!(t.frequencies.len(), 32);
        for (r, m) in t.rows.iter().zip(&s.magnitudes) {
            for (a, b) in r.iter().zip(m) {
                assert!((a - b).abs() <= 0.005 + 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn cf32_codec_idempotent(v in proptest::collection::vec((-1e3f32..1e3, -1e3f32..1e3), 0..200)) {
            let s: Vec<Complex64> = v.iter().map(|(a, b)| Complex64::new(*a as f64, *b as f64)).collect();
            let bytes = encode_cf32(&s);
            prop_assert_eq!(decode_cf32(&bytes).unwrap(), s);
        }

        #[test]
        fn event_timestamps_survive(ts in proptest::collection::vec(0.0f64..1e4, 0..20)) {
            let ev: Vec<DecodedEvent> = ts.iter().map(|t| DecodedEvent {
                tag_id: "t".into(),
                timestamp: (t * 1e6).round() / 1e6,
                kind: EventKind::Swipe(SwipeDirection::Left),
                confidence: 1.0,
            }).collect();
            let text = format_events(&ev);
            prop_assert_eq!(format_events(&parse_events(&text).unwrap()), text);
        }
    }

    #[test]
    fn bands_accept_list_wrapper_and_units() {
        let list = r#"[{"tag_id": "a", "mode": "touch", "center": "289kHz",
            "landmarks": {"idle": 289000, "up": 303000, "down": 314000}}]"#;
        let b = parse_bands(list, "x.json").unwrap();
        assert_eq!(b[0].center, 289e3);
        let wrapped = format!(r#"{{"format": "cf32", "bands": {list}}}"#);
        assert_eq!(parse_bands(&wrapped, "m.json").unwrap(), b);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bands.json");
        write_bands(&p, &b).unwrap();
        assert_eq!(read_bands(&p).unwrap(), b);
    }

    #[test]
    fn bad_bands_are_located() {
        let err = parse_bands("[{\"tag_id\": 3}]", "b.json").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("b.json:1:"), "{err}");
    }

    #[test]
    fn plan_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let req = dir.path().join("req.json");
        std::fs::write(&req, r#"{"requests": [{"tag_id": "s", "kind": "audio"}, {"tag_id": "b", "kind": "discrete"}]}"#).unwrap();
        let plan = crate::decode::plan_channels(&read_plan_requests(&req).unwrap()).unwrap();
        let out = dir.path().join("plan.json");
        write_plan(&out, &plan).unwrap();
        assert_eq!(read_plan(&out).unwrap(), plan);
    }
}
