//! Python bindings. Frequencies in Hz, times in seconds, components in SI.

use std::path::PathBuf;

use fsbs_core::acceptance;
use fsbs_core::channel::IqBuffer;
use fsbs_core::circuit::{self, OscillatorDesign};
use fsbs_core::decode::{self, DecodedEvent, PlanRequest, TagBandSpec, TagKind};
use fsbs_core::error::Error;
use fsbs_core::formats;
use fsbs_core::pipeline::{self, FreeComponent};
use fsbs_core::presets;
use fsbs_core::scenario::{PreparedScenario, Scenario as CoreScenario};
use fsbs_core::tables::{self, RowStatus};
use fsbs_core::units;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(fsbs, FsbsError, PyException, "Any fsbs-core error.");

fn err(e: Error) -> PyErr {
    FsbsError::new_err(e.to_string())
}

fn json_err(e: serde_json::Error) -> PyErr {
    FsbsError::new_err(e.to_string())
}

#[pyfunction]
fn resonant_frequency(l: f64, c: f64) -> PyResult<f64> {
    circuit::resonant_frequency(l, c).map_err(err)
}

#[pyfunction]
fn required_capacitance(f: f64, l: f64) -> PyResult<f64> {
    circuit::required_capacitance(f, l).map_err(err)
}

/// `parse_quantity("4.7mH", "H") == 0.0047`
#[pyfunction]
fn parse_quantity(text: &str, unit: &str) -> PyResult<f64> {
    units::parse_quantity(text, unit).map_err(err)
}

#[pyclass(module = "fsbs", from_py_object)]
#[derive(Clone)]
struct Design {
    inner: OscillatorDesign,
}

#[pymethods]
impl Design {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Design {
            inner: serde_json::from_str(text).map_err(json_err)?,
        })
    }

    /// Components of a Table 2 row, by nominal kHz.
    #[staticmethod]
    fn table2_row(nominal_khz: u32) -> PyResult<Self> {
        tables::mco_table()
            .into_iter()
            .find(|r| r.nominal_khz == nominal_khz)
            .map(|r| Design { inner: r.design() })
            .ok_or_else(|| FsbsError::new_err(format!("no Table 2 row {nominal_khz}")))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    fn frequency(&self) -> PyResult<f64> {
        Ok(circuit::reduce_tank(&self.inner).map_err(err)?.f_resonant)
    }

    /// Solves for one capacitor (`"c1"`, `"c2"`, `"c_blocking"`, `"c_shift"`,
    /// `"c_jfet"`) and returns the new design.
    fn tune(&self, target: f64, free: &str) -> PyResult<Design> {
        let free: FreeComponent = serde_json::from_value(serde_json::Value::String(free.into()))
            .map_err(|_| FsbsError::new_err(format!("unknown component '{free}'")))?;
        let r = pipeline::tune(&self.inner, target, free).map_err(err)?;
        Ok(Design { inner: r.design })
    }

    #[getter]
    fn l1(&self) -> f64 {
        self.inner.l1
    }

    #[getter]
    fn c1(&self) -> f64 {
        self.inner.c1
    }

    #[getter]
    fn c2(&self) -> f64 {
        self.inner.c2
    }

    #[getter]
    fn c_jfet(&self) -> f64 {
        self.inner.c_jfet
    }

    #[getter]
    fn c_shift(&self) -> Option<f64> {
        self.inner.c_shift
    }

    fn __repr__(&self) -> String {
        format!(
            "Design({:?}, l1={:.4e}, c1={:.4e}, c2={:.4e})",
            self.inner.topology, self.inner.l1, self.inner.c1, self.inner.c2
        )
    }
}

#[pyclass(module = "fsbs", frozen, from_py_object)]
#[derive(Clone)]
struct Event {
    inner: DecodedEvent,
}

#[pymethods]
impl Event {
    #[getter]
    fn tag_id(&self) -> &str {
        &self.inner.tag_id
    }

    #[getter]
    fn timestamp(&self) -> f64 {
        self.inner.timestamp
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.name()
    }

    #[getter]
    fn payload(&self) -> String {
        self.inner.kind.payload()
    }

    #[getter]
    fn confidence(&self) -> f64 {
        self.inner.confidence
    }

    fn __repr__(&self) -> String {
        format!(
            "Event({:.3}s {} {} {:?})",
            self.inner.timestamp,
            self.inner.tag_id,
            self.inner.kind.name(),
            self.inner.kind.payload()
        )
    }
}

fn events(list: Vec<DecodedEvent>) -> Vec<Event> {
    list.into_iter().map(|inner| Event { inner }).collect()
}

#[pyclass(module = "fsbs")]
struct Scenario {
    raw: CoreScenario,
    prepared: PreparedScenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (raw, prepared) = CoreScenario::load(&path).map_err(err)?;
        Ok(Scenario { raw, prepared })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let raw = CoreScenario::from_json(text, "<string>").map_err(err)?;
        let prepared = raw.prepare().map_err(err)?;
        Ok(Scenario { raw, prepared })
    }

    /// One of `bundled_names()`.
    #[staticmethod]
    fn bundled(name: &str) -> PyResult<Self> {
        let raw = presets::bundled(name).map_err(err)?;
        let prepared = raw.prepare().map_err(err)?;
        Ok(Scenario { raw, prepared })
    }

    fn to_json(&self) -> PyResult<String> {
        self.raw.to_json().map_err(err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.prepared.name
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.prepared.seed
    }

    #[getter]
    fn tag_ids(&self) -> Vec<String> {
        self.prepared
            .tags
            .iter()
            .map(|t| t.tag_id().to_string())
            .collect()
    }

    fn ground_truth(&self) -> PyResult<Vec<Event>> {
        Ok(events(self.prepared.ground_truth().map_err(err)?))
    }

    #[pyo3(signature = (seed=None))]
    fn simulate(&self, py: Python<'_>, seed: Option<u64>) -> PyResult<Capture> {
        let sim = py
            .detach(|| pipeline::simulate(&self.prepared, seed))
            .map_err(err)?;
        let sidecar = pipeline::manifest(&self.prepared, &sim).map_err(err)?;
        Ok(Capture {
            iq: sim.iq,
            sidecar,
            bands: sim.bands,
            truth: sim.truth,
        })
    }
}

/// A cf32 IQ capture with its manifest.
#[pyclass(module = "fsbs")]
struct Capture {
    iq: IqBuffer,
    sidecar: formats::IqSidecar,
    bands: Vec<TagBandSpec>,
    truth: Vec<DecodedEvent>,
}

#[pymethods]
impl Capture {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (iq, sidecar) = formats::read_cf32(&path).map_err(err)?;
        let truth = pipeline::manifest_truth(&sidecar).map_err(err)?;
        let bands = match sidecar.extra.get("bands") {
            Some(v) => serde_json::from_value(v.clone()).map_err(json_err)?,
            None => Vec::new(),
        };
        Ok(Capture {
            iq,
            sidecar,
            bands,
            truth,
        })
    }

    /// Writes `path` (cf32) and `path.json` (manifest).
    fn save(&self, path: PathBuf) -> PyResult<()> {
        formats::write_cf32(&path, &self.iq, &self.sidecar).map_err(err)
    }

    #[getter]
    fn sample_rate(&self) -> f64 {
        self.iq.sample_rate
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.iq.duration()
    }

    fn __len__(&self) -> usize {
        self.iq.len()
    }

    /// Samples `[start, stop)` as Python complex numbers.
    #[pyo3(signature = (start=0, stop=None))]
    fn samples(&self, start: usize, stop: Option<usize>) -> Vec<Complex64> {
        let stop = stop.unwrap_or(self.iq.len()).min(self.iq.len());
        self.iq.samples[start.min(stop)..stop].to_vec()
    }

    /// Interleaved little-endian float32 I/Q.
    fn cf32_bytes(&self) -> Vec<u8> {
        formats::encode_cf32(&self.iq.samples)
    }

    #[getter]
    fn truth(&self) -> Vec<Event> {
        events(self.truth.clone())
    }

    /// Receiver band specs as JSON (the `bands` field of the manifest).
    fn bands_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.bands).map_err(json_err)
    }

    /// Decodes with the manifest bands, or with `bands_json` if given.
    #[pyo3(signature = (bands_json=None))]
    fn decode(&self, py: Python<'_>, bands_json: Option<&str>) -> PyResult<Vec<Event>> {
        let bands = match bands_json {
            Some(text) => formats::parse_bands(text, "<bands>").map_err(err)?,
            None => self.bands.clone(),
        };
        let out = py
            .detach(|| pipeline::decode_all(&self.iq, &bands))
            .map_err(err)?;
        Ok(events(out.events))
    }

    /// Demodulated 48 kHz audio for each audio band, keyed by tag id.
    fn decode_audio(&self, py: Python<'_>) -> PyResult<Vec<(String, Vec<f64>)>> {
        let out = py
            .detach(|| pipeline::decode_all(&self.iq, &self.bands))
            .map_err(err)?;
        Ok(out
            .audio
            .into_iter()
            .map(|(id, a)| (id, a.samples))
            .collect())
    }
}

#[pyfunction]
fn bundled_names() -> Vec<&'static str> {
    presets::BUNDLED.to_vec()
}

/// `requests` is a list of `(tag_id, "audio" | "discrete")`; returns
/// `(tag_id, center_hz, bandwidth_hz)` per tag.
#[pyfunction]
fn plan_channels(requests: Vec<(String, String)>) -> PyResult<Vec<(String, f64, f64)>> {
    let reqs = requests
        .into_iter()
        .map(|(tag_id, kind)| {
            let kind = match kind.as_str() {
                "audio" => TagKind::Audio,
                "discrete" => TagKind::Discrete,
                other => return Err(FsbsError::new_err(format!("unknown tag kind '{other}'"))),
            };
            Ok(PlanRequest { tag_id, kind })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let plan = decode::plan_channels(&reqs).map_err(err)?;
    Ok(plan
        .assignments
        .into_iter()
        .map(|a| (a.tag_id, a.center, a.bandwidth))
        .collect())
}

/// Rows of `(nominal_khz, computed_hz, rel_error, status)`.
#[pyfunction]
fn table_check() -> Vec<(u32, f64, f64, &'static str)> {
    tables::check_bundled()
        .rows
        .into_iter()
        .map(|r| {
            let status = match r.status {
                RowStatus::Pass => "PASS",
                RowStatus::Fail => "FAIL",
                RowStatus::FlaggedAnomalous => "FLAGGED-ANOMALOUS",
            };
            (r.nominal_khz, r.computed, r.rel_error, status)
        })
        .collect()
}

/// Runs acceptance criteria (all when `ids` is None); returns
/// `(id, name, passed, detail)` per criterion.
#[pyfunction]
#[pyo3(signature = (ids=None))]
fn run_acceptance(py: Python<'_>, ids: Option<Vec<u8>>) -> Vec<(u8, String, bool, String)> {
    let ids = ids.unwrap_or_else(|| (1..=10).collect());
    py.detach(|| {
        ids.into_iter()
            .map(acceptance::run)
            .map(|r| (r.id, r.name.to_string(), r.passed, r.detail))
            .collect()
    })
}

#[pymodule]
pub fn fsbs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FsbsError", m.py().get_type::<FsbsError>())?;
    m.add_class::<Design>()?;
    m.add_class::<Event>()?;
    m.add_class::<Scenario>()?;
    m.add_class::<Capture>()?;
    m.add_function(wrap_pyfunction!(resonant_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(required_capacitance, m)?)?;
    m.add_function(wrap_pyfunction!(parse_quantity, m)?)?;
    m.add_function(wrap_pyfunction!(bundled_names, m)?)?;
    m.add_function(wrap_pyfunction!(plan_channels, m)?)?;
    m.add_function(wrap_pyfunction!(table_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_acceptance, m)?)?;
    Ok(())
}
