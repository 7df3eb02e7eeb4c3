use std::fs;
use std::path::Path;

use fsbs_core::acceptance;
use fsbs_core::circuit::{reduce_tank, Topology};
use fsbs_core::decode::{plan_channels, DecodedEvent, TagBandSpec};
use fsbs_core::error::{Error, Result};
use fsbs_core::formats::{
    self, read_bands, read_cf32, read_plan_requests, write_bands, write_cf32, write_events,
    write_plan, write_spectrogram_csv, write_wav,
};
use fsbs_core::pipeline::{
    self, compare_events, decode_all, manifest, manifest_truth, FreeComponent, MATCH_TOLERANCE,
};
use fsbs_core::presets;
use fsbs_core::scenario::{PreparedScenario, Scenario};
use fsbs_core::tables::{check_bundled, mco_table, nearest_mco_row};
use fsbs_core::units::parse_quantity;
use serde_json::json;

use crate::{
    AcceptanceArgs, DecodeArgs, FreeArg, PlanArgs, RunArgs, ScenarioSource, ScenariosArgs,
    SimulateArgs, TopologyArg, TuneArgs,
};

fn load(src: &ScenarioSource) -> Result<PreparedScenario> {
    match (&src.scenario, &src.bundled) {
        (Some(path), _) => Ok(Scenario::load(path)?.1),
        (None, Some(name)) => presets::bundled(name)?.prepare(),
        (None, None) => Err(Error::invalid("either --scenario or --bundled is required")),
    }
}

fn simulate_to(
    prepared: &PreparedScenario,
    seed: Option<u64>,
    out: &Path,
) -> Result<pipeline::Simulation> {
    let sim = pipeline::simulate(prepared, seed)?;
    write_cf32(out, &sim.iq, &manifest(prepared, &sim)?)?;
    eprintln!(
        "{}: {:.3} s at {:.0} kHz, seed {}, {} tags, {} ground-truth events -> {}",
        prepared.name,
        sim.iq.duration(),
        sim.iq.sample_rate / 1e3,
        sim.seed,
        sim.tags.len(),
        sim.truth.len(),
        out.display()
    );
    for t in &sim.tags {
        eprintln!(
            "  {:<12} idle {:>9.3} kHz  {:>5.1} ft  {:>5.1} dB",
            t.tag_id,
            t.idle_frequency / 1e3,
            t.distance,
            t.snr_db
        );
    }
    Ok(sim)
}

pub fn simulate(a: &SimulateArgs) -> Result<u8> {
    let prepared = load(&a.source)?;
    let sim = simulate_to(&prepared, a.source.seed, &a.out)?;
    if let Some(p) = &a.bands_out {
        write_bands(p, &sim.bands)?;
    }
    Ok(0)
}

fn decode_to(
    iq_path: &Path,
    bands: &[TagBandSpec],
    events: &Path,
    wav_dir: Option<&Path>,
    spectrogram: Option<&Path>,
) -> Result<Vec<DecodedEvent>> {
    let (iq, _) = read_cf32(iq_path)?;
    let out = decode_all(&iq, bands)?;
    write_events(events, &out.events)?;
    if let Some(dir) = wav_dir {
        fs::create_dir_all(dir)?;
        for (tag, a) in &out.audio {
            write_wav(&dir.join(format!("{tag}.wav")), &a.samples, a.sample_rate)?;
        }
    }
    if let Some(p) = spectrogram {
        let spec = pipeline::overview_spectrogram(&iq)?;
        write_spectrogram_csv(fs::File::create(p)?, &spec)?;
    }
    eprintln!(
        "decoded {} events from {} bands -> {}",
        out.events.len(),
        bands.len(),
        events.display()
    );
    Ok(out.events)
}

pub fn decode(a: &DecodeArgs) -> Result<u8> {
    let bands = read_bands(&a.bands)?;
    decode_to(
        &a.iq,
        &bands,
        &a.events,
        a.wav_dir.as_deref(),
        a.spectrogram.as_deref(),
    )?;
    Ok(0)
}

pub fn run(a: &RunArgs) -> Result<u8> {
    let prepared = load(&a.source)?;
    fs::create_dir_all(&a.out_dir)?;
    let iq_path = a.out_dir.join("capture.cf32");
    let sim = simulate_to(&prepared, a.source.seed, &iq_path)?;
    let bands = sim.bands.clone();
    let truth = manifest_truth(&formats::read_sidecar(&iq_path)?)?;
    drop(sim);
    write_bands(&a.out_dir.join("bands.json"), &bands)?;
    let decoded = decode_to(
        &iq_path,
        &bands,
        &a.out_dir.join("events.tsv"),
        Some(&a.out_dir),
        None,
    )?;
    let m = compare_events(&truth, &decoded, MATCH_TOLERANCE);
    println!(
        "{}: {} matched, {} missed, {} spurious",
        prepared.name,
        m.matched.len(),
        m.missed.len(),
        m.spurious.len()
    );
    for e in &m.missed {
        println!("  missed   {e}");
    }
    for e in &m.spurious {
        println!("  spurious {e}");
    }
    Ok(if a.strict && !m.exact() { 1 } else { 0 })
}

pub fn plan(a: &PlanArgs) -> Result<u8> {
    let plan = plan_channels(&read_plan_requests(&a.requests)?)?;
    plan.validate()?;
    write_plan(&a.out, &plan)?;
    for x in &plan.assignments {
        println!(
            "{:<16} {:?}\t{:>8.1} kHz ± {:.1} kHz",
            x.tag_id,
            x.kind,
            x.center / 1e3,
            x.bandwidth / 2e3
        );
    }
    Ok(0)
}

pub fn tune(a: &TuneArgs) -> Result<u8> {
    let target = parse_quantity(&a.target, "Hz")?;
    let row = match a.row {
        Some(k) => mco_table()
            .into_iter()
            .find(|r| r.nominal_khz == k)
            .ok_or_else(|| Error::invalid(format!("no Table 2 row {k}")))?,
        None => nearest_mco_row(target),
    };
    let mut base = row.design();
    base.l1 = parse_quantity(&a.l1, "H")?;
    let farad = |v: &Option<String>| v.as_deref().map(|s| parse_quantity(s, "F")).transpose();
    if let Some(v) =
        a.l2.as_deref()
            .map(|s| parse_quantity(s, "H"))
            .transpose()?
    {
        base.l2 = v;
    }
    if let Some(v) = farad(&a.c1)? {
        base.c1 = v;
    }
    if let Some(v) = farad(&a.c2)? {
        base.c2 = v;
    }
    if let Some(v) = farad(&a.c_blocking)? {
        base.c_blocking = v;
    }
    if let Some(v) = farad(&a.c_jfet)? {
        base.c_jfet = v;
    }
    match a.topology {
        TopologyArg::Mco => {
            if let Some(v) = farad(&a.c_shift)? {
                base.c_shift = Some(v);
            }
        }
        TopologyArg::Esco => {
            if a.c_shift.is_some() {
                return Err(Error::invalid("--c-shift applies to MCO designs only"));
            }
            base.topology = Topology::EscoDrain;
            base.c_shift = None;
            base.r_adjust = None;
        }
    }
    let free = match (a.free, a.topology) {
        (Some(FreeArg::C1), _) => FreeComponent::C1,
        (Some(FreeArg::C2), _) => FreeComponent::C2,
        (Some(FreeArg::CBlocking), _) => FreeComponent::CBlocking,
        (Some(FreeArg::CShift), _) => FreeComponent::CShift,
        (Some(FreeArg::CJfet), _) | (None, TopologyArg::Esco) => FreeComponent::CJfet,
        (None, TopologyArg::Mco) => FreeComponent::CShift,
    };
    let r = pipeline::tune(&base, target, free)?;
    let check = reduce_tank(&r.design)?.f_resonant;
    let doc = json!({
        "design": r.design,
        "target_hz": r.target,
        "achieved_hz": check,
        "relative_error": (check - target) / target,
        "free": free,
        "changed": r.changed,
        "nearest_table2_row": {
            "nominal_khz": r.nearest_row.nominal_khz,
            "f_measured_hz": r.nearest_row.f_measured,
            "design": r.nearest_row.design(),
        },
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))? + "\n";
    match &a.out {
        Some(p) => {
            fs::write(p, &text)?;
            eprintln!(
                "{:.3} kHz with {free:?} = {:.4e} F -> {}",
                check / 1e3,
                free_value(&r.design, free),
                p.display()
            );
        }
        None => print!("{text}"),
    }
    Ok(0)
}

fn free_value(d: &fsbs_core::circuit::OscillatorDesign, free: FreeComponent) -> f64 {
    match free {
        FreeComponent::C1 => d.c1,
        FreeComponent::C2 => d.c2,
        FreeComponent::CBlocking => d.c_blocking,
        FreeComponent::CShift => d.c_shift.unwrap_or(f64::NAN),
        FreeComponent::CJfet => d.c_jfet,
    }
}

pub fn table_check() -> Result<u8> {
    let report = check_bundled();
    println!("{report}");
    Ok(if report.passed() { 0 } else { 1 })
}

pub fn acceptance(a: &AcceptanceArgs) -> Result<u8> {
    let ids: Vec<u8> = if a.only.is_empty() {
        (1..=10).collect()
    } else {
        a.only.clone()
    };
    let mut failed = 0;
    for id in ids {
        let r = acceptance::run(id);
        println!("{r}");
        failed += usize::from(!r.passed);
    }
    Ok(if failed == 0 { 0 } else { 1 })
}

pub fn scenarios(a: &ScenariosArgs) -> Result<u8> {
    fs::create_dir_all(&a.out_dir)?;
    for name in presets::BUNDLED {
        let sc = presets::bundled(name)?;
        let path = a.out_dir.join(format!("{name}.json"));
        fs::write(&path, sc.to_json()? + "\n")?;
        let bands = sc.prepare()?.band_specs()?;
        write_bands(&a.out_dir.join(format!("{name}.bands.json")), &bands)?;
        println!("{}", path.display());
    }
    Ok(0)
}
