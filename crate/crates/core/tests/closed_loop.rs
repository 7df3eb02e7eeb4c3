//! simulate → decode over every bundled scenario must reproduce the ground
//! truth: same kinds, labels and order, timestamps within 100 ms.

use fsbs_core::formats::{read_cf32, read_events, write_cf32, write_events};
use fsbs_core::pipeline::{
    compare_events, decode_all, manifest, manifest_truth, simulate, MATCH_TOLERANCE,
};
use fsbs_core::presets;

fn closed_loop(name: &str) {
    let prepared = presets::bundled(name).unwrap().prepare().unwrap();
    let sim = simulate(&prepared, None).unwrap();

    // Through the files, as the CLI does.
    let dir = tempfile::tempdir().unwrap();
    let iq_path = dir.path().join("capture.cf32");
    write_cf32(&iq_path, &sim.iq, &manifest(&prepared, &sim).unwrap()).unwrap();
    let (iq, side) = read_cf32(&iq_path).unwrap();
    assert_eq!(iq.samples.len(), sim.iq.samples.len());
    let truth = manifest_truth(&side).unwrap();
    assert_eq!(truth, sim.truth);

    let out = decode_all(&iq, &sim.bands).unwrap();
    let ev_path = dir.path().join("events.tsv");
    write_events(&ev_path, &out.events).unwrap();
    let decoded = read_events(&ev_path).unwrap();

    let m = compare_events(&truth, &decoded, MATCH_TOLERANCE);
    assert!(
        m.exact(),
        "{name}: missed {:?}, spurious {:?}",
        m.missed,
        m.spurious
    );
    assert_eq!(decoded.len(), truth.len());
    for (t, d) in truth.iter().zip(&decoded) {
        assert_eq!(
            (&t.tag_id, &t.kind),
            (&d.tag_id, &d.kind),
            "{name}: order differs"
        );
    }
}

#[test]
fn pong() {
    closed_loop("pong");
}

#[test]
fn menu() {
    closed_loop("menu");
}

#[test]
fn dimmer() {
    closed_loop("dimmer");
}

#[test]
fn speech() {
    closed_loop("speech");
}

#[test]
fn eight_audio_tags() {
    closed_loop("8-audio-tags");
}

#[test]
fn range_sweep() {
    closed_loop("range-sweep");
}
