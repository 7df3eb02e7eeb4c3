"""Smoke test for the fsbs extension module.

Build and run:
    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml
    python python/smoke_test.py
"""

import math
import os
import sys
import tempfile

import fsbs


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        sys.exit(1)


def main():
    f = fsbs.resonant_frequency(24.7e-3, fsbs.required_capacitance(202e3, 24.7e-3))
    check(abs(f - 202e3) / 202e3 < 1e-9, "resonant_frequency inverts required_capacitance")
    check(fsbs.parse_quantity("4.7mH", "H") == 4.7e-3, "SI suffix parsing")

    rows = {r[0]: r for r in fsbs.table_check()}
    check(abs(rows[300][1] - 310.781e3) < 1.0, "table row 300 -> 310.781 kHz")
    check(rows[1000][3] == "FLAGGED-ANOMALOUS", "table row 1000 flagged")

    d = fsbs.Design.table2_row(200)
    check(50e3 < d.frequency() < 1e6, "Table 2 row 200 design resonates in band")
    try:
        d.tune(202e3, "c_shift")
        check(False, "MCO row 200 cannot reach 202 kHz")
    except fsbs.FsbsError as e:
        check("infeasible" in str(e), "infeasible tuning raises FsbsError")

    plan = fsbs.plan_channels([(f"a{i}", "audio") for i in range(8)])
    check([round(c / 1e3) for _, c, _ in plan][-1] == 975, "8 audio tags fit, last at 975 kHz")

    check("menu" in fsbs.bundled_names(), "bundled scenarios listed")
    sc = fsbs.Scenario.bundled("menu")
    cap = sc.simulate()
    check(cap.sample_rate == 1e6 and len(cap) > 0, "menu simulates")
    decoded = cap.decode()
    truth = cap.truth
    check(
        [(e.kind, e.payload) for e in decoded] == [(e.kind, e.payload) for e in truth],
        f"menu closed loop: {[e.payload for e in decoded]}",
    )
    check(all(abs(a.timestamp - b.timestamp) <= 0.1 for a, b in zip(decoded, truth)), "timestamps within 100 ms")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "menu.cf32")
        cap.save(path)
        back = fsbs.Capture.load(path)
        check(back.cf32_bytes() == cap.cf32_bytes(), "cf32 save/load is bit exact")
        check(os.path.getsize(path) == 8 * len(cap), "cf32 is 8 bytes per sample")

    audio = dict(fsbs.Scenario.bundled("speech").simulate().decode_audio())
    x = audio["speech"][4800:-4800]
    # Dominant tone near 1 kHz: compare 1 kHz power against 1.5 kHz.
    def power(f):
        re = sum(v * math.cos(2 * math.pi * f * n / 48e3) for n, v in enumerate(x))
        im = sum(v * math.sin(2 * math.pi * f * n / 48e3) for n, v in enumerate(x))
        return re * re + im * im
    check(power(1e3) > 100 * power(1.5e3), "speech decodes to a 1 kHz tone")

    results = fsbs.run_acceptance([1, 2, 9, 10])
    for r in results:
        print("    ", "PASS" if r[2] else "FAIL", r[0], r[1], "-", r[3])
    check(all(r[2] for r in results), "fast acceptance criteria")

    try:
        fsbs.Scenario.from_json('{"name": "x"}')
        check(False, "invalid scenario rejected")
    except fsbs.FsbsError:
        check(True, "invalid scenario rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()
