//! Reactance-network math for the tag oscillators.
//!
//! Two oscillator topologies are modeled. The drain-output enhanced-swing
//! Colpitts (`EscoDrain`) tank is `C1` in series with `C2`, with the
//! `C_JFET`/`C_blocking` series pair hanging in parallel across it. The
//! gate-output modified Clapp (`McoGate`) tank puts the gate-node capacitance
//! `C0 = C_blocking ⊕ (C_JFET ∥ C_shift)` in series with `C1` and `C2`, which
//! makes the frequency very sensitive to anything added at that node.
//!
//! All values are SI. `C_JFET` is never computed; it is a per-tag model
//! parameter that absorbs parasitics (traces, Miller-effect gate capacitance).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Default effective JFET/antenna parasitic capacitance.
pub const DEFAULT_C_JFET: f64 = 10e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[serde(alias = "esco")]
    EscoDrain,
    #[serde(alias = "mco")]
    McoGate,
}

/// Component network that sets a tag's oscillation frequency.
///
/// `l2` is carried as data only: the secondary (L2, C2) tank of the ESCO is
/// designed never to oscillate in the operating range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorDesign {
    pub topology: Topology,
    #[serde(deserialize_with = "units::henry::deserialize")]
    pub l1: f64,
    #[serde(deserialize_with = "units::henry::deserialize")]
    pub l2: f64,
    #[serde(deserialize_with = "units::farad::deserialize")]
    pub c1: f64,
    #[serde(deserialize_with = "units::farad::deserialize")]
    pub c2: f64,
    #[serde(deserialize_with = "units::farad::deserialize")]
    pub c_blocking: f64,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::farad::option::deserialize"
    )]
    pub c_shift: Option<f64>,
    #[serde(
        default = "default_c_jfet",
        deserialize_with = "units::farad::deserialize"
    )]
    pub c_jfet: f64,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::ohm::option::deserialize"
    )]
    pub r_adjust: Option<f64>,
}

fn default_c_jfet() -> f64 {
    DEFAULT_C_JFET
}

impl OscillatorDesign {
    /// A drain-output ESCO design with the default `C_JFET`.
    pub fn esco(l1: f64, l2: f64, c1: f64, c2: f64, c_blocking: f64) -> Self {
        OscillatorDesign {
            topology: Topology::EscoDrain,
            l1,
            l2,
            c1,
            c2,
            c_blocking,
            c_shift: None,
            c_jfet: DEFAULT_C_JFET,
            r_adjust: None,
        }
    }

    /// A gate-output MCO design with the default `C_JFET`.
    #[allow(clippy::too_many_arguments)]
    pub fn mco(
        l1: f64,
        l2: f64,
        c1: f64,
        c2: f64,
        c_blocking: f64,
        c_shift: Option<f64>,
        r_adjust: f64,
    ) -> Self {
        OscillatorDesign {
            topology: Topology::McoGate,
            l1,
            l2,
            c1,
            c2,
            c_blocking,
            c_shift,
            c_jfet: DEFAULT_C_JFET,
            r_adjust: Some(r_adjust),
        }
    }

    pub fn with_c_jfet(mut self, c_jfet: f64) -> Self {
        self.c_jfet = c_jfet;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("l1", self.l1),
            ("l2", self.l2),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c_blocking", self.c_blocking),
            ("c_jfet", self.c_jfet),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(cs) = self.c_shift {
            if !(cs.is_finite() && cs > 0.0) {
                return Err(Error::invalid(format!(
                    "c_shift must be positive, got {cs}"
                )));
            }
        }
        match (self.topology, self.r_adjust) {
            (Topology::McoGate, Some(r)) if r.is_finite() && r > 0.0 => Ok(()),
            (Topology::McoGate, Some(r)) => Err(Error::invalid(format!(
                "r_adjust must be positive, got {r}"
            ))),
            (Topology::McoGate, None) => Err(Error::invalid("McoGate design requires r_adjust")),
            (Topology::EscoDrain, Some(_)) => {
                Err(Error::invalid("r_adjust is only meaningful for McoGate"))
            }
            (Topology::EscoDrain, None) => Ok(()),
        }
    }
}

/// Equivalent tank seen by the oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TankReduction {
    pub l_eq: f64,
    pub c_eq: f64,
    pub f_resonant: f64,
}

impl TankReduction {
    /// Builds a reduction directly from an equivalent L and C.
    pub fn from_lc(l_eq: f64, c_eq: f64) -> Result<Self> {
        Ok(TankReduction {
            l_eq,
            c_eq,
            f_resonant: resonant_frequency(l_eq, c_eq)?,
        })
    }
}

/// Sensor-induced modifications applied on top of a design before reduction.
///
/// Extra capacitances are placed in parallel with the named element; the
/// `mid` node is the JFET gate node (in parallel with `C_JFET`/`C_shift`).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TankAdjust {
    pub l_eq: Option<f64>,
    pub extra_c1: f64,
    pub extra_c2: f64,
    pub extra_mid: f64,
}

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{what}: empty list")));
    }
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0) || v.is_nan()) {
        return Err(Error::invalid(format!("{what}: non-positive value {bad}")));
    }
    Ok(())
}

/// `1 / Σ 1/c_i`.
pub fn series_capacitance(caps: &[f64]) -> Result<f64> {
    check_positive(caps, "series_capacitance")?;
    Ok(1.0 / caps.iter().map(|c| 1.0 / c).sum::<f64>())
}

/// `Σ c_i`.
pub fn parallel_capacitance(caps: &[f64]) -> Result<f64> {
    check_positive(caps, "parallel_capacitance")?;
    Ok(caps.iter().sum())
}

/// Product-over-sum. An infinite branch is an open circuit and leaves the
/// other inductor unchanged.
pub fn parallel_inductance(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::invalid(format!(
            "parallel_inductance: non-positive value ({a}, {b})"
        )));
    }
    match (a.is_infinite(), b.is_infinite()) {
        (true, true) => Ok(f64::INFINITY),
        (true, false) => Ok(b),
        (false, true) => Ok(a),
        (false, false) => Ok(a * b / (a + b)),
    }
}

/// `1 / (2π √(l c))`.
pub fn resonant_frequency(l: f64, c: f64) -> Result<f64> {
    if !(l > 0.0 && l.is_finite()) || !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!(
            "resonant_frequency: non-positive or non-finite L={l}, C={c}"
        )));
    }
    Ok(1.0 / (2.0 * PI * (l * c).sqrt()))
}

/// Capacitance that resonates with `l` at `target_f`.
pub fn required_capacitance(target_f: f64, l: f64) -> Result<f64> {
    if !(target_f > 0.0 && target_f.is_finite()) || !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid(format!(
            "required_capacitance: non-positive f={target_f}, L={l}"
        )));
    }
    let w = 2.0 * PI * target_f;
    Ok(1.0 / (w * w * l))
}

/// Inductance that resonates with `c` at `target_f`.
pub fn required_inductance(target_f: f64, c: f64) -> Result<f64> {
    // Same algebra with L and C swapped.
    required_capacitance(target_f, c)
}

pub fn reduce_tank(design: &OscillatorDesign) -> Result<TankReduction> {
    reduce_tank_adjusted(design, &TankAdjust::default())
}

/// Equivalent tank capacitance of `design` with `adjust` applied.
pub fn tank_capacitance(design: &OscillatorDesign, adjust: &TankAdjust) -> Result<f64> {
    design.validate()?;
    let c1 = design.c1 + adjust.extra_c1;
    let c2 = design.c2 + adjust.extra_c2;
    match design.topology {
        Topology::McoGate => {
            // C_JFET ∥ C_shift ∥ sensor
            let gate = design.c_jfet + design.c_shift.unwrap_or(0.0) + adjust.extra_mid.max(0.0);
            let c0 = series_capacitance(&[design.c_blocking, gate])?;
            series_capacitance(&[c0, c1, c2])
        }
        Topology::EscoDrain => {
            let jfet = design.c_jfet + adjust.extra_mid.max(0.0);
            let parasitic = series_capacitance(&[jfet, design.c_blocking])?;
            parallel_capacitance(&[series_capacitance(&[c1, c2])?, parasitic])
        }
    }
}

pub fn reduce_tank_adjusted(
    design: &OscillatorDesign,
    adjust: &TankAdjust,
) -> Result<TankReduction> {
    let c_eq = tank_capacitance(design, adjust)?;
    let l_eq = adjust.l_eq.unwrap_or(design.l1);
    TankReduction::from_lc(l_eq, c_eq)
}

/// Junction varactor `C(v) = C0 / (1 + v/Vj)^γ`, `v` the reverse bias.
///
/// γ = 0.5 is an abrupt junction; hyperabrupt tuning diodes sit near γ = 2,
/// where a varactor-dominated tank tunes almost linearly in voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaractorModel {
    #[serde(deserialize_with = "units::farad::deserialize")]
    pub c_zero_bias: f64,
    #[serde(deserialize_with = "units::volt::deserialize")]
    pub junction_potential: f64,
    pub grading_exponent: f64,
}

impl Default for VaractorModel {
    fn default() -> Self {
        VaractorModel {
            c_zero_bias: 100e-12,
            junction_potential: 0.7,
            grading_exponent: 0.5,
        }
    }
}

impl VaractorModel {
    pub fn capacitance(&self, v: f64) -> Result<f64> {
        varactor_capacitance(self, v)
    }

    /// Analytic `dC/dv`.
    pub fn derivative(&self, v: f64) -> Result<f64> {
        let c = varactor_capacitance(self, v)?;
        Ok(-self.grading_exponent * c / (self.junction_potential + v))
    }
}

pub fn varactor_capacitance(model: &VaractorModel, v: f64) -> Result<f64> {
    if !(model.c_zero_bias > 0.0 && model.junction_potential > 0.0 && model.grading_exponent > 0.0)
    {
        return Err(Error::invalid(format!("invalid varactor model {model:?}")));
    }
    if !(v > -model.junction_potential) {
        return Err(Error::Domain(format!(
            "varactor forward-biased beyond junction potential: v = {v} V"
        )));
    }
    Ok(model.c_zero_bias / (1.0 + v / model.junction_potential).powf(model.grading_exponent))
}

/// JFET drain-source channel used as the antenna load switch.
///
/// Within ±0.2 V of zero gate bias the channel is an exactly affine resistor
/// `r_on - triode_slope * v_gs`. Below the window it rises hyperbolically to
/// infinity at pinch-off; above it decays toward half the window-edge value.
/// Both continuations match value and slope at the window edges. Gate
/// leakage (hundreds of nA in this range) has no consumer and is not modeled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JfetModel {
    pub v_pinchoff: f64,
    pub r_on: f64,
    pub triode_slope: f64,
}

impl Default for JfetModel {
    fn default() -> Self {
        JfetModel {
            v_pinchoff: -1.9,
            r_on: 200.0,
            triode_slope: 100.0,
        }
    }
}

/// Half-width of the linear triode window.
pub const TRIODE_WINDOW: f64 = 0.2;

impl JfetModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_pinchoff < -TRIODE_WINDOW) {
            return Err(Error::invalid(format!(
                "pinch-off {} V must lie below the triode window",
                self.v_pinchoff
            )));
        }
        if !(self.triode_slope > 0.0) || !(self.r_on - TRIODE_WINDOW * self.triode_slope > 0.0) {
            return Err(Error::invalid(
                "r_on must exceed triode_slope * 0.2 V and slope must be positive",
            ));
        }
        Ok(())
    }

    pub fn resistance(&self, v_gs: f64) -> Result<f64> {
        jfet_resistance(self, v_gs)
    }

    /// Analytic `dR/dv_gs`.
    pub fn derivative(&self, v_gs: f64) -> Result<f64> {
        self.validate()?;
        if !(v_gs > self.v_pinchoff) {
            return Err(Error::PinchOff {
                v_gs,
                v_pinchoff: self.v_pinchoff,
            });
        }
        let s = self.triode_slope;
        Ok(if v_gs < -TRIODE_WINDOW {
            let k = s * (-TRIODE_WINDOW - self.v_pinchoff).powi(2);
            -k / (v_gs - self.v_pinchoff).powi(2)
        } else if v_gs <= TRIODE_WINDOW {
            -s
        } else {
            let r1 = self.r_on - TRIODE_WINDOW * s;
            let span = r1 / 2.0;
            -s * (-s * (v_gs - TRIODE_WINDOW) / span).exp()
        })
    }
}

pub fn jfet_resistance(model: &JfetModel, v_gs: f64) -> Result<f64> {
    model.validate()?;
    if !(v_gs > model.v_pinchoff) {
        return Err(Error::PinchOff {
            v_gs,
            v_pinchoff: model.v_pinchoff,
        });
    }
    let s = model.triode_slope;
    Ok(if v_gs < -TRIODE_WINDOW {
        let v0 = -TRIODE_WINDOW;
        let r0 = model.r_on + TRIODE_WINDOW * s;
        let k = s * (v0 - model.v_pinchoff).powi(2);
        let b = r0 - k / (v0 - model.v_pinchoff);
        k / (v_gs - model.v_pinchoff) + b
    } else if v_gs <= TRIODE_WINDOW {
        model.r_on - s * v_gs
    } else {
        let r1 = model.r_on - TRIODE_WINDOW * s;
        let span = r1 / 2.0;
        r1 - span + span * (-s * (v_gs - TRIODE_WINDOW) / span).exp()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{khz, mh, nf, pf};
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn series_examples() {
        assert!(
            rel(
                series_capacitance(&[pf(1000.0), pf(1000.0)]).unwrap(),
                pf(500.0)
            ) < 1e-12
        );
        assert_eq!(series_capacitance(&[pf(33.0)]).unwrap(), pf(33.0));
        // 1/(1/100n + 1/10p) = 9.999 pF: the small capacitor dominates.
        let c = series_capacitance(&[nf(100.0), pf(10.0)]).unwrap();
        assert!((c / 1e-12 - 9.999).abs() < 5e-4, "{c}");
    }

    #[test]
    fn series_rejects_bad_input() {
        assert!(matches!(
            series_capacitance(&[]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(series_capacitance(&[pf(1.0), 0.0]).is_err());
        assert!(series_capacitance(&[pf(1.0), -pf(1.0)]).is_err());
        assert!(parallel_capacitance(&[]).is_err());
        assert!(parallel_capacitance(&[f64::NAN]).is_err());
    }

    #[test]
    fn parallel_examples() {
        assert!(
            rel(
                parallel_capacitance(&[pf(47.0), pf(47.0)]).unwrap(),
                pf(94.0)
            ) < 1e-12
        );
        assert_eq!(parallel_capacitance(&[pf(5.0)]).unwrap(), pf(5.0));
        assert!(
            rel(
                parallel_capacitance(&[pf(30.0), pf(10.0)]).unwrap(),
                pf(40.0)
            ) < 1e-12
        );
    }

    #[test]
    fn parallel_inductance_examples() {
        assert!(rel(parallel_inductance(mh(2.0), mh(2.0)).unwrap(), mh(1.0)) < 1e-12);
        assert_eq!(
            parallel_inductance(mh(1.0), f64::INFINITY).unwrap(),
            mh(1.0)
        );
        // 4.7 * 10 / 14.7 = 3.19728 mH
        let l = parallel_inductance(mh(4.7), mh(10.0)).unwrap();
        assert!((l / 1e-3 - 3.197).abs() < 5e-4);
        assert!(parallel_inductance(0.0, mh(1.0)).is_err());
    }

    #[test]
    fn resonant_frequency_table_rows() {
        let cases = [
            (mh(4.7), pf(487.5), 105.144),
            (mh(4.7), pf(55.8), 310.781),
            (mh(0.3), pf(92.61), 954.840),
        ];
        for (l, c, f_khz) in cases {
            let f = resonant_frequency(l, c).unwrap();
            assert!(rel(f, khz(f_khz)) < 5e-4, "{f} vs {f_khz} kHz");
        }
        assert!(resonant_frequency(0.0, pf(1.0)).is_err());
        assert!(resonant_frequency(mh(1.0), -1.0).is_err());
    }

    #[test]
    fn required_capacitance_inverts_table() {
        let c = required_capacitance(khz(105.144), mh(4.7)).unwrap();
        assert!(rel(c, pf(487.5)) < 5e-4);
        let c = required_capacitance(khz(838.820), mh(1.0)).unwrap();
        assert!(rel(c, pf(36.0)) < 5e-4);
        assert!(required_capacitance(0.0, mh(1.0)).is_err());
    }

    #[test]
    fn esco_forced_ceff_matches_table_row() {
        let t = TankReduction::from_lc(mh(4.7), pf(487.5)).unwrap();
        assert!(rel(t.f_resonant, khz(105.144)) < 5e-4);
    }

    fn mco_example() -> OscillatorDesign {
        OscillatorDesign::mco(
            mh(4.7),
            mh(10.0),
            pf(470.0),
            pf(470.0),
            nf(100.0),
            Some(pf(20.0)),
            200e3,
        )
    }

    #[test]
    fn mco_structure() {
        let d = mco_example();
        let t = reduce_tank(&d).unwrap();
        let c0 = series_capacitance(&[nf(100.0), pf(30.0)]).unwrap();
        let expect = series_capacitance(&[c0, pf(470.0), pf(470.0)]).unwrap();
        assert!(rel(t.c_eq, expect) < 1e-12);
        assert_eq!(t.l_eq, d.l1);
        assert!(rel(t.f_resonant, resonant_frequency(t.l_eq, t.c_eq).unwrap()) < 1e-15);
    }

    #[test]
    fn mco_absent_shift_is_jfet_branch_alone() {
        let mut d = mco_example();
        d.c_shift = None;
        let t = reduce_tank(&d).unwrap();
        let c0 = series_capacitance(&[nf(100.0), d.c_jfet]).unwrap();
        let expect = series_capacitance(&[c0, d.c1, d.c2]).unwrap();
        assert!(rel(t.c_eq, expect) < 1e-12);
    }

    #[test]
    fn esco_structure() {
        let d = OscillatorDesign::esco(mh(4.7), mh(10.0), pf(220.0), pf(220.0), nf(100.0));
        let t = reduce_tank(&d).unwrap();
        let expect = pf(110.0) + series_capacitance(&[pf(10.0), nf(100.0)]).unwrap();
        assert!(rel(t.c_eq, expect) < 1e-12);
    }

    #[test]
    fn mco_shift_perturbation_dominates() {
        let d = mco_example();
        let f0 = reduce_tank(&d).unwrap().f_resonant;
        let mut shifted = d.clone();
        shifted.c_shift = Some(d.c_shift.unwrap() + pf(3.0));
        let mut c2 = d.clone();
        c2.c2 += pf(3.0);
        let df_shift = (reduce_tank(&shifted).unwrap().f_resonant - f0).abs();
        let df_c2 = (reduce_tank(&c2).unwrap().f_resonant - f0).abs();
        assert!(df_shift > khz(10.0), "shift moved only {df_shift} Hz");
        assert!(df_shift > 50.0 * df_c2, "{df_shift} vs {df_c2}");
    }

    #[test]
    fn design_validation() {
        let mut d = mco_example();
        d.r_adjust = None;
        assert!(d.validate().is_err());
        let mut e = OscillatorDesign::esco(mh(1.0), mh(1.0), pf(10.0), pf(10.0), nf(1.0));
        e.r_adjust = Some(1e3);
        assert!(e.validate().is_err());
        let mut z = mco_example();
        z.c_shift = Some(0.0);
        assert!(reduce_tank(&z).is_err());
        let mut n = mco_example();
        n.c1 = -1.0;
        assert!(matches!(reduce_tank(&n), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn varactor_examples() {
        let m = VaractorModel::default();
        assert_eq!(m.capacitance(0.0).unwrap(), m.c_zero_bias);
        assert!(m.capacitance(-0.5).unwrap() > m.capacitance(0.5).unwrap());
        assert!(matches!(m.capacitance(-0.7), Err(Error::Domain(_))));
        assert!(m.capacitance(-0.9).is_err());
    }

    #[test]
    fn jfet_examples() {
        let j = JfetModel::default();
        assert_eq!(j.resistance(0.0).unwrap(), j.r_on);
        let lo = j.resistance(-0.2).unwrap();
        let hi = j.resistance(0.2).unwrap();
        assert!(lo > j.r_on && j.r_on > hi);
        assert!(matches!(j.resistance(-1.9), Err(Error::PinchOff { .. })));
        assert!(j.resistance(-1.89).unwrap().is_finite());
        assert!(j.resistance(0.3).unwrap() > 0.0);
    }

    #[test]
    fn jfet_affine_window() {
        let j = JfetModel::default();
        for i in -20..=20 {
            let v = i as f64 * 0.01;
            let expect = j.r_on - j.triode_slope * v;
            assert!((j.resistance(v).unwrap() - expect).abs() < 1e-9);
        }
    }

    // Direct O(N²) DFT of the resistance waveform; independent of any FFT code.
    #[test]
    fn jfet_sinusoidal_drive_has_low_thd() {
        let j = JfetModel::default();
        let n = 256;
        let cycles = 4;
        let r: Vec<f64> = (0..n)
            .map(|i| {
                let v = 0.2 * (2.0 * PI * cycles as f64 * i as f64 / n as f64).sin();
                j.resistance(v).unwrap()
            })
            .collect();
        let mag = |k: usize| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, x) in r.iter().enumerate() {
                let ph = -2.0 * PI * (k * i) as f64 / n as f64;
                re += x * ph.cos();
                im += x * ph.sin();
            }
            (re * re + im * im).sqrt()
        };
        let fundamental = mag(cycles);
        let harmonics: f64 = (2..=10)
            .map(|h| mag(h * cycles).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(
            harmonics / fundamental < 0.01,
            "THD {}",
            harmonics / fundamental
        );
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let j = JfetModel::default();
        let h = 1e-6;
        for v in [-1.5, -0.7, -0.25, -0.1, 0.0, 0.1, 0.25, 0.3] {
            let fd = (j.resistance(v + h).unwrap() - j.resistance(v - h).unwrap()) / (2.0 * h);
            let an = j.derivative(v).unwrap();
            assert!(
                (fd - an).abs() <= 1e-4 * an.abs().max(1.0),
                "v={v}: {fd} vs {an}"
            );
        }
        let m = VaractorModel::default();
        for v in [-0.5, 0.0, 0.3, 2.0, 5.0] {
            let fd = (m.capacitance(v + h).unwrap() - m.capacitance(v - h).unwrap()) / (2.0 * h);
            let an = m.derivative(v).unwrap();
            assert!((fd - an).abs() <= 1e-5 * an.abs(), "v={v}: {fd} vs {an}");
        }
    }

    proptest! {
        #[test]
        fn combinator_bounds(caps in prop::collection::vec(1e-13f64..1e-6, 1..8),
                             a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
            let min = caps.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = caps.iter().cloned().fold(0.0, f64::max);
            prop_assert!(series_capacitance(&caps).unwrap() <= min * (1.0 + 1e-12));
            prop_assert!(parallel_capacitance(&caps).unwrap() >= max);
            prop_assert!(parallel_inductance(a, b).unwrap() <= a.min(b) * (1.0 + 1e-12));
        }

        #[test]
        fn resonance_decreases_in_l_and_c(l in 1e-5f64..0.1, c in 1e-12f64..1e-8, k in 1.0001f64..10.0) {
            let f = resonant_frequency(l, c).unwrap();
            prop_assert!(resonant_frequency(k * l, c).unwrap() < f);
            prop_assert!(resonant_frequency(l, k * c).unwrap() < f);
        }

        #[test]
        fn required_capacitance_round_trip(f in 1e5f64..1e6, l in 1e-4f64..0.05) {
            let c = required_capacitance(f, l).unwrap();
            prop_assert!(rel(resonant_frequency(l, c).unwrap(), f) < 1e-9);
        }

        #[test]
        fn mco_gate_node_sensitivity(c_jfet in 2e-12f64..20e-12,
                                     c1 in 100e-12f64..2e-9,
                                     c2 in 100e-12f64..2e-9,
                                     l1 in 1e-3f64..30e-3) {
            let mut d = OscillatorDesign::mco(l1, 1e-3, c1, c2, 100e-9, Some(5e-12), 100e3);
            d.c_jfet = c_jfet;
            let h = 1e-15;
            let f = |d: &OscillatorDesign| reduce_tank(d).unwrap().f_resonant;
            let base = f(&d);
            let mut ds = d.clone(); ds.c_shift = Some(5e-12 + h);
            let mut d1 = d.clone(); d1.c1 += h;
            let mut d2 = d.clone(); d2.c2 += h;
            let s = (f(&ds) - base).abs();
            prop_assert!(s > (f(&d1) - base).abs());
            prop_assert!(s > (f(&d2) - base).abs());
        }

        #[test]
        fn varactor_monotone(v1 in -0.69f64..10.0, dv in 1e-3f64..5.0,
                             c0 in 1e-12f64..1e-9, gamma in 0.3f64..2.5) {
            let m = VaractorModel { c_zero_bias: c0, junction_potential: 0.7, grading_exponent: gamma };
            prop_assert!(m.capacitance(v1).unwrap() > m.capacitance(v1 + dv).unwrap());
        }

        #[test]
        fn jfet_monotone(v1 in -1.89f64..0.3, dv in 1e-4f64..0.5) {
            let j = JfetModel::default();
            let v2 = (v1 + dv).min(0.3);
            prop_assume!(v2 > v1);
            prop_assert!(j.resistance(v1).unwrap() > j.resistance(v2).unwrap());
        }
    }
}
