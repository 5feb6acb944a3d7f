//! Rectifier substation reduced to a Thevenin source behind an ideal diode.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubstationParams {
    /// Position along the track, m.
    pub position: f64,
    /// No-load DC voltage, V.
    pub v0: f64,
    /// Internal (transformer + commutation) resistance, ohm.
    pub r_th: f64,
    /// Constant auxiliary draw at the substation busbar, W.
    pub aux_load: f64,
    /// Series diode. Clearing it makes the branch bidirectional; only meant for
    /// validation networks.
    pub diode: bool,
}

impl Default for SubstationParams {
    fn default() -> Self {
        Self { position: 0.0, v0: 650.0, r_th: 0.05, aux_load: 0.0, diode: true }
    }
}

impl SubstationParams {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.v0 > 0.0) {
            return Err("substation v0 must be > 0");
        }
        if !(self.r_th > 0.0) {
            return Err("substation r_th must be > 0");
        }
        if !(self.aux_load >= 0.0) {
            return Err("substation aux_load must be >= 0");
        }
        if !self.position.is_finite() {
            return Err("substation position must be finite");
        }
        Ok(())
    }
}

/// Current delivered into the rail at busbar voltage `v_rail`.
pub fn substation_current(v_rail: f64, p: &SubstationParams) -> f64 {
    let i = (p.v0 - v_rail) / p.r_th;
    if p.diode {
        i.max(0.0)
    } else {
        i
    }
}

/// Ideal no-load output of the rectifier for a given secondary line-line RMS voltage.
/// The two phase-shifted bridges sit in parallel, so the arrangement factor is 1.
pub fn twelve_pulse_no_load(v_ll_secondary: f64) -> f64 {
    3.0 * 2f64.sqrt() / PI * v_ll_secondary
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn thevenin_with_diode() {
        let p = SubstationParams::default();
        assert_eq!(substation_current(650.0, &p), 0.0);
        assert_relative_eq!(substation_current(600.0, &p), 1000.0, max_relative = 1e-12);
        assert_eq!(substation_current(700.0, &p), 0.0);
    }

    #[test]
    fn diode_can_be_cleared() {
        let p = SubstationParams { diode: false, ..Default::default() };
        assert_relative_eq!(substation_current(700.0, &p), -1000.0, max_relative = 1e-12);
    }

    #[test]
    fn rectifier_relation() {
        assert_relative_eq!(twelve_pulse_no_load(481.3), 650.0, epsilon = 0.05);
        assert_relative_eq!(twelve_pulse_no_load(962.6), 2.0 * twelve_pulse_no_load(481.3), max_relative = 1e-12);
        assert_relative_eq!(3.0 * 2f64.sqrt() / PI, 1.3505, epsilon = 1e-4);
    }

    #[test]
    fn current_is_monotone_and_non_negative() {
        let p = SubstationParams::default();
        let mut last = f64::INFINITY;
        for k in 0..2000 {
            let v = k as f64 * 0.5;
            let i = substation_current(v, &p);
            assert!(i >= 0.0 && i <= last);
            assert!(v * i >= 0.0);
            if v >= p.v0 {
                assert_eq!(i, 0.0);
            }
            last = i;
        }
    }
}
