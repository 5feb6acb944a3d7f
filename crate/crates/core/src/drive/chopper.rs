//! On-board braking chopper: resistor bank switched by a hysteresis comparator on
//! the DC-link voltage.

use serde::{Deserialize, Serialize};

/// Nominal line voltage the default thresholds are derived from, V.
pub const NOMINAL_LINE_VOLTAGE: f64 = 650.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChopperSettings {
    /// Upper (activation) threshold, V.
    pub v_act: f64,
    /// Lower (shutdown) threshold, V.
    pub v_rel: f64,
}

impl Default for ChopperSettings {
    fn default() -> Self {
        let v_act = 1.2 * NOMINAL_LINE_VOLTAGE;
        Self { v_act, v_rel: v_act - 20.0 }
    }
}

impl ChopperSettings {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.v_rel > 0.0 && self.v_rel < self.v_act) {
            return Err("chopper thresholds need 0 < v_rel < v_act");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChopperState {
    pub on: bool,
    pub v_act: f64,
    pub v_rel: f64,
    /// Resistor bank, ohm.
    pub r_ch: f64,
}

impl ChopperState {
    pub fn new(settings: ChopperSettings, r_ch: f64) -> Self {
        Self { on: false, v_act: settings.v_act, v_rel: settings.v_rel, r_ch }
    }
}

/// Updates the switch and returns the power burnt in the resistor at `v_dc`, W.
pub fn chopper_step(v_dc: f64, s: &ChopperState) -> (ChopperState, f64) {
    let mut next = *s;
    if !s.on && v_dc > s.v_act {
        next.on = true;
    } else if s.on && v_dc <= s.v_rel {
        next.on = false;
    }
    let p = if next.on { v_dc * v_dc / s.r_ch } else { 0.0 };
    (next, p)
}
