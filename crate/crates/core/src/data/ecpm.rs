use serde::{Deserialize, Serialize};

use super::EnergyClass;
use crate::error::{Error, Result};

/// ECPM strictly below this is `safe`.
pub const SAFE_BELOW: f64 = 0.5;
/// ECPM strictly above this is `critical`.
pub const CRITICAL_ABOVE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryState {
    Charging,
    Discharging,
}

impl BatteryState {
    /// `discharging` (any case) is discharging; every other value counts as
    /// plugged in (charging, full, not charging, unknown).
    pub fn parse(raw: &str) -> Self {
        if raw.trim().eq_ignore_ascii_case("discharging") {
            BatteryState::Discharging
        } else {
            BatteryState::Charging
        }
    }
}

/// One telemetry sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRow {
    /// Seconds since the epoch.
    pub timestamp: f64,
    /// Battery percentage in `[0, 100]`.
    pub battery_level: f64,
    pub battery_state: BatteryState,
    /// Raw values of the settings features, as `(column, value)`.
    pub settings: Vec<(String, String)>,
    /// Encoded feature values.
    pub features: Vec<f64>,
}

/// Battery percentage consumed per minute between two consecutive discharging
/// states (`state2` later than `state1`).
pub fn compute_ecpm(state1: &StateRow, state2: &StateRow) -> Result<f64> {
    if state1.battery_state != BatteryState::Discharging || state2.battery_state != BatteryState::Discharging {
        return Err(Error::FilteredState);
    }
    let elapsed = state2.timestamp - state1.timestamp;
    if elapsed == 0.0 {
        return Err(Error::DegenerateInterval { timestamp: state1.timestamp });
    }
    if elapsed < 0.0 {
        return Err(Error::invalid(format!(
            "timestamps not increasing ({} then {})",
            state1.timestamp, state2.timestamp
        )));
    }
    if let Some(((name, _), _)) =
        state1.settings.iter().zip(&state2.settings).find(|((n1, v1), (n2, v2))| n1 != n2 || v1 != v2)
    {
        return Err(Error::SettingsChanged { feature: name.clone() });
    }
    if state1.settings.len() != state2.settings.len() {
        return Err(Error::SettingsChanged { feature: "<settings set>".into() });
    }
    Ok((state1.battery_level - state2.battery_level) / elapsed * 60.0)
}

/// Maps an ECPM value onto the three energy classes.
pub fn label(ecpm: f64) -> Result<EnergyClass> {
    if !ecpm.is_finite() {
        return Err(Error::invalid(format!("ECPM {ecpm} is not finite")));
    }
    Ok(if ecpm < SAFE_BELOW {
        EnergyClass::Safe
    } else if ecpm > CRITICAL_ABOVE {
        EnergyClass::Critical
    } else {
        EnergyClass::Warning
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(ts: f64, level: f64) -> StateRow {
        StateRow {
            timestamp: ts,
            battery_level: level,
            battery_state: BatteryState::Discharging,
            settings: vec![("wifi".into(), "on".into())],
            features: vec![],
        }
    }

    #[test]
    fn ecpm_examples() {
        assert_eq!(compute_ecpm(&row(0.0, 80.0), &row(60.0, 79.0)).unwrap(), 1.0);
        assert_eq!(compute_ecpm(&row(100.0, 90.0), &row(220.0, 89.5)).unwrap(), 0.25);
        assert!(matches!(compute_ecpm(&row(5.0, 90.0), &row(5.0, 89.0)), Err(Error::DegenerateInterval { .. })));
    }

    #[test]
    fn ecpm_rejects_charging_and_setting_changes() {
        let mut charging = row(60.0, 81.0);
        charging.battery_state = BatteryState::Charging;
        assert!(matches!(compute_ecpm(&row(0.0, 80.0), &charging), Err(Error::FilteredState)));
        let mut other = row(60.0, 79.0);
        other.settings[0].1 = "off".into();
        assert!(matches!(compute_ecpm(&row(0.0, 80.0), &other), Err(Error::SettingsChanged { .. })));
    }

    #[test]
    fn thresholds() {
        assert_eq!(label(0.3).unwrap(), EnergyClass::Safe);
        assert_eq!(label(1.0).unwrap(), EnergyClass::Warning);
        assert_eq!(label(2.0).unwrap(), EnergyClass::Critical);
        assert_eq!(label(0.5).unwrap(), EnergyClass::Warning);
        assert_eq!(label(1.5).unwrap(), EnergyClass::Warning);
        assert!(label(f64::NAN).is_err());
        assert!(label(f64::INFINITY).is_err());
    }

    #[test]
    fn battery_state_parsing() {
        assert_eq!(BatteryState::parse("Discharging"), BatteryState::Discharging);
        assert_eq!(BatteryState::parse("charging"), BatteryState::Charging);
        assert_eq!(BatteryState::parse("Full"), BatteryState::Charging);
    }
}
