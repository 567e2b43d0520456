//! Battery-trace CSV ingestion.
//!
//! Rows are read in file order. Charging rows are dropped; a discharging row
//! that directly follows a charging period (which itself followed discharging)
//! is excluded as well. Every remaining pair of consecutive discharging rows
//! with identical settings yields one labelled example whose features are
//! taken from the earlier row.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ecpm::{compute_ecpm, label, BatteryState, StateRow};
use super::{parse_number, LabeledDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    #[default]
    OneHot,
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureKind {
    Numeric,
    /// true/false, 1/0, yes/no, on/off, enabled/disabled.
    Boolean,
    /// Levels in encoding order; discovered (sorted) from the data when absent.
    Categorical {
        #[serde(default)]
        levels: Option<Vec<String>>,
        #[serde(default)]
        encoding: Encoding,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    /// Settings must stay unchanged between the two states of a pair.
    #[serde(default)]
    pub setting: bool,
}

impl FeatureSpec {
    pub fn numeric(name: &str) -> Self {
        FeatureSpec { name: name.into(), kind: FeatureKind::Numeric, setting: false }
    }

    pub fn boolean_setting(name: &str) -> Self {
        FeatureSpec { name: name.into(), kind: FeatureKind::Boolean, setting: true }
    }

    pub fn categorical(name: &str, encoding: Encoding) -> Self {
        FeatureSpec { name: name.into(), kind: FeatureKind::Categorical { levels: None, encoding }, setting: false }
    }
}

/// Column layout of a telemetry CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(default = "default_timestamp")]
    pub timestamp: String,
    #[serde(default = "default_battery_state")]
    pub battery_state: String,
    #[serde(default = "default_battery_level")]
    pub battery_level: String,
    /// Optional device/stream identifier; pairs never cross streams.
    #[serde(default)]
    pub stream: Option<String>,
    pub features: Vec<FeatureSpec>,
}

fn default_timestamp() -> String {
    "timestamp".into()
}
fn default_battery_state() -> String {
    "battery_state".into()
}
fn default_battery_level() -> String {
    "battery_level".into()
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>) -> Self {
        Schema {
            timestamp: default_timestamp(),
            battery_state: default_battery_state(),
            battery_level: default_battery_level(),
            stream: None,
            features,
        }
    }

    /// Smartphone sample features (battery, CPU, network, screen, memory,
    /// settings and storage), excluding the battery state and level columns
    /// that drive labelling.
    pub fn greenhub() -> Self {
        use Encoding::*;
        let mut f = vec![
            FeatureSpec::categorical("charger", OneHot),
            FeatureSpec::categorical("health", OneHot),
            FeatureSpec::numeric("voltage"),
            FeatureSpec::numeric("temperature"),
            FeatureSpec::numeric("cpu_usage"),
            FeatureSpec::numeric("up_time"),
            FeatureSpec::numeric("sleep_time"),
            FeatureSpec::categorical("network_type", OneHot),
            FeatureSpec::categorical("mobile_network_type", OneHot),
            FeatureSpec::categorical("mobile_data_status", OneHot),
            FeatureSpec::categorical("mobile_data_activity", OneHot),
            FeatureSpec::boolean_setting("roaming_enabled"),
            FeatureSpec::categorical("wifi_status", OneHot),
            FeatureSpec::numeric("wifi_signal_strength"),
            FeatureSpec::numeric("wifi_link_speed"),
            FeatureSpec::numeric("memory_free"),
            FeatureSpec::numeric("memory_user"),
            FeatureSpec::categorical("network_status", OneHot),
            FeatureSpec::numeric("screen_brightness"),
            FeatureSpec::boolean_setting("screen_on"),
            FeatureSpec::boolean_setting("bluetooth_enabled"),
            FeatureSpec::boolean_setting("location_enabled"),
            FeatureSpec::boolean_setting("power_saver_enabled"),
            FeatureSpec::boolean_setting("flashlight_enabled"),
            FeatureSpec::boolean_setting("nfc_enabled"),
            FeatureSpec::boolean_setting("developer_mode"),
            FeatureSpec::numeric("free"),
            FeatureSpec::numeric("total"),
            FeatureSpec::numeric("memory_active"),
            FeatureSpec::numeric("memory_inactive"),
        ];
        for spec in &mut f {
            if spec.name == "wifi_status" {
                spec.setting = true;
            }
        }
        Schema::new(f)
    }
}

/// Counters describing what ingestion kept and dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub charging_rows: usize,
    pub excluded_after_charging: usize,
    pub settings_changed_pairs: usize,
    pub degenerate_pairs: usize,
    pub labeled: usize,
    pub class_counts: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub dataset: LabeledDataset,
    pub report: IngestReport,
}

struct RawRow {
    line: u64,
    stream: String,
    timestamp: f64,
    level: f64,
    state: BatteryState,
    fields: Vec<String>,
}

#[derive(Default)]
struct StreamState {
    prev: Option<StateRow>,
    seen_discharging: bool,
    after_charging: bool,
}

pub fn ingest<R: Read>(input: R, schema: &Schema) -> Result<IngestOutput> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn { column: name.to_string() })
    };
    let ts_col = col(&schema.timestamp)?;
    let state_col = col(&schema.battery_state)?;
    let level_col = col(&schema.battery_level)?;
    let stream_col = schema.stream.as_deref().map(col).transpose()?;
    let feature_cols = schema.features.iter().map(|f| col(&f.name)).collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let timestamp = parse_number(&rec[ts_col], line)?;
        let level = parse_number(&rec[level_col], line)?;
        if !(0.0..=100.0).contains(&level) {
            return Err(Error::Row { line, message: format!("battery level {level} outside [0, 100]") });
        }
        rows.push(RawRow {
            line,
            stream: stream_col.map(|c| rec[c].to_string()).unwrap_or_default(),
            timestamp,
            level,
            state: BatteryState::parse(&rec[state_col]),
            fields: feature_cols.iter().map(|&c| rec[c].to_string()).collect(),
        });
    }

    let encoders = build_encoders(schema, &rows);
    let feature_names: Vec<String> = encoders.iter().flat_map(|e| e.names()).collect();

    let mut report = IngestReport { rows_read: rows.len(), ..IngestReport::default() };
    let mut streams: HashMap<String, StreamState> = HashMap::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for raw in rows {
        let st = streams.entry(raw.stream.clone()).or_default();
        if raw.state == BatteryState::Charging {
            report.charging_rows += 1;
            if st.seen_discharging {
                st.after_charging = true;
            }
            st.prev = None;
            continue;
        }
        if st.after_charging {
            st.after_charging = false;
            report.excluded_after_charging += 1;
            continue;
        }
        st.seen_discharging = true;
        let mut features = Vec::with_capacity(feature_names.len());
        for (enc, field) in encoders.iter().zip(&raw.fields) {
            enc.encode(field, raw.line, &mut features)?;
        }
        let row = StateRow {
            timestamp: raw.timestamp,
            battery_level: raw.level,
            battery_state: raw.state,
            settings: schema
                .features
                .iter()
                .zip(&raw.fields)
                .filter(|(f, _)| f.setting)
                .map(|(f, v)| (f.name.clone(), v.clone()))
                .collect(),
            features,
        };
        if let Some(prev) = st.prev.take() {
            match compute_ecpm(&prev, &row) {
                Ok(ecpm) => {
                    let class = label(ecpm)?;
                    values.extend_from_slice(&prev.features);
                    labels.push(class.index());
                    report.class_counts[class.index()] += 1;
                }
                Err(Error::SettingsChanged { .. }) => report.settings_changed_pairs += 1,
                Err(Error::DegenerateInterval { .. }) => report.degenerate_pairs += 1,
                Err(e) => return Err(Error::Row { line: raw.line, message: e.to_string() }),
            }
        }
        st.prev = Some(row);
    }
    report.labeled = labels.len();
    let x =
        Array2::from_shape_vec((labels.len(), feature_names.len()), values).map_err(|e| Error::Shape(e.to_string()))?;
    Ok(IngestOutput { dataset: LabeledDataset::new(x, labels, feature_names)?, report })
}

enum Encoder {
    Numeric(String),
    Boolean(String),
    Ordinal(String, Vec<String>),
    OneHot(String, Vec<String>),
}

fn build_encoders(schema: &Schema, rows: &[RawRow]) -> Vec<Encoder> {
    schema
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| match &f.kind {
            FeatureKind::Numeric => Encoder::Numeric(f.name.clone()),
            FeatureKind::Boolean => Encoder::Boolean(f.name.clone()),
            FeatureKind::Categorical { levels, encoding } => {
                let levels = levels.clone().unwrap_or_else(|| {
                    rows.iter().map(|r| r.fields[i].clone()).collect::<BTreeSet<_>>().into_iter().collect()
                });
                match encoding {
                    Encoding::Ordinal => Encoder::Ordinal(f.name.clone(), levels),
                    Encoding::OneHot => Encoder::OneHot(f.name.clone(), levels),
                }
            }
        })
        .collect()
}

impl Encoder {
    fn names(&self) -> Vec<String> {
        match self {
            Encoder::Numeric(n) | Encoder::Boolean(n) | Encoder::Ordinal(n, _) => vec![n.clone()],
            Encoder::OneHot(n, levels) => levels.iter().map(|l| format!("{n}={l}")).collect(),
        }
    }

    fn encode(&self, field: &str, line: u64, out: &mut Vec<f64>) -> Result<()> {
        match self {
            Encoder::Numeric(_) => out.push(parse_number(field, line)?),
            Encoder::Boolean(name) => out.push(match field.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" | "on" | "enabled" => 1.0,
                "false" | "0" | "no" | "off" | "disabled" => 0.0,
                _ => return Err(Error::Row { line, message: format!("`{field}` is not a boolean for `{name}`") }),
            }),
            Encoder::Ordinal(name, levels) => {
                let idx = level_index(levels, field, name, line)?;
                out.push(idx as f64);
            }
            Encoder::OneHot(name, levels) => {
                let idx = level_index(levels, field, name, line)?;
                out.extend((0..levels.len()).map(|i| if i == idx { 1.0 } else { 0.0 }));
            }
        }
        Ok(())
    }
}

fn level_index(levels: &[String], field: &str, name: &str, line: u64) -> Result<usize> {
    levels
        .iter()
        .position(|l| l == field)
        .ok_or_else(|| Error::Row { line, message: format!("unknown level `{field}` for `{name}`") })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::new(vec![
            FeatureSpec::numeric("cpu"),
            FeatureSpec::boolean_setting("wifi"),
            FeatureSpec::categorical("net", Encoding::OneHot),
        ])
    }

    fn csv(rows: &[(&str, f64, &str, &str)]) -> String {
        let mut s = String::from("timestamp,battery_state,battery_level,cpu,wifi,net\n");
        for (i, (state, level, wifi, net)) in rows.iter().enumerate() {
            s.push_str(&format!("{},{state},{level},0.{i},{wifi},{net}\n", i * 60));
        }
        s
    }

    #[test]
    fn charging_only_gives_empty_dataset() {
        let input = csv(&[("charging", 50.0, "on", "lte"), ("charging", 51.0, "on", "lte")]);
        let out = ingest(input.as_bytes(), &schema()).unwrap();
        assert!(out.dataset.is_empty());
        assert_eq!(out.report.charging_rows, 2);
    }

    #[test]
    fn consecutive_pairs_are_labelled() {
        let input = csv(&[
            ("discharging", 80.0, "on", "lte"),
            ("discharging", 79.0, "on", "wifi"),
            ("discharging", 78.9, "on", "lte"),
        ]);
        let out = ingest(input.as_bytes(), &schema()).unwrap();
        assert_eq!(out.dataset.n_rows(), 2);
        assert_eq!(out.dataset.y, vec![1, 0]);
        assert_eq!(out.dataset.feature_names, vec!["cpu", "wifi", "net=lte", "net=wifi"]);
        // Features come from the earlier state of each pair.
        assert_eq!(out.dataset.x.row(0).to_vec(), vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(out.dataset.x.row(1).to_vec(), vec![0.1, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn row_after_charging_is_excluded() {
        let base = [
            ("discharging", 80.0, "on", "lte"),
            ("charging", 81.0, "on", "lte"),
            ("discharging", 81.0, "on", "lte"),
            ("discharging", 80.0, "on", "lte"),
        ];
        let out = ingest(csv(&base).as_bytes(), &schema()).unwrap();
        assert_eq!(out.dataset.n_rows(), 0);
        assert_eq!(out.report.excluded_after_charging, 1);

        let mut more = base.to_vec();
        more.push(("discharging", 77.0, "on", "lte"));
        let out = ingest(csv(&more).as_bytes(), &schema()).unwrap();
        // Only (row 3, row 4) pairs: 3% over one minute.
        assert_eq!(out.dataset.n_rows(), 1);
        assert_eq!(out.dataset.y, vec![2]);
        assert_eq!(out.dataset.x[[0, 0]], 0.3);
    }

    #[test]
    fn setting_change_drops_pair() {
        let input = csv(&[("discharging", 80.0, "on", "lte"), ("discharging", 79.0, "off", "lte")]);
        let out = ingest(input.as_bytes(), &schema()).unwrap();
        assert_eq!(out.dataset.n_rows(), 0);
        assert_eq!(out.report.settings_changed_pairs, 1);
    }

    #[test]
    fn streams_do_not_mix() {
        let mut s = schema();
        s.stream = Some("device".into());
        let input = "device,timestamp,battery_state,battery_level,cpu,wifi,net\n\
                     a,0,discharging,80,0.1,on,lte\n\
                     b,10,discharging,50,0.2,on,lte\n\
                     a,60,discharging,79,0.1,on,lte\n\
                     b,70,discharging,49.9,0.2,on,lte\n";
        let out = ingest(input.as_bytes(), &s).unwrap();
        assert_eq!(out.dataset.y, vec![1, 0]);
    }

    #[test]
    fn missing_column_is_named() {
        let input = "timestamp,battery_state,cpu,wifi,net\n0,discharging,1,on,lte\n";
        match ingest(input.as_bytes(), &schema()) {
            Err(Error::MissingColumn { column }) => assert_eq!(column, "battery_level"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_cell_reports_line() {
        let input = "timestamp,battery_state,battery_level,cpu,wifi,net\n\
                     0,discharging,80,0.1,on,lte\n\
                     60,discharging,79,abc,on,lte\n";
        assert!(matches!(ingest(input.as_bytes(), &schema()), Err(Error::Row { line: 3, .. })));
    }

    #[test]
    fn ordinal_levels_follow_schema() {
        let s = Schema::new(vec![FeatureSpec {
            name: "net".into(),
            kind: FeatureKind::Categorical {
                levels: Some(vec!["wifi".into(), "lte".into()]),
                encoding: Encoding::Ordinal,
            },
            setting: false,
        }]);
        let input = "timestamp,battery_state,battery_level,net\n0,discharging,80,lte\n60,discharging,79,wifi\n";
        let out = ingest(input.as_bytes(), &s).unwrap();
        assert_eq!(out.dataset.x[[0, 0]], 1.0);
    }

    #[test]
    fn reingest_is_stable() {
        let input = csv(&[
            ("discharging", 80.0, "on", "lte"),
            ("discharging", 79.2, "on", "lte"),
            ("discharging", 77.0, "on", "lte"),
            ("discharging", 76.9, "on", "lte"),
        ]);
        let a = ingest(input.as_bytes(), &schema()).unwrap();
        let b = ingest(input.as_bytes(), &schema()).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.report.class_counts, [1, 1, 1]);
    }

    #[test]
    fn schema_json_rejects_unknown_keys() {
        let ok = r#"{"features":[{"name":"cpu","kind":"numeric"},{"name":"net","kind":"categorical","encoding":"ordinal"}]}"#;
        let s: Schema = serde_json::from_str(ok).unwrap();
        assert_eq!(s.battery_level, "battery_level");
        let bad = r#"{"features":[],"colour":"red"}"#;
        assert!(serde_json::from_str::<Schema>(bad).is_err());
        assert_eq!(Schema::greenhub().features.len(), 30);
    }
}
