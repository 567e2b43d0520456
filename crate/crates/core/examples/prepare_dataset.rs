//! Turns a raw battery trace into a labelled dataset.
//!
//! Run with `cargo run --example prepare_dataset`.

use neuroenergy::data::{ingest, FeatureSpec, Schema};

const TRACE: &str = "\
timestamp,battery_state,battery_level,cpu_usage,wifi_enabled
0,discharging,91,0.21,true
60,discharging,91,0.18,true
120,discharging,90,0.35,true
180,discharging,88,0.80,true
240,charging,89,0.10,true
300,charging,92,0.12,true
360,discharging,92,0.40,true
420,discharging,91,0.44,true
480,discharging,91,0.47,false
540,discharging,90,0.52,false
";

fn main() -> neuroenergy::Result<()> {
    let schema = Schema::new(vec![FeatureSpec::numeric("cpu_usage"), FeatureSpec::boolean_setting("wifi_enabled")]);
    let out = ingest(TRACE.as_bytes(), &schema)?;

    println!("{:#?}", out.report);
    println!("features: {:?}", out.dataset.feature_names);
    for (row, class) in out.dataset.x.rows().into_iter().zip(&out.dataset.y) {
        println!("{row} -> class {class}");
    }
    Ok(())
}
