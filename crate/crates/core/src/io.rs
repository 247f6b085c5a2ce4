//! Instance files, sweep configs, trace records, and number formatting.
//!
//! Instance files are versioned JSON with unknown fields rejected, so
//! golden files cannot drift silently:
//!
//! ```json
//! {
//!   "version": 1,
//!   "boxes": [
//!     { "cost": 0.25, "dist": { "type": "discrete", "atoms": [[0.0, 0.5], [1.0, 0.5]] } },
//!     { "cost": 0.125, "dist": { "type": "pwl_cdf", "knots": [[0.0, 0.0], [1.0, 1.0]] } }
//!   ]
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::policy::Trace;
use crate::reservation::{Instance, SearchBox};
use crate::robustness::SweepConfig;

/// The only accepted instance file version.
pub const INSTANCE_FILE_VERSION: u32 = 1;

/// Significant digits used for human-facing numbers.
pub const SIG_DIGITS: i32 = 12;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    version: u32,
    boxes: Vec<InstanceFileBox>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFileBox {
    cost: f64,
    dist: Distribution,
}

/// Parse an instance from its JSON file format.
pub fn instance_from_json(text: &str) -> Result<Instance> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if file.version != INSTANCE_FILE_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {} (expected {INSTANCE_FILE_VERSION})",
            file.version
        )));
    }
    let boxes: Result<Vec<SearchBox>> = file
        .boxes
        .into_iter()
        .map(|b| SearchBox::new(b.cost, b.dist))
        .collect();
    Instance::new(boxes?)
}

/// Serialize an instance to the versioned JSON file format.
pub fn instance_to_json(inst: &Instance) -> String {
    let file = InstanceFile {
        version: INSTANCE_FILE_VERSION,
        boxes: inst
            .boxes()
            .iter()
            .map(|b| InstanceFileBox {
                cost: b.cost(),
                dist: b.dist().clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("instance serializes");
    text.push('\n');
    text
}

/// Parse a sweep configuration from JSON and validate it.
pub fn sweep_config_from_json(text: &str) -> Result<SweepConfig> {
    let config: SweepConfig =
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Format with a fixed number of significant digits in plain decimal
/// notation.
pub fn format_sig(x: f64, digits: i32) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return format!("{:.*}", (digits - 1).max(0) as usize, 0.0);
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits - 1 - magnitude).clamp(0, 30) as usize;
    format!("{:.*}", decimals, x)
}

/// One-line text record of a trace, with 1-based box indices, for golden
/// files and CLI output.
pub fn trace_record(trace: &Trace) -> String {
    let join = |xs: &[String]| {
        if xs.is_empty() {
            "-".to_string()
        } else {
            xs.join(",")
        }
    };
    let opened: Vec<String> = trace.opened.iter().map(|i| (i + 1).to_string()).collect();
    let values: Vec<String> = trace
        .values_seen
        .iter()
        .map(|v| format_sig(*v, SIG_DIGITS))
        .collect();
    let accepted = match trace.accepted {
        Some(i) => (i + 1).to_string(),
        None => "none".to_string(),
    };
    format!(
        "opened={} values={} accepted={} utility={}",
        join(&opened),
        join(&values),
        accepted,
        format_sig(trace.utility, SIG_DIGITS)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{run_policy, ThresholdPolicy};

    fn two_box_json() -> &'static str {
        r#"{
            "version": 1,
            "boxes": [
                { "cost": 0.125, "dist": { "type": "pwl_cdf", "knots": [[0.0, 0.0], [1.0, 1.0]] } },
                { "cost": 0.25, "dist": { "type": "discrete", "atoms": [[0.0, 0.5], [1.0, 0.5]] } }
            ]
        }"#
    }

    #[test]
    fn parse_serialize_round_trip() {
        let inst = instance_from_json(two_box_json()).unwrap();
        let text = instance_to_json(&inst);
        let again = instance_from_json(&text).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn rejects_unknown_fields_and_versions() {
        let unknown = r#"{"version":1,"boxes":[],"extra":true}"#;
        assert!(matches!(instance_from_json(unknown), Err(Error::Format(_))));
        let unknown_box = r#"{"version":1,"boxes":[{"cost":0.1,"costt":0.2,"dist":{"type":"discrete","atoms":[[0.5,1.0]]}}]}"#;
        let err = instance_from_json(unknown_box).unwrap_err();
        assert!(err.to_string().contains("costt"), "{err}");
        let v2 = r#"{"version":2,"boxes":[]}"#;
        assert!(matches!(instance_from_json(v2), Err(Error::Format(_))));
        let empty = r#"{"version":1,"boxes":[]}"#;
        assert!(matches!(
            instance_from_json(empty),
            Err(Error::EmptyInstance)
        ));
    }

    #[test]
    fn format_sig_pins_significant_digits() {
        assert_eq!(format_sig(0.5, 12), "0.500000000000");
        assert_eq!(format_sig(1.0, 12), "1.00000000000");
        assert_eq!(format_sig(-0.05, 12), "-0.0500000000000");
        assert_eq!(format_sig(0.0, 12), "0.00000000000");
        assert_eq!(format_sig(0.7000000000000001, 12), "0.700000000000");
    }

    #[test]
    fn trace_record_uses_one_based_indices() {
        let policy = ThresholdPolicy::new(vec![0.8, 0.5]).unwrap();
        let trace = run_policy(&policy, &[0.1, 0.1], &[0.3, 0.9]).unwrap();
        assert_eq!(
            trace_record(&trace),
            "opened=1,2 values=0.300000000000,0.900000000000 accepted=2 utility=0.700000000000"
        );
        let empty = run_policy(&ThresholdPolicy::new(vec![-0.1]).unwrap(), &[0.3], &[0.9]).unwrap();
        assert_eq!(
            trace_record(&empty),
            "opened=- values=- accepted=none utility=0.00000000000"
        );
    }

    #[test]
    fn sweep_config_parses_and_validates() {
        let good = r#"{
            "n_values": [1, 2],
            "epsilon_values": [0.05],
            "instances_per_cell": 3,
            "modes": ["shift_down", "random_mix"],
            "seed": 42,
            "instance_family": "random_discrete"
        }"#;
        let config = sweep_config_from_json(good).unwrap();
        assert_eq!(config.n_values, vec![1, 2]);
        let bad = r#"{
            "n_values": [],
            "epsilon_values": [0.05],
            "instances_per_cell": 3,
            "modes": ["shift_down"],
            "seed": 42,
            "instance_family": "random_discrete"
        }"#;
        assert!(sweep_config_from_json(bad).is_err());
    }
}
