use std::path::Path;

use super::CliError;
use crate::panel_synth::ScenarioConfig;

/// Reads and validates a JSON scenario.
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_named(&text, &path.display().to_string())
}

pub fn parse_scenario_str(text: &str) -> Result<ScenarioConfig, CliError> {
    parse_named(text, "<scenario>")
}

fn parse_named(text: &str, name: &str) -> Result<ScenarioConfig, CliError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn scenario_to_json(cfg: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("scenario serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_synth::fixtures::config;

    #[test]
    fn round_trip() {
        let cfg = config((0.2, 0.4, 0.6), 10);
        let text = scenario_to_json(&cfg);
        let back = parse_scenario_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(scenario_to_json(&back), text);
    }

    #[test]
    fn decreasing_path_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&scenario_to_json(&config((0.2, 0.4, 0.6), 10))).unwrap();
        v["markets"][1]["a_path"]["a_post35"] = 0.1.into();
        let e = parse_scenario_str(&v.to_string()).unwrap_err();
        assert!(e.to_string().contains("a_path nondecreasing"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn boundary_violation_at_parse_time() {
        let mut v: serde_json::Value = serde_json::from_str(&scenario_to_json(&config((0.2, 0.4, 0.6), 10))).unwrap();
        v["markets"][1]["market"]["potential"]["kappa"] = 0.4.into();
        v["markets"][1]["market"]["potential"]["s0"] = 3.0.into();
        let e = parse_scenario_str(&v.to_string()).unwrap_err();
        assert!(e.to_string().contains("boundary-violation"), "{e}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let e = parse_scenario_str("{\n  \"markets\": [,]\n}").unwrap_err();
        match e {
            CliError::Parse { line, column, .. } => assert_eq!((line, column), (2, 15)),
            other => panic!("{other:?}"),
        }
        let missing = parse_scenario_str("{\"markets\": []}").unwrap_err();
        assert!(missing.to_string().contains("control_market_id"), "{missing}");
    }

    #[test]
    fn missing_file() {
        let e = parse_scenario(Path::new("/nonexistent/scenario.json")).unwrap_err();
        assert!(matches!(e, CliError::Io { .. }));
    }
}
