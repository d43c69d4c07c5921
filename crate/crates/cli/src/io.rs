use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sigdesign::epbe::SubgameEquilibrium;
use sigdesign::market::MarketParams;
use sigdesign::monitoring::PolicyProfile;
use sigdesign::outer::EquilibriumOutcome;

use crate::error::{CliError, CliResult};

pub fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::input(format!("--{flag} is required")))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn parse_value<T: DeserializeOwned>(value: Value, path: &Path) -> CliResult<T> {
    serde_json::from_value(value).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn load_params(path: &Path) -> CliResult<MarketParams> {
    let params: MarketParams = load_json(path)?;
    params.validate()?;
    Ok(params)
}

/// Contents of a `--profile` file.
pub enum ProfileInput {
    Profile(PolicyProfile),
    Bundle {
        profile: PolicyProfile,
        equilibrium: SubgameEquilibrium,
    },
}

impl ProfileInput {
    pub fn profile(&self) -> &PolicyProfile {
        match self {
            ProfileInput::Profile(p) | ProfileInput::Bundle { profile: p, .. } => p,
        }
    }
}

/// Accepts a policy array, a `{"profile", "equilibrium"}` bundle (profile
/// optional) or an equilibrium outcome.
pub fn load_profile_input(path: &Path) -> CliResult<ProfileInput> {
    let value: Value = load_json(path)?;
    match &value {
        Value::Array(_) => Ok(ProfileInput::Profile(parse_value(value, path)?)),
        Value::Object(map) if map.contains_key("equilibrium") => {
            let mut map = map.clone();
            let equilibrium: SubgameEquilibrium = parse_value(map.remove("equilibrium").unwrap_or_default(), path)?;
            let profile = match map.remove("profile") {
                Some(p) => parse_value(p, path)?,
                None => equilibrium.profile.clone(),
            };
            Ok(ProfileInput::Bundle { profile, equilibrium })
        }
        Value::Object(map) if map.contains_key("on_path") => {
            let o: EquilibriumOutcome = parse_value(value, path)?;
            Ok(ProfileInput::Bundle {
                profile: o.profile.clone(),
                equilibrium: o.subgame(),
            })
        }
        Value::Object(map) if map.contains_key("profile") => {
            Ok(ProfileInput::Profile(parse_value(map["profile"].clone(), path)?))
        }
        _ => Err(CliError::input(format!(
            "{}: expected a policy array, an object with `equilibrium`, or an equilibrium outcome",
            path.display()
        ))),
    }
}

pub fn emit_bytes(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::input(format!("stdout: {e}"))),
    }
}

pub fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    text.push('\n');
    emit_bytes(out, text.as_bytes())
}
