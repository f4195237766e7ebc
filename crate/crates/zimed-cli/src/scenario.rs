//! Scenario resolution for the simulate subcommand: either a built-in preset
//! by name, or a plain-text file of `key = value` lines that starts from the
//! named family's preset and overrides fields.

use std::path::Path;

use thiserror::Error;
use zimed_core::simulate::{preset_by_name, Scenario, XSource};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario '{0}' is neither a preset name (zilon, zinb, zip) nor a readable file")]
    NotFound(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("scenario file never sets 'family'")]
    MissingFamily,
}

/// Resolve a `--scenario` argument.
///
/// # Errors
///
/// [`ScenarioError::NotFound`] when the argument is neither a preset nor a
/// file, and the file-format errors otherwise.
pub fn load(spec: &str) -> Result<Scenario, ScenarioError> {
    if let Some(sc) = preset_by_name(spec) {
        return Ok(sc);
    }
    let path = Path::new(spec);
    if !path.is_file() {
        return Err(ScenarioError::NotFound(spec.to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Read {
        path: spec.to_string(),
        source,
    })?;
    let name = path.file_stem().map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
    parse(&text, name)
}

/// Parse a scenario file body. Blank lines and `#` comments are skipped;
/// every other line must be `key = value`.
///
/// # Errors
///
/// [`ScenarioError::Line`] naming the offending line, or
/// [`ScenarioError::MissingFamily`].
pub fn parse(text: &str, name: String) -> Result<Scenario, ScenarioError> {
    let mut pairs = Vec::new();
    for (ix, raw) in text.lines().enumerate() {
        let line = ix + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ScenarioError::Line {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            });
        };
        pairs.push((line, key.trim().to_string(), value.trim().to_string()));
    }

    let family_value = pairs
        .iter()
        .find(|(_, key, _)| key == "family")
        .ok_or(ScenarioError::MissingFamily)?;
    let mut sc = preset_by_name(&family_value.2).ok_or_else(|| ScenarioError::Line {
        line: family_value.0,
        message: format!("unknown family '{}' (expected zilon, zinb, or zip)", family_value.2),
    })?;
    sc.name = name;

    for (line, key, value) in &pairs {
        apply(&mut sc, key, value).map_err(|message| ScenarioError::Line { line: *line, message })?;
    }
    Ok(sc)
}

fn apply(sc: &mut Scenario, key: &str, value: &str) -> Result<(), String> {
    let real = || -> Result<f64, String> {
        value.parse().map_err(|_| format!("'{value}' is not a number for '{key}'"))
    };
    let count = || -> Result<usize, String> {
        value.parse().map_err(|_| format!("'{value}' is not a positive integer for '{key}'"))
    };
    match key {
        "family" => {} // consumed when the base preset was chosen
        "n" => sc.n = count()?,
        "reps" => sc.n_reps = count()?,
        "ci_level" => {
            let v = real()?;
            if !(0.0 < v && v < 1.0) {
                return Err(format!("ci_level must be inside (0, 1), got {v}"));
            }
            sc.ci_level = v;
        }
        "x1" => sc.effect.x1 = real()?,
        "x2" => sc.effect.x2 = real()?,
        "cde_m" => sc.effect.cde_m = real()?,
        "beta0" => sc.truth.outcome.beta[0] = real()?,
        "beta1" => sc.truth.outcome.beta[1] = real()?,
        "beta2" => sc.truth.outcome.beta[2] = real()?,
        "beta3" => sc.truth.outcome.beta[3] = real()?,
        "beta4" => sc.truth.outcome.beta[4] = real()?,
        "beta5" => sc.truth.outcome.beta[5] = real()?,
        "delta" => sc.truth.outcome.delta = real()?,
        "alpha0" => sc.truth.link.alpha0 = real()?,
        "alpha1" => sc.truth.link.alpha1 = real()?,
        "gamma0" => sc.truth.link.gamma0 = real()?,
        "gamma1" => sc.truth.link.gamma1 = real()?,
        "sigma" => sc.truth.link.sigma = real()?,
        "r" => sc.truth.link.r = real()?,
        "eta" => sc.truth.eta = real()?,
        "x" => {
            let tokens: Vec<&str> = value.split_whitespace().collect();
            sc.x_source = match tokens.as_slice() {
                ["normal"] => XSource::StandardNormal,
                ["uniform", lo, hi] => {
                    let lo: f64 =
                        lo.parse().map_err(|_| format!("'{lo}' is not a number for 'x'"))?;
                    let hi: f64 =
                        hi.parse().map_err(|_| format!("'{hi}' is not a number for 'x'"))?;
                    if !(lo < hi) {
                        return Err(format!("uniform bounds must satisfy lo < hi, got {lo} {hi}"));
                    }
                    XSource::Uniform { lo, hi }
                }
                _ => {
                    return Err(format!(
                        "'{value}' is not an exposure source (use 'normal' or 'uniform LO HI')"
                    ))
                }
            };
        }
        _ => return Err(format!("unknown key '{key}'")),
    }
    Ok(())
}

/// The presets a bare name can refer to, for help text and tests.
pub fn preset_names() -> [&'static str; 3] {
    ["zilon", "zinb", "zip"]
}

#[cfg(test)]
mod tests {
    use super::*;
    use zimed_core::simulate::preset;
    use zimed_core::MediatorFamily;

    #[test]
    fn bare_names_resolve_to_presets() {
        for name in preset_names() {
            assert_eq!(load(name).unwrap().name, name);
        }
        assert!(matches!(load("zinbx"), Err(ScenarioError::NotFound(_))));
        let _ = preset(MediatorFamily::Poisson);
    }

    #[test]
    fn file_overrides_start_from_the_family_preset() {
        let text = "\
# tiny smoke scenario
family = zip
n = 120          # per replicate
reps = 4
x1 = 0.5
x2 = 1.5
eta = 0.3
x = uniform 0 2
";
        let sc = parse(text, "smoke".into()).unwrap();
        assert_eq!(sc.name, "smoke");
        assert_eq!(sc.truth.family, MediatorFamily::Poisson);
        assert_eq!(sc.n, 120);
        assert_eq!(sc.n_reps, 4);
        assert_eq!(sc.effect.x1, 0.5);
        assert_eq!(sc.truth.eta, 0.3);
        assert_eq!(sc.x_source, XSource::Uniform { lo: 0.0, hi: 2.0 });
        // untouched keys keep preset values
        assert_eq!(sc.ci_level, 0.95);
        assert_eq!(sc.effect.cde_m, preset(MediatorFamily::Poisson).effect.cde_m);
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse("family = zip\nn 300\n", "s".into()).unwrap_err();
        assert_eq!(err.to_string(), "line 2: expected 'key = value', got 'n 300'");

        let err = parse("family = zip\nnreps = 3\n", "s".into()).unwrap_err();
        assert_eq!(err.to_string(), "line 2: unknown key 'nreps'");

        let err = parse("family = zip\neta = fast\n", "s".into()).unwrap_err();
        assert_eq!(err.to_string(), "line 2: 'fast' is not a number for 'eta'");

        let err = parse("family = gamma\n", "s".into()).unwrap_err();
        assert!(err.to_string().contains("unknown family 'gamma'"), "{err}");

        assert!(matches!(parse("n = 3\n", "s".into()), Err(ScenarioError::MissingFamily)));
    }
}
