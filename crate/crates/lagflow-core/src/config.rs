//! Experiment configuration: a small INI-style format with four sections.
//!
//! ```text
//! [flow]
//! tau = 1.5707963267948966
//! spacing = 0.03125
//! cfl = 0.9            # optional, default 0.5
//! tol_c = 1e-8
//! tol_bc = 1e-10
//! t_max = 100
//! record_every = 10
//! kappa = 0.0,0.0      # forcing f(x) = kappa . x
//! initial = quadratic  # or file:path/to/state.txt
//! seed = 0
//! threads = 1
//!
//! [omega]
//! kind = disc
//! center = 0.0,0.0
//! radius = 1.0
//!
//! [omega_tilde]
//! kind = ellipse
//! center = 0.0,0.0
//! semi_axes = 2.0,1.0
//!
//! [output]
//! dir = out
//! ```
//!
//! `#` and `;` start comments.  Unknown sections or keys are errors so that
//! typos surface instead of silently running with defaults.  The canonical
//! serialisation (`to_text`) round-trips exactly through `parse_config`.

use crate::domains::ConvexDomain;
use crate::forcing::ForcingFunction;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key '{key}' in section [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("missing required key '{key}' in section [{section}]")]
    MissingKey {
        section: &'static str,
        key: &'static str,
    },
    #[error("bad value for '{key}': {msg}")]
    BadValue { key: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialData {
    Quadratic,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub tau: f64,
    pub spacing: f64,
    pub cfl: f64,
    pub tol_c: f64,
    pub tol_bc: f64,
    pub t_max: f64,
    pub record_every: usize,
    pub kappa: [f64; 2],
    pub initial: InitialData,
    pub seed: u64,
    pub threads: usize,
    pub omega: ConvexDomain,
    pub omega_tilde: ConvexDomain,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn forcing(&self) -> ForcingFunction {
        if self.kappa == [0.0, 0.0] {
            ForcingFunction::Zero
        } else {
            ForcingFunction::Linear { kappa: self.kappa }
        }
    }

    /// Canonical serialisation; `parse_config(cfg.to_text()) == cfg`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("[flow]\n");
        s.push_str(&format!("tau = {}\n", self.tau));
        s.push_str(&format!("spacing = {}\n", self.spacing));
        s.push_str(&format!("cfl = {}\n", self.cfl));
        s.push_str(&format!("tol_c = {}\n", self.tol_c));
        s.push_str(&format!("tol_bc = {}\n", self.tol_bc));
        s.push_str(&format!("t_max = {}\n", self.t_max));
        s.push_str(&format!("record_every = {}\n", self.record_every));
        s.push_str(&format!("kappa = {},{}\n", self.kappa[0], self.kappa[1]));
        match &self.initial {
            InitialData::Quadratic => s.push_str("initial = quadratic\n"),
            InitialData::File(p) => s.push_str(&format!("initial = file:{}\n", p.display())),
        }
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("threads = {}\n", self.threads));
        for (name, dom) in [("omega", &self.omega), ("omega_tilde", &self.omega_tilde)] {
            s.push_str(&format!("\n[{name}]\n"));
            match dom {
                ConvexDomain::Disc { center, radius } => {
                    s.push_str("kind = disc\n");
                    s.push_str(&format!("center = {},{}\n", center[0], center[1]));
                    s.push_str(&format!("radius = {radius}\n"));
                }
                ConvexDomain::AxisEllipse { center, semi_axes } => {
                    s.push_str("kind = ellipse\n");
                    s.push_str(&format!("center = {},{}\n", center[0], center[1]));
                    s.push_str(&format!("semi_axes = {},{}\n", semi_axes[0], semi_axes[1]));
                }
            }
        }
        s.push_str("\n[output]\n");
        s.push_str(&format!("dir = {}\n", self.output_dir.display()));
        s
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse().map_err(|e| ConfigError::BadValue {
        key: key.to_string(),
        msg: format!("{v:?} is not a number: {e}"),
    })
}

fn parse_pair(key: &str, v: &str) -> Result<[f64; 2], ConfigError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(ConfigError::BadValue {
            key: key.to_string(),
            msg: format!("expected 'a,b', got {v:?}"),
        });
    }
    Ok([parse_f64(key, parts[0])?, parse_f64(key, parts[1])?])
}

#[derive(Default)]
struct DomainBuilder {
    kind: Option<String>,
    center: Option<[f64; 2]>,
    radius: Option<f64>,
    semi_axes: Option<[f64; 2]>,
}

impl DomainBuilder {
    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "kind" => self.kind = Some(value.to_string()),
            "center" => self.center = Some(parse_pair(key, value)?),
            "radius" => self.radius = Some(parse_f64(key, value)?),
            "semi_axes" => self.semi_axes = Some(parse_pair(key, value)?),
            _ => {
                return Err(ConfigError::UnknownKey {
                    section: section.to_string(),
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    fn finish(self, section: &'static str) -> Result<ConvexDomain, ConfigError> {
        let kind = self.kind.ok_or(ConfigError::MissingKey {
            section,
            key: "kind",
        })?;
        let center = self.center.unwrap_or([0.0, 0.0]);
        let bad = |msg: String| ConfigError::BadValue {
            key: format!("{section}.kind"),
            msg,
        };
        match kind.as_str() {
            "disc" => {
                let r = self.radius.ok_or(ConfigError::MissingKey {
                    section,
                    key: "radius",
                })?;
                if self.semi_axes.is_some() {
                    return Err(bad("disc does not take semi_axes".into()));
                }
                ConvexDomain::disc(center, r).map_err(|e| bad(e.to_string()))
            }
            "ellipse" => {
                let ax = self.semi_axes.ok_or(ConfigError::MissingKey {
                    section,
                    key: "semi_axes",
                })?;
                if self.radius.is_some() {
                    return Err(bad("ellipse does not take radius".into()));
                }
                ConvexDomain::ellipse(center, ax).map_err(|e| bad(e.to_string()))
            }
            other => Err(bad(format!("unknown domain kind {other:?}"))),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut section = String::new();
    let mut tau = None;
    let mut spacing = None;
    let mut cfl = 0.5f64;
    let mut tol_c = 1e-8f64;
    let mut tol_bc = 1e-10f64;
    let mut t_max = 100.0f64;
    let mut record_every = 10usize;
    let mut kappa = [0.0, 0.0];
    let mut initial = InitialData::Quadratic;
    let mut seed = 0u64;
    let mut threads = 1usize;
    let mut omega = DomainBuilder::default();
    let mut omega_tilde = DomainBuilder::default();
    let mut omega_seen = false;
    let mut omega_tilde_seen = false;
    let mut output_dir = PathBuf::from("out");

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = match raw.find(['#', ';']) {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(ConfigError::Syntax {
                line: line_no,
                msg: format!("unterminated section header {line:?}"),
            })?;
            match name {
                "flow" | "omega" | "omega_tilde" | "output" => {
                    section = name.to_string();
                    if name == "omega" {
                        omega_seen = true;
                    }
                    if name == "omega_tilde" {
                        omega_tilde_seen = true;
                    }
                }
                other => return Err(ConfigError::UnknownSection(other.to_string())),
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
            line: line_no,
            msg: format!("expected 'key = value', got {line:?}"),
        })?;
        let key = key.trim();
        let value = value.trim();
        match section.as_str() {
            "flow" => match key {
                "tau" => tau = Some(parse_f64(key, value)?),
                "spacing" => spacing = Some(parse_f64(key, value)?),
                "cfl" => cfl = parse_f64(key, value)?,
                "tol_c" => tol_c = parse_f64(key, value)?,
                "tol_bc" => tol_bc = parse_f64(key, value)?,
                "t_max" => t_max = parse_f64(key, value)?,
                "record_every" => {
                    record_every = value.parse().map_err(|e| ConfigError::BadValue {
                        key: key.to_string(),
                        msg: format!("{value:?}: {e}"),
                    })?
                }
                "kappa" => kappa = parse_pair(key, value)?,
                "initial" => {
                    initial = if value == "quadratic" {
                        InitialData::Quadratic
                    } else if let Some(path) = value.strip_prefix("file:") {
                        InitialData::File(PathBuf::from(path))
                    } else {
                        return Err(ConfigError::BadValue {
                            key: key.to_string(),
                            msg: format!("expected 'quadratic' or 'file:<path>', got {value:?}"),
                        });
                    }
                }
                "seed" => {
                    seed = value.parse().map_err(|e| ConfigError::BadValue {
                        key: key.to_string(),
                        msg: format!("{value:?}: {e}"),
                    })?
                }
                "threads" => {
                    threads = value.parse().map_err(|e| ConfigError::BadValue {
                        key: key.to_string(),
                        msg: format!("{value:?}: {e}"),
                    })?
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        section: section.clone(),
                        key: key.to_string(),
                    })
                }
            },
            "omega" => omega.set("omega", key, value)?,
            "omega_tilde" => omega_tilde.set("omega_tilde", key, value)?,
            "output" => match key {
                "dir" => output_dir = PathBuf::from(value),
                _ => {
                    return Err(ConfigError::UnknownKey {
                        section: section.clone(),
                        key: key.to_string(),
                    })
                }
            },
            _ => {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: "key outside any section".to_string(),
                })
            }
        }
    }

    let tau = tau.ok_or(ConfigError::MissingKey {
        section: "flow",
        key: "tau",
    })?;
    let spacing = spacing.ok_or(ConfigError::MissingKey {
        section: "flow",
        key: "spacing",
    })?;
    if !omega_seen {
        return Err(ConfigError::MissingKey {
            section: "omega",
            key: "kind",
        });
    }
    if !omega_tilde_seen {
        return Err(ConfigError::MissingKey {
            section: "omega_tilde",
            key: "kind",
        });
    }
    Ok(ExperimentConfig {
        tau,
        spacing,
        cfl,
        tol_c,
        tol_bc,
        t_max,
        record_every,
        kappa,
        initial,
        seed,
        threads,
        omega: omega.finish("omega")?,
        omega_tilde: omega_tilde.finish("omega_tilde")?,
        output_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
# a comment
[flow]
tau = 0.7853981633974483
spacing = 0.0625
cfl = 0.9           ; trailing comment
tol_c = 1e-6
kappa = 0.01,0.0

[omega]
kind = disc
center = 0.0,0.0
radius = 1.0

[omega_tilde]
kind = ellipse
center = 0.5,-0.25
semi_axes = 2.0,1.0

[output]
dir = results/run1
"#;

    #[test]
    fn parses_sample_with_defaults() {
        let cfg = parse_config(SAMPLE).unwrap();
        assert_eq!(cfg.tau, std::f64::consts::FRAC_PI_4);
        assert_eq!(cfg.spacing, 0.0625);
        assert_eq!(cfg.cfl, 0.9);
        assert_eq!(cfg.tol_c, 1e-6);
        assert_eq!(cfg.tol_bc, 1e-10); // default
        assert_eq!(cfg.t_max, 100.0); // default
        assert_eq!(cfg.record_every, 10); // default
        assert_eq!(cfg.kappa, [0.01, 0.0]);
        assert_eq!(cfg.initial, InitialData::Quadratic);
        assert_eq!(cfg.threads, 1);
        assert_eq!(
            cfg.omega,
            ConvexDomain::disc([0.0, 0.0], 1.0).unwrap()
        );
        assert_eq!(
            cfg.omega_tilde,
            ConvexDomain::ellipse([0.5, -0.25], [2.0, 1.0]).unwrap()
        );
        assert_eq!(cfg.output_dir, PathBuf::from("results/run1"));
        assert!(matches!(
            cfg.forcing(),
            crate::forcing::ForcingFunction::Linear { .. }
        ));
    }

    #[test]
    fn canonical_text_roundtrips() {
        let cfg = parse_config(SAMPLE).unwrap();
        let text = cfg.to_text();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);

        // Also with a file-based initial state.
        let mut cfg2 = cfg;
        cfg2.initial = InitialData::File(PathBuf::from("states/u0.txt"));
        cfg2.seed = 42;
        cfg2.threads = 4;
        let back2 = parse_config(&cfg2.to_text()).unwrap();
        assert_eq!(back2, cfg2);
    }

    #[test]
    fn missing_required_keys_are_reported() {
        assert!(matches!(
            parse_config("[flow]\nspacing = 0.1\n[omega]\nkind = disc\nradius = 1\n[omega_tilde]\nkind = disc\nradius = 1\n"),
            Err(ConfigError::MissingKey { key: "tau", .. })
        ));
        assert!(matches!(
            parse_config("[flow]\ntau = 1.0\nspacing = 0.1\n"),
            Err(ConfigError::MissingKey { .. })
        ));
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(matches!(
            parse_config("[flow]\ntau = 1\nspacin = 0.1\n"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            parse_config("[florb]\n"),
            Err(ConfigError::UnknownSection(_))
        ));
    }

    #[test]
    fn bad_values_are_rejected() {
        let base = "[omega]\nkind = disc\nradius = 1\n[omega_tilde]\nkind = disc\nradius = 1\n";
        assert!(matches!(
            parse_config(&format!("[flow]\ntau = abc\nspacing = 0.1\n{base}")),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            parse_config(&format!("[flow]\ntau = 1\nspacing = 0.1\nkappa = 1.0\n{base}")),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            parse_config(&format!("[flow]\ntau = 1\nspacing = 0.1\ninitial = maybe\n{base}")),
            Err(ConfigError::BadValue { .. })
        ));
        // Negative radius caught through the domain constructor.
        assert!(matches!(
            parse_config(
                "[flow]\ntau = 1\nspacing = 0.1\n[omega]\nkind = disc\nradius = -1\n[omega_tilde]\nkind = disc\nradius = 1\n"
            ),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn domain_kind_mismatched_keys_are_rejected() {
        assert!(matches!(
            parse_config(
                "[flow]\ntau = 1\nspacing = 0.1\n[omega]\nkind = disc\nradius = 1\nsemi_axes = 1,2\n[omega_tilde]\nkind = disc\nradius = 1\n"
            ),
            Err(ConfigError::BadValue { .. })
        ));
    }
}
