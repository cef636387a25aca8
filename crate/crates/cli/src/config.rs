//! Run configuration: `key = value` files and the equivalent command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use resolvent_lab::{Error, Result};
use serde::Serialize;

use crate::suites::{Suite, TOLERANCES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Specfun,
    ConeKernel,
    Solve,
    ZeroModes,
    Expand,
    RieszSweep,
    Verify,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Specfun,
        Command::ConeKernel,
        Command::Solve,
        Command::ZeroModes,
        Command::Expand,
        Command::RieszSweep,
        Command::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Specfun => "specfun",
            Command::ConeKernel => "cone-kernel",
            Command::Solve => "solve",
            Command::ZeroModes => "zero-modes",
            Command::Expand => "expand",
            Command::RieszSweep => "riesz-sweep",
            Command::Verify => "verify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// Numeric parameters of the single-problem commands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    /// Bessel orders for `specfun`.
    pub nu: Vec<f64>,
    /// Bessel arguments for `specfun`.
    pub z: Vec<f64>,
    pub k: f64,
    pub r: f64,
    pub r_p: f64,
    pub cos_theta: f64,
    pub j_max: u32,
    /// Angular mode of a Riesz sweep; defaults to the kernel mode.
    pub mode: Option<u32>,
    /// Number of generic direction pairs for `expand`.
    pub directions: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub r_points: usize,
    /// Exponents of a Riesz sweep; defaults to one inside and one beyond each threshold.
    pub p: Vec<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            nu: vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0],
            z: vec![1e-3, 0.1, 1.0, 10.0],
            k: 0.1,
            r: 0.5,
            r_p: 1.5,
            cos_theta: 0.3,
            j_max: 3,
            mode: None,
            directions: 3,
            r_min: 10.0,
            r_max: 1000.0,
            r_points: 5,
            p: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub problem_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Overrides of the named tolerances; every report repeats them.
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    /// Suites run by `verify`, in dependency order.
    pub suites: Vec<Suite>,
    pub params: Params,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            problem_path: None,
            output_dir: PathBuf::from("reslab-out"),
            tolerances: BTreeMap::new(),
            seed: 0,
            suites: Vec::new(),
            params: Params::default(),
        }
    }

    /// Apply one `key = value` setting. Used by both the file parser and the
    /// command-line flags, so both accept exactly the same keys.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let num = |v: &str| -> std::result::Result<f64, String> {
            let x: f64 = v.parse().map_err(|_| format!("`{key}`: `{v}` is not a number"))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(format!("`{key}`: non-finite value"))
            }
        };
        let list = |v: &str| -> std::result::Result<Vec<f64>, String> {
            v.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(num).collect()
        };
        let nat = |v: &str| -> std::result::Result<u64, String> {
            v.parse().map_err(|_| format!("`{key}`: `{v}` is not a natural number"))
        };
        let positive = |x: f64| if x > 0.0 { Ok(x) } else { Err(format!("`{key}` must be positive, got {x}")) };
        if let Some(name) = key.strip_prefix("tol.") {
            if !TOLERANCES.iter().any(|t| t.key == name) {
                return Err(format!("unknown tolerance `{name}`"));
            }
            let t = num(value)?;
            if !(t > 0.0 && t < 1.0) {
                return Err(format!("tolerance `{name}` = {t} outside (0, 1)"));
            }
            self.tolerances.insert(name.to_string(), t);
            return Ok(());
        }
        let p = &mut self.params;
        match key {
            "command" => self.command = value.parse()?,
            "problem" => self.problem_path = Some(PathBuf::from(value)),
            "output" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = nat(value)?,
            "suite" => {
                for name in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    if name == "all" {
                        self.suites = Suite::ALL.to_vec();
                    } else {
                        let s: Suite = name.parse()?;
                        if !self.suites.contains(&s) {
                            self.suites.push(s);
                        }
                    }
                }
                self.suites.sort();
            }
            "nu" => p.nu = list(value)?,
            "z" => p.z = list(value)?.into_iter().map(positive).collect::<std::result::Result<_, _>>()?,
            "k" => p.k = positive(num(value)?)?,
            "r" => p.r = positive(num(value)?)?,
            "r_p" => p.r_p = positive(num(value)?)?,
            "cos_theta" => {
                p.cos_theta = num(value)?;
                if p.cos_theta.abs() > 1.0 {
                    return Err(format!("cos_theta = {} outside [-1, 1]", p.cos_theta));
                }
            }
            "j_max" => p.j_max = nat(value)? as u32,
            "mode" => p.mode = Some(nat(value)? as u32),
            "directions" => p.directions = nat(value)?.max(1) as usize,
            "r_min" => p.r_min = positive(num(value)?)?,
            "r_max" => p.r_max = positive(num(value)?)?,
            "r_points" => p.r_points = nat(value)? as usize,
            "p" => p.p = list(value)?.into_iter().map(positive).collect::<std::result::Result<_, _>>()?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let p = &self.params;
        if p.r_min >= p.r_max {
            return Err(format!("r_min = {} must be below r_max = {}", p.r_min, p.r_max));
        }
        if self.command == Command::Verify && self.suites.is_empty() {
            return Err("verify needs at least one suite (`suite = <name>` or `suite = all`)".into());
        }
        if self.command != Command::Verify && !self.suites.is_empty() {
            return Err(format!("suites only apply to verify, not {}", self.command));
        }
        Ok(())
    }
}

/// Parse a run file. The first error is reported with its line number; line 0
/// stands for a whole-file problem such as a missing `command`.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(Command::Verify);
    let mut have_command = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, msg: format!("expected `key = value`, found `{body}`") })?;
        let key = key.trim();
        cfg.set(key, value.trim()).map_err(|msg| Error::Parse { line, msg })?;
        have_command |= key == "command";
    }
    if !have_command {
        return Err(Error::Parse { line: 0, msg: "missing `command`".into() });
    }
    cfg.validate().map_err(|msg| Error::Parse { line: 0, msg })?;
    Ok(cfg)
}

/// Build a configuration from command-line `key=value` settings.
pub fn from_settings(command: Command, settings: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(command);
    for (k, v) in settings {
        cfg.set(k, v).map_err(|msg| Error::Syntax(format!("{k}={v}: {msg}")))?;
    }
    cfg.validate().map_err(Error::Syntax)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config("command = zero-modes\n").unwrap();
        assert_eq!(c.command, Command::ZeroModes);
        assert_eq!(c.seed, 0);
        assert!(c.tolerances.is_empty());
        assert_eq!(c.output_dir, PathBuf::from("reslab-out"));
        assert_eq!(c.params, Params::default());
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let e = parse_config("command = solve\n\nfoo = 1\n").unwrap_err();
        assert_eq!(e, Error::Parse { line: 3, msg: "unknown key `foo`".into() });
        assert!(e.to_string().contains("foo") && e.to_string().contains("line 3"));
    }

    #[test]
    fn tolerance_out_of_range() {
        for bad in ["0", "1", "1.5", "-1e-3"] {
            let e = parse_config(&format!("command = verify\nsuite = projector\ntol.projector = {bad}\n")).unwrap_err();
            match e {
                Error::Parse { line: 3, msg } => assert!(msg.contains("outside (0, 1)"), "{msg}"),
                other => panic!("{other:?}"),
            }
        }
        let e = parse_config("command = verify\nsuite = projector\ntol.nope = 0.1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        let ok = parse_config("command = verify\nsuite = projector\ntol.projector = 2e-3\n").unwrap();
        assert_eq!(ok.tolerances["projector"], 2e-3);
    }

    #[test]
    fn suites_sorted_and_deduplicated() {
        let c = parse_config("command = verify\nsuite = rb0, lemma-comp\nsuite = rb0\n").unwrap();
        assert_eq!(c.suites, vec![Suite::LemmaComp, Suite::Rb0]);
        assert_eq!(parse_config("command = verify\nsuite = all").unwrap().suites.len(), 13);
        assert!(matches!(parse_config("command = verify\n"), Err(Error::Parse { line: 0, .. })));
        assert!(matches!(parse_config("command = verify\nsuite = bogus\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn other_errors() {
        assert!(matches!(parse_config("seed = 3\n"), Err(Error::Parse { line: 0, .. })));
        assert!(matches!(parse_config("command = solve\nseed = -3\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("command = solve\njust words\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("command = frobnicate\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("command = solve\nr_min = 5\nr_max = 2\n"), Err(Error::Parse { line: 0, .. })));
        assert!(matches!(parse_config("command = solve\ncos_theta = 2\n"), Err(Error::Parse { line: 2, .. })));
    }
}
