//! Flat `key = value` configuration with per-command key tables.
//!
//! Resolution order is defaults, then the config file, then command-line flags; the last
//! writer wins. Every key a command reads is declared in its table with a default, so the
//! resolved map is the complete run configuration.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    /// `None` marks a required key.
    pub default: Option<&'static str>,
    pub doc: &'static str,
}

const fn key(name: &'static str, default: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { name, default: Some(default), doc }
}

const fn required(name: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { name, default: None, doc }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    VerifyVariations,
    MuPlus,
    Lambda,
    NuCsc,
    Classify,
    CpnCertificate,
    Flow,
    HomothetyCheck,
    LojasiewiczFit,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::VerifyVariations,
        Command::MuPlus,
        Command::Lambda,
        Command::NuCsc,
        Command::Classify,
        Command::CpnCertificate,
        Command::Flow,
        Command::HomothetyCheck,
        Command::LojasiewiczFit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyVariations => "verify-variations",
            Command::MuPlus => "mu-plus",
            Command::Lambda => "lambda",
            Command::NuCsc => "nu-csc",
            Command::Classify => "classify",
            Command::CpnCertificate => "cpn-certificate",
            Command::Flow => "flow",
            Command::HomothetyCheck => "homothety-check",
            Command::LojasiewiczFit => "lojasiewicz-fit",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::VerifyVariations => "Check analytic first variations against finite differences on random inputs",
            Command::MuPlus => "Solve for the expander entropy and its minimizer on a grid torus",
            Command::Lambda => "Lowest eigenvalue of -4 Laplacian + scal on a grid torus",
            Command::NuCsc => "Shrinker entropy of a constant scalar curvature metric",
            Command::Classify => "Stability verdict for a catalog model space",
            Command::CpnCertificate => "Exact third-variation certificate on complex projective space",
            Command::Flow => "Run a Ricci-type flow with entropy monitors",
            Command::HomothetyCheck => "Compare the rescaled standard flow with the normalized flow",
            Command::LojasiewiczFit => "Fit a gradient-inequality exponent to a diagnostics trace",
        }
    }

    pub fn from_name(name: &str) -> CliResult<Command> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| CliError::UnknownCommand(name.to_string()))
    }

    /// Whether every output is computed in exact arithmetic.
    pub fn is_exact(self) -> bool {
        matches!(self, Command::Classify | Command::CpnCertificate)
    }

    pub fn keys(self) -> Vec<KeySpec> {
        let mut out = Vec::new();
        match self {
            Command::VerifyVariations => {
                out.extend(grid_keys("3", "24", "random", "0.2"));
                out.extend([
                    key("samples", "20", "number of random (g, h, f) triples"),
                    key("field-modes", "1", "highest Fourier mode of the sampled h and f"),
                    key("rel-step", "1e-2", "base finite-difference step relative to |g| / |h|"),
                    key("tol", "1e-5", "maximum relative error after extrapolation"),
                    key("min-order", "3", "minimum measured convergence order"),
                ]);
            }
            Command::MuPlus => {
                out.extend(grid_keys("3", "16", "flat", "0"));
                out.extend([
                    key("el-tol", "1e-9", "required Euler-Lagrange residual"),
                    key("target-tol", "1e-12", "residual at which Newton stops early"),
                    key("max-newton", "60", "Newton iteration cap"),
                    key("warm-start", "10", "preconditioned gradient iterations before Newton"),
                    key("positivity-floor", "1e-12", "smallest admissible value of w = e^{-f/2}"),
                    key("inner-tol", "1e-13", "relative tolerance of the inner linear solves"),
                    key("csc-tol", "1e-8", "scalar curvature oscillation below which the closed form is reported"),
                ]);
            }
            Command::Lambda => {
                out.extend(grid_keys("3", "16", "flat", "0"));
                out.extend(eigen_keys());
            }
            Command::NuCsc => {
                out.push(key("model", "grid", "catalog model name, or `grid` for a grid torus metric"));
                out.extend(grid_keys("3", "16", "flat", "0"));
                out.extend([
                    key("csc-tol", "1e-8", "allowed scalar curvature oscillation on a grid metric"),
                    key("scales", "0.5,1,2,10", "homothety factors for the scale-invariance check"),
                ]);
            }
            Command::Classify => {
                out.extend([
                    required("model", "catalog model name, e.g. cp2, s2xs2, product-einstein, quadric5"),
                    key("witness", "auto", "`auto`, `none`, or an exact cubic witness p/q"),
                ]);
            }
            Command::CpnCertificate => {
                out.push(key("n", "2", "complex dimension"));
            }
            Command::Flow => {
                out.extend(grid_keys("3", "12", "conformal", "0.01"));
                out.extend(flow_keys("1"));
                out.extend([
                    key("kind", "standard", "`standard`, `negative-normalized` or `tau`"),
                    key("monitor-every", "10", "steps between entropy monitors"),
                    key("monitor-mu-plus", "true", "solve for mu_+ at monitor points"),
                    key("monitor-lambda", "false", "solve for lambda at monitor points"),
                    key("metric-floor", "1e-6", "smallest admissible metric eigenvalue"),
                    key("cfl", "0.1", "CFL constant a fixed dt must respect"),
                    key("monotonicity-tol", "1e-8", "allowed decrease of the monitored entropy"),
                ]);
            }
            Command::HomothetyCheck => {
                out.extend(grid_keys("2", "8", "conformal", "0.1"));
                out.extend(flow_keys("0.3"));
            }
            Command::LojasiewiczFit => {
                out.extend([
                    required("trace", "diagnostics CSV written by `flow`"),
                    key("functional", "lambda", "`lambda` or `mu-plus`"),
                    key("reference", "last", "limit value, or `last` for the final sample"),
                    key("residual-threshold", "0.05", "maximum RMS residual of the log-log fit"),
                    key("eta", "0", "exponent loss in theta = 1 - sigma (1 + eta)"),
                    key("window-start", "none", "earliest sample time used"),
                    key("window-end", "none", "latest sample time used"),
                    key("gap-floor", "1e-13", "gaps at or below this are treated as converged"),
                    key("min-points", "5", "minimum number of usable samples"),
                ]);
            }
        }
        out
    }
}

fn grid_keys(dim: &'static str, n: &'static str, metric: &'static str, amp: &'static str) -> [KeySpec; 10] {
    [
        key("torus", dim, "torus dimension"),
        key("N", n, "grid points per axis"),
        key("L", "6.283185307179586", "side length of the periodic box"),
        key("stencil", "4", "finite-difference order: 2, 4, 6 or 8"),
        key("metric", metric, "`flat`, `conformal` (e^{2u} times flat) or `random`"),
        key("amplitude", amp, "conformal factor amplitude, or random perturbation size"),
        key("mode", "1", "Fourier mode of the conformal factor, or highest random mode"),
        key("seed", "0", "random seed"),
        key("init-metric", "none", "metric field container overriding the generated metric"),
        key("write-fields", "true", "write field containers into the output directory"),
    ]
}

fn eigen_keys() -> [KeySpec; 3] {
    [
        key("eig-tol", "1e-10", "eigenpair residual tolerance"),
        key("max-krylov", "80", "Krylov subspace cap"),
        key("inner-tol", "1e-13", "relative tolerance of the inner linear solves"),
    ]
}

fn flow_keys(t_final: &'static str) -> [KeySpec; 4] {
    [
        key("gauge", "none", "`none` or `deturck` against the flat chart metric"),
        key("T", t_final, "final time"),
        key("dt", "cfl", "fixed step, or `cfl` for the stability-limited step"),
        key("stride", "10", "steps between stored snapshots"),
    ]
}

/// Where a resolved value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    File { line: usize },
    Flag,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub command: Command,
    values: BTreeMap<String, (String, Source)>,
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_file(text: &str) -> CliResult<Vec<(String, String, usize)>> {
    let mut out: Vec<(String, String, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(CliError::ConfigInvalid {
                key: body.to_string(),
                line: Some(line),
                message: "expected `key = value`".into(),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(CliError::ConfigInvalid { key: String::new(), line: Some(line), message: "empty key".into() });
        }
        if let Some((_, _, first)) = out.iter().find(|(name, _, _)| name == k) {
            return Err(CliError::ConfigInvalid {
                key: k.to_string(),
                line: Some(line),
                message: format!("duplicate of line {first}"),
            });
        }
        out.push((k.to_string(), v.to_string(), line));
    }
    Ok(out)
}

impl Config {
    pub fn resolve(
        command: Command,
        file: &[(String, String, usize)],
        flags: &[(String, String)],
    ) -> CliResult<Config> {
        let specs = command.keys();
        let mut values = BTreeMap::new();
        for s in &specs {
            if let Some(d) = s.default {
                values.insert(s.name.to_string(), (d.to_string(), Source::Default));
            }
        }
        for (k, v, line) in file {
            if !specs.iter().any(|s| s.name == k) {
                return Err(CliError::ConfigInvalid {
                    key: k.clone(),
                    line: Some(*line),
                    message: format!("not a key of `{}`", command.name()),
                });
            }
            values.insert(k.clone(), (v.clone(), Source::File { line: *line }));
        }
        for (k, v) in flags {
            if !specs.iter().any(|s| s.name == k) {
                return Err(CliError::ConfigInvalid {
                    key: k.clone(),
                    line: None,
                    message: format!("not a key of `{}`", command.name()),
                });
            }
            values.insert(k.clone(), (v.clone(), Source::Flag));
        }
        for s in &specs {
            if !values.contains_key(s.name) {
                return Err(CliError::ConfigInvalid { key: s.name.into(), line: None, message: "required".into() });
            }
        }
        Ok(Config { command, values })
    }

    /// The fully resolved map, as recorded in the manifest.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.values.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect()
    }

    pub fn raw(&self, key: &str) -> &str {
        &self.values.get(key).unwrap_or_else(|| panic!("key `{key}` not declared for {}", self.command.name())).0
    }

    pub fn invalid(&self, key: &str, message: impl Into<String>) -> CliError {
        let line = match self.values.get(key).map(|(_, s)| *s) {
            Some(Source::File { line }) => Some(line),
            _ => None,
        };
        CliError::ConfigInvalid { key: key.into(), line, message: message.into() }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e: T::Err| self.invalid(key, format!("cannot parse {raw:?}: {e}")))
    }

    /// `none` reads as absent.
    pub fn get_opt<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(key) == "none" {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn positive(&self, key: &str) -> CliResult<f64> {
        let v: f64 = self.get(key)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(self.invalid(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    pub fn choice<'a>(&self, key: &str, options: &[&'a str]) -> CliResult<&'a str> {
        let raw = self.raw(key);
        options
            .iter()
            .find(|o| **o == raw)
            .copied()
            .ok_or_else(|| self.invalid(key, format!("expected one of {options:?}, got {raw:?}")))
    }

    pub fn list_f64(&self, key: &str) -> CliResult<Vec<f64>> {
        self.raw(key)
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| self.invalid(key, format!("{s:?}: {e}"))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_defaults() {
        let file = parse_file("# comment\nN = 12\n\nL = 3.0  # trailing\n").unwrap();
        let cfg = Config::resolve(Command::MuPlus, &file, &[("N".into(), "20".into())]).unwrap();
        assert_eq!(cfg.raw("N"), "20");
        assert_eq!(cfg.raw("L"), "3.0");
        assert_eq!(cfg.raw("torus"), "3");
    }

    #[test]
    fn diagnostics_carry_line_and_key() {
        let err = parse_file("N = 12\nbogus\n").unwrap_err();
        assert!(matches!(err, CliError::ConfigInvalid { line: Some(2), .. }), "{err}");
        let file = parse_file("N = 12\nwidth = 3\n").unwrap();
        let err = Config::resolve(Command::MuPlus, &file, &[]).unwrap_err();
        assert!(matches!(&err, CliError::ConfigInvalid { key, line: Some(2), .. } if key == "width"), "{err}");
        let file = parse_file("N = twelve\n").unwrap();
        let cfg = Config::resolve(Command::MuPlus, &file, &[]).unwrap();
        let err = cfg.get::<usize>("N").unwrap_err();
        assert!(err.to_string().contains("`N` at line 1"), "{err}");
    }

    #[test]
    fn required_keys_must_be_given() {
        let err = Config::resolve(Command::Classify, &[], &[]).unwrap_err();
        assert!(matches!(&err, CliError::ConfigInvalid { key, .. } if key == "model"));
    }
}
