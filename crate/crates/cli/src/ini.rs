//! Flat INI configuration: `[solver]`, `[noise]`, `[besov]` and
//! `[experiment]` sections of `key = value` lines. `#` and `;` start
//! comments. Unset keys keep the defaults of the selected experiment kind.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use wicksync::experiments::{ExperimentConfig, ExperimentKind};
use wicksync::noise::{renorm_constant, RenormConstant};
use wicksync::{Nonlinearity, Scheme, SolverConfig, TorusGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn error(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "solver",
        &["L", "N", "dt", "truncation", "scheme", "coefficients", "mass_term", "renorm", "renorm_mass"],
    ),
    ("noise", &["amplitude", "seed"]),
    ("besov", &["alpha", "p", "s_points", "alpha0", "delta", "gamma"]),
    (
        "experiment",
        &[
            "kind",
            "ensemble",
            "horizon",
            "output_interval",
            "fit_start",
            "R",
            "R_reference",
            "R_values",
            "bootstrap",
            "lemma_alpha",
            "lemma_p",
            "members",
        ],
    ),
];

struct Entry {
    line: usize,
    value: String,
}

struct Entries(HashMap<(String, String), Entry>);

impl Entries {
    fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError> {
        match self.0.get(&(section.to_string(), key.to_string())) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| {
                error(Some(e.line), format!("cannot parse value '{}' of {section}.{key}", e.value))
            }),
        }
    }

    fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        match self.0.get(&(section.to_string(), key.to_string())) {
            None => Ok(None),
            Some(e) if e.value.trim().is_empty() => Ok(Some(Vec::new())),
            Some(e) => e
                .value
                .split(',')
                .map(|item| {
                    item.trim().parse().map_err(|_| {
                        error(Some(e.line), format!("cannot parse list item '{}' of {section}.{key}", item.trim()))
                    })
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }

    fn line(&self, section: &str, key: &str) -> Option<usize> {
        self.0.get(&(section.to_string(), key.to_string())).map(|e| e.line)
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut entries = HashMap::new();
    let mut section: Option<&str> = None;
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| error(Some(line), format!("malformed section header '{content}'")))?
                .trim();
            let known = KEYS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| error(Some(line), format!("unknown section [{name}]")))?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| error(Some(line), format!("expected 'key = value', found '{content}'")))?;
        let key = key.trim();
        let current = section.ok_or_else(|| error(Some(line), format!("key '{key}' appears before any section")))?;
        let allowed = KEYS.iter().find(|(s, _)| *s == current).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(error(Some(line), format!("unknown key '{key}' in section [{current}]")));
        }
        let previous = entries.insert(
            (current.to_string(), key.to_string()),
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
        if let Some(previous) = previous {
            return Err(error(
                Some(line),
                format!("duplicate key '{key}' (first set on line {})", previous.line),
            ));
        }
    }
    Ok(Entries(entries))
}

fn parse_scheme(value: &str) -> Option<Scheme> {
    match value {
        "monotone_splitting" => Some(Scheme::MonotoneSplitting),
        "semi_implicit" => Some(Scheme::SemiImplicit),
        _ => None,
    }
}

fn scheme_name(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::MonotoneSplitting => "monotone_splitting",
        Scheme::SemiImplicit => "semi_implicit",
    }
}

/// Parses `text` on top of the defaults of the experiment kind, which is
/// taken from `kind` if given, otherwise from `experiment.kind`.
pub fn parse_config(text: &str, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, ConfigError> {
    let e = tokenize(text)?;
    let named: Option<String> = e.get("experiment", "kind")?;
    let line = e.line("experiment", "kind");
    let named = named
        .map(|name| {
            name.parse::<ExperimentKind>()
                .map_err(|_| error(line, format!("unknown experiment kind '{name}'")))
        })
        .transpose()?;
    let kind = match (kind, named) {
        (Some(k), Some(n)) if k != n => {
            return Err(error(line, format!("experiment kind {n} conflicts with requested kind {k}")));
        }
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => return Err(error(None, "experiment kind not given")),
    };
    let mut cfg = ExperimentConfig::new(kind).map_err(|err| error(None, err.to_string()))?;
    let at = |key: &str| e.line("solver", key);

    let side = e.get("solver", "L")?.unwrap_or(cfg.solver.grid.side());
    let points = e.get("solver", "N")?.unwrap_or(cfg.solver.grid.points());
    let grid = TorusGrid::square(side, points)
        .map_err(|err| error(at("N").or(at("L")), err.to_string()))?;
    let dt = e.get("solver", "dt")?.unwrap_or(cfg.solver.dt);
    let truncation = e.get("solver", "truncation")?.unwrap_or(points / 2 - 1);
    let scheme = match e.get::<String>("solver", "scheme")? {
        None => cfg.solver.scheme,
        Some(name) => parse_scheme(&name).ok_or_else(|| error(at("scheme"), format!("unknown scheme '{name}'")))?,
    };
    let nonlinearity = match e.list::<f64>("solver", "coefficients")? {
        None => cfg.solver.nonlinearity.clone(),
        Some(list) => Nonlinearity::new(list).map_err(|err| error(at("coefficients"), err.to_string()))?,
    };
    let mass_term = e.get("solver", "mass_term")?.unwrap_or(cfg.solver.mass_term);
    let renorm = match (e.get::<f64>("solver", "renorm")?, e.get::<f64>("solver", "renorm_mass")?) {
        (Some(_), Some(_)) => {
            return Err(error(at("renorm_mass"), "set either renorm or renorm_mass, not both"));
        }
        (Some(value), None) => RenormConstant::fixed(value),
        (None, mass) => renorm_constant(&grid, truncation, mass.unwrap_or(1.0))
            .map_err(|err| error(at("renorm_mass").or(at("truncation")), err.to_string()))?,
    };
    cfg.solver = SolverConfig {
        grid,
        dt,
        truncation,
        renorm,
        nonlinearity,
        mass_term,
        scheme,
    };

    macro_rules! set {
        ($field:expr, $section:literal, $key:literal) => {
            if let Some(v) = e.get($section, $key)? {
                $field = v;
            }
        };
    }
    set!(cfg.noise_amplitude, "noise", "amplitude");
    set!(cfg.seed_base, "noise", "seed");
    set!(cfg.alpha, "besov", "alpha");
    set!(cfg.p, "besov", "p");
    set!(cfg.s_points, "besov", "s_points");
    set!(cfg.alpha0, "besov", "alpha0");
    set!(cfg.delta, "besov", "delta");
    set!(cfg.gamma, "besov", "gamma");
    set!(cfg.ensemble_size, "experiment", "ensemble");
    set!(cfg.horizon, "experiment", "horizon");
    set!(cfg.output_interval, "experiment", "output_interval");
    set!(cfg.fit_start, "experiment", "fit_start");
    set!(cfg.extremal_r, "experiment", "R");
    set!(cfg.reference_r, "experiment", "R_reference");
    set!(cfg.bootstrap_resamples, "experiment", "bootstrap");
    set!(cfg.lemma_alpha, "experiment", "lemma_alpha");
    set!(cfg.members, "experiment", "members");
    if let Some(v) = e.list("experiment", "R_values")? {
        cfg.r_values = v;
    }
    if let Some(v) = e.list("experiment", "lemma_p")? {
        cfg.lemma_p = v;
    }
    Ok(cfg)
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Fully resolved configuration in the same format; parsing the output
/// gives back an identical configuration.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let s = &cfg.solver;
    let renorm_line = if s.renorm.truncation == 0 && s.renorm.mass == 0.0 {
        format!("renorm = {}", s.renorm.value)
    } else {
        format!("renorm_mass = {}", s.renorm.mass)
    };
    format!(
        "[solver]\n\
         L = {}\nN = {}\ndt = {}\ntruncation = {}\nscheme = {}\ncoefficients = {}\nmass_term = {}\n{}\n\
         \n[noise]\namplitude = {}\nseed = {}\n\
         \n[besov]\nalpha = {}\np = {}\ns_points = {}\nalpha0 = {}\ndelta = {}\ngamma = {}\n\
         \n[experiment]\nkind = {}\nensemble = {}\nhorizon = {}\noutput_interval = {}\nfit_start = {}\n\
         R = {}\nR_reference = {}\nR_values = {}\nbootstrap = {}\nlemma_alpha = {}\nlemma_p = {}\nmembers = {}\n",
        s.grid.side(),
        s.grid.points(),
        s.dt,
        s.truncation,
        scheme_name(s.scheme),
        join(s.nonlinearity.coefficients()),
        s.mass_term,
        renorm_line,
        cfg.noise_amplitude,
        cfg.seed_base,
        cfg.alpha,
        cfg.p,
        cfg.s_points,
        cfg.alpha0,
        cfg.delta,
        cfg.gamma,
        cfg.kind,
        cfg.ensemble_size,
        cfg.horizon,
        cfg.output_interval,
        cfg.fit_start,
        cfg.extremal_r,
        cfg.reference_r,
        join(&cfg.r_values),
        cfg.bootstrap_resamples,
        cfg.lemma_alpha,
        join(&cfg.lemma_p),
        cfg.members,
    )
}
