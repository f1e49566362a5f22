//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, lists are comma-separated.
//! Only `experiment` is required; every other key has a per-experiment
//! default. Unknown keys are rejected.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Matching,
    NaiveVsQuadratic,
    Robust,
    Cascade,
    DynamicsNaive,
    DynamicsShared,
    DualityTable,
    Sqrt2Ratio,
    NnRate,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Matching,
        Experiment::NaiveVsQuadratic,
        Experiment::Robust,
        Experiment::Cascade,
        Experiment::DynamicsNaive,
        Experiment::DynamicsShared,
        Experiment::DualityTable,
        Experiment::Sqrt2Ratio,
        Experiment::NnRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Matching => "matching",
            Experiment::NaiveVsQuadratic => "naive-vs-quadratic",
            Experiment::Robust => "robust",
            Experiment::Cascade => "cascade",
            Experiment::DynamicsNaive => "dynamics-naive",
            Experiment::DynamicsShared => "dynamics-shared",
            Experiment::DualityTable => "duality-table",
            Experiment::Sqrt2Ratio => "sqrt2-ratio",
            Experiment::NnRate => "nn-rate",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::Matching => "sample-splitting estimate of E L(P, P_n) over an (n, d) grid, with a log-log rate fit",
            Experiment::NaiveVsQuadratic => "isotropic scale chosen by the sampled W2 objective vs the moment-matching fit",
            Experiment::Robust => "TV' and Tukey projection estimates of a contaminated Gaussian mean",
            Experiment::Cascade => "PCA under TV contamination: moment fit vs the cascade objective",
            Experiment::DynamicsNaive => "RK4 flow of the naive game from a perturbed equilibrium",
            Experiment::DynamicsShared => "RK4 flow of the shared-parameter game with Lyapunov monitoring",
            Experiment::DualityTable => "minimax and maximin values of the naive game",
            Experiment::Sqrt2Ratio => "W2 ratio between N(0,1) and the best N(0,c) against Q_a",
            Experiment::NnRate => "mean nearest-neighbour distance from Gaussian probes over an (n, d) grid",
        }
    }
}

impl FromStr for Experiment {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or(())
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    MomentW2,
    AssignmentW2,
}

impl DistanceKind {
    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::MomentW2 => "moment-w2",
            DistanceKind::AssignmentW2 => "assignment-w2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    /// Ascending, deduplicated.
    pub n: Vec<usize>,
    /// Ascending, deduplicated.
    pub d: Vec<usize>,
    pub reps: usize,
    pub h: f64,
    pub t_end: f64,
    pub out: PathBuf,
    pub svg: bool,
    pub distance: DistanceKind,
    /// Contamination fraction, perturbation size or target error, by experiment.
    pub eps: Option<f64>,
    pub a: Vec<f64>,
    pub k_diag: Vec<f64>,
    pub rank: usize,
    pub lambda: f64,
    pub probes: usize,
    pub outlier: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigErrorKind {
    UnknownKey(String),
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    MissingRequired(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line of the offending setting, when there is one.
    pub line: Option<usize>,
    pub kind: ConfigErrorKind,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        match &self.kind {
            ConfigErrorKind::UnknownKey(k) => write!(f, "unknown key `{k}`"),
            ConfigErrorKind::BadValue { key, value, reason } => {
                write!(f, "bad value `{value}` for `{key}`: {reason}")
            }
            ConfigErrorKind::MissingRequired(k) => write!(f, "missing required key `{k}`"),
        }
    }
}

impl std::error::Error for ConfigError {}

pub const KEYS: [&str; 17] = [
    "experiment",
    "seed",
    "n",
    "d",
    "reps",
    "h",
    "t_end",
    "out",
    "svg",
    "distance",
    "eps",
    "a",
    "k_diag",
    "rank",
    "lambda",
    "probes",
    "outlier",
];

struct Raw {
    line: usize,
    value: String,
}

fn bad(line: usize, key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        line: Some(line),
        kind: ConfigErrorKind::BadValue {
            key: key.into(),
            value: value.into(),
            reason: reason.into(),
        },
    }
}

fn scalar<T: FromStr>(r: &Raw, key: &str) -> Result<T, ConfigError> {
    r.value
        .parse()
        .map_err(|_| bad(r.line, key, &r.value, "not a valid number"))
}

fn positive_f64(r: &Raw, key: &str) -> Result<f64, ConfigError> {
    let v: f64 = scalar(r, key)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(bad(r.line, key, &r.value, "must be positive and finite"));
    }
    Ok(v)
}

fn list<T: FromStr>(r: &Raw, key: &str) -> Result<Vec<T>, ConfigError> {
    let items: Vec<&str> = r.value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(bad(r.line, key, &r.value, "empty list entry"));
    }
    items
        .iter()
        .map(|s| {
            s.parse().map_err(|_| {
                bad(
                    r.line,
                    key,
                    &r.value,
                    format!("`{s}` is not a valid number"),
                )
            })
        })
        .collect()
}

fn size_list(r: &Raw, key: &str) -> Result<Vec<usize>, ConfigError> {
    let mut v: Vec<usize> = list(r, key)?;
    if v.contains(&0) {
        return Err(bad(r.line, key, &r.value, "entries must be positive"));
    }
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

struct Defaults {
    n: &'static [usize],
    d: &'static [usize],
    t_end: f64,
    eps: Option<f64>,
    k_diag: &'static [f64],
    outlier: f64,
}

fn defaults(e: Experiment) -> Defaults {
    let base = Defaults {
        n: &[64, 128, 256, 512, 1024],
        d: &[10],
        t_end: 50.0,
        eps: None,
        k_diag: &[2.0, 1.0],
        outlier: 10.0,
    };
    match e {
        Experiment::Matching => Defaults {
            d: &[10, 20],
            ..base
        },
        Experiment::NaiveVsQuadratic => Defaults {
            n: &[64, 128, 256, 512],
            d: &[2],
            ..base
        },
        Experiment::Robust => Defaults {
            n: &[1000],
            d: &[5],
            eps: Some(0.1),
            ..base
        },
        Experiment::Cascade => Defaults {
            n: &[2000],
            d: &[2],
            eps: Some(0.05),
            k_diag: &[4.0, 0.01],
            outlier: 20.0,
            ..base
        },
        Experiment::DynamicsNaive => Defaults {
            d: &[2],
            eps: Some(1e-4),
            k_diag: &[1.0, 0.0],
            ..base
        },
        Experiment::DynamicsShared => Defaults { d: &[2], ..base },
        Experiment::DualityTable => Defaults { d: &[2], ..base },
        Experiment::Sqrt2Ratio => base,
        Experiment::NnRate => Defaults {
            n: &[64, 128, 256, 512, 1024, 2048, 4096],
            ..base
        },
    }
}

/// Parses and validates a configuration, stopping at the first error.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut raw: Vec<(String, Raw)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| bad(lineno, body, "", "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError {
                line: Some(lineno),
                kind: ConfigErrorKind::UnknownKey(key.into()),
            });
        }
        if raw.iter().any(|(k, _)| k == key) {
            return Err(bad(lineno, key, value, "key given twice"));
        }
        if value.is_empty() {
            return Err(bad(lineno, key, value, "empty value"));
        }
        raw.push((
            key.into(),
            Raw {
                line: lineno,
                value: value.into(),
            },
        ));
    }
    let get = |k: &str| raw.iter().find(|(key, _)| key == k).map(|(_, r)| r);

    let er = get("experiment").ok_or(ConfigError {
        line: None,
        kind: ConfigErrorKind::MissingRequired("experiment".into()),
    })?;
    let experiment: Experiment = er.value.parse().map_err(|_| {
        let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
        bad(
            er.line,
            "experiment",
            &er.value,
            format!("expected one of {}", names.join(", ")),
        )
    })?;
    let def = defaults(experiment);

    let mut cfg = ExperimentConfig {
        experiment,
        seed: 0,
        n: def.n.to_vec(),
        d: def.d.to_vec(),
        reps: 16,
        h: 1e-3,
        t_end: def.t_end,
        out: PathBuf::from("out"),
        svg: false,
        distance: DistanceKind::MomentW2,
        eps: def.eps,
        a: vec![1e1, 1e2, 1e3, 1e4, 1e5],
        k_diag: def.k_diag.to_vec(),
        rank: 1,
        lambda: 1.0,
        probes: 256,
        outlier: def.outlier,
    };

    for (key, r) in &raw {
        let key = key.as_str();
        match key {
            "experiment" => {}
            "seed" => cfg.seed = scalar(r, key)?,
            "n" => cfg.n = size_list(r, key)?,
            "d" => cfg.d = size_list(r, key)?,
            "reps" => {
                cfg.reps = scalar(r, key)?;
                if cfg.reps == 0 {
                    return Err(bad(r.line, key, &r.value, "must be at least 1"));
                }
            }
            "h" => cfg.h = positive_f64(r, key)?,
            "t_end" => cfg.t_end = positive_f64(r, key)?,
            "out" => cfg.out = PathBuf::from(&r.value),
            "svg" => {
                cfg.svg = match r.value.as_str() {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad(r.line, key, &r.value, "expected true or false")),
                }
            }
            "distance" => {
                cfg.distance = match r.value.as_str() {
                    "moment-w2" => DistanceKind::MomentW2,
                    "assignment-w2" => DistanceKind::AssignmentW2,
                    _ => {
                        return Err(bad(
                            r.line,
                            key,
                            &r.value,
                            "expected moment-w2 or assignment-w2",
                        ))
                    }
                }
            }
            "eps" => {
                let v: f64 = scalar(r, key)?;
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(bad(r.line, key, &r.value, "must be nonnegative and finite"));
                }
                cfg.eps = Some(v);
            }
            "a" => {
                let v: Vec<f64> = list(r, key)?;
                if v.iter().any(|&x| !(x > 1.0) || !x.is_finite()) {
                    return Err(bad(r.line, key, &r.value, "entries must exceed 1"));
                }
                cfg.a = v;
            }
            "k_diag" => {
                let v: Vec<f64> = list(r, key)?;
                if v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                    return Err(bad(r.line, key, &r.value, "entries must be nonnegative"));
                }
                cfg.k_diag = v;
            }
            "rank" => {
                cfg.rank = scalar(r, key)?;
                if cfg.rank == 0 {
                    return Err(bad(r.line, key, &r.value, "must be at least 1"));
                }
            }
            "lambda" => cfg.lambda = positive_f64(r, key)?,
            "probes" => {
                cfg.probes = scalar(r, key)?;
                if cfg.probes == 0 {
                    return Err(bad(r.line, key, &r.value, "must be at least 1"));
                }
            }
            "outlier" => {
                cfg.outlier = scalar(r, key)?;
                if !cfg.outlier.is_finite() {
                    return Err(bad(r.line, key, &r.value, "must be finite"));
                }
            }
            _ => unreachable!("key list checked above"),
        }
    }
    Ok(cfg)
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Every resolved setting in the text format, one per line, in key order.
    pub fn echo(&self) -> Vec<String> {
        let mut lines = vec![
            format!("experiment = {}", self.experiment),
            format!("seed = {}", self.seed),
            format!("n = {}", join(&self.n)),
            format!("d = {}", join(&self.d)),
            format!("reps = {}", self.reps),
            format!("h = {}", self.h),
            format!("t_end = {}", self.t_end),
            format!("out = {}", self.out.display()),
            format!("svg = {}", self.svg),
            format!("distance = {}", self.distance.name()),
        ];
        if let Some(e) = self.eps {
            lines.push(format!("eps = {e}"));
        }
        lines.extend([
            format!("a = {}", join(&self.a)),
            format!("k_diag = {}", join(&self.k_diag)),
            format!("rank = {}", self.rank),
            format!("lambda = {}", self.lambda),
            format!("probes = {}", self.probes),
            format!("outlier = {}", self.outlier),
        ]);
        lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("experiment = matching\n").unwrap();
        assert_eq!(c.reps, 16);
        assert_eq!(c.h, 1e-3);
        assert_eq!(c.seed, 0);
        assert!(!c.svg);
        assert_eq!(c.d, vec![10, 20]);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config("experiment = matching\nfooo = 3\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert_eq!(e.kind, ConfigErrorKind::UnknownKey("fooo".into()));
        assert!(e.to_string().contains("fooo"));
    }

    #[test]
    fn lists_are_sorted_ascending() {
        let c = parse_config("experiment = matching\nn = 256, 64,128\n").unwrap();
        assert_eq!(c.n, vec![64, 128, 256]);
    }

    #[test]
    fn errors_point_at_lines() {
        let e = parse_config("# hi\nseed = 3\n").unwrap_err();
        assert_eq!(
            e.kind,
            ConfigErrorKind::MissingRequired("experiment".into())
        );
        let e = parse_config("experiment = matching\nreps = 0\n").unwrap_err();
        assert!(matches!(e.kind, ConfigErrorKind::BadValue { .. }) && e.line == Some(2));
        let e = parse_config("experiment = nope\n").unwrap_err();
        assert!(matches!(e.kind, ConfigErrorKind::BadValue { .. }));
        assert!(parse_config("experiment = matching\nn = 64,,128\n").is_err());
        assert!(parse_config("experiment = matching\nn = 0,64\n").is_err());
        assert!(parse_config("experiment = matching\nseed = 1\nseed = 2\n").is_err());
        assert!(parse_config("experiment = matching\njust words\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let text =
            "experiment = robust # trailing\nseed = 7\neps = 0.2\nk_diag = 3, 1.5\nsvg = true\n";
        let c = parse_config(text).unwrap();
        let again = parse_config(&c.echo().join("\n")).unwrap();
        assert_eq!(c, again);
    }
}
