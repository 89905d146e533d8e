//! Flag tables per subcommand, and resolution of defaults, config file and
//! command-line values (in increasing priority).

use std::collections::BTreeMap;
use std::path::Path;

use pgdlab::experiments::config::{self, Config};
use pgdlab::experiments::EnsembleKind;
use pgdlab::geometry;
use pgdlab::{Penalty, StepRegime};

use crate::CliError;

pub struct Flag {
    pub key: &'static str,
    pub value_name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn flag(
    key: &'static str,
    value_name: &'static str,
    default: Option<&'static str>,
    help: &'static str,
) -> Flag {
    Flag { key, value_name, default, help }
}

const SEED: Flag = flag("seed", "INT", Some("0"), "Master seed");
const WORKERS: Flag = flag("workers", "INT", Some("0"), "Worker threads (0 = all cores)");
const OUT: Flag = flag("out", "DIR", Some("pgdlab-out"), "Output directory");
const ETA: Flag = flag("eta", "FLOAT", Some("0"), "Slack added to the width when computing m0");
const PENALTY: Flag = flag("penalty", "l1|l0|lhalf", Some("l1"), "Structure-promoting penalty");
const REGIME: Flag = flag(
    "regime",
    "greedy|conservative|structured|fixed:MU",
    Some("greedy"),
    "Step-size rule",
);
const ENSEMBLE: Flag = flag(
    "ensemble",
    "gaussian|rademacher|sors-hadamard|sors-dct",
    Some("gaussian"),
    "Measurement ensemble",
);
const TOL: Flag = flag("tol", "FLOAT", Some("1e-3"), "Relative error counted as recovery");

pub fn flags(sub: &str) -> Vec<Flag> {
    match sub {
        "solve" => vec![
            flag("n", "INT", Some("256"), "Signal dimension"),
            flag("s", "INT", Some("8"), "Sparsity"),
            flag("m", "INT|Xm0|Xn", Some("8m0"), "Measurements"),
            PENALTY,
            ENSEMBLE,
            REGIME,
            flag("iters", "INT", Some("500"), "Iteration cap"),
            TOL,
            ETA,
            flag("noise", "FLOAT", Some("0"), "Noise level ||w|| / ||Ax||"),
            SEED,
            OUT,
        ],
        "sweep" => vec![
            flag("n", "INT", Some("128"), "Signal dimension"),
            flag("s", "LIST", Some("2,4,8,12,16"), "Sparsity grid (list or start:stop:step)"),
            flag("m", "LIST", Some("8:128:8"), "Measurement grid; items may be fractions of n (0.25n)"),
            PENALTY,
            ENSEMBLE,
            REGIME,
            flag("trials", "INT", Some("50"), "Trials per cell"),
            flag("iters", "INT", Some("500"), "Iteration cap"),
            TOL,
            ETA,
            flag("level", "FLOAT", Some("0.5"), "Success fraction defining the boundary"),
            SEED,
            WORKERS,
            OUT,
        ],
        "rates" => vec![
            flag("n", "INT", Some("256"), "Signal dimension"),
            flag("s", "LIST", Some("8,13"), "Sparsity levels"),
            flag("oversampling", "FLOAT", Some("8"), "m = oversampling * m0"),
            flag("m0", "LIST", None, "Empirical m0 per sparsity (default: closed form)"),
            ENSEMBLE,
            REGIME,
            flag("trials", "INT", Some("50"), "Trials per sparsity level"),
            flag("iters", "INT", Some("50"), "Iterations recorded"),
            flag("gamma", "FLOAT", Some("0.075"), "Normalization slack"),
            flag("window", "LO,HI", Some("10,40"), "Iterations used for the rate fit"),
            ETA,
            SEED,
            WORKERS,
            OUT,
        ],
        "timing" => vec![
            flag("n", "INT", Some("256"), "Signal dimension"),
            flag("s", "INT", Some("8"), "Sparsity"),
            flag(
                "m",
                "LIST",
                Some("7m0,9m0,11m0,14m0,18m0,23m0,30m0"),
                "Measurement grid; items may be multiples of m0 (8m0)",
            ),
            flag("ensemble", "LIST", Some("gaussian,sors-hadamard"), "Ensembles to time"),
            REGIME,
            flag("trials", "INT", Some("5"), "Trials per point (median reported)"),
            flag("iters", "INT", Some("500"), "Iteration cap"),
            TOL,
            SEED,
            OUT,
        ],
        "sensitivity" => vec![
            flag("n", "INT", Some("256"), "Signal dimension"),
            flag("s", "INT", Some("8"), "Sparsity"),
            flag("m", "INT|Xm0|Xn", Some("16m0"), "Measurements"),
            flag("ratios", "LIST", Some("0.9,1,1.1"), "Radius as multiples of f(x)"),
            ENSEMBLE,
            flag("trials", "INT", Some("20"), "Trials per ratio"),
            flag("iters", "INT", Some("200"), "Iterations per run"),
            SEED,
            WORKERS,
            OUT,
        ],
        "denoise" => vec![
            flag("n", "INT", Some("128"), "Signal dimension"),
            flag("s", "INT", Some("4"), "Sparsity"),
            flag("sigmas", "LIST", Some("0.1,1"), "Noise levels"),
            flag("samples", "INT", Some("1000"), "Monte Carlo samples per noise level"),
            SEED,
            WORKERS,
            OUT,
        ],
        "theory" => vec![
            flag("phi", "FLOAT", None, "Print phi(t) = sqrt(2) Gamma((t+1)/2) / Gamma(t/2)"),
            flag("n", "INT", Some("256"), "Signal dimension"),
            flag("s", "INT", Some("8"), "Sparsity"),
            flag("m", "INT|Xm0|Xn", Some("8m0"), "Measurements"),
            PENALTY,
            ETA,
        ],
        "widths" => vec![
            flag("n", "INT", Some("128"), "Signal dimension"),
            flag("s", "INT", Some("4"), "Sparsity"),
            ETA,
            flag("samples", "INT", Some("0"), "Monte Carlo samples for a width cross-check (0 = skip)"),
            SEED,
        ],
        _ => Vec::new(),
    }
}

/// Keys left out of the reproduction command recorded in output headers.
const NOT_RECORDED: [&str; 2] = ["workers", "out"];

enum Source {
    Default,
    Config(usize),
    Flag,
}

pub struct Params {
    sub: String,
    order: Vec<&'static str>,
    values: BTreeMap<&'static str, (String, Source)>,
}

impl Params {
    pub fn resolve(
        sub: &str,
        config_path: Option<&Path>,
        cli: &[(&'static str, String)],
    ) -> Result<Self, CliError> {
        let table = flags(sub);
        let mut values = BTreeMap::new();
        for f in &table {
            if let Some(d) = f.default {
                values.insert(f.key, (d.to_string(), Source::Default));
            }
        }
        if let Some(path) = config_path {
            let cfg = Config::load(path).map_err(CliError::from_core)?;
            let known: Vec<&str> = table.iter().map(|f| f.key).collect();
            cfg.check_known(&known).map_err(CliError::from_core)?;
            for e in cfg.entries() {
                let key = table.iter().find(|f| f.key == e.key).map(|f| f.key).expect("checked");
                values.insert(key, (e.value.clone(), Source::Config(e.line)));
            }
        }
        for (k, v) in cli {
            values.insert(k, (v.clone(), Source::Flag));
        }
        Ok(Self { sub: sub.to_string(), order: table.iter().map(|f| f.key).collect(), values })
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Result<&str, CliError> {
        self.values
            .get(key)
            .map(|v| v.0.as_str())
            .ok_or_else(|| CliError::Usage(format!("missing value for --{key}")))
    }

    fn error(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        match self.values.get(key).map(|v| &v.1) {
            Some(Source::Config(line)) => {
                CliError::Usage(format!("config error at line {line}: `{key}`: {msg}"))
            }
            _ => CliError::Usage(format!("invalid value for --{key}: {msg}")),
        }
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key)?;
        raw.trim().parse().map_err(|e| self.error(key, format!("`{raw}`: {e}")))
    }

    pub fn with<T>(
        &self,
        key: &str,
        parse: impl FnOnce(&str) -> Result<T, String>,
    ) -> Result<T, CliError> {
        let raw = self.raw(key)?;
        parse(raw).map_err(|e| self.error(key, e))
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, CliError> {
        self.with(key, config::parse_usize_list)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.with(key, config::parse_f64_list)
    }

    pub fn penalty(&self) -> Result<Penalty, CliError> {
        let p: Penalty = self.get("penalty")?;
        if p == Penalty::Trivial {
            return Err(self.error("penalty", "expected l1, l0 or lhalf"));
        }
        Ok(p)
    }

    pub fn ensemble(&self) -> Result<EnsembleKind, CliError> {
        self.get("ensemble")
    }

    pub fn regime(&self) -> Result<StepRegime<f64>, CliError> {
        self.get("regime")
    }

    /// Measurement counts; items may be `INT`, a fraction of `n` (`0.5n`) or
    /// a multiple of `m0(n, s)` (`8m0`, rounded up).
    pub fn m_list(&self, n: usize, s: Option<usize>) -> Result<Vec<usize>, CliError> {
        self.with("m", |text| {
            let items: Vec<&str> = text.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
            if items.iter().all(|t| !t.ends_with("m0")) {
                return config::parse_m_list(text, n);
            }
            let s = s.ok_or("multiples of m0 need a single sparsity level")?;
            let m0 = geometry::m0_l1(n, s, 0.0).map_err(|e| e.to_string())?;
            items
                .iter()
                .map(|item| match item.strip_suffix("m0") {
                    Some(f) => f
                        .parse::<f64>()
                        .map(|f| (f * m0).ceil() as usize)
                        .map_err(|_| format!("cannot parse `{item}`")),
                    None => config::parse_m_list(item, n).map(|v| v[0]),
                })
                .collect()
        })
    }

    /// The command line reproducing this run, with every resolved value
    /// spelled out.
    pub fn command_line(&self) -> String {
        let mut out = format!("pgdlab {}", self.sub);
        for key in &self.order {
            if NOT_RECORDED.contains(key) {
                continue;
            }
            if let Some((v, _)) = self.values.get(key) {
                out.push_str(&format!(" --{key} {v}"));
            }
        }
        out
    }
}
