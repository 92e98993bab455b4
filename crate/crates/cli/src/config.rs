//! Command table, argument parsing and the resolved run configuration.
//!
//! Every parameter has a default, may be overridden by a `--config` file and
//! then by its own `--flag`. The resolved values are what gets written to
//! `resolved-config.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};
use sharepref::diffusion::CascadeConfig;
use sharepref::io::parse_kv;
use sharepref::synthgen::StudyProfile;
use sharepref::{Error, Result};

pub const RESOLVED_CONFIG: &str = "resolved-config.txt";

pub struct Input {
    pub key: &'static str,
    pub required: bool,
    pub help: &'static str,
}

pub struct CommandSpec {
    /// `["stats", "lmm"]` for nested subcommands.
    pub path: &'static [&'static str],
    pub about: &'static str,
    pub inputs: Vec<Input>,
    pub params: Vec<(String, String)>,
    pub out_required: bool,
}

impl CommandSpec {
    pub fn name(&self) -> String {
        self.path.join(" ")
    }
}

fn input(key: &'static str, help: &'static str) -> Input {
    Input { key, required: true, help }
}

fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Keys and defaults from a `key=value` rendering.
fn defaults_of(text: &str) -> Vec<(String, String)> {
    parse_kv(text).expect("defaults render as key=value")
}

const TREE: [(&str, &str); 3] = [("max_depth", "5"), ("min_leaf", "5"), ("columns", "all")];
const CV: [(&str, &str); 2] = [("datasets", "10"), ("folds", "10")];
const PLANT: [(&str, &str); 6] = [
    ("participants", "30"),
    ("items", "30"),
    ("beta", "0.4"),
    ("sd_participant", "0.3"),
    ("sd_item", "0.3"),
    ("sd_residual", "1"),
];

pub fn commands() -> Vec<CommandSpec> {
    let mut simulate = kv(&[("model", "cascade"), ("runs", "1"), ("ic_p", "0.1")]);
    simulate.extend(defaults_of(&CascadeConfig::default().to_text()));
    let mut power = kv(&PLANT);
    power.extend(kv(&[("runs", "50"), ("alpha", "0.05")]));
    vec![
        CommandSpec {
            path: &["ingest"],
            about: "Validate a study directory and write normalized copies plus group summaries",
            inputs: vec![input("data", "study directory (likes, ratings, shares, items, sessions csv)")],
            params: vec![],
            out_required: true,
        },
        CommandSpec {
            path: &["recommend"],
            about: "Friend-based item recommendations",
            inputs: vec![input("likes", "likes.csv"), input("graph", "graph.csv; out-neighbours are friends")],
            params: kv(&[("user", "all"), ("k", "20"), ("n", "10")]),
            out_required: true,
        },
        CommandSpec {
            path: &["featurize"],
            about: "Build the share-prediction feature table",
            inputs: vec![input("data", "study directory")],
            params: kv(&[("like_threshold", "4")]),
            out_required: true,
        },
        CommandSpec {
            path: &["train"],
            about: "Train one decision tree on a balanced sample",
            inputs: vec![input("features", "features.csv")],
            params: kv(&TREE),
            out_required: true,
        },
        CommandSpec {
            path: &["evaluate"],
            about: "Cross-validate over balanced datasets",
            inputs: vec![input("features", "features.csv")],
            params: [kv(&CV), kv(&TREE)].concat(),
            out_required: true,
        },
        CommandSpec {
            path: &["ablate"],
            about: "Cross-validate each feature group",
            inputs: vec![input("features", "features.csv")],
            params: [kv(&CV), kv(&TREE[..2]), kv(&[("groups", "headline")])].concat(),
            out_required: true,
        },
        CommandSpec {
            path: &["simulate"],
            about: "Run sharing cascades on a social graph",
            inputs: vec![
                input("graph", "graph.csv"),
                input("seeds", "seed assignments, user_id,item_id"),
                input("likes", "likes.csv used for preferences"),
            ],
            params: simulate,
            out_required: true,
        },
        CommandSpec {
            path: &["stats", "ttest"],
            about: "Welch and pooled t-tests from summary statistics",
            inputs: vec![],
            params: kv(&[("a", ""), ("b", "")]),
            out_required: false,
        },
        CommandSpec {
            path: &["stats", "lmm"],
            about: "Crossed random-intercepts model with a likelihood-ratio test on condition",
            inputs: vec![input("ratings", "ratings-long csv: rating,participant_id,item_id,condition")],
            params: kv(&[("max_iterations", "2000"), ("tolerance", "1e-8")]),
            out_required: false,
        },
        CommandSpec {
            path: &["stats", "plant"],
            about: "Write ratings-long data with a planted condition effect",
            inputs: vec![],
            params: kv(&PLANT),
            out_required: true,
        },
        CommandSpec {
            path: &["stats", "power"],
            about: "Rejection rate of the condition test over planted datasets",
            inputs: vec![],
            params: power,
            out_required: false,
        },
        CommandSpec {
            path: &["synth"],
            about: "Generate a synthetic study directory",
            inputs: vec![],
            params: defaults_of(&StudyProfile::default().to_text()),
            out_required: true,
        },
    ]
}

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

fn leaf_command(spec: &CommandSpec) -> Command {
    let leaf = *spec.path.last().expect("non-empty path");
    let mut cmd = Command::new(leaf)
        .about(spec.about)
        .arg(Arg::new("seed").long("seed").value_name("N").help("master seed [default: 0]"))
        .arg(Arg::new("jobs").long("jobs").value_name("N").help("worker threads [default: 1]"))
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key=value file; flags take precedence"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .required(spec.out_required)
                .help("output directory"),
        );
    for i in &spec.inputs {
        cmd = cmd.arg(Arg::new(i.key).long(flag(i.key)).value_name("PATH").help(i.help));
    }
    for (key, default) in &spec.params {
        let help = if default.is_empty() { String::new() } else { format!("[default: {default}]") };
        cmd = cmd.arg(
            Arg::new(key.clone()).long(flag(key)).value_name("VALUE").allow_hyphen_values(true).help(help),
        );
    }
    if spec.path == ["stats", "ttest"] {
        cmd = cmd.arg(
            Arg::new("summary")
                .long("summary")
                .num_args(2)
                .value_names(["A", "B"])
                .action(ArgAction::Set)
                .help("two n,mean,sd triples"),
        );
    }
    cmd
}

pub fn build_cli(specs: &[CommandSpec]) -> Command {
    let mut root = Command::new("sharepref")
        .version(clap::crate_version!())
        .about("Share prediction, recommendation and diffusion experiments")
        .subcommand_required(true)
        .arg_required_else_help(true);
    let mut stats = Command::new("stats")
        .about("Statistical tests")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for spec in specs {
        match spec.path {
            [_] => root = root.subcommand(leaf_command(spec)),
            ["stats", _] => stats = stats.subcommand(leaf_command(spec)),
            _ => unreachable!("unsupported command path"),
        }
    }
    root.subcommand(stats)
}

/// A fully resolved run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub inputs: BTreeMap<String, PathBuf>,
    /// In declaration order.
    pub params: Vec<(String, String)>,
    /// Keyed extras such as `quota.<user>` that have no flag.
    pub extra: Vec<(String, String)>,
}

/// Failure before anything runs: exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

pub enum Resolve {
    Usage(UsageError),
    Invalid(Error),
}

impl From<Error> for Resolve {
    fn from(e: Error) -> Self {
        Resolve::Invalid(e)
    }
}

fn from_cli(m: &ArgMatches, id: &str) -> Option<String> {
    match m.value_source(id) {
        Some(ValueSource::CommandLine) => m.get_one::<String>(id).cloned(),
        _ => None,
    }
}

pub fn resolve(spec: &CommandSpec, m: &ArgMatches) -> std::result::Result<RunConfig, Resolve> {
    let mut file: BTreeMap<String, String> = BTreeMap::new();
    let mut extra = Vec::new();
    if let Some(path) = m.get_one::<String>("config") {
        let text = sharepref::io::read_to_string(Path::new(path))?;
        for (k, v) in parse_kv(&text).map_err(|e| Error::validation(format!("{path}: {e}")))? {
            let known = matches!(k.as_str(), "command" | "seed" | "jobs")
                || spec.inputs.iter().any(|i| i.key == k)
                || spec.params.iter().any(|(p, _)| *p == k);
            if known {
                file.insert(k, v);
            } else if spec.path == ["simulate"] && k.starts_with("quota.") {
                extra.push((k, v));
            } else {
                return Err(Error::validation(format!("{path}: unknown key {k:?} for {}", spec.name())).into());
            }
        }
        if let Some(c) = file.get("command") {
            if *c != spec.name() {
                return Err(Error::validation(format!("{path}: config is for {c:?}, not {:?}", spec.name())).into());
            }
        }
    }
    let pick = |key: &str| from_cli(m, key).or_else(|| file.get(key).cloned());
    let seed = match pick("seed") {
        Some(s) => s.parse().map_err(|_| Error::validation(format!("bad seed {s:?}")))?,
        None => 0,
    };
    let jobs = match pick("jobs") {
        Some(s) => match s.parse::<usize>() {
            Ok(j) if j >= 1 => j,
            _ => return Err(Error::validation(format!("bad jobs {s:?}; need an integer >= 1")).into()),
        },
        None => 1,
    };
    let mut inputs = BTreeMap::new();
    for i in &spec.inputs {
        match pick(i.key) {
            Some(p) => {
                inputs.insert(i.key.to_string(), PathBuf::from(p));
            }
            None if i.required => {
                return Err(Resolve::Usage(UsageError(format!(
                    "{} needs --{} <PATH>",
                    spec.name(),
                    flag(i.key)
                ))))
            }
            None => {}
        }
    }
    let mut params: Vec<(String, String)> = spec
        .params
        .iter()
        .map(|(k, d)| (k.clone(), pick(k).unwrap_or_else(|| d.clone())))
        .collect();
    let pair = if spec.path == ["stats", "ttest"] { m.get_many::<String>("summary") } else { None };
    if let Some(mut pair) = pair {
        for key in ["a", "b"] {
            let v = pair.next().expect("two values").clone();
            params.iter_mut().find(|(k, _)| k == key).expect("declared").1 = v;
        }
    }
    if let Some((k, _)) = params.iter().find(|(_, v)| v.is_empty()) {
        let hint = if spec.path == ["stats", "ttest"] { " (or --summary A B)".to_string() } else { String::new() };
        return Err(Resolve::Usage(UsageError(format!("{} needs --{} <VALUE>{hint}", spec.name(), flag(k)))));
    }
    Ok(RunConfig {
        command: spec.name(),
        seed,
        jobs,
        out: m.get_one::<String>("out").map(PathBuf::from),
        inputs,
        params,
        extra,
    })
}

impl RunConfig {
    pub fn input(&self, key: &str) -> &Path {
        self.inputs.get(key).map(PathBuf::as_path).expect("required input resolved")
    }

    pub fn param(&self, key: &str) -> &str {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("undeclared parameter {key}"))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.param(key);
        v.parse()
            .map_err(|_| Error::validation(format!("bad value {v:?} for {}", key)))
    }

    /// Text accepted back by `--config`. The output directory is left out so
    /// that reruns into different directories stay byte-identical.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# sharepref {} --config {RESOLVED_CONFIG} --out <dir>", self.command);
        let _ = writeln!(s, "command={}", self.command);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "jobs={}", self.jobs);
        for (k, p) in &self.inputs {
            let _ = writeln!(s, "{k}={}", p.display());
        }
        for (k, v) in self.params.iter().chain(&self.extra) {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}
