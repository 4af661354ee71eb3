//! File formats: network specs, edge-count tables, experiment configs, and
//! the PCS result CSV.
//!
//! Config documents are whitespace-separated `key=value` tokens; `#` starts
//! a comment running to the end of the line. A network spec is one of
//!
//! ```text
//! kind=linear-gap n=10 base=0.5 slope=0.03
//! kind=uniform-random n=20 seed=42
//! kind=edge-counts file=web.csv
//! ```
//!
//! An experiment config extends the network spec with `policies`, `m`,
//! `budgets`, `replications`, and optional `epsilon`, `base_seed`,
//! `aoa-weighted`.
//!
//! Edge-count files are CSV with header `from,to,count`, one row per
//! directed edge; absent pairs count as zero. Direction convention: x_ij
//! (i < j) is the probability mass favoring node i, so the count of
//! transitions INTO i from j is the `from=j,to=i` row. The node count is
//! the largest id in the file.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::chain::InteractionVector;
use crate::error::{Error, Result};
use crate::experiment::{
    make_truth_linear_gap, make_truth_uniform, ExperimentConfig, InteractionTruth, PcsCurve,
};
use crate::pair::Pair;
use crate::policy::PolicyKind;

/// Directed interaction counts; `count_into(i, j)` is the number of
/// observed transitions into i from j.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeCountTable {
    n: usize,
    counts: BTreeMap<(usize, usize), u64>,
}

impl EdgeCountTable {
    /// Parse the documented CSV format. Every error names its line.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut counts = BTreeMap::new();
        let mut max_node = 0usize;
        let mut saw_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if !saw_header {
                saw_header = true;
                if content.eq_ignore_ascii_case("from,to,count") {
                    continue;
                }
                return Err(Error::Parse {
                    line,
                    key: "header".into(),
                    message: format!("expected `from,to,count` header, got `{content}`"),
                });
            }
            let fields: Vec<&str> = content.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line,
                    key: "row".into(),
                    message: format!("expected 3 comma-separated fields, got {}", fields.len()),
                });
            }
            let parse_id = |field: &str, key: &str| -> Result<usize> {
                field.parse::<usize>().map_err(|_| Error::Parse {
                    line,
                    key: key.into(),
                    message: format!("`{field}` is not a nonnegative integer"),
                })
            };
            let from = parse_id(fields[0], "from")?;
            let to = parse_id(fields[1], "to")?;
            let count = fields[2].parse::<u64>().map_err(|_| Error::Parse {
                line,
                key: "count".into(),
                message: format!("`{}` is not a nonnegative integer", fields[2]),
            })?;
            if from == 0 || to == 0 {
                return Err(Error::Parse {
                    line,
                    key: "node id".into(),
                    message: "node ids are 1-based".into(),
                });
            }
            if from == to {
                return Err(Error::Parse {
                    line,
                    key: "node id".into(),
                    message: format!("self-interaction {from}->{to} is not representable"),
                });
            }
            match counts.entry((from, to)) {
                Entry::Vacant(v) => {
                    v.insert(count);
                }
                Entry::Occupied(_) => {
                    return Err(Error::Parse {
                        line,
                        key: "row".into(),
                        message: format!("duplicate row for directed pair {from}->{to}"),
                    });
                }
            }
            max_node = max_node.max(from).max(to);
        }
        if max_node < 2 {
            return Err(Error::NodeCount(max_node));
        }
        Ok(EdgeCountTable {
            n: max_node,
            counts,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Transitions into node i coming from node j.
    pub fn count_into(&self, i: usize, j: usize) -> u64 {
        self.counts.get(&(j, i)).copied().unwrap_or(0)
    }
}

/// Ground truth from directed counts: x_ij = c_ij / (c_ij + c_ji) where
/// c_ij counts visits into i from j; pairs without evidence default to the
/// symmetric 0.5.
pub fn truth_from_edge_counts(table: &EdgeCountTable) -> Result<InteractionTruth> {
    let x = InteractionVector::from_fn(table.n, |pair| {
        let into_i = table.count_into(pair.i(), pair.j());
        let into_j = table.count_into(pair.j(), pair.i());
        let total = into_i + into_j;
        if total == 0 {
            0.5
        } else {
            into_i as f64 / total as f64
        }
    })?;
    InteractionTruth::from_vector(x)
}

/// Declarative description of a ground-truth network.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSpec {
    LinearGap { n: usize, base: f64, slope: f64 },
    UniformRandom { n: usize, seed: u64 },
    EdgeCounts { file: PathBuf },
}

impl NetworkSpec {
    /// Build the truth; edge-count files resolve relative to `base_dir`.
    pub fn realize(&self, base_dir: &Path) -> Result<InteractionTruth> {
        match self {
            NetworkSpec::LinearGap { n, base, slope } => make_truth_linear_gap(*n, *base, *slope),
            NetworkSpec::UniformRandom { n, seed } => make_truth_uniform(*n, *seed),
            NetworkSpec::EdgeCounts { file } => {
                let path = if file.is_absolute() {
                    file.clone()
                } else {
                    base_dir.join(file)
                };
                let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                truth_from_edge_counts(&EdgeCountTable::parse_csv(&text)?)
            }
        }
    }
}

impl std::fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NetworkSpec::LinearGap { n, base, slope } => {
                write!(f, "kind=linear-gap n={n} base={base} slope={slope}")
            }
            NetworkSpec::UniformRandom { n, seed } => {
                write!(f, "kind=uniform-random n={n} seed={seed}")
            }
            NetworkSpec::EdgeCounts { file } => {
                write!(f, "kind=edge-counts file={}", file.display())
            }
        }
    }
}

/// `key=value` token with its source line.
#[derive(Debug, Clone)]
struct Token {
    line: usize,
    key: String,
    value: String,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        for word in content.split_whitespace() {
            let Some((key, value)) = word.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    key: word.into(),
                    message: "expected key=value".into(),
                });
            };
            if key.is_empty() || value.is_empty() {
                return Err(Error::Parse {
                    line,
                    key: word.into(),
                    message: "empty key or value".into(),
                });
            }
            tokens.push(Token {
                line,
                key: key.into(),
                value: value.into(),
            });
        }
    }
    Ok(tokens)
}

struct TokenMap {
    entries: BTreeMap<String, Token>,
}

impl TokenMap {
    fn new(tokens: Vec<Token>) -> Result<Self> {
        let mut entries: BTreeMap<String, Token> = BTreeMap::new();
        for token in tokens {
            if let Some(previous) = entries.get(&token.key) {
                return Err(Error::Parse {
                    line: token.line,
                    key: token.key.clone(),
                    message: format!("duplicate key (first set on line {})", previous.line),
                });
            }
            entries.insert(token.key.clone(), token);
        }
        Ok(TokenMap { entries })
    }

    fn take(&mut self, key: &str) -> Option<Token> {
        self.entries.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<Token> {
        self.take(key).ok_or_else(|| Error::Parse {
            line: 0,
            key: key.into(),
            message: "missing required key".into(),
        })
    }

    fn ensure_empty(&self) -> Result<()> {
        if let Some(token) = self.entries.values().next() {
            return Err(Error::Parse {
                line: token.line,
                key: token.key.clone(),
                message: "unknown key".into(),
            });
        }
        Ok(())
    }
}

fn parse_value<T: std::str::FromStr>(token: &Token, what: &str) -> Result<T> {
    token.value.parse::<T>().map_err(|_| Error::Parse {
        line: token.line,
        key: token.key.clone(),
        message: format!("`{}` is not a valid {what}", token.value),
    })
}

fn parse_network_from_map(map: &mut TokenMap) -> Result<NetworkSpec> {
    let kind = map.require("kind")?;
    match kind.value.as_str() {
        "linear-gap" => Ok(NetworkSpec::LinearGap {
            n: parse_value(&map.require("n")?, "node count")?,
            base: parse_value(&map.require("base")?, "number")?,
            slope: parse_value(&map.require("slope")?, "number")?,
        }),
        "uniform-random" => Ok(NetworkSpec::UniformRandom {
            n: parse_value(&map.require("n")?, "node count")?,
            seed: parse_value(&map.require("seed")?, "64-bit seed")?,
        }),
        "edge-counts" => Ok(NetworkSpec::EdgeCounts {
            file: PathBuf::from(map.require("file")?.value),
        }),
        other => Err(Error::Parse {
            line: kind.line,
            key: "kind".into(),
            message: format!("unknown kind `{other}`"),
        }),
    }
}

/// Parse a document containing exactly a network spec.
pub fn parse_network_spec(text: &str) -> Result<NetworkSpec> {
    let mut map = TokenMap::new(tokenize(text)?)?;
    let spec = parse_network_from_map(&mut map)?;
    map.ensure_empty()?;
    Ok(spec)
}

/// Experiment keys parsed from a config document, together with the
/// network spec they accompany.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub network: NetworkSpec,
    pub policies: Vec<PolicyKind>,
    pub m: usize,
    pub epsilon: f64,
    pub budgets: Vec<u64>,
    pub replications: u64,
    pub base_seed: u64,
    pub aoa_weighted: bool,
}

impl ExperimentSpec {
    pub fn realize(&self, base_dir: &Path) -> Result<ExperimentConfig> {
        let truth = self.network.realize(base_dir)?;
        let mut config = ExperimentConfig::new(truth, self.policies.clone(), self.m);
        config.epsilon = self.epsilon;
        config.budgets = self.budgets.clone();
        config.replications = self.replications;
        config.base_seed = self.base_seed;
        config.aoa_weighted = self.aoa_weighted;
        config.validate()?;
        Ok(config)
    }
}

/// Parse a combined network + experiment document.
pub fn parse_experiment_spec(text: &str) -> Result<ExperimentSpec> {
    let mut map = TokenMap::new(tokenize(text)?)?;
    let network = parse_network_from_map(&mut map)?;

    let policies_token = map.require("policies")?;
    let mut policies = Vec::new();
    for name in policies_token.value.split(',') {
        policies.push(name.parse::<PolicyKind>().map_err(|_| Error::Parse {
            line: policies_token.line,
            key: "policies".into(),
            message: format!("`{name}` is not one of EA, AOA, DAM"),
        })?);
    }

    let budgets_token = map.require("budgets")?;
    let mut budgets = Vec::new();
    for field in budgets_token.value.split(',') {
        budgets.push(field.parse::<u64>().map_err(|_| Error::Parse {
            line: budgets_token.line,
            key: "budgets".into(),
            message: format!("`{field}` is not a budget"),
        })?);
    }

    let m = parse_value(&map.require("m")?, "subset size")?;
    let replications = parse_value(&map.require("replications")?, "replication count")?;
    let epsilon = match map.take("epsilon") {
        Some(token) => parse_value(&token, "number")?,
        None => crate::policy::PolicyConfig::DEFAULT_EPSILON,
    };
    let base_seed = match map.take("base_seed") {
        Some(token) => parse_value(&token, "64-bit seed")?,
        None => 0,
    };
    let aoa_weighted = match map.take("aoa-weighted") {
        Some(token) => parse_value(&token, "boolean")?,
        None => false,
    };
    map.ensure_empty()?;

    Ok(ExperimentSpec {
        network,
        policies,
        m,
        epsilon,
        budgets,
        replications,
        base_seed,
        aoa_weighted,
    })
}

/// Load and realize an experiment config from a file; relative edge-count
/// paths resolve against the config file's directory.
pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let spec = parse_experiment_spec(&text)?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    spec.realize(base_dir)
}

/// Render the PCS curve as CSV: header `policy,budget,pcs,stderr,replications`,
/// rows ordered by policy name then ascending budget, values to six
/// decimal places.
pub fn pcs_csv_string(curve: &PcsCurve) -> String {
    let mut rows: Vec<_> = curve.cells.iter().collect();
    rows.sort_by(|a, b| {
        a.policy
            .name()
            .cmp(b.policy.name())
            .then(a.budget.cmp(&b.budget))
    });
    let mut out = String::from("policy,budget,pcs,stderr,replications\n");
    for cell in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{}",
            cell.policy, cell.budget, cell.pcs, cell.std_error, cell.replications
        );
    }
    out
}

/// Write the PCS curve CSV to a destination.
pub fn write_pcs_csv(curve: &PcsCurve, destination: &mut dyn Write) -> std::io::Result<()> {
    destination.write_all(pcs_csv_string(curve).as_bytes())
}
