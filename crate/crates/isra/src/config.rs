//! Run configuration: a small sectioned key/value text format with
//! line-numbered diagnostics.
//!
//! ```text
//! # comment
//! [run]
//! problem = toy                 # toy | oscillator | truss | linear_gaussian | external
//! pbox_mode = free              # free | parametric
//! method = two_level            # two_level | brute_force_oracle
//! seed = 42
//! replications = 20             # or: seeds = 1, 2, 3
//! output_dir = out/toy_free
//!
//! [problem]                     # external / linear_gaussian knobs
//! command = ./model.sh
//! dim = 2
//! beta = 2.5
//!
//! [variables]                   # external problems only; file order = input order
//! x1 = free gaussian 2.5 1.0 gaussian 1.5 1.0
//! x2 = parametric gaussian 1.5 2.5 1.0 1.0
//! x3 = precise gaussian 0.0 1.0
//! aux_x1 = gaussian 2.0 1.0     # optional auxiliary override
//!
//! [akmcs]                       # level-1 (and conditional) adaptive run
//! n_initial = 12
//! pool_size = 1000000
//! k = 2.0
//! eps_pf = 0.05
//! max_added = 200
//!
//! [akmcs2]                      # level-2 overrides (free mode); inherits [akmcs]
//! n_initial = 4
//!
//! [ego]
//! n_initial = 4
//! eps_ei = 1e-5
//! mode = separate               # separate | joint
//! max_added = 100
//! pf_transform = log10          # log10 | raw
//!
//! [isra]
//! level2_space = aux            # aux | unit_c
//!
//! [oracle]
//! n_mc = 1000000
//! corners = full                # full | synced | grid:<k>
//! ```
//!
//! Free variables list the lower envelope first (the right-shifted CDF),
//! then the upper envelope. Parametric variables list `<family>` followed by
//! the two parameter intervals `<p1_lo> <p1_hi> <p2_lo> <p2_hi>`.

use crate::dist::Family;
use crate::ego::{EgoMode, PfTransform};
use crate::isra_free::Level2Space;
use std::collections::BTreeSet;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: [{section}] {key}: {message}")]
    Field { line: usize, section: String, key: String, message: String },
    #[error("missing required key `{key}` in section [{section}]")]
    Missing { section: String, key: String },
    #[error("{0}")]
    Validation(String),
}

#[derive(Debug, Clone)]
struct RawEntry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct RawSection {
    name: String,
    entries: Vec<RawEntry>,
}

/// Low-level parse: ordered sections of ordered key/value pairs. Duplicate
/// keys within a section and data before the first section are rejected.
fn parse_sections(text: &str) -> Result<Vec<RawSection>, ConfigError> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        if let Some(inner) = stripped.strip_prefix('[') {
            let Some(name) = inner.strip_suffix(']') else {
                return Err(ConfigError::Syntax { line, message: "unterminated section header".into() });
            };
            let name = name.trim();
            if name.is_empty() {
                return Err(ConfigError::Syntax { line, message: "empty section name".into() });
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("duplicate section [{name}]"),
                });
            }
            sections.push(RawSection { name: name.to_string(), entries: Vec::new() });
            continue;
        }
        let Some(section) = sections.last_mut() else {
            return Err(ConfigError::Syntax {
                line,
                message: "key/value before any [section] header".into(),
            });
        };
        let Some(eq) = stripped.find('=') else {
            return Err(ConfigError::Syntax { line, message: format!("expected `key = value`, got `{stripped}`") });
        };
        let key = stripped[..eq].trim().to_string();
        let value = stripped[eq + 1..].trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line, message: "empty key".into() });
        }
        if section.entries.iter().any(|e| e.key == key) {
            return Err(ConfigError::Syntax {
                line,
                message: format!("duplicate key `{key}` in section [{}]", section.name),
            });
        }
        section.entries.push(RawEntry { key, value, line });
    }
    Ok(sections)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProblemSpec {
    Builtin { name: String },
    External { command: String, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PboxMode {
    Free,
    Parametric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    TwoLevel,
    BruteForceOracle,
}

/// Parameter sweep of the parametric oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerSpec {
    /// All corners of the parameter box.
    Full,
    /// The two synchronized corners (all-lower, all-upper).
    Synced,
    /// A k-per-dimension lattice.
    Grid(usize),
}

#[derive(Debug, Clone)]
pub enum VariableSpec {
    Free { lower: (Family, f64, f64), upper: (Family, f64, f64) },
    Parametric { family: Family, p1: (f64, f64), p2: (f64, f64) },
    Precise { family: Family, p1: f64, p2: f64 },
}

#[derive(Debug, Clone, Default)]
pub struct AkmcsOverrides {
    pub n_initial: Option<usize>,
    pub pool_size: Option<usize>,
    pub k: Option<f64>,
    pub eps_pf: Option<f64>,
    pub max_added: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct EgoOverrides {
    pub n_initial: Option<usize>,
    pub eps_ei: Option<f64>,
    pub mode: Option<EgoMode>,
    pub max_added: Option<usize>,
    pub pf_transform: Option<PfTransform>,
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub n_mc: usize,
    pub corners: CornerSpec,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { n_mc: 1_000_000, corners: CornerSpec::Full }
    }
}

/// Fully parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub beta: f64,
    pub dim: usize,
    pub pbox_mode: PboxMode,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub workers: Option<usize>,
    pub variables: Vec<VariableSpec>,
    pub aux_overrides: Vec<Option<(Family, f64, f64)>>,
    pub akmcs: AkmcsOverrides,
    pub akmcs2: AkmcsOverrides,
    pub ego: EgoOverrides,
    pub level2_space: Level2Space,
    pub oracle: OracleConfig,
    /// The raw config text, echoed into reports.
    pub raw_text: String,
}

struct SectionReader<'a> {
    section: &'a RawSection,
    used: BTreeSet<usize>,
}

impl<'a> SectionReader<'a> {
    fn new(section: &'a RawSection) -> Self {
        Self { section, used: BTreeSet::new() }
    }

    fn name(&self) -> &str {
        &self.section.name
    }

    fn get(&mut self, key: &str) -> Option<&'a RawEntry> {
        for (i, e) in self.section.entries.iter().enumerate() {
            if e.key == key {
                self.used.insert(i);
                return Some(e);
            }
        }
        None
    }

    fn field_err(&self, entry: &RawEntry, message: impl Into<String>) -> ConfigError {
        ConfigError::Field {
            line: entry.line,
            section: self.name().to_string(),
            key: entry.key.clone(),
            message: message.into(),
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| self.field_err(e, format!("invalid {what} `{}`", e.value))),
        }
    }

    fn unknown_keys(&self) -> Option<&RawEntry> {
        self.section
            .entries
            .iter()
            .enumerate()
            .find(|(i, _)| !self.used.contains(i))
            .map(|(_, e)| e)
    }
}

fn parse_family(token: &str) -> Option<Family> {
    match token {
        "gaussian" | "normal" => Some(Family::Gaussian),
        "lognormal" => Some(Family::Lognormal),
        "uniform" => Some(Family::Uniform),
        _ => None,
    }
}

fn parse_variable(reader: &SectionReader, e: &RawEntry) -> Result<VariableSpec, ConfigError> {
    let tokens: Vec<&str> = e.value.split_whitespace().collect();
    let err = |msg: String| reader.field_err(e, msg);
    let num = |s: &str| -> Result<f64, ConfigError> {
        s.parse::<f64>().map_err(|_| err(format!("invalid number `{s}`")))
    };
    let family = |s: &str| -> Result<Family, ConfigError> {
        parse_family(s).ok_or_else(|| err(format!("unknown family `{s}`")))
    };
    match tokens.first().copied() {
        Some("free") => {
            if tokens.len() != 7 {
                return Err(err(
                    "expected `free <family> <p1> <p2> <family> <p1> <p2>` (lower then upper envelope)"
                        .into(),
                ));
            }
            Ok(VariableSpec::Free {
                lower: (family(tokens[1])?, num(tokens[2])?, num(tokens[3])?),
                upper: (family(tokens[4])?, num(tokens[5])?, num(tokens[6])?),
            })
        }
        Some("parametric") => {
            if tokens.len() != 6 {
                return Err(err(
                    "expected `parametric <family> <p1_lo> <p1_hi> <p2_lo> <p2_hi>`".into(),
                ));
            }
            Ok(VariableSpec::Parametric {
                family: family(tokens[1])?,
                p1: (num(tokens[2])?, num(tokens[3])?),
                p2: (num(tokens[4])?, num(tokens[5])?),
            })
        }
        Some("precise") => {
            if tokens.len() != 4 {
                return Err(err("expected `precise <family> <p1> <p2>`".into()));
            }
            Ok(VariableSpec::Precise {
                family: family(tokens[1])?,
                p1: num(tokens[2])?,
                p2: num(tokens[3])?,
            })
        }
        _ => Err(err("variable must start with free | parametric | precise".into())),
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let sections = parse_sections(text)?;
        let find = |name: &str| sections.iter().find(|s| s.name == name);

        let run_section = find("run").ok_or_else(|| ConfigError::Missing {
            section: "run".into(),
            key: "(section)".into(),
        })?;
        let mut run = SectionReader::new(run_section);

        let problem_entry = run
            .get("problem")
            .ok_or_else(|| ConfigError::Missing { section: "run".into(), key: "problem".into() })?
            .clone();

        let pbox_mode = match run.get("pbox_mode") {
            None => PboxMode::Free,
            Some(e) => match e.value.as_str() {
                "free" => PboxMode::Free,
                "parametric" => PboxMode::Parametric,
                other => return Err(run.field_err(e, format!("expected free|parametric, got `{other}`"))),
            },
        };
        let method = match run.get("method") {
            None => Method::TwoLevel,
            Some(e) => match e.value.as_str() {
                "two_level" => Method::TwoLevel,
                "brute_force_oracle" => Method::BruteForceOracle,
                other => {
                    return Err(
                        run.field_err(e, format!("expected two_level|brute_force_oracle, got `{other}`"))
                    )
                }
            },
        };

        let seeds: Vec<u64> = if let Some(e) = run.get("seeds") {
            let mut out = Vec::new();
            for tok in e.value.split(',') {
                let tok = tok.trim();
                out.push(
                    tok.parse::<u64>()
                        .map_err(|_| run.field_err(e, format!("invalid seed `{tok}`")))?,
                );
            }
            if out.is_empty() {
                return Err(run.field_err(e, "empty seed list"));
            }
            out
        } else {
            let seed = run.parse::<u64>("seed", "seed")?.unwrap_or(0);
            let reps = run.parse::<usize>("replications", "replication count")?.unwrap_or(1);
            if reps == 0 {
                let e = run.get("replications").expect("present when zero");
                return Err(run.field_err(e, "replications must be at least 1"));
            }
            (0..reps as u64).map(|k| seed.wrapping_add(k)).collect()
        };

        let output_dir = PathBuf::from(
            run.get("output_dir")
                .map(|e| e.value.clone())
                .unwrap_or_else(|| "isra-out".to_string()),
        );
        let workers = run.parse::<usize>("workers", "worker count")?;
        if let Some(0) = workers {
            let e = run.get("workers").expect("present");
            return Err(run.field_err(e, "workers must be at least 1"));
        }
        if let Some(e) = run.unknown_keys() {
            return Err(run.field_err(e, "unknown key"));
        }

        let mut beta = 2.5;
        let mut dim = 2usize;
        let mut command: Option<String> = None;
        if let Some(s) = find("problem") {
            let mut r = SectionReader::new(s);
            if let Some(b) = r.parse::<f64>("beta", "beta")? {
                beta = b;
            }
            if let Some(d) = r.parse::<usize>("dim", "dimension")? {
                dim = d;
            }
            command = r.get("command").map(|e| e.value.clone());
            if let Some(e) = r.unknown_keys() {
                return Err(r.field_err(e, "unknown key"));
            }
        }

        let problem = match problem_entry.value.as_str() {
            "external" => {
                let command = command.ok_or_else(|| ConfigError::Missing {
                    section: "problem".into(),
                    key: "command".into(),
                })?;
                ProblemSpec::External { command, dim }
            }
            name => ProblemSpec::Builtin { name: name.to_string() },
        };

        let mut variables: Vec<VariableSpec> = Vec::new();
        let mut aux_overrides: Vec<Option<(Family, f64, f64)>> = Vec::new();
        if let Some(s) = find("variables") {
            let reader = SectionReader::new(s);
            let mut names: Vec<String> = Vec::new();
            for e in &s.entries {
                if e.key.starts_with("aux_") {
                    continue;
                }
                names.push(e.key.clone());
                variables.push(parse_variable(&reader, e)?);
            }
            aux_overrides = vec![None; variables.len()];
            for e in &s.entries {
                let Some(base) = e.key.strip_prefix("aux_") else { continue };
                let Some(idx) = names.iter().position(|n| n == base) else {
                    return Err(reader.field_err(e, format!("aux override for unknown variable `{base}`")));
                };
                let tokens: Vec<&str> = e.value.split_whitespace().collect();
                if tokens.len() != 3 {
                    return Err(reader.field_err(e, "expected `<family> <p1> <p2>`"));
                }
                let fam = parse_family(tokens[0])
                    .ok_or_else(|| reader.field_err(e, format!("unknown family `{}`", tokens[0])))?;
                let p1 = tokens[1]
                    .parse::<f64>()
                    .map_err(|_| reader.field_err(e, format!("invalid number `{}`", tokens[1])))?;
                let p2 = tokens[2]
                    .parse::<f64>()
                    .map_err(|_| reader.field_err(e, format!("invalid number `{}`", tokens[2])))?;
                aux_overrides[idx] = Some((fam, p1, p2));
            }
        }
        if matches!(problem, ProblemSpec::External { .. }) {
            if variables.is_empty() {
                return Err(ConfigError::Missing {
                    section: "variables".into(),
                    key: "(at least one variable)".into(),
                });
            }
            if variables.len() != dim {
                return Err(ConfigError::Validation(format!(
                    "external problem declares dim = {dim} but [variables] lists {}",
                    variables.len()
                )));
            }
        } else if !variables.is_empty() {
            return Err(ConfigError::Validation(
                "[variables] is only valid for external problems; builtins carry their own inputs"
                    .into(),
            ));
        }

        let read_akmcs = |name: &str| -> Result<AkmcsOverrides, ConfigError> {
            let Some(s) = find(name) else { return Ok(AkmcsOverrides::default()) };
            let mut r = SectionReader::new(s);
            let out = AkmcsOverrides {
                n_initial: r.parse("n_initial", "count")?,
                pool_size: r.parse("pool_size", "count")?,
                k: r.parse("k", "multiplier")?,
                eps_pf: r.parse("eps_pf", "tolerance")?,
                max_added: r.parse("max_added", "count")?,
            };
            if let Some(e) = r.get("eps_pf") {
                let v: f64 = e.value.parse().expect("validated above");
                if !(v > 0.0 && v < 1.0) {
                    return Err(r.field_err(e, format!("eps_pf must lie in the open interval (0, 1), got {v}")));
                }
            }
            if let Some(e) = r.get("k") {
                let v: f64 = e.value.parse().expect("validated above");
                if !(v > 0.0) {
                    return Err(r.field_err(e, format!("k must be positive, got {v}")));
                }
            }
            if let Some(e) = r.get("n_initial") {
                let v: usize = e.value.parse().expect("validated above");
                if v < 2 {
                    return Err(r.field_err(e, format!("n_initial must be at least 2, got {v}")));
                }
            }
            if let Some(e) = r.get("pool_size") {
                let v: usize = e.value.parse().expect("validated above");
                if v < 100 {
                    return Err(r.field_err(e, format!("pool_size must be at least 100, got {v}")));
                }
            }
            if let Some(e) = r.unknown_keys() {
                return Err(r.field_err(e, "unknown key"));
            }
            Ok(out)
        };
        let akmcs = read_akmcs("akmcs")?;
        let akmcs2 = read_akmcs("akmcs2")?;

        let mut ego = EgoOverrides::default();
        if let Some(s) = find("ego") {
            let mut r = SectionReader::new(s);
            ego.n_initial = r.parse("n_initial", "count")?;
            ego.eps_ei = r.parse("eps_ei", "tolerance")?;
            ego.max_added = r.parse("max_added", "count")?;
            if let Some(e) = r.get("mode") {
                ego.mode = Some(match e.value.as_str() {
                    "separate" => EgoMode::Separate,
                    "joint" => EgoMode::Joint,
                    other => return Err(r.field_err(e, format!("expected separate|joint, got `{other}`"))),
                });
            }
            if let Some(e) = r.get("pf_transform") {
                ego.pf_transform = Some(match e.value.as_str() {
                    "log10" => PfTransform::Log10,
                    "raw" => PfTransform::Raw,
                    other => return Err(r.field_err(e, format!("expected log10|raw, got `{other}`"))),
                });
            }
            if let Some(e) = r.get("eps_ei") {
                let v: f64 = e.value.parse().expect("validated above");
                if !(v > 0.0) {
                    return Err(r.field_err(e, format!("eps_ei must be positive, got {v}")));
                }
            }
            if let Some(e) = r.unknown_keys() {
                return Err(r.field_err(e, "unknown key"));
            }
        }

        let mut level2_space = Level2Space::Auxiliary;
        if let Some(s) = find("isra") {
            let mut r = SectionReader::new(s);
            if let Some(e) = r.get("level2_space") {
                level2_space = match e.value.as_str() {
                    "aux" => Level2Space::Auxiliary,
                    "unit_c" => Level2Space::UnitC,
                    other => return Err(r.field_err(e, format!("expected aux|unit_c, got `{other}`"))),
                };
            }
            if let Some(e) = r.unknown_keys() {
                return Err(r.field_err(e, "unknown key"));
            }
        }

        let mut oracle = OracleConfig::default();
        if let Some(s) = find("oracle") {
            let mut r = SectionReader::new(s);
            if let Some(n) = r.parse::<usize>("n_mc", "count")? {
                if n < 100 {
                    let e = r.get("n_mc").expect("present");
                    return Err(r.field_err(e, format!("n_mc must be at least 100, got {n}")));
                }
                oracle.n_mc = n;
            }
            if let Some(e) = r.get("corners") {
                oracle.corners = match e.value.as_str() {
                    "full" => CornerSpec::Full,
                    "synced" => CornerSpec::Synced,
                    other => match other.strip_prefix("grid:") {
                        Some(k) => {
                            let k: usize = k
                                .parse()
                                .map_err(|_| r.field_err(e, format!("invalid grid size `{k}`")))?;
                            if k < 2 {
                                return Err(r.field_err(e, "grid size must be at least 2"));
                            }
                            CornerSpec::Grid(k)
                        }
                        None => {
                            return Err(
                                r.field_err(e, format!("expected full|synced|grid:<k>, got `{other}`"))
                            )
                        }
                    },
                };
            }
            if let Some(e) = r.unknown_keys() {
                return Err(r.field_err(e, "unknown key"));
            }
        }

        for s in &sections {
            if !["run", "problem", "variables", "akmcs", "akmcs2", "ego", "isra", "oracle"]
                .contains(&s.name.as_str())
            {
                return Err(ConfigError::Validation(format!("unknown section [{}]", s.name)));
            }
        }

        Ok(Self {
            problem,
            beta,
            dim,
            pbox_mode,
            method,
            seeds,
            output_dir,
            workers,
            variables,
            aux_overrides,
            akmcs,
            akmcs2,
            ego,
            level2_space,
            oracle,
            raw_text: text.to_string(),
        })
    }
}
