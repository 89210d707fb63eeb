//! `rulecheck` command line.
//!
//! Exit codes: 0 clean, 1 findings (a confirmed conflict or an unreachable
//! rule), 2 input, usage or I/O errors, 3 state limit exceeded.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analysis::{analyze, AnalysisOptions, AnalysisReport};
use crate::automaton::InitPolicy;
use crate::explorer::{Checker, ExploreError, DEFAULT_STATE_CAP};
use crate::query::{parse_query, PathQuantifier, QueryError};
use crate::rulebase::{parse_rule_base, validate, ParseError, RuleBase};
use crate::uppaal_export::{self, conflict_query, reachability_query, ALL_RULES_USED_QUERY};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rulecheck", version, about = "Detect conflicting and unreachable rules by model checking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every conflict candidate and the reachability of every rule.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include witness traces.
        #[arg(long)]
        witness: bool,
    },
    /// Evaluate a single `E<>` or `A[]` query.
    Query {
        #[command(flatten)]
        common: Common,
        query: String,
        #[arg(long)]
        witness: bool,
    },
    /// Write an UPPAAL model, query file and manifest.
    Export {
        #[command(flatten)]
        common: Common,
        /// Base path for `<out>.xml`, `<out>.q` and `<out>.manifest.json`,
        /// or an existing directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count reachable states and location pairs.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Rule file.
    input: PathBuf,
    /// Rule whose LHS `initp()` makes true, by name (`r3`) or index (`3`).
    #[arg(long, default_value = "0")]
    seed: String,
    /// Maximum number of product states to explore.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP, value_parser = clap::value_parser!(usize))]
    cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: invalid rule base: {messages}")]
    Invalid { path: PathBuf, messages: String },
    #[error("unknown seed rule '{0}'")]
    Seed(String),
    #[error("{0}")]
    Query(#[from] QueryError),
    #[error("{0}")]
    Explore(#[from] ExploreError),
    #[error("state cap must be at least 1")]
    Cap,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Explore(ExploreError::ResourceLimit { .. }) => EXIT_RESOURCE,
            _ => EXIT_INPUT,
        }
    }
}

struct Loaded {
    rb: RuleBase,
    policy: InitPolicy,
    cap: usize,
}

fn load(common: &Common) -> Result<Loaded, CliError> {
    if common.cap == 0 {
        return Err(CliError::Cap);
    }
    let path = &common.input;
    let source = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
    let rb = parse_rule_base(&source).map_err(|source| CliError::Parse { path: path.clone(), source })?;
    let diags = validate(&rb);
    if !diags.is_empty() {
        let messages = diags.iter().map(|d| d.message.as_str()).collect::<Vec<_>>().join("; ");
        return Err(CliError::Invalid { path: path.clone(), messages });
    }
    let seed = resolve_seed(&rb, &common.seed)?;
    Ok(Loaded { rb, policy: InitPolicy::seeded(seed), cap: common.cap })
}

fn resolve_seed(rb: &RuleBase, seed: &str) -> Result<usize, CliError> {
    if let Some(rule) = rb.rule_by_name(seed) {
        return Ok(rule.id);
    }
    match seed.parse::<usize>() {
        Ok(idx) if idx < rb.rule_count() => Ok(idx),
        _ => Err(CliError::Seed(seed.to_string())),
    }
}

fn verdict_text(satisfied: bool) -> &'static str {
    if satisfied {
        "property is satisfied"
    } else {
        "property is not satisfied"
    }
}

/// Human-readable report. Lists the same findings as the JSON form.
pub fn render_text(rb: &RuleBase, report: &AnalysisReport, with_witness: bool) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ =
        writeln!(s, "rule base: {} rules ({}), {} propositions", report.rules, report.names.join(", "), report.props);
    let stores: Vec<String> = report
        .init
        .stores
        .iter()
        .map(|p| format!("[{}]", p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")))
        .collect();
    let _ = writeln!(s, "seed: {} -> initial p = {}", rb.rules[report.init.seed_rule].name, stores.join(" or "));

    let _ = writeln!(s, "\nconfliction:");
    if report.conflicts.is_empty() {
        let _ = writeln!(s, "  no rules with complementary deductions");
    }
    for c in &report.conflicts {
        let (x, y) = (&rb.rules[c.candidate.rule_x].name, &rb.rules[c.candidate.rule_y].name);
        let _ = write!(
            s,
            "  {} (p{}): {}",
            conflict_query(rb, &c.candidate),
            c.candidate.prop_index,
            verdict_text(c.confirmed)
        );
        if c.confirmed {
            let _ = writeln!(s, " -> {x} and {y} are in conflict");
        } else {
            let _ = writeln!(s);
        }
        if let (true, Some(w)) = (with_witness, &c.witness) {
            let _ = write!(s, "{w}");
        }
    }

    let _ = writeln!(s, "\nunreachability:");
    let _ = writeln!(s, "  {ALL_RULES_USED_QUERY}: {}", verdict_text(report.all_rules_used));
    if let (true, Some(w)) = (with_witness, &report.all_rules_used_witness) {
        let _ = write!(s, "{w}");
    }
    for f in &report.reachability {
        let name = &rb.rules[f.rule_id].name;
        let _ = write!(s, "  {}: {}", reachability_query(rb, f.rule_id), verdict_text(f.reachable));
        if f.reachable {
            let _ = writeln!(s);
        } else {
            let _ = writeln!(s, " -> {name} is unreachable");
        }
        if let (true, Some(w)) = (with_witness, &f.witness) {
            let _ = write!(s, "{w}");
        }
    }

    if let Some(st) = &report.stats {
        let _ = writeln!(
            s,
            "\nstates: {} reachable, {} location pairs (bound (3+{})^2 = {})",
            st.states, st.location_pairs, report.rules, st.location_pair_bound
        );
    }

    let conflicts: Vec<String> = report
        .confirmed_conflicts()
        .map(|c| format!("{}/{}", rb.rules[c.candidate.rule_x].name, rb.rules[c.candidate.rule_y].name))
        .collect();
    let unreachable: Vec<&str> = report.unreachable_rules().map(|f| rb.rules[f.rule_id].name.as_str()).collect();
    let _ = writeln!(
        s,
        "\nfindings: {} confirmed conflict(s){}, {} unreachable rule(s){}",
        conflicts.len(),
        if conflicts.is_empty() { String::new() } else { format!(" ({})", conflicts.join(", ")) },
        unreachable.len(),
        if unreachable.is_empty() { String::new() } else { format!(" ({})", unreachable.join(", ")) },
    );
    s
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.to_path_buf(), source }),
        None => {
            out.write_all(text.as_bytes()).map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })
        }
    }
}

fn report_or_error(loaded: &Loaded) -> Result<AnalysisReport, CliError> {
    analyze(&loaded.rb, loaded.policy, AnalysisOptions { state_cap: loaded.cap })
        .map_err(|e| CliError::Explore(e.source))
}

fn cmd_check(
    common: &Common,
    format: Format,
    out_path: Option<&Path>,
    witness: bool,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let loaded = load(common)?;
    let report = report_or_error(&loaded)?;
    let text = match format {
        Format::Text => render_text(&loaded.rb, &report, witness),
        Format::Json => {
            let mut shown = report.clone();
            if !witness {
                shown.conflicts.iter_mut().for_each(|c| c.witness = None);
                shown.reachability.iter_mut().for_each(|f| f.witness = None);
                shown.all_rules_used_witness = None;
            }
            serde_json::to_string_pretty(&shown).expect("report serializes") + "\n"
        }
    };
    emit(out, out_path, &text)?;
    Ok(if report.has_findings() { EXIT_FINDINGS } else { EXIT_CLEAN })
}

fn cmd_query(common: &Common, query: &str, witness: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let loaded = load(common)?;
    let q = parse_query(query, &loaded.rb)?;
    let checker = Checker::new(&loaded.rb, loaded.policy)?.with_state_cap(loaded.cap);
    let verdict = q.check(&checker)?;
    let mut text = format!("{}\n", verdict_text(verdict.satisfied));
    if witness {
        if let Some(w) = &verdict.witness {
            let heading = match q.quantifier {
                PathQuantifier::Possibly => "witness",
                PathQuantifier::Invariantly => "counterexample",
            };
            text.push_str(&format!("{heading}:\n{w}"));
        }
    }
    emit(out, None, &text)?;
    Ok(EXIT_CLEAN)
}

fn cmd_export(common: &Common, out_path: Option<&Path>, out: &mut dyn Write) -> Result<i32, CliError> {
    let loaded = load(common)?;
    let report = report_or_error(&loaded)?;
    let stem = common.input.file_stem().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("rules"));
    let base = match out_path {
        Some(p) if p.is_dir() => p.join(&stem),
        Some(p) => p.to_path_buf(),
        None => common.input.with_file_name(&stem),
    };
    let bundle = uppaal_export::export_bundle(&loaded.rb, loaded.policy, &report);
    let paths =
        uppaal_export::write_bundle(&bundle, &base).map_err(|source| CliError::Io { path: base.clone(), source })?;
    let listing: String = paths.iter().map(|p| format!("{}\n", p.display())).collect();
    emit(out, None, &listing)?;
    Ok(EXIT_CLEAN)
}

fn cmd_stats(common: &Common, format: Format, out: &mut dyn Write) -> Result<i32, CliError> {
    let loaded = load(common)?;
    let checker = Checker::new(&loaded.rb, loaded.policy)?.with_state_cap(loaded.cap);
    let stats = checker.reachable_stats()?;
    let m = loaded.rb.rule_count();
    let bound = (3 + m) * (3 + m);
    let text = match format {
        Format::Text => format!(
            "rules: {m}\npropositions: {}\nreachable states: {}\nlocation pairs: {}\nbound (3+m)^2: {bound}\n",
            loaded.rb.prop_count, stats.states, stats.location_pairs
        ),
        Format::Json => {
            let v = serde_json::json!({
                "rules": m,
                "props": loaded.rb.prop_count,
                "states": stats.states,
                "location_pairs": stats.location_pairs,
                "location_pair_bound": bound,
            });
            serde_json::to_string_pretty(&v).expect("stats serialize") + "\n"
        }
    };
    emit(out, None, &text)?;
    Ok(EXIT_CLEAN)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_CLEAN };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Check { common, format, out: path, witness } => {
            cmd_check(common, *format, path.as_deref(), *witness, out)
        }
        Command::Query { common, query, witness } => cmd_query(common, query, *witness, out),
        Command::Export { common, out: path } => cmd_export(common, path.as_deref(), out),
        Command::Stats { common, format } => cmd_stats(common, *format, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
