//! `erc-sentinel` command-line tool.
//!
//! Exit codes: 0 success (for `audit`, no findings; for `validate`, no
//! issues), 1 findings or validation issues, 2 operational error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use erc_sentinel::bundled;
use erc_sentinel::config::{build_gateway, Settings};
use erc_sentinel::ingest::{build_ruleset, ErcDocument, IngestOptions};
use erc_sentinel::{parse_ruleset, run_audit, save_ruleset};
use erc_sentinel_core::audit::{render_report, AuditConfig};
use erc_sentinel_core::rules::{validate_ruleset, ErcRuleSet};
use erc_sentinel_core::solidity::{parse_contract, slice_public_function};
use erc_sentinel_core::PromptOptions;

const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Parser)]
#[command(name = "erc-sentinel", version, about = "Check Solidity contracts against ERC rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draft a rule file from an ERC document; every rule starts pending.
    ExtractRules(ExtractArgs),
    /// Check a rule file and optionally mark every rule approved.
    Validate(ValidateArgs),
    /// Print the code slice built for one public function.
    Slice(SliceArgs),
    /// Audit a contract against an approved rule file.
    Audit(AuditArgs),
}

/// Model settings shared by the commands that talk to a model. Each flag
/// falls back to its environment variable, then to the config file.
#[derive(Args)]
struct ModelArgs {
    /// TOML config file (default: ./erc-sentinel.toml when present).
    #[arg(long, env = "ERC_SENTINEL_CONFIG")]
    config: Option<PathBuf>,
    /// Scripted responses instead of a live model; no network access.
    #[arg(long, env = "ERC_SENTINEL_MOCK")]
    mock: Option<PathBuf>,
    /// Chat-completions endpoint URL.
    #[arg(long, env = "ERC_SENTINEL_ENDPOINT")]
    endpoint: Option<String>,
    #[arg(long, env = "ERC_SENTINEL_MODEL")]
    model: Option<String>,
    #[arg(long, env = "ERC_SENTINEL_TEMPERATURE")]
    temperature: Option<f64>,
    /// Concurrent requests.
    #[arg(long, env = "ERC_SENTINEL_MAX_IN_FLIGHT")]
    max_in_flight: Option<usize>,
    /// Largest prompt, in estimated tokens.
    #[arg(long, env = "ERC_SENTINEL_BUDGET")]
    budget: Option<usize>,
    /// Append one JSON line per request to this file.
    #[arg(long, env = "ERC_SENTINEL_LEDGER")]
    ledger: Option<PathBuf>,
    /// Name of the environment variable holding the API key.
    #[arg(long, env = "ERC_SENTINEL_API_KEY_ENV")]
    api_key_env: Option<String>,
}

impl ModelArgs {
    fn flag_layer(&self) -> Settings {
        Settings {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            temperature: self.temperature,
            max_in_flight: self.max_in_flight,
            input_budget: self.budget,
            api_key_env: self.api_key_env.clone(),
            mock: self.mock.clone(),
            ledger: self.ledger.clone(),
            ..Settings::default()
        }
    }

    fn settings(&self, extra: Settings) -> Result<Settings> {
        let file = Settings::from_file(self.config.as_deref())?;
        Ok(self.flag_layer().or(extra).or(file))
    }
}

#[derive(Args)]
struct ExtractArgs {
    /// ERC document (markdown).
    doc: PathBuf,
    /// Output rule file.
    #[arg(short, long)]
    out: PathBuf,
    /// Overwrite the output file if it exists.
    #[arg(long)]
    force: bool,
    /// ERC id used for rule ids (default: read from the document).
    #[arg(long)]
    erc: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct ValidateArgs {
    rules: PathBuf,
    /// Mark every rule approved and rewrite the file (needs --yes).
    #[arg(long)]
    approve_all: bool,
    /// Confirm --approve-all.
    #[arg(long)]
    yes: bool,
}

#[derive(Args)]
struct SliceArgs {
    contract: PathBuf,
    /// `name` or `Contract.name`.
    function: String,
    /// Print line/reason pairs as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AuditArgs {
    contract: PathBuf,
    /// Rule file path, or `builtin:erc20` (also erc721, erc1155, erc3525).
    #[arg(long, env = "ERC_SENTINEL_RULES")]
    rules: Option<String>,
    /// text or json.
    #[arg(long, env = "ERC_SENTINEL_FORMAT")]
    format: Option<String>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Quote the rule text instead of asking the rule-specific question.
    #[arg(long)]
    no_specialize: bool,
    /// Leave out one-shot examples.
    #[arg(long)]
    no_one_shot: bool,
    /// Ask compound rules in a single prompt.
    #[arg(long)]
    no_split_compound: bool,
    #[command(flatten)]
    model: ModelArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ExtractRules(a) => extract_rules(a),
        Command::Validate(a) => validate(a),
        Command::Slice(a) => slice(a),
        Command::Audit(a) => audit(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Writes to standard output; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn extract_rules(a: ExtractArgs) -> Result<u8> {
    let body = read(&a.doc)?;
    if a.out.exists() && !a.force {
        bail!("{} already exists; pass --force to overwrite", a.out.display());
    }
    let settings = a.model.settings(Settings::default())?;
    let gateway = build_gateway(&settings)?;
    let fallback = a
        .doc
        .file_stem()
        .map(|s| s.to_string_lossy().to_ascii_uppercase())
        .unwrap_or_else(|| "ERC".into());
    let erc_id = a.erc.unwrap_or_else(|| ErcDocument::infer_erc_id(&body, &fallback));
    let doc = ErcDocument::new(erc_id, body)?;
    let opts = IngestOptions {
        budget: gateway.config().input_budget,
        workers: gateway.config().max_in_flight,
    };
    let (set, log) = build_ruleset(&doc, &gateway, &opts)?;

    fs::write(&a.out, save_ruleset(&set)).with_context(|| format!("cannot write {}", a.out.display()))?;
    let log_path = log_path(&a.out);
    fs::write(&log_path, log.to_string()).with_context(|| format!("cannot write {}", log_path.display()))?;
    for w in &log.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "wrote {} draft rules to {} ({} rejected objects; log in {})",
        set.rule_count(),
        a.out.display(),
        log.rejections.len(),
        log_path.display()
    );
    eprintln!("review the file, then run `erc-sentinel validate {} --approve-all --yes`", a.out.display());
    Ok(0)
}

fn log_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".log");
    PathBuf::from(name)
}

fn validate(a: ValidateArgs) -> Result<u8> {
    if a.approve_all && !a.yes {
        bail!("--approve-all rewrites every review field; confirm with --yes");
    }
    let text = read(&a.rules)?;
    let mut set = parse_ruleset(&text).with_context(|| a.rules.display().to_string())?;
    let mut out = String::new();
    if a.approve_all {
        set.approve_all();
        fs::write(&a.rules, save_ruleset(&set)).with_context(|| format!("cannot write {}", a.rules.display()))?;
        out.push_str(&format!("approved {} rules in {}\n", set.rule_count(), a.rules.display()));
    }
    let issues = validate_ruleset(&set);
    for issue in &issues {
        out.push_str(&format!("{issue}\n"));
    }
    let code = if issues.is_empty() {
        out.push_str(&format!("{}: {} rules, no issues\n", a.rules.display(), set.rule_count()));
        0
    } else {
        out.push_str(&format!("{}: {} issues\n", a.rules.display(), issues.len()));
        1
    };
    emit(&out)?;
    Ok(code)
}

fn slice(a: SliceArgs) -> Result<u8> {
    let source = read(&a.contract)?;
    let model = parse_contract(&source).with_context(|| a.contract.display().to_string())?;
    let id = model
        .find_function(&a.function)
        .ok_or_else(|| anyhow!("unknown function `{}`", a.function))?;
    if !model.function(id).visibility.is_externally_callable() {
        bail!("`{}` is not a public function", a.function);
    }
    let slice = slice_public_function(&model, id);
    if a.json {
        let lines: Vec<_> = slice
            .entries()
            .map(|(line, reason, text)| serde_json::json!({ "line": line, "reason": reason.as_str(), "text": text }))
            .collect();
        let doc = serde_json::json!({
            "contract": slice.contract,
            "function": slice.function,
            "line_count": slice.len(),
            "lines": lines,
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        emit(&text)?;
    } else {
        emit(&slice.dump())?;
    }
    Ok(0)
}

/// Rule file text and a display name for `spec`.
fn load_rules_text(spec: &str) -> Result<(String, String)> {
    match spec.strip_prefix(BUILTIN_PREFIX) {
        Some(name) => {
            let b = bundled::find(name).ok_or_else(|| anyhow!("no bundled rule set named `{name}`"))?;
            Ok((b.text.to_string(), spec.to_string()))
        }
        None => Ok((read(Path::new(spec))?, spec.to_string())),
    }
}

fn load_rules(spec: &str) -> Result<ErcRuleSet> {
    let (text, name) = load_rules_text(spec)?;
    parse_ruleset(&text).with_context(|| name)
}

fn audit(a: AuditArgs) -> Result<u8> {
    let extra = Settings {
        rules: a.rules.clone().map(PathBuf::from),
        format: a.format.clone(),
        ..Settings::default()
    };
    let settings = a.model.settings(extra)?;
    let format = settings.report_format()?;
    let rules_spec = settings
        .rules
        .as_ref()
        .map(|p| p.to_string_lossy().into_owned())
        .ok_or_else(|| anyhow!("no rule file given; pass --rules"))?;
    let rules = load_rules(&rules_spec)?;
    let source = read(&a.contract)?;
    let gateway = build_gateway(&settings)?;

    let config = AuditConfig {
        contract_path: a.contract.display().to_string(),
        prompt: PromptOptions {
            budget: gateway.config().input_budget,
            specialize: !a.no_specialize,
            one_shot: !a.no_one_shot,
            split_compound: !a.no_split_compound,
        },
    };
    let report = run_audit(&source, &rules, &gateway, &config, gateway.config().max_in_flight)?;
    let rendered = render_report(&report, format);
    match &a.out {
        Some(path) => fs::write(path, &rendered).with_context(|| format!("cannot write {}", path.display()))?,
        None => emit(&rendered)?,
    }
    Ok(u8::from(report.has_findings()))
}
