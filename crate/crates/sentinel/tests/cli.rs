//! The `erc-sentinel` binary, driven as a user would.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use erc_sentinel::bundled;
use erc_sentinel::run_audit;
use erc_sentinel_core::audit::AuditConfig;
use proptest::prelude::*;

fn cli(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_erc-sentinel"));
    cmd.args(args).current_dir(dir);
    for (k, _) in std::env::vars() {
        if k.starts_with("ERC_SENTINEL_") {
            cmd.env_remove(k);
        }
    }
    cmd.envs(env.iter().copied());
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn extract_rules_is_deterministic_and_pending() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("erc20.yaml");
    let doc = fixture_path("erc20.md");
    let mock = fixture_path("erc20_extract.yaml");
    let args = ["extract-rules", s(&doc), "-o", s(&out), "--mock", s(&mock)];
    let first = cli(dir.path(), &args, &[]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("review: pending"));
    assert!(!text.contains("review: approved"));
    let log = std::fs::read_to_string(dir.path().join("erc20.yaml.log")).unwrap();
    assert!(log.contains("prompt\ttransferFrom\tCP\t"));
    assert!(log.contains("unparseable, retrying"));

    let mut forced = args.to_vec();
    forced.push("--force");
    let second = cli(dir.path(), &forced, &[]);
    assert_eq!(code(&second), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);

    // the draft is not auditable until reviewed
    let audit = cli(
        dir.path(),
        &["audit", s(&contract_path("allowance_bypass.sol")), "--rules", s(&out), "--mock", s(&fixture_path("all_compliant.yaml"))],
        &[],
    );
    assert_eq!(code(&audit), 2);
    assert!(stderr(&audit).contains("not ready for auditing"), "{}", stderr(&audit));
}

#[test]
fn extract_rules_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rules.yaml");
    std::fs::write(&out, "keep me").unwrap();
    let o = cli(
        dir.path(),
        &["extract-rules", s(&fixture_path("erc20.md")), "-o", s(&out), "--mock", s(&fixture_path("erc20_extract.yaml"))],
        &[],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--force"));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "keep me");
}

#[test]
fn extract_rules_unreadable_document() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["extract-rules", "missing.md", "-o", "out.yaml", "--mock", "none.yaml"], &[]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("out.yaml").exists());
}

#[test]
fn validate_flow() {
    let dir = tempfile::tempdir().unwrap();
    let approved = dir.path().join("erc20.yaml");
    std::fs::write(&approved, bundled::find("erc20").unwrap().text).unwrap();
    let o = cli(dir.path(), &["validate", s(&approved)], &[]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));

    let draft = dir.path().join("draft.yaml");
    let extract = cli(
        dir.path(),
        &["extract-rules", s(&fixture_path("erc20.md")), "-o", s(&draft), "--mock", s(&fixture_path("erc20_extract.yaml"))],
        &[],
    );
    assert_eq!(code(&extract), 0);
    let o = cli(dir.path(), &["validate", s(&draft)], &[]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("pending human review"));

    let o = cli(dir.path(), &["validate", s(&draft), "--approve-all"], &[]);
    assert_eq!(code(&o), 2, "approval needs confirmation");
    let o = cli(dir.path(), &["validate", s(&draft), "--approve-all", "--yes"], &[]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rewritten = std::fs::read_to_string(&draft).unwrap();
    let o = cli(dir.path(), &["validate", s(&draft)], &[]);
    assert_eq!(code(&o), 0);
    let o = cli(dir.path(), &["validate", s(&draft), "--approve-all", "--yes"], &[]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&draft).unwrap(), rewritten);

    let broken = dir.path().join("broken.yaml");
    std::fs::write(&broken, "erc: X\nfunctions: [\n").unwrap();
    assert_eq!(code(&cli(dir.path(), &["validate", s(&broken)], &[])), 2);
}

#[test]
fn slice_command() {
    let dir = tempfile::tempdir().unwrap();
    let bypass = contract_path("allowance_bypass.sol");
    let o = cli(dir.path(), &["slice", s(&bypass), "transferFrom"], &[]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("// slice: Token.transferFrom (26 lines)\n"));
    assert_eq!(stdout(&o).lines().count(), 27);

    let o = cli(dir.path(), &["slice", s(&bypass), "Token.transferFrom", "--json"], &[]);
    assert_eq!(code(&o), 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let lines = json["lines"].as_array().unwrap();
    assert_eq!(lines.len(), 26);
    assert_eq!(lines[0]["line"], 1);
    assert_eq!(lines[0]["reason"], "contract-header");

    let o = cli(dir.path(), &["slice", s(&bypass), "_transfer"], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("not a public function"));
    let o = cli(dir.path(), &["slice", s(&bypass), "mint"], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown function"));

    let bad = dir.path().join("bad.sol");
    std::fs::write(&bad, "contract A { function f( }").unwrap();
    assert_eq!(code(&cli(dir.path(), &["slice", s(&bad), "f"], &[])), 2);
}

#[test]
fn audit_exit_codes_and_output() {
    let dir = tempfile::tempdir().unwrap();
    let compliant = cli(
        dir.path(),
        &["audit", s(&contract_path("erc20_complete.sol")), "--rules", "builtin:erc20", "--mock", s(&fixture_path("all_compliant.yaml"))],
        &[],
    );
    assert_eq!(code(&compliant), 0, "{}", stderr(&compliant));
    assert!(stdout(&compliant).contains("summary:  0 high, 0 medium, 0 low"));

    let report = dir.path().join("report.json");
    let bypass = cli(
        dir.path(),
        &[
            "audit",
            s(&contract_path("allowance_bypass.sol")),
            "--rules",
            "builtin:erc20",
            "--mock",
            s(&fixture_path("allowance_bypass.yaml")),
            "--format",
            "json",
            "--out",
            s(&report),
        ],
        &[],
    );
    assert_eq!(code(&bypass), 1);
    assert!(stdout(&bypass).is_empty());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["schema"], "erc-sentinel/report/v1");
    let findings = json["findings"].as_array().unwrap();
    assert_eq!(findings.len(), 1);
    assert_eq!(findings[0]["impact"], "high");
    assert_eq!(findings[0]["function"], "transferFrom");

    let missing_rules = cli(dir.path(), &["audit", s(&contract_path("allowance_bypass.sol"))], &[]);
    assert_eq!(code(&missing_rules), 2);
}

#[test]
fn mock_runs_never_need_a_key_or_network() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(
        dir.path(),
        &["audit", s(&contract_path("allowance_bypass.sol")), "--rules", "builtin:erc20", "--mock", s(&fixture_path("allowance_bypass.yaml"))],
        &[("ERC_SENTINEL_ENDPOINT", "http://127.0.0.1:9/v1/chat/completions"), ("ERC_SENTINEL_MODEL", "m")],
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));

    // without the mock the live adapter needs the key
    let o = cli(
        dir.path(),
        &["audit", s(&contract_path("allowance_bypass.sol")), "--rules", "builtin:erc20"],
        &[("ERC_SENTINEL_ENDPOINT", "http://127.0.0.1:9/v1/chat/completions"), ("ERC_SENTINEL_MODEL", "m")],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("ERC_SENTINEL_API_KEY is not set"), "{}", stderr(&o));
}

#[test]
fn configuration_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let mock = fixture_path("all_compliant.yaml");
    std::fs::write(
        dir.path().join("erc-sentinel.toml"),
        format!("format = \"json\"\nrules = \"builtin:erc20\"\nmock = {:?}\n", s(&mock)),
    )
    .unwrap();
    let contract = contract_path("erc20_complete.sol");
    let is_json = |o: &Output| stdout(o).starts_with('{');

    let file_only = cli(dir.path(), &["audit", s(&contract)], &[]);
    assert_eq!(code(&file_only), 0, "{}", stderr(&file_only));
    assert!(is_json(&file_only));

    let env_over_file = cli(dir.path(), &["audit", s(&contract)], &[("ERC_SENTINEL_FORMAT", "text")]);
    assert!(!is_json(&env_over_file));

    let flag_over_env = cli(dir.path(), &["audit", s(&contract), "--format", "json"], &[("ERC_SENTINEL_FORMAT", "text")]);
    assert!(is_json(&flag_over_env));

    std::fs::write(dir.path().join("erc-sentinel.toml"), "api_key = \"sk-test\"\n").unwrap();
    let o = cli(dir.path(), &["audit", s(&contract), "--rules", "builtin:erc20", "--mock", s(&mock)], &[]);
    assert_eq!(code(&o), 2);
    assert!(!stderr(&o).contains("sk-test"));
}

#[test]
fn ledger_records_every_request() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.jsonl");
    let o = cli(
        dir.path(),
        &[
            "audit",
            s(&contract_path("small.sol")),
            "--rules",
            "builtin:erc20",
            "--mock",
            s(&fixture_path("all_compliant.yaml")),
            "--ledger",
            s(&ledger),
        ],
        &[],
    );
    assert_eq!(code(&o), 1, "missing ERC20 functions are findings");
    let lines = std::fs::read_to_string(&ledger).unwrap();
    assert!(!lines.is_empty());
    for line in lines.lines() {
        let entry: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(entry["prompt_sha256"].as_str().unwrap().len(), 64);
    }
}

const MOCKS: [&str; 3] = ["all_compliant.yaml", "allowance_bypass.yaml", "three_bugs.yaml"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Exit code depends only on whether the run failed and whether the
    /// report has findings.
    #[test]
    fn exit_code_is_a_function_of_findings_and_errors(
        contract in 0..CONTRACTS.len() + 1,
        mock in 0..MOCKS.len(),
        pending in any::<bool>(),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let rules_path = dir.path().join("rules.yaml");
        let mut rules = bundled_erc20();
        if pending {
            rules.functions[0].rules[0].review = erc_sentinel_core::rules::Review::Pending;
        }
        std::fs::write(&rules_path, erc_sentinel::save_ruleset(&rules)).unwrap();
        let contract_file = CONTRACTS.get(contract).map_or(dir.path().join("absent.sol"), |c| contract_path(c));
        let mock_file = fixture_path(MOCKS[mock]);

        let o = cli(dir.path(), &["audit", s(&contract_file), "--rules", s(&rules_path), "--mock", s(&mock_file)], &[]);

        let expected = match std::fs::read_to_string(&contract_file) {
            Err(_) => 2,
            Ok(source) => {
                let gateway = mock_gateway(&fixture(MOCKS[mock]), 12_000);
                match run_audit(&source, &rules, &gateway, &AuditConfig::default(), 1) {
                    Err(_) => 2,
                    Ok(report) => i32::from(report.has_findings()),
                }
            }
        };
        prop_assert_eq!(code(&o), expected, "{}", stderr(&o));
    }
}
