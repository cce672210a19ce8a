//! Parallel audit driver. Probes run on scoped worker threads; results are
//! stored by probe index so the assembled report does not depend on which
//! worker finished first.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use erc_sentinel_core::audit::{plan_audit, AuditConfig, AuditError, AuditReport, ProbeResult};
use erc_sentinel_core::llm::ChatModel;
use erc_sentinel_core::rules::ErcRuleSet;

pub fn run_audit(
    source: &str,
    rules: &ErcRuleSet,
    llm: &dyn ChatModel,
    config: &AuditConfig,
    workers: usize,
) -> Result<AuditReport, AuditError> {
    let plan = plan_audit(source, rules, config)?;
    let n = plan.probes.len();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ProbeResult>>> = Mutex::new(vec![None; n]);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = plan.run_probe(&plan.probes[i], llm);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    let results = slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every probe ran"))
        .collect();
    Ok(plan.assemble(results, llm))
}
