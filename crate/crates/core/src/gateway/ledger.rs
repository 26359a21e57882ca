use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ModelHandle, Role, Usage};

/// Cost of one call in micro-dollars: tokens/1000 x price, rounded half-even
/// to six decimals. Integer storage keeps ledger sums exact.
pub fn cost_micros(usage: Usage, price_per_1k_input: f64, price_per_1k_output: f64) -> i64 {
    let micros = (usage.prompt_tokens as f64 * price_per_1k_input
        + usage.completion_tokens as f64 * price_per_1k_output)
        * 1000.0;
    micros.round_ties_even() as i64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub role: Role,
    pub model_name: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost_micros: i64,
}

impl LedgerEntry {
    pub fn cost_usd(&self) -> f64 {
        self.cost_micros as f64 / 1e6
    }
}

/// Append-only record of every billed call. Safe to share across threads.
#[derive(Debug, Default)]
pub struct CostLedger {
    entries: Mutex<Vec<LedgerEntry>>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, role: Role, handle: &ModelHandle, usage: Usage) -> LedgerEntry {
        let entry = LedgerEntry {
            role,
            model_name: handle.model_name.clone(),
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            cost_micros: cost_micros(usage, handle.price_per_1k_input, handle.price_per_1k_output),
        };
        self.push(entry.clone());
        entry
    }

    pub fn push(&self, entry: LedgerEntry) {
        self.entries
            .lock()
            .expect("ledger lock poisoned")
            .push(entry);
    }

    pub fn entries(&self) -> Vec<LedgerEntry> {
        self.entries.lock().expect("ledger lock poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("ledger lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_cost_usd(&self) -> f64 {
        self.entries().iter().map(|e| e.cost_micros).sum::<i64>() as f64 / 1e6
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhaseTotals {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost_micros: i64,
}

impl PhaseTotals {
    fn add(&mut self, e: &LedgerEntry) {
        self.calls += 1;
        self.prompt_tokens += e.prompt_tokens;
        self.completion_tokens += e.completion_tokens;
        self.cost_micros += e.cost_micros;
    }

    pub fn tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    pub fn cost_usd(&self) -> f64 {
        self.cost_micros as f64 / 1e6
    }
}

/// Per-phase and overall totals of a ledger.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub phases: BTreeMap<Role, PhaseTotals>,
    pub total: PhaseTotals,
}

impl CostReport {
    pub fn phase(&self, role: Role) -> PhaseTotals {
        self.phases.get(&role).copied().unwrap_or_default()
    }
}

pub fn estimate_cost(ledger: &CostLedger) -> CostReport {
    let mut phases: BTreeMap<Role, PhaseTotals> = Role::ALL
        .into_iter()
        .map(|r| (r, PhaseTotals::default()))
        .collect();
    let mut total = PhaseTotals::default();
    for e in ledger.entries() {
        phases.entry(e.role).or_default().add(&e);
        total.add(&e);
    }
    CostReport { phases, total }
}

// Typical cost of a ~200-failure run with a
// gpt-3.5-class model, shown next to actuals for comparison only.
fn reference_estimate(role: Option<Role>) -> &'static str {
    match role {
        Some(Role::Diagnosis) => "~200 calls, ~400K tok, ~$0.40",
        Some(Role::Synthesis) => "~50 calls, ~150K tok, ~$0.15",
        Some(Role::Evaluation) => "-",
        None => "~250 calls, ~550K tok, ~$0.55",
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>8} {:>12} {:>12} {:>12}  reference",
            "phase", "calls", "prompt_tok", "compl_tok", "cost_usd"
        )?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, t: &PhaseTotals, r: Option<Role>| {
            writeln!(
                f,
                "{:<12} {:>8} {:>12} {:>12} {:>12.6}  {}",
                name,
                t.calls,
                t.prompt_tokens,
                t.completion_tokens,
                t.cost_usd(),
                reference_estimate(r)
            )
        };
        for (role, t) in &self.phases {
            row(f, role.as_str(), t, Some(*role))?;
        }
        row(f, "total", &self.total, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even_rounding() {
        // 0.0000005 USD sits exactly between 0 and 1 micro-dollar.
        let u = Usage {
            prompt_tokens: 1,
            completion_tokens: 0,
        };
        assert_eq!(cost_micros(u, 0.0005, 0.0), 0);
        let u = Usage {
            prompt_tokens: 3,
            completion_tokens: 0,
        };
        assert_eq!(cost_micros(u, 0.0005, 0.0), 2);
        let u = Usage {
            prompt_tokens: 1000,
            completion_tokens: 1000,
        };
        assert_eq!(cost_micros(u, 0.0005, 0.0015), 2000);
    }

    #[test]
    fn empty_ledger_costs_nothing() {
        let report = estimate_cost(&CostLedger::new());
        assert_eq!(report.total, PhaseTotals::default());
        assert_eq!(report.total.cost_usd(), 0.0);
        assert!(report.to_string().contains("total"));
    }

    #[test]
    fn conservation() {
        let ledger = CostLedger::new();
        let h = ModelHandle::mock("m").with_prices(0.0005, 0.0015);
        for i in 0..37u64 {
            let role = Role::ALL[(i % 3) as usize];
            ledger.record(
                role,
                &h,
                Usage {
                    prompt_tokens: 17 * i + 3,
                    completion_tokens: 5 * i,
                },
            );
        }
        let report = estimate_cost(&ledger);
        let by_role: i64 = report.phases.values().map(|p| p.cost_micros).sum();
        let by_entry: i64 = ledger.entries().iter().map(|e| e.cost_micros).sum();
        assert_eq!(report.total.cost_micros, by_role);
        assert_eq!(report.total.cost_micros, by_entry);
        assert_eq!(report.total.calls, 37);
    }
}
