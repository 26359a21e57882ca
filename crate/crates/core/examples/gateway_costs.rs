//! Route calls through a gateway with a scripted backend, a response cache
//! and the cost ledger, then print the per-phase cost report.

use std::sync::Arc;

use mars::gateway::{
    estimate_cost, ChatRequest, CostLedger, Gateway, MockBackend, MockRule, MockScript, ModelHandle,
    ResponseCache, Role,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cache_dir = std::env::temp_dir().join(format!("mars-cache-{}", std::process::id()));
    let cache = Arc::new(ResponseCache::open(&cache_dir)?);
    let ledger = Arc::new(CostLedger::new());
    let script = MockScript::new(1).rule(MockRule::any(["{\"ok\": true}"]));
    let gw = Gateway::new(
        ModelHandle::mock("gpt-3.5-turbo").with_prices(0.0005, 0.0015),
        Arc::new(MockBackend::new(script)),
        ledger.clone(),
    )
    .with_cache(cache);

    let req = ChatRequest::user("Diagnose this failure in one JSON object.", 0.3, 800);
    for _ in 0..3 {
        let c = gw.chat(Role::Diagnosis, &req)?;
        println!("cached={} tokens={}+{} cost=${:.6}", c.cached, c.usage.prompt_tokens, c.usage.completion_tokens, c.cost_usd);
    }
    // a different sample number is a different cache entry
    let c = gw.chat(Role::Synthesis, &req.clone().with_sample(1))?;
    println!("sample 1 cached={}", c.cached);

    print!("{}", estimate_cost(&ledger));
    std::fs::remove_dir_all(cache_dir)?;
    Ok(())
}
