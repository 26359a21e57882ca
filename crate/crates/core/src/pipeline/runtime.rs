use std::path::PathBuf;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gateway::{
    BackendKind, ChatBackend, CostLedger, Gateway, HttpBackend, MockBackend, MockScript,
    ModelHandle, RateLimiter, ResponseCache, API_BASE_ENV,
};

use super::config::Config;

/// Command-line overrides applied on top of a [`Config`].
#[derive(Debug, Clone, Default)]
pub struct RuntimeOptions {
    pub backend: Option<BackendKind>,
    pub mock_script: Option<MockScript>,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
    pub parallelism: usize,
}

/// Everything a command needs: configuration, one gateway per role, and
/// the shared cost ledger.
#[derive(Debug, Clone)]
pub struct Runtime {
    pub config: Config,
    pub analyzer: Gateway,
    pub synthesizer: Gateway,
    pub evaluator: Gateway,
    pub ledger: Arc<CostLedger>,
    pub seed: u64,
    pub parallelism: usize,
}

impl Runtime {
    /// Builds gateways from the config. Mock roles share one backend
    /// driven by `opts.mock_script` (an empty script when none is given).
    pub fn new(config: Config, opts: RuntimeOptions) -> Result<Self> {
        config.validate()?;
        let mut script = opts.mock_script.unwrap_or_default();
        if opts.seed != 0 {
            script.seed = opts.seed;
        }
        let mock: Arc<dyn ChatBackend> = Arc::new(MockBackend::new(script));
        let http: Arc<dyn ChatBackend> = Arc::new(HttpBackend::from_env());

        let resolve = |h: &ModelHandle| -> Result<(ModelHandle, Arc<dyn ChatBackend>)> {
            let mut h = h.clone();
            if let Some(b) = opts.backend {
                h.backend = b;
            }
            if h.backend == BackendKind::Http && h.endpoint.is_none() {
                h.endpoint = std::env::var(API_BASE_ENV).ok().filter(|s| !s.is_empty());
            }
            h.validate()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let backend = match h.backend {
                BackendKind::Mock => mock.clone(),
                BackendKind::Http => http.clone(),
            };
            Ok((h, backend))
        };
        let handles = [
            &config.models.analyzer,
            &config.models.synthesizer,
            &config.models.evaluator,
        ];
        let resolved = handles.map(resolve);
        let [a, s, e] = resolved;
        Self::assemble(
            config,
            [a?, s?, e?],
            opts.cache_dir,
            opts.seed,
            opts.parallelism,
        )
    }

    /// Wires every role to `backend`; handy for tests and examples.
    pub fn with_backend(
        config: Config,
        backend: Arc<dyn ChatBackend>,
        seed: u64,
        parallelism: usize,
    ) -> Result<Self> {
        config.validate()?;
        let m = &config.models;
        let pairs = [
            m.analyzer.clone(),
            m.synthesizer.clone(),
            m.evaluator.clone(),
        ]
        .map(|h| (h, backend.clone()));
        Self::assemble(config, pairs, None, seed, parallelism)
    }

    fn assemble(
        config: Config,
        [a, s, e]: [(ModelHandle, Arc<dyn ChatBackend>); 3],
        cache_dir: Option<PathBuf>,
        seed: u64,
        parallelism: usize,
    ) -> Result<Self> {
        let ledger = Arc::new(CostLedger::new());
        let mut limiter = RateLimiter::new(config.max_in_flight);
        if let Some(rps) = config.requests_per_second {
            limiter = limiter.with_rate(rps);
        }
        let limiter = Arc::new(limiter);
        let cache = match cache_dir {
            Some(dir) => Some(Arc::new(
                ResponseCache::open(&dir).map_err(|e| Error::io(dir, e))?,
            )),
            None => None,
        };
        let wire = |(h, b): (ModelHandle, Arc<dyn ChatBackend>)| {
            let mut g = Gateway::new(h, b, ledger.clone()).with_limiter(limiter.clone());
            if let Some(c) = &cache {
                g = g.with_cache(c.clone());
            }
            g
        };
        Ok(Runtime {
            analyzer: wire(a),
            synthesizer: wire(s),
            evaluator: wire(e),
            ledger: ledger.clone(),
            config,
            seed,
            parallelism: parallelism.max(1),
        })
    }
}
