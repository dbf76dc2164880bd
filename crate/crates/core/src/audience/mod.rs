//! Count queries against an audience backend.
//!
//! Every backend (remote HTTP counting API, in-process simulator, recorded
//! snapshot) speaks the same [`CountRequest`]/[`CountResponse`] protocol.
//! [`ReachClient`] adds a request-id keyed cache on top of any backend, and
//! [`fetch_snapshot`] drives a whole [`QueryPlan`] under a rate limit.

mod clock;
mod fetch;
#[cfg(feature = "net")]
mod http;
mod plan;
mod snapshot;
mod wire;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{intersect_specs, PopulationSpec};
use crate::error::{Error, Result};

pub use clock::{Clock, ManualClock, SystemClock};
pub use fetch::{fetch_snapshot, FetchSummary, RateLimitPolicy};
#[cfg(feature = "net")]
pub use http::HttpBackend;
pub use plan::{cross_sections, plan_queries, CrossSection, QueryPlan};
pub use snapshot::{
    AudienceRecord, FailureRecord, Snapshot, SnapshotBackend, SnapshotEntry, SnapshotFile,
    SnapshotSink, SNAPSHOT_SCHEMA, SNAPSHOT_VERSION,
};
pub use wire::{CountRequest, CountResponse, WireError};

/// Anything that can answer a count request.
pub trait CountBackend: Send + Sync {
    /// Short label recorded with every answer (`"sim"`, `"http"`, `"snapshot"`).
    fn label(&self) -> &str;

    fn count(&self, request: &CountRequest) -> Result<CountResponse>;
}

impl<B: CountBackend + ?Sized> CountBackend for Arc<B> {
    fn label(&self) -> &str {
        (**self).label()
    }

    fn count(&self, request: &CountRequest) -> Result<CountResponse> {
        (**self).count(request)
    }
}

impl<B: CountBackend + ?Sized> CountBackend for Box<B> {
    fn label(&self) -> &str {
        (**self).label()
    }

    fn count(&self, request: &CountRequest) -> Result<CountResponse> {
        (**self).count(request)
    }
}

/// One count question: a population, optionally narrowed to one interest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudienceQuery {
    pub spec: PopulationSpec,
    pub interest: Option<String>,
    pub request_id: String,
}

impl AudienceQuery {
    pub fn new(spec: PopulationSpec, interest: Option<String>) -> Self {
        let request_id = request_id(&CountRequest {
            targeting: spec.targeting.clone(),
            interest: interest.clone(),
        });
        Self {
            spec,
            interest,
            request_id,
        }
    }

    pub fn total(spec: PopulationSpec) -> Self {
        Self::new(spec, None)
    }

    pub fn request(&self) -> CountRequest {
        CountRequest {
            targeting: self.spec.targeting.clone(),
            interest: self.interest.clone(),
        }
    }
}

/// Content hash of a request: equal predicates give equal ids, labels are ignored.
pub fn request_id(request: &CountRequest) -> String {
    let canonical = serde_json::to_vec(request).expect("count requests always serialize");
    let digest = Sha256::digest(&canonical);
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudienceCount {
    pub query: AudienceQuery,
    pub count: u64,
    /// The backend reported its floor instead of an exact small count.
    pub clamped: bool,
    pub fetched_at_ms: u64,
    pub backend: String,
}

/// Issues a single uncached request.
pub fn reach_estimate(
    backend: &dyn CountBackend,
    query: &AudienceQuery,
    clock: &dyn Clock,
) -> Result<AudienceCount> {
    let response = backend.count(&query.request())?;
    Ok(AudienceCount {
        query: query.clone(),
        count: response.count,
        clamped: response.clamped,
        fetched_at_ms: clock.now_ms(),
        backend: backend.label().to_string(),
    })
}

/// Backend plus a request-id keyed answer cache.
///
/// Repeated queries are answered from the cache with `backend == "cache"`
/// and never reach the backend.
pub struct ReachClient<B> {
    backend: B,
    clock: Arc<dyn Clock>,
    cache: Mutex<HashMap<String, AudienceCount>>,
}

impl<B: CountBackend> ReachClient<B> {
    pub fn new(backend: B) -> Self {
        Self::with_clock(backend, Arc::new(SystemClock))
    }

    pub fn with_clock(backend: B, clock: Arc<dyn Clock>) -> Self {
        Self {
            backend,
            clock,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    pub fn reach_estimate(&self, query: &AudienceQuery) -> Result<AudienceCount> {
        if let Some(hit) = self.cached(&query.request_id) {
            return Ok(AudienceCount {
                query: query.clone(),
                ..hit
            });
        }
        let answer = reach_estimate(&self.backend, query, self.clock.as_ref())?;
        self.cache
            .lock()
            .expect("cache lock poisoned")
            .insert(query.request_id.clone(), answer.clone());
        Ok(answer)
    }

    fn cached(&self, request_id: &str) -> Option<AudienceCount> {
        let cache = self.cache.lock().expect("cache lock poisoned");
        cache.get(request_id).map(|hit| AudienceCount {
            backend: "cache".into(),
            ..hit.clone()
        })
    }

    /// Convenience: the count alone.
    pub fn count(&self, spec: &PopulationSpec, interest: Option<&str>) -> Result<u64> {
        let query = AudienceQuery::new(spec.clone(), interest.map(str::to_string));
        Ok(self.reach_estimate(&query)?.count)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock poisoned").len()
    }
}

/// Share of the smaller population that also belongs to the other one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub a: String,
    pub b: String,
    pub count_a: u64,
    pub count_b: u64,
    pub count_both: u64,
    pub fraction: f64,
    /// Always `"min"`: the fraction is `|a ∩ b| / min(|a|, |b|)`.
    pub denominator: String,
}

pub fn overlap_fraction<B: CountBackend>(
    a: &PopulationSpec,
    b: &PopulationSpec,
    client: &ReachClient<B>,
) -> Result<OverlapReport> {
    let both = intersect_specs(a, b)?;
    let count_a = client.count(a, None)?;
    let count_b = client.count(b, None)?;
    let count_both = client.count(&both, None)?;
    let denominator = count_a.min(count_b);
    if denominator == 0 {
        if count_a == 0 && count_b == 0 {
            return Err(Error::EmptyPopulations);
        }
        return Ok(OverlapReport {
            a: a.label.clone(),
            b: b.label.clone(),
            count_a,
            count_b,
            count_both,
            fraction: 0.0,
            denominator: "min".into(),
        });
    }
    // Rounded backends can report an intersection above the smaller marginal.
    let fraction = (count_both as f64 / denominator as f64).min(1.0);
    Ok(OverlapReport {
        a: a.label.clone(),
        b: b.label.clone(),
        count_a,
        count_b,
        count_both,
        fraction,
        denominator: "min".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::AxisName;

    struct Fixed(HashMap<String, u64>);

    impl CountBackend for Fixed {
        fn label(&self) -> &str {
            "fixed"
        }

        fn count(&self, request: &CountRequest) -> Result<CountResponse> {
            let id = request_id(request);
            self.0
                .get(&id)
                .map(|&count| CountResponse {
                    count,
                    clamped: false,
                })
                .ok_or(Error::NotInSnapshot { request_id: id })
        }
    }

    #[test]
    fn request_id_ignores_label() {
        let a = AudienceQuery::total(PopulationSpec::new("one").affinity("x"));
        let b = AudienceQuery::total(PopulationSpec::new("two").affinity("x"));
        let c = AudienceQuery::new(PopulationSpec::new("one").affinity("x"), Some("rock".into()));
        assert_eq!(a.request_id, b.request_id);
        assert_ne!(a.request_id, c.request_id);
        assert_eq!(a.request_id.len(), 32);
    }

    #[test]
    fn planted_overlap_reproduces_fraction() {
        let interest = PopulationSpec::new("interest")
            .affinity("hispanic")
            .require_interest("mexico");
        let communities = PopulationSpec::new("communities")
            .affinity("hispanic")
            .locations(["los-angeles"]);
        let both = intersect_specs(&interest, &communities).unwrap();
        let mut counts = HashMap::new();
        counts.insert(AudienceQuery::total(interest.clone()).request_id, 2_900_000);
        counts.insert(AudienceQuery::total(communities.clone()).request_id, 4_100_000);
        counts.insert(AudienceQuery::total(both).request_id, 1_049_800);
        let client = ReachClient::new(Fixed(counts));
        let report = overlap_fraction(&interest, &communities, &client).unwrap();
        assert!((report.fraction - 0.362).abs() < 1e-12);
        assert_eq!(report.denominator, "min");
    }

    #[test]
    fn overlap_of_two_empty_populations_fails() {
        let a = PopulationSpec::new("a").select(AxisName::Gender, "Male");
        let b = PopulationSpec::new("b").select(AxisName::Age, "13-18");
        let both = intersect_specs(&a, &b).unwrap();
        let counts = [a.clone(), b.clone(), both]
            .into_iter()
            .map(|s| (AudienceQuery::total(s).request_id, 0))
            .collect();
        let client = ReachClient::new(Fixed(counts));
        assert!(matches!(
            overlap_fraction(&a, &b, &client),
            Err(Error::EmptyPopulations)
        ));
    }
}
