use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::snapshot::{AudienceRecord, FailureRecord, SnapshotEntry, SnapshotSink};
use super::{AudienceCount, AudienceQuery, Clock, CountBackend, ReachClient};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateLimitPolicy {
    pub max_requests_per_window: u32,
    pub window: Duration,
    pub max_retries: u32,
    /// Pause before retry `n` is `backoff[min(n, len - 1)]`.
    pub backoff: Vec<Duration>,
    /// Requests issued in parallel within one window slot.
    pub concurrency: usize,
}

impl Default for RateLimitPolicy {
    fn default() -> Self {
        Self {
            max_requests_per_window: 200,
            window: Duration::from_secs(60),
            max_retries: 3,
            backoff: vec![
                Duration::from_secs(1),
                Duration::from_secs(5),
                Duration::from_secs(30),
            ],
            concurrency: 1,
        }
    }
}

impl RateLimitPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_requests_per_window == 0
            || self.window.is_zero()
            || self.concurrency == 0
            || self.backoff.iter().any(|d| d.is_zero())
        {
            return Err(Error::InvalidArgument(
                "rate-limit policy values must be positive".into(),
            ));
        }
        Ok(())
    }

    fn backoff_for(&self, retry: u32) -> Duration {
        if self.backoff.is_empty() {
            return Duration::from_secs(1);
        }
        self.backoff[(retry as usize).min(self.backoff.len() - 1)]
    }

    /// Parses `"R/window"`, e.g. `"200/60s"`, `"10/500ms"`, `"1000/1h"`.
    pub fn parse_rate(rate: &str) -> Result<(u32, Duration)> {
        let bad = || Error::InvalidArgument(format!("rate {rate:?} is not of the form R/window"));
        let (count, window) = rate.split_once('/').ok_or_else(bad)?;
        let count: u32 = count.trim().parse().map_err(|_| bad())?;
        let window = window.trim();
        let split = window
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(window.len());
        let (amount, unit) = window.split_at(split);
        let amount: u64 = if amount.is_empty() { 1 } else { amount.parse().map_err(|_| bad())? };
        let window = match unit {
            "ms" => Duration::from_millis(amount),
            "s" | "" => Duration::from_secs(amount),
            "m" | "min" => Duration::from_secs(60 * amount),
            "h" => Duration::from_secs(3600 * amount),
            _ => return Err(bad()),
        };
        if count == 0 || window.is_zero() {
            return Err(bad());
        }
        Ok((count, window))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchSummary {
    pub planned: usize,
    pub skipped_already_answered: usize,
    pub fetched: usize,
    pub failed: usize,
    pub retries: usize,
    pub pauses: usize,
}

/// Fixed-window request budget.
struct WindowLimiter<'a> {
    policy: &'a RateLimitPolicy,
    window_start: Option<u64>,
    used: u32,
    pauses: usize,
}

impl<'a> WindowLimiter<'a> {
    fn new(policy: &'a RateLimitPolicy) -> Self {
        Self {
            policy,
            window_start: None,
            used: 0,
            pauses: 0,
        }
    }

    /// Reserves up to `want` slots, sleeping until the next window if none are left.
    fn acquire(&mut self, clock: &dyn Clock, want: usize) -> usize {
        let window_ms = self.policy.window.as_millis() as u64;
        let now = clock.now_ms();
        match self.window_start {
            Some(start) if now < start + window_ms => {}
            _ => {
                self.window_start = Some(now);
                self.used = 0;
            }
        }
        if self.used >= self.policy.max_requests_per_window {
            let start = self.window_start.unwrap_or(now);
            let wait = (start + window_ms).saturating_sub(now);
            clock.sleep(Duration::from_millis(wait));
            self.pauses += 1;
            self.window_start = Some(clock.now_ms());
            self.used = 0;
        }
        let free = (self.policy.max_requests_per_window - self.used) as usize;
        let granted = want.min(free).max(1);
        self.used += granted as u32;
        granted
    }
}

/// Answers every planned query not already in the sink.
///
/// Entries are appended in plan order. Non-retryable failures and transport
/// failures that outlive `max_retries` are recorded as failed entries; a
/// query that keeps hitting the quota aborts the fetch, leaving everything
/// answered so far in the sink.
pub fn fetch_snapshot<B: CountBackend, S: SnapshotSink>(
    client: &ReachClient<B>,
    queries: &[AudienceQuery],
    policy: &RateLimitPolicy,
    sink: &mut S,
) -> Result<FetchSummary> {
    policy.validate()?;
    let clock = client.clock();
    let mut limiter = WindowLimiter::new(policy);
    let pending: Vec<&AudienceQuery> = queries
        .iter()
        .filter(|q| !sink.snapshot().is_answered(&q.request_id))
        .collect();
    let mut summary = FetchSummary {
        planned: queries.len(),
        skipped_already_answered: queries.len() - pending.len(),
        ..FetchSummary::default()
    };

    let mut next = 0;
    while next < pending.len() {
        let want = policy.concurrency.min(pending.len() - next);
        let granted = limiter.acquire(clock, want);
        let batch = &pending[next..next + granted];
        let results: Vec<Result<AudienceCount>> = if batch.len() == 1 {
            vec![client.reach_estimate(batch[0])]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = batch
                    .iter()
                    .map(|query| scope.spawn(move || client.reach_estimate(query)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("count request thread panicked"))
                    .collect()
            })
        };
        for (query, result) in batch.iter().zip(results) {
            let mut attempts = 1u32;
            let mut result = result;
            while let Err(err) = &result {
                if !err.is_retryable() || attempts > policy.max_retries {
                    break;
                }
                let mut pause = policy.backoff_for(attempts - 1);
                if let Error::QuotaExceeded {
                    retry_after_ms: Some(ms),
                } = err
                {
                    pause = pause.max(Duration::from_millis(*ms));
                }
                clock.sleep(pause);
                summary.retries += 1;
                limiter.acquire(clock, 1);
                attempts += 1;
                result = client.reach_estimate(query);
            }
            match result {
                Ok(count) => {
                    sink.append(SnapshotEntry::Ok(AudienceRecord::from(&count)))?;
                    summary.fetched += 1;
                }
                Err(err @ Error::QuotaExceeded { .. }) => {
                    return Err(Error::FetchAborted {
                        completed: sink.snapshot().counts().count(),
                        reason: format!("{err} on {} attempts for {}", attempts, query.spec.label),
                    });
                }
                Err(err) => {
                    sink.append(SnapshotEntry::Failed(FailureRecord {
                        request_id: query.request_id.clone(),
                        population: query.spec.label.clone(),
                        request: query.request(),
                        error_kind: err.kind().to_string(),
                        message: err.to_string(),
                        attempts,
                        failed_at_ms: clock.now_ms(),
                    }))?;
                    summary.failed += 1;
                }
            }
        }
        next += granted;
    }
    summary.pauses = limiter.pauses;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use super::*;
    use crate::audience::{CountRequest, CountResponse, ManualClock, Snapshot};
    use crate::catalog::PopulationSpec;

    /// Answers with the interest-name length; fails on a schedule.
    struct Scripted {
        calls: AtomicUsize,
        quota_until: usize,
        transport_every: Option<usize>,
    }

    impl Scripted {
        fn healthy() -> Self {
            Self {
                calls: AtomicUsize::new(0),
                quota_until: 0,
                transport_every: None,
            }
        }
    }

    impl CountBackend for Scripted {
        fn label(&self) -> &str {
            "scripted"
        }

        fn count(&self, request: &CountRequest) -> Result<CountResponse> {
            let call = self.calls.fetch_add(1, Ordering::SeqCst);
            if call < self.quota_until {
                return Err(Error::QuotaExceeded {
                    retry_after_ms: Some(2_000),
                });
            }
            if let Some(every) = self.transport_every {
                if call.is_multiple_of(every) {
                    return Err(Error::Transport("connection reset".into()));
                }
            }
            if request.targeting.ethnic_affinity.as_deref() == Some("unknown") {
                return Err(Error::InvalidTargeting {
                    predicate: "ethnic_affinity".into(),
                    value: "unknown".into(),
                });
            }
            Ok(CountResponse {
                count: 100 + request.interest.as_ref().map_or(0, |i| i.len() as u64),
                clamped: false,
            })
        }
    }

    fn queries(n: usize) -> Vec<AudienceQuery> {
        (0..n)
            .map(|i| {
                AudienceQuery::new(
                    PopulationSpec::new("p").affinity("hispanic"),
                    Some(format!("genre-{i}")),
                )
            })
            .collect()
    }

    fn policy() -> RateLimitPolicy {
        RateLimitPolicy {
            max_requests_per_window: 4,
            window: Duration::from_secs(10),
            max_retries: 2,
            backoff: vec![Duration::from_millis(500)],
            concurrency: 1,
        }
    }

    #[test]
    fn exhausted_window_pauses_for_a_full_window() {
        let clock = Arc::new(ManualClock::starting_at(0));
        let client = ReachClient::with_clock(Scripted::healthy(), clock.clone());
        let mut snapshot = Snapshot::new("s", "scripted");
        let summary = fetch_snapshot(&client, &queries(10), &policy(), &mut snapshot).unwrap();
        assert_eq!(summary.fetched, 10);
        assert_eq!(summary.pauses, 2);
        assert_eq!(clock.sleeps(), vec![Duration::from_secs(10); 2]);
        assert_eq!(snapshot.counts().count(), 10);
    }

    #[test]
    fn quota_errors_back_off_then_succeed() {
        let clock = Arc::new(ManualClock::starting_at(0));
        let backend = Scripted {
            quota_until: 2,
            ..Scripted::healthy()
        };
        let client = ReachClient::with_clock(backend, clock.clone());
        let mut snapshot = Snapshot::new("s", "scripted");
        let summary = fetch_snapshot(&client, &queries(2), &policy(), &mut snapshot).unwrap();
        assert_eq!(summary.retries, 2);
        assert_eq!(summary.fetched, 2);
        // retry-after beats the 500ms backoff
        assert_eq!(clock.sleeps()[0], Duration::from_secs(2));
    }

    #[test]
    fn persistent_quota_aborts_and_keeps_progress() {
        let clock = Arc::new(ManualClock::starting_at(0));
        let backend = Scripted {
            quota_until: 100,
            ..Scripted::healthy()
        };
        let client = ReachClient::with_clock(backend, clock);
        let mut snapshot = Snapshot::new("s", "scripted");
        let err = fetch_snapshot(&client, &queries(3), &policy(), &mut snapshot).unwrap_err();
        assert!(matches!(err, Error::FetchAborted { completed: 0, .. }));
    }

    #[test]
    fn invalid_targeting_is_recorded_not_retried() {
        let clock = Arc::new(ManualClock::starting_at(0));
        let client = ReachClient::with_clock(Scripted::healthy(), clock);
        let bad = AudienceQuery::total(PopulationSpec::new("bad").affinity("unknown"));
        let mut plan = queries(2);
        plan.insert(1, bad);
        let mut snapshot = Snapshot::new("s", "scripted");
        let summary = fetch_snapshot(&client, &plan, &policy(), &mut snapshot).unwrap();
        assert_eq!(summary.failed, 1);
        assert_eq!(summary.retries, 0);
        let failure = snapshot.failures().next().unwrap();
        assert_eq!(failure.error_kind, "invalid_targeting");
        assert_eq!(failure.attempts, 1);
    }

    #[test]
    fn concurrent_batches_keep_plan_order() {
        let clock = Arc::new(ManualClock::starting_at(0));
        let client = ReachClient::with_clock(Scripted::healthy(), clock);
        let plan = queries(9);
        let mut snapshot = Snapshot::new("s", "scripted");
        let policy = RateLimitPolicy {
            concurrency: 3,
            ..policy()
        };
        fetch_snapshot(&client, &plan, &policy, &mut snapshot).unwrap();
        let order: Vec<&str> = snapshot.counts().map(|r| r.request_id.as_str()).collect();
        let expected: Vec<&str> = plan.iter().map(|q| q.request_id.as_str()).collect();
        assert_eq!(order, expected);
    }

    #[test]
    fn rate_strings_parse() {
        assert_eq!(
            RateLimitPolicy::parse_rate("200/60s").unwrap(),
            (200, Duration::from_secs(60))
        );
        assert_eq!(
            RateLimitPolicy::parse_rate("5/250ms").unwrap(),
            (5, Duration::from_millis(250))
        );
        assert_eq!(
            RateLimitPolicy::parse_rate("10/m").unwrap(),
            (10, Duration::from_secs(60))
        );
        assert!(RateLimitPolicy::parse_rate("0/1s").is_err());
        assert!(RateLimitPolicy::parse_rate("ten/1s").is_err());
    }
}
