use std::sync::Arc;
use std::time::Duration;

use assimlab_core::audience::{
    fetch_snapshot, plan_queries, CountBackend, CountRequest, HttpBackend, ManualClock, RateLimitPolicy,
    ReachClient, Snapshot, SnapshotBackend, SnapshotFile, SnapshotSink,
};
use assimlab_core::catalog::{InterestCatalog, PopulationSpec};
use assimlab_core::simulator::{generate_world, presets, serve, SyntheticWorld};
use assimlab_core::Error;

fn world() -> SyntheticWorld {
    generate_world(&presets::random_planted(12, 5), 5).unwrap()
}

fn populations() -> Vec<PopulationSpec> {
    vec![
        PopulationSpec::new("Destination natives").home_country("US").non_expat(),
        PopulationSpec::new("Source natives").home_country("MX").non_expat(),
        PopulationSpec::new("Expats").home_country("US").expat_from("MX"),
    ]
}

fn catalog() -> InterestCatalog {
    InterestCatalog::from_ids(&presets::random_planted(12, 5).interests).unwrap()
}

fn unlimited() -> RateLimitPolicy {
    RateLimitPolicy {
        max_requests_per_window: u32::MAX,
        window: Duration::from_secs(1),
        ..RateLimitPolicy::default()
    }
}

#[test]
fn snapshot_round_trip_is_value_and_byte_identical() {
    let plan = plan_queries(&populations(), &catalog(), None, None).unwrap();
    let clock = Arc::new(ManualClock::starting_at(1_700_000_000_000));
    let client = ReachClient::with_clock(world(), clock);
    let mut snapshot = Snapshot::new("round-trip", "sim");
    let summary = fetch_snapshot(&client, plan.queries(), &unlimited(), &mut snapshot).unwrap();
    assert_eq!(summary.fetched, plan.len());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snapshot.ndjson");
    std::fs::write(&path, snapshot.to_ndjson()).unwrap();
    let loaded = Snapshot::load(&path).unwrap();
    assert_eq!(loaded, snapshot);
    assert_eq!(loaded.to_ndjson().as_bytes(), std::fs::read(&path).unwrap().as_slice());

    let replay = SnapshotBackend::new(&loaded);
    let direct = world();
    for query in plan.queries() {
        let request = query.request();
        assert_eq!(replay.count(&request).unwrap(), direct.count(&request).unwrap());
    }
}

#[test]
fn interrupted_file_resumes_without_refetching() {
    let plan = plan_queries(&populations(), &catalog(), None, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snapshot.ndjson");
    let client = ReachClient::with_clock(world(), Arc::new(ManualClock::starting_at(0)));
    {
        let mut sink = SnapshotFile::open(&path, "resume", "sim").unwrap();
        fetch_snapshot(&client, &plan.queries()[..10], &unlimited(), &mut sink).unwrap();
    }
    // A torn final line, as left by a crash mid-write.
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.extend_from_slice(b"{\"status\":\"ok\",\"request_id\":\"ab");
    std::fs::write(&path, bytes).unwrap();

    let mut sink = SnapshotFile::open(&path, "resume", "sim").unwrap();
    assert_eq!(sink.snapshot().counts().count(), 10);
    let summary = fetch_snapshot(&client, plan.queries(), &unlimited(), &mut sink).unwrap();
    assert_eq!(summary.skipped_already_answered, 10);
    assert_eq!(summary.fetched, plan.len() - 10);
    let reloaded = Snapshot::load(&path).unwrap();
    assert!(reloaded.missing(plan.queries()).is_empty());
}

#[test]
fn snapshot_of_another_study_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snapshot.ndjson");
    drop(SnapshotFile::open(&path, "one", "sim").unwrap());
    assert!(matches!(
        SnapshotFile::open(&path, "two", "sim"),
        Err(Error::Snapshot { .. })
    ));
}

#[test]
fn rate_limit_pauses_on_the_injected_clock() {
    let plan = plan_queries(&populations()[..1], &catalog(), None, None).unwrap();
    assert_eq!(plan.len(), 13);
    let clock = Arc::new(ManualClock::starting_at(0));
    let client = ReachClient::with_clock(world(), clock.clone());
    let policy = RateLimitPolicy {
        max_requests_per_window: 5,
        window: Duration::from_secs(60),
        ..RateLimitPolicy::default()
    };
    let mut snapshot = Snapshot::new("rate", "sim");
    let summary = fetch_snapshot(&client, plan.queries(), &policy, &mut snapshot).unwrap();
    assert_eq!(summary.fetched, 13);
    assert_eq!(summary.pauses, 2);
    assert_eq!(clock.sleeps(), vec![Duration::from_secs(60); 2]);
}

#[test]
fn http_backend_matches_the_world_it_serves() {
    let handle = serve(Arc::new(world()), "127.0.0.1:0").unwrap();
    let http = HttpBackend::new(handle.count_url()).with_header("X-Token", "opaque");
    let direct = world();
    let plan = plan_queries(&populations(), &catalog(), None, None).unwrap();
    for query in plan.queries().iter().step_by(5) {
        let request = query.request();
        assert_eq!(http.count(&request).unwrap(), direct.count(&request).unwrap());
    }
    let unknown = CountRequest {
        targeting: PopulationSpec::new("x").home_country("ATLANTIS").targeting,
        interest: None,
    };
    assert!(matches!(http.count(&unknown), Err(Error::InvalidTargeting { .. })));
    handle.shutdown();
}

#[test]
fn unreachable_endpoint_is_a_retryable_transport_error() {
    let http = HttpBackend::new("http://127.0.0.1:9/count");
    let err = http.count(&CountRequest::default()).unwrap_err();
    assert!(matches!(err, Error::Transport(_)));
    assert!(err.is_retryable());
}
