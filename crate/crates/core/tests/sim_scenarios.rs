use std::thread;

use pemkit::pem::{ConditionParams, ErrorDistribution, GridSpec, PemModel, TransitionMatrix};
use pemkit::server::{ModelRegistry, Server, ServerConfig};
use pemkit::sim::{
    min_distance, perception_metrics, run_experiment, run_once, ActorKind, ActorState, EndReason, PerceptionSource,
    PolicyConfig, RunHeader, RunLog, RunOutcome, ScenarioId, ScenarioSpec, TickRecord,
};
use proptest::prelude::*;

fn noisy_model(a01: f64, a11: f64) -> PemModel {
    PemModel::uniform(
        "noisy",
        GridSpec::default(),
        ConditionParams {
            transition: TransitionMatrix::new(a01, a11),
            error: ErrorDistribution {
                mu_r: 1.0,
                mu_theta: 0.0,
                sigma_r: 0.03,
                sigma_theta: 0.01,
                rho: 0.1,
            },
        },
    )
    .unwrap()
}

fn run(id: ScenarioId, source: &PerceptionSource, seed: u64) -> RunLog {
    run_once(&ScenarioSpec::standard(id), &PolicyConfig::default(), source, seed).unwrap()
}

#[test]
fn same_seed_same_log() {
    let source = PerceptionSource::local("noisy", noisy_model(0.5, 0.8));
    for id in ScenarioId::ALL {
        let a = run(id, &source, 17);
        let b = run(id, &source, 17);
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_ne!(a.to_jsonl(), run(id, &source, 18).to_jsonl(), "{id}: seed has no effect");
    }
}

#[test]
fn log_structure() {
    let source = PerceptionSource::local("noisy", noisy_model(0.5, 0.8));
    for id in ScenarioId::ALL {
        let spec = ScenarioSpec::standard(id);
        let log = run(id, &source, 3);
        let o = &log.header.outcome;
        assert!((o.duration_s - log.ticks.len() as f64 / spec.tick_rate_hz).abs() < 1e-9);
        for (k, t) in log.ticks.iter().enumerate() {
            assert_eq!(t.tick, k as u64);
            assert_eq!(t.perception.is_some(), k % spec.perception_interval() == 0, "{id} tick {k}");
            if let Some(p) = &t.perception {
                assert_eq!(p.detected.len(), t.actors.len());
                assert!(!p.detected[0]);
                for obj in &p.objects {
                    assert!(p.detected[obj.source_id as usize]);
                }
                assert_eq!(p.objects.len(), p.detected.iter().filter(|d| **d).count());
            }
        }
        assert_eq!(RunLog::read_jsonl(&log.to_jsonl()).unwrap(), log);
        if o.end == EndReason::Collision {
            assert_eq!(o.min_distance, 0.0);
        }
        assert_eq!(o.min_distance, min_distance(&log));
    }
}

#[test]
fn kinematic_consistency() {
    let a_max = PolicyConfig::default().a_max;
    let source = PerceptionSource::local("noisy", noisy_model(0.3, 0.6));
    for id in ScenarioId::ALL {
        let log = run(id, &source, 9);
        let dt = 1.0 / log.header.tick_rate_hz;
        for w in log.ticks.windows(2) {
            for (a, b) in w[0].actors.iter().zip(&w[1].actors) {
                let moved = (b.x - a.x).hypot(b.y - a.y);
                assert!((moved - a.speed * dt).abs() <= 0.5 * a_max * dt * dt + 1e-9, "{id} tick {}", w[0].tick);
                assert!(b.speed >= 0.0);
            }
        }
    }
}

#[test]
fn ground_truth_baseline_is_safe_and_never_detect_is_not() {
    let never = PerceptionSource::local("never", PemModel::never_detect(GridSpec::default()));
    for id in ScenarioId::ALL {
        let gt = run(id, &PerceptionSource::GroundTruth, 0);
        assert_eq!(gt.header.outcome.end, EndReason::Completed, "{id}");
        assert!(gt.header.outcome.min_distance >= 1.0, "{id}: {}", gt.header.outcome.min_distance);
        let blind = run(id, &never, 0);
        assert!(blind.header.outcome.min_distance < 1.0, "{id}");
    }
    let cell = run_experiment(&ScenarioSpec::tc1(), &PolicyConfig::default(), &never, 100, 0).unwrap();
    assert_eq!(cell.frac_below_1m, 1.0);
}

#[test]
fn perfect_model_matches_ground_truth_bins() {
    let perfect = PerceptionSource::local("perfect", PemModel::perfect(GridSpec::default()));
    for id in ScenarioId::ALL {
        let spec = ScenarioSpec::standard(id);
        let a = run_experiment(&spec, &PolicyConfig::default(), &perfect, 5, 0).unwrap();
        let b = run_experiment(&spec, &PolicyConfig::default(), &PerceptionSource::GroundTruth, 5, 0).unwrap();
        assert_eq!((a.n_below_1m, a.frac_below_1m), (b.n_below_1m, b.frac_below_1m));
        assert_eq!(a.min_distances(), b.min_distances());
    }
}

#[test]
fn remote_and_local_sources_agree() {
    let model = noisy_model(0.4, 0.85);
    let mut registry = ModelRegistry::new();
    registry.insert("noisy", model.clone());
    let server = Server::bind("127.0.0.1:0", registry, ServerConfig::default()).unwrap();
    let addr = server.local_addr().unwrap().to_string();
    let stop = server.shutdown_handle();
    let join = thread::spawn(move || server.run().unwrap());

    let local = PerceptionSource::local("noisy", model);
    let remote = PerceptionSource::Remote {
        addr,
        model: "noisy".into(),
    };
    for id in ScenarioId::ALL {
        for seed in [0, 5] {
            assert_eq!(run(id, &local, seed), run(id, &remote, seed), "{id} seed {seed}");
        }
    }
    stop.shutdown();
    join.join().unwrap();
}

#[test]
fn unreachable_server_aborts_runs() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    drop(listener);
    let remote = PerceptionSource::Remote {
        addr,
        model: "x".into(),
    };
    let cell = run_experiment(&ScenarioSpec::tc1(), &PolicyConfig::default(), &remote, 3, 0).unwrap();
    assert_eq!((cell.n_runs, cell.n_aborted), (3, 3));
    assert!(cell.runs.is_empty());
}

const NORTH: f64 = std::f64::consts::FRAC_PI_2;

fn header() -> RunHeader {
    RunHeader {
        scenario: ScenarioId::Tc1,
        seed: 0,
        perception: "ground_truth".into(),
        tick_rate_hz: 10.0,
        perception_rate_hz: 2.0,
        primary_obstacle: 1,
        outcome: RunOutcome {
            end: EndReason::Completed,
            duration_s: 0.0,
            min_distance: 0.0,
        },
    }
}

fn tick(k: u64, actors: Vec<ActorState>) -> TickRecord {
    TickRecord {
        tick: k,
        t: k as f64 * 0.1,
        actors,
        accel: 0.0,
        perception: None,
    }
}

#[test]
fn min_distance_of_straight_pass() {
    // ego half-width 1 m, pedestrian half-size 0.25 m: 4.25 m lateral offset
    // leaves 3 m between footprints at the closest approach
    let ped = ActorState::pedestrian(4.25, 50.0, 0.0);
    let ticks = (0..=100)
        .map(|k| tick(k, vec![ActorState::vehicle(ActorKind::Ego, 0.0, k as f64, NORTH, 10.0), ped]))
        .collect();
    let log = RunLog { header: header(), ticks };
    assert!((min_distance(&log) - 3.0).abs() < 1e-9);
}

#[test]
fn min_distance_of_stationary_ego_is_initial_gap() {
    let ego = ActorState::vehicle(ActorKind::Ego, 0.0, 0.0, NORTH, 0.0);
    let lead = ActorState::vehicle(ActorKind::Vehicle, 0.0, 40.0, NORTH, 0.0);
    let log = RunLog {
        header: header(),
        ticks: (0..20).map(|k| tick(k, vec![ego, lead])).collect(),
    };
    assert!((min_distance(&log) - (40.0 - ActorState::CAR_LENGTH)).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metric_bounds(a01 in 0.0..=1.0f64, a11 in 0.0..=1.0f64, seed in 0u64..1000, which in 0usize..3) {
        let id = ScenarioId::ALL[which];
        let log = run(id, &PerceptionSource::local("m", noisy_model(a01, a11)), seed);
        if let Some(m) = perception_metrics(&log) {
            prop_assert!((0.0..=1.0).contains(&m.relative_detection_frequency));
            prop_assert!(m.max_non_detection_interval <= log.header.outcome.duration_s + 1e-9);
        }
        prop_assert!(log.header.outcome.min_distance >= 0.0);
    }
}
