//! Server behavior over real sockets plus the shipped conformance transcript.
//!
//! Set `PEMKIT_REGENERATE_CONFORMANCE=1` to rewrite `conformance/` from the
//! request script below.

use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use pemkit::pem::{
    apply, load_model, save_model, ConditionParams, ErrorDistribution, GridSpec, GroundTruthObject, OcclusionLevel,
    PemModel, PolarCoord, TrackState, TransitionMatrix,
};
use pemkit::server::{
    ClientError, Connection, ErrorCode, ModelRegistry, PemClient, Server, ServerConfig, ShutdownHandle, WireMessage,
    WireObject,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn conformance_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../conformance")
}

fn conformance_model() -> PemModel {
    let grid = GridSpec::new(90.0, 10.0, 30.0).unwrap();
    let mut model = PemModel::uniform("conformance", grid, ConditionParams::perfect()).unwrap();
    for c in 0..grid.n_conditions() {
        let cond = grid.condition_at(c).unwrap();
        let k = c as f64;
        model
            .set_params(
                cond,
                ConditionParams {
                    transition: TransitionMatrix::new(0.2 + 0.015 * k, 0.9 - 0.01 * k),
                    error: ErrorDistribution {
                        mu_r: 1.0 + 0.001 * k,
                        mu_theta: -0.002 + 0.0001 * k,
                        sigma_r: 0.02 + 0.001 * k,
                        sigma_theta: 0.005 + 0.0002 * k,
                        rho: 0.3 - 0.01 * k,
                    },
                },
            )
            .unwrap();
    }
    model
}

fn objects(t: usize) -> Vec<WireObject> {
    let t = t as f64;
    vec![
        WireObject {
            id: 1,
            x: 0.0,
            y: 25.0 - 1.5 * t,
            occ: OcclusionLevel::Vis3,
        },
        WireObject {
            id: 7,
            x: -4.0 + 0.4 * t,
            y: 12.0,
            occ: OcclusionLevel::Vis1,
        },
        WireObject {
            id: 3,
            x: 8.5,
            y: -6.0 + 0.25 * t,
            occ: OcclusionLevel::Vis2,
        },
        WireObject {
            id: 42,
            x: 3.0,
            y: 45.0,
            occ: OcclusionLevel::Vis3,
        },
    ]
}

fn frame_line(t: f64, objects: Vec<WireObject>) -> String {
    WireMessage::Frame { t, objects }.to_line()
}

fn request_script() -> Vec<String> {
    let mut lines = vec![
        r#"{"type":"reset"}"#.to_string() + "\n",
        frame_line(0.0, objects(0)),
        r#"{"type":"init","model":"missing","seed":7,"rate_hz":2.0}"#.to_string() + "\n",
        r#"{"type":"init","model":"conformance","seed":7,"rate_hz":2.0}"#.to_string() + "\n",
        frame_line(0.0, vec![]),
    ];
    for k in 1..=12 {
        lines.push(frame_line(0.5 * k as f64, objects(k)));
    }
    lines.push(frame_line(6.0, objects(12)));
    lines.push(frame_line(5.0, objects(12)));
    let mut dup = objects(13);
    dup[1].id = 1;
    lines.push(frame_line(6.5, dup));
    lines.push("{\"type\":\"frame\",\"t\":7.0}\n".into());
    lines.push("this is not json\n".into());
    lines.push(r#"{"type":"ack","of":"init"}"#.to_string() + "\n");
    lines.push(r#"{"type":"init","model":"conformance","seed":8,"rate_hz":2.0}"#.to_string() + "\n");
    lines.push(frame_line(7.0, objects(14)));
    lines.push(r#"{"type":"reset"}"#.to_string() + "\n");
    for k in 0..=6 {
        lines.push(frame_line(0.5 * k as f64, objects(k)));
    }
    lines.push(r#"{"type":"shutdown"}"#.to_string() + "\n");
    lines
}

/// `(request, response)` pairs from `> ` and `< ` prefixed lines.
fn read_transcript() -> Vec<(String, String)> {
    let text = std::fs::read_to_string(conformance_dir().join("transcript.txt")).unwrap();
    let mut pairs = Vec::new();
    let mut pending = None;
    for line in text.lines() {
        if let Some(req) = line.strip_prefix("> ") {
            assert!(pending.is_none(), "two requests in a row");
            pending = Some(format!("{req}\n"));
        } else if let Some(resp) = line.strip_prefix("< ") {
            pairs.push((pending.take().expect("reply without request"), format!("{resp}\n")));
        }
    }
    assert!(pending.is_none());
    pairs
}

fn registry_from_disk() -> ModelRegistry {
    let mut r = ModelRegistry::new();
    r.load(Some("conformance"), &conformance_dir().join("model.json")).unwrap();
    r
}

fn start(registry: ModelRegistry) -> (std::net::SocketAddr, ShutdownHandle, thread::JoinHandle<()>) {
    let server = Server::bind("127.0.0.1:0", registry, ServerConfig::default()).unwrap();
    let addr = server.local_addr().unwrap();
    let handle = server.shutdown_handle();
    let join = thread::spawn(move || server.run().unwrap());
    (addr, handle, join)
}

#[test]
fn regenerate_conformance_if_requested() {
    if std::env::var_os("PEMKIT_REGENERATE_CONFORMANCE").is_none() {
        return;
    }
    let dir = conformance_dir();
    std::fs::create_dir_all(&dir).unwrap();
    save_model(&conformance_model(), dir.join("model.json")).unwrap();
    let mut conn = Connection::new(Arc::new(registry_from_disk()));
    let mut out = String::from("# request lines start with '> ', the expected reply with '< '\n");
    for req in request_script() {
        let reply = conn.handle_line(&req).to_line();
        out.push_str("> ");
        out.push_str(&req);
        out.push_str("< ");
        out.push_str(&reply);
    }
    std::fs::write(dir.join("transcript.txt"), out).unwrap();
}

#[test]
fn conformance_model_file_matches_generator() {
    assert_eq!(load_model(conformance_dir().join("model.json")).unwrap(), conformance_model());
}

#[test]
fn transcript_replays_in_process() {
    let mut conn = Connection::new(Arc::new(registry_from_disk()));
    for (i, (req, expect)) in read_transcript().into_iter().enumerate() {
        assert_eq!(conn.handle_line(&req).to_line(), expect, "exchange {i}");
    }
}

#[test]
fn transcript_replays_over_tcp() {
    let (addr, stop, join) = start(registry_from_disk());
    let mut client = PemClient::connect(addr).unwrap();
    for (i, (req, expect)) in read_transcript().into_iter().enumerate() {
        assert_eq!(client.request_line(&req).unwrap(), expect, "exchange {i}");
    }
    stop.shutdown();
    join.join().unwrap();
}

#[test]
fn transcript_covers_every_error_code() {
    let replies: Vec<String> = read_transcript().into_iter().map(|p| p.1).collect();
    for code in [
        ErrorCode::UnknownModel,
        ErrorCode::NotInitialized,
        ErrorCode::TimeRegression,
        ErrorCode::DuplicateId,
        ErrorCode::Malformed,
        ErrorCode::UnexpectedMessage,
    ] {
        let needle = format!("\"code\":\"{code}\"");
        assert!(replies.iter().any(|r| r.contains(&needle)), "{code} missing");
    }
}

fn session_transcript(addr: std::net::SocketAddr, seed: u64) -> Vec<String> {
    let mut c = PemClient::connect(addr).unwrap();
    c.init("conformance", seed, 2.0).unwrap();
    (0..40)
        .map(|k| c.request_line(&frame_line(0.5 * k as f64, objects(k % 15))).unwrap())
        .collect()
}

#[test]
fn concurrent_sessions_are_isolated() {
    let (addr, stop, join) = start(registry_from_disk());
    let alone_a = session_transcript(addr, 1);
    let alone_b = session_transcript(addr, 2);
    let ta = thread::spawn(move || session_transcript(addr, 1));
    let tb = thread::spawn(move || session_transcript(addr, 2));
    assert_eq!(ta.join().unwrap(), alone_a);
    assert_eq!(tb.join().unwrap(), alone_b);
    assert_ne!(alone_a, alone_b);
    stop.shutdown();
    join.join().unwrap();
}

#[test]
fn independent_servers_agree_byte_for_byte() {
    let (a, stop_a, ja) = start(registry_from_disk());
    let (b, stop_b, jb) = start(registry_from_disk());
    assert_eq!(session_transcript(a, 99), session_transcript(b, 99));
    stop_a.shutdown();
    stop_b.shutdown();
    ja.join().unwrap();
    jb.join().unwrap();
}

#[test]
fn reset_follows_reseed_rule() {
    let model = conformance_model();
    let mut registry = ModelRegistry::new();
    registry.insert("conformance", model.clone());
    let (addr, stop, join) = start(registry);
    let mut c = PemClient::connect(addr).unwrap();
    c.init("conformance", 31, 2.0).unwrap();
    for k in 0..5 {
        c.frame(0.5 * k as f64, objects(k)).unwrap();
    }
    c.reset().unwrap();
    c.reset().unwrap();

    // expected: fresh tracks and ChaCha8(seed) on stream = number of resets
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    rng.set_stream(2);
    let mut tracks = TrackState::new();
    for k in 0..10 {
        let objs = objects(k);
        let got = c.frame(0.5 * k as f64, objs.clone()).unwrap();
        let world: Vec<GroundTruthObject> = objs
            .iter()
            .map(|o| GroundTruthObject {
                id: o.id,
                position: PolarCoord::from_cartesian(o.x, o.y),
                occlusion: o.occ,
            })
            .collect();
        let want = apply(&model, &world, &mut tracks, &mut rng).unwrap();
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            let (x, y) = w.position.to_cartesian();
            assert_eq!((g.source_id, g.x, g.y), (w.source_id, x, y));
        }
    }
    stop.shutdown();
    join.join().unwrap();
}

#[test]
fn responses_never_invent_objects() {
    let (addr, stop, join) = start(registry_from_disk());
    let mut c = PemClient::connect(addr).unwrap();
    c.init("conformance", 5, 2.0).unwrap();
    for k in 0..30 {
        let objs = objects(k % 15);
        let got = c.frame(k as f64, objs.clone()).unwrap();
        assert!(got.len() <= objs.len());
        assert!(got.iter().all(|p| objs.iter().any(|o| o.id == p.source_id)));
    }
    c.shutdown().unwrap();
    stop.shutdown();
    join.join().unwrap();
}

#[test]
fn client_surfaces_server_errors() {
    let (addr, stop, join) = start(registry_from_disk());
    let mut c = PemClient::connect(addr).unwrap();
    match c.init("nope", 1, 2.0) {
        Err(ClientError::Server { code, .. }) => assert_eq!(code, ErrorCode::UnknownModel),
        other => panic!("{other:?}"),
    }
    stop.shutdown();
    join.join().unwrap();
}

#[test]
fn remote_shutdown_stops_server_when_enabled() {
    let server = Server::bind(
        "127.0.0.1:0",
        registry_from_disk(),
        ServerConfig { remote_shutdown: true },
    )
    .unwrap();
    let addr = server.local_addr().unwrap();
    let join = thread::spawn(move || server.run().unwrap());
    PemClient::connect(addr).unwrap().shutdown().unwrap();
    join.join().unwrap();
}

#[test]
fn bind_failure_is_reported() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap();
    assert!(Server::bind(addr, registry_from_disk(), ServerConfig::default()).is_err());
    assert!(Server::bind("127.0.0.1:0", ModelRegistry::new(), ServerConfig::default()).is_err());
}
