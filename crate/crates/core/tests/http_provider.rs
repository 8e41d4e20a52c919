mod common;

use std::collections::BTreeMap;

use carat_core::atombill::{HttpProvider, MappingCache, MappingError, MappingProvider, MAX_BATCH};
use carat_core::{trace, TraceOptions};

use common::mock::{mapped_response, reactions, serve};
use common::{fixture, graph, inlets};

fn labelled(r: &str) -> String {
    r.replacen("[CH4]", "[CH4:1]", 1)
}

#[test]
fn map_posts_batches_of_at_most_32() {
    let server = serve(|req, _| {
        assert_eq!((req.method.as_str(), req.path.as_str()), ("POST", "/map"));
        let rs: Vec<String> = reactions(&req.body).iter().map(|r| labelled(r)).collect();
        (200, mapped_response(&rs, 0.93))
    });
    let input: Vec<String> = (0..70).map(|i| format!("[CH4].{}>>C", "O".repeat(i + 1))).collect();
    let out = HttpProvider::new(&server.url).unwrap().map(&input).unwrap();
    assert_eq!(out.len(), 70);
    for (i, m) in out.iter().enumerate() {
        assert_eq!(m.mapped, labelled(&input[i]));
        assert_eq!(m.confidence, Some(0.93));
    }
    let sizes: Vec<usize> = server.log.lock().unwrap().iter().map(|r| reactions(&r.body).len()).collect();
    assert_eq!(sizes, vec![MAX_BATCH, MAX_BATCH, 6]);
}

#[test]
fn health_reports_loading_then_ready() {
    let server = serve(|req, n| {
        assert_eq!((req.method.as_str(), req.path.as_str()), ("GET", "/health"));
        if n == 0 {
            (503, r#"{"status":"loading"}"#.into())
        } else {
            (200, r#"{"status":"ok","model_version":"m-1"}"#.into())
        }
    });
    let p = HttpProvider::new(&server.url).unwrap();
    assert!(matches!(p.health(), Err(MappingError::Unavailable(_))));
    let ready = p.health().unwrap();
    assert_eq!(ready.status, "ok");
    assert_eq!(ready.model_version.as_deref(), Some("m-1"));
}

#[test]
fn error_statuses_map_to_distinct_errors() {
    let server = serve(|_, n| match n {
        0 => (400, r#"{"error":"unparseable reaction SMILES","index":0}"#.into()),
        1 => (413, r#"{"error":"token budget exceeded","index":0}"#.into()),
        2 => (503, r#"{"error":"model not loaded"}"#.into()),
        3 => (500, "boom".into()),
        4 => (200, r#"{"mapped":[],"confidence":[]}"#.into()),
        _ => (200, r#"{"mapped":["[CH4:1]>>[CH4:1]"],"confidence":[1.5]}"#.into()),
    });
    let p = HttpProvider::new(&server.url).unwrap();
    let one = vec!["C>>C".to_string()];
    assert!(matches!(p.map(&one), Err(MappingError::Rejected(_))));
    assert!(matches!(p.map(&one), Err(MappingError::TokenBudget(_))));
    assert!(matches!(p.map(&one), Err(MappingError::Unavailable(_))));
    assert!(matches!(p.map(&one), Err(MappingError::Transport(_))));
    assert!(matches!(p.map(&one), Err(MappingError::Contract(_))));
    assert!(matches!(p.map(&one), Err(MappingError::Contract(_))));
}

#[test]
fn unreachable_service_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let p = HttpProvider::new(&url).unwrap();
    assert!(matches!(p.map(&["C>>C".to_string()]), Err(MappingError::Transport(_))));
}

fn fixture_table(name: &str) -> BTreeMap<String, String> {
    let text = std::fs::read_to_string(fixture(name).join("mapped.csv")).unwrap();
    text.lines().skip(1).map(|l| l.split_once(',').unwrap()).map(|(a, b)| (a.into(), b.into())).collect()
}

#[test]
fn cache_only_sends_unseen_reactions() {
    let table = fixture_table("tdi");
    let server = serve(move |req, _| {
        let rs: Vec<String> = reactions(&req.body).iter().map(|r| table[r].clone()).collect();
        (200, mapped_response(&rs, 0.99))
    });
    let g = graph("tdi");
    let h = inlets("tdi", "inlet_case1.csv");
    let p = HttpProvider::new(&server.url).unwrap();
    let cache = MappingCache::new();
    let first = trace(&g, &h, &cache, Some(&p), &TraceOptions::default()).unwrap();
    let sent = server.log.lock().unwrap().iter().map(|r| reactions(&r.body).len()).sum::<usize>();
    assert_eq!(sent, 9);
    assert_eq!(cache.len(), 9);
    let second = trace(&g, &h, &cache, Some(&p), &TraceOptions::default()).unwrap();
    assert_eq!(server.log.lock().unwrap().len(), 1);
    assert_eq!(first.solution.beta, second.solution.beta);
}
