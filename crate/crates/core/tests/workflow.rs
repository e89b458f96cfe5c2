use std::sync::Arc;
use std::time::Instant;

use dermacen_core::orchestrator::*;
use dermacen_core::segmentation::GrabCutParams;

#[test]
fn demo_cases_reach_their_terminal_states() {
    let params = GrabCutParams::default();
    let t = Instant::now();
    let mock = Arc::new(demo_mock(&params).unwrap());
    println!("mock built in {:?}", t.elapsed());
    let providers = ProviderSet::from_mock(mock, RetryPolicy::default());
    for demo in demo_cases() {
        let t = Instant::now();
        let mut case = Case::new(demo.name, demo.png.clone());
        run_full(&mut case, &providers, &params).unwrap();
        println!("{} in {:?}", demo.name, t.elapsed());
        assert_eq!(case.state, demo.terminal, "{}", demo.name);
    }
}

#[test]
fn checked_in_demo_fixtures_are_current() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");
    let fresh = tempfile::tempdir().unwrap();
    demo_mock(&GrabCutParams::default()).unwrap().write_dir(fresh.path()).unwrap();
    let names = |d: &std::path::Path| {
        let mut v: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    assert_eq!(names(&dir.join("mock")), names(fresh.path()), "rerun the demo_fixtures example");
    for demo in demo_cases() {
        assert_eq!(std::fs::read(dir.join("images").join(format!("{}.png", demo.name))).unwrap(), demo.png);
    }
}
