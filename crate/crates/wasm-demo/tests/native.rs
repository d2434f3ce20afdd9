use locality_wasm_demo::{dominance_native, locate_native, penalty_map_native, sample_map};

#[test]
fn sample_map_features() {
    let map = sample_map();
    assert_eq!(map.len(), 96);
    let got = locate_native(&map, 6, 16, 3, 2, "cohesion", false).unwrap();
    assert_eq!((got[0], got[1], got[3], got[4]), (2.0, 6.0, 2.0, 11.0));
    assert!(got[2] >= got[5]);
}

#[test]
fn bad_requests_become_messages() {
    let map = sample_map();
    assert!(locate_native(&map, 6, 15, 3, 2, "sum", false).is_err());
    assert!(locate_native(&map, 6, 16, 3, 2, "median", false).unwrap_err().contains("median"));
    assert!(locate_native(&map, 6, 16, 3, 40, "sum", false).unwrap_err().contains("non-overlapping"));
    assert!(penalty_map_native(-1.0, 1.0).is_err());
}

#[test]
fn penalty_map_shares() {
    let unit = penalty_map_native(1.0, 1.0).unwrap();
    assert!(unit.iter().all(|&c| (c - 1.0).abs() < 1e-15));
    let c = penalty_map_native(0.5, 2.0).unwrap();
    for (i, want) in [(4, 0.36), (1, 0.72), (0, 1.44)] {
        assert!((c[i] - want).abs() < 1e-12, "{i}: {}", c[i]);
    }
    assert!((c.iter().sum::<f64>() - 9.0).abs() < 1e-12);
}

#[test]
fn dominance_summary() {
    let ok = dominance_native(0.6, 2.0).unwrap();
    assert_eq!(ok.len(), 7);
    assert_eq!((ok[0], ok[1], ok[3], ok[5]), (512.0, 0.0, 0.0, 0.0));
    assert!((ok[2] - 0.675).abs() < 1e-6);
    let bad = dominance_native(0.7, 2.0).unwrap();
    assert_eq!(bad[1], 4.0);
}
