use locality::io::*;
use locality::{fixtures, Kernel, KernelLayer, KernelSet};
use proptest::prelude::*;

fn sample_set() -> KernelSet {
    let conv = KernelLayer::new(
        "conv1",
        0,
        2,
        2,
        vec![fixtures::gaussian(), fixtures::laplacian(), fixtures::laplacian().scaled(0.5), fixtures::gaussian()],
    )
    .unwrap();
    let wide = KernelLayer::from_kernels("conv2", 1, vec![Kernel::new(5, (0..25).map(|i| i as f64 / 7.0).collect()).unwrap(); 2]).unwrap();
    KernelSet::new("sample", Some("fixtures".into()), vec![wide, conv])
}

#[test]
fn file_roundtrip_is_lossless_and_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let set = sample_set();
    assert_eq!(set.layers[0].name, "conv1");
    write_kernelset(&set, &a).unwrap();
    let back = read_kernelset(&a).unwrap();
    assert_eq!(back, set);
    write_kernelset(&back, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn missing_file_is_an_io_error() {
    let err = read_kernelset("/nonexistent/k.json").unwrap_err();
    assert!(matches!(err, locality::Error::Io { .. }));
    assert!(err.is_input_format());
}

#[test]
fn feature_maps_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    std::fs::write(&csv, "0,1,2\n3,4,5\n6,7,8\n").unwrap();
    let m = read_feature_map(&csv).unwrap();
    assert_eq!(m.get(2, 1), 7.0);
    let pgm = dir.path().join("m.pgm");
    emit_pgm(&[0.0, 0.5, 1.0, 1.0], 2, 2, &pgm, false).unwrap();
    let p = read_feature_map(&pgm).unwrap();
    assert_eq!((p.rows(), p.cols()), (2, 2));
    assert_eq!(p.get(1, 1), 1.0);
}

proptest! {
    #[test]
    fn arbitrary_sets_roundtrip(
        layers in prop::collection::vec(
            (prop::sample::select(vec![1usize, 3, 5]), 1usize..3, 1usize..3, any::<u64>()),
            1..4,
        ),
    ) {
        let built: Vec<KernelLayer> = layers
            .iter()
            .enumerate()
            .map(|(d, &(k, cin, cout, seed))| {
                let kernels = (0..cin * cout)
                    .map(|n| {
                        let w = (0..k * k)
                            .map(|i| {
                                let x = seed.wrapping_mul(6364136223846793005).wrapping_add((n * 31 + i) as u64);
                                (x >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
                            })
                            .collect();
                        Kernel::new(k, w).unwrap()
                    })
                    .collect();
                KernelLayer::new(format!("l{d}"), d, cin, cout, kernels).unwrap()
            })
            .collect();
        let set = KernelSet::new("p", None, built);
        let text = kernelset_to_string(&set).unwrap();
        prop_assert_eq!(parse_kernelset(&text).unwrap(), set);
    }
}
