mod common;

use locality::tinycnn::*;

fn small_net(seed: u64) -> TinyNetConfig {
    TinyNetConfig {
        input: (2, 6, 6),
        layers: vec![
            LayerSpec::Conv { out_channels: 3 },
            LayerSpec::MaxPool,
            LayerSpec::Conv { out_channels: 2 },
            LayerSpec::Dense { units: 5 },
            LayerSpec::Dense { units: 3 },
        ],
        seed,
        init_scale: 1.0,
    }
}

fn batch(n: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor {
    let mut x = seed;
    let data = (0..n * c * h * w)
        .map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect();
    Tensor::from_vec(n, c, h, w, data).unwrap()
}

fn total_loss(net: &TinyNet, x: &Tensor, y: &[usize], reg: &RegMode) -> f64 {
    net.loss(x, y, 0.01, reg).unwrap().total()
}

#[test]
fn full_network_gradient_matches_central_differences() {
    let x = batch(4, 2, 6, 6, 17);
    let y = [0, 2, 1, 2];
    for reg in [RegMode::Uniform, RegMode::loco_shared(0.7, 0.77, 2)] {
        let mut net = TinyNet::new(&small_net(3)).unwrap();
        let with_grad = net.loss_and_gradient(&x, &y, 0.01, &reg).unwrap();
        assert_eq!(with_grad, net.loss(&x, &y, 0.01, &reg).unwrap());
        let analytic = net.gradients();
        let theta = net.parameters();
        let h = 1e-6;
        let mut fd = Vec::with_capacity(theta.len());
        for i in 0..theta.len() {
            let mut p = theta.clone();
            p[i] = theta[i] + h;
            net.set_parameters(&p).unwrap();
            let up = total_loss(&net, &x, &y, &reg);
            p[i] = theta[i] - h;
            net.set_parameters(&p).unwrap();
            let down = total_loss(&net, &x, &y, &reg);
            fd.push((up - down) / (2.0 * h));
        }
        let err = common::relative_error(&analytic, &fd);
        assert!(err < 1e-4, "{reg:?}: relative error {err}");
    }
}

fn run(reg: RegMode, seed: u64) -> TrainReport {
    let ds = synthetic_shapes(96, 32, 8, seed).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 16,
        reg,
        seed,
        ..TrainConfig::default()
    };
    train(&TinyNetConfig::desk(1, 8, 8, 4, seed), &cfg, &ds).unwrap()
}

#[test]
fn unit_loco_factors_reproduce_uniform_training() {
    let a = run(RegMode::Uniform, 2);
    let b = run(RegMode::loco_shared(1.0, 1.0, 2), 2);
    assert_eq!(a, b);
    let c = run(RegMode::loco_shared(0.5, 2.0, 2), 2);
    assert_ne!(a.kernels, c.kernels);
}

#[test]
fn training_is_deterministic() {
    let a = run(RegMode::loco_shared(0.7, 0.77, 2), 9);
    let b = run(RegMode::loco_shared(0.7, 0.77, 2), 9);
    assert_eq!(a, b);
    for e in &a.epochs {
        assert!(e.reg_loss >= 0.0 && e.data_loss >= 0.0);
        assert!((e.train_loss - (e.data_loss + e.reg_loss)).abs() < 1e-12);
    }
    assert_eq!(a.kernels.layers.len(), 2);
    assert_eq!(a.kernels.layers[1].len(), 8 * 16);
}

#[test]
fn eval_outputs_do_not_depend_on_batch_company() {
    let mut net = TinyNet::new(&small_net(4)).unwrap();
    let x = batch(6, 2, 6, 6, 1);
    // move the running statistics away from their initial values
    for _ in 0..3 {
        net.loss_and_gradient(&x, &[0, 1, 2, 0, 1, 2], 0.0, &RegMode::Uniform).unwrap();
    }
    let all = net.predict(&x).unwrap();
    let first = Tensor::from_vec(1, 2, 6, 6, x.data[..72].to_vec()).unwrap();
    let alone = net.predict(&first).unwrap();
    assert_eq!(&all.data[..3], &alone.data[..]);
}

#[test]
fn zero_learning_rate_freezes_weights() {
    let mut net = TinyNet::new(&small_net(5)).unwrap();
    let before = net.parameters();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    let x = batch(4, 2, 6, 6, 2);
    train_step(&mut net, &x, &[0, 1, 2, 0], &cfg, 0.0, 0).unwrap();
    assert_eq!(net.parameters(), before);
}

#[test]
fn non_finite_loss_aborts() {
    let mut net = TinyNet::new(&small_net(6)).unwrap();
    let mut x = batch(2, 2, 6, 6, 3);
    x.data[5] = f64::NAN;
    let err = train_step(&mut net, &x, &[0, 1], &TrainConfig::default(), 0.1, 7).unwrap_err();
    assert!(matches!(err, locality::Error::NonFiniteLoss { step: 7, .. }));
}

#[test]
fn memorizes_ten_samples() {
    let mut ds = synthetic_shapes(10, 0, 8, 21).unwrap();
    ds.test = ds.train.clone();
    let cfg = TrainConfig {
        epochs: 60,
        batch_size: 10,
        learning_rate: 0.05,
        decay_epochs: vec![],
        flip: false,
        ..TrainConfig::default()
    };
    let report = train(&TinyNetConfig::desk(1, 8, 8, 4, 21), &cfg, &ds).unwrap();
    assert_eq!(report.final_test_error(), Some(0.0));
}

#[test]
fn empty_and_mismatched_data_rejected() {
    let ds = synthetic_shapes(8, 0, 8, 0).unwrap();
    let mut empty = ds.clone();
    empty.train.clear();
    let cfg = TrainConfig::default();
    assert!(matches!(
        train(&TinyNetConfig::desk(1, 8, 8, 4, 0), &cfg, &empty),
        Err(locality::Error::EmptyDataset)
    ));
    assert!(train(&TinyNetConfig::desk(1, 16, 16, 4, 0), &cfg, &ds).is_err());
    assert!(train(&TinyNetConfig::desk(1, 8, 8, 3, 0), &cfg, &ds).is_err());
    let wrong = TrainConfig {
        reg: RegMode::loco_shared(0.7, 0.77, 3),
        ..TrainConfig::default()
    };
    assert!(train(&TinyNetConfig::desk(1, 8, 8, 4, 0), &wrong, &ds).is_err());
}
