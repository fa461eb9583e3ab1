mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cdfbound::model::{propagate_box, Activation, AxisBox, FeedforwardNetwork, InputDistribution};
use cdfbound::Error;

use common::random_net;

#[test]
fn output_box_contains_sampled_extremes() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let net = random_net(&mut rng, &[2, 8, 8, 1], Activation::Relu, 2.0);
    let b = propagate_box(&net, &AxisBox::unit(2)).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..1_000_000 {
        let y = net.eval(&[rng.random(), rng.random()])[0];
        lo = lo.min(y);
        hi = hi.max(y);
    }
    assert!(b.output.lower[0] <= lo && hi <= b.output.upper[0]);
}

#[test]
fn neuron_intervals_contain_sampled_activations() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let net = random_net(&mut rng, &[3, 6, 6, 2], Activation::Tanh, 2.0);
    let domain = AxisBox::new(vec![-1.0, 0.0, 2.0], vec![1.0, 0.5, 3.0]).unwrap();
    let b = propagate_box(&net, &domain).unwrap();
    let mut z = Vec::new();
    for _ in 0..10_000 {
        let mut a: Vec<f64> = (0..3).map(|i| rng.random_range(domain.lower[i]..=domain.upper[i])).collect();
        for (l, layer) in net.layers().iter().enumerate() {
            layer.affine(&a, &mut z);
            for (i, v) in z.iter().enumerate() {
                assert!(b.pre[l][i].contains(*v));
                assert!(b.post[l][i].contains(layer.activation.eval(*v)));
            }
            a = z.iter().map(|v| layer.activation.eval(*v)).collect();
        }
    }
}

#[test]
fn loads_sixteen_wide_network_from_file() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let net = random_net(&mut rng, &[2, 16, 16, 1], Activation::Relu, 1.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    net.save(&path).unwrap();
    let back = FeedforwardNetwork::load(&path).unwrap();
    assert_eq!(back.layers().len(), 3);
    assert_eq!((back.input_dim(), back.output_dim()), (2, 1));
    assert_eq!(back, net);
}

#[test]
fn mismatched_file_names_layer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"layers":[
            {"weights":[[1,0],[0,1],[1,1]],"bias":[0,0,0],"activation":"relu"},
            {"weights":[[1,1,1,1]],"bias":[0],"activation":"identity"}]}"#,
    )
    .unwrap();
    match FeedforwardNetwork::load(&path) {
        Err(Error::LayerMismatch { layer, .. }) => assert_eq!(layer, 1),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(FeedforwardNetwork::load("/nonexistent/net.json"), Err(Error::Io { .. })));
}

#[test]
fn beta_pdf_matches_density_formula() {
    let dist = InputDistribution::beta_product(vec![(2.0, 2.0), (3.0, 2.0)]).unwrap();
    let pdf = dist.pdf_as_piecewise_polynomial().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..1000 {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        let want = 72.0 * x * y * y * (1.0 - x) * (1.0 - y);
        assert!((pdf.density(&[x, y]) - want).abs() < 1e-12);
        assert!((dist.density(&[x, y]) - want).abs() < 1e-12);
    }
    assert!((pdf.total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn gaussian_mixture_is_not_polynomial() {
    let dist = InputDistribution::gaussian_mixture(
        vec![1.0],
        vec![vec![0.5]],
        vec![vec![vec![0.1]]],
        AxisBox::unit(1),
    )
    .unwrap();
    assert!(dist.pdf_as_piecewise_polynomial().is_none());
}

#[test]
fn beta_samples_have_expected_moments() {
    let dist = InputDistribution::beta_product(vec![(2.0, 2.0), (3.0, 2.0)]).unwrap();
    let sampler = dist.sampler().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let n = 200_000;
    let mut sum = [0.0; 2];
    let mut x = [0.0; 2];
    for _ in 0..n {
        assert!(sampler.sample_into(&mut rng, &mut x));
        sum[0] += x[0];
        sum[1] += x[1];
    }
    assert!((sum[0] / n as f64 - 0.5).abs() < 0.003);
    assert!((sum[1] / n as f64 - 0.6).abs() < 0.003);
}

#[test]
fn mixture_density_integrates_to_truncated_mass() {
    let dist = InputDistribution::gaussian_mixture(
        vec![0.3, 0.7],
        vec![vec![0.2, 0.4], vec![0.8, 0.6]],
        vec![vec![vec![0.02, 0.0], vec![0.0, 0.05]], vec![vec![0.04, 0.0], vec![0.0, 0.01]]],
        AxisBox::unit(2),
    )
    .unwrap();
    let m = 400;
    let h = 1.0 / m as f64;
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            total += dist.density(&[(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]) * h * h;
        }
    }
    assert!((total - dist.mass().unwrap()).abs() < 1e-4);
}

#[test]
fn distribution_json_round_trips_through_file() {
    let dist = InputDistribution::beta_product(vec![(2.0, 5.0)]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dist.json");
    std::fs::write(&path, dist.to_json_string()).unwrap();
    let back = InputDistribution::load(&path).unwrap();
    assert_eq!(back.to_json_string(), dist.to_json_string());
}
