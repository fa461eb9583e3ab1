mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cdfbound::bounds_engine::{
    cdf_bounds, default_grid, dkw_half_width, linspace, mc_cdf, mc_samples, oob_tally, oob_tally_with_margin,
    BoundsOptions, DKW_ALPHA,
};
use cdfbound::exact_cdf::PieceSet;
use cdfbound::model::{Activation, AxisBox, FeedforwardNetwork, InputDistribution, Layer};
use cdfbound::regions::{PlNetwork, DEFAULT_CELL_BUDGET};

use common::random_net;

fn beta() -> InputDistribution {
    InputDistribution::beta_product(vec![(2.0, 2.0), (3.0, 2.0)]).unwrap()
}

fn mixture() -> InputDistribution {
    InputDistribution::gaussian_mixture(
        vec![0.5, 0.5],
        vec![vec![0.3, 0.4], vec![0.7, 0.6]],
        vec![vec![vec![0.02, 0.005], vec![0.005, 0.03]], vec![vec![0.03, 0.0], vec![0.0, 0.02]]],
        AxisBox::unit(2),
    )
    .unwrap()
}

fn identity() -> FeedforwardNetwork {
    FeedforwardNetwork::new(vec![Layer::new(vec![vec![1.0]], vec![0.0], Activation::Identity)]).unwrap()
}

fn small_opts(n: usize) -> BoundsOptions {
    BoundsOptions {
        segments_per_region: n,
        vertex_budget: 5000,
        ..Default::default()
    }
}

#[test]
fn relu_net_with_beta_inputs_has_zero_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let net = random_net(&mut rng, &[2, 8, 8, 1], Activation::Relu, 2.0);
    let dist = beta();
    let grid = default_grid(&net, &dist.support(), 0, 300).unwrap();
    let b = cdf_bounds(&net, &dist, &grid, &BoundsOptions::default()).unwrap();
    assert!(b.max_gap() <= 1e-9);
    let pdf = dist.pdf_as_piecewise_polynomial().unwrap();
    let set = PieceSet::from_network(&PlNetwork::from_feedforward(&net).unwrap(), &pdf, DEFAULT_CELL_BUDGET).unwrap();
    let ys: Vec<Vec<f64>> = grid.iter().map(|&y| vec![y]).collect();
    let exact = set.cdf_curve(&ys).unwrap();
    for i in 0..grid.len() {
        assert!((b.lower[i] - exact[i]).abs() <= 1e-9 && (b.upper[i] - exact[i]).abs() <= 1e-9);
    }
    assert!(b.metadata.exact_network && b.metadata.exact_pdf);
}

#[test]
fn identity_with_uniform_input_is_the_diagonal() {
    let grid = linspace(0.0, 1.0, 11);
    let b = cdf_bounds(&identity(), &InputDistribution::uniform(AxisBox::unit(1)), &grid, &small_opts(2)).unwrap();
    for (i, y) in grid.iter().enumerate() {
        assert!((b.lower[i] - y).abs() < 1e-12 && (b.upper[i] - y).abs() < 1e-12);
    }
}

#[test]
fn bounds_contain_monte_carlo_cdf() {
    let mut rng = ChaCha8Rng::seed_from_u64(701);
    let tanh = random_net(&mut rng, &[2, 6, 6, 1], Activation::Tanh, 2.0);
    let relu = random_net(&mut rng, &[2, 6, 6, 1], Activation::Relu, 2.0);
    let cases = [
        (&tanh, beta()),
        (&tanh, mixture()),
        (&relu, mixture()),
        (&tanh, InputDistribution::uniform(AxisBox::unit(2))),
    ];
    for (net, dist) in cases {
        let grid = default_grid(net, &dist.support(), 0, 200).unwrap();
        let b = cdf_bounds(net, &dist, &grid, &small_opts(4)).unwrap();
        assert!(b.lower.iter().zip(&b.upper).all(|(l, u)| 0.0 <= *l && l <= u && *u <= 1.0));
        let mc = mc_samples(net, &dist, 100_000, 702, 0).unwrap();
        let est: Vec<(f64, f64)> = grid.iter().map(|&y| (y, mc.eval(y))).collect();
        let t = oob_tally_with_margin(&b, &est, mc.half_width()).unwrap();
        assert_eq!(t.below + t.above, 0, "{:?}", b.metadata);
    }
}

#[test]
fn more_segments_shrink_mean_gap_on_example_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let net = random_net(&mut rng, &[2, 12, 12, 12, 3], Activation::Tanh, 1.5);
    let dist = beta();
    let grid = default_grid(&net, &dist.support(), 0, 200).unwrap();
    let mut opts = small_opts(5);
    opts.output = Some(0);
    let g5 = cdf_bounds(&net, &dist, &grid, &opts).unwrap().gap_stats().0;
    opts.segments_per_region = 10;
    let g10 = cdf_bounds(&net, &dist, &grid, &opts).unwrap().gap_stats().0;
    assert!(g10 < g5, "{g10} vs {g5}");
}

#[test]
fn multi_output_network_needs_an_output_index() {
    let mut rng = ChaCha8Rng::seed_from_u64(703);
    let net = random_net(&mut rng, &[2, 4, 2], Activation::Relu, 1.0);
    let grid = linspace(-1.0, 1.0, 5);
    assert!(cdf_bounds(&net, &beta(), &grid, &small_opts(2)).is_err());
    let mut opts = small_opts(2);
    opts.output = Some(1);
    assert_eq!(cdf_bounds(&net, &beta(), &grid, &opts).unwrap().metadata.output, 1);
    opts.output = Some(2);
    assert!(cdf_bounds(&net, &beta(), &grid, &opts).is_err());
}

#[test]
fn empirical_cdf_of_identity_and_relu() {
    let uniform = InputDistribution::uniform(AxisBox::unit(1));
    let half = mc_cdf(&identity(), &uniform, 1_000_000, &[0.5], 704).unwrap()[0];
    assert!((half - 0.5).abs() <= dkw_half_width(1_000_000, DKW_ALPHA));
    assert!((dkw_half_width(1_000_000, DKW_ALPHA) - 0.00195).abs() < 1e-5);

    let relu = FeedforwardNetwork::new(vec![
        Layer::new(vec![vec![1.0]], vec![0.0], Activation::Relu),
        Layer::new(vec![vec![1.0]], vec![0.0], Activation::Identity),
    ])
    .unwrap();
    let sym = InputDistribution::uniform(AxisBox::new(vec![-1.0], vec![1.0]).unwrap());
    let f = mc_cdf(&relu, &sym, 100_000, &[-1e-12, 0.0], 705).unwrap();
    assert_eq!(f[0], 0.0);
    assert!((f[1] - 0.5).abs() < 0.01);
}

#[test]
fn monte_carlo_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(706);
    let net = random_net(&mut rng, &[2, 5, 1], Activation::Tanh, 1.0);
    let grid = linspace(-2.0, 2.0, 50);
    let a = mc_cdf(&net, &mixture(), 50_000, &grid, 9).unwrap();
    let b = mc_cdf(&net, &mixture(), 50_000, &grid, 9).unwrap();
    assert_eq!(a, b);
    let c = mc_cdf(&net, &mixture(), 50_000, &grid, 10).unwrap();
    assert_ne!(a, c);
}

#[test]
fn oob_tally_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let net = random_net(&mut rng, &[2, 5, 1], Activation::Tanh, 1.0);
    let grid = default_grid(&net, &AxisBox::unit(2), 0, 100).unwrap();
    let b = cdf_bounds(&net, &beta(), &grid, &small_opts(3)).unwrap();
    let mid: Vec<(f64, f64)> = grid.iter().enumerate().map(|(i, &y)| (y, 0.5 * (b.lower[i] + b.upper[i]))).collect();
    let t = oob_tally(&b, &mid).unwrap();
    assert_eq!((t.below, t.above, t.total), (0, 0, 100));
    let high: Vec<(f64, f64)> = grid.iter().enumerate().map(|(i, &y)| (y, b.upper[i] + 0.01)).collect();
    let t = oob_tally(&b, &high).unwrap();
    assert_eq!((t.below, t.above, t.total), (0, 100, 100));
    assert!(oob_tally(&b, &[(grid[0] + 1e-9, 0.0)]).is_err());
}

#[test]
fn oob_against_exact_bounds_counts_every_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(708);
    let net = random_net(&mut rng, &[2, 6, 1], Activation::Relu, 2.0);
    let dist = beta();
    let grid = default_grid(&net, &dist.support(), 0, 200).unwrap();
    let b = cdf_bounds(&net, &dist, &grid, &BoundsOptions::default()).unwrap();
    let mc = mc_samples(&net, &dist, 20_000, 709, 0).unwrap();
    let est: Vec<(f64, f64)> = grid.iter().map(|&y| (y, mc.eval(y))).collect();
    let t = oob_tally(&b, &est).unwrap();
    let below = est.iter().zip(&b.lower).filter(|((_, p), l)| *p < **l - 1e-12).count();
    let above = est.iter().zip(&b.upper).filter(|((_, p), u)| *p > **u + 1e-12).count();
    assert_eq!((t.below, t.above), (below, above));
    assert!(below + above > 0);
}

#[test]
fn csv_output_has_lf_rows() {
    let grid = linspace(0.0, 1.0, 3);
    let b = cdf_bounds(&identity(), &InputDistribution::uniform(AxisBox::unit(1)), &grid, &small_opts(2)).unwrap();
    let mut buf = Vec::new();
    b.write_csv(&mut buf, Some(&[0.0, 0.5, 1.0])).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "y,lower,upper,mc");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("0.5,0.5,0.5,0.5"));
}
