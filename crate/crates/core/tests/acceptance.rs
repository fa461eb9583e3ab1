//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cdfbound::bounds_engine::{cdf_bounds, linspace, mc_samples, oob_tally_with_margin, BoundsOptions};
use cdfbound::exact_cdf::{PieceSet, PiecewisePolynomialPdf};
use cdfbound::geometry::{integrate_polynomial_over_simplex, integrate_polynomial_over_simplex_exact};
use cdfbound::model::{propagate_box, Activation, AxisBox, FeedforwardNetwork, InputDistribution, Interval, Layer};
use cdfbound::regions::{enumerate_cells, PlNetwork, DEFAULT_CELL_BUDGET};
use cdfbound::relu_bounding::{
    bound_activation, bound_network, gadget, plan_segments, tangent_bound, GadgetKind, PiecewiseLinearScalar,
};

use common::*;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn curve(net: &FeedforwardNetwork, pdf: &PiecewisePolynomialPdf, grid: &[f64]) -> Vec<f64> {
    let pl = PlNetwork::from_feedforward(net).unwrap();
    let set = PieceSet::from_network(&pl, pdf, DEFAULT_CELL_BUDGET).unwrap();
    let ys: Vec<Vec<f64>> = grid.iter().map(|&y| vec![y]).collect();
    set.cdf_curve(&ys).unwrap()
}

fn exactness_vs_analytics() -> Verdict {
    let grid = linspace(-0.5, 1.5, 1000);
    let identity = FeedforwardNetwork::new(vec![Layer::new(vec![vec![1.0]], vec![0.0], Activation::Identity)]).unwrap();
    let uniform = InputDistribution::uniform(AxisBox::unit(1)).pdf_as_piecewise_polynomial().unwrap();
    let got = curve(&identity, &uniform, &grid);
    let e1 = grid
        .iter()
        .zip(&got)
        .map(|(y, f)| (f - y.clamp(0.0, 1.0)).abs())
        .fold(0.0, f64::max);

    let relu = FeedforwardNetwork::new(vec![
        Layer::new(vec![vec![1.0]], vec![0.0], Activation::Relu),
        Layer::new(vec![vec![1.0]], vec![0.0], Activation::Identity),
    ])
    .unwrap();
    let sym = InputDistribution::uniform(AxisBox::new(vec![-1.0], vec![1.0]).unwrap())
        .pdf_as_piecewise_polynomial()
        .unwrap();
    let got = curve(&relu, &sym, &grid);
    let analytic = |y: f64| if y < 0.0 { 0.0 } else { ((1.0 + y) / 2.0).min(1.0) };
    let e2 = grid
        .iter()
        .zip(&got)
        .map(|(y, f)| (f - analytic(*y)).abs())
        .fold(0.0, f64::max);
    verdict(
        e1 <= 1e-9 && e2 <= 1e-9,
        format!("max error identity {e1:.1e}, relu {e2:.1e} over 1000 points"),
    )
}

fn exact_vs_monte_carlo() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = random_net(&mut rng, &[2, 8, 8, 1], Activation::Relu, 2.0);
    let dist = InputDistribution::beta_product(vec![(2.0, 2.0), (3.0, 2.0)]).unwrap();
    let pdf = dist.pdf_as_piecewise_polynomial().unwrap();
    let out = propagate_box(&net, &dist.support()).unwrap().output;
    // Both cdfs are monotone, so between adjacent grid points the distance is
    // at most the larger cross difference; this bounds the sup over all y.
    let grid = linspace(out.lower[0], out.upper[0], 20_000);
    let exact = curve(&net, &pdf, &grid);
    let mc = mc_samples(&net, &dist, 1_000_000, 21, 0).unwrap();
    let emp = mc.eval_grid(&grid);
    let on_grid = exact.iter().zip(&emp).map(|(f, e)| (f - e).abs()).fold(0.0, f64::max);
    let between = (1..grid.len())
        .map(|i| (exact[i] - emp[i - 1]).max(emp[i] - exact[i - 1]))
        .fold(0.0, f64::max);
    let sup = on_grid.max(between).max(exact[0]).max(1.0 - exact[exact.len() - 1]);
    verdict(
        sup <= 0.002,
        format!(
            "sup |F − F_mc| ≤ {sup:.5} (at grid points {on_grid:.5}; DKW ε = {:.5})",
            mc.half_width()
        ),
    )
}

fn integration_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut exact_mismatch = 0;
    for _ in 0..100 {
        let dim = rng.random_range(1..=3);
        let degree = rng.random_range(0..=4);
        let p = random_polynomial(&mut rng, dim, degree, 6);
        let s = random_simplex(&mut rng, dim);
        let got = integrate_polynomial_over_simplex(&p, &s).unwrap();
        let want = quadrature(|x| p.eval(x), &s, 6);
        let scale = quadrature(|x| abs_coefficients(&p).eval(&x.iter().map(|v| v.abs()).collect::<Vec<_>>()), &s, 6);
        worst = worst.max((got - want).abs() / want.abs().max(scale).max(f64::MIN_POSITIVE));
        let exact = integrate_polynomial_over_simplex_exact(&p, &s).unwrap();
        if exact != symbolic_integral(&p, &to_rational(&s.vertices)) {
            exact_mismatch += 1;
        }
    }
    verdict(
        worst <= 1e-8 && exact_mismatch == 0,
        format!("max relative error {worst:.1e}; exact-mode mismatches {exact_mismatch}/100"),
    )
}

fn region_soundness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_vol, mut worst_map, mut cells) = (0.0f64, 0.0f64, 0);
    for t in 0..20 {
        let n0 = 2 + t % 2;
        let width = rng.random_range(3..=7);
        let net = random_net(&mut rng, &[n0, width, width, 1], Activation::Relu, 2.0);
        let lo: Vec<f64> = (0..n0).map(|_| rng.random_range(-1.0..0.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.5..2.0)).collect();
        let domain = AxisBox::new(lo, hi).unwrap();
        let found = enumerate_cells(&net, &domain).unwrap();
        cells += found.len();
        let vol: f64 = found.iter().map(|c| c.polytope.volume()).sum();
        worst_vol = worst_vol.max((vol - domain.volume()).abs() / domain.volume());
        for c in &found {
            let verts = c.polytope.vertices();
            for _ in 0..4 {
                let w: Vec<f64> = verts.iter().map(|_| rng.random_range(0.1..1.0)).collect();
                let total: f64 = w.iter().sum();
                let x: Vec<f64> = (0..n0)
                    .map(|d| verts.iter().zip(&w).map(|(v, wi)| v[d] * wi).sum::<f64>() / total)
                    .collect();
                let err = (c.map.apply(&x)[0] - net.eval(&x)[0]).abs();
                worst_map = worst_map.max(err);
            }
        }
    }
    verdict(
        worst_vol <= 1e-6 && worst_map <= 1e-9,
        format!("{cells} cells; volume error {worst_vol:.1e}; map error {worst_map:.1e}"),
    )
}

fn lemma_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    let mut min_ratio = f64::INFINITY;
    for act in [Activation::Tanh, Activation::Logistic] {
        for _ in 0..50 {
            let a = rng.random_range(-5.0..4.0);
            let iv = Interval::new(a, a + rng.random_range(0.2..5.0));
            let (u, l) = bound_activation(act, iv, 4).unwrap();
            let plan = plan_segments(act, iv, 4).unwrap();
            for &x in &plan.breakpoints {
                let f = act.eval(x);
                if (u.eval(x) - f).abs() > 1e-12 || (l.eval(x) - f).abs() > 1e-12 {
                    failures.push(format!("{act:?} endpoint {x}"));
                }
            }
            for k in 0..plan.num_segments() {
                let (s0, s1) = plan.segment(k);
                let t = tangent_bound(act, s0, s1);
                if t.len() == 3 && !(s0 < t[1].0 && t[1].0 < s1) {
                    failures.push(format!("{act:?} tangent point {:?} outside ({s0}, {s1})", t[1].0));
                }
            }
            if u.slopes().iter().chain(&l.slopes()).any(|v| *v < 0.0) {
                failures.push(format!("{act:?} negative slope"));
            }
            for pl in [&u, &l] {
                if pl.eval(iv.lo) != act.eval(iv.lo) || pl.eval(iv.hi) != act.eval(iv.hi) {
                    failures.push(format!("{act:?} image endpoints"));
                }
            }
            let (u2, l2) = bound_activation(act, iv, 8).unwrap();
            for i in 0..1000 {
                let x = iv.lo + iv.width() * i as f64 / 999.0;
                let f = act.eval(x);
                if l.eval(x) > f + 1e-12 || f > u.eval(x) + 1e-12 {
                    failures.push(format!("{act:?} sandwich at {x}"));
                }
                if u2.eval(x) > u.eval(x) + 1e-12 || l2.eval(x) < l.eval(x) - 1e-12 {
                    failures.push(format!("{act:?} refinement at {x}"));
                }
            }
            let regions = plan_segments(act, iv, 1).unwrap();
            let (u16, l16) = bound_activation(act, iv, 16).unwrap();
            let (u32, l32) = bound_activation(act, iv, 32).unwrap();
            for k in 0..regions.num_segments() {
                let (r0, r1) = regions.segment(k);
                let gap = |u: &PiecewiseLinearScalar, l: &PiecewiseLinearScalar| {
                    (0..=4000)
                        .map(|i| r0 + (r1 - r0) * i as f64 / 4000.0)
                        .map(|x| u.eval(x) - l.eval(x))
                        .fold(0.0, f64::max)
                };
                let (g16, g32) = (gap(&u16, &l16), gap(&u32, &l32));
                if g32 > 1e-12 {
                    min_ratio = min_ratio.min(g16 / g32);
                }
            }
        }
    }
    if min_ratio < 3.5 {
        failures.push(format!("quadratic decay ratio {min_ratio:.3}"));
    }
    let shown: Vec<&String> = failures.iter().take(3).collect();
    verdict(
        failures.is_empty(),
        format!("100 intervals; min region gap ratio 16→32 segments {min_ratio:.3}; failures {} {shown:?}", failures.len()),
    )
}

fn example_two_net() -> FeedforwardNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    random_net(&mut rng, &[2, 12, 12, 12, 3], Activation::Tanh, 1.5)
}

fn sandwich_and_refinement() -> Verdict {
    let net = example_two_net();
    let domain = AxisBox::unit(2);
    let p5 = bound_network(&net, &domain, 5).unwrap();
    let p10 = bound_network(&net, &domain, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let (mut violations, mut g5, mut g10) = (0, 0.0f64, 0.0f64);
    for _ in 0..100_000 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let y = net.eval(&x);
        for (pair, g) in [(&p5, &mut g5), (&p10, &mut g10)] {
            let (u, l) = pair.eval(&x);
            for k in 0..3 {
                if !(l[k] <= y[k] + 1e-9 && y[k] <= u[k] + 1e-9) {
                    violations += 1;
                }
                *g = g.max(u[k] - l[k]);
            }
        }
    }
    verdict(
        violations == 0 && g10 < g5,
        format!("violations {violations}; max gap n=5 {g5:.4}, n=10 {g10:.4}"),
    )
}

fn guaranteed_containment() -> Verdict {
    let net = example_two_net();
    let dist = InputDistribution::beta_product(vec![(2.0, 2.0), (3.0, 2.0)]).unwrap();
    let out = propagate_box(&net, &dist.support()).unwrap().output;
    let grid = linspace(out.lower[0], out.upper[0], 1000);
    let opts = BoundsOptions {
        segments_per_region: 10,
        output: Some(0),
        ..Default::default()
    };
    let bounds = cdf_bounds(&net, &dist, &grid, &opts).unwrap();
    let mc = mc_samples(&net, &dist, 1_000_000, 70, 0).unwrap();
    let est: Vec<(f64, f64)> = grid.iter().map(|&y| (y, mc.eval(y))).collect();
    let tally = oob_tally_with_margin(&bounds, &est, mc.half_width()).unwrap();
    let (mean, std) = bounds.gap_stats();
    verdict(
        tally.below + tally.above == 0,
        format!(
            "oob beyond DKW {}/{}; U/L-Dist {mean:.4} ({std:.4}); {} cells",
            tally.below + tally.above,
            tally.total,
            bounds.metadata.upper_cells
        ),
    )
}

fn gap_convergence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = random_net(&mut rng, &[1, 8, 8, 1], Activation::Tanh, 2.0);
    let dist = InputDistribution::gaussian_mixture(
        vec![0.5, 0.5],
        vec![vec![0.3], vec![0.7]],
        vec![vec![vec![0.01]], vec![vec![0.02]]],
        AxisBox::unit(1),
    )
    .unwrap();
    let out = propagate_box(&net, &dist.support()).unwrap().output;
    let grid = linspace(out.lower[0], out.upper[0], 1000);
    let mut gaps = Vec::new();
    let mut stats = (0.0, 0.0);
    for step in 0..10 {
        let opts = BoundsOptions {
            segments_per_region: 2 << step,
            cells_per_axis: Some(8 << step),
            refine: false,
            vertex_budget: usize::MAX,
            ..Default::default()
        };
        let b = cdf_bounds(&net, &dist, &grid, &opts).unwrap();
        gaps.push(b.max_gap());
        stats = b.gap_stats();
        if b.max_gap() <= 0.01 {
            break;
        }
    }
    let worst_ratio = gaps.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let last = *gaps.last().unwrap();
    verdict(
        worst_ratio <= 0.6 && last <= 0.01,
        format!(
            "{} steps; worst ratio {worst_ratio:.3}; final max gap {last:.4}; U/L-Dist {:.4} ({:.4})",
            gaps.len(),
            stats.0,
            stats.1
        ),
    )
}

fn gadget_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let max = gadget(GadgetKind::Max, 2).unwrap().network;
    let abs = gadget(GadgetKind::Abs, 1).unwrap().network;
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let (a, b) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        worst = worst.max((max.eval(&[a, b])[0] - a.max(b)).abs());
        worst = worst.max((abs.eval(&[a])[0] - a.abs()).abs());
    }
    let product = gadget(GadgetKind::Product, 2).unwrap().network;
    let domain = AxisBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
    let mut gaps = Vec::new();
    let mut outside = 0;
    for n in [2, 4, 8, 16] {
        let pair = bound_network(&product, &domain, n).unwrap();
        let mut g = 0.0f64;
        for _ in 0..2000 {
            let x = random_point(&mut rng, &domain.lower, &domain.upper);
            let (u, l) = pair.eval(&x);
            let p = x[0] * x[1];
            if !(l[0] <= p + 1e-9 && p <= u[0] + 1e-9) {
                outside += 1;
            }
            g = g.max(u[0] - l[0]);
        }
        gaps.push(g);
    }
    let shrinking = gaps.windows(2).all(|w| w[1] < 0.5 * w[0]);
    verdict(
        worst <= 1e-12 && outside == 0 && shrinking,
        format!("max/abs error {worst:.1e}; product containment misses {outside}; gaps {gaps:.4?}"),
    )
}

fn main() {
    let criteria: [(&str, f64, fn() -> Verdict); 9] = [
        ("exactness vs analytics", 1.0, exactness_vs_analytics),
        ("exact cdf vs Monte Carlo", 120.0, exact_vs_monte_carlo),
        ("integration oracle", 60.0, integration_oracle),
        ("region enumeration soundness", 120.0, region_soundness),
        ("activation bound lemma suite", 60.0, lemma_suite),
        ("sandwich and refinement", 120.0, sandwich_and_refinement),
        ("guaranteed containment", 600.0, guaranteed_containment),
        ("gap convergence", 900.0, gap_convergence),
        ("gadget exactness", 60.0, gadget_exactness),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = run();
        let secs = t.elapsed().as_secs_f64();
        let ok = v.passed && secs < *limit;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {}: {} | {name} | {} | {secs:.2}s (limit {limit}s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {}/9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
