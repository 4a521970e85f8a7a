mod support;

use interlace::interlacement::{poisson_count, sample_level_process, LevelProcess};
use interlace::russo::replica_rng;
use interlace::stats::mean_stderr;
use proptest::prelude::*;
use rayon::prelude::*;
use support::{box_sampler, Fixture};

fn pmf(theta: f64, k: u64) -> f64 {
    (-theta + k as f64 * theta.ln() - (1..=k).map(|j| (j as f64).ln()).sum::<f64>()).exp()
}

#[test]
fn counts_are_poisson() {
    let sampler = box_sampler(&[2, 2, 2]);
    let cap = sampler.equilibrium().cap();
    let theta = 2.0;
    let n = 20_000;
    let counts: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| sample_level_process(&sampler, theta / cap, &mut replica_rng(21, 0, i)).unwrap().points().len())
        .collect();
    let bins = 8;
    let mut observed = vec![0.0; bins];
    for c in counts {
        observed[c.min(bins - 1)] += 1.0;
    }
    let mut expected: Vec<f64> = (0..bins as u64 - 1).map(|k| n as f64 * pmf(theta, k)).collect();
    expected.push(n as f64 - expected.iter().sum::<f64>());
    let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    // 99th percentile of chi-square with 7 degrees of freedom
    assert!(chi2 < 18.475, "chi2 = {chi2}");
}

#[test]
fn increments_are_independent_poisson() {
    let sampler = box_sampler(&[2, 2, 2]);
    let cap = sampler.equilibrium().cap();
    let (u, h) = (1.0 / cap, 0.5 / cap);
    let n = 20_000;
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let lp = sample_level_process(&sampler, u + h, &mut replica_rng(22, 0, i)).unwrap();
            let low = lp.count_up_to(u);
            (low as f64, (lp.points().len() - low) as f64)
        })
        .collect();
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (ma, sa) = mean_stderr(&a);
    let (mb, sb) = mean_stderr(&b);
    assert!((ma - 1.0).abs() <= 4.0 * sa);
    assert!((mb - 0.5).abs() <= 4.0 * sb);
    let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
    let corr = cov / (ma * mb).sqrt();
    assert!(corr.abs() <= 4.0 / (n as f64).sqrt(), "correlation {corr}");
}

#[test]
fn empty_with_probability_exp_minus_theta() {
    let sampler = box_sampler(&[2, 2, 2]);
    let cap = sampler.equilibrium().cap();
    let n = 40_000;
    let empty = (0..n)
        .into_par_iter()
        .filter(|&i| {
            let lp = sample_level_process(&sampler, 1.0 / cap, &mut replica_rng(23, 0, i)).unwrap();
            lp.restrict(sampler.set(), 1.0 / cap).unwrap().interlacement_set().is_empty()
        })
        .count();
    let p = (-1.0f64).exp();
    let f = empty as f64 / n as f64;
    assert!((f - p).abs() <= 4.0 * (p * (1.0 - p) / n as f64).sqrt());
}

#[test]
fn zero_level_is_empty() {
    let sampler = box_sampler(&[2, 2, 2]);
    let lp = sample_level_process(&sampler, 0.0, &mut replica_rng(0, 0, 0)).unwrap();
    assert!(lp.points().is_empty());
    assert_eq!(poisson_count(0.0, &mut replica_rng(0, 0, 0)), 0);
    assert!(sample_level_process(&sampler, -1.0, &mut replica_rng(0, 0, 0)).is_err());
    assert!(lp.restrict(sampler.set(), 0.5).is_err());
}

#[test]
fn fixture_round_trip() {
    let fx = Fixture::load("four_traces.json");
    let set = fx.set();
    let lp = fx.process(&set);
    let again = LevelProcess::from_records(&set, fx.u_max, &lp.to_records(&set)).unwrap();
    assert_eq!(again.points(), lp.points());
    let c = lp.restrict(&set, 0.5).unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(c.interlacement_set().len(), 5);
    assert_eq!(c.vacant_set().len(), set.len() - 5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nested_restriction(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let sampler = box_sampler(&[2, 2, 2]);
        let u_max = 3.0 / sampler.equilibrium().cap();
        let (u1, u2) = if a <= b { (a * u_max, b * u_max) } else { (b * u_max, a * u_max) };
        let lp = sample_level_process(&sampler, u_max, &mut replica_rng(seed, 0, 0)).unwrap();
        let set = sampler.set();
        let outer = lp.restrict(set, u2).unwrap();
        let twice = outer.restrict(u1);
        let once = lp.restrict(set, u1).unwrap();
        prop_assert_eq!(twice.len(), once.len());
        prop_assert!(twice.points().iter().zip(once.points()).all(|(x, y)| std::ptr::eq(*x, *y)));
        prop_assert!(once.points().iter().all(|p| p.level <= u1));
        let small = once.interlacement_mask();
        let big = outer.interlacement_mask();
        prop_assert!(small.iter().zip(big.iter()).all(|(s, b)| !*s || *b));
    }
}
