mod support;

use interlace::lattice::{LatticeSet, Site};
use interlace::russo::replica_rng;
use interlace::walk::{ExcursionMode, TraceSampler};
use proptest::prelude::*;
use rayon::prelude::*;
use support::{box_sampler, sampler_for, watson};

fn start_frequencies(sampler: &TraceSampler, n: u64) -> Vec<f64> {
    let mut counts = vec![0u64; sampler.set().len()];
    let mut rng = replica_rng(3, 0, 0);
    for _ in 0..n {
        counts[sampler.sample_start(&mut rng) as usize] += 1;
    }
    counts.into_iter().map(|c| c as f64 / n as f64).collect()
}

fn assert_matches_ebar(sampler: &TraceSampler) {
    let n = 100_000;
    let freq = start_frequencies(sampler, n);
    for (f, &p) in freq.iter().zip(sampler.equilibrium().ebar()) {
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() <= 4.0 * se + 1e-12, "{f} vs {p}");
    }
}

#[test]
fn starts_follow_normalized_equilibrium_measure() {
    assert_matches_ebar(&box_sampler(&[2, 2, 2]));
    let bar = box_sampler(&[1, 1, 3]);
    let ebar = bar.equilibrium().ebar();
    assert!(ebar[0] > ebar[1], "ends of the bar carry more mass");
    assert_matches_ebar(&bar);
}

#[test]
fn singleton_returns_are_geometric() {
    // each visit is followed by a return with probability 1 - 1/g(0)
    let sampler = sampler_for(&LatticeSet::from_sites([Site::origin(3)]).unwrap(), ExcursionMode::default());
    let n = 100_000;
    let counts: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| sampler.sample(&mut replica_rng(4, 0, i)).excursions())
        .collect();
    let q = 1.0 - 1.0 / watson::green([0, 0, 0]);
    for k in 0..4 {
        let p = (1.0 - q) * q.powi(k as i32);
        let f = counts.iter().filter(|&&c| c == k).count() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() <= 4.0 * se, "k = {k}: {f} vs {p}");
    }
}

#[test]
fn both_excursion_modes_agree_on_visited_set_sizes() {
    let set = LatticeSet::cube(&[2, 2, 2]).unwrap();
    let entrance = sampler_for(&set, ExcursionMode::Entrance);
    let walk = sampler_for(&set, ExcursionMode::conditioned_walk());
    let n = 50_000;
    let hist = |s: &TraceSampler, stream: u64| {
        let sizes: Vec<usize> = (0..n).into_par_iter().map(|i| s.sample(&mut replica_rng(6, stream, i)).visited().len()).collect();
        let mut h = vec![0.0; 9];
        for k in sizes {
            h[k] += 1.0 / n as f64;
        }
        h
    };
    let (a, b) = (hist(&entrance, 0), hist(&walk, 1));
    let tv: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.015, "TV {tv}: {a:?} vs {b:?}");
    assert_eq!(walk.discards(), 0);
}

#[test]
fn exhausted_budget_is_reported() {
    let set = LatticeSet::cube(&[2, 2, 2]).unwrap();
    let s = sampler_for(&set, ExcursionMode::ConditionedWalk { budget: 1, shortcut_radius: None });
    let mut rng = replica_rng(8, 0, 0);
    let failures = (0..200).filter(|_| s.sample_trace(0, &mut rng).is_err()).count();
    assert!(failures > 0);
}

#[test]
fn exit_sites_escape_probabilities_are_consistent() {
    let sampler = box_sampler(&[2, 2, 1]);
    let pot = sampler.potential().clone();
    for (z, escape) in sampler.exit_sites() {
        let h = sampler.equilibrium().hit_probability(z, &pot);
        assert!((escape - (1.0 - h)).abs() < 1e-12);
        assert!(escape > 0.0 && escape < 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn traces_respect_the_record_contract(seed in any::<u64>(), conditioned in any::<bool>()) {
        let set = LatticeSet::cube(&[3, 2, 2]).unwrap();
        let mode = if conditioned { ExcursionMode::conditioned_walk() } else { ExcursionMode::Entrance };
        let sampler = sampler_for(&set, mode);
        let mut rng = replica_rng(seed, 0, 0);
        for _ in 0..20 {
            let t = sampler.sample(&mut rng);
            prop_assert!(set.is_boundary(t.start()));
            let back = t.to_record(&set).into_trace(&set).unwrap();
            prop_assert_eq!(&back, &t);
            let json = serde_json::to_string(&t.to_record(&set)).unwrap();
            let parsed: interlace::walk::TraceRecord = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(parsed.into_trace(&set).unwrap(), t);
        }
    }
}
