mod support;

use interlace::green::{green_matrix, PotentialTable};
use interlace::lattice::{srw_step, LatticeSet, Site};
use interlace::russo::replica_rng;
use proptest::prelude::*;
use rayon::prelude::*;
use support::watson;

#[test]
fn agrees_with_fourier_oracle() {
    let pot = PotentialTable::exact(3).unwrap();
    for v in [[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1], [2, 0, 0], [3, 1, 2], [7, 0, 5], [10, 9, 4]] {
        let (g, w) = (pot.green(&v), watson::green(v));
        assert!((g - w).abs() < 1e-10, "{v:?}: {g} vs {w}");
    }
}

#[test]
fn origin_value_in_four_dimensions() {
    let pot = PotentialTable::exact(4).unwrap();
    assert!((pot.green(&[0, 0, 0, 0]) - 1.239_467_121_8).abs() < 1e-8);
}

#[test]
fn decreases_along_the_axis() {
    let pot = PotentialTable::new(3).unwrap();
    let values: Vec<f64> = (0..40).map(|r| pot.green(&[r, 0, 0])).collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]));
    // r g(r e1) tends to 3 / (2 pi)
    let r = 3000.0;
    let scaled = r * pot.green(&[3000, 0, 0]);
    assert!((scaled - 1.5 / std::f64::consts::PI).abs() < 1e-6, "{scaled}");
}

#[test]
fn far_field_agrees_with_quadrature_past_the_switch() {
    assert!(PotentialTable::with_far_field(3, 1e-9, Some(64.0)).is_err());
    let near = PotentialTable::with_far_field(3, 1e-7, Some(64.0)).unwrap();
    let exact = PotentialTable::exact(3).unwrap();
    let ff = near.far_field().unwrap();
    assert_eq!(ff.radius, 64.0);
    for v in [[0, 0, 64], [40, 40, 40], [80, 3, 0]] {
        let (a, b) = (near.green(&v), exact.green(&v));
        assert!((a - b).abs() < 1e-6, "{v:?}: {a} vs {b}");
    }
}

#[test]
fn visit_counts_match() {
    // expected visits to y from the origin before leaving |x|_inf <= r;
    // visits after leaving add at most g at distance r - 1 <= 1 / (r - 1)
    let pot = PotentialTable::new(3).unwrap();
    let y = Site::new([1, 1, 0]);
    let r = 25;
    let n = 40_000;
    let counts: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(5, 0, i);
            let mut x = Site::origin(3);
            let mut visits = 0u32;
            while x.norm_inf() <= r {
                visits += (x == y) as u32;
                x = srw_step(&x, &mut rng);
            }
            visits as f64
        })
        .collect();
    let (mean, se) = interlace::stats::mean_stderr(&counts);
    let g = pot.green(y.coords());
    let truncation = 1.0 / (r - 1) as f64;
    assert!(mean <= g + 4.0 * se);
    assert!(g - mean <= 4.0 * se + truncation, "mean {mean} ± {se}, g {g}");
}

#[test]
fn cache_file_round_trip() {
    let pot = PotentialTable::new(3).unwrap();
    pot.precompute(4);
    let path = std::env::temp_dir().join(format!("green-table-{}.json", std::process::id()));
    pot.save(&path).unwrap();
    let back = PotentialTable::load(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(back.cached_len(), pot.cached_len());
    assert_eq!(back.green(&[3, 2, 1]), pot.green(&[3, 2, 1]));
    assert_eq!(back.far_field(), pot.far_field());
}

#[test]
fn corrupt_cache_is_rejected() {
    let path = std::env::temp_dir().join(format!("green-bad-{}.json", std::process::id()));
    std::fs::write(&path, "{\"format\": \"something else\"}").unwrap();
    assert!(PotentialTable::load(&path).is_err());
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn matrix_is_symmetric_with_constant_diagonal() {
    let pot = PotentialTable::new(3).unwrap();
    let set = LatticeSet::cube(&[3, 2, 2]).unwrap();
    let m = green_matrix(&set, &pot).unwrap();
    for i in 0..set.len() {
        assert_eq!(m[(i, i)], pot.green(&[0, 0, 0]));
        for j in 0..set.len() {
            assert_eq!(m[(i, j)], m[(j, i)]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lattice_symmetries(x in -20i64..=20, y in -20i64..=20, z in -20i64..=20) {
        let pot = PotentialTable::new(3).unwrap();
        let g = pot.green(&[x, y, z]);
        prop_assert_eq!(g, pot.green(&[-x, y, z]));
        prop_assert_eq!(g, pot.green(&[z, x, -y]));
        prop_assert_eq!(g, pot.green(&[y, -z, x]));
        prop_assert!(g > 0.0);
    }

    #[test]
    fn harmonic_off_the_origin(x in -12i64..=12, y in -12i64..=12, z in 1i64..=12) {
        let pot = PotentialTable::new(3).unwrap();
        let v = [x, y, z];
        let mut avg = 0.0;
        for axis in 0..3 {
            for s in [-1, 1] {
                let mut w = v;
                w[axis] += s;
                avg += pot.green(&w) / 6.0;
            }
        }
        prop_assert!((pot.green(&v) - avg).abs() <= 10.0 * pot.epsilon());
    }
}
