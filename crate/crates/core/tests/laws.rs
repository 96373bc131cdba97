use eqlab::convdim::{coarse_convolve, coarse_dimension, discretize, LatticeMeasure};
use eqlab::equidist::empirical_distance;
use eqlab::exact::{apply_t, in_a_k, make_point, orbit_point};
use eqlab::orbits::EmpiricalMeasure2D;
use eqlab::{MeasureExpr, ProbVector, UnitRational};
use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;

fn ratio(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn point() -> impl Strategy<Value = UnitRational> {
    (2u32..=10).prop_flat_map(|b| prop::collection::vec(0..b, 1..30).prop_map(move |d| make_point(&d, b).unwrap()))
}

fn rational_point() -> impl Strategy<Value = UnitRational> {
    (1u64..5000).prop_flat_map(|d| (0..d).prop_map(move |n| UnitRational::new(n, d).unwrap()))
}

fn probs(len: usize) -> impl Strategy<Value = ProbVector> {
    prop::collection::vec(0u64..10, len).prop_filter_map("all zero", |w| {
        let total: u64 = w.iter().sum();
        (total > 0).then(|| ProbVector::new(w.iter().map(|&x| ratio(x, total)).collect()).unwrap())
    })
}

fn digit_measure() -> impl Strategy<Value = MeasureExpr> {
    (2u32..=4).prop_flat_map(|b| probs(b as usize).prop_map(move |p| MeasureExpr::digit(b, p).unwrap()))
}

fn atomic_measure() -> impl Strategy<Value = MeasureExpr> {
    (1usize..=4).prop_flat_map(|n| {
        (probs(n), prop::collection::vec(rational_point(), n))
            .prop_map(|(p, xs)| MeasureExpr::atomic(xs.into_iter().zip(p.entries().iter().cloned()).collect()).unwrap())
    })
}

fn measure() -> impl Strategy<Value = MeasureExpr> {
    prop_oneof![digit_measure(), atomic_measure()]
}

fn lattice(base: u32, level: u32) -> impl Strategy<Value = LatticeMeasure> {
    probs(base.pow(level) as usize).prop_map(move |p| LatticeMeasure::new(base, level, p.entries()).unwrap())
}

/// `Σ w e^{2πikx}` straight from the atoms.
fn atomic_oracle(atoms: &[(f64, f64)], k: i64) -> Complex64 {
    atoms.iter().map(|&(x, w)| w * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * x)).sum()
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orbit_point_is_a_semigroup(x in point(), m in 2u32..=10, a in 0u64..40, b in 0u64..40) {
        prop_assert_eq!(orbit_point(&x, m, a + b), orbit_point(&orbit_point(&x, m, a), m, b));
    }

    #[test]
    fn orbit_point_matches_iteration(x in rational_point(), m in 2u32..=10, i in 0u64..50) {
        let mut y = x.clone();
        for _ in 0..i {
            y = apply_t(&y, m);
        }
        prop_assert_eq!(orbit_point(&x, m, i), y);
    }

    #[test]
    fn cells_are_nested_and_contain_the_point(x in rational_point(), base in 2u32..=7, level in 0u32..12) {
        let cell = x.cell(base, level);
        prop_assert!(cell.contains(&x));
        prop_assert!(cell.left() <= x.to_ratio() && x.to_ratio() < cell.right());
        let finer = x.cell(base, level + 1);
        prop_assert!(cell.left() <= finer.left() && finer.right() <= cell.right());
    }

    #[test]
    fn a_k_matches_brute_force(x in rational_point(), k in 1u32..5) {
        let (m, n) = (3u32, 2u32);
        let (mk, nk) = (BigUint::from(m).pow(k), BigUint::from(n).pow(k));
        let z = x.cell(m, k).index;
        let inside = (0u32..=2u32.pow(k)).any(|s| {
            let s = BigUint::from(s);
            &z * &nk < &s * &mk && &s * &mk < (&z + 1u32) * &nk
        });
        prop_assert_eq!(in_a_k(&x, m, n, k), inside);
    }

    #[test]
    fn fourier_is_hermitian_and_bounded(mu in measure(), k in -40i64..40) {
        let a = mu.fourier_1d(k, 1e-12).unwrap();
        let b = mu.fourier_1d(-k, 1e-12).unwrap();
        prop_assert!(close(a, b.conj(), 1e-12));
        prop_assert!(a.norm() <= 1.0 + 1e-12);
        prop_assert!(close(mu.fourier_1d(0, 1e-12).unwrap(), Complex64::new(1.0, 0.0), 1e-12));
    }

    #[test]
    fn convolution_of_atoms_matches_oracle(
        a in prop::collection::vec((rational_point(), 1u64..10), 1..4),
        b in prop::collection::vec((rational_point(), 1u64..10), 1..4),
        k in -32i64..32,
    ) {
        let build = |atoms: &[(UnitRational, u64)]| {
            let total: u64 = atoms.iter().map(|a| a.1).sum();
            let expr = MeasureExpr::atomic(atoms.iter().map(|(x, w)| (x.clone(), ratio(*w, total))).collect()).unwrap();
            let plain: Vec<(f64, f64)> = atoms.iter().map(|(x, w)| (x.to_f64(), *w as f64 / total as f64)).collect();
            (expr, plain)
        };
        let (mu, mu_atoms) = build(&a);
        let (nu, nu_atoms) = build(&b);
        let conv = MeasureExpr::convolve(mu, nu).unwrap();
        let expect = atomic_oracle(&mu_atoms, k) * atomic_oracle(&nu_atoms, k);
        prop_assert!(close(conv.fourier_1d(k, 1e-12).unwrap(), expect, 1e-9));
    }

    #[test]
    fn product_coefficients_factor(mu in measure(), nu in measure(), k in -8i64..8, j in -8i64..8) {
        let prod = MeasureExpr::product(mu.clone(), nu.clone()).unwrap();
        let expect = mu.fourier_1d(k, 1e-12).unwrap() * nu.fourier_1d(j, 1e-12).unwrap();
        prop_assert!(close(prod.fourier_2d(k, j, 1e-12).unwrap(), expect, 2e-12));
    }

    #[test]
    fn cdf_is_monotone_and_matches_cell_masses(mu in measure(), x in rational_point(), y in rational_point(), level in 1u32..6) {
        let (lo, hi) = if x.to_ratio() <= y.to_ratio() { (x, y) } else { (y, x) };
        prop_assert!(mu.cdf(&lo).unwrap() <= mu.cdf(&hi).unwrap());
        let base = mu.sample_base();
        let total: BigRational = (0..base.pow(level))
            .map(|i| mu.cell_mass(&eqlab::PartitionCell::new(base, level, i).unwrap()).unwrap())
            .sum();
        prop_assert_eq!(total, ratio(1, 1));
    }

    #[test]
    fn merge_equals_single_pass(
        points in prop::collection::vec((rational_point(), rational_point()), 1..40),
        split in 0usize..40,
    ) {
        let split = split.min(points.len());
        let mut whole = EmpiricalMeasure2D::new(3, 8);
        let mut left = EmpiricalMeasure2D::new(3, 8);
        let mut right = EmpiricalMeasure2D::new(3, 8);
        for (i, (u, v)) in points.iter().enumerate() {
            whole.push(u, v);
            if i < split { left.push(u, v) } else { right.push(u, v) }
        }
        let mut lr = left.clone();
        lr.merge(&right).unwrap();
        let mut rl = right.clone();
        rl.merge(&left).unwrap();
        prop_assert_eq!(lr.count(), whole.count());
        for row in 0..8 {
            for col in 0..8 {
                prop_assert_eq!(lr.grid_count(row, col), whole.grid_count(row, col));
                prop_assert_eq!(rl.grid_count(row, col), whole.grid_count(row, col));
            }
        }
        prop_assert!(empirical_distance(&lr, &whole, 3).unwrap() < 1e-9);
        prop_assert!(empirical_distance(&rl, &whole, 3).unwrap() < 1e-9);
    }

    #[test]
    fn empirical_distance_is_a_pseudometric(
        a in prop::collection::vec((rational_point(), rational_point()), 1..20),
        b in prop::collection::vec((rational_point(), rational_point()), 1..20),
        c in prop::collection::vec((rational_point(), rational_point()), 1..20),
    ) {
        let build = |pts: &[(UnitRational, UnitRational)]| {
            let mut e = EmpiricalMeasure2D::new(2, 4);
            for (u, v) in pts {
                e.push(u, v);
            }
            e
        };
        let (a, b, c) = (build(&a), build(&b), build(&c));
        let d = |x: &EmpiricalMeasure2D, y: &EmpiricalMeasure2D| empirical_distance(x, y, 2).unwrap();
        prop_assert!(d(&a, &a) < 1e-12);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-12);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
    }

    #[test]
    fn coarse_convolution_is_commutative_and_associative(
        a in lattice(2, 3), b in lattice(2, 3), c in lattice(2, 3),
    ) {
        prop_assert_eq!(coarse_convolve(&a, &b).unwrap(), coarse_convolve(&b, &a).unwrap());
        let left = coarse_convolve(&coarse_convolve(&a, &b).unwrap(), &c).unwrap();
        let right = coarse_convolve(&a, &coarse_convolve(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn convolution_never_lowers_coarse_dimension(a in lattice(3, 2), b in lattice(3, 2)) {
        let ab = coarse_convolve(&a, &b).unwrap();
        prop_assert!(coarse_dimension(&ab) + 1e-12 >= coarse_dimension(&a).max(coarse_dimension(&b)));
        let total: BigRational = ab.masses().into_iter().sum();
        prop_assert_eq!(total, ratio(1, 1));
    }

    #[test]
    fn point_mass_is_the_identity(a in lattice(2, 4)) {
        let delta = LatticeMeasure::point(2, 4, 0).unwrap();
        prop_assert_eq!(coarse_convolve(&a, &delta).unwrap(), a);
    }

    #[test]
    fn discretized_digit_masses_sum_to_one(mu in digit_measure(), level in 1u32..5) {
        let lat = discretize(&mu, level).unwrap();
        let total: BigRational = lat.masses().into_iter().sum();
        prop_assert_eq!(total, ratio(1, 1));
    }
}
