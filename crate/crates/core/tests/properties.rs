//! Invariants checked over randomly drawn inputs.

use std::sync::Arc;

use dualcharge::geometry::{point1, Configuration, Dimension, Point};
use dualcharge::kernels::{cost, cost_gradient, truncated_cost};
use dualcharge::model::{Atom, BasisElement, BasisSet, Density, DualCharge, Potential, Shifted, Support};
use dualcharge::optimizer::{free_energy_estimate, project_delta_b};
use dualcharge::oracles::{breakpoints, exact_1d_energy, TwoElectronPotential};
use dualcharge::sampler::{density_histogram, langevin_step, ParticleSystem, SamplerConfig};
use dualcharge::zero_temp::{e_n_omega, f_sce, MultistartConfig};
use proptest::prelude::*;

mod common;
use common::{brute_force_projection, fd_gradient};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

fn point3() -> impl Strategy<Value = Point> {
    prop::array::uniform3(-2.0f64..2.0)
}

/// Configurations whose particles are pairwise at least `0.05` apart.
fn separated(dim: Dimension, n: usize) -> impl Strategy<Value = Configuration> {
    let coords = dim.coords();
    prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), n)
        .prop_map(move |mut ps| {
            for p in &mut ps {
                for x in p.iter_mut().skip(coords) {
                    *x = 0.0;
                }
            }
            ps
        })
        .prop_filter("particles too close", |ps| {
            ps.iter()
                .enumerate()
                .all(|(i, a)| ps[..i].iter().all(|b| dualcharge::geometry::dist(*a, *b) > 0.05))
        })
        .prop_map(move |ps| Configuration::new(dim, ps).unwrap())
}

fn dims() -> impl Strategy<Value = Dimension> {
    prop_oneof![Just(Dimension::One), Just(Dimension::Three)]
}

fn assert_gradient_matches<P: Potential + ?Sized>(p: &P, r: Point) -> Result<(), TestCaseError> {
    let g = p.gradient(r);
    let fd = fd_gradient(p, r, 1e-6);
    for k in 0..3 {
        prop_assert!(
            (g[k] - fd[k]).abs() <= 1e-5 * (1.0 + fd[k].abs()),
            "component {k}: analytic {} vs finite difference {} at {r:?}",
            g[k],
            fd[k]
        );
    }
    Ok(())
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn cost_is_translation_invariant(
        (dim, config) in dims().prop_flat_map(|d| (Just(d), (2usize..6).prop_flat_map(move |n| separated(d, n)))),
        shift in point3(),
    ) {
        let mut shift = shift;
        for x in shift.iter_mut().skip(dim.coords()) {
            *x = 0.0;
        }
        let a = cost(&config).unwrap();
        let b = cost(&config.translated(shift)).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn cost_is_permutation_invariant(config in separated(Dimension::Three, 5), perm in Just(()).prop_perturb(|_, mut rng| {
        let mut idx: Vec<usize> = (0..5).collect();
        for i in (1..5).rev() {
            let j = (rng.next_u32() as usize) % (i + 1);
            idx.swap(i, j);
        }
        idx
    })) {
        let shuffled = Configuration::new(
            Dimension::Three,
            perm.iter().map(|&i| config.positions[i]).collect(),
        ).unwrap();
        let (a, b) = (cost(&config).unwrap(), cost(&shuffled).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        prop_assert!((truncated_cost(&config, 0.01) - truncated_cost(&shuffled, 0.01)).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn cost_gradient_matches_finite_differences(
        (dim, config) in dims().prop_flat_map(|d| (Just(d), separated(d, 4))),
    ) {
        let g = cost_gradient(&config).unwrap();
        let h = 1e-6;
        for i in 0..config.len() {
            for k in 0..dim.coords() {
                let (mut a, mut b) = (config.clone(), config.clone());
                a.positions[i][k] += h;
                b.positions[i][k] -= h;
                let fd = (cost(&a).unwrap() - cost(&b).unwrap()) / (2.0 * h);
                prop_assert!((g[i][k] - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "{} vs {}", g[i][k], fd);
            }
        }
    }

    #[test]
    fn one_dimensional_potentials_have_consistent_gradients(
        x in -3.0f64..3.0,
        a in -2.0f64..0.0,
        len in 0.1f64..2.0,
        density in -2.0f64..2.0,
        weights in prop::collection::vec(-2.0f64..2.0, 8),
    ) {
        let r = point1(x);
        let atoms = [
            Atom::Segment { a, b: a + len, density },
            Atom::Point { x: a, charge: density },
        ];
        // the point charge has a kink at its location
        prop_assume!((x - a).abs() > 1e-4);
        assert_gradient_matches(atoms.as_slice(), r)?;
        let charge = DualCharge::new(Arc::new(BasisSet::segments(-2.0, 2.0, 8).unwrap()), weights).unwrap();
        assert_gradient_matches(&charge, r)?;
        let comb = breakpoints(&Density::uniform_interval(4, -2.0, 2.0).unwrap()).unwrap();
        prop_assume!(comb.breakpoints.iter().all(|b| (x - b).abs() > 1e-4));
        assert_gradient_matches(&comb, r)?;
    }

    #[test]
    fn three_dimensional_potentials_have_consistent_gradients(
        r in prop::array::uniform3(-1.2f64..1.2),
        inner in 0.0f64..0.8,
        width in 0.05f64..0.5,
        weights in prop::collection::vec(-1.0f64..2.0, 6),
    ) {
        prop_assume!(dualcharge::geometry::norm(r) > 1e-3);
        let ball = [Atom::Ball { radius: inner + width, charge: 1.5 }];
        assert_gradient_matches(ball.as_slice(), r)?;
        let shell = BasisElement::Shell { inner, outer: inner + width };
        assert_gradient_matches(&DualCharge::new(Arc::new(BasisSet::new(vec![shell]).unwrap()), vec![1.0]).unwrap(), r)?;
        let charge = DualCharge::new(Arc::new(BasisSet::shells(1.0, 6).unwrap()), weights).unwrap();
        assert_gradient_matches(&charge, r)?;
    }

    #[test]
    fn delta_b_projection_is_the_nearest_feasible_point(
        y in prop::collection::vec(-2.0f64..3.0, 1..=5),
        masses in prop::collection::vec(0.05f64..1.0, 5),
        cap in 0.1f64..3.0,
    ) {
        let m = &masses[..y.len()];
        let p = project_delta_b(&y, m, cap);
        let mass: f64 = p.iter().zip(m).map(|(x, m)| x * m).sum();
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!(mass <= cap * (1.0 + 1e-12) + 1e-12);
        let best = brute_force_projection(&y, m, cap);
        let d = |x: &[f64]| x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        prop_assert!((d(&p) - d(&best)).abs() <= 1e-9 * (1.0 + d(&best)), "{:?} vs {:?}", p, best);
        for (a, b) in p.iter().zip(&best) {
            prop_assert!((a - b).abs() <= 1e-7);
        }
    }

    #[test]
    fn langevin_steps_stay_in_the_support(
        ball in any::<bool>(),
        seed in any::<u64>(),
        eta in 1e-4f64..0.05,
        beta in 0.1f64..100.0,
        weights in prop::collection::vec(-3.0f64..6.0, 4),
    ) {
        let (support, basis) = if ball {
            (Support::Ball { radius: 1.0 }, BasisSet::shells(1.0, 4).unwrap())
        } else {
            (Support::Interval { a: -1.0, b: 1.0 }, BasisSet::segments(-1.0, 1.0, 4).unwrap())
        };
        let charge = DualCharge::new(Arc::new(basis), weights).unwrap();
        let mut cfg = SamplerConfig::for_support(&support, beta);
        cfg.eta = eta;
        let mut state = ParticleSystem::uniform(3, support, seed, 0).unwrap();
        for _ in 0..300 {
            langevin_step(&mut state, &charge, &cfg).unwrap();
            for p in state.positions() {
                prop_assert!(support.contains(*p), "{p:?} left {support:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(cases(12))]

    #[test]
    fn weak_duality_holds_against_the_exact_comb_value(weights in prop::collection::vec(-1.0f64..2.0, 8)) {
        let rho = Density::uniform_interval(4, -2.0, 2.0).unwrap();
        let charge = DualCharge::new(Arc::new(BasisSet::segments(-2.0, 2.0, 8).unwrap()), weights).unwrap();
        let mut cfg = MultistartConfig::for_density(&rho);
        cfg.n_starts = 128;
        let value = f_sce(&charge, &rho, &cfg).unwrap();
        let best = exact_1d_energy(&rho).unwrap();
        prop_assert!(value - best <= 1e-6, "F_SCE[nu] = {value} exceeds the optimum {best}");
    }

    #[test]
    fn free_energy_estimator_is_concave_and_shift_covariant(
        w1 in prop::collection::vec(-1.0f64..2.0, 4),
        w2 in prop::collection::vec(-1.0f64..2.0, 4),
        shift in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let rho = Density::uniform_interval(3, -1.5, 1.5).unwrap();
        let basis = Arc::new(BasisSet::segments(-1.5, 1.5, 4).unwrap());
        let a = DualCharge::new(basis.clone(), w1.clone()).unwrap();
        let b = DualCharge::new(basis.clone(), w2.clone()).unwrap();
        let mid = DualCharge::new(basis, w1.iter().zip(&w2).map(|(x, y)| 0.5 * (x + y)).collect()).unwrap();
        let beta = 2.0;
        let f = |p: &dyn Potential| free_energy_estimate(p, &rho, beta, 4000, seed, 1e-3).unwrap().0;
        let (fa, fb, fm) = (f(&a), f(&b), f(&mid));
        prop_assert!(fm >= 0.5 * (fa + fb) - 1e-9, "midpoint {fm} below chord {}", 0.5 * (fa + fb));
        let shifted = Shifted { inner: &a, shift };
        prop_assert!((f(&shifted) - (fa - 3.0 * shift)).abs() <= 1e-9 * (1.0 + fa.abs()));
    }
}

#[test]
fn histogram_integrates_to_n() {
    for (support, basis) in [
        (Support::Interval { a: -1.0, b: 2.0 }, BasisSet::segments(-1.0, 2.0, 3).unwrap()),
        (Support::Ball { radius: 1.0 }, BasisSet::shells(1.0, 3).unwrap()),
    ] {
        let rho = match support {
            Support::Interval { a, b } => Density::uniform_interval(3, a, b).unwrap(),
            Support::Ball { radius } => Density::uniform_ball(3, radius).unwrap(),
        };
        let charge = DualCharge::new(Arc::new(basis), vec![0.5, 1.0, 0.2]).unwrap();
        let mut cfg = SamplerConfig::for_support(&support, 5.0);
        cfg.n_chains = 2;
        cfg.burn_in = 200;
        cfg.n_steps = 2000;
        let h = density_histogram(&charge, &rho, &cfg, 17).unwrap();
        assert!((h.total_mass(&support) - 3.0).abs() < 1e-10, "{}", h.total_mass(&support));
    }
}

#[test]
fn more_starts_never_raise_the_energy() {
    let rho = Density::uniform_ball(3, 1.0).unwrap();
    let charge = DualCharge::new(Arc::new(BasisSet::shells(1.0, 3).unwrap()), vec![0.3, -0.2, 0.5]).unwrap();
    let mut cfg = MultistartConfig::for_density(&rho);
    let mut last = f64::INFINITY;
    for n in [1, 2, 4, 8, 16, 32] {
        cfg.n_starts = n;
        let e = e_n_omega(&charge, &rho, &cfg).unwrap().value;
        assert!(e <= last, "{n} starts gave {e} > {last}");
        last = e;
    }
}

#[test]
fn two_electron_oracle_gradient_matches_its_values() {
    let v = TwoElectronPotential::new(0.5, 2000).unwrap();
    for s in [0.15, 0.3, 0.5, 0.7, 0.9, 1.3] {
        let r = [s * 0.6, -s * 0.8, 0.0];
        let g = v.gradient(r);
        let fd = fd_gradient(&v, r, 1e-6);
        for k in 0..3 {
            assert!((g[k] - fd[k]).abs() < 1e-5, "s = {s}: {g:?} vs {fd:?}");
        }
    }
}
