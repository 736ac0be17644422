//! Property tests for the invariants that hold on every valid input, not
//! just the hand-picked examples.

use proptest::prelude::*;

use relaxlab::dyadic::{besov_norm, DyadicPartition, Lp};
use relaxlab::field::{RandomFieldSpec, ScalarField, VectorField};
use relaxlab::grid::PeriodicGrid;
use relaxlab::symmetry::{from_entropy_vars, to_entropy_vars, PressureLaw};
use relaxlab::bony;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Partition of unity survives arbitrary grid sizes and periods.
    #[test]
    fn partition_of_unity_on_random_grids(
        m in prop::sample::select(vec![32usize, 64]),
        period in 4.0..12.0f64,
    ) {
        let grid = PeriodicGrid::new(1, m, period).unwrap();
        let part = DyadicPartition::build(grid.clone()).unwrap();
        for idx in 0..grid.len() {
            if !grid.dealias_mask()[idx] {
                continue;
            }
            let kappa = grid.kappa_abs()[idx];
            let hom: f64 = (part.q_min()..=part.q_max())
                .map(|q| part.phi_multiplier(q).unwrap()[idx])
                .sum();
            let inhom: f64 = part.psi_multiplier()[idx]
                + (0..=part.q_max())
                    .filter_map(|q| part.phi_multiplier(q))
                    .map(|mu| mu[idx])
                    .sum::<f64>();
            if kappa > 0.0 {
                prop_assert!((hom - 1.0).abs() < 1e-12);
            }
            prop_assert!((inhom - 1.0).abs() < 1e-12);
        }
    }

    /// The Besov value is nonincreasing in the summation exponent r.
    #[test]
    fn besov_value_monotone_in_r(seed in 0u64..1000) {
        let grid = PeriodicGrid::new(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let part = DyadicPartition::build(grid.clone()).unwrap();
        let f = RandomFieldSpec {
            seed,
            k_min: 1.0,
            k_max: 20.0,
            decay: 0.8,
            amplitude: 1.0,
        }
        .realize(&grid)
        .unwrap();
        let mut last = f64::INFINITY;
        for r in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            let v = besov_norm(&part, &f, 1.2, Lp::Two, r, false).unwrap().value;
            prop_assert!(v <= last * (1.0 + 1e-12), "r={r}: {v} > {last}");
            last = v;
        }
    }

    /// Entropy-variable round trip across the admissible state space.
    #[test]
    fn entropy_round_trip(
        gamma in prop::sample::select(vec![1.0f64, 1.4, 2.0, 2.5]),
        rho in 0.2..5.0f64,
        v in -1.0..1.0f64,
    ) {
        let grid = PeriodicGrid::new(1, 16, 2.0 * std::f64::consts::PI).unwrap();
        let law = PressureLaw::new(gamma).unwrap();
        let rho_f = ScalarField::constant(grid.clone(), rho);
        let m_f = VectorField::new(vec![ScalarField::constant(grid, rho * v)]);
        let st = to_entropy_vars(&rho_f, &m_f, law, 1.0).unwrap();
        let (rho2, m2) = from_entropy_vars(&st).unwrap();
        prop_assert!((rho2.values()[0] - rho).abs() / rho < 1e-10);
        prop_assert!((m2.comp(0).values()[0] - rho * v).abs() < 1e-10 * (1.0 + rho));
    }

    /// The Bony identity is exact for any band-limited pair.
    #[test]
    fn bony_identity_random_seeds(seed in 0u64..500) {
        let grid = PeriodicGrid::new(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let part = DyadicPartition::build(grid.clone()).unwrap();
        let mk = |s: u64| {
            RandomFieldSpec {
                seed: s,
                k_min: 0.0,
                k_max: 20.0,
                decay: 1.0,
                amplitude: 1.0,
            }
            .realize(&grid)
            .unwrap()
        };
        let f = mk(seed);
        let g = mk(seed + 7919);
        let split = bony::bony_split(&part, &f, &g);
        prop_assert!(split.residual < 1e-10, "residual {}", split.residual);
    }
}
