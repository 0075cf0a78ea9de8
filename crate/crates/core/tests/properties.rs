use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use ripple_core::plant::{default_probe_step, monotonicity_probe, PlantModel};
use ripple_core::synthetic::{random_grid, random_water_network};
use ripple_core::water::edge_pressure_drop;

fn box_point<R: Rng>(plant: &dyn PlantModel, rng: &mut R) -> Vec<f64> {
    plant
        .u_lower()
        .iter()
        .zip(plant.u_upper())
        .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..hi) } else { lo })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn water_solutions_satisfy_network_equations(seed in any::<u64>(), n in 2usize..9) {
        let mut rng = StdRng::seed_from_u64(seed);
        let net = random_water_network(n, &mut rng);
        let u = box_point(&net, &mut rng);
        let sol = net.solve_network(&u).unwrap();
        for (i, node) in net.nodes().iter().enumerate() {
            if node.control == ripple_core::NodeControl::Injection {
                prop_assert!((sol.injections[i] - u[i]).abs() <= 1e-6);
            }
        }
        for (e, &f) in net.edges().iter().zip(&sol.flows) {
            let gap = sol.pressures[e.from] - sol.pressures[e.to] - edge_pressure_drop(f, &e.law);
            prop_assert!(gap.abs() <= 1e-6);
        }
        prop_assert!(sol.injections.iter().sum::<f64>().abs() <= 1e-6);
    }

    #[test]
    fn water_probe_is_monotone(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let net = random_water_network(6, &mut rng);
        let u = box_point(&net, &mut rng);
        let probe = monotonicity_probe(&net, &u, default_probe_step(&u)).unwrap();
        prop_assert!(probe.monotone, "{}", probe.jacobian);
    }

    #[test]
    fn power_solutions_have_small_residual(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = StdRng::seed_from_u64(seed);
        let grid = random_grid(n, &mut rng);
        let u = box_point(&grid, &mut rng);
        if let Ok(sol) = grid.solve_point(&u) {
            prop_assert!(ripple_core::power::flow_residual(&grid, &sol) <= 1e-8);
            prop_assert!(sol.v_l.iter().all(|&v| v > 0.0));
            if grid.prop1_condition(&sol) > 0.0 {
                let probe = monotonicity_probe(&grid, &u, default_probe_step(&u)).unwrap();
                prop_assert!(probe.monotone, "{}", probe.jacobian);
            }
        }
    }
}
