use lkqtm_core::cycle::OperatingMode;
use lkqtm_core::lattice::{THETA_KAGOME, THETA_LIEB};
use lkqtm_core::sweep::{temp_map, SweepGrid};
use lkqtm_core::thermo::StatisticsMode;

fn map(theta1: f64, theta2: f64) -> SweepGrid {
    temp_map(theta1, theta2, (0.01, 0.5), 21, 8.0, StatisticsMode::Fermi, 60).unwrap()
}

fn valid_modes(g: &SweepGrid) -> Vec<OperatingMode> {
    g.cells
        .iter()
        .filter(|c| c.coord1 > c.coord2)
        .map(|c| c.result.mode)
        .collect()
}

#[test]
fn kagome_first_is_an_engine_and_reversed_is_not() {
    let forward = valid_modes(&map(THETA_KAGOME, THETA_LIEB));
    assert!(forward.iter().all(|m| *m == OperatingMode::Engine));
    let reversed = valid_modes(&map(THETA_LIEB, THETA_KAGOME));
    let fridges = reversed.iter().filter(|m| **m == OperatingMode::Refrigerator).count();
    assert!(!reversed.contains(&OperatingMode::Engine));
    assert!(2 * fridges > reversed.len(), "{fridges} of {}", reversed.len());
}

#[test]
fn performance_is_highest_next_to_equal_temperatures() {
    let g = map(THETA_KAGOME, THETA_LIEB);
    let mean = |pick: &dyn Fn(f64) -> bool| {
        let v: Vec<f64> = g
            .cells
            .iter()
            .filter(|c| c.coord1 > c.coord2 && pick(c.coord1 - c.coord2))
            .filter_map(|c| c.result.performance)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let near = mean(&|d| d < 0.03);
    let far = mean(&|d| d > 0.3);
    assert!(near > far + 0.1, "near {near}, far {far}");
}
