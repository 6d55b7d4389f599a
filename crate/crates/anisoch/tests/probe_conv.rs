use anisoch::experiments::{initial_condition, Scenario, ScenarioSpec};
use anisoch::grid::make_grid;
use anisoch::physics::{original_energy, u_initial, ModelParams, RegKind};

#[test]
#[ignore]
fn probe_frozen_values() {
    for (n, label) in [(257usize, "energy"), (129usize, "u0")] {
        let grid = make_grid(2, &[n, n]).unwrap();
        for kind in [RegKind::LinearReg, RegKind::Willmore] {
            let params = ModelParams::defaults(kind);
            let spec = ScenarioSpec {
                name: Scenario::Circle,
                grid: grid.clone(),
                params,
                dt: 1e-3,
                t_final: 0.0,
                seed: 0,
            };
            let phi = initial_condition(&spec).unwrap();
            if label == "energy" {
                let e = original_energy(&phi, &params).unwrap();
                println!(
                    "{n}^2 {kind:?}: aniso={:.15e} reg={:.15e} total={:.15e}",
                    e.aniso_part, e.reg_part, e.total
                );
            } else {
                println!("{n}^2 {kind:?}: u0={:.15e}", u_initial(&phi, &params).unwrap());
            }
        }
    }
}

#[test]
#[ignore]
fn probe_frozen_3d() {
    let grid = make_grid(3, &[65, 65, 65]).unwrap();
    let params = ModelParams::defaults(RegKind::LinearReg);
    let spec = ScenarioSpec {
        name: Scenario::Sphere,
        grid,
        params,
        dt: 1e-3,
        t_final: 0.0,
        seed: 0,
    };
    let phi = initial_condition(&spec).unwrap();
    let e = original_energy(&phi, &params).unwrap();
    println!("65^3 sphere LinearReg total={:.15e}", e.total);
}
