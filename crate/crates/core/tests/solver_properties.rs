use proptest::prelude::*;
use woplab::solver::{
    analytic_standing_wave, cfl_timestep, harmonic_interface_speed_sq, solve_terminal, solve_with, CoefficientField,
    Grid, Integrator, SolverConfig, SolverError, TimeStart, WaveField,
};

fn field(grid: &Grid, amps: &[f64]) -> WaveField {
    let n = grid.n_points();
    let mut v: Vec<f64> = grid
        .xs()
        .iter()
        .map(|&x| {
            amps.iter()
                .enumerate()
                .map(|(k, a)| a * ((k + 1) as f64 * std::f64::consts::PI * x).sin())
                .sum()
        })
        .collect();
    v[0] = 0.0;
    v[n - 1] = 0.0;
    WaveField::new(v)
}

fn speed(grid: &Grid, amps: &[f64]) -> CoefficientField {
    let v = grid
        .xs()
        .iter()
        .map(|&x| {
            1.0 + amps
                .iter()
                .enumerate()
                .map(|(k, a)| a * (2.0 * std::f64::consts::PI * (k + 1) as f64 * x).sin())
                .sum::<f64>()
        })
        .collect();
    CoefficientField::new(v).unwrap()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(1e-300)).sqrt()
}

fn amps(n: usize, bound: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-bound..bound, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solution_map_is_linear(a in amps(5, 1.0), b in amps(5, 1.0), cm in amps(3, 0.2), s in -3.0..3.0f64) {
        let grid = Grid::new(65).unwrap();
        let c = speed(&grid, &cm);
        let cfg = cfl_timestep(&c, &grid, 0.9, 0.5).unwrap();
        let (u, v) = (field(&grid, &a), field(&grid, &b));
        let combo = WaveField::new(u.values().iter().zip(v.values()).map(|(x, y)| s * x + y).collect());
        let su = solve_terminal(&u, &c, &grid, &cfg).unwrap();
        let sv = solve_terminal(&v, &c, &grid, &cfg).unwrap();
        let sc = solve_terminal(&combo, &c, &grid, &cfg).unwrap();
        let want: Vec<f64> = su.values().iter().zip(sv.values()).map(|(x, y)| s * x + y).collect();
        let scale = want.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
        for (g, w) in sc.values().iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn endpoints_stay_pinned(a in amps(6, 1.0), cm in amps(4, 0.15)) {
        let grid = Grid::new(49).unwrap();
        let c = speed(&grid, &cm);
        let cfg = cfl_timestep(&c, &grid, 0.9, 1.0).unwrap();
        let n = grid.n_points();
        solve_with(&field(&grid, &a), &c, &grid, &cfg, TimeStart::Taylor, |_, u| {
            assert_eq!((u[0], u[n - 1]), (0.0, 0.0));
        }).unwrap();
    }

    #[test]
    fn leapfrog_runs_backwards(a in amps(4, 1.0), cm in amps(3, 0.2)) {
        let grid = Grid::new(33).unwrap();
        let c = speed(&grid, &cm);
        let cfg = cfl_timestep(&c, &grid, 0.8, 0.6).unwrap();
        let u0 = field(&grid, &a);
        let mut levels = Vec::new();
        solve_with(&u0, &c, &grid, &cfg, TimeStart::Taylor, |_, u| levels.push(u.to_vec())).unwrap();
        let last = levels.len() - 1;
        let mut back = Integrator::from_levels(
            &WaveField::new(levels[last].clone()),
            &WaveField::new(levels[last - 1].clone()),
            &c,
            &grid,
            cfg.dt,
        ).unwrap();
        for _ in 0..last - 1 {
            back.advance().unwrap();
        }
        prop_assert!(rel(back.current(), u0.values()) < 1e-9);
    }

    #[test]
    fn leapfrog_energy_is_conserved(a in amps(6, 1.0), cm in amps(4, 0.15)) {
        let grid = Grid::new(65).unwrap();
        let c = speed(&grid, &cm);
        let cfg = cfl_timestep(&c, &grid, 0.9, 2.0).unwrap();
        let u0 = field(&grid, &a);
        let c2: Vec<f64> = c.values().iter().map(|v| v * v).collect();
        let faces: Vec<f64> = c2.windows(2).map(|w| harmonic_interface_speed_sq(w[0], w[1]).unwrap()).collect();
        let h2 = grid.dx() * grid.dx();
        // <u, -A v> for the symmetric flux operator with pinned ends.
        let stiffness = |u: &[f64], v: &[f64]| -> f64 {
            faces.iter().enumerate().map(|(i, f)| f * (u[i + 1] - u[i]) * (v[i + 1] - v[i])).sum::<f64>() / h2
        };
        let mut prev: Option<Vec<f64>> = None;
        let mut energies = Vec::new();
        solve_with(&u0, &c, &grid, &cfg, TimeStart::Taylor, |_, u| {
            if let Some(p) = &prev {
                let kinetic: f64 = u.iter().zip(p).map(|(x, y)| ((x - y) / cfg.dt).powi(2)).sum();
                energies.push(kinetic + stiffness(u, p));
            }
            prev = Some(u.to_vec());
        }).unwrap();
        let e0 = energies[0];
        prop_assume!(e0 > 1e-8);
        for e in &energies {
            prop_assert!((e - e0).abs() <= 1e-9 * e0, "{e0} -> {e}");
        }
    }

    #[test]
    fn amplitude_stays_bounded_at_cfl_0_9(a in amps(8, 1.0), cm in amps(6, 0.15)) {
        let grid = Grid::new(65).unwrap();
        let c = speed(&grid, &cm);
        let cfg = cfl_timestep(&c, &grid, 0.9, 2.0).unwrap();
        let u0 = field(&grid, &a);
        prop_assume!(u0.max_abs() > 1e-6);
        let mut peak = 0.0f64;
        solve_with(&u0, &c, &grid, &cfg, TimeStart::Taylor, |_, u| {
            peak = u.iter().fold(peak, |m, v| m.max(v.abs()));
        }).unwrap();
        prop_assert!(peak <= 10.0 * u0.max_abs());
    }

    #[test]
    fn harmonic_interface_lies_between_neighbours(a in 0.05..10.0f64, b in 0.05..10.0f64) {
        let h = harmonic_interface_speed_sq(a, b).unwrap();
        prop_assert!(h >= a.min(b) * (1.0 - 1e-15) && h <= a.max(b) * (1.0 + 1e-15));
        prop_assert_eq!(h, harmonic_interface_speed_sq(b, a).unwrap());
        prop_assert!(h <= 0.5 * (a + b) * (1.0 + 1e-15));
    }

    #[test]
    fn timestep_hits_the_horizon_exactly(cm in amps(4, 0.2), t in 0.05..3.0f64, cfl in 0.1..1.0f64) {
        let grid = Grid::new(129).unwrap();
        let c = speed(&grid, &cm);
        let cfg = cfl_timestep(&c, &grid, cfl, t).unwrap();
        prop_assert!((cfg.n_steps as f64 * cfg.dt - t).abs() < 1e-12 * t.max(1.0));
        prop_assert!(cfg.dt * c.max() / grid.dx() <= cfl * (1.0 + 1e-12));
    }
}

#[test]
fn standing_wave_error_is_small_at_moderate_resolution() {
    let grid = Grid::new(257).unwrap();
    let c = CoefficientField::constant(&grid, 1.0).unwrap();
    let u0 = analytic_standing_wave(2, 1.0, 0.0, &grid).unwrap();
    let cfg = cfl_timestep(&c, &grid, 0.9, 0.6).unwrap();
    let out = solve_terminal(&u0, &c, &grid, &cfg).unwrap();
    let exact = analytic_standing_wave(2, 1.0, 0.6, &grid).unwrap();
    assert!(rel(out.values(), exact.values()) < 1e-3);
}

#[test]
fn supercritical_step_is_rejected_or_blows_up() {
    let grid = Grid::new(65).unwrap();
    let c = CoefficientField::constant(&grid, 1.0).unwrap();
    let u0 = analytic_standing_wave(1, 1.0, 0.0, &grid).unwrap();
    let cfg = SolverConfig {
        dt: 1.5 * grid.dx(),
        n_steps: 2000,
        terminal_time: 2000.0 * 1.5 * grid.dx(),
        cfl_number: 1.5,
    };
    let err = solve_terminal(&u0, &c, &grid, &cfg).unwrap_err();
    assert!(matches!(err, SolverError::Unstable { step } if step < 2000), "{err}");
}
