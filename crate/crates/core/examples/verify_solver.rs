//! Checks the leapfrog solver against the exact standing wave.
//!
//! Prints the error at three resolutions and the ratio between consecutive
//! ones (close to 4 for a second-order scheme), the drift of the gradient
//! energy over one unit of time, and where a supercritical step blows up.

use woplab::solver::{
    convergence_study, convergence_study_with, energy_drift, instability_onset, TimeStart, DEFAULT_CFL,
    VERIFY_TERMINAL_TIME,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let resolutions = [65, 129, 257];
    for (label, start) in [("taylor start", TimeStart::Taylor), ("frozen start", TimeStart::Frozen)] {
        println!("{label}, T = {VERIFY_TERMINAL_TIME}");
        let points = convergence_study_with(1, 1.0, &resolutions, VERIFY_TERMINAL_TIME, DEFAULT_CFL, start)?;
        for (i, p) in points.iter().enumerate() {
            let ratio = if i > 0 {
                points[i - 1].rel_error / p.rel_error
            } else {
                f64::NAN
            };
            println!(
                "  n = {:>3}  steps = {:>3}  error = {:.3e}  ratio = {ratio:.3}",
                p.n_points, p.n_steps, p.rel_error
            );
        }
    }

    // At T = 1 the mode sits at a turning point, where the leading phase
    // error cancels and the ratios come out near 16.
    let at_one = convergence_study(1, 1.0, &resolutions, 1.0, DEFAULT_CFL)?;
    let r: Vec<f64> = at_one.windows(2).map(|w| w[0].rel_error / w[1].rel_error).collect();
    println!("ratios at T = 1: {r:.2?}");

    println!(
        "energy drift over T = 1: {:.3e}",
        energy_drift(1, 1.0, 128, 1.0, DEFAULT_CFL)?
    );
    match instability_onset(1, 128, 1.5, 2000)? {
        Some(step) => println!("courant number 1.5 blows up at step {step}"),
        None => println!("courant number 1.5 stayed finite"),
    }
    Ok(())
}
