// Periodic solutions of x' = -x (x - 1) (x - 2) with pulses every omega = 1,
// for a few pulse strengths, each checked by direct simulation.

use stroboscope::{find_periodic_orbits, reference, verify_orbit};

pub fn run() -> stroboscope::Result<()> {
    let an = reference::cubic().analyzer()?;
    for lambda in [-0.5, -0.1, 0.0, 1.0, 10.0] {
        let orbits = find_periodic_orbits(&an, lambda)?;
        println!("lambda = {lambda}: {} periodic solution(s)", orbits.len());
        for o in &orbits {
            let check = verify_orbit(&an, o, &orbits, 50, 1e-3)?;
            println!(
                "  x0 = {:.10}  {:<10}  simulated: {:?}, one-period residual {:.1e}",
                o.x0,
                o.stability.label(),
                check.observed,
                check.one_period_residual
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> stroboscope::Result<()> {
    run()
}
