// Orbit structure of the shipped quintic between its critical pulse
// strengths: one, three, five, three, then two periodic solutions.

use stroboscope::vectorfield::EQUILIBRIUM_TOL;
use stroboscope::{reference, regime_table, RegimeTable};

pub fn run() -> stroboscope::Result<RegimeTable> {
    let cfg = reference::quintic();
    let an = cfg.analyzer()?;
    let eqs = cfg.vector_field()?.find_equilibria(EQUILIBRIUM_TOL)?;
    for j in 1..=2 {
        let b = an.interval_bounds(j, &eqs)?;
        println!(
            "interval {j}: beta = {:.8} at {:.6}, gamma = {:.8} at {:.6}",
            b.beta, b.min_point, b.gamma, b.max_point
        );
    }
    let table = regime_table(&an, &eqs)?;
    print!("{}", table.to_text());
    Ok(table)
}

#[allow(dead_code)]
fn main() -> stroboscope::Result<()> {
    run().map(|_| ())
}
