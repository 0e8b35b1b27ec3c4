// Shortening the pulse period until an attracting periodic solution of the
// cubic disappears, then following the seed to its fate.

use std::fs::File;
use std::path::Path;

use stroboscope::bifurcation::{geometric_omega_grid, omega_scan, OmegaScanReport};
use stroboscope::{find_periodic_orbits, reference, Stability};

pub fn run(out_dir: &Path, ratio: f64) -> stroboscope::Result<OmegaScanReport> {
    let cfg = reference::cubic();
    let lambda = -0.15;
    let an = cfg.analyzer()?;
    let seed = find_periodic_orbits(&an, lambda)?
        .into_iter()
        .rfind(|o| o.stability == Stability::AsymptoticallyStable)
        .expect("the cubic has an attracting orbit near 2 for this lambda");
    println!("omega = {}: attracting orbit through x0 = {:.10}", cfg.omega, seed.x0);

    let grid = geometric_omega_grid(cfg.omega, ratio, 1e-3)?;
    let report = omega_scan(&cfg.vector_field()?, lambda, seed.x0, &grid, &cfg.integrator)?;
    for row in report.rows.iter().take_while(|r| r.orbit_present) {
        println!("  omega = {:.6}: x0 = {:.10}", row.omega, row.x_tracked.unwrap());
    }
    if let (Some(w), Some(f)) = (report.omega_lost, report.fate) {
        println!("gone at omega = {w:.6}; from the old seed the solution {f}");
    }

    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("cubic_omega_scan.csv");
    report.write_csv(File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(report)
}

#[allow(dead_code)]
fn main() -> stroboscope::Result<()> {
    run(Path::new("out/examples"), 0.9).map(|_| ())
}
