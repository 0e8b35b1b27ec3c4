// Bifurcation diagram of the cubic: periodic solutions over a grid of pulse
// strengths, chained into branches.

use std::fs::File;
use std::path::Path;

use stroboscope::{lambda_sweep, reference, saddle_node_points, transcritical_lambda};
use stroboscope::vectorfield::EQUILIBRIUM_TOL;

pub fn run(out_dir: &Path, points: usize) -> stroboscope::Result<()> {
    let cfg = reference::cubic();
    let an = cfg.analyzer()?;
    let eqs = cfg.vector_field()?.find_equilibria(EQUILIBRIUM_TOL)?;
    for p in saddle_node_points(&an, &eqs)?.points {
        println!("saddle-node at lambda = {:.10}, x = {:.10}", p.lambda_star, p.x_star);
    }
    println!("transcritical at lambda = {:.10}", transcritical_lambda(&an)?.lambda_star);

    let diagram = lambda_sweep(&an, -0.5, 8.0, points)?;
    for b in diagram.branches() {
        let (first, last) = (b.points[0], b.points[b.points.len() - 1]);
        println!(
            "branch over lambda in [{:.3}, {:.3}]: x0 {:.4} -> {:.4} ({} -> {})",
            first.0, last.0, first.1, last.1, first.2, last.2
        );
    }
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("cubic_sweep.csv");
    diagram.write_csv(File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> stroboscope::Result<()> {
    run(Path::new("out/examples"), 171)
}
