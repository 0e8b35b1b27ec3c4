// The time-omega map of the cubic, the auxiliary map g and the linear
// envelope of R_omega on each interval between stable equilibria.

use std::fs::File;
use std::path::Path;

use stroboscope::vectorfield::EQUILIBRIUM_TOL;
use stroboscope::reference;

pub fn run(out_dir: &Path) -> stroboscope::Result<()> {
    let cfg = reference::cubic();
    let an = cfg.analyzer()?;
    let eqs = cfg.vector_field()?.find_equilibria(EQUILIBRIUM_TOL)?;

    println!("R/x -> {:.10} as x -> 0 (exp(A omega))", an.origin_multiplier());
    for x in [0.5, 1.0, 1.5, 2.0, 5.0, 20.0] {
        let (r, rp) = an.eval(x)?;
        println!("x = {x:>4}: R = {r:.10}  R' = {rp:.6e}  g = {:+.8}", an.g(x)?);
    }
    for j in 1..=2 {
        let b = an.interval_bounds(j, &eqs)?;
        println!(
            "[{}, {}]{}: {:.6} x <= R(x) <= {:.6} x, critical lambdas {:.8} and {:.8}",
            b.lower,
            b.upper,
            if b.truncated { " (cut at x_max)" } else { "" },
            b.beta,
            b.gamma,
            b.lambda_at_max(),
            b.lambda_at_min()
        );
    }

    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("cubic_rmap.csv");
    an.write_grid_csv(301, File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> stroboscope::Result<()> {
    run(Path::new("out/examples"))
}
