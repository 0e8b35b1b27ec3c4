// One pulsed trajectory of the cubic, written as CSV for plotting.

use std::fs::File;
use std::path::Path;

use stroboscope::flow::{sequence_trend, Trajectory};
use stroboscope::{reference, simulate_impulsive};

pub fn run(out_dir: &Path) -> stroboscope::Result<Trajectory> {
    let cfg = reference::cubic();
    let vf = cfg.vector_field()?;
    // pulses that remove 15% of the state every unit of time
    let traj = simulate_impulsive(&vf, 1.0, -0.15, 2.5, 12, &cfg.integrator)?;
    for j in &traj.jumps {
        println!("t = {:>4}: {:.8} -> {:.8}", j.t_k, j.x_before, j.x_after);
    }
    let values = traj.pulse_values();
    println!("{:?} after {} pulses", sequence_trend(2.5, &values, 1e-10), values.len());

    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("cubic_trajectory.csv");
    traj.write_csv(File::create(&path)?)?;
    println!("wrote {} ({} samples)", path.display(), traj.samples.len());
    Ok(traj)
}

#[allow(dead_code)]
fn main() -> stroboscope::Result<()> {
    run(Path::new("out/examples")).map(|_| ())
}
