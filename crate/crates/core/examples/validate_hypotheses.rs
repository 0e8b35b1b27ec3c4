// Checking the standing hypotheses for a few vector fields.

use stroboscope::vectorfield::EQUILIBRIUM_TOL;
use stroboscope::{IntegratorConfig, PolynomialVectorField, StroboscopicAnalyzer};

pub fn run() -> stroboscope::Result<Vec<bool>> {
    let systems = [
        ("cubic -x(x-1)(x-2)", vec![0.0, -2.0, 3.0, -1.0], 30.0),
        ("logistic x(1-x)", vec![0.0, 1.0, -1.0], 3.0),
        ("shifted, h(0) != 0", vec![0.1, -2.0, 3.0, -1.0], 30.0),
        ("x(x-1)(x-2)(x-3)/4", vec![0.0, -1.5, 2.75, -1.5, 0.25], 5.0),
    ];
    let mut passed = Vec::new();
    for (name, coeffs, x_max) in systems {
        let vf = PolynomialVectorField::new(coeffs, x_max)?;
        let report = vf.validate_hypotheses();
        println!("{name}: {}", report.summary());
        for c in report.checks.iter().filter(|c| c.status != stroboscope::vectorfield::CheckStatus::Pass) {
            println!("  {c}");
        }
        if report.passed() {
            let eqs = vf.find_equilibria(EQUILIBRIUM_TOL)?;
            let an = StroboscopicAnalyzer::new(vf, 1.0, IntegratorConfig::default())?;
            for c in an.check_shape_hypotheses(&eqs)?.checks {
                println!("  {c}");
            }
        }
        passed.push(report.passed());
    }
    Ok(passed)
}

#[allow(dead_code)]
fn main() -> stroboscope::Result<()> {
    run().map(|_| ())
}
