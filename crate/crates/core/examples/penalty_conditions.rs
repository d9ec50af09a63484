//! Tabulates the four penalty families and checks the admissibility
//! conditions on a grid.

use semigraph::penalty::{check_penalty_conditions, PenaltyFamily, PenaltySpec};

fn main() -> semigraph::Result<()> {
    let lambda = 0.5;
    let grid: Vec<f64> = (1..=600).map(|i| i as f64 * 0.005).collect();
    for family in [PenaltyFamily::Lasso, PenaltyFamily::capped_l1(), PenaltyFamily::scad(), PenaltyFamily::mcp()] {
        let p = PenaltySpec::new(family, lambda)?;
        let report = check_penalty_conditions(&p, &grid, p.plateau());
        println!("{:<10} all conditions hold: {}", family.name(), report.all_pass());
        for u in [0.0, 0.25, 0.5, 1.0, 2.0] {
            println!("    u = {u:<4}  p = {:.4}  p' = {:.4}", p.penalty_value(u)?, p.penalty_rderiv(u)?);
        }
    }
    Ok(())
}
