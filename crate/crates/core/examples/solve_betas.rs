//! Recovers inverse temperatures from target charge averages.

use multicharge::gge::{gibbs_state, solve_betas, ChargeSet, InverseTemperatures};
use multicharge::qcore::HermitianOperator;

fn main() -> multicharge::Result<()> {
    let charges = ChargeSet::unnamed(vec![
        HermitianOperator::spin1_x(),
        HermitianOperator::spin1_y(),
        HermitianOperator::spin1_z(),
    ])?;
    let truth = InverseTemperatures::new(vec![0.3, -0.7, 1.2])?;
    let targets = gibbs_state(&charges, &truth)?.averages();
    let got = solve_betas(&charges, &targets, &InverseTemperatures::zeros(3), 1e-13)?;
    println!("targets   {targets:?}");
    println!("true beta {:?}", truth.as_slice());
    println!("solved    {:?}", got.as_slice());
    Ok(())
}
