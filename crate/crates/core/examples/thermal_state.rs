//! Generalized Gibbs state of a spin-1 particle with two non-commuting charges.

use multicharge::gge::{free_entropy, gibbs_state, ChargeSet, InverseTemperatures};
use multicharge::qcore::{DensityMatrix, HermitianOperator};

fn main() -> multicharge::Result<()> {
    let charges = ChargeSet::new(
        vec![HermitianOperator::spin1_x(), HermitianOperator::spin1_z()],
        vec!["Jx".into(), "Jz".into()],
    )?;
    let betas = InverseTemperatures::new(vec![0.4, 1.1])?;
    let tau = gibbs_state(&charges, &betas)?;
    println!("ln Z = {:.12}", tau.log_partition());
    for (name, avg) in charges.names().iter().zip(tau.averages()) {
        println!("<{name}> = {avg:.12}");
    }
    println!("spectrum = {:?}", tau.state().eigenvalues());

    // The Gibbs state maximizes the free entropy at fixed betas.
    let other = DensityMatrix::maximally_mixed(3);
    println!("free entropy: tau {:.9}, maximally mixed {:.9}", tau.free_entropy(), free_entropy(&other, &charges, &betas)?);
    Ok(())
}
