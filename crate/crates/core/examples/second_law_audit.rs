//! Random joint unitaries on a qubit and a spin-1 bath never beat the
//! multi-charge second law.

use multicharge::extract::{second_law_audit, AuditMode, SystemSpec};
use multicharge::gge::{gibbs_state, ChargeSet, InverseTemperatures};
use multicharge::qcore::{DensityMatrix, HermitianOperator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> multicharge::Result<()> {
    let betas = InverseTemperatures::new(vec![0.8, -0.5])?;
    let bath = ChargeSet::unnamed(vec![HermitianOperator::spin1_x(), HermitianOperator::spin1_y()])?;
    let tau = gibbs_state(&bath, &betas)?;
    let sys_charges = ChargeSet::unnamed(vec![HermitianOperator::pauli_x(), HermitianOperator::pauli_y()])?;
    let sys = SystemSpec::new(DensityMatrix::random(2, &mut ChaCha8Rng::seed_from_u64(1)), sys_charges)?;
    for mode in [AuditMode::Joint, AuditMode::BathOnly] {
        let r = second_law_audit(&sys, &tau, 500, 11, mode)?;
        println!(
            "{mode:?}: {} trials, max beta.W + dF_s = {:.3e}, min dS_s + dS_b = {:.3e}, violations {}",
            r.trials,
            r.max_second_law_gap,
            r.min_entropy_sum,
            r.violations.len()
        );
    }
    Ok(())
}
