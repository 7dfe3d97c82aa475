//! Interconversion rate between two qubit states through the thermal state.

use multicharge::extract::interconversion_rate;
use multicharge::gge::{gibbs_state, ChargeSet, InverseTemperatures};
use multicharge::qcore::DensityMatrix;

fn main() -> multicharge::Result<()> {
    let charges = ChargeSet::from_levels(&[vec![0.0, 0.0], vec![1.0, 0.5]])?;
    let betas = InverseTemperatures::new(vec![1.0, std::f64::consts::SQRT_2])?;
    let tau = gibbs_state(&charges, &betas)?;
    let rho = DensityMatrix::from_populations(&[0.95, 0.05])?;
    let sigma = DensityMatrix::from_populations(&[0.3, 0.7])?;
    println!("R(rho, sigma) = {:.9}", interconversion_rate(&rho, &sigma, &charges, &betas)?);
    println!("R(sigma, rho) = {:.9}", interconversion_rate(&sigma, &rho, &charges, &betas)?);
    println!("R(rho, rho)   = {}", interconversion_rate(&rho, &rho, &charges, &betas)?);
    println!("R(tau, sigma) = {}", interconversion_rate(tau.state(), &sigma, &charges, &betas)?);
    Ok(())
}
