//! Extracts work in two charges from a qubit and shows the deficit
//! halving as the population step halves.

use multicharge::bathtrade::BathSpec;
use multicharge::extract::{run_extraction, SystemSpec};
use multicharge::gge::{gibbs_state, ChargeSet, InverseTemperatures};
use multicharge::qcore::DensityMatrix;

fn main() -> multicharge::Result<()> {
    let sqrt2 = std::f64::consts::SQRT_2;
    let bath = BathSpec::new(vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], 1.0, sqrt2)?;
    let charges = ChargeSet::from_levels(&[vec![0.0, 0.0], vec![1.0, 0.5]])?;
    let tau = gibbs_state(&charges, &InverseTemperatures::new(vec![1.0, sqrt2])?)?;
    let sys = SystemSpec::new(DensityMatrix::from_populations(&[0.9, 0.1])?, charges)?;
    for dp in [1e-2, 5e-3, 2.5e-3] {
        let r = run_extraction(&sys, &bath, dp, &tau)?;
        println!(
            "dp {dp:.1e}: W_A {:+.6}, W_B {:+.6}, beta.W {:.6}, -dF_s {:.6}, deficit {:.3e}, steps {}",
            r.w_a,
            r.w_b,
            r.w_a + sqrt2 * r.w_b,
            -r.d_f_s,
            r.deficit,
            r.step_count()
        );
    }
    Ok(())
}
