//! Farey-robust choice of (dn1, dn2) from a noisy ratio measurement.

use multicharge::numtheory::{bezout, robust_select, verify_coverage, Rational, RobustSelection};

fn main() -> multicharge::Result<()> {
    let y: Rational = "1".parse()?;
    let eps: Rational = "0.3".parse()?;
    let delta: Rational = "0.001".parse()?;
    for measured in ["0.7", "0.5", "1.41421356"] {
        let m: Rational = measured.parse()?;
        match robust_select(&m, &delta, &eps, &y)? {
            RobustSelection::Selected { dn1, dn2, center, order, .. } => {
                println!("{measured}: ({dn1}, {dn2}) from {center} at order {order}")
            }
            RobustSelection::RespecifyRequired { reason, .. } => println!("{measured}: respecify ({reason})"),
        }
    }
    let cov = verify_coverage(3, &eps, &y)?;
    println!("order 3 coverage: {} pairs, clean = {}", cov.pairs_checked, cov.is_clean());
    println!("bezout(7, 10) = {:?}", bezout(7, 10)?);
    Ok(())
}
