//! Explicit ladder batteries for a qubit-qutrit unitary: the gap to the
//! implicit-battery reduced state shrinks as the weights widen.

use multicharge::battery::{implicit_explicit_gap, lift_unitary, WeightState};
use multicharge::qcore::{DensityMatrix, UnitaryOperator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> multicharge::Result<()> {
    let sys = [(0.0, 0.0), (1.0, -1.0)];
    let bath = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
    let levels: Vec<(f64, f64)> = sys.iter().flat_map(|s| bath.iter().map(move |b| (s.0 + b.0, s.1 + b.1))).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u = UnitaryOperator::haar(6, &mut rng);
    let rho = DensityMatrix::random(6, &mut rng);
    for width in [4.0, 8.0, 16.0, 32.0] {
        let w = WeightState::padded_gaussian(width, 16, 1.0)?;
        let lifted = lift_unitary(&u, &levels, *w.ladder(), *w.ladder())?;
        let (ca, cb) = lifted.conservation_defects();
        let gap = implicit_explicit_gap(&rho, &w, &w, &lifted)?;
        println!("width {width:>4}: ladder {:>4}, commutators {:.1e}/{:.1e}, gap {gap:.3e}", w.ladder().size(), ca, cb);
    }
    Ok(())
}
