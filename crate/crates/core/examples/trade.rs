//! Moves one unit of charge A, then of charge B, into a qutrit bath at
//! a free-entropy cost below 1e-3.

use multicharge::bathtrade::{plan_trade, validate_bath, xy, BathSpec, Direction, TradeCharge, TradeGoal};

fn main() -> multicharge::Result<()> {
    let bath = BathSpec::new(vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], 1.0, 1.5)?;
    validate_bath(&bath).into_result()?;
    let (x, y) = xy(&bath);
    println!("x = {x}, y = {y}");
    for charge in [TradeCharge::A, TradeCharge::B] {
        let plan = plan_trade(&bath, TradeGoal { charge, amount: 1.0, direction: Direction::Any }, 1e-3)?;
        println!("{charge:?}: {} steps, dA = {:.6}, dB = {:.6}, dF = {:.3e}", plan.steps.len(), plan.total_da, plan.total_db, plan.total_df);
        for s in plan.steps.iter().take(3) {
            let o = &s.outcome;
            println!("  (dn1, dn2) = ({}, {}), ln N = {:.2}", o.dn1, o.dn2, s.ln_repetitions);
        }
    }
    Ok(())
}
