//! One runner per experiment kind, plus grid sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{AuditModeDef, ExperimentConfig, FareyMode, Kind};
use super::report::{Cell, RunReport, Table};
use crate::bathtrade::{plan_trade, validate_bath, xy, Direction, TradeCharge, TradeGoal};
use crate::battery::{entropy_nondecrease_check, implicit_explicit_gap, lift_for_charges, Ladder, WeightState};
use crate::error::{Error, Result};
use crate::extract::{second_law_audit, transform, AuditMode, SystemSpec};
use crate::gge::{gibbs_state, solve_betas, ChargeSet, InverseTemperatures};
use crate::numtheory::{robust_select, verify_coverage, RobustSelection};
use crate::qcore::{tensor, DensityMatrix, ProductSpace, UnitaryOperator};

pub fn run_experiment(kind: Kind, cfg: &ExperimentConfig) -> Result<RunReport> {
    match kind {
        Kind::Thermal => thermal(cfg),
        Kind::SolveBetas => solve(cfg),
        Kind::Trade => trade(cfg),
        Kind::Extract => extract(cfg),
        Kind::Battery => battery(cfg),
        Kind::Farey => farey(cfg),
        Kind::Audit => audit(cfg),
    }
}

fn thermal(cfg: &ExperimentConfig) -> Result<RunReport> {
    let charges = cfg.charge_set()?;
    let tau = gibbs_state(&charges, &cfg.betas()?)?;
    let mut table = Table::new(&["index", "eigenvalue[prob]"]);
    let mut spectrum = tau.state().eigenvalues();
    spectrum.sort_by(|a, b| b.total_cmp(a));
    for (i, p) in spectrum.iter().enumerate() {
        table.push(vec![i.into(), (*p).into()]);
    }
    let mut r = RunReport::new("thermal", cfg, table);
    r.total("log_partition[nat]", tau.log_partition());
    r.total("free_entropy[nat]", tau.free_entropy());
    for (name, avg) in charges.names().iter().zip(tau.averages()) {
        r.total(&format!("average_{name}[{name}]"), avg);
    }
    r.check_le("reconstruction_defect", tau.reconstruction_defect(), 1e-10);
    Ok(r)
}

fn solve(cfg: &ExperimentConfig) -> Result<RunReport> {
    let charges = cfg.charge_set()?;
    let p = &cfg.protocol;
    let targets = p.targets.clone().unwrap_or_default();
    let init = InverseTemperatures::new(p.init.clone().unwrap_or_else(|| vec![0.0; charges.len()]))?;
    let tol = p.tol.unwrap_or(1e-10);
    let betas = solve_betas(&charges, &targets, &init, tol)?;
    let achieved = gibbs_state(&charges, &betas)?.averages();
    let mut table = Table::new(&["charge", "target[charge]", "achieved[charge]", "beta[1/charge]"]);
    let mut worst = 0.0f64;
    for (i, name) in charges.names().iter().enumerate() {
        worst = worst.max((achieved[i] - targets[i]).abs());
        table.push(vec![name.as_str().into(), targets[i].into(), achieved[i].into(), betas.as_slice()[i].into()]);
    }
    let mut r = RunReport::new("solve-betas", cfg, table);
    for (name, b) in charges.names().iter().zip(betas.as_slice()) {
        r.total(&format!("beta_{name}[1/{name}]"), *b);
    }
    r.check_le("max_average_residual", worst, tol);
    Ok(r)
}

fn trade(cfg: &ExperimentConfig) -> Result<RunReport> {
    let bath = cfg.bath()?.spec()?;
    validate_bath(&bath).into_result()?;
    let p = &cfg.protocol;
    let charge = p.charge.unwrap_or(TradeCharge::A);
    let amount = p.eta.unwrap_or(1.0);
    let budget = p.epsilon.as_ref().map(|e| e.value()).transpose()?.unwrap_or(1e-3);
    let goal = TradeGoal { charge, amount, direction: p.direction.unwrap_or(Direction::Any) };
    let plan = plan_trade(&bath, goal, budget)?;
    let (x, y) = xy(&bath);
    let y_eff = if y != 0.0 { y } else { x };
    let mut table = Table::new(&["dn1", "dn2", "delta_q[prob]", "d_a_b[A]", "d_b_b[B]", "d_f_b[nat]", "ln_repetitions[nat]"]);
    let mut worst_bound = f64::NEG_INFINITY;
    for s in &plan.steps {
        let o = &s.outcome;
        table.push(vec![o.dn1.into(), o.dn2.into(), o.delta_q().into(), o.d_a().into(), o.d_b().into(), o.d_f().into(), s.ln_repetitions.into()]);
        let slack = if o.satisfies_cost_bound(y_eff) { -1.0 } else { 1.0 };
        worst_bound = worst_bound.max(slack);
    }
    let mut r = RunReport::new("trade", cfg, table);
    r.total("total_d_a_b[A]", plan.total_da);
    r.total("total_d_b_b[B]", plan.total_db);
    r.total("total_d_f_b[nat]", plan.total_df);
    r.total("steps[count]", plan.steps.len() as f64);
    let moved = match charge {
        TradeCharge::A => plan.total_da,
        TradeCharge::B => plan.total_db,
    };
    r.check_ge("moved_charge", moved.abs(), amount);
    r.check_le("free_entropy_cost", plan.total_df, budget);
    r.check_le("cost_bound_violations", worst_bound.max(0.0), 0.0);
    Ok(r)
}

fn extract(cfg: &ExperimentConfig) -> Result<RunReport> {
    let bath_def = cfg.bath()?;
    let bath = bath_def.spec()?;
    validate_bath(&bath).into_result()?;
    let betas = bath_def.betas()?;
    let charges = cfg.charge_set()?;
    let sys = SystemSpec::new(cfg.state()?, charges.clone())?;
    let goal = match cfg.goal()? {
        Some(g) => g,
        None => gibbs_state(&charges, &betas)?.state().clone(),
    };
    let delta_p = cfg.protocol.delta_p.unwrap_or(1e-2);
    let rep = transform(&sys, &bath, delta_p, &goal, &betas)?;
    let mut table = Table::new(&[
        "step", "from", "to", "dn1", "dn2", "delta_p[prob]", "weight[prob]", "d_w_a[A]", "d_w_b[B]", "d_s_s[nat]", "d_f_b[nat]",
        "deficit[nat]",
    ]);
    for (k, s) in rep.steps.iter().enumerate() {
        table.push(vec![
            k.into(),
            s.from.into(),
            s.to.into(),
            s.pair.dn1().into(),
            s.pair.dn2().into(),
            s.delta_p.into(),
            s.weight.into(),
            s.d_w_a.into(),
            s.d_w_b.into(),
            s.d_s_s.into(),
            s.d_f_b.into(),
            s.deficit().into(),
        ]);
    }
    let d_f_b: f64 = rep.steps.iter().map(|s| s.d_f_b).sum();
    let mut r = RunReport::new("extract", cfg, table);
    r.total("w_a[A]", rep.w_a);
    r.total("w_b[B]", rep.w_b);
    r.total("d_f_s[nat]", rep.d_f_s);
    r.total("deficit[nat]", rep.deficit);
    r.total("step_deficit[nat]", rep.step_deficit);
    r.total("d_f_b[nat]", d_f_b);
    r.total("first_step_d_f_b[nat]", rep.first_step_bath_free_entropy().unwrap_or(0.0));
    r.total("steps[count]", rep.step_count() as f64);
    r.total("final_distance[trace]", rep.final_distance);
    r.check_ge("second_law_deficit", rep.deficit, -1e-10);
    r.check_le("deficit_bookkeeping", (rep.deficit - rep.step_deficit).abs(), 1e-9);
    r.check_le("final_distance", rep.final_distance, 1e-10);
    Ok(r)
}

fn sb_charges(cfg: &ExperimentConfig) -> Result<(ChargeSet, ChargeSet, ProductSpace)> {
    let sys = cfg.charge_set()?;
    let bath = cfg.bath()?.charge_set()?;
    let space = ProductSpace::new(vec![sys.dim(), bath.dim()])?;
    let joint = sys.embedded(&space, 0)?.plus(&bath.embedded(&space, 1)?)?;
    Ok((joint, bath, space))
}

fn battery(cfg: &ExperimentConfig) -> Result<RunReport> {
    let seed = cfg.seed()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (joint, bath_charges, space) = sb_charges(cfg)?;
    let rho_s = match &cfg.state {
        Some(_) => cfg.state()?,
        None => DensityMatrix::random(space.factors()[0], &mut rng),
    };
    let tau = gibbs_state(&bath_charges, &cfg.bath()?.betas()?)?;
    let rho = tensor(&[&rho_s, tau.state()])?;
    let u = UnitaryOperator::haar(space.dim(), &mut rng);
    let spacing = cfg.protocol.spacing.unwrap_or(1.0);
    let widths = cfg.protocol.widths.clone().unwrap_or_else(|| vec![8.0, 16.0, 32.0]);

    let probe = Ladder::new(3, spacing, 0.0)?;
    let (ga, gb) = lift_for_charges(&u, &joint, probe, probe)?.guards();
    let mut table = Table::new(&[
        "width[rung]", "rungs[count]", "gap[trace]", "commutator_a[A]", "commutator_b[B]", "d_s_sb[nat]", "mixture_defect[1]",
        "momentum_drift[prob]", "d_w_a[A]", "d_w_b[B]", "first_law_a[A]", "first_law_b[B]",
    ]);
    let mut r_checks = Vec::new();
    let mut gaps = Vec::new();
    for &w in &widths {
        let wa = WeightState::padded_gaussian(w, ga, spacing)?;
        let wb = WeightState::padded_gaussian(w, gb, spacing)?;
        let lifted = lift_for_charges(&u, &joint, *wa.ladder(), *wb.ladder())?;
        let gap = implicit_explicit_gap(&rho, &wa, &wb, &lifted)?;
        let (ca, cb) = lifted.conservation_defects();
        let ent = entropy_nondecrease_check(&lifted, &rho, &wa, &wb)?;
        let run = lifted.evolve(&rho, &wa, &wb)?;
        let drift = |before: Vec<f64>, after: &[f64]| before.iter().zip(after).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let mom = drift(wa.momentum_distribution(), &run.momentum_a).max(drift(wb.momentum_distribution(), &run.momentum_b));
        let (fa, fb) = (run.d_a_sb + run.d_a_w, run.d_b_sb + run.d_b_w);
        table.push(vec![
            w.into(),
            wa.ladder().size().into(),
            gap.into(),
            ca.into(),
            cb.into(),
            ent.d_s.into(),
            ent.mixture_defect.into(),
            mom.into(),
            run.d_a_w.into(),
            run.d_b_w.into(),
            fa.into(),
            fb.into(),
        ]);
        gaps.push(gap);
        r_checks.push((ca.max(cb), ent.d_s, ent.mixture_defect, mom, fa.abs().max(fb.abs())));
    }
    let mut r = RunReport::new("battery", cfg, table);
    let worst = |f: fn(&(f64, f64, f64, f64, f64)) -> f64| r_checks.iter().map(f).fold(0.0f64, f64::max);
    r.check_le("commutator_norm", worst(|c| c.0), 1e-10);
    r.check_ge("entropy_change", r_checks.iter().map(|c| c.1).fold(f64::INFINITY, f64::min), -1e-10);
    r.check_le("mixture_defect", worst(|c| c.2), 1e-8);
    r.check_le("momentum_drift", worst(|c| c.3), 1e-8);
    r.check_le("first_law_defect", worst(|c| c.4), 1e-10);
    let mut sorted: Vec<(f64, f64)> = widths.iter().copied().zip(gaps.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rises = sorted.windows(2).filter(|p| p[1].0 > p[0].0 && p[1].1 >= p[0].1).count();
    r.check_le("gap_non_decreasing_pairs", rises as f64, 0.0);
    r.total("guard_a[rung]", ga as f64);
    r.total("guard_b[rung]", gb as f64);
    Ok(r)
}

fn farey(cfg: &ExperimentConfig) -> Result<RunReport> {
    let p = &cfg.protocol;
    let need = |n: &Option<super::config::Num>, what: &str| {
        n.as_ref().ok_or_else(|| Error::Config(format!("farey needs protocol.{what}")))?.rational()
    };
    let eps = need(&p.epsilon, "epsilon")?;
    let y = need(&p.y, "y")?;
    match p.farey {
        Some(FareyMode::RobustSelect) => {
            let measured = need(&p.measured, "measured")?;
            let delta = need(&p.delta, "delta")?;
            let mut table = Table::new(&["dn1", "dn2", "center", "half_width[ratio]"]);
            let sel = robust_select(&measured, &delta, &eps, &y)?;
            let mut r;
            match sel {
                RobustSelection::Selected { dn1, dn2, center, order, interval } => {
                    table.push(vec![dn1.into(), dn2.into(), center.to_string().as_str().into(), interval.half_width_f64().into()]);
                    r = RunReport::new("farey", cfg, table);
                    r.total("order[count]", order as f64);
                    r.notes.push(format!("({dn1}, {dn2})"));
                }
                RobustSelection::RespecifyRequired { reason, center, interval } => {
                    r = RunReport::new("farey", cfg, table);
                    r.notes.push(format!("nearest center {center}, half width {:e}", interval.half_width_f64()));
                    r.respecify = Some(reason);
                }
            }
            Ok(r)
        }
        Some(FareyMode::Coverage) => {
            let order = p.order.ok_or_else(|| Error::Config("farey coverage needs protocol.order".into()))?;
            let rep = verify_coverage(order, &eps, &y)?;
            let mut table = Table::new(&["left", "right", "gap[ratio]"]);
            for v in &rep.violations {
                table.push(vec![v.left.to_string().as_str().into(), v.right.to_string().as_str().into(), v.gap.to_f64().into()]);
            }
            let mut r = RunReport::new("farey", cfg, table);
            r.total("pairs_checked[count]", rep.pairs_checked as f64);
            r.total("min_overlap[ratio]", rep.min_overlap.to_f64());
            r.check_le("coverage_violations", rep.violations.len() as f64, 0.0);
            Ok(r)
        }
        None => Err(Error::Config("farey needs protocol.farey".into())),
    }
}

fn audit(cfg: &ExperimentConfig) -> Result<RunReport> {
    let seed = cfg.seed()?;
    let sys = SystemSpec::new(cfg.state()?, cfg.charge_set()?)?;
    let bath_def = cfg.bath()?;
    let tau = gibbs_state(&bath_def.charge_set()?, &bath_def.betas()?)?;
    let mode = match cfg.protocol.audit_mode.unwrap_or(AuditModeDef::Joint) {
        AuditModeDef::Joint => AuditMode::Joint,
        AuditModeDef::BathOnly => AuditMode::BathOnly,
    };
    let trials = cfg.protocol.trials.unwrap_or(500);
    let rep = second_law_audit(&sys, &tau, trials, seed, mode)?;
    let mut table = Table::new(&["trial", "seed", "check", "value[nat]"]);
    for v in &rep.violations {
        table.push(vec![v.trial.into(), Cell::Int(v.seed as i64), format!("{:?}", v.check).as_str().into(), v.value.into()]);
    }
    let mut r = RunReport::new("audit", cfg, table);
    r.total("trials[count]", rep.trials as f64);
    r.total("max_second_law_gap[nat]", rep.max_second_law_gap);
    r.total("min_entropy_sum[nat]", rep.min_entropy_sum);
    r.total("min_bath_free_entropy[nat]", rep.min_bath_free_entropy);
    r.check_le("violations", rep.violations.len() as f64, 0.0);
    Ok(r)
}

/// Metric columns reported per grid point for each sweepable kind.
fn sweep_metrics(kind: Kind) -> Result<&'static [&'static str]> {
    Ok(match kind {
        Kind::Extract => &["deficit[nat]", "first_step_d_f_b[nat]", "steps[count]"],
        Kind::Battery => &["gap[trace]"],
        Kind::Trade => &["total_d_f_b[nat]", "steps[count]"],
        other => return Err(Error::Config(format!("{other} cannot be swept"))),
    })
}

fn apply_axis(cfg: &mut ExperimentConfig, name: &str, value: f64) -> Result<()> {
    let p = &mut cfg.protocol;
    match name {
        "delta_p" => p.delta_p = Some(value),
        "width" => p.widths = Some(vec![value]),
        "eta" => p.eta = Some(value),
        "epsilon" => p.epsilon = Some(super::config::Num::Float(value)),
        other => return Err(Error::Config(format!("cannot sweep {other:?}"))),
    }
    Ok(())
}

/// Runs the base experiment at every grid point, in row-major order of the
/// listed axes. An empty grid gives a header-only table.
pub fn run_sweep(kind: Kind, cfg: &ExperimentConfig) -> Result<RunReport> {
    let metrics = sweep_metrics(kind)?;
    let axes = cfg.sweep.clone().unwrap_or_default().axes;
    let mut columns: Vec<&str> = axes.iter().map(|a| a.name.as_str()).collect();
    columns.extend_from_slice(metrics);
    let mut table = Table::new(&columns);
    let mut points: Vec<Vec<f64>> = if axes.is_empty() { Vec::new() } else { vec![Vec::new()] };
    for a in &axes {
        points = points.into_iter().flat_map(|p| a.values.iter().map(move |v| [p.clone(), vec![*v]].concat())).collect();
    }
    let mut failed = Vec::new();
    for point in &points {
        let mut c = cfg.clone();
        for (a, v) in axes.iter().zip(point) {
            apply_axis(&mut c, &a.name, *v)?;
        }
        c.validate(kind)?;
        let rep = run_experiment(kind, &c)?;
        failed.extend(rep.failed_checks().into_iter().map(|k| k.name.clone()));
        let mut row: Vec<Cell> = point.iter().map(|v| (*v).into()).collect();
        for m in metrics {
            let v = if *m == "gap[trace]" {
                rep.steps.rows.first().and_then(|r| match r[2] {
                    Cell::Real(x) => Some(x),
                    _ => None,
                })
            } else {
                rep.totals.get(*m).copied()
            };
            row.push(v.unwrap_or(f64::NAN).into());
        }
        table.push(row);
    }
    let mut r = RunReport::new("sweep", cfg, table);
    r.total("points[count]", points.len() as f64);
    r.check_le("failed_point_checks", failed.len() as f64, 0.0);
    r.notes.extend(failed);
    Ok(r)
}
