//! TOML experiment configs.
//!
//! Matrices are row-major lists of `[re, im]` pairs. Bath levels, bath
//! temperatures and the number-theory inputs accept decimal strings
//! (`"0.7"`, `"7/10"`) that are parsed exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bathtrade::{BathSpec, Direction, TradeCharge};
use crate::error::{Error, Result};
use crate::gge::{ChargeSet, InverseTemperatures};
use crate::numtheory::Rational;
use crate::qcore::{CMatrix, DensityMatrix, HermitianOperator, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Thermal,
    SolveBetas,
    Trade,
    Extract,
    Battery,
    Farey,
    Audit,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Thermal => "thermal",
            Kind::SolveBetas => "solve-betas",
            Kind::Trade => "trade",
            Kind::Extract => "extract",
            Kind::Battery => "battery",
            Kind::Farey => "farey",
            Kind::Audit => "audit",
        }
    }

    fn randomized(self) -> bool {
        matches!(self, Kind::Battery | Kind::Audit)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A number written either as a TOML float/integer or as an exact string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    pub fn rational(&self) -> Result<Rational> {
        match self {
            Num::Int(i) => Ok(Rational::integer(*i)),
            Num::Float(x) => Rational::from_f64(*x),
            Num::Text(s) => Rational::from_str(s),
        }
    }

    pub fn value(&self) -> Result<f64> {
        let v = match self {
            Num::Int(i) => *i as f64,
            Num::Float(x) => *x,
            Num::Text(_) => self.rational()?.to_f64(),
        };
        if !v.is_finite() {
            return Err(Error::Config(format!("non-finite number {self:?}")));
        }
        Ok(v)
    }
}

pub type MatrixDef = Vec<Vec<[f64; 2]>>;

fn matrix(def: &MatrixDef) -> Result<CMatrix> {
    let n = def.len();
    if n == 0 || def.iter().any(|r| r.len() != n) {
        return Err(Error::Config("matrices must be square and non-empty".into()));
    }
    if def.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Config("matrix entries must be finite".into()));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(def[i][j][0], def[i][j][1])))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeDef {
    pub name: Option<String>,
    /// sigma_x, sigma_y, sigma_z, spin1_x, spin1_y, spin1_z.
    pub preset: Option<String>,
    pub diag: Option<Vec<f64>>,
    pub matrix: Option<MatrixDef>,
}

impl ChargeDef {
    fn operator(&self) -> Result<HermitianOperator> {
        let given = [self.preset.is_some(), self.diag.is_some(), self.matrix.is_some()];
        if given.iter().filter(|g| **g).count() != 1 {
            return Err(Error::Config("each charge needs exactly one of preset, diag, matrix".into()));
        }
        if let Some(p) = &self.preset {
            return Ok(match p.as_str() {
                "sigma_x" => HermitianOperator::pauli_x(),
                "sigma_y" => HermitianOperator::pauli_y(),
                "sigma_z" => HermitianOperator::pauli_z(),
                "spin1_x" => HermitianOperator::spin1_x(),
                "spin1_y" => HermitianOperator::spin1_y(),
                "spin1_z" => HermitianOperator::spin1_z(),
                other => return Err(Error::Config(format!("unknown charge preset {other:?}"))),
            });
        }
        if let Some(d) = &self.diag {
            if d.is_empty() || d.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("diag lists must be non-empty and finite".into()));
            }
            return HermitianOperator::from_diagonal(d).map_err(config);
        }
        HermitianOperator::new(matrix(self.matrix.as_ref().unwrap_or(&Vec::new()))?).map_err(config)
    }
}

fn config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

pub fn charge_set(defs: &[ChargeDef]) -> Result<ChargeSet> {
    if defs.is_empty() {
        return Err(Error::Config("no charges given".into()));
    }
    let ops = defs.iter().map(ChargeDef::operator).collect::<Result<Vec<_>>>()?;
    let names = defs
        .iter()
        .enumerate()
        .map(|(i, d)| d.name.clone().unwrap_or_else(|| ["A", "B", "C", "D"].get(i).map_or(format!("Q{i}"), |s| s.to_string())))
        .collect();
    ChargeSet::new(ops, names).map_err(config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathDef {
    /// (a_i, b_i) per bath level.
    pub levels: Vec<[Num; 2]>,
    pub betas: [Num; 2],
    /// Charges of a single bath copy for audits; defaults to diag(levels).
    #[serde(default)]
    pub charges: Vec<ChargeDef>,
}

impl BathDef {
    pub fn spec(&self) -> Result<BathSpec> {
        let levels = self
            .levels
            .iter()
            .map(|[a, b]| Ok((a.rational()?, b.rational()?)))
            .collect::<Result<Vec<_>>>()
            .map_err(config)?;
        let (ba, bb) = (self.betas[0].rational().map_err(config)?, self.betas[1].rational().map_err(config)?);
        BathSpec::from_rationals(levels, ba, bb).map_err(config)
    }

    pub fn betas(&self) -> Result<InverseTemperatures> {
        InverseTemperatures::new(vec![self.betas[0].value()?, self.betas[1].value()?]).map_err(config)
    }

    pub fn charge_set(&self) -> Result<ChargeSet> {
        if !self.charges.is_empty() {
            return charge_set(&self.charges);
        }
        let rows = self
            .levels
            .iter()
            .map(|[a, b]| Ok(vec![a.value()?, b.value()?]))
            .collect::<Result<Vec<_>>>()?;
        ChargeSet::from_levels(&rows).map_err(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditModeDef {
    Joint,
    BathOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FareyMode {
    RobustSelect,
    Coverage,
}

/// Protocol parameters; each experiment reads the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    /// Per-step population transfer (extract).
    pub delta_p: Option<f64>,
    /// Charge amount to move (trade).
    pub eta: Option<f64>,
    /// Free-entropy budget (trade) or target gap (farey).
    pub epsilon: Option<Num>,
    /// Measurement uncertainty (farey).
    pub delta: Option<Num>,
    pub charge: Option<TradeCharge>,
    pub direction: Option<Direction>,
    /// Gaussian weight widths in rungs (battery).
    pub widths: Option<Vec<f64>>,
    /// Ladder spacing in charge units (battery).
    pub spacing: Option<f64>,
    pub trials: Option<usize>,
    pub audit_mode: Option<AuditModeDef>,
    pub targets: Option<Vec<f64>>,
    pub init: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub farey: Option<FareyMode>,
    pub measured: Option<Num>,
    pub y: Option<Num>,
    pub order: Option<u64>,
    /// Goal state for extract; defaults to the thermal state.
    pub goal: Option<MatrixDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// delta_p, width, eta or epsilon.
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDef {
    #[serde(default)]
    pub axes: Vec<Axis>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDef {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub charges: Vec<ChargeDef>,
    #[serde(default)]
    pub betas: Vec<f64>,
    /// System density matrix.
    pub state: Option<MatrixDef>,
    pub bath: Option<BathDef>,
    #[serde(default)]
    pub protocol: Protocol,
    pub sweep: Option<SweepDef>,
    pub output: Option<OutputDef>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn kind(&self) -> Result<Kind> {
        self.kind.ok_or_else(|| Error::Config("missing `kind`".into()))
    }

    pub fn charge_set(&self) -> Result<ChargeSet> {
        charge_set(&self.charges)
    }

    pub fn betas(&self) -> Result<InverseTemperatures> {
        InverseTemperatures::new(self.betas.clone()).map_err(config)
    }

    pub fn state(&self) -> Result<DensityMatrix> {
        let def = self.state.as_ref().ok_or_else(|| Error::Config("missing `state`".into()))?;
        DensityMatrix::new(matrix(def)?).map_err(config)
    }

    pub fn goal(&self) -> Result<Option<DensityMatrix>> {
        self.protocol.goal.as_ref().map(|g| DensityMatrix::new(matrix(g)?).map_err(config)).transpose()
    }

    pub fn bath(&self) -> Result<&BathDef> {
        self.bath.as_ref().ok_or_else(|| Error::Config("missing `bath`".into()))
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("randomized runs need a `seed`".into()))
    }

    /// Full schema check for `kind`; nothing is computed or written before
    /// this passes.
    pub fn validate(&self, kind: Kind) -> Result<()> {
        if self.betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("betas must be finite".into()));
        }
        let p = &self.protocol;
        let finite = [p.delta_p, p.eta, p.spacing, p.tol].into_iter().flatten();
        if finite.chain(p.widths.iter().flatten().copied()).chain(p.targets.iter().flatten().copied()).any(|x| !x.is_finite()) {
            return Err(Error::Config("protocol parameters must be finite".into()));
        }
        for n in [&p.epsilon, &p.delta, &p.measured, &p.y].into_iter().flatten() {
            n.value()?;
        }
        if kind.randomized() {
            self.seed()?;
        }
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::Config(format!("{kind} needs {what}"))) };
        match kind {
            Kind::Thermal => {
                self.charge_set()?;
                need(self.betas.len() == self.charges.len(), "one beta per charge")?;
            }
            Kind::SolveBetas => {
                self.charge_set()?;
                need(p.targets.as_ref().is_some_and(|t| t.len() == self.charges.len()), "one protocol.targets entry per charge")?;
                need(p.init.as_ref().is_none_or(|t| t.len() == self.charges.len()), "one protocol.init entry per charge")?;
            }
            Kind::Trade => {
                self.bath()?.spec()?;
                need(p.eta.is_some_and(|e| e > 0.0), "protocol.eta > 0")?;
                need(p.epsilon.as_ref().is_some_and(|e| e.value().is_ok_and(|v| v > 0.0)), "protocol.epsilon > 0")?;
            }
            Kind::Extract => {
                self.bath()?.spec()?;
                need(self.charges.len() == 2, "two system charges")?;
                self.charge_set()?;
                self.state()?;
                self.goal()?;
                need(p.delta_p.is_some_and(|d| d > 0.0 && d <= 0.5), "protocol.delta_p in (0, 1/2]")?;
            }
            Kind::Battery => {
                self.bath()?.spec()?;
                need(self.charges.len() == 2, "two system charges")?;
                self.charge_set()?;
                if self.state.is_some() {
                    self.state()?;
                }
                need(p.widths.as_ref().is_none_or(|w| w.iter().all(|x| *x > 0.0)), "positive protocol.widths")?;
                need(p.spacing.is_none_or(|s| s > 0.0), "protocol.spacing > 0")?;
            }
            Kind::Farey => {
                need(p.epsilon.is_some() && p.y.is_some(), "protocol.epsilon and protocol.y")?;
                match p.farey {
                    Some(FareyMode::RobustSelect) => need(p.measured.is_some() && p.delta.is_some(), "protocol.measured and protocol.delta")?,
                    Some(FareyMode::Coverage) => need(p.order.is_some_and(|n| n >= 1), "protocol.order >= 1")?,
                    None => need(false, "protocol.farey")?,
                }
            }
            Kind::Audit => {
                need(self.charges.len() == 2, "two system charges")?;
                self.charge_set()?;
                self.state()?;
                self.bath()?.charge_set()?;
                self.bath()?.betas()?;
                need(p.trials.is_some_and(|t| t > 0), "protocol.trials > 0")?;
            }
        }
        if let Some(s) = &self.sweep {
            if s.axes.len() > 2 {
                return Err(Error::Config("sweeps take at most two parameters".into()));
            }
            for a in &s.axes {
                if !["delta_p", "width", "eta", "epsilon"].contains(&a.name.as_str()) {
                    return Err(Error::Config(format!("cannot sweep {:?}", a.name)));
                }
                if a.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config(format!("sweep values for {} must be finite", a.name)));
                }
            }
        }
        Ok(())
    }
}
