//! TOML model files.
//!
//! Frame model:
//!
//! ```toml
//! kind = "frame"
//! id = "kt"
//! n = 4
//! leaf = [1, 4]
//! brackets = [[1, 2, 3, "1"]]
//! split = { f1 = [3], f2 = [2] }
//! ```
//!
//! Grid model, metric entries listed by block and position; unlisted
//! diagonal entries are 1 and unlisted off-diagonal entries 0:
//!
//! ```toml
//! kind = "grid"
//! id = "warped"
//! p = 2
//! q = 2
//! epsilon = 1.0
//!
//! [[metric]]
//! block = "normal"
//! row = 0
//! col = 0
//! terms = [{ freq = [0, 0, 0, 0], cos = 1.0 }, { freq = [1, 0, 0, 0], sin = 0.5 }]
//! ```
//!
//! Either kind may carry `phi = [{ kind = "ext", k = 1, mult = 1 }]`.

use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::almost::SplitFrameModel;
use crate::clifford::{PhiBundleSpec, PhiKind, PhiTerm};
use crate::frame::{Bracket, LieFrameModel};
use crate::grid::CoordFoliatedTorus;
use crate::trig::{TrigPolyField, TrigTerm};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalText {
    Int(i64),
    Text(String),
}

impl RationalText {
    pub fn parse(&self) -> Result<BigRational> {
        match self {
            RationalText::Int(v) => Ok(BigRational::from_integer((*v).into())),
            RationalText::Text(s) => {
                let s = s.trim();
                let (n, d) = s.split_once('/').unwrap_or((s, "1"));
                let n: BigInt = n.trim().parse().map_err(|_| Error::Parse(format!("bad rational '{s}'")))?;
                let d: BigInt = d.trim().parse().map_err(|_| Error::Parse(format!("bad rational '{s}'")))?;
                if d == BigInt::from(0) {
                    return Err(Error::Parse(format!("zero denominator in '{s}'")));
                }
                Ok(BigRational::new(n, d))
            }
        }
    }

    pub fn from_rational(r: &BigRational) -> Self {
        if r.is_integer() {
            if let Ok(v) = i64::try_from(r.numer().clone()) {
                return RationalText::Int(v);
            }
        }
        RationalText::Text(r.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub f1: Vec<usize>,
    pub f2: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiTermSpec {
    pub kind: String,
    pub k: usize,
    #[serde(default = "one")]
    pub mult: usize,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub id: String,
    pub n: usize,
    pub leaf: Vec<usize>,
    #[serde(default)]
    pub brackets: Vec<(usize, usize, usize, RationalText)>,
    #[serde(default = "yes")]
    pub orient_leaf: bool,
    #[serde(default = "yes")]
    pub orient_normal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phi: Vec<PhiTermSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    /// `"leaf"` or `"normal"`.
    pub block: String,
    pub row: usize,
    pub col: usize,
    #[serde(default)]
    pub terms: Vec<TrigTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub id: String,
    pub p: usize,
    pub q: usize,
    #[serde(default = "unit")]
    pub epsilon: f64,
    #[serde(default)]
    pub metric: Vec<MetricEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phi: Vec<PhiTermSpec>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Frame(FrameSpec),
    Grid(GridSpec),
}

/// A parsed and validated model file.
#[derive(Clone, Debug)]
pub enum ModelFile {
    Frame { model: LieFrameModel, split: Option<SplitFrameModel>, phi: PhiBundleSpec },
    Grid { model: CoordFoliatedTorus, phi: PhiBundleSpec },
}

impl ModelFile {
    pub fn id(&self) -> &str {
        match self {
            ModelFile::Frame { model, .. } => model.id(),
            ModelFile::Grid { model, .. } => &model.id,
        }
    }

    pub fn phi(&self) -> &PhiBundleSpec {
        match self {
            ModelFile::Frame { phi, .. } | ModelFile::Grid { phi, .. } => phi,
        }
    }
}

fn phi_from(spec: &[PhiTermSpec]) -> Result<PhiBundleSpec> {
    let terms = spec
        .iter()
        .map(|t| {
            let kind = match t.kind.as_str() {
                "ext" => PhiKind::Ext,
                "sym" => PhiKind::Sym,
                other => return Err(Error::Parse(format!("phi kind must be ext or sym, got '{other}'"))),
            };
            Ok(PhiTerm { kind, k: t.k, mult: t.mult })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhiBundleSpec { terms })
}

fn phi_to(phi: &PhiBundleSpec) -> Vec<PhiTermSpec> {
    phi.terms
        .iter()
        .map(|t| PhiTermSpec {
            kind: match t.kind {
                PhiKind::Ext => "ext".into(),
                PhiKind::Sym => "sym".into(),
            },
            k: t.k,
            mult: t.mult,
        })
        .collect()
}

impl FrameSpec {
    pub fn build(&self) -> Result<(LieFrameModel, Option<SplitFrameModel>)> {
        let br = self.brackets.iter().map(|(i, j, k, v)| Ok(Bracket::new(*i, *j, *k, v.parse()?))).collect::<Result<Vec<_>>>()?;
        let mut m = LieFrameModel::new(&self.id, self.n, &self.leaf, &br)?;
        m.orientation = [self.orient_leaf, self.orient_normal];
        let split = match &self.split {
            None => None,
            Some(s) => {
                let mut all: Vec<usize> = s.f1.iter().chain(&s.f2).copied().collect();
                all.sort_unstable();
                let normal: Vec<usize> = (m.p()..m.n()).map(|a| m.label(a)).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
                if all != normal {
                    return Err(Error::InvalidModel(format!("split f1 {:?} + f2 {:?} must partition the normal labels {normal:?}", s.f1, s.f2)));
                }
                Some(SplitFrameModel::new(m.clone(), &s.f2)?)
            }
        };
        Ok((m, split))
    }

    pub fn from_model(m: &LieFrameModel, split: Option<&SplitFrameModel>, phi: &PhiBundleSpec) -> Self {
        FrameSpec {
            id: m.id().into(),
            n: m.n(),
            leaf: (0..m.p()).map(|a| m.label(a)).collect(),
            brackets: m.brackets().into_iter().map(|b| (b.i, b.j, b.k, RationalText::from_rational(&b.value))).collect(),
            orient_leaf: m.orientation[0],
            orient_normal: m.orientation[1],
            split: split.map(|s| SplitSpec { f1: s.f1(), f2: s.f2.clone() }),
            phi: phi_to(phi),
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<CoordFoliatedTorus> {
        let (p, q) = (self.p, self.q);
        let n = p + q;
        let block = |k: usize| -> Vec<Vec<TrigPolyField>> {
            (0..k).map(|i| (0..k).map(|j| if i == j { TrigPolyField::constant(n, 1.0) } else { TrigPolyField::zero(n) }).collect()).collect()
        };
        let (mut gf, mut gp) = (block(p), block(q));
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.metric {
            let (b, k) = match e.block.as_str() {
                "leaf" => (&mut gf, p),
                "normal" => (&mut gp, q),
                other => return Err(Error::Parse(format!("metric block must be leaf or normal, got '{other}'"))),
            };
            let (r, c) = (e.row.min(e.col), e.row.max(e.col));
            if c >= k {
                return Err(Error::InvalidModel(format!("{} entry ({}, {}) outside a {k}x{k} block", e.block, e.row, e.col)));
            }
            if !seen.insert((e.block.clone(), r, c)) {
                return Err(Error::InvalidModel(format!("{} entry ({r}, {c}) given twice", e.block)));
            }
            if let Some(t) = e.terms.iter().find(|t| t.freq.len() != n) {
                return Err(Error::InvalidModel(format!("frequency {:?} needs {n} components", t.freq)));
            }
            b[r][c] = TrigPolyField { n, terms: e.terms.clone() };
        }
        CoordFoliatedTorus::new(&self.id, p, q, gf, gp, self.epsilon)
    }

    pub fn from_model(m: &CoordFoliatedTorus, phi: &PhiBundleSpec) -> Self {
        let mut metric = Vec::new();
        for (name, b) in [("leaf", &m.gf), ("normal", &m.gp)] {
            for (i, row) in b.iter().enumerate() {
                for (j, f) in row.iter().enumerate().skip(i) {
                    metric.push(MetricEntry { block: name.into(), row: i, col: j, terms: f.terms.clone() });
                }
            }
        }
        GridSpec { id: m.id.clone(), p: m.p, q: m.q, epsilon: m.epsilon, metric, phi: phi_to(phi) }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<ModelFile> {
        match self {
            ModelSpec::Frame(f) => {
                let (model, split) = f.build()?;
                Ok(ModelFile::Frame { model, split, phi: phi_from(&f.phi)? })
            }
            ModelSpec::Grid(g) => Ok(ModelFile::Grid { model: g.build()?, phi: phi_from(&g.phi)? }),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn parse_model(text: &str) -> Result<ModelFile> {
    let spec: ModelSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    spec.build()
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}
