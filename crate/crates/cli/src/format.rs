//! JSON file formats.
//!
//! Matrices are stored as separate row-major `re` and `im` arrays over the
//! lexicographic product basis of the listed wires (first wire most
//! significant). Serialization is canonical: parsing a file written here and
//! writing it again reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use combforge::choi::ChoiMap;
use combforge::comb::{CombSignature, CombValue, Step};
use combforge::memory::{CostCertificate, Evidence, StepBound};
use combforge::tensor::{Label, LabeledOperator, Wire, WireKind};
use combforge::{Matrix, Vector, C64};

use crate::CliError;

pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Quantum,
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireSpec {
    pub label: String,
    pub dim: usize,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixData {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorData {
    pub wires: Vec<WireSpec>,
    pub matrix: MatrixData,
}

/// A comb, channel or state: an operator whose wires carry their step and
/// direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorFile {
    pub version: u32,
    pub wires: Vec<WireSpec>,
    pub matrix: MatrixData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartData {
    pub index: Vec<usize>,
    pub matrix: MatrixData,
}

/// Parts of a (possibly nested) decomposition, all on the same wires.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionFile {
    pub version: u32,
    pub wires: Vec<WireSpec>,
    pub parts: Vec<PartData>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupFile {
    pub version: u32,
    pub wires: Vec<WireSpec>,
    pub generators: Vec<MatrixData>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundData {
    pub step: usize,
    pub lower: usize,
    pub upper: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorData {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvidenceData {
    Decomposition { cut: usize, parts: Vec<OperatorData>, ranks: Vec<usize> },
    Nested { steps: Vec<usize>, parts: Vec<IndexedOperator> },
    PureSchmidt { step: usize, schmidt_rank: usize },
    PptWitness { min_pt_eigenvalue: f64, exact: bool },
    KrausFamily { vectors: Vec<VectorData>, schmidt_ranks: Vec<usize> },
    SymmetryProjectors { projectors: Vec<OperatorData>, multiplicities: Vec<usize> },
    ClosedForm { family: String, dimension: usize, parameter: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexedOperator {
    pub index: Vec<usize>,
    pub operator: OperatorData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub version: u32,
    pub bounds: Vec<BoundData>,
    pub evidence: Vec<EvidenceData>,
    pub notes: Vec<String>,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

pub fn write<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, to_json(value)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn check_version(v: u32) -> Result<(), CliError> {
    if v != VERSION {
        return Err(CliError::Schema(format!("unsupported version {v}, expected {VERSION}")));
    }
    Ok(())
}

pub fn matrix_data(m: &Matrix) -> MatrixData {
    let (r, c) = m.shape();
    let mut re = Vec::with_capacity(r * c);
    let mut im = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            re.push(m[(i, j)].re);
            im.push(m[(i, j)].im);
        }
    }
    MatrixData { re, im }
}

pub fn parse_matrix(data: &MatrixData, n: usize) -> Result<Matrix, CliError> {
    if data.re.len() != n * n || data.im.len() != n * n {
        return Err(CliError::Schema(format!(
            "matrix arrays have lengths {} and {}, expected {}",
            data.re.len(),
            data.im.len(),
            n * n
        )));
    }
    Ok(Matrix::from_fn(n, n, |i, j| C64::new(data.re[i * n + j], data.im[i * n + j])))
}

fn vector_data(v: &Vector) -> VectorData {
    VectorData { re: v.iter().map(|z| z.re).collect(), im: v.iter().map(|z| z.im).collect() }
}

fn parse_vector(data: &VectorData) -> Result<Vector, CliError> {
    if data.re.len() != data.im.len() {
        return Err(CliError::Schema("vector re and im arrays differ in length".into()));
    }
    Ok(Vector::from_iterator(data.re.len(), data.re.iter().zip(&data.im).map(|(&a, &b)| C64::new(a, b))))
}

fn wire_of(spec: &WireSpec) -> Wire {
    match spec.kind {
        Kind::Quantum => Wire::quantum(spec.label.as_str(), spec.dim),
        Kind::Classical => Wire::classical(spec.label.as_str(), spec.dim),
    }
}

fn spec_of(w: &Wire, place: Option<(usize, Direction)>) -> WireSpec {
    WireSpec {
        label: w.label.as_str().to_owned(),
        dim: w.dim,
        kind: match w.kind {
            WireKind::Quantum => Kind::Quantum,
            WireKind::Classical => Kind::Classical,
        },
        step: place.map(|p| p.0),
        direction: place.map(|p| p.1),
    }
}

/// Step and direction of every wire of `sig`.
fn placement(sig: &CombSignature) -> BTreeMap<Label, (usize, Direction)> {
    let mut out = BTreeMap::new();
    for (k, s) in sig.steps().iter().enumerate() {
        for w in &s.inputs {
            out.insert(w.label.clone(), (k + 1, Direction::Input));
        }
        for w in &s.outputs {
            out.insert(w.label.clone(), (k + 1, Direction::Output));
        }
    }
    out
}

fn wire_specs(wires: &[Wire], sig: Option<&CombSignature>) -> Vec<WireSpec> {
    let place = sig.map(placement);
    wires
        .iter()
        .map(|w| spec_of(w, place.as_ref().and_then(|p| p.get(&w.label).copied())))
        .collect()
}

pub fn operator_data(op: &LabeledOperator, sig: Option<&CombSignature>) -> OperatorData {
    OperatorData { wires: wire_specs(op.wires(), sig), matrix: matrix_data(op.matrix()) }
}

pub fn parse_operator(wires: &[WireSpec], matrix: &MatrixData) -> Result<LabeledOperator, CliError> {
    let ws: Vec<Wire> = wires.iter().map(wire_of).collect();
    let n: usize = ws.iter().map(|w| w.dim).product();
    Ok(LabeledOperator::new(ws, parse_matrix(matrix, n)?)?)
}

/// Comb signature from the step and direction of each wire. Steps run
/// from 1 to the largest step mentioned; steps without wires are trivial.
pub fn signature_of(wires: &[WireSpec]) -> Result<CombSignature, CliError> {
    let n = wires.iter().filter_map(|w| w.step).max().unwrap_or(1);
    let mut steps = vec![Step { inputs: Vec::new(), outputs: Vec::new() }; n];
    for w in wires {
        let (Some(step), Some(dir)) = (w.step, w.direction) else {
            return Err(CliError::Schema(format!("wire `{}` needs a step and a direction", w.label)));
        };
        if step == 0 {
            return Err(CliError::Schema(format!("wire `{}`: steps are numbered from 1", w.label)));
        }
        match dir {
            Direction::Input => steps[step - 1].inputs.push(wire_of(w)),
            Direction::Output => steps[step - 1].outputs.push(wire_of(w)),
        }
    }
    Ok(CombSignature::new(steps)?)
}

impl OperatorFile {
    pub fn from_comb(c: &CombValue) -> Self {
        OperatorFile {
            version: VERSION,
            wires: wire_specs(c.op().wires(), Some(c.signature())),
            matrix: matrix_data(c.op().matrix()),
        }
    }

    /// A channel as a one-step comb.
    pub fn from_choi(c: &ChoiMap) -> Self {
        let mut wires = Vec::new();
        for w in c.op().wires() {
            let dir = if c.inputs().contains(&w.label) { Direction::Input } else { Direction::Output };
            wires.push(spec_of(w, Some((1, dir))));
        }
        OperatorFile { version: VERSION, wires, matrix: matrix_data(c.op().matrix()) }
    }

    /// Like [`OperatorFile::from_choi`], taking each wire's step from
    /// `steps` (default 1) and renumbering the steps used to `1..`.
    pub fn from_choi_with_steps(c: &ChoiMap, steps: &BTreeMap<Label, usize>) -> Self {
        let mut file = Self::from_choi(c);
        let mut used: Vec<usize> = c.op().wires().iter().map(|w| steps.get(&w.label).copied().unwrap_or(1)).collect();
        let original = used.clone();
        used.sort_unstable();
        used.dedup();
        for (spec, s) in file.wires.iter_mut().zip(original) {
            spec.step = Some(used.iter().position(|&u| u == s).unwrap() + 1);
        }
        file
    }

    pub fn to_comb(&self) -> Result<CombValue, CliError> {
        check_version(self.version)?;
        let sig = signature_of(&self.wires)?;
        let op = parse_operator(&self.wires, &self.matrix)?;
        Ok(CombValue::new(sig, op)?)
    }

    pub fn to_choi(&self) -> Result<ChoiMap, CliError> {
        Ok(self.to_comb()?.as_choi())
    }

    /// Step of every wire, as written.
    pub fn steps(&self) -> BTreeMap<Label, usize> {
        self.wires.iter().map(|w| (Label::new(w.label.as_str()), w.step.unwrap_or(1))).collect()
    }
}

impl DecompositionFile {
    pub fn new(sig: &CombSignature, parts: &[(Vec<usize>, LabeledOperator)]) -> Result<Self, CliError> {
        let wires = sig.wires();
        let parts = parts
            .iter()
            .map(|(index, p)| Ok(PartData { index: index.clone(), matrix: matrix_data(p.aligned_to(&wires)?.matrix()) }))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(DecompositionFile { version: VERSION, wires: wire_specs(&wires, Some(sig)), parts })
    }

    pub fn to_parts(&self) -> Result<Vec<(Vec<usize>, LabeledOperator)>, CliError> {
        check_version(self.version)?;
        if self.parts.is_empty() {
            return Err(CliError::Schema("a decomposition needs at least one part".into()));
        }
        self.parts.iter().map(|p| Ok((p.index.clone(), parse_operator(&self.wires, &p.matrix)?))).collect()
    }
}

impl GroupFile {
    pub fn to_parts(&self) -> Result<(Vec<Wire>, Vec<Matrix>), CliError> {
        check_version(self.version)?;
        let wires: Vec<Wire> = self.wires.iter().map(wire_of).collect();
        let n: usize = wires.iter().map(|w| w.dim).product();
        let gens = self.generators.iter().map(|g| parse_matrix(g, n)).collect::<Result<Vec<_>, _>>()?;
        Ok((wires, gens))
    }
}

impl CertificateFile {
    pub fn from_certificate(cert: &CostCertificate, sig: Option<&CombSignature>) -> Self {
        let evidence = cert
            .evidence
            .iter()
            .map(|e| match e {
                Evidence::Decomposition { cut, parts, ranks } => EvidenceData::Decomposition {
                    cut: *cut,
                    parts: parts.iter().map(|p| operator_data(p, sig)).collect(),
                    ranks: ranks.clone(),
                },
                Evidence::Nested { steps, parts } => EvidenceData::Nested {
                    steps: steps.clone(),
                    parts: parts
                        .iter()
                        .map(|(index, p)| IndexedOperator { index: index.clone(), operator: operator_data(p, sig) })
                        .collect(),
                },
                Evidence::PureSchmidt { step, schmidt_rank } => {
                    EvidenceData::PureSchmidt { step: *step, schmidt_rank: *schmidt_rank }
                }
                Evidence::PptWitness { min_pt_eigenvalue, exact } => {
                    EvidenceData::PptWitness { min_pt_eigenvalue: *min_pt_eigenvalue, exact: *exact }
                }
                Evidence::KrausFamily { vectors, schmidt_ranks } => EvidenceData::KrausFamily {
                    vectors: vectors.iter().map(vector_data).collect(),
                    schmidt_ranks: schmidt_ranks.clone(),
                },
                Evidence::SymmetryProjectors { projectors, multiplicities } => EvidenceData::SymmetryProjectors {
                    projectors: projectors.iter().map(|p| operator_data(p, sig)).collect(),
                    multiplicities: multiplicities.clone(),
                },
                Evidence::ClosedForm { family, dimension, parameter } => {
                    EvidenceData::ClosedForm { family: family.clone(), dimension: *dimension, parameter: *parameter }
                }
            })
            .collect();
        CertificateFile {
            version: VERSION,
            bounds: cert.bounds.iter().map(|b| BoundData { step: b.step, lower: b.lower, upper: b.upper }).collect(),
            evidence,
            notes: cert.notes.clone(),
        }
    }

    pub fn to_certificate(&self) -> Result<CostCertificate, CliError> {
        check_version(self.version)?;
        let op = |d: &OperatorData| parse_operator(&d.wires, &d.matrix);
        let evidence = self
            .evidence
            .iter()
            .map(|e| {
                Ok(match e {
                    EvidenceData::Decomposition { cut, parts, ranks } => Evidence::Decomposition {
                        cut: *cut,
                        parts: parts.iter().map(op).collect::<Result<_, _>>()?,
                        ranks: ranks.clone(),
                    },
                    EvidenceData::Nested { steps, parts } => Evidence::Nested {
                        steps: steps.clone(),
                        parts: parts
                            .iter()
                            .map(|p| Ok((p.index.clone(), op(&p.operator)?)))
                            .collect::<Result<_, CliError>>()?,
                    },
                    EvidenceData::PureSchmidt { step, schmidt_rank } => {
                        Evidence::PureSchmidt { step: *step, schmidt_rank: *schmidt_rank }
                    }
                    EvidenceData::PptWitness { min_pt_eigenvalue, exact } => {
                        Evidence::PptWitness { min_pt_eigenvalue: *min_pt_eigenvalue, exact: *exact }
                    }
                    EvidenceData::KrausFamily { vectors, schmidt_ranks } => Evidence::KrausFamily {
                        vectors: vectors.iter().map(parse_vector).collect::<Result<_, _>>()?,
                        schmidt_ranks: schmidt_ranks.clone(),
                    },
                    EvidenceData::SymmetryProjectors { projectors, multiplicities } => Evidence::SymmetryProjectors {
                        projectors: projectors.iter().map(op).collect::<Result<_, _>>()?,
                        multiplicities: multiplicities.clone(),
                    },
                    EvidenceData::ClosedForm { family, dimension, parameter } => {
                        Evidence::ClosedForm { family: family.clone(), dimension: *dimension, parameter: *parameter }
                    }
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(CostCertificate {
            bounds: self.bounds.iter().map(|b| StepBound { step: b.step, lower: b.lower, upper: b.upper }).collect(),
            evidence,
            notes: self.notes.clone(),
        })
    }
}
