//! Choi operators and the link product.
//!
//! The Choi operator of `𝒞 : L(H_in) → L(H_out)` is
//! `C = Σᵢⱼ 𝒞(|i⟩⟨j|) ⊗ |i⟩⟨j|`, stored with its wires labelled as inputs or
//! outputs. The map acts as `𝒞(ρ) = Tr_in[(I_out ⊗ ρᵀ) C]`.

use std::collections::HashSet;

use crate::tensor::{max_abs, sub_offsets, vec_of, Label, LabeledOperator, Wire};
use crate::{Error, Matrix, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMap {
    op: LabeledOperator,
    inputs: Vec<Label>,
    outputs: Vec<Label>,
}

impl ChoiMap {
    /// `inputs` and `outputs` must partition the wire labels of `op`.
    pub fn new(op: LabeledOperator, inputs: Vec<Label>, outputs: Vec<Label>) -> Result<Self> {
        let mut seen = HashSet::new();
        for l in inputs.iter().chain(&outputs) {
            if !seen.insert(l) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
            if !op.has_label(l) {
                return Err(Error::UnknownLabel(l.clone()));
            }
        }
        if seen.len() != op.wires().len() {
            let missing = op.labels().into_iter().find(|l| !seen.contains(l)).unwrap();
            return Err(Error::WireMismatch(format!("wire `{missing}` is neither input nor output")));
        }
        Ok(ChoiMap { op, inputs, outputs })
    }

    /// Choi operator of `ρ ↦ Σ K ρ K†`, wires ordered inputs then outputs.
    pub fn from_kraus(inputs: Vec<Wire>, outputs: Vec<Wire>, kraus: &[Matrix]) -> Result<Self> {
        let din: usize = inputs.iter().map(|w| w.dim).product();
        let dout: usize = outputs.iter().map(|w| w.dim).product();
        let mut wires = outputs.clone();
        wires.extend(inputs.iter().cloned());
        let mut acc = Matrix::zeros(din * dout, din * dout);
        for k in kraus {
            if k.shape() != (dout, din) {
                return Err(Error::DimensionMismatch { expected: dout * din, found: k.nrows() * k.ncols() });
            }
            let v = vec_of(k);
            acc += &v * v.adjoint();
        }
        let op = LabeledOperator::new(wires, acc)?;
        let order: Vec<Label> = inputs.iter().chain(&outputs).map(|w| w.label.clone()).collect();
        let op = op.permute_wires(&order)?;
        Self::new(
            op,
            inputs.into_iter().map(|w| w.label).collect(),
            outputs.into_iter().map(|w| w.label).collect(),
        )
    }

    /// The identity channel `|I⟩⟩⟨⟨I|` from `input` to `output`.
    pub fn identity(input: Wire, output: Wire) -> Result<Self> {
        let (i, o) = (input.label.clone(), output.label.clone());
        Self::new(LabeledOperator::max_entangled(input, output)?, vec![i], vec![o])
    }

    /// A map with no inputs: its Choi operator is the prepared state itself.
    pub fn state(op: LabeledOperator) -> Self {
        let outputs = op.labels();
        ChoiMap { op, inputs: Vec::new(), outputs }
    }

    /// A map with no outputs (e.g. the Choi operator `Pᵀ` of `ρ ↦ Tr[Pρ]`).
    pub fn effect(op: LabeledOperator) -> Self {
        let inputs = op.labels();
        ChoiMap { op, inputs, outputs: Vec::new() }
    }

    pub fn op(&self) -> &LabeledOperator {
        &self.op
    }

    pub fn into_op(self) -> LabeledOperator {
        self.op
    }

    pub fn inputs(&self) -> &[Label] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Label] {
        &self.outputs
    }

    fn wires_for(&self, labels: &[Label]) -> Vec<Wire> {
        labels.iter().map(|l| self.op.wire(l).unwrap().clone()).collect()
    }

    pub fn input_wires(&self) -> Vec<Wire> {
        self.wires_for(&self.inputs)
    }

    pub fn output_wires(&self) -> Vec<Wire> {
        self.wires_for(&self.outputs)
    }

    pub fn input_dim(&self) -> usize {
        self.input_wires().iter().map(|w| w.dim).product()
    }

    pub fn output_dim(&self) -> usize {
        self.output_wires().iter().map(|w| w.dim).product()
    }

    /// `Tr_in[(I_out ⊗ ρᵀ) C]`; `rho` must live exactly on the input wires.
    pub fn apply(&self, rho: &LabeledOperator) -> Result<LabeledOperator> {
        let mut got: Vec<&Label> = rho.wires().iter().map(|w| &w.label).collect();
        let mut want: Vec<&Label> = self.inputs.iter().collect();
        got.sort();
        want.sort();
        if got != want {
            return Err(Error::WireMismatch(format!(
                "state wires {:?} do not match map inputs {:?}",
                rho.labels(),
                self.inputs
            )));
        }
        let in_wires = self.input_wires();
        let rho = rho.aligned_to(&in_wires)?;
        let wires = self.op.wires();
        let in_pos: Vec<usize> = self.inputs.iter().map(|l| self.op.position(l).unwrap()).collect();
        let out_pos: Vec<usize> = self.outputs.iter().map(|l| self.op.position(l).unwrap()).collect();
        let oi = sub_offsets(wires, &in_pos);
        let oo = sub_offsets(wires, &out_pos);
        let c = self.op.matrix();
        let r = rho.matrix();
        // out[o, o'] = Σ_{a,b} ρ[a, b] C[(o a), (o' b)]
        let mut out = Matrix::zeros(oo.len(), oo.len());
        for (x, &ox) in oo.iter().enumerate() {
            for (y, &oy) in oo.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (a, &ia) in oi.iter().enumerate() {
                    for (b, &ib) in oi.iter().enumerate() {
                        acc += r[(a, b)] * c[(ox + ia, oy + ib)];
                    }
                }
                out[(x, y)] = acc;
            }
        }
        LabeledOperator::new(self.output_wires(), out)
    }

    pub fn is_cp(&self, tol: f64) -> Result<bool> {
        self.op.is_psd(tol)
    }

    /// `‖Tr_out C − I_in‖_max`.
    pub fn tp_defect(&self) -> Result<f64> {
        let marginal = self.op.partial_trace(&self.outputs)?;
        let d = marginal.dim();
        Ok(max_abs(&(marginal.matrix() - Matrix::identity(d, d))))
    }

    pub fn is_tp(&self, tol: f64) -> Result<bool> {
        Ok(self.tp_defect()? <= tol)
    }

    /// Link product `C * D`: contraction over every label shared by the two
    /// maps, where each shared label is an output of one and an input of the
    /// other. The partial transpose sits on the shared factor of `other`, so
    /// that `apply(c.link(d), ρ) = apply(d, apply(c, ρ))` when `c`'s outputs
    /// feed `d`'s inputs. With no shared wires this is the tensor product.
    pub fn link(&self, other: &ChoiMap) -> Result<ChoiMap> {
        let mut shared = Vec::new();
        for w in self.op.wires() {
            let l = &w.label;
            let Some(ow) = other.op.wire(l) else { continue };
            let fwd = self.outputs.contains(l) && other.inputs.contains(l);
            let back = self.inputs.contains(l) && other.outputs.contains(l);
            if !(fwd || back) {
                return Err(Error::LabelCollision(l.clone()));
            }
            if ow.dim != w.dim {
                return Err(Error::DimensionMismatch { expected: w.dim, found: ow.dim });
            }
            shared.push(l.clone());
        }
        let xs: Vec<Label> = self.op.labels().into_iter().filter(|l| !shared.contains(l)).collect();
        let ys: Vec<Label> = other.op.labels().into_iter().filter(|l| !shared.contains(l)).collect();

        let cp = self.op.permute_wires(&[xs.clone(), shared.clone()].concat())?;
        let dp = other.op.permute_wires(&[shared.clone(), ys.clone()].concat())?;
        let dx: usize = xs.iter().map(|l| self.op.wire(l).unwrap().dim).product();
        let ds: usize = shared.iter().map(|l| self.op.wire(l).unwrap().dim).product();
        let dy: usize = ys.iter().map(|l| other.op.wire(l).unwrap().dim).product();

        // result[(x y), (x' y')] = Σ_{s,s'} C[(x s), (x' s')] · D[(s y), (s' y')]
        let (cm, dm) = (cp.matrix(), dp.matrix());
        let a = Matrix::from_fn(dx * dx, ds * ds, |r, c| {
            let (x, xp) = (r / dx, r % dx);
            let (s, sp) = (c / ds, c % ds);
            cm[(x * ds + s, xp * ds + sp)]
        });
        let b = Matrix::from_fn(ds * ds, dy * dy, |r, c| {
            let (s, sp) = (r / ds, r % ds);
            let (y, yp) = (c / dy, c % dy);
            dm[(s * dy + y, sp * dy + yp)]
        });
        let m = a * b;
        let n = dx * dy;
        let out = Matrix::from_fn(n, n, |r, c| {
            let (x, y) = (r / dy, r % dy);
            let (xp, yp) = (c / dy, c % dy);
            m[(x * dx + xp, y * dy + yp)]
        });

        let mut wires: Vec<Wire> = xs.iter().map(|l| self.op.wire(l).unwrap().clone()).collect();
        wires.extend(ys.iter().map(|l| other.op.wire(l).unwrap().clone()));
        let op = LabeledOperator::new(wires, out)?;
        let keep = |ls: &[Label]| ls.iter().filter(|l| !shared.contains(l)).cloned().collect::<Vec<_>>();
        let mut inputs = keep(&self.inputs);
        inputs.extend(keep(&other.inputs));
        let mut outputs = keep(&self.outputs);
        outputs.extend(keep(&other.outputs));
        ChoiMap::new(op, inputs, outputs)
    }

    /// Left-to-right link of a sequence of maps.
    pub fn link_all(maps: &[ChoiMap]) -> Result<ChoiMap> {
        let (first, rest) = maps
            .split_first()
            .ok_or_else(|| Error::InvalidParameter("nothing to link".into()))?;
        rest.iter().try_fold(first.clone(), |acc, m| acc.link(m))
    }

    /// Same map with the operator's wires reordered.
    pub fn permute_wires(&self, order: &[Label]) -> Result<ChoiMap> {
        Ok(ChoiMap { op: self.op.permute_wires(order)?, ..self.clone() })
    }

    pub fn relabel(&self, map: &[(Label, Label)]) -> Result<ChoiMap> {
        let rename = |l: &Label| {
            map.iter().find(|(f, _)| f == l).map(|(_, t)| t.clone()).unwrap_or_else(|| l.clone())
        };
        ChoiMap::new(
            self.op.relabel(map)?,
            self.inputs.iter().map(rename).collect(),
            self.outputs.iter().map(rename).collect(),
        )
    }

    /// The scalar value of a fully contracted map (no wires left).
    pub fn scalar(&self) -> Option<C64> {
        self.op.wires().is_empty().then(|| self.op.matrix()[(0, 0)])
    }
}
