//! Quantum combs: signatures, reduced combs, validation, instruments and
//! testers, and realization synthesis.
//!
//! A comb with `N` steps lives on the wires of its [`CombSignature`], listed
//! step by step as `inputs₁, outputs₁, inputs₂, outputs₂, …`. In the standard
//! layout every step has one input wire `2k−2` and one output wire `2k−1`;
//! missing wires are dimension-1 factors. Realizations add ancilla wires to
//! the boundary between steps, so a step may carry several wires (or none).

use std::collections::HashSet;

use crate::choi::ChoiMap;
use crate::memory::{certify_step, Decomposition};
use crate::tensor::{eigh, max_abs, numerical_rank, total_dim, Label, LabeledOperator, Wire, WireKind, CLASSICAL_TOL, RANK_TOL};
use crate::{Error, Matrix, Result, Vector, C64};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub inputs: Vec<Wire>,
    pub outputs: Vec<Wire>,
}

impl Step {
    pub fn input_dim(&self) -> usize {
        total_dim(&self.inputs)
    }

    pub fn output_dim(&self) -> usize {
        total_dim(&self.outputs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombSignature {
    steps: Vec<Step>,
}

impl CombSignature {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        let mut seen = HashSet::new();
        for w in steps.iter().flat_map(|s| s.inputs.iter().chain(&s.outputs)) {
            if w.dim == 0 {
                return Err(Error::ZeroDimension { label: w.label.clone() });
            }
            if !seen.insert(w.label.clone()) {
                return Err(Error::DuplicateLabel(w.label.clone()));
            }
        }
        Ok(CombSignature { steps })
    }

    /// Standard layout: step `k` (1-based) reads wire `2k−2` and writes wire
    /// `2k−1`, with the given `(input, output)` dimensions.
    pub fn standard(dims: &[(usize, usize)]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidParameter("a comb needs at least one step".into()));
        }
        Self::new(
            dims.iter()
                .enumerate()
                .map(|(k, &(din, dout))| Step {
                    inputs: vec![Wire::quantum(2 * k, din)],
                    outputs: vec![Wire::quantum(2 * k + 1, dout)],
                })
                .collect(),
        )
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Step `k`, 1-based.
    pub fn step(&self, k: usize) -> &Step {
        &self.steps[k - 1]
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// All wires in canonical order.
    pub fn wires(&self) -> Vec<Wire> {
        self.wires_upto(self.len())
    }

    /// Wires of steps `1..=k`, canonical order.
    pub fn wires_upto(&self, k: usize) -> Vec<Wire> {
        self.steps[..k]
            .iter()
            .flat_map(|s| s.inputs.iter().chain(&s.outputs))
            .cloned()
            .collect()
    }

    /// Wires of steps `k+1..=N`, canonical order.
    pub fn wires_after(&self, k: usize) -> Vec<Wire> {
        self.steps[k..]
            .iter()
            .flat_map(|s| s.inputs.iter().chain(&s.outputs))
            .cloned()
            .collect()
    }

    pub fn input_labels(&self) -> Vec<Label> {
        self.steps.iter().flat_map(|s| s.inputs.iter().map(|w| w.label.clone())).collect()
    }

    pub fn output_labels(&self) -> Vec<Label> {
        self.steps.iter().flat_map(|s| s.outputs.iter().map(|w| w.label.clone())).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.steps.iter().map(Step::input_dim).product()
    }

    pub fn output_dim(&self) -> usize {
        self.steps.iter().map(Step::output_dim).product()
    }

    /// The first `k` steps.
    pub fn truncate(&self, k: usize) -> CombSignature {
        CombSignature { steps: self.steps[..k].to_vec() }
    }

    /// Steps `k+1..=N`.
    pub fn tail(&self, k: usize) -> CombSignature {
        CombSignature { steps: self.steps[k..].to_vec() }
    }

    /// Layout of the testers for this signature: `N+1` steps with trivial
    /// first input and last output, whose outputs feed this comb's inputs
    /// and whose inputs receive its outputs. Wire labels are shared.
    pub fn tester_signature(&self) -> CombSignature {
        let n = self.len();
        let mut steps = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let inputs = if k == 0 { Vec::new() } else { self.steps[k - 1].outputs.clone() };
            let outputs = if k == n { Vec::new() } else { self.steps[k].inputs.clone() };
            steps.push(Step { inputs, outputs });
        }
        CombSignature { steps }
    }

    /// A single channel `in → out` read as the two-step strategy
    /// "encode to memory, then decode": step 1 has the channel inputs and no
    /// output, step 2 has no input and the channel outputs.
    pub fn channel_as_two_steps(inputs: Vec<Wire>, outputs: Vec<Wire>) -> Result<Self> {
        Self::new(vec![
            Step { inputs, outputs: Vec::new() },
            Step { inputs: Vec::new(), outputs },
        ])
    }
}

/// `Q^(k) = Tr_{steps > k}[Q] / ∏_{j>k} dim(inputs_j)`, aligned to the wires
/// of steps `1..=k`.
pub fn reduce_operator(op: &LabeledOperator, sig: &CombSignature, k: usize) -> Result<LabeledOperator> {
    if k > sig.len() {
        return Err(Error::InvalidParameter(format!("step {k} exceeds comb length {}", sig.len())));
    }
    let later: Vec<Label> = sig.wires_after(k).into_iter().map(|w| w.label).collect();
    let div: usize = sig.steps[k..].iter().map(Step::input_dim).product();
    let red = op.partial_trace(&later)?.scale(1.0 / div as f64);
    red.aligned_to(&sig.wires_upto(k))
}

/// Normalization defects `‖Tr_{out_l}[Q^(l)] − I_{in_l} ⊗ Q^(l−1)‖_max` for
/// `l = from+1..=N`. When `anchor` is set it replaces `Q^(0)`.
pub(crate) fn normalization_defects(
    op: &LabeledOperator,
    sig: &CombSignature,
    from: usize,
    anchor: Option<f64>,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut upper = reduce_operator(op, sig, sig.len())?;
    let mut levels = vec![upper.clone()];
    for l in (from..sig.len()).rev() {
        upper = reduce_operator(&upper, &sig.truncate(l + 1), l)?;
        levels.push(upper.clone());
    }
    levels.reverse(); // levels[i] = Q^(from + i)
    for l in from + 1..=sig.len() {
        let ql = &levels[l - from];
        let outs: Vec<Label> = sig.step(l).outputs.iter().map(|w| w.label.clone()).collect();
        let lhs = ql.partial_trace(&outs)?;
        let lower = match (l, anchor) {
            (1, Some(a)) => LabeledOperator::scalar(C64::new(a, 0.0)),
            _ => levels[l - 1 - from].clone(),
        };
        let rhs = lower.extend(&sig.step(l).inputs)?;
        out.push(lhs.max_diff(&rhs)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombValue {
    sig: CombSignature,
    op: LabeledOperator,
}

impl CombValue {
    /// `op` is permuted into the signature's canonical wire order.
    pub fn new(sig: CombSignature, op: LabeledOperator) -> Result<Self> {
        let op = op.aligned_to(&sig.wires())?;
        Ok(CombValue { sig, op })
    }

    pub fn signature(&self) -> &CombSignature {
        &self.sig
    }

    pub fn op(&self) -> &LabeledOperator {
        &self.op
    }

    pub fn steps(&self) -> usize {
        self.sig.len()
    }

    /// The `k`-step reduced comb `R^(k)`; `k = 0` gives the scalar
    /// `Tr[R]/∏ dim(inputs)`.
    pub fn reduce(&self, k: usize) -> Result<CombValue> {
        let op = reduce_operator(&self.op, &self.sig, k)?;
        Ok(CombValue { sig: self.sig.truncate(k), op })
    }

    pub fn with_op(&self, op: LabeledOperator) -> Result<CombValue> {
        CombValue::new(self.sig.clone(), op)
    }

    pub fn scale(&self, s: f64) -> CombValue {
        CombValue { sig: self.sig.clone(), op: self.op.scale(s) }
    }

    /// The comb as a map from all inputs to all outputs.
    pub fn as_choi(&self) -> ChoiMap {
        ChoiMap::new(self.op.clone(), self.sig.input_labels(), self.sig.output_labels())
            .expect("signature partitions the wires")
    }

    /// Rebuild a comb from a map whose wires match `sig`.
    pub fn from_choi(sig: CombSignature, map: &ChoiMap) -> Result<CombValue> {
        let ins: HashSet<Label> = sig.input_labels().into_iter().collect();
        let outs: HashSet<Label> = sig.output_labels().into_iter().collect();
        let mins: HashSet<Label> = map.inputs().iter().cloned().collect();
        let mouts: HashSet<Label> = map.outputs().iter().cloned().collect();
        if ins != mins || outs != mouts {
            return Err(Error::WireMismatch("map directions do not match the comb signature".into()));
        }
        CombValue::new(sig, map.op().clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeterminismReport {
    pub tol: f64,
    pub min_eigenvalue: f64,
    /// `max(0, −λ_min)`.
    pub psd_defect: f64,
    /// Normalization defect at step `k` is `step_defects[k−1]`.
    pub step_defects: Vec<f64>,
    pub classical_defect: f64,
}

impl DeterminismReport {
    pub fn passed(&self) -> bool {
        self.psd_defect <= self.tol
            && self.step_defects.iter().all(|&d| d <= self.tol)
            && self.classical_defect <= CLASSICAL_TOL.max(self.tol)
    }

    /// First step (1-based) whose normalization fails.
    pub fn failing_steps(&self) -> Vec<usize> {
        self.step_defects
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > self.tol)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Positivity plus the recursive normalization with `R^(0) = 1`.
pub fn validate_deterministic(r: &CombValue, tol: f64) -> Result<DeterminismReport> {
    let min_eigenvalue = r.op.min_eigenvalue()?;
    Ok(DeterminismReport {
        tol,
        min_eigenvalue,
        psd_defect: (-min_eigenvalue).max(0.0),
        step_defects: normalization_defects(&r.op, &r.sig, 0, Some(1.0))?,
        classical_defect: r.op.classical_defect(),
    })
}

/// `0 ≤ S ≤ R` with `R` deterministic.
pub fn validate_probabilistic(s: &CombValue, r: &CombValue, tol: f64) -> Result<bool> {
    if s.sig != r.sig {
        return Err(Error::WireMismatch("probabilistic comb and its bound have different signatures".into()));
    }
    if !validate_deterministic(r, tol)?.passed() {
        return Ok(false);
    }
    Ok(s.op.is_psd(tol)? && r.op.sub(&s.op)?.is_psd(tol)?)
}

/// A generalized instrument: labelled probabilistic combs on one signature.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    pub branches: Vec<(String, CombValue)>,
}

impl Instrument {
    pub fn new(branches: Vec<(String, CombValue)>) -> Result<Self> {
        let first = branches
            .first()
            .ok_or_else(|| Error::InvalidParameter("an instrument needs at least one branch".into()))?;
        if branches.iter().any(|(_, b)| b.sig != first.1.sig) {
            return Err(Error::WireMismatch("instrument branches have different signatures".into()));
        }
        Ok(Instrument { branches })
    }

    /// A tester for combs with signature `target`, from branch operators
    /// laid out on `target.tester_signature()`.
    pub fn tester(target: &CombSignature, branches: Vec<(String, LabeledOperator)>) -> Result<Self> {
        let sig = target.tester_signature();
        let branches = branches
            .into_iter()
            .map(|(name, op)| Ok((name, CombValue::new(sig.clone(), op)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(branches)
    }

    pub fn signature(&self) -> &CombSignature {
        &self.branches[0].1.sig
    }

    /// `Σᵢ Rᵢ`.
    pub fn total(&self) -> Result<CombValue> {
        let mut acc = self.branches[0].1.op.clone();
        for (_, b) in &self.branches[1..] {
            acc = acc.add(&b.op)?;
        }
        CombValue::new(self.signature().clone(), acc)
    }

    pub fn is_tester(&self) -> bool {
        let sig = self.signature();
        !sig.is_empty() && sig.step(1).input_dim() == 1 && sig.step(sig.len()).output_dim() == 1
    }
}

/// Every branch positive and the branches summing to a deterministic comb.
pub fn validate_instrument(inst: &Instrument, tol: f64) -> Result<bool> {
    for (_, b) in &inst.branches {
        if !b.op.is_psd(tol)? {
            return Ok(false);
        }
    }
    Ok(validate_deterministic(&inst.total()?, tol)?.passed())
}

/// Outcome probabilities `pᵢ = R * Tᵢ` of a tester applied to a comb.
pub fn tester_probs(tester: &Instrument, r: &CombValue) -> Result<Vec<f64>> {
    if tester.signature() != &r.sig.tester_signature() {
        return Err(Error::WireMismatch("tester layout does not match the comb".into()));
    }
    let rc = r.as_choi();
    tester
        .branches
        .iter()
        .map(|(_, t)| {
            let v = rc.link(&t.as_choi())?.scalar().expect("full contraction");
            Ok(v.re)
        })
        .collect()
}

/// The two halves produced by [`split_at`].
#[derive(Clone, Debug)]
pub struct Split {
    /// First `k` steps; step `k` additionally outputs the quantum and
    /// classical ancillas.
    pub s: CombValue,
    /// Remaining steps; step `k+1` additionally reads the ancillas.
    pub t: CombValue,
    pub quantum_dim: usize,
    pub classical_dim: usize,
    pub quantum_label: Label,
    pub classical_label: Label,
    /// Whether some branch needed the trace-preserving completion on the
    /// part of the ancilla outside its support.
    pub completed: bool,
}

impl Split {
    pub fn link(&self) -> Result<ChoiMap> {
        self.s.as_choi().link(&self.t.as_choi())
    }
}

fn ancilla_labels(r: &CombValue, k: usize) -> Result<(Label, Label)> {
    let q = Label::new(format!("A{k}q"));
    let c = Label::new(format!("A{k}c"));
    for l in [&q, &c] {
        if r.op.has_label(l) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok((q, c))
}

/// Cut a comb after step `k` through a memory of quantum dimension
/// `maxⱼ rank(Qⱼ^(k))` and classical dimension `|{Qⱼ}|`:
///
/// `S = Σⱼ |Qⱼ^(k)½⟩⟩⟨⟨Qⱼ^(k)½| ⊗ |j⟩⟨j|`,
/// `T = Σⱼ |j⟩⟨j| ⊗ Qⱼ^(k)−½ Qⱼ Qⱼ^(k)−½`,
///
/// with each support compressed into the first `rank(Qⱼ^(k))` basis vectors
/// of the quantum ancilla. On the rest of the ancilla `T` discards the
/// ancilla and outputs maximally mixed states.
pub fn split_at(r: &CombValue, k: usize, q: &Decomposition, tol: f64) -> Result<Split> {
    let n = r.steps();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!("cut step must lie in 1..{n}, got {k}")));
    }
    if q.cut != k || q.target.sig != r.sig {
        return Err(Error::Certification("decomposition was built for a different comb or cut".into()));
    }
    let max_rank = q
        .parts
        .iter()
        .map(|p| reduce_operator(p, &r.sig, k)?.rank())
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let cert = certify_step(r, k, q, max_rank.max(1), tol)?;
    let d = cert.upper(k).unwrap_or(1).max(1);
    let m = q.parts.len();
    let (ql, cl) = ancilla_labels(r, k)?;

    let xw = r.sig.wires_upto(k);
    let yw = r.sig.wires_after(k);
    let dx = total_dim(&xw);
    let dy = total_dim(&yw);
    let out_dim: usize = r.sig.steps[k..].iter().map(Step::output_dim).product();

    let mut s_mat = Matrix::zeros(dx * d * m, dx * d * m);
    // T on [Ac, Aq, Y]
    let mut t_mat = Matrix::zeros(m * d * dy, m * d * dy);
    let mut completed = false;
    for (j, part) in q.parts.iter().enumerate() {
        let part = part.aligned_to(&r.sig.wires())?;
        let red = reduce_operator(&part, &r.sig, k)?;
        let (vals, vecs) = eigh(red.matrix())?;
        let thr = RANK_TOL * vals.iter().fold(1.0f64, |a, &v| a.max(v));
        let support: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > thr).collect();
        let rj = support.len();
        debug_assert_eq!(rj, numerical_rank(&vals, RANK_TOL));

        // ψⱼ[x, s] = √λ_s v_s[x]
        let mut psi = Vector::zeros(dx * d * m);
        for (s, &i) in support.iter().enumerate() {
            let sq = vals[i].sqrt();
            for x in 0..dx {
                psi[(x * d + s) * m + j] = vecs[(x, i)] * sq;
            }
        }
        s_mat += &psi * psi.adjoint();

        // T block G = (K ⊗ I_Y) Q (K† ⊗ I_Y), K = Λ^{-½} V†
        let kmat = Matrix::from_fn(rj, dx, |s, x| vecs[(x, support[s])].conj() / vals[support[s]].sqrt());
        let kext = kmat.kronecker(&Matrix::identity(dy, dy));
        let g = &kext * part.matrix() * kext.adjoint();
        let base = j * d * dy;
        for s in 0..rj {
            for sp in 0..rj {
                for y in 0..dy {
                    for yp in 0..dy {
                        t_mat[(base + s * dy + y, base + sp * dy + yp)] = g[(s * dy + y, sp * dy + yp)];
                    }
                }
            }
        }
        if rj < d {
            completed = true;
            let fill = C64::new(1.0 / out_dim as f64, 0.0);
            for s in rj..d {
                for y in 0..dy {
                    t_mat[(base + s * dy + y, base + s * dy + y)] = fill;
                }
            }
        }
    }

    let qwire = Wire::quantum(ql.clone(), d);
    let cwire = Wire::classical(cl.clone(), m);

    let mut s_wires = xw.clone();
    s_wires.extend([qwire.clone(), cwire.clone()]);
    let mut s_steps = r.sig.steps[..k].to_vec();
    s_steps[k - 1].outputs.extend([qwire.clone(), cwire.clone()]);
    let s = CombValue::new(CombSignature::new(s_steps)?, LabeledOperator::new(s_wires, s_mat)?)?;

    let mut t_wires = vec![cwire.clone(), qwire.clone()];
    t_wires.extend(yw);
    let mut t_steps = r.sig.steps[k..].to_vec();
    t_steps[0].inputs.splice(0..0, [qwire, cwire]);
    let t = CombValue::new(CombSignature::new(t_steps)?, LabeledOperator::new(t_wires, t_mat)?)?;

    Ok(Split { s, t, quantum_dim: d, classical_dim: m, quantum_label: ql, classical_label: cl, completed })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AncillaDims {
    pub quantum: usize,
    pub classical: usize,
}

/// Channels `C_k : (inputs_k, A_{k−1}) → (outputs_k, A_k)` whose link is the
/// comb.
#[derive(Clone, Debug)]
pub struct Realization {
    pub channels: Vec<ChoiMap>,
    /// Memory between step `k` and `k+1` is `ancillas[k−1]`.
    pub ancillas: Vec<AncillaDims>,
}

impl Realization {
    pub fn link(&self) -> Result<ChoiMap> {
        ChoiMap::link_all(&self.channels)
    }

    /// Link the channels and arrange the result on `sig`.
    pub fn reproduce(&self, sig: &CombSignature) -> Result<CombValue> {
        CombValue::from_choi(sig.clone(), &self.link()?)
    }
}

/// Realization with memory `rank(R^(k))` after each step `k`, obtained by
/// cutting at `k = N−1, …, 1` with the trivial decomposition `{R}`.
pub fn realize(r: &CombValue, tol: f64) -> Result<Realization> {
    let report = validate_deterministic(r, tol)?;
    if !report.passed() {
        return Err(Error::InvalidComb(format!(
            "psd defect {:.3e}, normalization defects {:?} (tol {tol:.1e})",
            report.psd_defect, report.step_defects
        )));
    }
    let n = r.steps();
    let mut current = r.clone();
    let mut channels = Vec::with_capacity(n);
    let mut ancillas = Vec::with_capacity(n.saturating_sub(1));
    for k in (1..n).rev() {
        let trivial = Decomposition::new(current.clone(), k, vec![current.op.clone()])?;
        let split = split_at(&current, k, &trivial, tol)?;
        ancillas.push(AncillaDims { quantum: split.quantum_dim, classical: split.classical_dim });
        channels.push(split.t.as_choi());
        current = split.s;
    }
    channels.push(current.as_choi());
    channels.reverse();
    ancillas.reverse();
    Ok(Realization { channels, ancillas })
}

/// Largest modulus among entries of `a − b` after aligning wires.
pub fn max_defect(a: &CombValue, b: &CombValue) -> Result<f64> {
    Ok(max_abs(&a.op.sub(&b.op)?.into_matrix()))
}

/// Kind of every wire in the comb that is classical.
pub fn classical_labels(sig: &CombSignature) -> Vec<Label> {
    sig.wires().into_iter().filter(|w| w.kind == WireKind::Classical).map(|w| w.label).collect()
}
