//! Memory-cost certification.
//!
//! A comb can be realized with a `d`-dimensional quantum memory after step
//! `k` exactly when it splits into parts that are deterministic after step
//! `k` and whose reduced operators at step `k` have rank at most `d`. This
//! module verifies such decompositions (single cuts and nested families),
//! bounds the cost of single channels, and provides the closed-form channel
//! families used as benchmarks.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::choi::ChoiMap;
use crate::comb::{normalization_defects, reduce_operator, CombSignature, CombValue};
use crate::random::random_unitary;
use crate::tensor::{
    eigh, max_abs, schmidt_coefficients, schmidt_rank, singular_values, unvec, Label, LabeledOperator, Wire,
    RANK_TOL,
};
use crate::{Error, Matrix, Result, Vector, C64};

/// Snapping window for closed-form thresholds.
pub const SNAP_TOL: f64 = 1e-9;

/// Parts `Qⱼ` summing to a comb, cut after step `cut`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub target: CombValue,
    pub cut: usize,
    pub parts: Vec<LabeledOperator>,
}

impl Decomposition {
    /// Parts are aligned to the target's wire order.
    pub fn new(target: CombValue, cut: usize, parts: Vec<LabeledOperator>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("a decomposition needs at least one part".into()));
        }
        let wires = target.signature().wires();
        let parts = parts.iter().map(|p| p.aligned_to(&wires)).collect::<Result<Vec<_>>>()?;
        Ok(Decomposition { target, cut, parts })
    }
}

/// Parts `Q_{i⃗}` indexed by one index per step in `steps` (ascending).
#[derive(Clone, Debug)]
pub struct NestedDecomposition {
    pub target: CombValue,
    pub steps: Vec<usize>,
    pub parts: Vec<(Vec<usize>, LabeledOperator)>,
}

impl NestedDecomposition {
    pub fn new(target: CombValue, steps: Vec<usize>, parts: Vec<(Vec<usize>, LabeledOperator)>) -> Result<Self> {
        if steps.is_empty() || steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("steps must be nonempty and strictly increasing".into()));
        }
        if parts.is_empty() {
            return Err(Error::InvalidParameter("a decomposition needs at least one part".into()));
        }
        let wires = target.signature().wires();
        let parts = parts
            .into_iter()
            .map(|(idx, p)| {
                if idx.len() != steps.len() {
                    return Err(Error::InvalidParameter(format!(
                        "index {idx:?} has {} entries for {} steps",
                        idx.len(),
                        steps.len()
                    )));
                }
                Ok((idx, p.aligned_to(&wires)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NestedDecomposition { target, steps, parts })
    }

    /// Sums of parts sharing each index prefix of length `level`.
    pub fn prefix_sums(&self, level: usize) -> Result<BTreeMap<Vec<usize>, LabeledOperator>> {
        let mut out: BTreeMap<Vec<usize>, LabeledOperator> = BTreeMap::new();
        for (idx, p) in &self.parts {
            let key = idx[..level].to_vec();
            let next = match out.remove(&key) {
                Some(acc) => acc.add(p)?,
                None => p.clone(),
            };
            out.insert(key, next);
        }
        Ok(out)
    }

    /// Single-cut view: every part keyed only by its full index.
    pub fn single(d: &Decomposition) -> Self {
        NestedDecomposition {
            target: d.target.clone(),
            steps: vec![d.cut],
            parts: d.parts.iter().cloned().enumerate().map(|(j, p)| (vec![j], p)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepBound {
    pub step: usize,
    pub lower: usize,
    pub upper: usize,
}

#[derive(Clone, Debug)]
pub enum Evidence {
    /// Parts deterministic after `cut` with the listed reduced ranks.
    Decomposition { cut: usize, parts: Vec<LabeledOperator>, ranks: Vec<usize> },
    Nested { steps: Vec<usize>, parts: Vec<(Vec<usize>, LabeledOperator)> },
    /// A pure target forces proportional parts, so the Schmidt rank across
    /// the cut is a lower bound.
    PureSchmidt { step: usize, schmidt_rank: usize },
    /// Smallest eigenvalue of the partial transpose of a channel's Choi
    /// operator; `exact` when PPT implies separability at these dimensions.
    PptWitness { min_pt_eigenvalue: f64, exact: bool },
    /// Rank-one Kraus vectors with bounded Schmidt rank.
    KrausFamily { vectors: Vec<Vector>, schmidt_ranks: Vec<usize> },
    SymmetryProjectors { projectors: Vec<LabeledOperator>, multiplicities: Vec<usize> },
    ClosedForm { family: String, dimension: usize, parameter: f64 },
}

/// Interval on the quantum memory dimension at each certified step.
#[derive(Clone, Debug)]
pub struct CostCertificate {
    pub bounds: Vec<StepBound>,
    pub evidence: Vec<Evidence>,
    pub notes: Vec<String>,
}

impl CostCertificate {
    pub fn bound(&self, step: usize) -> Option<StepBound> {
        self.bounds.iter().copied().find(|b| b.step == step)
    }

    pub fn upper(&self, step: usize) -> Option<usize> {
        self.bound(step).map(|b| b.upper)
    }

    pub fn lower(&self, step: usize) -> Option<usize> {
        self.bound(step).map(|b| b.lower)
    }

    pub fn is_exact(&self, step: usize) -> bool {
        self.bound(step).is_some_and(|b| b.lower == b.upper)
    }

    /// Cost in qubits, `log₂ d_hi`.
    pub fn log2_upper(&self, step: usize) -> Option<f64> {
        self.upper(step).map(|d| (d as f64).log2())
    }

    /// Run the decomposition evidence through [`certify_step`] /
    /// [`certify_multi`] again.
    pub fn reverify(&self, r: &CombValue, tol: f64) -> Result<bool> {
        for e in &self.evidence {
            let ok = match e {
                Evidence::Decomposition { cut, parts, ranks } => {
                    let d = ranks.iter().copied().max().unwrap_or(1).max(1);
                    let q = Decomposition::new(r.clone(), *cut, parts.clone())?;
                    certify_step(r, *cut, &q, d, tol).is_ok()
                }
                Evidence::Nested { steps, parts } => {
                    let dims: Vec<usize> = steps.iter().map(|&s| self.upper(s).unwrap_or(1)).collect();
                    let q = NestedDecomposition::new(r.clone(), steps.clone(), parts.clone())?;
                    certify_multi(r, &q, &dims, tol).is_ok()
                }
                _ => true,
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetAfterReport {
    pub tol: f64,
    /// `(l, ‖Tr_{out_l}[Q^(l)] − I ⊗ Q^(l−1)‖_max)` for `l = k+1..=N`.
    pub defects: Vec<(usize, f64)>,
    /// For `k = 0`, `max(0, Q^(0) − 1)`.
    pub scalar_excess: Option<f64>,
}

impl DetAfterReport {
    pub fn passed(&self) -> bool {
        self.defects.iter().all(|&(_, d)| d <= self.tol) && self.scalar_excess.is_none_or(|e| e <= self.tol)
    }
}

/// Normalization of `q` for every step after `k`. With `k = 0` the
/// remaining condition `Q^(0) ≤ 1` is checked too; for `k ≥ 1` the bound
/// `Q^(k) ≤ R` follows from membership in a family summing to a comb.
pub fn verify_det_after_k(q: &LabeledOperator, sig: &CombSignature, k: usize, tol: f64) -> Result<DetAfterReport> {
    if k > sig.len() {
        return Err(Error::InvalidParameter(format!("step {k} exceeds comb length {}", sig.len())));
    }
    let defects = normalization_defects(q, sig, k, None)?
        .into_iter()
        .enumerate()
        .map(|(i, d)| (k + 1 + i, d))
        .collect();
    let scalar_excess = if k == 0 {
        let q0 = reduce_operator(q, sig, 0)?.trace().re;
        Some((q0 - 1.0).max(0.0))
    } else {
        None
    };
    Ok(DetAfterReport { tol, defects, scalar_excess })
}

/// Lower bound at step `k` from a pure target: all parts are proportional
/// to it, so every realization needs `rank(R^(k))`.
fn pure_lower_bound(r: &CombValue, k: usize) -> Result<Option<usize>> {
    let (vals, vecs) = eigh(r.op().matrix())?;
    let top = vals.last().copied().unwrap_or(0.0);
    if top <= 0.0 || vals[..vals.len() - 1].iter().any(|&v| v.abs() > RANK_TOL * top.max(1.0)) {
        return Ok(None);
    }
    let v = vecs.column(vals.len() - 1).into_owned();
    let wires = r.signature().wires();
    let left: Vec<Label> = r.signature().wires_upto(k).into_iter().map(|w| w.label).collect();
    Ok(Some(schmidt_rank(&v, &wires, &left, RANK_TOL)?))
}

/// Verify that `q` certifies a `d`-dimensional memory after step `k`.
pub fn certify_step(r: &CombValue, k: usize, q: &Decomposition, d: usize, tol: f64) -> Result<CostCertificate> {
    let sig = r.signature();
    if k == 0 || k >= sig.len() {
        return Err(Error::InvalidParameter(format!("cut step must lie in 1..{}, got {k}", sig.len())));
    }
    if q.cut != k {
        return Err(Error::Certification(format!("decomposition is cut at step {}, not {k}", q.cut)));
    }
    let mut sum = q.parts[0].clone();
    for p in &q.parts[1..] {
        sum = sum.add(p)?;
    }
    let sum_defect = sum.max_diff(r.op())?;
    if sum_defect > tol {
        return Err(Error::Certification(format!("sum defect {sum_defect:.3e} exceeds tol {tol:.1e}")));
    }
    let mut ranks = Vec::with_capacity(q.parts.len());
    for (j, p) in q.parts.iter().enumerate() {
        let lam = p.min_eigenvalue()?;
        if lam < -tol {
            return Err(Error::Certification(format!(
                "part {j} is not positive: min eigenvalue {lam:.3e} (tol {tol:.1e})"
            )));
        }
        let rep = verify_det_after_k(p, sig, k, tol)?;
        if !rep.passed() {
            let (l, worst) = rep.defects.iter().copied().fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
            return Err(Error::Certification(format!(
                "part {j} normalization defect {worst:.3e} at step {l} (tol {tol:.1e})"
            )));
        }
        let rank = reduce_operator(p, sig, k)?.rank()?;
        if rank > d {
            return Err(Error::Certification(format!("part {j} reduced rank {rank} exceeds memory dimension {d}")));
        }
        ranks.push(rank);
    }
    let upper = ranks.iter().copied().max().unwrap_or(1).max(1);
    let mut evidence = vec![Evidence::Decomposition { cut: k, parts: q.parts.clone(), ranks }];
    let lower = match pure_lower_bound(r, k)? {
        Some(s) => {
            evidence.push(Evidence::PureSchmidt { step: k, schmidt_rank: s });
            s
        }
        None => 1,
    };
    Ok(CostCertificate {
        bounds: vec![StepBound { step: k, lower: lower.min(upper), upper }],
        evidence,
        notes: Vec::new(),
    })
}

/// Verify a nested family: for every step `k_t` in `q.steps` and every
/// index prefix of length `t`, the prefix sum is deterministic after `k_t`
/// with reduced rank at most `dims[t]`.
pub fn certify_multi(r: &CombValue, q: &NestedDecomposition, dims: &[usize], tol: f64) -> Result<CostCertificate> {
    let sig = r.signature();
    if dims.len() != q.steps.len() {
        return Err(Error::InvalidParameter(format!("{} dimensions for {} steps", dims.len(), q.steps.len())));
    }
    if let Some(&k) = q.steps.iter().find(|&&k| k == 0 || k >= sig.len()) {
        return Err(Error::InvalidParameter(format!("cut step must lie in 1..{}, got {k}", sig.len())));
    }
    let total = q.prefix_sums(0)?.remove(&Vec::new()).expect("nonempty");
    let sum_defect = total.max_diff(r.op())?;
    if sum_defect > tol {
        return Err(Error::Certification(format!("sum defect {sum_defect:.3e} exceeds tol {tol:.1e}")));
    }
    for (idx, p) in &q.parts {
        let lam = p.min_eigenvalue()?;
        if lam < -tol {
            return Err(Error::Certification(format!(
                "part {idx:?} is not positive: min eigenvalue {lam:.3e} (tol {tol:.1e})"
            )));
        }
    }
    let mut bounds = Vec::with_capacity(q.steps.len());
    for (t, (&k, &d)) in q.steps.iter().zip(dims).enumerate() {
        let mut worst = 1;
        for (prefix, p) in q.prefix_sums(t + 1)? {
            let rep = verify_det_after_k(&p, sig, k, tol)?;
            if !rep.passed() {
                return Err(Error::Certification(format!(
                    "prefix {prefix:?} is not deterministic after step {k}: defects {:?} (tol {tol:.1e})",
                    rep.defects
                )));
            }
            let rank = reduce_operator(&p, sig, k)?.rank()?;
            if rank > d {
                return Err(Error::Certification(format!(
                    "prefix {prefix:?} reduced rank {rank} at step {k} exceeds memory dimension {d}"
                )));
            }
            worst = worst.max(rank);
        }
        let lower = pure_lower_bound(r, k)?.unwrap_or(1).min(worst);
        bounds.push(StepBound { step: k, lower, upper: worst });
    }
    Ok(CostCertificate {
        bounds,
        evidence: vec![Evidence::Nested { steps: q.steps.clone(), parts: q.parts.clone() }],
        notes: Vec::new(),
    })
}

/// Trivial bound `rank(R^(k))` from the decomposition `{R}`, tightened to
/// an exact value when `R` is pure.
pub fn comb_cost_bounds(r: &CombValue, k: usize, tol: f64) -> Result<CostCertificate> {
    let q = Decomposition::new(r.clone(), k, vec![r.op().clone()])?;
    let d = reduce_operator(r.op(), r.signature(), k)?.rank()?;
    certify_step(r, k, &q, d.max(1), tol)
}

/// A channel as the two-step strategy "encode into memory, then decode".
/// The memory after step 1 is the channel's cost.
pub fn channel_as_two_step(c: &ChoiMap) -> Result<CombValue> {
    let sig = CombSignature::channel_as_two_steps(c.input_wires(), c.output_wires())?;
    CombValue::new(sig, c.op().clone())
}

fn channel_pt_min(c: &ChoiMap) -> Result<f64> {
    c.op().partial_transpose(c.inputs())?.min_eigenvalue()
}

/// Bounds on the memory needed to split a channel into an encoder and a
/// decoder. Upper: largest Schmidt rank over the eigenvectors of `C`.
/// Lower: 2 when the partial transpose has a negative eigenvalue. Exact for
/// pure `C` (the Schmidt rank) and, under PPT, when `d_in·d_out ≤ 6`.
pub fn channel_cost_bounds(c: &ChoiMap, tol: f64) -> Result<CostCertificate> {
    let (vals, vecs) = eigh(c.op().matrix())?;
    let top = vals.last().copied().unwrap_or(0.0);
    let thr = RANK_TOL * top.max(1.0);
    let wires = c.op().wires().to_vec();
    let support: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > thr).collect();
    let mut vectors = Vec::with_capacity(support.len());
    let mut ranks = Vec::with_capacity(support.len());
    for &i in &support {
        let v = vecs.column(i).scale(vals[i].sqrt());
        ranks.push(schmidt_rank(&v, &wires, c.inputs(), RANK_TOL)?);
        vectors.push(v);
    }
    let mut upper = ranks.iter().copied().max().unwrap_or(1).max(1);
    let mut evidence = vec![Evidence::KrausFamily { vectors, schmidt_ranks: ranks.clone() }];
    let mut notes = Vec::new();
    let lower;
    if support.len() == 1 {
        lower = upper;
        evidence.push(Evidence::PureSchmidt { step: 1, schmidt_rank: upper });
    } else {
        let lam = channel_pt_min(c)?;
        let small = c.input_dim() * c.output_dim() <= 6;
        let npt = lam < -tol;
        evidence.push(Evidence::PptWitness { min_pt_eigenvalue: lam, exact: small });
        if npt {
            lower = 2.min(upper);
        } else if small {
            lower = 1;
            upper = 1;
            notes.push("PPT implies separability at these dimensions".into());
        } else {
            lower = 1;
        }
    }
    Ok(CostCertificate { bounds: vec![StepBound { step: 1, lower, upper }], evidence, notes })
}

/// [`channel_cost_bounds`] with the upper bound tightened by
/// [`kraus_rank_minimize`] for every target dimension between the bounds.
pub fn channel_cost_search(c: &ChoiMap, restarts: usize, seed: u64, tol: f64) -> Result<CostCertificate> {
    let mut cert = channel_cost_bounds(c, tol)?;
    let b = cert.bounds[0];
    for target in b.lower..b.upper {
        if let Some(fam) = kraus_rank_minimize(c, target, restarts, seed)? {
            cert.bounds[0].upper = target;
            cert.evidence.push(Evidence::KrausFamily {
                schmidt_ranks: fam.schmidt_ranks()?,
                vectors: fam.vectors,
            });
            break;
        }
    }
    Ok(cert)
}

/// Rank-one vectors `|Kᵢ⟩⟩` with `Σ |Kᵢ⟩⟩⟨⟨Kᵢ| = C`.
#[derive(Clone, Debug)]
pub struct KrausFamily {
    pub wires: Vec<Wire>,
    pub inputs: Vec<Label>,
    pub vectors: Vec<Vector>,
}

impl KrausFamily {
    pub fn parts(&self) -> Result<Vec<LabeledOperator>> {
        self.vectors.iter().map(|v| LabeledOperator::from_ket(self.wires.clone(), v)).collect()
    }

    pub fn sum(&self) -> Result<LabeledOperator> {
        let n = self.vectors.first().map_or(1, |v| v.len());
        let mut m = Matrix::zeros(n, n);
        for v in &self.vectors {
            m += v * v.adjoint();
        }
        LabeledOperator::new(self.wires.clone(), m)
    }

    pub fn schmidt_ranks(&self) -> Result<Vec<usize>> {
        self.vectors.iter().map(|v| schmidt_rank(v, &self.wires, &self.inputs, RANK_TOL)).collect()
    }

    /// Schmidt coefficients of every vector, descending.
    pub fn schmidt_coefficients(&self) -> Result<Vec<Vec<f64>>> {
        self.vectors.iter().map(|v| schmidt_coefficients(v, &self.wires, &self.inputs)).collect()
    }

    /// The family as a decomposition of the channel's two-step comb.
    pub fn decomposition(&self, c: &ChoiMap) -> Result<Decomposition> {
        Decomposition::new(channel_as_two_step(c)?, 1, self.parts()?)
    }
}

/// Largest tail singular value tolerated as zero by the search.
const KRAUS_TAIL_TOL: f64 = 1e-8;
const KRAUS_SWEEPS: usize = 60;
const KRAUS_STALL: f64 = 1e-4;

struct KrausSearch {
    din: usize,
    dout: usize,
    target: usize,
}

impl KrausSearch {
    /// Squared singular values beyond the target, from the smaller Gram
    /// matrix.
    fn tail(&self, v: &Vector) -> f64 {
        if self.target >= self.din.min(self.dout) {
            return 0.0;
        }
        let m = unvec(v, self.din, self.dout).expect("shape");
        let g = if self.din <= self.dout { &m * m.adjoint() } else { m.adjoint() * &m };
        if g.nrows() == 2 {
            let (a, d, b) = (g[(0, 0)].re, g[(1, 1)].re, g[(0, 1)].norm());
            let top = 0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b * b).sqrt();
            return (a + d - top).max(0.0);
        }
        let mut ev: Vec<f64> = g.symmetric_eigenvalues().iter().map(|&x| x.max(0.0)).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev.iter().skip(self.target).sum()
    }

    fn rotate(a: &Vector, b: &Vector, theta: f64, phi: f64) -> (Vector, Vector) {
        let (s, c) = theta.sin_cos();
        let e = C64::from_polar(1.0, phi);
        (a.scale(c) - b * (e * s), a * (e.conj() * s) + b.scale(c))
    }

    fn pair_cost(&self, a: &Vector, b: &Vector, theta: f64, phi: f64) -> f64 {
        let (x, y) = Self::rotate(a, b, theta, phi);
        self.tail(&x) + self.tail(&y)
    }

    /// Best 2×2 rotation of a pair: coarse grid, then pattern search.
    fn optimize_pair(&self, a: &Vector, b: &Vector) -> (f64, f64, f64) {
        let mut best = (self.pair_cost(a, b, 0.0, 0.0), 0.0, 0.0);
        let pi = std::f64::consts::PI;
        for i in 0..8 {
            for j in 0..8 {
                let (t, p) = (i as f64 * pi / 8.0, j as f64 * pi / 4.0);
                let f = self.pair_cost(a, b, t, p);
                if f < best.0 {
                    best = (f, t, p);
                }
            }
        }
        let mut step = pi / 16.0;
        while step > 1e-9 && best.0 > KRAUS_TAIL_TOL * KRAUS_TAIL_TOL {
            let mut moved = false;
            for (dt, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                let f = self.pair_cost(a, b, best.1 + dt, best.2 + dp);
                if f < best.0 {
                    best = (f, best.1 + dt, best.2 + dp);
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        best
    }

    fn run(&self, mut ks: Vec<Vector>) -> Vec<Vector> {
        let m = ks.len();
        let mut total: f64 = ks.iter().map(|k| self.tail(k)).sum();
        for _ in 0..KRAUS_SWEEPS {
            for a in 0..m {
                for b in a + 1..m {
                    let before = self.tail(&ks[a]) + self.tail(&ks[b]);
                    let (f, t, p) = self.optimize_pair(&ks[a], &ks[b]);
                    if f < before {
                        let (x, y) = Self::rotate(&ks[a], &ks[b], t, p);
                        ks[a] = x;
                        ks[b] = y;
                    }
                }
            }
            let now: f64 = ks.iter().map(|k| self.tail(k)).sum();
            if now.sqrt() <= KRAUS_TAIL_TOL || total - now <= KRAUS_STALL * total {
                break;
            }
            total = now;
        }
        ks
    }
}

/// Search for a rank-one decomposition of `C` whose vectors all have
/// Schmidt rank at most `d_target`, by unitary mixing of the eigen-Kraus
/// family padded to twice its length. Restart 0 starts from the eigenbasis;
/// later restarts start from seeded Haar-random mixings. `None` means the
/// budget ran out, not that no such decomposition exists.
pub fn kraus_rank_minimize(c: &ChoiMap, d_target: usize, restarts: usize, seed: u64) -> Result<Option<KrausFamily>> {
    if d_target == 0 {
        return Err(Error::InvalidParameter("target dimension must be positive".into()));
    }
    let mut order: Vec<Label> = c.inputs().to_vec();
    order.extend(c.outputs().iter().cloned());
    let op = c.op().permute_wires(&order)?;
    let (din, dout) = (c.input_dim(), c.output_dim());
    let (vals, vecs) = eigh(op.matrix())?;
    let top = vals.last().copied().unwrap_or(0.0);
    let base: Vec<Vector> = (0..vals.len())
        .filter(|&i| vals[i] > RANK_TOL * top.max(1.0))
        .map(|i| vecs.column(i).scale(vals[i].sqrt()))
        .collect();
    let r = base.len();
    if r == 0 {
        return Ok(None);
    }
    let m = 2 * r;
    let search = KrausSearch { din, dout, target: d_target };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..restarts.max(1) {
        let mix = if attempt == 0 { Matrix::identity(m, m) } else { random_unitary(&mut rng, m) };
        let start: Vec<Vector> = (0..m)
            .map(|i| {
                let mut v = Vector::zeros(din * dout);
                for (s, b) in base.iter().enumerate() {
                    v += b * mix[(i, s)];
                }
                v
            })
            .collect();
        let ks = search.run(start);
        let worst = ks
            .iter()
            .map(|k| singular_values(&unvec(k, din, dout).expect("shape")).get(d_target).copied().unwrap_or(0.0))
            .fold(0.0f64, f64::max);
        if worst <= KRAUS_TAIL_TOL {
            let ks: Vec<Vector> = ks.into_iter().filter(|k| k.norm() > 0.0).collect();
            let fam = KrausFamily { wires: op.wires().to_vec(), inputs: c.inputs().to_vec(), vectors: ks };
            if fam.schmidt_ranks()?.iter().all(|&s| s <= d_target) {
                return Ok(Some(fam));
            }
        }
    }
    Ok(None)
}

fn snap(x: f64, targets: &[f64]) -> f64 {
    targets.iter().copied().find(|t| (x - t).abs() <= SNAP_TOL).unwrap_or(x)
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be at least 2, got {d}")));
    }
    Ok(())
}

fn channel_wires(d: usize) -> (Wire, Wire) {
    (Wire::quantum("0", d), Wire::quantum("1", d))
}

/// `|I⟩⟩⟨⟨I|` on `d ⊗ d`.
fn max_entangled_matrix(d: usize) -> Matrix {
    let mut m = Matrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] = C64::new(1.0, 0.0);
        }
    }
    m
}

fn swap_matrix(d: usize) -> Matrix {
    let mut m = Matrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + j, j * d + i)] = C64::new(1.0, 0.0);
        }
    }
    m
}

fn two_wire_map(d: usize, m: Matrix) -> Result<ChoiMap> {
    let (a, b) = channel_wires(d);
    ChoiMap::new(LabeledOperator::new(vec![a.clone(), b.clone()], m)?, vec![a.label], vec![b.label])
}

/// `U ⊗ U*`-covariant channel `C_α = (α/d)Φ + β(I − Φ/d)` with
/// `Φ = |I⟩⟩⟨⟨I|` and `α + (d²−1)β = d`.
pub fn isotropic_channel(d: usize, alpha: f64) -> Result<ChoiMap> {
    check_dim(d)?;
    let df = d as f64;
    if !(alpha >= -SNAP_TOL && alpha <= df + SNAP_TOL) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, {d}], got {alpha}")));
    }
    let alpha = alpha.clamp(0.0, df);
    let beta = (df - alpha) / (df * df - 1.0);
    let phi = max_entangled_matrix(d);
    let id = Matrix::identity(d * d, d * d);
    let m = phi.scale(alpha / df) + (id - phi.scale(1.0 / df)).scale(beta);
    two_wire_map(d, m)
}

/// `⌈α⌉` (at least 1), with `α` snapped to integers within [`SNAP_TOL`].
pub fn isotropic_cost(d: usize, alpha: f64) -> Result<usize> {
    check_dim(d)?;
    let df = d as f64;
    if !(alpha >= -SNAP_TOL && alpha <= df + SNAP_TOL) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, {d}], got {alpha}")));
    }
    let a = snap(alpha, &(0..=d).map(|i| i as f64).collect::<Vec<_>>());
    Ok((a.ceil() as usize).max(1))
}

pub fn isotropic_certificate(d: usize, alpha: f64) -> Result<CostCertificate> {
    let dim = isotropic_cost(d, alpha)?;
    Ok(CostCertificate {
        bounds: vec![StepBound { step: 1, lower: dim, upper: dim }],
        evidence: vec![Evidence::ClosedForm { family: "isotropic".into(), dimension: d, parameter: alpha }],
        notes: Vec::new(),
    })
}

/// `P± = (I ± SWAP)/2` on `d ⊗ d`.
pub fn sym_antisym_projector(d: usize, sign: i8) -> Matrix {
    let s = if sign >= 0 { 1.0 } else { -1.0 };
    (Matrix::identity(d * d, d * d) + swap_matrix(d).scale(s)).scale(0.5)
}

/// `U ⊗ U`-covariant channel `C_γ = γP₊ + δP₋` with `(d+1)γ + (d−1)δ = 2`.
pub fn werner_channel(d: usize, gamma: f64) -> Result<ChoiMap> {
    check_dim(d)?;
    let df = d as f64;
    let hi = 2.0 / (df + 1.0);
    let gamma = snap(gamma, &[0.0, hi]);
    if !(0.0..=hi).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, {hi}], got {gamma}")));
    }
    let delta = (2.0 - (df + 1.0) * gamma) / (df - 1.0);
    let m = sym_antisym_projector(d, 1).scale(gamma) + sym_antisym_projector(d, -1).scale(delta);
    two_wire_map(d, m)
}

/// Memory dimension of [`werner_channel`]: 1 for
/// `1/(d+1) ≤ γ ≤ 2/(d+1)`, 2 for `0 ≤ γ < 1/(d+1)`.
pub fn werner_cost(d: usize, gamma: f64) -> Result<usize> {
    check_dim(d)?;
    let df = d as f64;
    let (lo, hi) = (1.0 / (df + 1.0), 2.0 / (df + 1.0));
    let g = snap(gamma, &[0.0, lo, hi]);
    if !(0.0..=hi).contains(&g) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, {hi}], got {gamma}")));
    }
    Ok(if g >= lo { 1 } else { 2 })
}

/// Rank-one parts of `P±`: `|mm⟩⟨mm|` (symmetric only) and
/// `|ψ±_{mn}⟩⟨ψ±_{mn}|` with `|ψ±_{mn}⟩ = (|mn⟩ ± |nm⟩)/√2`, `m < n`.
pub fn sym_antisym_decomposition(d: usize, sign: i8) -> Result<Vec<LabeledOperator>> {
    check_dim(d)?;
    let (a, b) = channel_wires(d);
    let wires = vec![a, b];
    let s = if sign >= 0 { 1.0 } else { -1.0 };
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut parts = Vec::new();
    for m in 0..d {
        for n in m..d {
            let mut v = Vector::zeros(d * d);
            if m == n {
                if s < 0.0 {
                    continue;
                }
                v[m * d + m] = C64::new(1.0, 0.0);
            } else {
                v[m * d + n] = C64::new(h, 0.0);
                v[n * d + m] = C64::new(s * h, 0.0);
            }
            parts.push(LabeledOperator::from_ket(wires.clone(), &v)?);
        }
    }
    Ok(parts)
}

/// Decomposition of `C_γ` into the scaled parts of `P₊` and `P₋`, each with
/// reduced rank at most 2.
pub fn werner_decomposition(d: usize, gamma: f64) -> Result<Decomposition> {
    let c = werner_channel(d, gamma)?;
    let df = d as f64;
    let gamma = snap(gamma, &[0.0, 2.0 / (df + 1.0)]);
    let delta = (2.0 - (df + 1.0) * gamma) / (df - 1.0);
    let mut parts = Vec::new();
    for (sign, w) in [(1i8, gamma), (-1i8, delta)] {
        if w > 0.0 {
            parts.extend(sym_antisym_decomposition(d, sign)?.into_iter().map(|p| p.scale(w)));
        }
    }
    Decomposition::new(channel_as_two_step(&c)?, 1, parts)
}

pub fn werner_certificate(d: usize, gamma: f64, tol: f64) -> Result<CostCertificate> {
    let dim = werner_cost(d, gamma)?;
    let c = werner_channel(d, gamma)?;
    let mut evidence = vec![Evidence::ClosedForm { family: "werner".into(), dimension: d, parameter: gamma }];
    if dim == 2 {
        let q = werner_decomposition(d, gamma)?;
        let cert = certify_step(&q.target, 1, &q, 2, tol)?;
        evidence.extend(cert.evidence);
        evidence.push(Evidence::PptWitness { min_pt_eigenvalue: channel_pt_min(&c)?, exact: false });
    }
    Ok(CostCertificate { bounds: vec![StepBound { step: 1, lower: dim, upper: dim }], evidence, notes: Vec::new() })
}

fn ket3(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Vector {
    Vector::from_fn(8, |i, _| C64::new(a[i >> 2] * b[(i >> 1) & 1] * c[i & 1], 0.0))
}

/// The four product vectors of the three-qubit Shifts unextendible product
/// basis: `|0,1,+⟩, |1,+,0⟩, |+,0,1⟩, |−,−,−⟩`.
pub fn upb_shifts_basis() -> Vec<Vector> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (z, o, p, m) = ([1.0, 0.0], [0.0, 1.0], [h, h], [h, -h]);
    vec![ket3(z, o, p), ket3(o, p, z), ket3(p, z, o), ket3(m, m, m)]
}

fn qubit_wires() -> Vec<Wire> {
    (0..3usize).map(|i| Wire::quantum(i, 2)).collect()
}

/// Projector onto the span of [`upb_shifts_basis`], on qubits `0, 1, 2`.
pub fn upb_projector() -> Result<LabeledOperator> {
    let mut m = Matrix::zeros(8, 8);
    for v in upb_shifts_basis() {
        m += &v * v.adjoint();
    }
    LabeledOperator::new(qubit_wires(), m)
}

/// `ρ = (I − Π_UPB)/4` on qubits `0, 1, 2`.
pub fn upb_shifts_state() -> Result<LabeledOperator> {
    let p = upb_projector()?;
    LabeledOperator::new(qubit_wires(), (Matrix::identity(8, 8) - p.matrix()).scale(0.25))
}

/// [`upb_shifts_state`] as a three-step comb with trivial inputs: qubit `i`
/// is the output of step `i+1`.
pub fn upb_shifts_comb() -> Result<CombValue> {
    let sig = CombSignature::standard(&[(1, 2), (1, 2), (1, 2)])?;
    let rho = upb_shifts_state()?.relabel(&[("0".into(), "1".into()), ("1".into(), "3".into()), ("2".into(), "5".into())])?;
    let ins: Vec<Wire> = (0..3).map(|k| Wire::quantum(2 * k, 1)).collect();
    CombValue::new(sig, rho.extend(&ins)?)
}

/// `|I⟩⟩⟨⟨I|` from the input of step 1 to the output of step 2, with the
/// output of step 1 and the input of step 2 trivial.
pub fn delay_comb(d: usize) -> Result<CombValue> {
    let sig = CombSignature::standard(&[(d, 1), (1, d)])?;
    let phi = LabeledOperator::max_entangled(Wire::quantum(0usize, d), Wire::quantum(3usize, d))?;
    CombValue::new(sig, phi.extend(&[Wire::quantum(1usize, 1), Wire::quantum(2usize, 1)])?)
}

/// Largest entry of `Σ parts − target`.
pub fn sum_defect(parts: &[LabeledOperator], target: &LabeledOperator) -> Result<f64> {
    let mut acc = LabeledOperator::zeros(target.wires().to_vec())?;
    for p in parts {
        acc = acc.add(p)?;
    }
    Ok(max_abs(&acc.sub(target)?.into_matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_channel, random_comb, random_unitary};
    use crate::tensor::eigvalsh;

    fn pt_min(c: &ChoiMap) -> f64 {
        channel_pt_min(c).unwrap()
    }

    #[test]
    fn det_after_k_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let (r, _) = random_comb(&mut rng, &[(2, 2), (2, 2)], 2, 2).unwrap();
        let sig = r.signature();
        assert!(verify_det_after_k(r.op(), sig, 0, 1e-10).unwrap().passed());
        assert!(verify_det_after_k(r.op(), sig, 1, 1e-10).unwrap().passed());
        assert!(!verify_det_after_k(&r.op().scale(1.1), sig, 0, 1e-10).unwrap().passed());
        // coherence on the input of step 2 survives the trace of its output
        let perturbed = {
            let mut m = r.op().matrix().clone();
            m[(0, 2)] += C64::new(0.05, 0.0);
            m[(2, 0)] += C64::new(0.05, 0.0);
            LabeledOperator::new(r.op().wires().to_vec(), m).unwrap()
        };
        assert!(!verify_det_after_k(&perturbed, sig, 1, 1e-10).unwrap().passed());
    }

    #[test]
    fn trivial_certificate() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let (r, _) = random_comb(&mut rng, &[(2, 2), (2, 2)], 2, 2).unwrap();
        let d = r.reduce(1).unwrap().op().rank().unwrap();
        let q = Decomposition::new(r.clone(), 1, vec![r.op().clone()]).unwrap();
        let cert = certify_step(&r, 1, &q, d, 1e-9).unwrap();
        assert_eq!(cert.upper(1), Some(d));
        assert!(cert.reverify(&r, 1e-9).unwrap());
        assert!(certify_step(&r, 1, &q, d - 1, 1e-9).is_err());
    }

    #[test]
    fn delay_comb_is_incompressible() {
        let r = delay_comb(2).unwrap();
        let q = Decomposition::new(r.clone(), 1, vec![r.op().scale(0.5), r.op().scale(0.5)]).unwrap();
        let err = certify_step(&r, 1, &q, 1, 1e-9).unwrap_err();
        assert!(err.to_string().contains("rank"));
        let cert = comb_cost_bounds(&r, 1, 1e-9).unwrap();
        assert_eq!(cert.bound(1), Some(StepBound { step: 1, lower: 2, upper: 2 }));
    }

    #[test]
    fn certify_reports_sum_and_normalization() {
        let r = delay_comb(2).unwrap();
        let q = Decomposition::new(r.clone(), 1, vec![r.op().scale(0.9)]).unwrap();
        assert!(certify_step(&r, 1, &q, 2, 1e-9).unwrap_err().to_string().contains("sum"));
    }

    #[test]
    fn werner_window_product_decomposition() {
        let c = werner_channel(2, 0.5).unwrap();
        let fam = kraus_rank_minimize(&c, 1, 50, 7).unwrap().expect("separable channel");
        assert!(fam.sum().unwrap().max_diff(c.op()).unwrap() < 1e-10);
        for s in fam.schmidt_coefficients().unwrap() {
            assert!(s.get(1).copied().unwrap_or(0.0) < 1e-6);
        }
        let q = fam.decomposition(&c).unwrap();
        let cert = certify_step(&q.target, 1, &q, 1, 1e-9).unwrap();
        assert_eq!(cert.upper(1), Some(1));
    }

    #[test]
    fn kraus_search_product_and_npt() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        // replacement channel ρ ↦ σ has Choi I ⊗ σ: separable
        let sigma = crate::random::random_density(&mut rng, 2, 2);
        let m = Matrix::identity(2, 2).kronecker(&sigma);
        let c = two_wire_map(2, m).unwrap();
        assert!(kraus_rank_minimize(&c, 1, 1, 0).unwrap().is_some());
        let id = isotropic_channel(2, 2.0).unwrap();
        assert!(kraus_rank_minimize(&id, 1, 3, 0).unwrap().is_none());
    }

    #[test]
    fn isotropic_family() {
        let c = isotropic_channel(3, 3.0).unwrap();
        assert!(c.op().max_diff(&LabeledOperator::new(c.op().wires().to_vec(), max_entangled_matrix(3)).unwrap()).unwrap() < 1e-14);
        let c0 = isotropic_channel(2, 0.0).unwrap();
        assert!((c0.op().trace().re - 2.0).abs() < 1e-14);
        assert!(c0.is_tp(1e-12).unwrap() && c0.is_cp(1e-12).unwrap());
        assert!(pt_min(&isotropic_channel(2, 1.0).unwrap()).abs() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let u = random_unitary(&mut rng, 3);
        let uu = u.kronecker(&u.map(|z| z.conj()));
        let m = isotropic_channel(3, 1.7).unwrap().op().matrix().clone();
        assert!(max_abs(&(&uu * &m - &m * &uu)) < 1e-12);
        assert_eq!(isotropic_cost(2, 1.0).unwrap(), 1);
        assert_eq!(isotropic_cost(2, 1.0 + 1e-12).unwrap(), 1);
        assert_eq!(isotropic_cost(3, 2.5).unwrap(), 3);
        assert_eq!(isotropic_cost(2, 0.0).unwrap(), 1);
    }

    #[test]
    fn isotropic_ppt_grid() {
        for d in 2..=3 {
            for i in 0..=(20 * d) {
                let alpha = i as f64 * 0.05;
                let c = isotropic_channel(d, alpha).unwrap();
                assert_eq!(pt_min(&c) >= -1e-10, alpha <= 1.0 + 1e-10, "d={d} alpha={alpha}");
            }
        }
    }

    #[test]
    fn werner_npt_grid() {
        for d in 2..=3 {
            let hi = 2.0 / (d as f64 + 1.0);
            for i in 0..=40 {
                let gamma = hi * i as f64 / 40.0;
                let c = werner_channel(d, gamma).unwrap();
                assert!(c.is_tp(1e-12).unwrap() && c.is_cp(1e-12).unwrap());
                let npt = pt_min(&c) < -1e-10;
                assert_eq!(npt, gamma < 1.0 / (d as f64 + 1.0) - 1e-10, "d={d} gamma={gamma}");
            }
        }
        assert_eq!(werner_cost(2, 0.5).unwrap(), 1);
        assert_eq!(werner_cost(2, 0.0).unwrap(), 2);
        assert_eq!(werner_cost(3, 0.2).unwrap(), 2);
        assert!(werner_cost(2, 0.7).is_err());
        let c = werner_channel(2, 0.0).unwrap();
        let p = LabeledOperator::new(c.op().wires().to_vec(), sym_antisym_projector(2, -1).scale(2.0)).unwrap();
        assert!(c.op().max_diff(&p).unwrap() < 1e-14);
    }

    #[test]
    fn sym_antisym_parts() {
        assert_eq!(sym_antisym_decomposition(2, 1).unwrap().len(), 3);
        assert_eq!(sym_antisym_decomposition(2, -1).unwrap().len(), 1);
        for d in 2..=3 {
            for sign in [1i8, -1] {
                let parts = sym_antisym_decomposition(d, sign).unwrap();
                let target = LabeledOperator::new(parts[0].wires().to_vec(), sym_antisym_projector(d, sign)).unwrap();
                assert!(sum_defect(&parts, &target).unwrap() < 1e-12);
                for p in &parts {
                    assert!(p.partial_trace(&["1".into()]).unwrap().rank().unwrap() <= 2);
                }
            }
        }
        assert_eq!(sym_antisym_decomposition(3, 1).unwrap().len(), 6);
    }

    #[test]
    fn werner_certificates() {
        for (d, g) in [(2, 0.1), (3, 0.2), (2, 0.0)] {
            let cert = werner_certificate(d, g, 1e-9).unwrap();
            assert_eq!(cert.upper(1), Some(2));
            assert!(cert.evidence.iter().any(|e| matches!(e, Evidence::PptWitness { min_pt_eigenvalue, .. } if *min_pt_eigenvalue < 0.0)));
        }
    }

    #[test]
    fn channel_bounds() {
        let id = isotropic_channel(3, 3.0).unwrap();
        let cert = channel_cost_bounds(&id, 1e-9).unwrap();
        assert_eq!(cert.bound(1), Some(StepBound { step: 1, lower: 3, upper: 3 }));
        let c = isotropic_channel(2, 0.8).unwrap();
        assert!(channel_cost_bounds(&c, 1e-9).unwrap().is_exact(1));
        assert_eq!(channel_cost_bounds(&c, 1e-9).unwrap().upper(1), Some(1));
        let c = isotropic_channel(2, 1.5).unwrap();
        let cert = channel_cost_bounds(&c, 1e-9).unwrap();
        assert_eq!((cert.lower(1), cert.upper(1)), (Some(2), Some(2)));
        assert_eq!(cert.log2_upper(1), Some(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..5 {
            let c = random_channel(&mut rng, vec![Wire::quantum("0", 2)], vec![Wire::quantum("1", 3)], 3).unwrap();
            let b = channel_cost_bounds(&c, 1e-9).unwrap().bounds[0];
            assert!(b.lower <= b.upper);
        }
    }

    #[test]
    fn channel_search_tightens_werner() {
        let c = werner_channel(2, 0.5).unwrap();
        let fam = kraus_rank_minimize(&c, 1, 50, 3).unwrap().expect("product decomposition");
        assert!(fam.sum().unwrap().max_diff(c.op()).unwrap() < 1e-8);
        for v in &fam.vectors {
            let s = singular_values(&unvec(v, 2, 2).unwrap());
            assert!(s[1] < 1e-6);
        }
        let npt = werner_channel(2, 0.1).unwrap();
        assert!(kraus_rank_minimize(&npt, 1, 3, 3).unwrap().is_none());
    }

    #[test]
    fn upb_state() {
        let rho = upb_shifts_state().unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-14);
        assert!(rho.min_eigenvalue().unwrap() >= -1e-12);
        for v in upb_shifts_basis() {
            let e = (v.adjoint() * rho.matrix() * &v)[(0, 0)].re;
            assert!(e.abs() < 1e-14);
        }
        let basis = upb_shifts_basis();
        for i in 0..4 {
            for j in 0..4 {
                let ip = basis[i].dotc(&basis[j]).norm();
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        for q in 0..3usize {
            let pt = rho.partial_transpose(&[q.into()]).unwrap();
            assert!(eigvalsh(pt.matrix()).unwrap()[0] >= -1e-12);
        }
        let comb = upb_shifts_comb().unwrap();
        assert!(crate::comb::validate_deterministic(&comb, 1e-10).unwrap().passed());
    }

    #[test]
    fn nested_single_step_matches_certify_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let (r, _) = random_comb(&mut rng, &[(2, 2), (2, 2)], 2, 2).unwrap();
        let d = r.reduce(1).unwrap().op().rank().unwrap();
        let q = Decomposition::new(r.clone(), 1, vec![r.op().scale(0.25), r.op().scale(0.75)]).unwrap();
        let single = certify_step(&r, 1, &q, d, 1e-9).unwrap();
        let multi = certify_multi(&r, &NestedDecomposition::single(&q), &[d], 1e-9).unwrap();
        assert_eq!(single.bound(1), multi.bound(1));
    }

    #[test]
    fn nested_product_comb() {
        // product of three identity channels: every prefix is the whole comb
        let sig = CombSignature::standard(&[(2, 2), (2, 2), (2, 2)]).unwrap();
        let mut op = LabeledOperator::scalar(C64::new(1.0, 0.0));
        for k in 0..3usize {
            op = op
                .tensor(&LabeledOperator::max_entangled(Wire::quantum(2 * k, 2), Wire::quantum(2 * k + 1, 2)).unwrap())
                .unwrap();
        }
        let r = CombValue::new(sig, op).unwrap();
        let q = NestedDecomposition::new(r.clone(), vec![1, 2], vec![(vec![0, 0], r.op().clone())]).unwrap();
        let cert = certify_multi(&r, &q, &[1, 1], 1e-9).unwrap();
        assert_eq!(cert.upper(1), Some(1));
        assert_eq!(cert.upper(2), Some(1));
        assert!(cert.reverify(&r, 1e-9).unwrap());
    }
}
