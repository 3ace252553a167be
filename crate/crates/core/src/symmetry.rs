//! Memory bounds from symmetry.
//!
//! If a comb is block diagonal, `R = Σᵢ PᵢRPᵢ`, for orthogonal projectors
//! `Pᵢ` on the wires of the first `k` steps, then `{PᵢRPᵢ}` certifies a
//! memory of dimension `maxᵢ rank(Pᵢ)` after step `k`. Covariance under a
//! group representation yields such projectors from the isotypic
//! decomposition, with rank equal to the multiplicity of each irrep.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::comb::CombValue;
use crate::memory::{certify_step, CostCertificate, Decomposition, Evidence, NestedDecomposition};
use crate::random::random_hermitian;
use crate::tensor::{eigh, max_abs, total_dim, Label, LabeledOperator, Wire};
use crate::{Error, Matrix, Result, C64};

/// Relative eigenvalue gap separating clusters of the twirled operator.
pub const CLUSTER_GAP: f64 = 1e-7;
/// Threshold on the normalized twirl linking two commutant projectors.
pub const LINK_THRESHOLD: f64 = 1e-8;
const MAX_REDRAWS: usize = 8;
const MAX_GROUP_ORDER: usize = 4096;

/// The qubit Paulis `I, X, Y, Z`.
pub fn paulis() -> [Matrix; 4] {
    let o = C64::new(1.0, 0.0);
    let z = C64::new(0.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        Matrix::from_row_slice(2, 2, &[o, z, z, o]),
        Matrix::from_row_slice(2, 2, &[z, o, o, z]),
        Matrix::from_row_slice(2, 2, &[z, -i, i, z]),
        Matrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

/// A finite group of unitaries on a fixed list of wires.
#[derive(Clone, Debug)]
pub struct GroupRep {
    wires: Vec<Wire>,
    elements: Vec<Matrix>,
}

fn close_to(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    max_abs(&(a - b)) <= tol
}

impl GroupRep {
    /// Checks unitarity, presence of the identity and closure under products.
    pub fn new(wires: Vec<Wire>, elements: Vec<Matrix>, tol: f64) -> Result<Self> {
        let n = total_dim(&wires);
        LabeledOperator::identity(wires.clone())?;
        let id = Matrix::identity(n, n);
        for (i, u) in elements.iter().enumerate() {
            if u.shape() != (n, n) {
                return Err(Error::DimensionMismatch { expected: n, found: u.nrows() });
            }
            let defect = max_abs(&(u.adjoint() * u - &id));
            if defect > tol {
                return Err(Error::InvalidParameter(format!("element {i} is not unitary (defect {defect:.3e})")));
            }
        }
        if !elements.iter().any(|u| close_to(u, &id, tol)) {
            return Err(Error::InvalidParameter("the identity is missing".into()));
        }
        for (i, a) in elements.iter().enumerate() {
            for (j, b) in elements.iter().enumerate() {
                let ab = a * b;
                if !elements.iter().any(|u| close_to(u, &ab, tol)) {
                    return Err(Error::InvalidParameter(format!("product of elements {i} and {j} is not in the set")));
                }
            }
        }
        Ok(GroupRep { wires, elements })
    }

    /// The group generated by `generators`.
    pub fn generate(wires: Vec<Wire>, generators: Vec<Matrix>, tol: f64) -> Result<Self> {
        let n = total_dim(&wires);
        let mut elements = vec![Matrix::identity(n, n)];
        let mut frontier = elements.clone();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for a in &frontier {
                for g in &generators {
                    if g.shape() != (n, n) {
                        return Err(Error::DimensionMismatch { expected: n, found: g.nrows() });
                    }
                    let p = g * a;
                    if !elements.iter().chain(&next).any(|u| close_to(u, &p, tol)) {
                        next.push(p);
                    }
                }
            }
            elements.extend(next.iter().cloned());
            if elements.len() > MAX_GROUP_ORDER {
                return Err(Error::InvalidParameter(format!("group order exceeds {MAX_GROUP_ORDER}")));
            }
            frontier = next;
        }
        Self::new(wires, elements, tol)
    }

    pub fn trivial(wires: Vec<Wire>) -> Result<Self> {
        let n = total_dim(&wires);
        Self::new(wires, vec![Matrix::identity(n, n)], 1e-12)
    }

    /// `U ⊗ U*` for the qubit Paulis `U ∈ {I, X, Y, Z}` on wires `a, b`.
    pub fn pauli_conjugate(a: impl Into<Label>, b: impl Into<Label>) -> Result<Self> {
        let elements = paulis().iter().map(|u| u.kronecker(&u.map(|x| x.conj()))).collect();
        Self::new(vec![Wire::quantum(a, 2), Wire::quantum(b, 2)], elements, 1e-12)
    }

    /// `{I, SWAP}` on two wires of dimension `d`.
    pub fn swap(a: impl Into<Label>, b: impl Into<Label>, d: usize) -> Result<Self> {
        let mut s = Matrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                s[(i * d + j, j * d + i)] = C64::new(1.0, 0.0);
            }
        }
        Self::new(vec![Wire::quantum(a, d), Wire::quantum(b, d)], vec![Matrix::identity(d * d, d * d), s], 1e-12)
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }

    pub fn elements(&self) -> &[Matrix] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        total_dim(&self.wires)
    }

    /// `|G|⁻¹ Σ_g U(g) X U(g)†`.
    pub fn twirl(&self, x: &Matrix) -> Matrix {
        let mut acc = Matrix::zeros(x.nrows(), x.ncols());
        for u in &self.elements {
            acc += u * x * u.adjoint();
        }
        acc / C64::new(self.elements.len() as f64, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsotypicComponent {
    /// Indices into [`BlockStructure::projectors`].
    pub projectors: Vec<usize>,
    /// Dimension of the irrep, which is also the number of projectors.
    pub irrep_dim: usize,
    /// Rank of each projector.
    pub multiplicity: usize,
}

/// Orthogonal projectors on a common list of wires, optionally grouped into
/// isotypic components.
#[derive(Clone, Debug)]
pub struct BlockStructure {
    pub projectors: Vec<LabeledOperator>,
    pub components: Vec<IsotypicComponent>,
}

impl BlockStructure {
    /// Ungrouped projectors.
    pub fn new(projectors: Vec<LabeledOperator>) -> Result<Self> {
        let first = projectors
            .first()
            .ok_or_else(|| Error::InvalidParameter("a block structure needs at least one projector".into()))?;
        let wires = first.wires().to_vec();
        let projectors = projectors.iter().map(|p| p.aligned_to(&wires)).collect::<Result<Vec<_>>>()?;
        Ok(BlockStructure { projectors, components: Vec::new() })
    }

    pub fn wires(&self) -> &[Wire] {
        self.projectors[0].wires()
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        let mut m: Vec<usize> = self.components.iter().map(|c| c.multiplicity).collect();
        m.sort_unstable();
        m
    }

    pub fn ranks(&self) -> Result<Vec<usize>> {
        self.projectors.iter().map(|p| p.rank()).collect()
    }

    /// `(‖Σ Pᵢ − I‖_max, max_{i,j} ‖PᵢPⱼ − δᵢⱼPᵢ‖_max)`.
    pub fn defects(&self) -> (f64, f64) {
        let n = self.projectors[0].dim();
        let mut sum = Matrix::zeros(n, n);
        let mut orth = 0.0f64;
        for (i, p) in self.projectors.iter().enumerate() {
            sum += p.matrix();
            for (j, q) in self.projectors.iter().enumerate() {
                let prod = p.matrix() * q.matrix();
                let d = if i == j { max_abs(&(prod - p.matrix())) } else { max_abs(&prod) };
                orth = orth.max(d);
            }
        }
        (max_abs(&(sum - Matrix::identity(n, n))), orth)
    }
}

fn embed(p: &LabeledOperator, target: &LabeledOperator) -> Result<LabeledOperator> {
    let rest: Vec<Wire> = target.wires().iter().filter(|w| !p.has_label(&w.label)).cloned().collect();
    p.extend(&rest)?.aligned_to(target.wires())
}

fn check_block_wires(r: &CombValue, wires: &[Wire], k: usize) -> Result<()> {
    let early = r.signature().wires_upto(k);
    for w in wires {
        if !early.contains(w) {
            return Err(Error::WireMismatch(format!("wire {} is not among the wires of steps 1..{k}", w.label)));
        }
    }
    Ok(())
}

/// Check `Σ Pᵢ = I`, `PᵢPⱼ = δᵢⱼPᵢ` and `R = Σ PᵢRPᵢ`, then certify the
/// decomposition `{PᵢRPᵢ}` at step `k` with `d = maxᵢ rank(Pᵢ)`.
pub fn verify_block_bound(r: &CombValue, blocks: &BlockStructure, k: usize, tol: f64) -> Result<CostCertificate> {
    check_block_wires(r, blocks.wires(), k)?;
    let (completeness, orthogonality) = blocks.defects();
    if completeness > tol {
        return Err(Error::Certification(format!("projectors do not sum to the identity: defect {completeness:.3e} (tol {tol:.1e})")));
    }
    if orthogonality > tol {
        return Err(Error::Certification(format!("projectors are not orthogonal: defect {orthogonality:.3e} (tol {tol:.1e})")));
    }
    let mut parts = Vec::with_capacity(blocks.projectors.len());
    let mut acc = LabeledOperator::zeros(r.op().wires().to_vec())?;
    for p in &blocks.projectors {
        let pe = embed(p, r.op())?;
        let part = pe.mul(r.op())?.mul(&pe)?;
        acc = acc.add(&part)?;
        parts.push(part);
    }
    let block_defect = acc.max_diff(r.op())?;
    if block_defect > tol {
        return Err(Error::Certification(format!("comb is not block diagonal: defect {block_defect:.3e} (tol {tol:.1e})")));
    }
    let d = blocks.ranks()?.into_iter().max().unwrap_or(1).max(1);
    let q = Decomposition::new(r.clone(), k, parts)?;
    let mut cert = certify_step(r, k, &q, d, tol)?;
    cert.bounds[0].upper = d;
    cert.bounds[0].lower = cert.bounds[0].lower.min(d);
    cert.evidence.push(Evidence::SymmetryProjectors {
        projectors: blocks.projectors.clone(),
        multiplicities: blocks.multiplicities(),
    });
    Ok(cert)
}

/// Refine parts `{Q̃ⱼ}` cut at step `l > k` by projectors at step `k`:
/// `Qᵢⱼ = PᵢQ̃ⱼPᵢ`, indexed `(i, j)` for the steps `(k, l)`.
pub fn refine_with_blocks(
    r: &CombValue,
    blocks: &BlockStructure,
    k: usize,
    existing: &Decomposition,
    tol: f64,
) -> Result<NestedDecomposition> {
    let l = existing.cut;
    if l <= k {
        return Err(Error::InvalidParameter(format!("existing cut {l} must come after step {k}")));
    }
    check_block_wires(r, blocks.wires(), k)?;
    let embedded = blocks.projectors.iter().map(|p| embed(p, r.op())).collect::<Result<Vec<_>>>()?;
    let mut parts = Vec::new();
    for (j, qj) in existing.parts.iter().enumerate() {
        let mut acc = LabeledOperator::zeros(r.op().wires().to_vec())?;
        let mut local = Vec::with_capacity(embedded.len());
        for (i, pe) in embedded.iter().enumerate() {
            let part = pe.mul(qj)?.mul(pe)?;
            acc = acc.add(&part)?;
            local.push((vec![i, j], part));
        }
        let defect = acc.max_diff(qj)?;
        if defect > tol {
            return Err(Error::Certification(format!(
                "part {j} does not commute with the blocks: defect {defect:.3e} (tol {tol:.1e})"
            )));
        }
        parts.extend(local);
    }
    NestedDecomposition::new(r.clone(), vec![k, l], parts)
}

/// Eigenvalue clusters of a Hermitian matrix: `(projector, orthonormal basis)`.
fn clusters(m: &Matrix) -> Result<Vec<(Matrix, Matrix)>> {
    let (vals, vecs) = eigh(m)?;
    let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..vals.len() {
        match groups.last_mut() {
            Some(g) if vals[i] - vals[*g.last().unwrap()] <= CLUSTER_GAP * scale => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    Ok(groups
        .into_iter()
        .map(|g| {
            let basis = Matrix::from_fn(vecs.nrows(), g.len(), |r, c| vecs[(r, g[c])]);
            (&basis * basis.adjoint(), basis)
        })
        .collect())
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    parent[i] = r;
    r
}

fn try_decompose(rep: &GroupRep, rng: &mut ChaCha8Rng) -> Result<Option<BlockStructure>> {
    let n = rep.dim();
    let x = rep.twirl(&random_hermitian(rng, n));
    let cl = clusters(&x)?;
    let y = random_hermitian(rng, n);
    let y = &y / C64::new(max_abs(&y), 0.0);
    let ty = rep.twirl(&y);

    // each cluster must be a minimal projector of the commutant
    for (e, _) in &cl {
        let m = e * &ty * e;
        let rank = e.trace().re.round();
        let c = m.trace() / C64::new(rank, 0.0);
        if max_abs(&(&m - e * c)) > CLUSTER_GAP * max_abs(&ty) {
            return Ok(None);
        }
    }

    let mut parent: Vec<usize> = (0..cl.len()).collect();
    for a in 0..cl.len() {
        for b in a + 1..cl.len() {
            if max_abs(&(&cl[a].0 * &ty * &cl[b].0)) > LINK_THRESHOLD {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for a in 0..cl.len() {
        let r = find(&mut parent, a);
        match roots.iter().position(|&x| x == r) {
            Some(p) => comps[p].push(a),
            None => {
                roots.push(r);
                comps.push(vec![a]);
            }
        }
    }

    let mut projectors = Vec::new();
    let mut components = Vec::new();
    for comp in comps {
        let (e1, basis) = &cl[comp[0]];
        let irrep_dim = basis.ncols();
        if comp.iter().any(|&a| cl[a].1.ncols() != irrep_dim) {
            return Ok(None);
        }
        // intertwiners W_a : range(E_1) → range(E_a) with W_a†W_a = E_1
        let mut ws = Vec::with_capacity(comp.len());
        for &a in &comp {
            if a == comp[0] {
                ws.push(e1.clone());
                continue;
            }
            let w = &cl[a].0 * &ty * e1;
            let c = (w.adjoint() * &w).trace().re / irrep_dim as f64;
            if c <= 0.0 {
                return Ok(None);
            }
            ws.push(w / C64::new(c.sqrt(), 0.0));
        }
        let start = projectors.len();
        for j in 0..irrep_dim {
            let phi = basis.column(j);
            let mut p = Matrix::zeros(n, n);
            for w in &ws {
                let v = w * phi;
                p += &v * v.adjoint();
            }
            projectors.push(LabeledOperator::new(rep.wires.clone(), p)?);
        }
        components.push(IsotypicComponent {
            projectors: (start..start + irrep_dim).collect(),
            irrep_dim,
            multiplicity: comp.len(),
        });
    }
    Ok(Some(BlockStructure { projectors, components }))
}

/// Isotypic decomposition of a finite group representation into projectors
/// `P_{ν,j}` of rank `m_ν` (one per basis vector of the irrep `ν`).
pub fn isotypic_decompose(rep: &GroupRep, tol: f64, seed: u64) -> Result<BlockStructure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REDRAWS {
        if let Some(blocks) = try_decompose(rep, &mut rng)? {
            let (completeness, orthogonality) = blocks.defects();
            let commutes = blocks.components.iter().all(|c| {
                let n = rep.dim();
                let mut p = Matrix::zeros(n, n);
                for &i in &c.projectors {
                    p += blocks.projectors[i].matrix();
                }
                rep.elements.iter().all(|u| max_abs(&(u * &p - &p * u)) <= tol)
            });
            let total: usize = blocks.components.iter().map(|c| c.irrep_dim * c.multiplicity).sum();
            if completeness <= tol && orthogonality <= tol && commutes && total == rep.dim() {
                return Ok(blocks);
            }
        }
    }
    Err(Error::Numerical(format!("isotypic decomposition failed after {MAX_REDRAWS} draws")))
}

/// Bound `max_ν m_ν` for a comb commuting with `U(g)` on wires of the first
/// `k` steps.
pub fn symmetry_bound(r: &CombValue, rep: &GroupRep, k: usize, tol: f64, seed: u64) -> Result<CostCertificate> {
    check_block_wires(r, rep.wires(), k)?;
    let mut worst = (0usize, 0.0f64);
    for (g, u) in rep.elements.iter().enumerate() {
        let ue = embed(&LabeledOperator::new(rep.wires.clone(), u.clone())?, r.op())?;
        let c = max_abs(&(ue.matrix() * r.op().matrix() - r.op().matrix() * ue.matrix()));
        if c > worst.1 {
            worst = (g, c);
        }
    }
    if worst.1 > tol {
        return Err(Error::Certification(format!(
            "comb does not commute with element {}: defect {:.3e} (tol {tol:.1e})",
            worst.0, worst.1
        )));
    }
    let blocks = isotypic_decompose(rep, tol, seed)?;
    verify_block_bound(r, &blocks, k, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comb::{validate_deterministic, CombSignature};
    use crate::random::random_channel;

    fn basis_projectors(wires: Vec<Wire>) -> BlockStructure {
        let n = total_dim(&wires);
        let ps = (0..n)
            .map(|i| {
                let mut m = Matrix::zeros(n, n);
                m[(i, i)] = C64::new(1.0, 0.0);
                LabeledOperator::new(wires.clone(), m).unwrap()
            })
            .collect();
        BlockStructure::new(ps).unwrap()
    }

    /// Measure in the computational basis, then apply a channel picked by
    /// the outcome.
    fn classical_comb(rng: &mut ChaCha8Rng) -> CombValue {
        let sig = CombSignature::standard(&[(2, 2), (2, 2)]).unwrap();
        let mut op = LabeledOperator::zeros(sig.wires()).unwrap();
        for i in 0..2 {
            let mut m = Matrix::zeros(4, 4);
            m[(3 * i, 3 * i)] = C64::new(1.0, 0.0);
            let meas = LabeledOperator::new(vec![Wire::quantum(0usize, 2), Wire::quantum(1usize, 2)], m).unwrap();
            let c = random_channel(rng, vec![Wire::quantum(2usize, 2)], vec![Wire::quantum(3usize, 2)], 2).unwrap();
            op = op.add(&meas.tensor(c.op()).unwrap()).unwrap();
        }
        CombValue::new(sig, op).unwrap()
    }

    pub(crate) fn bell_diagonal_comb(rng: &mut ChaCha8Rng, p: [f64; 4]) -> CombValue {
        let sig = CombSignature::standard(&[(2, 2), (2, 2)]).unwrap();
        let mut op = LabeledOperator::zeros(sig.wires()).unwrap();
        for (sigma, w) in paulis().iter().zip(p) {
            let mut v = crate::Vector::zeros(4);
            for a in 0..2 {
                for b in 0..2 {
                    v[a * 2 + b] = sigma[(a, b)];
                }
            }
            let proj = LabeledOperator::from_ket(vec![Wire::quantum(0usize, 2), Wire::quantum(1usize, 2)], &v).unwrap();
            let c = random_channel(rng, vec![Wire::quantum(2usize, 2)], vec![Wire::quantum(3usize, 2)], 2).unwrap();
            op = op.add(&proj.tensor(c.op()).unwrap().scale(w)).unwrap();
        }
        CombValue::new(sig, op).unwrap()
    }

    #[test]
    fn group_checks() {
        assert_eq!(GroupRep::pauli_conjugate("0", "1").unwrap().order(), 4);
        let x = Matrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(GroupRep::new(vec![Wire::quantum("0", 2)], vec![Matrix::identity(2, 2)], 1e-12).is_ok());
        assert!(GroupRep::new(vec![Wire::quantum("0", 2)], vec![x.clone()], 1e-12).is_err());
        assert_eq!(GroupRep::generate(vec![Wire::quantum("0", 2)], vec![x], 1e-12).unwrap().order(), 2);
    }

    #[test]
    fn trivial_group_full_multiplicity() {
        let rep = GroupRep::trivial(vec![Wire::quantum("0", 2)]).unwrap();
        let b = isotypic_decompose(&rep, 1e-9, 1).unwrap();
        assert_eq!(b.multiplicities(), vec![2]);
        assert_eq!(b.projectors.len(), 1);
    }

    #[test]
    fn pauli_rep_gives_bell_projectors() {
        let rep = GroupRep::pauli_conjugate("0", "1").unwrap();
        let b = isotypic_decompose(&rep, 1e-9, 2).unwrap();
        assert_eq!(b.multiplicities(), vec![1, 1, 1, 1]);
        // each projector is a Bell projector: maximally mixed marginal
        for p in &b.projectors {
            let m = p.partial_trace(&["1".into()]).unwrap();
            assert!(max_abs(&(m.matrix() - Matrix::identity(2, 2).scale(0.5))) < 1e-9);
        }
    }

    #[test]
    fn swap_rep_multiplicities() {
        let rep = GroupRep::swap("0", "1", 2).unwrap();
        let b = isotypic_decompose(&rep, 1e-9, 3).unwrap();
        // trivial irrep on the 3-dimensional symmetric space, sign irrep once
        assert_eq!(b.multiplicities(), vec![1, 3]);
        for c in &b.components {
            assert_eq!(c.irrep_dim, 1);
        }
        let rep3 = GroupRep::swap("0", "1", 3).unwrap();
        assert_eq!(isotypic_decompose(&rep3, 1e-9, 3).unwrap().multiplicities(), vec![3, 6]);
    }

    #[test]
    fn multiplicities_seed_invariant() {
        let rep = GroupRep::pauli_conjugate("0", "1").unwrap();
        let reference = isotypic_decompose(&rep, 1e-9, 0).unwrap().multiplicities();
        for seed in 1..10 {
            assert_eq!(isotypic_decompose(&rep, 1e-9, seed).unwrap().multiplicities(), reference);
        }
    }

    #[test]
    fn block_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let r = classical_comb(&mut rng);
        assert!(validate_deterministic(&r, 1e-10).unwrap().passed());
        let blocks = basis_projectors(vec![Wire::quantum(0usize, 2), Wire::quantum(1usize, 2)]);
        let cert = verify_block_bound(&r, &blocks, 1, 1e-9).unwrap();
        assert_eq!(cert.upper(1), Some(1));
        let single = BlockStructure::new(vec![LabeledOperator::identity(r.signature().wires_upto(1)).unwrap()]).unwrap();
        assert_eq!(verify_block_bound(&r, &single, 1, 1e-9).unwrap().upper(1), Some(4));
    }

    #[test]
    fn bell_diagonal_symmetry_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let r = bell_diagonal_comb(&mut rng, [0.1, 0.2, 0.3, 0.4]);
        assert!(validate_deterministic(&r, 1e-10).unwrap().passed());
        let cert = symmetry_bound(&r, &GroupRep::pauli_conjugate("0", "1").unwrap(), 1, 1e-9, 4).unwrap();
        assert_eq!(cert.upper(1), Some(1));
        assert!(cert.reverify(&r, 1e-9).unwrap());
        assert!(cert.upper(1).unwrap() <= r.reduce(1).unwrap().op().rank().unwrap());
        let trivial = symmetry_bound(&r, &GroupRep::trivial(r.signature().wires_upto(1)).unwrap(), 1, 1e-9, 4).unwrap();
        assert_eq!(trivial.upper(1), Some(4));
    }

    #[test]
    fn commutation_violation() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let r = classical_comb(&mut rng);
        let err = symmetry_bound(&r, &GroupRep::pauli_conjugate("0", "1").unwrap(), 1, 1e-9, 0).unwrap_err();
        assert!(err.to_string().contains("commute"));
    }

    #[test]
    fn refine_nested() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let bell = bell_diagonal_comb(&mut rng, [0.25, 0.25, 0.25, 0.25]);
        let sig = CombSignature::standard(&[(2, 2), (2, 2), (2, 2)]).unwrap();
        let tail = LabeledOperator::max_entangled(Wire::quantum(4usize, 2), Wire::quantum(5usize, 2)).unwrap();
        let r = CombValue::new(sig, bell.op().tensor(&tail).unwrap()).unwrap();
        let l_rank = r.reduce(2).unwrap().op().rank().unwrap();
        let existing = Decomposition::new(r.clone(), 2, vec![r.op().clone()]).unwrap();
        let blocks = isotypic_decompose(&GroupRep::pauli_conjugate("0", "1").unwrap(), 1e-9, 5).unwrap();
        let nested = refine_with_blocks(&r, &blocks, 1, &existing, 1e-9).unwrap();
        let cert = crate::memory::certify_multi(&r, &nested, &[1, l_rank], 1e-9).unwrap();
        assert_eq!(cert.upper(1), Some(1));
        let single = BlockStructure::new(vec![LabeledOperator::identity(r.signature().wires_upto(1)).unwrap()]).unwrap();
        let same = refine_with_blocks(&r, &single, 1, &existing, 1e-9).unwrap();
        assert_eq!(same.parts.len(), 1);
        assert!(same.parts[0].1.max_diff(r.op()).unwrap() < 1e-14);
    }
}
