//! Seeded random generators for test fixtures and randomized searches.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::choi::ChoiMap;
use crate::comb::{CombSignature, CombValue};
use crate::tensor::{LabeledOperator, Wire};
use crate::{Error, Matrix, Result, Vector, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Complex Ginibre matrix with unit-variance entries.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let g = random_matrix(rng, n, n);
    (&g + g.adjoint()).scale(0.5)
}

/// `G G†` for a Ginibre `n × rank` matrix.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> Matrix {
    let g = random_matrix(rng, n, rank);
    &g * g.adjoint()
}

/// Haar-random unit vector.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vector {
    let v = Vector::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v.unscale(n)
}

/// Haar-random isometry `cols → rows` (`rows ≥ cols`), from the phase-fixed
/// QR factor of a Ginibre matrix.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = random_matrix(rng, rows, cols);
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..cols {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..rows {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    random_isometry(rng, n, n)
}

/// Random density matrix of the given rank.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> Matrix {
    let p = random_psd(rng, d, rank);
    let t = p.trace();
    p / t
}

/// Random CP-TP map with `kraus` Kraus operators (Stinespring isometry).
pub fn random_channel<R: Rng + ?Sized>(
    rng: &mut R,
    inputs: Vec<Wire>,
    outputs: Vec<Wire>,
    kraus: usize,
) -> Result<ChoiMap> {
    let din: usize = inputs.iter().map(|w| w.dim).product();
    let dout: usize = outputs.iter().map(|w| w.dim).product();
    if dout * kraus < din {
        return Err(Error::InvalidParameter(format!(
            "{kraus} Kraus operators cannot make a channel from dimension {din} to {dout}"
        )));
    }
    let v = random_isometry(rng, dout * kraus, din);
    let ks: Vec<Matrix> = (0..kraus).map(|k| v.rows(k * dout, dout).into_owned()).collect();
    ChoiMap::from_kraus(inputs, outputs, &ks)
}

/// A random deterministic comb obtained by linking random channels
/// `C_k : (2k−2, A_{k−1}) → (2k−1, A_k)` with ancillas of dimension
/// `ancilla`. Returns the comb and the channels used.
pub fn random_comb<R: Rng + ?Sized>(
    rng: &mut R,
    dims: &[(usize, usize)],
    ancilla: usize,
    kraus: usize,
) -> Result<(CombValue, Vec<ChoiMap>)> {
    if dims.is_empty() {
        return Err(Error::InvalidParameter("a comb needs at least one step".into()));
    }
    let sig = CombSignature::standard(dims)?;
    let n = dims.len();
    let mut channels = Vec::with_capacity(n);
    for (k, &(din, dout)) in dims.iter().enumerate() {
        let mut inputs = vec![Wire::quantum(2 * k, din)];
        if k > 0 {
            inputs.push(Wire::quantum(format!("anc{k}"), ancilla));
        }
        let mut outputs = vec![Wire::quantum(2 * k + 1, dout)];
        if k + 1 < n {
            outputs.push(Wire::quantum(format!("anc{}", k + 1), ancilla));
        }
        channels.push(random_channel(rng, inputs, outputs, kraus)?);
    }
    let linked = ChoiMap::link_all(&channels)?;
    let comb = CombValue::new(sig, linked.op().clone())?;
    Ok((comb, channels))
}

/// `|v⟩⟨v|` as an operator on the given wires.
pub fn projector_on(wires: Vec<Wire>, v: &Vector) -> Result<LabeledOperator> {
    LabeledOperator::from_ket(wires, v)
}
