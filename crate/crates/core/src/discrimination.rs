//! Discrimination of strategies: error probabilities of two-outcome
//! testers and lower bounds on the operational distance
//! `‖R₀ − R₁‖_op = 1 − 2 min_T p_e(T)`.
//!
//! The bounds use non-adaptive testers: one input state on all comb inputs
//! and an ancilla, and a two-outcome measurement of all outputs with the
//! ancilla. Such testers are valid for any number of steps, so the value is
//! always a lower bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::choi::ChoiMap;
use crate::comb::{tester_probs, CombValue, Instrument};
use crate::random::{random_state, random_unitary};
use crate::tensor::{eigh, trace_norm, Label, LabeledOperator, Wire};
use crate::{Error, Matrix, Result, Vector, C64};

const ANCILLA: &str = "tester_ancilla";

/// `p_e = ½(R₁ * T₀ + R₀ * T₁)`.
pub fn error_prob(r0: &CombValue, r1: &CombValue, tester: &Instrument) -> Result<f64> {
    if r0.signature() != r1.signature() {
        return Err(Error::WireMismatch("the two combs have different signatures".into()));
    }
    if tester.branches.len() != 2 {
        return Err(Error::InvalidParameter(format!("a discrimination tester has two branches, got {}", tester.branches.len())));
    }
    let p0 = tester_probs(tester, r0)?;
    let p1 = tester_probs(tester, r1)?;
    Ok(0.5 * (p1[0] + p0[1]))
}

/// Minimum error probability `½(1 − ½‖ρ₀ − ρ₁‖₁)` for two equiprobable states.
pub fn helstrom_pe(rho0: &Matrix, rho1: &Matrix) -> Result<f64> {
    if rho0.shape() != rho1.shape() {
        return Err(Error::DimensionMismatch { expected: rho0.nrows(), found: rho1.nrows() });
    }
    Ok(0.5 * (1.0 - 0.5 * trace_norm(&(rho0 - rho1))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Haar-random inputs and projective measurements; best of `iters`.
    Sampled,
    /// Alternate Helstrom measurements with optimal inputs for `iters`
    /// rounds, starting from the maximally entangled input.
    Seesaw,
}

/// A lower bound on the operational distance with the tester achieving it.
#[derive(Clone, Debug)]
pub struct DistanceBound {
    /// `1 − 2 p_e` for `tester`.
    pub value: f64,
    pub error_prob: f64,
    pub tester: Instrument,
    /// Value after each evaluation, in order.
    pub history: Vec<f64>,
}

/// The difference `C₀ − C₁` arranged as `(outputs, inputs)`.
struct Problem {
    delta: Matrix,
    din: usize,
    dout: usize,
    inputs: Vec<Wire>,
    outputs: Vec<Wire>,
}

impl Problem {
    fn new(r0: &CombValue, r1: &CombValue) -> Result<Self> {
        if r0.signature() != r1.signature() {
            return Err(Error::WireMismatch("the two combs have different signatures".into()));
        }
        let c = r0.as_choi();
        let outputs = c.output_wires();
        let inputs = c.input_wires();
        let order: Vec<Label> = outputs.iter().chain(&inputs).map(|w| w.label.clone()).collect();
        let d0 = r0.op().permute_wires(&order)?;
        let d1 = r1.op().permute_wires(&order)?;
        let din = c.input_dim();
        let dout = c.output_dim();
        Ok(Problem { delta: d0.matrix() - d1.matrix(), din, dout, inputs, outputs })
    }

    /// `(Δ ⊗ id)(|ψ⟩⟨ψ|)` on `(outputs, ancilla)`, `ψ` on `(inputs, ancilla)`.
    fn output(&self, psi: &Vector) -> Matrix {
        let (di, d) = (self.din, self.dout);
        let mut out = Matrix::zeros(d * di, d * di);
        for o in 0..d {
            for a in 0..di {
                for op in 0..d {
                    for b in 0..di {
                        let mut acc = C64::new(0.0, 0.0);
                        for i in 0..di {
                            for j in 0..di {
                                acc += psi[i * di + a] * psi[j * di + b].conj() * self.delta[(o * di + i, op * di + j)];
                            }
                        }
                        out[(o * di + a, op * di + b)] = acc;
                    }
                }
            }
        }
        out
    }

    /// `H` with `⟨ψ|H|ψ⟩ = Tr[P (Δ ⊗ id)(|ψ⟩⟨ψ|)]`.
    fn input_objective(&self, p: &Matrix) -> Matrix {
        let (di, d) = (self.din, self.dout);
        let mut h = Matrix::zeros(di * di, di * di);
        for j in 0..di {
            for b in 0..di {
                for i in 0..di {
                    for a in 0..di {
                        let mut acc = C64::new(0.0, 0.0);
                        for o in 0..d {
                            for op in 0..d {
                                acc += p[(op * di + b, o * di + a)] * self.delta[(o * di + i, op * di + j)];
                            }
                        }
                        h[(j * di + b, i * di + a)] = acc;
                    }
                }
            }
        }
        h
    }

    /// Projector onto the positive part of a Hermitian matrix.
    fn helstrom(m: &Matrix) -> Result<Matrix> {
        let (vals, vecs) = eigh(m)?;
        let n = vals.len();
        let mut p = Matrix::zeros(n, n);
        for (k, &v) in vals.iter().enumerate() {
            if v > 0.0 {
                let col = vecs.column(k);
                p += &col * col.adjoint();
            }
        }
        Ok(p)
    }

    fn tester(&self, r: &CombValue, psi: &Vector, p: &Matrix) -> Result<Instrument> {
        let anc = Wire::quantum(ANCILLA, self.din);
        let mut sw = self.inputs.clone();
        sw.push(anc.clone());
        let state = ChoiMap::state(LabeledOperator::from_ket(sw, psi)?);
        let mut ew = self.outputs.clone();
        ew.push(anc);
        let n = p.nrows();
        let mut branches = Vec::with_capacity(2);
        for (name, e) in [("0", p.clone()), ("1", Matrix::identity(n, n) - p)] {
            let effect = ChoiMap::effect(LabeledOperator::new(ew.clone(), e.transpose())?);
            let t = state.link(&effect)?;
            branches.push((name.to_string(), t.into_op()));
        }
        Instrument::tester(r.signature(), branches)
    }
}

fn max_entangled_input(d: usize) -> Vector {
    let mut v = Vector::zeros(d * d);
    let s = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        v[i * d + i] = C64::new(s, 0.0);
    }
    v
}

/// Lower bound `1 − 2 p_e` on `‖R₀ − R₁‖_op` from the best tester found.
pub fn opnorm_lower_bound(r0: &CombValue, r1: &CombValue, method: Method, iters: usize, seed: u64) -> Result<DistanceBound> {
    let prob = Problem::new(r0, r1)?;
    let mut history = Vec::new();
    let (psi, p) = match method {
        Method::Seesaw => {
            let mut psi = max_entangled_input(prob.din);
            let mut p = Problem::helstrom(&prob.output(&psi))?;
            history.push((&p * prob.output(&psi)).trace().re);
            for _ in 0..iters {
                let h = prob.input_objective(&p);
                let (vals, vecs) = eigh(&h)?;
                let top = vals.len() - 1;
                psi = vecs.column(top).into_owned();
                p = Problem::helstrom(&prob.output(&psi))?;
                history.push((&p * prob.output(&psi)).trace().re);
            }
            (psi, p)
        }
        Method::Sampled => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = prob.dout * prob.din;
            let mut best: Option<(f64, Vector, Matrix)> = None;
            for _ in 0..iters.max(1) {
                let psi = random_state(&mut rng, prob.din * prob.din);
                let u = random_unitary(&mut rng, n);
                let rank = if n > 1 { rng.random_range(1..n) } else { 1 };
                let cols = u.columns(0, rank);
                let mut p = &cols * cols.adjoint();
                let mut v = (&p * prob.output(&psi)).trace().re;
                if v < 0.0 {
                    p = Matrix::identity(n, n) - p;
                    v = -v;
                }
                if best.as_ref().is_none_or(|b| v > b.0) {
                    best = Some((v, psi, p));
                }
                history.push(best.as_ref().unwrap().0);
            }
            let (_, psi, p) = best.expect("at least one sample");
            (psi, p)
        }
    };
    let tester = prob.tester(r0, &psi, &p)?;
    let pe = error_prob(r0, r1, &tester)?;
    Ok(DistanceBound { value: 1.0 - 2.0 * pe, error_prob: pe, tester, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comb::{validate_instrument, CombSignature};
    use crate::random::{random_comb, random_density};

    fn state_comb(rho: &Matrix) -> CombValue {
        let d = rho.nrows();
        let sig = CombSignature::standard(&[(1, d)]).unwrap();
        let op = LabeledOperator::new(vec![Wire::quantum(0usize, 1), Wire::quantum(1usize, d)], rho.clone()).unwrap();
        CombValue::new(sig, op).unwrap()
    }

    fn unitary_comb(u: &Matrix) -> CombValue {
        let c = ChoiMap::from_kraus(vec![Wire::quantum(0usize, 2)], vec![Wire::quantum(1usize, 2)], &[u.clone()]).unwrap();
        CombValue::from_choi(CombSignature::standard(&[(2, 2)]).unwrap(), &c).unwrap()
    }

    #[test]
    fn helstrom_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let rho = random_density(&mut rng, 2, 2);
        assert!((helstrom_pe(&rho, &rho).unwrap() - 0.5).abs() < 1e-15);
        let mut a = Matrix::zeros(2, 2);
        a[(0, 0)] = C64::new(1.0, 0.0);
        let mut b = Matrix::zeros(2, 2);
        b[(1, 1)] = C64::new(1.0, 0.0);
        assert!(helstrom_pe(&a, &b).unwrap().abs() < 1e-15);
        // diag(0.8, 0.2) vs diag(0.2, 0.8): trace distance 0.6
        let x = Matrix::from_diagonal(&Vector::from_vec(vec![C64::new(0.8, 0.0), C64::new(0.2, 0.0)]));
        let y = Matrix::from_diagonal(&Vector::from_vec(vec![C64::new(0.2, 0.0), C64::new(0.8, 0.0)]));
        assert!((helstrom_pe(&x, &y).unwrap() - 0.2).abs() < 1e-15);
        let h = 0.6f64;
        let z = Matrix::from_diagonal(&Vector::from_vec(vec![C64::new(0.5 + h / 2.0, 0.0), C64::new(0.5 - h / 2.0, 0.0)]));
        let w = Matrix::from_diagonal(&Vector::from_vec(vec![C64::new(0.5, 0.0), C64::new(0.5, 0.0)]));
        // ‖z − w‖₁ = 0.6
        assert!((helstrom_pe(&z, &w).unwrap() - 0.35).abs() < 1e-15);
    }

    #[test]
    fn error_prob_balanced_and_perfect() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let rho = random_density(&mut rng, 2, 2);
        let r = state_comb(&rho);
        let bound = opnorm_lower_bound(&r, &r, Method::Seesaw, 1, 0).unwrap();
        assert!(bound.value.abs() < 1e-12);
        assert!((error_prob(&r, &r, &bound.tester).unwrap() - 0.5).abs() < 1e-12);
        let mut a = Matrix::zeros(2, 2);
        a[(0, 0)] = C64::new(1.0, 0.0);
        let mut b = Matrix::zeros(2, 2);
        b[(1, 1)] = C64::new(1.0, 0.0);
        let bound = opnorm_lower_bound(&state_comb(&a), &state_comb(&b), Method::Seesaw, 1, 0).unwrap();
        assert!(bound.error_prob.abs() < 1e-12);
        assert!((bound.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn states_match_helstrom() {
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        for _ in 0..20 {
            let (x, y) = (random_density(&mut rng, 3, 3), random_density(&mut rng, 3, 1));
            let bound = opnorm_lower_bound(&state_comb(&x), &state_comb(&y), Method::Seesaw, 1, 0).unwrap();
            assert!((bound.value - (1.0 - 2.0 * helstrom_pe(&x, &y).unwrap())).abs() < 1e-9);
        }
    }

    #[test]
    fn unitary_channels_match_entangled_oracle() {
        let theta = 0.7f64;
        let id = Matrix::identity(2, 2);
        let rot = Matrix::from_diagonal(&Vector::from_vec(vec![
            C64::from_polar(1.0, -theta / 2.0),
            C64::from_polar(1.0, theta / 2.0),
        ]));
        let (a, b) = (unitary_comb(&id), unitary_comb(&rot));
        let bound = opnorm_lower_bound(&a, &b, Method::Seesaw, 3, 0).unwrap();
        // oracle: Helstrom on (C ⊗ id)(Φ/2)
        let phi = LabeledOperator::max_entangled(Wire::quantum("x", 2), Wire::quantum("0", 2)).unwrap().scale(0.5);
        let out = |r: &CombValue| ChoiMap::state(phi.clone()).link(&r.as_choi()).unwrap().into_op().into_matrix();
        let oracle = 1.0 - 2.0 * helstrom_pe(&out(&a), &out(&b)).unwrap();
        assert!((bound.value - oracle).abs() < 1e-9, "{} vs {}", bound.value, oracle);
        assert!((oracle - (theta / 2.0).sin()).abs() < 1e-9);
    }

    #[test]
    fn seesaw_monotone_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        for _ in 0..5 {
            let (r0, _) = random_comb(&mut rng, &[(2, 2), (2, 2)], 2, 2).unwrap();
            let (r1, _) = random_comb(&mut rng, &[(2, 2), (2, 2)], 2, 2).unwrap();
            let bound = opnorm_lower_bound(&r0, &r1, Method::Seesaw, 6, 0).unwrap();
            for w in bound.history.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
            assert!(bound.value <= 2.0 && bound.value >= -1e-12);
            assert!(validate_instrument(&bound.tester, 1e-9).unwrap());
            let sampled = opnorm_lower_bound(&r0, &r1, Method::Sampled, 20, 4).unwrap();
            assert!(sampled.value >= -1e-12 && sampled.value <= 2.0);
            assert!((0.0..=0.5 + 1e-9).contains(&sampled.error_prob));
        }
    }
}
