use rand::Rng;

use super::{check_len, glorot_uniform, sigmoid, NnError, ParamGrads, Parameterized, Result, ValueGrid};

const GATES: usize = 4;
// Gate order used for weights, biases and gradients.
const INPUT: usize = 0;
const FORGET: usize = 1;
const OUTPUT: usize = 2;
const CANDIDATE: usize = 3;

/// Intermediates of one cell step, kept for backpropagation through time.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStepCache {
    /// `[x; h_prev]`
    joined: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Standard LSTM cell: sigmoid input/forget/output gates, tanh candidate,
/// `c = f ⊙ c_prev + i ⊙ g`, `h = o ⊙ tanh(c)`.
///
/// Each gate owns an H × (I + H) matrix acting on `[x; h_prev]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    input_size: usize,
    hidden_size: usize,
    weights: [ValueGrid; GATES],
    biases: [Vec<f64>; GATES],
    cache: Vec<LstmStepCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    /// Parameter gradients summed over all cached steps.
    pub params: ParamGrads,
    /// `dL/dx_t` for every cached step.
    pub inputs: Vec<Vec<f64>>,
    pub h0: Vec<f64>,
    pub c0: Vec<f64>,
}

impl LstmCell {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let cols = input_size + hidden_size;
        Self {
            input_size,
            hidden_size,
            weights: std::array::from_fn(|_| ValueGrid::zeros(hidden_size, cols)),
            biases: std::array::from_fn(|_| vec![0.0; hidden_size]),
            cache: Vec::new(),
        }
    }

    /// Glorot-uniform gate weights, zero biases except the forget gate at 1.0.
    pub fn random<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let cols = input_size + hidden_size;
        let mut cell = Self::zeros(input_size, hidden_size);
        for w in cell.weights.iter_mut() {
            *w = glorot_uniform(hidden_size, cols, rng);
        }
        cell.biases[FORGET].iter_mut().for_each(|b| *b = 1.0);
        cell
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn forget_bias(&self) -> &[f64] {
        &self.biases[FORGET]
    }

    pub fn cached_steps(&self) -> usize {
        self.cache.len()
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }

    fn compute(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>, LstmStepCache)> {
        check_len("lstm_step input", self.input_size, x.len())?;
        check_len("lstm_step h_prev", self.hidden_size, h_prev.len())?;
        check_len("lstm_step c_prev", self.hidden_size, c_prev.len())?;
        let mut joined = Vec::with_capacity(self.input_size + self.hidden_size);
        joined.extend_from_slice(x);
        joined.extend_from_slice(h_prev);

        let gate = |k: usize| -> Result<Vec<f64>> {
            let mut z = self.weights[k].matvec(&joined)?;
            for (zi, b) in z.iter_mut().zip(&self.biases[k]) {
                *zi += b;
            }
            Ok(z)
        };
        let i: Vec<f64> = gate(INPUT)?.into_iter().map(sigmoid).collect();
        let f: Vec<f64> = gate(FORGET)?.into_iter().map(sigmoid).collect();
        let o: Vec<f64> = gate(OUTPUT)?.into_iter().map(sigmoid).collect();
        let g: Vec<f64> = gate(CANDIDATE)?.into_iter().map(f64::tanh).collect();

        let c: Vec<f64> = (0..self.hidden_size).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
        let cache = LstmStepCache {
            joined,
            c_prev: c_prev.to_vec(),
            i,
            f,
            o,
            g,
            tanh_c,
        };
        Ok((h, c, cache))
    }

    /// One step without recording intermediates.
    pub fn step_apply(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (h, c, _) = self.compute(x, h_prev, c_prev)?;
        Ok((h, c))
    }

    /// One step, appending its intermediates to the unroll cache.
    pub fn step(&mut self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (h, c, cache) = self.compute(x, h_prev, c_prev)?;
        self.cache.push(cache);
        Ok((h, c))
    }

    /// Unrolls from a zero state over `xs`, returning every hidden state.
    /// Clears any previous cache first.
    pub fn forward_sequence(&mut self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.cache.clear();
        let mut h = vec![0.0; self.hidden_size];
        let mut c = vec![0.0; self.hidden_size];
        let mut hs = Vec::with_capacity(xs.len());
        for x in xs {
            let (nh, nc) = self.step(x, &h, &c)?;
            h = nh;
            c = nc;
            hs.push(h.clone());
        }
        Ok(hs)
    }

    /// Backpropagation through time over the cached unroll.
    ///
    /// `upstream[t]` is `dL/dh_t` from outside the recurrence. The cache is
    /// consumed.
    pub fn backward(&mut self, upstream: &[Vec<f64>]) -> Result<LstmGrads> {
        if self.cache.is_empty() {
            return Err(NnError::MissingForward("lstm"));
        }
        check_len("lstm_backward steps", self.cache.len(), upstream.len())?;
        let hsz = self.hidden_size;
        let cols = self.input_size + hsz;
        let mut dw: [ValueGrid; GATES] = std::array::from_fn(|_| ValueGrid::zeros(hsz, cols));
        let mut db: [Vec<f64>; GATES] = std::array::from_fn(|_| vec![0.0; hsz]);
        let mut inputs = vec![Vec::new(); self.cache.len()];
        let mut dh_next = vec![0.0; hsz];
        let mut dc_next = vec![0.0; hsz];

        let cache = std::mem::take(&mut self.cache);
        for (t, step) in cache.iter().enumerate().rev() {
            check_len("lstm_backward upstream", hsz, upstream[t].len())?;
            let mut da: [Vec<f64>; GATES] = std::array::from_fn(|_| vec![0.0; hsz]);
            for k in 0..hsz {
                let dh = upstream[t][k] + dh_next[k];
                let (i, f, o, g, tc) = (step.i[k], step.f[k], step.o[k], step.g[k], step.tanh_c[k]);
                let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                da[OUTPUT][k] = dh * tc * o * (1.0 - o);
                da[INPUT][k] = dc * g * i * (1.0 - i);
                da[FORGET][k] = dc * step.c_prev[k] * f * (1.0 - f);
                da[CANDIDATE][k] = dc * i * (1.0 - g * g);
                dc_next[k] = dc * f;
            }
            let mut djoined = vec![0.0; cols];
            for gate in 0..GATES {
                dw[gate].add_outer(&da[gate], &step.joined);
                for (b, d) in db[gate].iter_mut().zip(&da[gate]) {
                    *b += d;
                }
                let back = self.weights[gate].matvec_transposed(&da[gate])?;
                for (a, b) in djoined.iter_mut().zip(back) {
                    *a += b;
                }
            }
            inputs[t] = djoined[..self.input_size].to_vec();
            dh_next = djoined[self.input_size..].to_vec();
        }

        let mut params: ParamGrads = dw.into_iter().map(|g| g.data().to_vec()).collect();
        params.extend(db);
        Ok(LstmGrads {
            params,
            inputs,
            h0: dh_next,
            c0: dc_next,
        })
    }
}

impl Parameterized for LstmCell {
    fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.weights.iter().map(|w| w.data()).collect();
        out.extend(self.biases.iter().map(|b| b.as_slice()));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.weights.iter_mut().map(|w| w.data_mut()).collect();
        out.extend(self.biases.iter_mut().map(|b| b.as_mut_slice()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, zero_grads};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rng: &mut ChaCha8Rng, steps: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..steps).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    /// Loss = Σ_t ⟨v_t, h_t⟩ for fixed random projections v_t.
    fn projected_loss(cell: &LstmCell, xs: &[Vec<f64>], proj: &[Vec<f64>]) -> f64 {
        let mut h = vec![0.0; cell.hidden_size()];
        let mut c = vec![0.0; cell.hidden_size()];
        let mut total = 0.0;
        for (x, v) in xs.iter().zip(proj) {
            let (nh, nc) = cell.step_apply(x, &h, &c).unwrap();
            total += nh.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            h = nh;
            c = nc;
        }
        total
    }

    fn check_sequence(seed: u64, steps: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cell = LstmCell::random(2, 3, &mut rng);
        let xs = random_seq(&mut rng, steps, 2);
        let proj = random_seq(&mut rng, steps, 3);
        cell.forward_sequence(&xs).unwrap();
        let grads = cell.backward(&proj).unwrap();
        let base = cell.flat_params();
        let mut probe = cell.clone();
        let r = grad_check(
            |p| {
                probe.set_flat_params(p).unwrap();
                projected_loss(&probe, &xs, &proj)
            },
            &base,
            &grads.params.concat(),
            1e-5,
        )
        .unwrap();
        assert!(r.passed, "seed {seed}: {r:?}");
        r.max_rel_error
    }

    #[test]
    fn zero_cell_stays_at_zero() {
        let cell = LstmCell::zeros(2, 3);
        let (h, c) = cell.step_apply(&[0.4, -0.2], &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
    }

    #[test]
    fn zero_cell_halves_memory() {
        let cell = LstmCell::zeros(1, 2);
        let (h, c) = cell.step_apply(&[0.0], &[0.0; 2], &[1.0; 2]).unwrap();
        for k in 0..2 {
            assert!((c[k] - 0.5).abs() < 1e-15);
            assert!((h[k] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cell = LstmCell::random(1, 4, &mut rng);
        assert!(cell.forget_bias().iter().all(|&b| b == 1.0));
    }

    #[test]
    fn dimension_errors() {
        let mut cell = LstmCell::zeros(2, 3);
        assert!(cell.step(&[1.0], &[0.0; 3], &[0.0; 3]).is_err());
        assert!(cell.step(&[1.0, 2.0], &[0.0; 2], &[0.0; 3]).is_err());
        cell.step(&[1.0, 2.0], &[0.0; 3], &[0.0; 3]).unwrap();
        assert!(matches!(
            cell.backward(&[vec![0.0; 3], vec![0.0; 3]]),
            Err(NnError::DimensionMismatch { .. })
        ));
        cell.clear_cache();
        assert_eq!(cell.backward(&[]).unwrap_err(), NnError::MissingForward("lstm"));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut cell = LstmCell::random(2, 3, &mut rng);
        let xs = random_seq(&mut rng, 5, 2);
        cell.forward_sequence(&xs).unwrap();
        let g = cell.backward(&vec![vec![0.0; 3]; 5]).unwrap();
        assert_eq!(g.params, zero_grads(&cell));
    }

    /// Single step, hand-derived: with h_prev = c_prev = 0 and upstream u,
    /// dL/db_o = u ⊙ tanh(c) ⊙ o(1−o), dL/db_i = u ⊙ o(1−tanh²c) ⊙ g ⊙ i(1−i),
    /// dL/db_f = 0 (c_prev = 0), dL/db_g = u ⊙ o(1−tanh²c) ⊙ i(1−g²).
    #[test]
    fn single_step_matches_symbolic_bias_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut cell = LstmCell::random(1, 2, &mut rng);
        let x = [0.7];
        let u = vec![0.3, -1.1];
        cell.step(&x, &[0.0; 2], &[0.0; 2]).unwrap();
        let cache = cell.cache[0].clone();
        let g = cell.backward(&[u.clone()]).unwrap();
        let hsz = 2;
        let bias = |gate: usize| &g.params[GATES + gate];
        for k in 0..hsz {
            let (i, o, gg, tc) = (cache.i[k], cache.o[k], cache.g[k], cache.tanh_c[k]);
            let dc = u[k] * o * (1.0 - tc * tc);
            assert!((bias(OUTPUT)[k] - u[k] * tc * o * (1.0 - o)).abs() < 1e-14);
            assert!((bias(INPUT)[k] - dc * gg * i * (1.0 - i)).abs() < 1e-14);
            assert_eq!(bias(FORGET)[k], 0.0);
            assert!((bias(CANDIDATE)[k] - dc * i * (1.0 - gg * gg)).abs() < 1e-14);
        }
        check_sequence(5, 1);
    }

    #[test]
    fn four_step_unroll_matches_finite_differences() {
        check_sequence(11, 4);
    }

    #[test]
    fn eight_step_unroll_matches_finite_differences() {
        for seed in 0..5 {
            check_sequence(100 + seed, 8);
        }
    }

    #[test]
    fn input_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut cell = LstmCell::random(2, 3, &mut rng);
        let xs = random_seq(&mut rng, 6, 2);
        let proj = random_seq(&mut rng, 6, 3);
        cell.forward_sequence(&xs).unwrap();
        let g = cell.backward(&proj).unwrap();
        let flat: Vec<f64> = xs.concat();
        let r = grad_check(
            |p| {
                let seq: Vec<Vec<f64>> = p.chunks(2).map(|c| c.to_vec()).collect();
                projected_loss(&cell, &seq, &proj)
            },
            &flat,
            &g.inputs.concat(),
            1e-5,
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
    }
}
