//! Dense neural network core: rectifier MLPs with exact reverse-mode
//! gradients, a flat parameter store, Adam, softmax and a
//! finite-difference gradient checker.
//!
//! Everything runs in 64-bit floats on the CPU; tapes cache one forward
//! pass and are consumed by value, so a tape cannot be reused.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, MlpSpec};

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::{Error, Result};

/// One affine layer; weights are (out x in).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    /// Uniform init in +-sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn glorot<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Self {
            w: Array2::from_shape_fn((out_dim, in_dim), |_| rng.random_range(-bound..bound)),
            b: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }
}

/// Multi-layer perceptron: rectifier on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Cached activations of one `Mlp::forward_traced` call.
#[derive(Debug)]
pub struct MlpTape {
    /// Input to each layer (index 0 = network input).
    inputs: Vec<Array1<f64>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Array1<f64>>,
}

/// Per-layer parameter gradients of one `Mlp`.
#[derive(Debug, Clone)]
pub struct MlpGrad {
    pub dw: Vec<Array2<f64>>,
    pub db: Vec<Array1<f64>>,
}

impl Mlp {
    /// `dims = [input, hidden..., output]`.
    pub fn new<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output dims");
        let layers = dims
            .windows(2)
            .map(|w| Linear::glorot(w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].in_dim()];
        d.extend(self.layers.iter().map(Linear::out_dim));
        d
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    fn check_input(&self, x: &Array1<f64>) -> Result<()> {
        if x.len() != self.in_dim() {
            return Err(Error::Shape {
                expected: self.in_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        let mut act = self.layers[0].w.dot(x) + &self.layers[0].b;
        for layer in self.layers.iter().skip(1) {
            act.mapv_inplace(|z| z.max(0.0));
            act = layer.w.dot(&act) + &layer.b;
        }
        Ok(act)
    }

    pub fn forward_traced(&self, x: Array1<f64>) -> Result<(Array1<f64>, MlpTape)> {
        self.check_input(&x)?;
        let mut inputs = vec![x];
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.w.dot(inputs.last().unwrap()) + &layer.b;
            if i == self.layers.len() - 1 {
                return Ok((z, MlpTape { inputs, pre }));
            }
            let a = z.mapv(|v| v.max(0.0));
            pre.push(z);
            inputs.push(a);
        }
        unreachable!("loop returns on the last layer");
    }

    /// Exact reverse pass: accumulates parameter gradients into `grad`
    /// and returns the gradient with respect to the input. The tape is
    /// consumed.
    pub fn backward(&self, tape: MlpTape, dy: &Array1<f64>, grad: &mut MlpGrad) -> Array1<f64> {
        let mut dz = dy.clone();
        for i in (0..self.layers.len()).rev() {
            let x = &tape.inputs[i];
            // dW += dz (outer) x ; db += dz
            {
                let mut dwi = grad.dw[i].view_mut();
                for (r, dzr) in dz.iter().enumerate() {
                    if *dzr != 0.0 {
                        let mut row = dwi.row_mut(r);
                        row.scaled_add(*dzr, x);
                    }
                }
            }
            grad.db[i] += &dz;
            let dx = self.layers[i].w.t().dot(&dz);
            if i == 0 {
                return dx;
            }
            // Through the rectifier of the previous hidden layer.
            let mut masked = dx;
            for (g, z) in masked.iter_mut().zip(tape.pre[i - 1].iter()) {
                if *z <= 0.0 {
                    *g = 0.0;
                }
            }
            dz = masked;
        }
        unreachable!("loop returns at layer 0");
    }

    pub fn zero_grad(&self) -> MlpGrad {
        MlpGrad {
            dw: self
                .layers
                .iter()
                .map(|l| Array2::zeros((l.out_dim(), l.in_dim())))
                .collect(),
            db: self.layers.iter().map(|l| Array1::zeros(l.out_dim())).collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.len() + l.b.len())
            .sum()
    }
}

/// Named, ordered collection of MLPs with a version counter. Shapes are
/// fixed at construction; the flat layout is stable for the lifetime of
/// the store.
#[derive(Debug, Clone)]
pub struct ParameterStore {
    entries: Vec<(String, Mlp)>,
    version: u64,
}

impl ParameterStore {
    pub fn new(entries: Vec<(String, Mlp)>) -> Self {
        Self {
            entries,
            version: 0,
        }
    }

    pub fn from_parts(entries: Vec<(String, Mlp)>, version: u64) -> Self {
        Self { entries, version }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn bump_version(&mut self) {
        self.version += 1;
    }

    pub fn index_of(&self, name: &str) -> usize {
        self.entries
            .iter()
            .position(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("no MLP named {name}"))
    }

    pub fn mlp(&self, name: &str) -> &Mlp {
        &self.entries[self.index_of(name)].1
    }

    pub fn entries(&self) -> &[(String, Mlp)] {
        &self.entries
    }

    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.param_count()).sum()
    }

    pub fn arch(&self) -> Vec<MlpSpec> {
        self.entries
            .iter()
            .map(|(name, mlp)| MlpSpec {
                name: name.clone(),
                dims: mlp.dims(),
            })
            .collect()
    }

    /// Row-major weights then bias, per layer, per MLP, in entry order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (_, mlp) in &self.entries {
            for layer in &mlp.layers {
                out.extend(layer.w.iter());
                out.extend(layer.b.iter());
            }
        }
        out
    }

    /// Inverse of `flatten`; shapes must match.
    pub fn set_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length");
        let mut off = 0;
        for (_, mlp) in &mut self.entries {
            for layer in &mut mlp.layers {
                let wn = layer.w.len();
                layer
                    .w
                    .as_slice_mut()
                    .unwrap()
                    .copy_from_slice(&flat[off..off + wn]);
                off += wn;
                let bn = layer.b.len();
                layer
                    .b
                    .as_slice_mut()
                    .unwrap()
                    .copy_from_slice(&flat[off..off + bn]);
                off += bn;
            }
        }
    }
}

/// Gradients aligned with a `ParameterStore`.
#[derive(Debug, Clone)]
pub struct GradStore {
    pub grads: Vec<MlpGrad>,
}

impl GradStore {
    pub fn zeros_like(store: &ParameterStore) -> Self {
        Self {
            grads: store.entries().iter().map(|(_, m)| m.zero_grad()).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.grads {
            for (dw, db) in g.dw.iter().zip(&g.db) {
                out.extend(dw.iter());
                out.extend(db.iter());
            }
        }
        out
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    assert!(!scores.is_empty(), "softmax of an empty vector");
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Adaptive moment estimation over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One descent step along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub n_checked: usize,
    pub max_rel_err: f64,
    pub worst_coord: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} ({} coords, max rel err {:.3e} at #{}, tol {:.1e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.n_checked,
            self.max_rel_err,
            self.worst_coord,
            self.tolerance
        )
    }
}

/// Central-difference step used by the gradient checker.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Compares `analytic` against central differences of `loss` on
/// `n_coords` random parameter coordinates (all coordinates when the
/// store is small enough).
pub fn gradient_check<F, R>(
    loss: F,
    store: &ParameterStore,
    analytic: &[f64],
    n_coords: usize,
    tolerance: f64,
    rng: &mut R,
) -> GradCheckReport
where
    F: Fn(&ParameterStore) -> f64,
    R: Rng,
{
    let mut theta = store.flatten();
    assert_eq!(theta.len(), analytic.len());
    let total = theta.len();
    let coords: Vec<usize> = if n_coords >= total {
        (0..total).collect()
    } else {
        rand::seq::index::sample(rng, total, n_coords).into_vec()
    };

    let mut probe = store.clone();
    let mut max_rel = 0.0;
    let mut worst = 0;
    for &c in &coords {
        let orig = theta[c];
        theta[c] = orig + GRAD_CHECK_STEP;
        probe.set_from_flat(&theta);
        let up = loss(&probe);
        theta[c] = orig - GRAD_CHECK_STEP;
        probe.set_from_flat(&theta);
        let down = loss(&probe);
        theta[c] = orig;

        let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
        let denom = numeric.abs().max(analytic[c].abs()).max(1e-10);
        let rel = (numeric - analytic[c]).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
            worst = c;
        }
    }
    probe.set_from_flat(&theta);
    GradCheckReport {
        n_checked: coords.len(),
        max_rel_err: max_rel,
        worst_coord: worst,
        tolerance,
        pass: max_rel < tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn zero_network_maps_to_zero() {
        let mut mlp = Mlp::new(&[4, 8, 3], &mut rng());
        for layer in &mut mlp.layers {
            layer.w.fill(0.0);
            layer.b.fill(0.0);
        }
        let y = mlp.forward(&Array1::from_vec(vec![1.0, -2.0, 3.0, 0.5])).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_layers_pass_nonnegative_input_through() {
        let mut mlp = Mlp::new(&[3, 3, 3], &mut rng());
        for layer in &mut mlp.layers {
            layer.w.assign(&Array2::eye(3));
            layer.b.fill(0.0);
        }
        let x = Array1::from_vec(vec![0.5, 0.0, 2.0]);
        assert_eq!(mlp.forward(&x).unwrap(), x);
    }

    #[test]
    fn forward_is_pure() {
        let mlp = Mlp::new(&[5, 16, 2], &mut rng());
        let x = Array1::from_vec(vec![0.1, -0.2, 0.3, 0.4, -0.5]);
        assert_eq!(mlp.forward(&x).unwrap(), mlp.forward(&x).unwrap());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mlp = Mlp::new(&[5, 4, 2], &mut rng());
        let x = Array1::from_vec(vec![1.0; 3]);
        assert!(matches!(
            mlp.forward(&x),
            Err(Error::Shape {
                expected: 5,
                got: 3
            })
        ));
    }

    #[test]
    fn softmax_basics() {
        assert_eq!(softmax(&[2.0, 2.0, 2.0, 2.0]), vec![0.25; 4]);
        let p = softmax(&[1000.0, 0.0]);
        assert!(p[0] > 0.999 && p.iter().all(|v| v.is_finite()));
        assert_eq!(softmax(&[42.0]), vec![1.0]);
        // Shift invariance.
        let a = softmax(&[0.3, -1.2, 2.0]);
        let b = softmax(&[0.3 + 7.0, -1.2 + 7.0, 2.0 + 7.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_layer_gradient_is_outer_product() {
        let mut r = rng();
        let mlp = Mlp::new(&[3, 2], &mut r);
        let x = Array1::from_vec(vec![1.0, -2.0, 0.5]);
        let (_, tape) = mlp.forward_traced(x.clone()).unwrap();
        let mut grad = mlp.zero_grad();
        let dy = Array1::from_vec(vec![2.0, -1.0]);
        let dx = mlp.backward(tape, &dy, &mut grad);
        for r_ in 0..2 {
            for c in 0..3 {
                assert_eq!(grad.dw[0][[r_, c]], dy[r_] * x[c]);
            }
        }
        assert_eq!(grad.db[0], dy);
        assert_eq!(dx, mlp.layers[0].w.t().dot(&dy));
    }

    #[test]
    fn rectifier_blocks_gradient_at_negative_preactivation() {
        let mut mlp = Mlp::new(&[1, 1, 1], &mut rng());
        mlp.layers[0].w[[0, 0]] = 1.0;
        mlp.layers[0].b[0] = 0.0;
        mlp.layers[1].w[[0, 0]] = 1.0;
        mlp.layers[1].b[0] = 0.0;
        let (_, tape) = mlp.forward_traced(Array1::from_vec(vec![-3.0])).unwrap();
        let mut grad = mlp.zero_grad();
        let dx = mlp.backward(tape, &Array1::from_vec(vec![1.0]), &mut grad);
        assert_eq!(dx[0], 0.0);
        assert_eq!(grad.dw[0][[0, 0]], 0.0);
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let mut r = rng();
        let mlp = Mlp::new(&[4, 8, 3], &mut r);
        let x = Array1::from_vec(vec![0.3, -0.1, 0.7, 0.2]);
        let run = |dy: &Array1<f64>| {
            let (_, tape) = mlp.forward_traced(x.clone()).unwrap();
            let mut g = mlp.zero_grad();
            mlp.backward(tape, dy, &mut g);
            let mut flat = Vec::new();
            for (dw, db) in g.dw.iter().zip(&g.db) {
                flat.extend(dw.iter().cloned());
                flat.extend(db.iter().cloned());
            }
            flat
        };
        let d1 = Array1::from_vec(vec![1.0, 0.5, -0.2]);
        let d2 = Array1::from_vec(vec![-0.3, 0.8, 0.1]);
        let combo = &d1 * 2.0 + &d2 * -1.5;
        let g1 = run(&d1);
        let g2 = run(&d2);
        let gc = run(&combo);
        for i in 0..gc.len() {
            assert!((gc[i] - (2.0 * g1[i] - 1.5 * g2[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn flatten_roundtrip_is_identity() {
        let mut r = rng();
        let store = ParameterStore::new(vec![
            ("a".into(), Mlp::new(&[3, 5, 2], &mut r)),
            ("b".into(), Mlp::new(&[2, 4, 4], &mut r)),
        ]);
        let flat = store.flatten();
        let mut copy = store.clone();
        copy.set_from_flat(&flat);
        assert_eq!(copy.flatten(), flat);
        for (e1, e2) in store.entries().iter().zip(copy.entries()) {
            assert_eq!(e1.1, e2.1);
        }
    }

    #[test]
    fn gradient_check_quadratic_is_exact() {
        let mut r = rng();
        let store = ParameterStore::new(vec![("w".into(), Mlp::new(&[2, 3, 1], &mut r))]);
        // loss = 0.5 * ||theta||^2, gradient = theta.
        let loss = |s: &ParameterStore| 0.5 * s.flatten().iter().map(|t| t * t).sum::<f64>();
        let analytic = store.flatten();
        let report = gradient_check(loss, &store, &analytic, usize::MAX, 1e-6, &mut r);
        assert!(report.pass, "{report}");
    }

    #[test]
    fn gradient_check_catches_corruption() {
        let mut r = rng();
        let store = ParameterStore::new(vec![("w".into(), Mlp::new(&[2, 3, 1], &mut r))]);
        let loss = |s: &ParameterStore| 0.5 * s.flatten().iter().map(|t| t * t).sum::<f64>();
        let mut bad = store.flatten();
        bad[3] += 0.5;
        let report = gradient_check(loss, &store, &bad, usize::MAX, 1e-6, &mut r);
        assert!(!report.pass);
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut adam = Adam::new(0.1, 2);
        let mut theta = vec![3.0, -2.0];
        for _ in 0..500 {
            let grad: Vec<f64> = theta.iter().map(|t| 2.0 * t).collect();
            adam.step(&mut theta, &grad);
        }
        assert!(theta.iter().all(|t| t.abs() < 1e-2), "{theta:?}");
    }
}
