//! Finite-difference checks of analytic gradients.

use rand::seq::index::sample;
use rand::Rng;

use super::nn::ParamStore;
use super::{Graph, Mode, Tensor, Var};
use crate::error::Result;
use crate::rng::{normal_vec, seeded};

/// Step of the five-point central difference.
pub const FD_STEP: f64 = 1e-5;

/// A ReLU or max-pool kink inside the stencil spoils one step size but
/// rarely several; a wrong analytic gradient disagrees at every step.
const RETRY_STEPS: [f64; 3] = [FD_STEP, FD_STEP / 10.0, FD_STEP / 100.0];
const RETRY_ABOVE: f64 = 1e-6;

/// Magnitudes below this are compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Five-point central difference of `f` at `x`.
pub fn derivative<F: FnMut(f64) -> Result<f64>>(mut f: F, x: f64, h: f64) -> Result<f64> {
    let (p2, p1, m1, m2) = (f(x + 2.0 * h)?, f(x + h)?, f(x - h)?, f(x - 2.0 * h)?);
    Ok((-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h))
}

/// A loss value and, when requested, per-parameter gradients.
pub type LossAndGrads = (f64, Option<Vec<Option<Vec<f64>>>>);

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub worst: f64,
    pub worst_at: String,
    pub checked: usize,
}

impl Default for GradCheckReport {
    fn default() -> Self {
        Self::new()
    }
}

impl GradCheckReport {
    pub fn new() -> Self {
        GradCheckReport {
            worst: 0.0,
            worst_at: String::new(),
            checked: 0,
        }
    }

    fn record(&mut self, err: f64, at: impl FnOnce() -> String) {
        self.checked += 1;
        if err > self.worst || err.is_nan() {
            self.worst = if err.is_nan() { f64::INFINITY } else { err };
            self.worst_at = at();
        }
    }

    pub fn merge(&mut self, other: GradCheckReport) {
        self.checked += other.checked;
        if other.worst > self.worst {
            self.worst = other.worst;
            self.worst_at = other.worst_at;
        }
    }
}

/// Compares `analytic` (one entry per parameter of `store`) with numeric
/// derivatives of `eval` on up to `per_tensor` coordinates of every trainable
/// tensor. Parameters are restored afterwards.
pub fn check_store<F, R>(
    store: &mut ParamStore,
    analytic: &[Option<Vec<f64>>],
    eval: F,
    per_tensor: usize,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore) -> Result<f64>,
    R: Rng + ?Sized,
{
    check_store_where(store, analytic, eval, per_tensor, rng, |_| true)
}

/// Like [`check_store`], restricted to trainable tensors whose name passes `keep`.
pub fn check_store_where<F, R, K>(
    store: &mut ParamStore,
    analytic: &[Option<Vec<f64>>],
    mut eval: F,
    per_tensor: usize,
    rng: &mut R,
    keep: K,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore) -> Result<f64>,
    R: Rng + ?Sized,
    K: Fn(&str) -> bool,
{
    let mut report = GradCheckReport::new();
    let ids: Vec<_> = store
        .ids()
        .filter(|&id| store.is_trainable(id) && keep(store.name(id)))
        .collect();
    for id in ids {
        let n = store.get(id).numel();
        let coords: Vec<usize> = if n <= per_tensor {
            (0..n).collect()
        } else {
            let mut c = sample(rng, n, per_tensor).into_vec();
            c.sort_unstable();
            c
        };
        for j in coords {
            let original = store.get(id).data[j];
            let a = analytic[id.0].as_ref().map_or(0.0, |g| g[j]);
            let mut err = f64::INFINITY;
            for step in RETRY_STEPS {
                let numeric = derivative(
                    |v| {
                        store.get_mut(id).data[j] = v;
                        eval(store)
                    },
                    original,
                    step,
                );
                store.get_mut(id).data[j] = original;
                err = err.min(rel_error(a, numeric?));
                if err < RETRY_ABOVE {
                    break;
                }
            }
            report.record(err, || format!("{}[{j}]", store.name(id)));
        }
    }
    Ok(report)
}

/// Same comparison for an input vector.
pub fn check_input<F>(x: &[f64], analytic: &[f64], mut eval: F) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut report = GradCheckReport::new();
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let numeric = derivative(
            |v| {
                probe[j] = v;
                eval(&probe)
            },
            x[j],
            FD_STEP,
        )?;
        probe[j] = x[j];
        report.record(rel_error(analytic[j], numeric), || format!("input[{j}]"));
    }
    Ok(report)
}

fn tensor(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::new(shape.to_vec(), data.to_vec()).expect("shape matches data")
}

/// Builds `loss = Σ proj · op(x)` and compares its input gradient with
/// finite differences.
pub(crate) fn fd_op(shape: &[usize], seed: u64, op: impl Fn(&mut Graph, Var) -> Var) -> Result<f64> {
    let mut rng = seeded(seed);
    let n: usize = shape.iter().product();
    let x0 = normal_vec(&mut rng, n, 1.0);
    let run = |x: &[f64], want_grad: bool| -> (f64, Option<Vec<f64>>) {
        let mut g = Graph::new();
        let xv = g.variable(tensor(shape, x));
        let y = op(&mut g, xv);
        let m = g.value(y).numel();
        let proj = g.input(Tensor {
            shape: g.value(y).shape.clone(),
            data: (0..m).map(|i| ((i * 7919 % 13) as f64 - 6.0) / 6.0).collect(),
        });
        let flat_y = g.reshape(y, &[1, m]).unwrap();
        let flat_p = g.reshape(proj, &[1, m]).unwrap();
        let zero = g.input(Tensor::zeros(&[1]));
        let l = g.linear(flat_y, flat_p, zero).unwrap();
        let l = g.sum(l);
        let grad = want_grad.then(|| g.backward(l).unwrap().wrt(xv).unwrap().to_vec());
        (g.value(l).item(), grad)
    };
    let (_, grad) = run(&x0, true);
    Ok(check_input(&x0, &grad.expect("gradient requested"), |x| Ok(run(x, false).0))?.worst)
}

type OpCase = (&'static str, Vec<usize>, Box<dyn Fn(&mut Graph, Var) -> Var>);

/// Worst relative gradient error of every graph op on a small random input.
pub fn check_ops() -> Result<Vec<(&'static str, f64)>> {
    let cases: Vec<OpCase> = vec![
        ("relu", vec![3, 5], Box::new(|g: &mut Graph, x| g.relu(x))),
        (
            "leaky_relu",
            vec![3, 5],
            Box::new(|g: &mut Graph, x| g.leaky_relu(x, 0.2)),
        ),
        ("sigmoid", vec![3, 5], Box::new(|g: &mut Graph, x| g.sigmoid(x))),
        ("tanh", vec![3, 5], Box::new(|g: &mut Graph, x| g.tanh(x))),
        (
            "softmax",
            vec![3, 5],
            Box::new(|g: &mut Graph, x| g.softmax(x).unwrap()),
        ),
        ("scale", vec![4], Box::new(|g: &mut Graph, x| g.scale(x, -1.5))),
        ("add_self", vec![4], Box::new(|g: &mut Graph, x| g.add(x, x).unwrap())),
        (
            "crop",
            vec![2, 2, 9],
            Box::new(|g: &mut Graph, x| g.crop(x, 2, 5).unwrap()),
        ),
        (
            "max_pool",
            vec![2, 3, 11],
            Box::new(|g: &mut Graph, x| g.max_pool1d(x, 2, 2).unwrap()),
        ),
        ("mean", vec![2, 6], Box::new(|g: &mut Graph, x| g.mean(x))),
        (
            "bce",
            vec![6, 1],
            Box::new(|g: &mut Graph, x| g.bce_with_logits(x, &[1.0, 0.0, 1.0, 1.0, 0.0, 0.5]).unwrap()),
        ),
        (
            "softmax_xent",
            vec![3, 4],
            Box::new(|g: &mut Graph, x| g.softmax_cross_entropy(x, &[0, 3, 1]).unwrap()),
        ),
        (
            "batch_norm_train",
            vec![4, 3, 5],
            Box::new(|g: &mut Graph, x| {
                let gamma = g.input(tensor(&[3], &[0.5, 1.5, -1.0]));
                let beta = g.input(tensor(&[3], &[0.1, 0.2, 0.3]));
                g.batch_norm(x, gamma, beta, Mode::BatchStats, &mut [0.0; 3], &mut [1.0; 3])
                    .unwrap()
            }),
        ),
        (
            "batch_norm_eval",
            vec![2, 3],
            Box::new(|g: &mut Graph, x| {
                let gamma = g.input(tensor(&[3], &[0.5, 1.5, -1.0]));
                let beta = g.input(tensor(&[3], &[0.1, 0.2, 0.3]));
                g.batch_norm(x, gamma, beta, Mode::Eval, &mut [0.2, 0.0, -1.0], &mut [2.0, 0.5, 1.0])
                    .unwrap()
            }),
        ),
        (
            "conv1d",
            vec![2, 3, 10],
            Box::new(|g: &mut Graph, x| {
                let mut rng = seeded(77);
                let w = g.input(tensor(&[4, 3, 5], &normal_vec(&mut rng, 60, 0.5)));
                let b = g.input(tensor(&[4], &[0.1, -0.2, 0.3, 0.0]));
                g.conv1d(x, w, b, 2, 2).unwrap()
            }),
        ),
        (
            "conv_transpose1d",
            vec![2, 3, 6],
            Box::new(|g: &mut Graph, x| {
                let mut rng = seeded(78);
                let w = g.input(tensor(&[3, 2, 4], &normal_vec(&mut rng, 24, 0.5)));
                let b = g.input(tensor(&[2], &[0.1, -0.2]));
                g.conv_transpose1d(x, w, b, 2, 1).unwrap()
            }),
        ),
        (
            "external",
            vec![5],
            Box::new(|g: &mut Graph, x| {
                // loss = Σ x², supplied from outside
                let v = g.value(x).data.clone();
                g.external_loss(x, v.iter().map(|a| a * a).sum(), v.iter().map(|a| 2.0 * a).collect())
                    .unwrap()
            }),
        ),
    ];
    cases
        .into_iter()
        .enumerate()
        .map(|(seed, (name, shape, op))| Ok((name, fd_op(&shape, seed as u64, op)?)))
        .collect()
}

/// Redraws every trainable tensor from N(0, σ²) with σ = 1/√fan_in, so that
/// activations are of order one and kinks are rarely straddled by the
/// finite-difference stencil.
pub fn randomize_for_check<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        if !store.is_trainable(id) {
            continue;
        }
        let t = store.get_mut(id);
        let fan_in: usize = if t.shape.len() >= 2 {
            t.shape[1..].iter().product()
        } else {
            1
        };
        let std = 1.0 / (fan_in as f64).sqrt();
        for v in &mut t.data {
            *v = std * crate::rng::standard_normal(rng);
        }
    }
}
