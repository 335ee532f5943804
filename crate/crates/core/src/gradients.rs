//! Backpropagation to the inputs of a frozen network.
//!
//! For the normalized-scale loss `L = (1/n)·Σ(ŷ − y)²` the error terms are
//!
//! ```text
//! δ^(L) = ∂L/∂ŷ ⊙ σ^(L)'(z^(L))
//! δ^(l) = (W^(l+1)ᵀ·δ^(l+1)) ⊙ σ^(l)'(z^(l))      l = L−1, …, 1
//! δ^(0) = W^(1)ᵀ·δ^(1)
//! ```
//!
//! and since the input is `a^(0) = [v, dir, θ]`, the loss gradient with
//! respect to the device parameters is the `θ` block of `δ^(0)`. No
//! activation derivative is applied at the input layer.

use crate::oracle::{DeviceParams, SweepCurve};
use crate::surrogate::{ForwardCache, SurrogateModel};
use crate::{Error, Result};

/// Column of `t_dl` and `t_fl` in the feature row `(v, dir, t_dl, t_fl)`.
pub const THETA_COLUMNS: [usize; 2] = [2, 3];
const V_COLUMN: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct InputGradient {
    /// `(∂L/∂t_dl, ∂L/∂t_fl)` in normalized-loss units per nm.
    pub d_theta: [f64; 2],
    /// Per-point `∂L/∂v`, per volt. Diagnostic only.
    pub d_v: Vec<f64>,
    /// Sweep MSE on the normalized target scale.
    pub loss: f64,
    /// Raw-scale prediction at each target point.
    pub prediction: Vec<f64>,
}

impl InputGradient {
    pub fn norm(&self) -> f64 {
        self.d_theta[0].hypot(self.d_theta[1])
    }

    pub fn is_finite(&self) -> bool {
        self.d_theta.iter().all(|g| g.is_finite()) && self.loss.is_finite()
    }
}

fn check_cache(model: &SurrogateModel, cache: &ForwardCache) -> Result<()> {
    let sizes = model.layer_sizes();
    if cache.activations.len() != sizes.len() || cache.pre_activations.len() != sizes.len() {
        return Err(Error::State(format!(
            "forward cache holds {} layers, model has {}",
            cache.activations.len(),
            sizes.len()
        )));
    }
    for (l, &width) in sizes.iter().enumerate() {
        let z_len = if l == 0 { 0 } else { cache.batch * width };
        if cache.activations[l].len() != cache.batch * width
            || cache.pre_activations[l].len() != z_len
        {
            return Err(Error::State(format!(
                "forward cache layer {l} does not match width {width} for batch {}",
                cache.batch
            )));
        }
    }
    Ok(())
}

/// `δ^(L) = (2/n)(ŷ − y) ⊙ σ^(L)'(z^(L))` on the normalized scale, where `n`
/// counts every output value in the batch.
pub fn output_delta(
    model: &SurrogateModel,
    cache: &ForwardCache,
    target_normalized: &[f64],
) -> Result<Vec<f64>> {
    check_cache(model, cache)?;
    let out = cache.output();
    if target_normalized.len() != out.len() {
        return Err(Error::shape(out.len(), target_normalized.len()));
    }
    if out.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    let activation = model.layers().last().unwrap().activation;
    let z = cache.pre_activations.last().unwrap();
    let scale = 2.0 / out.len() as f64;
    Ok(out
        .iter()
        .zip(target_normalized)
        .zip(z)
        .map(|((&a, &y), &z)| scale * (a - y) * activation.derivative(z, a))
        .collect())
}

/// Runs the δ recursion from `δ^(L)` down to `δ^(0)`.
///
/// Returns `deltas` with `deltas[l] = δ^(l)` for `l = 0..=L`, each row-major
/// `batch × width`.
pub fn backpropagate_delta(
    model: &SurrogateModel,
    cache: &ForwardCache,
    delta_out: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_cache(model, cache)?;
    let layers = model.layers();
    let depth = layers.len();
    if delta_out.len() != cache.activations[depth].len() {
        return Err(Error::State(format!(
            "δ^(L) has {} entries, cache output has {}",
            delta_out.len(),
            cache.activations[depth].len()
        )));
    }
    let mut deltas = vec![Vec::new(); depth + 1];
    deltas[depth] = delta_out.to_vec();
    for l in (0..depth).rev() {
        // W^(l+1) is layers[l]
        let layer = &layers[l];
        let upper = &deltas[l + 1];
        let mut delta = vec![0.0; cache.batch * layer.in_dim];
        for (d_up, d) in upper
            .chunks_exact(layer.out_dim)
            .zip(delta.chunks_exact_mut(layer.in_dim))
        {
            for (o, &g) in d_up.iter().enumerate() {
                if g != 0.0 {
                    for (di, &w) in d.iter_mut().zip(layer.row(o)) {
                        *di += w * g;
                    }
                }
            }
        }
        if l > 0 {
            let activation = layers[l - 1].activation;
            let z = &cache.pre_activations[l];
            let a = &cache.activations[l];
            for ((d, &z), &a) in delta.iter_mut().zip(z).zip(a) {
                *d *= activation.derivative(z, a);
            }
        }
        deltas[l] = delta;
    }
    Ok(deltas)
}

/// `∂L/∂θ` of the sweep MSE between the model's prediction at `params` and
/// `target`, evaluated at every `(v, dir)` of the target.
///
/// The per-point θ blocks of `δ^(0)` are summed; because `δ^(L)` carries the
/// `1/n` of the MSE this equals the mean of the per-point gradients. The
/// result is divided by the input standardization std so it is expressed per
/// raw nm.
pub fn loss_gradient_theta(
    model: &SurrogateModel,
    params: DeviceParams,
    target: &SweepCurve,
) -> Result<InputGradient> {
    if target.is_empty() {
        return Err(Error::domain("target curve is empty"));
    }
    if !(params.t_dl.is_finite() && params.t_fl.is_finite()) {
        return Err(Error::domain("device params must be finite"));
    }
    if model.input_dim() != 4 || model.output_dim() != 1 {
        return Err(Error::shape("a 4-input, 1-output model", format!("{:?}", model.layer_sizes())));
    }
    let cache = model.forward_cached(&SurrogateModel::sweep_inputs(params, target))?;
    let norm = model.normalization();
    let y: Vec<f64> = target
        .points
        .iter()
        .map(|pt| norm.normalize_output(pt.p, 0))
        .collect();
    let loss = crate::metrics::mse(cache.output(), &y)?;
    let delta_out = output_delta(model, &cache, &y)?;
    let deltas = backpropagate_delta(model, &cache, &delta_out)?;

    let mut d_theta = [0.0; 2];
    let mut d_v = Vec::with_capacity(cache.batch);
    for row in deltas[0].chunks_exact(model.input_dim()) {
        for (k, &col) in THETA_COLUMNS.iter().enumerate() {
            d_theta[k] += row[col];
        }
        d_v.push(row[V_COLUMN] / norm.input_std[V_COLUMN]);
    }
    for (k, &col) in THETA_COLUMNS.iter().enumerate() {
        d_theta[k] /= norm.input_std[col];
    }
    Ok(InputGradient {
        d_theta,
        d_v,
        loss,
        prediction: model.denormalize(cache.output()),
    })
}

/// Sweep MSE on the normalized target scale, without gradients.
pub fn sweep_loss(model: &SurrogateModel, params: DeviceParams, target: &SweepCurve) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::domain("target curve is empty"));
    }
    let pred = model.forward(&SurrogateModel::sweep_inputs(params, target))?;
    let norm = model.normalization();
    let (p, y): (Vec<f64>, Vec<f64>) = pred
        .iter()
        .zip(&target.points)
        .map(|(&p, pt)| (norm.normalize_output(p, 0), norm.normalize_output(pt.p, 0)))
        .unzip();
    crate::metrics::mse(&p, &y)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;
    use crate::oracle::{simulate_sweep, Direction, OracleConfig, SweepPoint};
    use crate::rng;
    use crate::surrogate::{Activation, Layer, Normalization};

    /// Random network with non-trivial normalization statistics.
    fn random_model(seed: u64, hidden: &[usize]) -> SurrogateModel {
        let mut rng = rng::seeded(seed ^ 0xABCD);
        let norm = Normalization {
            input_mean: vec![0.2, 0.0, 1.2, 8.0],
            input_std: vec![1.7, 1.0, 0.5, 4.2],
            output_mean: vec![rng.random_range(-2.0..2.0)],
            output_std: vec![rng.random_range(5.0..15.0)],
        };
        let mut sizes = vec![4];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut model = SurrogateModel::new(&sizes, norm, seed).unwrap();
        for layer in model.layers_mut() {
            for b in &mut layer.biases {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        model
    }

    fn random_target(seed: u64) -> SweepCurve {
        let mut rng = rng::seeded(seed);
        let params = DeviceParams::new(rng.random_range(0.5..2.0), rng.random_range(2.0..14.0)).unwrap();
        let mut curve = simulate_sweep(params, &OracleConfig::default(), 0.1).unwrap();
        // subsample to keep the finite-difference suite fast
        curve.points = curve.points.into_iter().step_by(5).collect();
        curve
    }

    fn random_theta(seed: u64) -> DeviceParams {
        let mut rng = rng::seeded(seed ^ 0x5555);
        DeviceParams {
            t_dl: rng.random_range(0.6..1.9),
            t_fl: rng.random_range(2.5..13.5),
        }
    }

    fn central(model: &SurrogateModel, params: DeviceParams, target: &SweepCurve, h: f64) -> [f64; 2] {
        let loss = |p: DeviceParams| sweep_loss(model, p, target).unwrap();
        let dl = (loss(DeviceParams { t_dl: params.t_dl + h, ..params })
            - loss(DeviceParams { t_dl: params.t_dl - h, ..params }))
            / (2.0 * h);
        let fl = (loss(DeviceParams { t_fl: params.t_fl + h, ..params })
            - loss(DeviceParams { t_fl: params.t_fl - h, ..params }))
            / (2.0 * h);
        [dl, fl]
    }

    /// Richardson-extrapolated central differences, O(h⁴).
    fn fd_theta(model: &SurrogateModel, params: DeviceParams, target: &SweepCurve, h: f64) -> [f64; 2] {
        let coarse = central(model, params, target, h);
        let fine = central(model, params, target, h / 2.0);
        [(4.0 * fine[0] - coarse[0]) / 3.0, (4.0 * fine[1] - coarse[1]) / 3.0]
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
    }

    #[test]
    fn zero_residual_gives_zero_output_delta() {
        let model = random_model(1, &[6]);
        let x = [0.3, 1.0, 1.0, 5.0, -0.3, -1.0, 1.5, 7.0];
        let cache = model.forward_cached(&x).unwrap();
        let y = cache.output().to_vec();
        let d = output_delta(&model, &cache, &y).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        let deltas = backpropagate_delta(&model, &cache, &d).unwrap();
        assert!(deltas.iter().flatten().all(|&v| v == 0.0));
    }

    fn linear_model(weights: [f64; 4]) -> SurrogateModel {
        let layer = Layer {
            in_dim: 4,
            out_dim: 1,
            weights: weights.to_vec(),
            biases: vec![0.0],
            activation: Activation::Identity,
        };
        SurrogateModel::from_layers(vec![layer], Normalization::identity(4, 1), 0).unwrap()
    }

    #[test]
    fn output_delta_single_point() {
        let model = linear_model([1.0, 0.0, 0.0, 0.0]);
        let cache = model.forward_cached(&[0.5, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(output_delta(&model, &cache, &[0.0]).unwrap(), vec![1.0]);
        // doubling the residual doubles δ^(L)
        let cache = model.forward_cached(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(output_delta(&model, &cache, &[0.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn single_linear_layer_delta_zero() {
        let model = linear_model([1.0, 2.0, 0.0, 0.0]);
        // ŷ = 1·1 + 2·0.5 = 2, y = 1.5 -> δ^(L) = 2·0.5/1 = 1, δ^(0) = Wᵀ·1
        let cache = model.forward_cached(&[1.0, 0.5, 3.0, 4.0]).unwrap();
        let d = output_delta(&model, &cache, &[1.5]).unwrap();
        let deltas = backpropagate_delta(&model, &cache, &d).unwrap();
        assert_eq!(deltas[0], vec![1.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn mismatched_cache_is_a_state_error() {
        let model = random_model(2, &[5]);
        let other = random_model(2, &[7]);
        let cache = other.forward_cached(&[0.1, 1.0, 1.0, 4.0]).unwrap();
        assert!(matches!(
            backpropagate_delta(&model, &cache, &[0.0]),
            Err(Error::State(_))
        ));
        let mut cache = model.forward_cached(&[0.1, 1.0, 1.0, 4.0]).unwrap();
        cache.pre_activations.pop();
        assert!(matches!(output_delta(&model, &cache, &[0.0]), Err(Error::State(_))));
    }

    #[test]
    fn delta_zero_matches_raw_input_finite_differences() {
        let h = 1e-4;
        for seed in 0..10 {
            let model = random_model(seed, &[8, 8]);
            let mut rng = rng::seeded(seed + 7);
            let x: Vec<f64> = vec![
                rng.random_range(-2.0..2.0),
                1.0,
                rng.random_range(0.5..2.0),
                rng.random_range(2.0..14.0),
            ];
            let y_raw = rng.random_range(-10.0..10.0);
            let y = model.normalization().normalize_output(y_raw, 0);
            let cache = model.forward_cached(&x).unwrap();
            let d = output_delta(&model, &cache, &[y]).unwrap();
            let deltas = backpropagate_delta(&model, &cache, &d).unwrap();
            let loss = |x: &[f64]| {
                let c = model.forward_cached(x).unwrap();
                (c.output()[0] - y).powi(2)
            };
            for j in [0usize, 2, 3] {
                let mut xp = x.clone();
                xp[j] += h;
                let mut xm = x.clone();
                xm[j] -= h;
                let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
                let an = deltas[0][j] / model.normalization().input_std[j];
                assert!(rel_err(an, fd) < 1e-5, "seed {seed} col {j}: {an} vs {fd}");
            }
        }
    }

    #[test]
    fn self_generated_target_is_stationary() {
        let model = random_model(3, &[8, 8]);
        let params = DeviceParams::new(1.1, 6.0).unwrap();
        let grid = random_target(3);
        let target = model.predict_sweep(params, &grid).unwrap();
        let g = loss_gradient_theta(&model, params, &target).unwrap();
        assert!(g.norm() < 1e-6, "{:?}", g.d_theta);
        assert!(g.loss < 1e-20);
    }

    #[test]
    fn empty_target_is_rejected() {
        let model = random_model(3, &[4]);
        let empty = SweepCurve {
            params: DeviceParams::new(1.0, 4.0).unwrap(),
            points: vec![],
        };
        assert!(loss_gradient_theta(&model, empty.params, &empty).is_err());
    }

    #[test]
    fn gradient_ignores_point_order() {
        let model = random_model(4, &[8, 8]);
        let params = random_theta(4);
        let target = random_target(4);
        let mut shuffled = target.clone();
        shuffled.points.reverse();
        shuffled.points.rotate_left(3);
        let a = loss_gradient_theta(&model, params, &target).unwrap();
        let b = loss_gradient_theta(&model, params, &shuffled).unwrap();
        for k in 0..2 {
            assert!(rel_err(a.d_theta[k], b.d_theta[k]) < 1e-12);
        }
    }

    #[test]
    fn gradient_of_sum_is_sum_of_gradients() {
        let model = random_model(5, &[8]);
        let params = random_theta(5);
        let target = random_target(5);
        let n = target.len() as f64;
        let full = loss_gradient_theta(&model, params, &target).unwrap();
        let mut summed = [0.0; 2];
        for pt in &target.points {
            let single = SweepCurve {
                params: target.params,
                points: vec![*pt],
            };
            let g = loss_gradient_theta(&model, params, &single).unwrap();
            summed[0] += g.d_theta[0] / n;
            summed[1] += g.d_theta[1] / n;
        }
        for k in 0..2 {
            assert!(rel_err(full.d_theta[k], summed[k]) < 1e-10);
        }
    }

    #[test]
    fn gradient_does_not_touch_weights() {
        let model = random_model(6, &[8, 8]);
        let before = model.clone();
        let _ = loss_gradient_theta(&model, random_theta(6), &random_target(6)).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn d_v_has_one_entry_per_point() {
        let model = random_model(8, &[8]);
        let target = random_target(8);
        let g = loss_gradient_theta(&model, random_theta(8), &target).unwrap();
        assert_eq!(g.d_v.len(), target.len());
        assert_eq!(g.prediction.len(), target.len());
    }

    #[test]
    fn handles_two_point_curve() {
        let model = random_model(9, &[4]);
        let target = SweepCurve {
            params: DeviceParams::new(1.0, 4.0).unwrap(),
            points: vec![
                SweepPoint { v: 0.5, dir: Direction::Up, p: 3.0 },
                SweepPoint { v: -0.5, dir: Direction::Down, p: -3.0 },
            ],
        };
        let g = loss_gradient_theta(&model, target.params, &target).unwrap();
        let fd = fd_theta(&model, target.params, &target, 1e-3);
        for k in 0..2 {
            assert!(rel_err(g.d_theta[k], fd[k]) < 1e-4);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn theta_gradient_matches_central_differences(seed in any::<u64>()) {
            let model = random_model(seed, &[8, 8]);
            let params = random_theta(seed);
            let target = random_target(seed);
            let g = loss_gradient_theta(&model, params, &target).unwrap();
            let fd = fd_theta(&model, params, &target, 1e-3);
            for k in 0..2 {
                prop_assert!(rel_err(g.d_theta[k], fd[k]) < 1e-4,
                    "component {}: analytic {} fd {}", k, g.d_theta[k], fd[k]);
            }
        }
    }
}
