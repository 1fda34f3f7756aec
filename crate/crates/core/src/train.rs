//! Dictionary learning by backpropagation through the unrolled encoder:
//! the decoder, the exact reverse-mode gradient with respect to the
//! dictionary, and the minibatch training loop.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::encoder::{self, EncodeTrajectory};
use crate::error::{Error, Result};
use crate::simplex::{penalized_loss, PenalizedLossParams};

/// Gradient step size: fixed, or derived from the current dictionary as
/// 0.99 / σ_max(A)².
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum StepSize {
    Auto,
    Fixed(f64),
}

impl StepSize {
    pub fn resolve(&self, dict: &Dictionary) -> f64 {
        match self {
            StepSize::Auto => encoder::default_step_size(dict),
            StepSize::Fixed(a) => *a,
        }
    }
}

/// Hyperparameters of a training run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub unroll_depth: usize,
    pub step_size: StepSize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub atoms: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            unroll_depth: 100,
            step_size: StepSize::Auto,
            epochs: 200,
            batch_size: 128,
            learning_rate: 0.1,
            atoms: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0
            || self.unroll_depth == 0
            || self.epochs == 0
            || self.batch_size == 0
            || self.learning_rate < 0.0
            || self.atoms == 0
        {
            return Err(Error::Parse(format!("invalid training config: {self:?}")));
        }
        if let StepSize::Fixed(a) = self.step_size {
            if a <= 0.0 {
                return Err(Error::Parse(format!("step size must be positive, got {a}")));
            }
        }
        Ok(())
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub dictionary: Dictionary,
    /// m×n codes from a full-batch encode with the final dictionary.
    pub codes: Array2<f64>,
    /// Mean penalized loss per epoch.
    pub loss_history: Vec<f64>,
    pub config: TrainConfig,
}

impl TrainReport {
    /// Mean coefficient mass per atom across the batch.
    pub fn atom_usage(&self) -> Array1<f64> {
        let n = self.codes.ncols().max(1) as f64;
        self.codes.sum_axis(ndarray::Axis(1)) / n
    }
}

/// Decoder: ŷ = A x.
pub fn reconstruct(dict: &Dictionary, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    if x.len() != dict.len() {
        return Err(Error::DimensionMismatch(format!(
            "code has {} entries, dictionary has {} atoms",
            x.len(),
            dict.len()
        )));
    }
    Ok(dict.atoms().dot(&x))
}

/// Seeded initialization: m distinct data columns plus Gaussian jitter of
/// scale 1e-3 times the per-dataset standard deviation.
pub fn init_dictionary(points: ArrayView2<f64>, m: usize, seed: u64) -> Result<Dictionary> {
    let (d, n) = points.dim();
    if n < m {
        return Err(Error::InsufficientData { needed: m, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    indices.truncate(m);

    let mean = points.mean().unwrap_or(0.0);
    let var = points.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (d * n) as f64;
    let jitter = 1e-3 * var.sqrt();

    let normal = rand_distr::Normal::new(0.0, 1.0).expect("unit normal");
    let mut atoms = Array2::zeros((d, m));
    for (col, &i) in indices.iter().enumerate() {
        for row in 0..d {
            atoms[[row, col]] = points[[row, i]] + jitter * rng.sample::<f64, _>(normal);
        }
    }
    Dictionary::new(atoms)
}

/// Jacobian-vector product of the simplex projection on its recorded
/// active set: identity on survivors minus the survivor mean, zero off.
#[cfg(test)]
fn projection_jvp(adjoint: &Array1<f64>, active: &[usize]) -> Array1<f64> {
    let mut out = Array1::zeros(adjoint.len());
    projection_jvp_slice(
        adjoint.as_slice().expect("owned and contiguous"),
        active,
        out.as_slice_mut().expect("freshly allocated"),
    );
    out
}

fn projection_jvp_slice(adjoint: &[f64], active: &[usize], out: &mut [f64]) {
    out.fill(0.0);
    if active.is_empty() {
        return;
    }
    let mean: f64 = active.iter().map(|&i| adjoint[i]).sum::<f64>() / active.len() as f64;
    for &i in active {
        out[i] = adjoint[i] - mean;
    }
}

/// Exact reverse-mode gradient of 𝓛(A, y, x^(T)(A, y)) with respect to A,
/// propagated through every unrolled step of the recorded trajectory.
pub fn loss_gradient_a(
    dict: &Dictionary,
    y: ArrayView1<f64>,
    traj: &EncodeTrajectory,
    params: &PenalizedLossParams,
) -> Result<Array2<f64>> {
    let d = dict.dim();
    let m = dict.len();
    let depth = traj.depth();
    if y.len() != d
        || traj.iterates.iter().any(|x| x.len() != m)
        || traj.momentum_iterates.iter().any(|x| x.len() != m)
        || traj.active_sets.len() != depth
    {
        return Err(Error::TrajectoryMismatch(format!(
            "dictionary {d}x{m}, trajectory depth {depth}"
        )));
    }
    let schedule = encoder::momentum_schedule(depth);
    let alpha = params.step_size;
    let lambda = params.lambda;

    // flat row-major copies: this runs once per point per batch with a
    // depth-long inner loop, so keep every pass contiguous and reuse scratch
    let a_flat: Vec<f64> = dict.atoms().iter().copied().collect();
    let yv: Vec<f64> = y.iter().copied().collect();
    let mut grad = vec![0.0f64; d * m];

    let x_final = traj.iterates[depth]
        .as_slice()
        .expect("iterates are owned and contiguous");

    // residual and adjoint seeds at x^(T)
    let mut r = vec![0.0f64; d];
    for i in 0..d {
        let row = &a_flat[i * m..(i + 1) * m];
        let mut s = 0.0;
        for j in 0..m {
            s += row[j] * x_final[j];
        }
        r[i] = s - yv[i];
    }

    // direct terms: reconstruction and the locality penalty's atom dependence
    for i in 0..d {
        let row = &a_flat[i * m..(i + 1) * m];
        let g = &mut grad[i * m..(i + 1) * m];
        let ri = r[i];
        let yi = yv[i];
        for j in 0..m {
            g[j] += ri * x_final[j] + 2.0 * lambda * x_final[j] * (row[j] - yi);
        }
    }

    // adjoint of x^(T) through the loss: x̄ = Aᵀr + λ w
    let weights = dict.sq_distances(y)?;
    let mut xbar = vec![0.0f64; m];
    for i in 0..d {
        let row = &a_flat[i * m..(i + 1) * m];
        let ri = r[i];
        for j in 0..m {
            xbar[j] += row[j] * ri;
        }
    }
    for j in 0..m {
        xbar[j] += lambda * weights[j];
    }
    let mut xtbar = vec![0.0f64; m];
    let mut total = vec![0.0f64; m];
    let mut ubar = vec![0.0f64; m];
    let mut atau = vec![0.0f64; m];
    let mut au = vec![0.0f64; d];

    for t in (0..depth).rev() {
        let gamma = schedule.gammas[t];
        // x̃^(t+1) = x^(t+1) + γ(x^(t+1) − x^(t))
        for j in 0..m {
            total[j] = xbar[j] + (1.0 + gamma) * xtbar[j];
        }
        // through the projection's generalized Jacobian
        projection_jvp_slice(&total, &traj.active_sets[t], &mut ubar);
        for j in 0..m {
            xbar[j] = -gamma * xtbar[j];
        }

        // u = x̃^(t) − α ∇𝓛(x̃^(t)); ∂∇𝓛/∂x̃ = AᵀA
        let xt = traj.momentum_iterates[t]
            .as_slice()
            .expect("iterates are owned and contiguous");
        for i in 0..d {
            let row = &a_flat[i * m..(i + 1) * m];
            let mut s = 0.0;
            for j in 0..m {
                s += row[j] * ubar[j];
            }
            au[i] = s;
        }
        atau.fill(0.0);
        for i in 0..d {
            let row = &a_flat[i * m..(i + 1) * m];
            let aui = au[i];
            for j in 0..m {
                atau[j] += row[j] * aui;
            }
        }
        for j in 0..m {
            xtbar[j] = ubar[j] - alpha * atau[j];
        }

        // gradient-step dependence on A:
        //   ∇𝓛(x̃) = Aᵀ(Ax̃ − y) + λ w(A)
        for i in 0..d {
            let row = &a_flat[i * m..(i + 1) * m];
            let mut s = 0.0;
            for j in 0..m {
                s += row[j] * xt[j];
            }
            r[i] = s - yv[i];
        }
        for i in 0..d {
            let row = &a_flat[i * m..(i + 1) * m];
            let g = &mut grad[i * m..(i + 1) * m];
            let ri = r[i];
            let aui = au[i];
            let yi = yv[i];
            for j in 0..m {
                g[j] += -alpha * (ubar[j] * ri + xt[j] * aui)
                    - alpha * 2.0 * lambda * ubar[j] * (row[j] - yi);
            }
        }
    }

    Ok(Array2::from_shape_vec((d, m), grad).expect("shape matches by construction"))
}

/// Minibatch gradient descent on the dictionary.
///
/// Per batch: forward-encode every point, accumulate the exact unrolled
/// gradient, take one fixed-step update. Epoch order is shuffled by the
/// seed; the loss history records the mean penalized loss of each epoch's
/// forward passes.
pub fn train(points: ArrayView2<f64>, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let n = points.ncols();
    if n < cfg.batch_size {
        return Err(Error::InsufficientData {
            needed: cfg.batch_size,
            got: n,
        });
    }

    let mut dict = init_dictionary(points, cfg.atoms, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let alpha = cfg.step_size.resolve(&dict);
            let params = PenalizedLossParams::new(cfg.lambda, alpha, cfg.unroll_depth)?;
            let (loss_sum, grad) = batch_backward(&dict, points, batch, &params)?;
            epoch_loss += loss_sum;
            let scale = cfg.learning_rate / batch.len() as f64;
            *dict.atoms_mut() -= &(grad * scale);
        }
        let mean_loss = epoch_loss / n as f64;
        if !mean_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        loss_history.push(mean_loss);
    }

    // final full-batch encode
    let alpha = cfg.step_size.resolve(&dict);
    let params = PenalizedLossParams::new(cfg.lambda, alpha, cfg.unroll_depth)?;
    let (codes, _) = encoder::batch_encode(&dict, points, &params)?;

    Ok(TrainReport {
        dictionary: dict,
        codes,
        loss_history,
        config: cfg.clone(),
    })
}

/// Forward/backward over one batch. Points are processed independently
/// (possibly on worker threads) and reduced in fixed index order.
fn batch_backward(
    dict: &Dictionary,
    points: ArrayView2<f64>,
    batch: &[usize],
    params: &PenalizedLossParams,
) -> Result<(f64, Array2<f64>)> {
    let per_point = |&i: &usize| -> Result<(f64, Array2<f64>)> {
        let y = points.column(i);
        let traj = encoder::encode(dict, y, params)?;
        let code = traj.final_code()?;
        let loss = penalized_loss(dict, y, &code, params.lambda)?;
        let grad = loss_gradient_a(dict, y, &traj, params)?;
        Ok((loss, grad))
    };

    let threads = crate::worker_threads().min(batch.len().max(1));
    let results: Vec<Result<(f64, Array2<f64>)>> = if threads <= 1 {
        batch.iter().map(per_point).collect()
    } else {
        let chunk = batch.len().div_ceil(threads);
        let mut slots: Vec<Option<Result<(f64, Array2<f64>)>>> =
            (0..batch.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            for (ids, out) in batch.chunks(chunk).zip(slots.chunks_mut(chunk)) {
                scope.spawn(|| {
                    for (id, slot) in ids.iter().zip(out.iter_mut()) {
                        *slot = Some(per_point(id));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("slot filled")).collect()
    };

    let mut loss_sum = 0.0;
    let mut grad = Array2::zeros((dict.dim(), dict.len()));
    for r in results {
        let (loss, g) = r?;
        loss_sum += loss;
        grad += &g;
    }
    Ok((loss_sum, grad))
}
