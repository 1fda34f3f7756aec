//! Accelerated projected gradient descent encoder for the penalized
//! objective, recording the full iterate trajectory so the training module
//! can backpropagate through the unrolled steps.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg;
use crate::simplex::{project_simplex_slice, PenalizedLossParams, SimplexCode};

/// Nesterov momentum coefficients for T accelerated steps.
#[derive(Debug, Clone)]
pub struct MomentumSchedule {
    /// η^(1..T) under η^(t+1) = (1 + √(1 + 4(η^(t))²)) / 2, η^(1) = 1.
    pub etas: Vec<f64>,
    /// γ^(t) = (η^(t) − 1) / η^(t+1), with γ^(0) = 0.
    pub gammas: Vec<f64>,
}

/// The recorded forward pass of one encode: projected iterates x^(0..T),
/// momentum iterates x̃^(0..T), and the surviving coordinates of each
/// projection.
#[derive(Debug, Clone)]
pub struct EncodeTrajectory {
    pub iterates: Vec<Array1<f64>>,
    pub momentum_iterates: Vec<Array1<f64>>,
    pub active_sets: Vec<Vec<usize>>,
}

impl EncodeTrajectory {
    /// The encoder output x^(T).
    pub fn final_code(&self) -> Result<SimplexCode> {
        SimplexCode::new(self.iterates.last().expect("T >= 1").clone())
    }

    pub fn depth(&self) -> usize {
        self.iterates.len() - 1
    }
}

/// Momentum schedule of length T.
///
/// Uses the standard squared recurrence with γ^(0) = 0; all γ^(t) ∈ [0, 1)
/// and the first step carries no momentum.
pub fn momentum_schedule(depth: usize) -> MomentumSchedule {
    let mut etas = Vec::with_capacity(depth);
    let mut gammas = Vec::with_capacity(depth);
    let mut eta = 1.0f64;
    for t in 0..depth {
        etas.push(eta);
        let next = (1.0 + (1.0 + 4.0 * eta * eta).sqrt()) / 2.0;
        gammas.push(if t == 0 { 0.0 } else { (eta - 1.0) / next });
        eta = next;
    }
    MomentumSchedule { etas, gammas }
}

/// Default step size 0.99 / σ_max(A)², the largest step certified by the
/// smooth part's curvature (the locality term is linear in x).
pub fn default_step_size(dict: &Dictionary) -> f64 {
    let sigma = linalg::sigma_max(dict.atoms(), 100, 1e-10);
    if sigma <= 0.0 {
        1.0
    } else {
        0.99 / (sigma * sigma)
    }
}

/// Run T accelerated projected gradient steps from x^(0) = x̃^(0) = 0.
///
/// x^(t+1) = P_S(x̃^(t) − α ∇𝓛(x̃^(t))), x̃^(t+1) = x^(t+1) + γ^(t)(x^(t+1) − x^(t)).
/// The zero initialization is off the simplex; only projected iterates are
/// feasible, which is all the objective ever sees.
pub fn encode(
    dict: &Dictionary,
    y: ArrayView1<f64>,
    params: &PenalizedLossParams,
) -> Result<EncodeTrajectory> {
    encode_from(dict, y, Array1::zeros(dict.len()).view(), params)
}

/// Same as [`encode`] but starting from an arbitrary x^(0) = x̃^(0) = x0
/// (used to verify that restarts agree on the convex objective).
pub fn encode_from(
    dict: &Dictionary,
    y: ArrayView1<f64>,
    x0: ArrayView1<f64>,
    params: &PenalizedLossParams,
) -> Result<EncodeTrajectory> {
    let m = dict.len();
    if x0.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "start has {} entries, dictionary has {m} atoms",
            x0.len()
        )));
    }
    let depth = params.unroll_depth;
    let schedule = momentum_schedule(depth);
    let d = dict.dim();
    let alpha = params.step_size;

    let mut iterates = Vec::with_capacity(depth + 1);
    let mut momentum_iterates = Vec::with_capacity(depth + 1);
    let mut active_sets = Vec::with_capacity(depth);

    // flat row-major scratch: the step body runs thousands of times per
    // training point, so keep everything contiguous and allocation-free
    let a_flat: Vec<f64> = dict.atoms().iter().copied().collect();
    let yv: Vec<f64> = y.iter().copied().collect();
    let lw: Vec<f64> = dict
        .sq_distances(y)?
        .iter()
        .map(|&w| params.lambda * w)
        .collect();

    let mut x: Vec<f64> = x0.to_vec();
    let mut xt: Vec<f64> = x0.to_vec();
    iterates.push(Array1::from_vec(x.clone()));
    momentum_iterates.push(Array1::from_vec(xt.clone()));

    let mut r = vec![0.0f64; d];
    let mut g = vec![0.0f64; m];
    let mut target = vec![0.0f64; m];
    let mut next = vec![0.0f64; m];
    let mut sort_buf = Vec::with_capacity(m);

    for t in 0..depth {
        // r = A x̃ − y
        for i in 0..d {
            let row = &a_flat[i * m..(i + 1) * m];
            let mut s = 0.0;
            for j in 0..m {
                s += row[j] * xt[j];
            }
            r[i] = s - yv[i];
        }
        // g = Aᵀ r + λ w, target = x̃ − α g
        g.fill(0.0);
        for i in 0..d {
            let row = &a_flat[i * m..(i + 1) * m];
            let ri = r[i];
            for j in 0..m {
                g[j] += row[j] * ri;
            }
        }
        for j in 0..m {
            target[j] = xt[j] - alpha * (g[j] + lw[j]);
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate { step: t + 1 });
        }
        let mut active = Vec::new();
        project_simplex_slice(&target, &mut next, &mut active, &mut sort_buf);
        let gamma = schedule.gammas[t];
        for j in 0..m {
            xt[j] = next[j] + gamma * (next[j] - x[j]);
        }
        x.copy_from_slice(&next);
        iterates.push(Array1::from_vec(x.clone()));
        momentum_iterates.push(Array1::from_vec(xt.clone()));
        active_sets.push(active);
    }

    Ok(EncodeTrajectory {
        iterates,
        momentum_iterates,
        active_sets,
    })
}

/// Encode every column of Y independently; column i of the result equals
/// the single-point encode of y_i bit-exactly.
pub fn batch_encode(
    dict: &Dictionary,
    points: ArrayView2<f64>,
    params: &PenalizedLossParams,
) -> Result<(Array2<f64>, Vec<EncodeTrajectory>)> {
    let n = points.ncols();
    let mut codes = Array2::zeros((dict.len(), n));
    let mut trajectories = Vec::with_capacity(n);
    let threads = crate::worker_threads().min(n.max(1));
    if threads <= 1 {
        for i in 0..n {
            let traj = encode(dict, points.column(i), params)?;
            codes
                .column_mut(i)
                .assign(traj.iterates.last().expect("T >= 1"));
            trajectories.push(traj);
        }
    } else {
        // deterministic: results land in per-index slots regardless of scheduling
        let mut slots: Vec<Option<Result<EncodeTrajectory>>> = (0..n).map(|_| None).collect();
        std::thread::scope(|scope| {
            for (worker, chunk) in slots.chunks_mut(n.div_ceil(threads)).enumerate() {
                let offset = worker * n.div_ceil(threads);
                scope.spawn(move || {
                    for (k, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(encode(dict, points.column(offset + k), params));
                    }
                });
            }
        });
        for (i, slot) in slots.into_iter().enumerate() {
            let traj = slot.expect("worker filled every slot")?;
            codes
                .column_mut(i)
                .assign(traj.iterates.last().expect("T >= 1"));
            trajectories.push(traj);
        }
    }
    Ok((codes, trajectories))
}

/// Mean squared reconstruction error ‖y_i − A x_i‖² over the batch.
pub fn mean_reconstruction_error(
    dict: &Dictionary,
    points: ArrayView2<f64>,
    codes: ArrayView2<f64>,
) -> f64 {
    let recon = dict.atoms().dot(&codes);
    let diff = &recon - &points;
    diff.map_axis(Axis(0), |c| c.dot(&c).sqrt()).mean().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{loss_gradient_x, penalized_loss, project_simplex_with_active};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dict(rng: &mut ChaCha8Rng, d: usize, m: usize) -> Dictionary {
        let mut a = Array2::zeros((d, m));
        for x in a.iter_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
        Dictionary::new(a).unwrap()
    }

    #[test]
    fn schedule_first_step_has_no_momentum() {
        let s = momentum_schedule(5);
        assert_eq!(s.gammas[0], 0.0);
    }

    #[test]
    fn schedule_eta_sequence() {
        let s = momentum_schedule(4);
        assert_abs_diff_eq!(s.etas[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.etas[1], (1.0 + 5.0f64.sqrt()) / 2.0, epsilon = 1e-4);
        // eta_2 = (1 + sqrt(1 + 4*phi^2)) / 2 with phi the golden ratio
        let eta2 = (1.0 + (1.0 + 4.0 * s.etas[1] * s.etas[1]).sqrt()) / 2.0;
        assert_abs_diff_eq!(s.etas[2], eta2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.etas[2], 2.1935271, epsilon = 1e-7);
    }

    #[test]
    fn schedule_gammas_in_unit_interval() {
        let s = momentum_schedule(1000);
        for &g in &s.gammas {
            assert!((0.0..1.0).contains(&g), "gamma {g}");
        }
        // etas nondecreasing from 1
        for w in s.etas.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn atom_query_converges_to_unit_code() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dict = random_dict(&mut rng, 2, 6);
        let alpha = default_step_size(&dict);
        let params = PenalizedLossParams::new(1e-6, alpha, 100).unwrap();
        let y = dict.atom(2).to_owned();
        let traj = encode(&dict, y.view(), &params).unwrap();
        let code = traj.final_code().unwrap();
        let loss = penalized_loss(&dict, y.view(), &code, params.lambda).unwrap();
        assert!(loss < 1e-8, "loss {loss}");
        assert!(code.coeffs()[2] > 0.9);
    }

    #[test]
    fn iterates_stay_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dict = random_dict(&mut rng, 3, 8);
        let alpha = default_step_size(&dict);
        let params = PenalizedLossParams::new(0.01, alpha, 50).unwrap();
        let y = array![0.1, -0.2, 0.3];
        let traj = encode(&dict, y.view(), &params).unwrap();
        for x in traj.iterates.iter().skip(1) {
            assert!(x.iter().all(|&v| v >= 0.0));
            assert_abs_diff_eq!(x.sum(), 1.0, epsilon = 1e-10);
        }
        assert_eq!(traj.active_sets.len(), 50);
        assert_eq!(traj.momentum_iterates.len(), 51);
    }

    #[test]
    fn long_run_self_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dict = random_dict(&mut rng, 2, 6);
        let alpha = default_step_size(&dict);
        let y = array![0.05, 0.1];
        let lambda = 0.01;
        let loss_at = |depth: usize| {
            let params = PenalizedLossParams::new(lambda, alpha, depth).unwrap();
            let traj = encode(&dict, y.view(), &params).unwrap();
            penalized_loss(&dict, y.view(), &traj.final_code().unwrap(), lambda).unwrap()
        };
        assert!(loss_at(500) - loss_at(10000) <= 1e-6);
    }

    #[test]
    fn deterministic_reruns() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dict = random_dict(&mut rng, 2, 5);
        let params = PenalizedLossParams::new(0.02, default_step_size(&dict), 40).unwrap();
        let y = array![0.3, -0.1];
        let a = encode(&dict, y.view(), &params).unwrap();
        let b = encode(&dict, y.view(), &params).unwrap();
        assert_eq!(a.iterates, b.iterates);
        assert_eq!(a.momentum_iterates, b.momentum_iterates);
        assert_eq!(a.active_sets, b.active_sets);
    }

    #[test]
    fn final_loss_below_first_step_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let dict = random_dict(&mut rng, 2, 6);
            let params = PenalizedLossParams::new(0.01, default_step_size(&dict), 200).unwrap();
            let y = array![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            let traj = encode(&dict, y.view(), &params).unwrap();
            let at = |t: usize| {
                let code = SimplexCode::new(traj.iterates[t].clone()).unwrap();
                penalized_loss(&dict, y.view(), &code, params.lambda).unwrap()
            };
            assert!(at(params.unroll_depth) <= at(1) + 1e-12);
        }
    }

    #[test]
    fn monotone_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let dict = random_dict(&mut rng, 2, 6);
        let depth = 400;
        let params = PenalizedLossParams::new(0.01, default_step_size(&dict), depth).unwrap();
        let y = array![0.2, 0.1];
        let traj = encode(&dict, y.view(), &params).unwrap();
        let losses: Vec<f64> = (depth / 2..=depth)
            .map(|t| {
                let code = SimplexCode::new(traj.iterates[t].clone()).unwrap();
                penalized_loss(&dict, y.view(), &code, params.lambda).unwrap()
            })
            .collect();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "tail not monotone: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn restarts_agree_on_final_objective() {
        // convexity: warm starts from random feasible points reach the same value
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dict = random_dict(&mut rng, 2, 5);
        let alpha = default_step_size(&dict);
        let lambda = 0.01;
        let y = array![0.15, -0.05];
        let depth = 5000;
        let schedule = momentum_schedule(depth);

        let run_from = |x0: Array1<f64>| {
            let mut x = x0.clone();
            let mut xt = x0;
            for t in 0..depth {
                let grad = loss_gradient_x(&dict, y.view(), xt.view(), lambda).unwrap();
                let (code, _) =
                    project_simplex_with_active((&xt - &(grad * alpha)).view()).unwrap();
                let next = code.into_inner();
                xt = &next + &((&next - &x) * schedule.gammas[t]);
                x = next;
            }
            penalized_loss(&dict, y.view(), &SimplexCode::new(x).unwrap(), lambda).unwrap()
        };

        let baseline = run_from(Array1::zeros(5));
        for _ in 0..10 {
            let e: Vec<f64> = (0..5).map(|_| -rng.random::<f64>().ln()).collect();
            let s: f64 = e.iter().sum();
            let x0 = Array1::from_iter(e.into_iter().map(|v| v / s));
            let val = run_from(x0);
            assert!((val - baseline).abs() <= 1e-7, "restart gap {}", val - baseline);
        }
    }

    #[test]
    fn batch_matches_single_encode() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let dict = random_dict(&mut rng, 2, 6);
        let params = PenalizedLossParams::new(0.01, default_step_size(&dict), 30).unwrap();
        let mut points = Array2::zeros((2, 20));
        for x in points.iter_mut() {
            *x = rng.random_range(-0.5..0.5);
        }
        let (codes, trajs) = batch_encode(&dict, points.view(), &params).unwrap();
        assert_eq!(trajs.len(), 20);
        for i in 0..20 {
            let single = encode(&dict, points.column(i), &params).unwrap();
            let last = single.iterates.last().unwrap();
            assert_eq!(codes.column(i).to_vec(), last.to_vec());
        }
    }

    #[test]
    fn support_matches_cell_under_locality() {
        use crate::geometry;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let landmarks = loop {
            let mut pts = Array2::zeros((2, 8));
            for x in pts.iter_mut() {
                *x = rng.random::<f64>();
            }
            if let Ok(l) = crate::geometry::Landmarks::new(pts) {
                if geometry::general_position_check(&l, geometry::COSPHERE_TOL).is_general() {
                    break l;
                }
            }
        };
        let tri = geometry::delaunay_triangulate(&landmarks).unwrap();
        let dict = Dictionary::from(landmarks.clone());
        let params = PenalizedLossParams::new(1e-3, default_step_size(&dict), 2000).unwrap();
        for _ in 0..10 {
            let ci = rng.random_range(0..tri.cells.len());
            let verts = landmarks.gather(&tri.cells[ci]);
            let w = loop {
                let e: Vec<f64> = (0..3).map(|_| -rng.random::<f64>().ln()).collect();
                let s: f64 = e.iter().sum();
                let w: Vec<f64> = e.into_iter().map(|x| x / s).collect();
                if w.iter().all(|&x| x >= 0.05) {
                    break w;
                }
            };
            let y = verts.dot(&Array1::from_vec(w));
            let traj = encode(&dict, y.view(), &params).unwrap();
            let code = traj.final_code().unwrap();
            let support: Vec<usize> = code
                .coeffs()
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 1e-4)
                .map(|(j, _)| j)
                .collect();
            assert!(
                support.iter().all(|j| tri.cells[ci].contains(j)),
                "support {support:?} not inside cell {:?}",
                tri.cells[ci]
            );
        }
    }
}
