//! Probability-simplex projection, the locality-weighted ℓ0/ℓ1 metrics,
//! and the penalized encoding loss with its coefficient gradient.

use ndarray::{Array1, ArrayView1};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};

/// Entries above this threshold count as support for the ℓ0 metric and
/// for support-recovery checks.
pub const SUPPORT_TOL: f64 = 1e-8;
/// Feasibility slack when validating a simplex code.
pub const SIMPLEX_TOL: f64 = 1e-10;

/// A point on the probability simplex: nonnegative entries summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexCode {
    coeffs: Array1<f64>,
}

impl SimplexCode {
    /// Validate and wrap a coefficient vector.
    pub fn new(coeffs: Array1<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptyInput);
        }
        if coeffs.iter().any(|&c| c < -SIMPLEX_TOL || !c.is_finite()) {
            return Err(Error::Parse("simplex code has a negative entry".into()));
        }
        let sum: f64 = coeffs.sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Parse(format!("simplex code sums to {sum}, not 1")));
        }
        Ok(Self {
            coeffs: coeffs.mapv(|c| c.max(0.0)),
        })
    }

    /// One-hot code e_j of length m.
    pub fn unit(m: usize, j: usize) -> Self {
        let mut c = Array1::zeros(m);
        c[j] = 1.0;
        Self { coeffs: c }
    }

    pub fn coeffs(&self) -> ArrayView1<'_, f64> {
        self.coeffs.view()
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Indices with coefficient above [`SUPPORT_TOL`], sorted.
    pub fn support(&self) -> Vec<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > SUPPORT_TOL)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Hyperparameters of the penalized encoding objective.
#[derive(Debug, Clone, Copy)]
pub struct PenalizedLossParams {
    /// Locality weight λ ≥ 0.
    pub lambda: f64,
    /// Gradient step size α > 0.
    pub step_size: f64,
    /// Number of unrolled iterations T ≥ 1.
    pub unroll_depth: usize,
}

impl PenalizedLossParams {
    pub fn new(lambda: f64, step_size: f64, unroll_depth: usize) -> Result<Self> {
        if lambda < 0.0 || step_size <= 0.0 || unroll_depth == 0 {
            return Err(Error::Parse(format!(
                "invalid loss params: lambda={lambda}, step={step_size}, depth={unroll_depth}"
            )));
        }
        Ok(Self {
            lambda,
            step_size,
            unroll_depth,
        })
    }
}

/// Euclidean projection onto the probability simplex.
///
/// Sort descending, find the threshold index
/// ρ = max{k : v_(k) + (1 − Σ_{i≤k} v_(i))/k > 0}, shift by
/// b = (1 − Σ_{i≤ρ} v_(i))/ρ and clip at zero.
pub fn project_simplex(v: ArrayView1<f64>) -> Result<SimplexCode> {
    let (code, _) = project_simplex_with_active(v)?;
    Ok(code)
}

/// Projection that also reports which coordinates survive the clipping
/// (the active set), needed for exact unrolled backpropagation.
pub fn project_simplex_with_active(v: ArrayView1<f64>) -> Result<(SimplexCode, Vec<usize>)> {
    let m = v.len();
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    let mut coeffs = Array1::zeros(m);
    let mut active = Vec::new();
    let mut scratch = Vec::with_capacity(m);
    project_simplex_slice(
        v.as_slice().map_or_else(
            || {
                scratch = v.to_vec();
                scratch.as_slice()
            },
            |s| s,
        ),
        coeffs.as_slice_mut().expect("freshly allocated"),
        &mut active,
        &mut Vec::with_capacity(m),
    );
    Ok((SimplexCode { coeffs }, active))
}

/// Slice-based projection core shared by [`project_simplex_with_active`]
/// and the encoder's hot loop. `out` receives the projected vector, `active`
/// the surviving indices; `sort_buf` is reusable scratch.
pub(crate) fn project_simplex_slice(
    v: &[f64],
    out: &mut [f64],
    active: &mut Vec<usize>,
    sort_buf: &mut Vec<f64>,
) {
    let m = v.len();
    sort_buf.clear();
    sort_buf.extend_from_slice(v);
    // stable descending sort; ties keep original index order
    sort_buf.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let mut cumsum = 0.0;
    let mut rho = 0;
    let mut bias = 0.0;
    for (k, &val) in sort_buf.iter().enumerate() {
        cumsum += val;
        let b = (1.0 - cumsum) / (k + 1) as f64;
        if val + b > 0.0 {
            rho = k + 1;
            bias = b;
        }
    }
    debug_assert!(rho >= 1);

    active.clear();
    for i in 0..m {
        let shifted = v[i] + bias;
        if shifted > 0.0 {
            out[i] = shifted;
            active.push(i);
        } else {
            out[i] = 0.0;
        }
    }
    // guard against all-clipped pathologies from exact ties at zero
    if active.is_empty() {
        let argmax = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        out[argmax] = 1.0;
        active.push(argmax);
    }
}

/// Weighted ℓ0 metric: Σ_i 1{x_i > supportTol} ‖z − a_i‖².
pub fn weighted_l0(x: &SimplexCode, z: ArrayView1<f64>, dict: &Dictionary) -> Result<f64> {
    check_dims(x, z, dict)?;
    let w = dict.sq_distances(z)?;
    Ok(x.support().iter().map(|&j| w[j]).sum())
}

/// Weighted ℓ1 metric: Σ_i x_i ‖z − a_i‖².
pub fn weighted_l1(x: &SimplexCode, z: ArrayView1<f64>, dict: &Dictionary) -> Result<f64> {
    check_dims(x, z, dict)?;
    let w = dict.sq_distances(z)?;
    Ok(x.coeffs().dot(&w))
}

/// Penalized objective ½‖y − Ax‖² + λ Σ_j x_j‖y − a_j‖² for feasible x.
pub fn penalized_loss(
    dict: &Dictionary,
    y: ArrayView1<f64>,
    x: &SimplexCode,
    lambda: f64,
) -> Result<f64> {
    check_dims(x, y, dict)?;
    let residual = &dict.atoms().dot(&x.coeffs()) - &y;
    let recon = 0.5 * residual.dot(&residual);
    Ok(recon + lambda * weighted_l1(x, y, dict)?)
}

/// Gradient of the penalized objective in the coefficients:
/// Aᵀ(Ax − y) + λ (‖y − a_1‖², ..., ‖y − a_m‖²).
pub fn loss_gradient_x(
    dict: &Dictionary,
    y: ArrayView1<f64>,
    x: ArrayView1<f64>,
    lambda: f64,
) -> Result<Array1<f64>> {
    if x.len() != dict.len() || y.len() != dict.dim() {
        return Err(Error::DimensionMismatch(format!(
            "gradient: x has {} entries, y has dim {}, dictionary is {}x{}",
            x.len(),
            y.len(),
            dict.dim(),
            dict.len()
        )));
    }
    let a = dict.atoms();
    let residual = &a.dot(&x) - &y;
    let mut grad = a.t().dot(&residual);
    if lambda != 0.0 {
        let w = dict.sq_distances(y)?;
        grad += &(w * lambda);
    }
    Ok(grad)
}

fn check_dims(x: &SimplexCode, z: ArrayView1<f64>, dict: &Dictionary) -> Result<()> {
    if x.len() != dict.len() || z.len() != dict.dim() {
        return Err(Error::DimensionMismatch(format!(
            "code has {} entries, point has dim {}, dictionary is {}x{}",
            x.len(),
            z.len(),
            dict.dim(),
            dict.len()
        )));
    }
    Ok(())
}
