//! Exact solvers for the constrained locality-weighted programs by support
//! enumeration, used to certify the face-recovery property.
//!
//! For each candidate support S with |S| ≤ d+1 the solver resolves the
//! affine system [A_S; 1ᵀ] x_S = [y; 1] and keeps feasible solutions. A
//! vertex of the feasible polytope with at most d+1 nonzeros attains the
//! LP optimum, so the enumeration is exact at desk scale.

use ndarray::{Array1, Array2, ArrayView1};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::geometry::{self, for_each_combination, Landmarks, Triangulation};
use crate::linalg;
use crate::simplex::{SimplexCode, SUPPORT_TOL};

/// Largest m accepted by the enumerating solvers.
pub const ENUMERATION_BUDGET: usize = 25;
/// Negative coefficients above this are treated as round-off and clipped.
pub const FEASIBILITY_CLIP: f64 = 1e-10;
/// Residual tolerance for y = A_S x_S on a candidate support.
const RESIDUAL_TOL: f64 = 1e-9;

/// Outcome of an exact recovery solve.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub code: SimplexCode,
    /// Sorted support of the returned code.
    pub support: Vec<usize>,
    /// Objective value (weighted ℓ1 or weighted ℓ0, depending on solver).
    pub objective: f64,
    /// Index of a triangulation cell whose vertex set contains the support,
    /// when verified against a triangulation.
    pub matched_cell: Option<usize>,
}

#[derive(Clone, Copy)]
enum Metric {
    L0,
    L1,
}

fn feasible_on_support(
    dict: &Dictionary,
    y: ArrayView1<f64>,
    support: &[usize],
) -> Option<Array1<f64>> {
    let d = dict.dim();
    let k = support.len();
    // stack [A_S; 1ᵀ]
    let mut m = Array2::zeros((d + 1, k));
    for (col, &j) in support.iter().enumerate() {
        for row in 0..d {
            m[[row, col]] = dict.atoms()[[row, j]];
        }
        m[[d, col]] = 1.0;
    }
    let mut b = Array1::zeros(d + 1);
    for row in 0..d {
        b[row] = y[row];
    }
    b[d] = 1.0;

    let xs = if k == d + 1 {
        linalg::solve(m.view(), b.view(), geometry::DEGENERACY_TOL).ok()?
    } else {
        linalg::lstsq(m.view(), b.view(), geometry::DEGENERACY_TOL).ok()?
    };
    if xs.iter().any(|&v| v < -FEASIBILITY_CLIP) {
        return None;
    }
    let xs = xs.mapv(|v| v.max(0.0));
    // an underdetermined support must actually reproduce y
    let residual = &m.dot(&xs) - &b;
    let scale = y.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
    if residual.dot(&residual).sqrt() > RESIDUAL_TOL * scale {
        return None;
    }
    let mut x = Array1::zeros(dict.len());
    for (col, &j) in support.iter().enumerate() {
        x[j] = xs[col];
    }
    Some(x)
}

fn solve_exact(dict: &Dictionary, y: ArrayView1<f64>, metric: Metric) -> Result<RecoveryResult> {
    let m = dict.len();
    let d = dict.dim();
    if y.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "point has dim {}, dictionary has dim {d}",
            y.len()
        )));
    }
    if m > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudgetExceeded {
            m,
            budget: ENUMERATION_BUDGET,
        });
    }
    let weights = dict.sq_distances(y)?;

    let mut best: Option<(f64, Vec<usize>, Array1<f64>)> = None;
    for k in 1..=(d + 1).min(m) {
        for_each_combination(m, k, |support| {
            let Some(x) = feasible_on_support(dict, y, support) else {
                return;
            };
            let actual_support: Vec<usize> = (0..m).filter(|&j| x[j] > SUPPORT_TOL).collect();
            let objective: f64 = match metric {
                Metric::L1 => (0..m).map(|j| x[j] * weights[j]).sum(),
                Metric::L0 => actual_support.iter().map(|&j| weights[j]).sum(),
            };
            let better = match &best {
                None => true,
                Some((obj, sup, _)) => {
                    objective < obj - 1e-12
                        || ((objective - obj).abs() <= 1e-12
                            && (actual_support.len() < sup.len()
                                || (actual_support.len() == sup.len() && actual_support < *sup)))
                }
            };
            if better {
                best = Some((objective, actual_support, x));
            }
        });
    }

    let (objective, support, x) = best.ok_or(Error::Infeasible)?;
    // renormalize residual round-off before wrapping
    let sum = x.sum();
    let code = SimplexCode::new(x / sum)?;
    Ok(RecoveryResult {
        code,
        support,
        objective,
        matched_cell: None,
    })
}

/// Minimize the weighted ℓ1 metric over exact simplex representations of `y`.
pub fn solve_weighted_l1_exact(dict: &Dictionary, y: ArrayView1<f64>) -> Result<RecoveryResult> {
    solve_exact(dict, y, Metric::L1)
}

/// Minimize the weighted ℓ0 metric over exact simplex representations of `y`.
/// Ties break toward smaller support, then lexicographically.
pub fn solve_weighted_l0_exact(dict: &Dictionary, y: ArrayView1<f64>) -> Result<RecoveryResult> {
    solve_exact(dict, y, Metric::L0)
}

/// Check that a recovery's support lies inside the vertex set of some
/// triangulation cell containing `y` (with boundary slack 1e-8).
pub fn verify_recovery(
    tri: &Triangulation,
    landmarks: &Landmarks,
    y: ArrayView1<f64>,
    result: &RecoveryResult,
) -> Result<bool> {
    let cells = geometry::containing_cells(tri, landmarks, y, 1e-8);
    if cells.is_empty() {
        return Err(Error::OutsideHull);
    }
    Ok(cells
        .iter()
        .any(|&ci| result.support.iter().all(|j| tri.cells[ci].contains(j))))
}

/// Enumerate the objective of every feasible support (used by certification
/// to check strict minimality for the ℓ0 program).
pub fn feasible_support_objectives(
    dict: &Dictionary,
    y: ArrayView1<f64>,
) -> Result<Vec<(Vec<usize>, f64)>> {
    let m = dict.len();
    let d = dict.dim();
    if m > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudgetExceeded {
            m,
            budget: ENUMERATION_BUDGET,
        });
    }
    let weights = dict.sq_distances(y)?;
    let mut out = Vec::new();
    for k in 1..=(d + 1).min(m) {
        for_each_combination(m, k, |support| {
            if let Some(x) = feasible_on_support(dict, y, support) {
                let actual: Vec<usize> = (0..m).filter(|&j| x[j] > SUPPORT_TOL).collect();
                let obj: f64 = actual.iter().map(|&j| weights[j]).sum();
                out.push((actual, obj));
            }
        });
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out.dedup_by(|a, b| a.0 == b.0);
    Ok(out)
}
