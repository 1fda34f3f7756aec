//! Delaunay triangulation of landmark sets at desk scale.
//!
//! The triangulation is built by brute-force enumeration of all
//! (d+1)-subsets and the empty-circumsphere test. This is O(m^(d+2)) but
//! exact in spirit: it doubles as the geometric oracle the face-recovery
//! certification runs against, and m stays below ~50 here.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg;

/// Default relative tolerance for cosphericity decisions.
pub const COSPHERE_TOL: f64 = 1e-9;
/// Pivot tolerance for affine-degeneracy decisions.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Barycentric slack when deciding hull/cell membership.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// A set of m landmark points in R^d, stored as columns of a d×m matrix.
#[derive(Debug, Clone)]
pub struct Landmarks {
    points: Array2<f64>,
}

impl Landmarks {
    /// Wrap a d×m matrix of column points. Requires m ≥ d+1, finite
    /// entries, and pairwise-distinct columns.
    pub fn new(points: Array2<f64>) -> Result<Self> {
        let (d, m) = points.dim();
        if m < d + 1 {
            return Err(Error::DimensionMismatch(format!(
                "need at least d+1 = {} landmarks, got {m}",
                d + 1
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("landmark coordinates must be finite".into()));
        }
        for i in 0..m {
            for j in i + 1..m {
                let diff = &points.column(i) - &points.column(j);
                if diff.iter().all(|v| v.abs() <= 1e-12) {
                    return Err(Error::Parse(format!("landmarks {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { points })
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn count(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn point(&self, j: usize) -> ArrayView1<'_, f64> {
        self.points.column(j)
    }

    /// Gather the columns indexed by `idx` into a d×|idx| matrix.
    pub fn gather(&self, idx: &[usize]) -> Array2<f64> {
        self.points.select(Axis(1), idx)
    }
}

/// Circumscribed sphere of a nondegenerate simplex.
#[derive(Debug, Clone)]
pub struct CircumSphere {
    pub center: Array1<f64>,
    pub radius: f64,
}

/// A Delaunay triangulation: sorted (d+1)-tuples of landmark indices plus
/// the circumsphere of each cell, in lexicographic cell order.
#[derive(Debug, Clone)]
pub struct Triangulation {
    pub cells: Vec<Vec<usize>>,
    pub spheres: Vec<CircumSphere>,
}

/// Report produced by [`general_position_check`]: the offending index sets.
#[derive(Debug, Clone, Default)]
pub struct PositionReport {
    /// (d+1)-subsets that are affinely dependent within tolerance.
    pub degenerate: Vec<Vec<usize>>,
    /// (d+2)-subsets that are cospherical within tolerance.
    pub cospherical: Vec<Vec<usize>>,
}

impl PositionReport {
    pub fn is_general(&self) -> bool {
        self.degenerate.is_empty() && self.cospherical.is_empty()
    }
}

/// Visit every k-subset of 0..n in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Circumsphere of d+1 affinely independent points in R^d.
///
/// The center solves 2(v_i − v_0)ᵀ c = ‖v_i‖² − ‖v_0‖², i = 1..d; the
/// returned center is equidistant from all vertices to 1e-9 relative.
pub fn circumsphere(vertices: ArrayView2<f64>) -> Result<CircumSphere> {
    let (d, k) = vertices.dim();
    if k != d + 1 {
        return Err(Error::DimensionMismatch(format!(
            "circumsphere needs d+1 = {} vertices, got {k}",
            d + 1
        )));
    }
    let v0 = vertices.column(0);
    let n0 = v0.dot(&v0);
    let mut m = Array2::zeros((d, d));
    let mut b = Array1::zeros(d);
    for i in 0..d {
        let vi = vertices.column(i + 1);
        for j in 0..d {
            m[[i, j]] = 2.0 * (vi[j] - v0[j]);
        }
        b[i] = vi.dot(&vi) - n0;
    }
    let center = linalg::solve(m.view(), b.view(), DEGENERACY_TOL)?;
    let diff = &v0.to_owned() - &center;
    let radius = diff.dot(&diff).sqrt();
    Ok(CircumSphere { center, radius })
}

/// Barycentric coordinates of `y` with respect to d+1 simplex vertices:
/// the unique solution of y = Σ x_j v_j, Σ x_j = 1.
pub fn barycentric_coords(vertices: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Array1<f64>> {
    let (d, k) = vertices.dim();
    if k != d + 1 || y.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "barycentric: vertices {d}x{k}, point {}",
            y.len()
        )));
    }
    let mut m = Array2::zeros((d + 1, d + 1));
    let mut b = Array1::zeros(d + 1);
    for j in 0..d + 1 {
        for i in 0..d {
            m[[i, j]] = vertices[[i, j]];
        }
        m[[d, j]] = 1.0;
    }
    for i in 0..d {
        b[i] = y[i];
    }
    b[d] = 1.0;
    linalg::solve(m.view(), b.view(), DEGENERACY_TOL)
}

/// Check that no (d+1)-subset is affinely dependent and no (d+2)-subset is
/// cospherical, within `tol` (relative to circumradius for cosphericity).
pub fn general_position_check(landmarks: &Landmarks, tol: f64) -> PositionReport {
    let d = landmarks.dim();
    let m = landmarks.count();
    let mut report = PositionReport::default();

    for_each_combination(m, d + 1, |idx| {
        let verts = landmarks.gather(idx);
        if circumsphere(verts.view()).is_err() {
            report.degenerate.push(idx.to_vec());
        }
    });

    for_each_combination(m, d + 2, |idx| {
        // skip subsets already known degenerate on their leading face
        let verts = landmarks.gather(&idx[..d + 1]);
        let Ok(sphere) = circumsphere(verts.view()) else {
            return;
        };
        let extra = landmarks.point(idx[d + 1]);
        let diff = &extra.to_owned() - &sphere.center;
        let dist = diff.dot(&diff).sqrt();
        if (dist - sphere.radius).abs() <= tol * sphere.radius.max(1e-300) {
            report.cospherical.push(idx.to_vec());
        }
    });

    report
}

/// Brute-force Delaunay triangulation: every (d+1)-subset whose
/// circumsphere strictly excludes all other landmarks.
pub fn delaunay_triangulate(landmarks: &Landmarks) -> Result<Triangulation> {
    delaunay_triangulate_with_tol(landmarks, COSPHERE_TOL)
}

pub fn delaunay_triangulate_with_tol(landmarks: &Landmarks, tol: f64) -> Result<Triangulation> {
    let d = landmarks.dim();
    let m = landmarks.count();
    if !(2..=3).contains(&d) {
        return Err(Error::DimensionMismatch(format!(
            "triangulation supports d in {{2,3}}, got {d}"
        )));
    }

    let report = general_position_check(landmarks, tol);
    if !report.cospherical.is_empty() {
        return Err(Error::NonUniqueTriangulation {
            count: report.cospherical.len(),
            first: report.cospherical[0].clone(),
        });
    }
    if !report.degenerate.is_empty() {
        return Err(Error::NotGeneralPosition(format!(
            "{} affinely dependent (d+1)-subsets, first {:?}",
            report.degenerate.len(),
            report.degenerate[0]
        )));
    }

    let mut cells = Vec::new();
    let mut spheres = Vec::new();
    for_each_combination(m, d + 1, |idx| {
        let verts = landmarks.gather(idx);
        let sphere = circumsphere(verts.view()).expect("degeneracy ruled out above");
        let slack = tol * sphere.radius.max(1e-300);
        let empty = (0..m).filter(|j| !idx.contains(j)).all(|j| {
            let diff = &landmarks.point(j).to_owned() - &sphere.center;
            diff.dot(&diff).sqrt() >= sphere.radius - slack
        });
        if empty {
            cells.push(idx.to_vec());
            spheres.push(sphere);
        }
    });

    // for_each_combination emits lexicographic order already
    Ok(Triangulation { cells, spheres })
}

/// Find a cell containing `y` and the barycentric coordinates of `y` in it.
///
/// Membership means every coordinate ≥ −MEMBERSHIP_TOL; the first matching
/// cell in lexicographic order is returned, with coordinates clipped to
/// [0, 1] and renormalized.
pub fn locate_cell(
    tri: &Triangulation,
    landmarks: &Landmarks,
    y: ArrayView1<f64>,
) -> Result<(usize, Array1<f64>)> {
    for (ci, cell) in tri.cells.iter().enumerate() {
        let verts = landmarks.gather(cell);
        let Ok(coords) = barycentric_coords(verts.view(), y) else {
            continue;
        };
        if coords.iter().all(|&c| c >= -MEMBERSHIP_TOL) {
            let mut clipped = coords.mapv(|c| c.max(0.0));
            let sum: f64 = clipped.sum();
            clipped /= sum;
            return Ok((ci, clipped));
        }
    }
    Err(Error::OutsideHull)
}

/// All cells containing `y` within slack `tol` on the barycentric
/// coordinates (boundary points belong to several).
pub fn containing_cells(
    tri: &Triangulation,
    landmarks: &Landmarks,
    y: ArrayView1<f64>,
    tol: f64,
) -> Vec<usize> {
    let mut out = Vec::new();
    for (ci, cell) in tri.cells.iter().enumerate() {
        let verts = landmarks.gather(cell);
        if let Ok(coords) = barycentric_coords(verts.view(), y) {
            if coords.iter().all(|&c| c >= -tol) {
                out.push(ci);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lm(points: Array2<f64>) -> Landmarks {
        Landmarks::new(points).unwrap()
    }

    #[test]
    fn circumsphere_right_triangle() {
        let v = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let s = circumsphere(v.view()).unwrap();
        assert_abs_diff_eq!(s.center[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.center[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.radius, (2.0f64).sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn circumsphere_unit_circle_points() {
        let v = array![[-1.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let s = circumsphere(v.view()).unwrap();
        assert_abs_diff_eq!(s.center[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.center[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.radius, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn circumsphere_random_equidistant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut v = Array2::zeros((2, 3));
            loop {
                for x in v.iter_mut() {
                    *x = rng.random_range(-1.0..1.0);
                }
                if circumsphere(v.view()).is_ok() {
                    break;
                }
            }
            let s = circumsphere(v.view()).unwrap();
            for j in 0..3 {
                let diff = &v.column(j).to_owned() - &s.center;
                let dist = diff.dot(&diff).sqrt();
                assert!((dist - s.radius).abs() <= 1e-9 * s.radius.max(1.0));
            }
        }
    }

    #[test]
    fn circumsphere_collinear_errors() {
        let v = array![[0.0, 1.0, 2.0], [0.0, 1.0, 2.0]];
        assert!(matches!(
            circumsphere(v.view()),
            Err(Error::DegenerateSimplex)
        ));
    }

    #[test]
    fn square_is_not_unique() {
        let l = lm(array![[0.0, 1.0, 0.0, 1.0], [0.0, 0.0, 1.0, 1.0]]);
        let report = general_position_check(&l, COSPHERE_TOL);
        assert!(!report.is_general());
        assert_eq!(report.cospherical[0], vec![0, 1, 2, 3]);
        assert!(matches!(
            delaunay_triangulate(&l),
            Err(Error::NonUniqueTriangulation { .. })
        ));
    }

    #[test]
    fn collinear_triple_flagged() {
        let l = lm(array![
            [0.0, 1.0, 2.0, 0.3],
            [0.0, 1.0, 2.0, 1.7]
        ]);
        let report = general_position_check(&l, COSPHERE_TOL);
        assert!(report
            .degenerate
            .iter()
            .any(|s| s.as_slice() == [0, 1, 2]));
    }

    #[test]
    fn random_gaussian_landmarks_general() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = Array2::zeros((2, 8));
        for x in pts.iter_mut() {
            *x = rng.random::<f64>() * 2.0 - 1.0;
        }
        let l = lm(pts);
        assert!(general_position_check(&l, COSPHERE_TOL).is_general());
    }

    #[test]
    fn triangle_plus_interior_point_gives_three_cells() {
        let l = lm(array![[0.0, 1.0, 0.0, 0.25], [0.0, 0.0, 1.0, 0.25]]);
        let tri = delaunay_triangulate(&l).unwrap();
        assert_eq!(tri.cells.len(), 3);
        // hand check: every cell uses the interior point 3
        for cell in &tri.cells {
            assert!(cell.contains(&3), "cell {cell:?}");
        }
    }

    fn random_general_landmarks(rng: &mut ChaCha8Rng, m: usize) -> Landmarks {
        loop {
            let mut pts = Array2::zeros((2, m));
            for x in pts.iter_mut() {
                *x = rng.random::<f64>();
            }
            if let Ok(l) = Landmarks::new(pts) {
                if general_position_check(&l, COSPHERE_TOL).is_general() {
                    return l;
                }
            }
        }
    }

    /// Euler-formula oracle for 2D Delaunay: cells = 2·interior + hull − 2.
    /// Hull vertices found independently by an O(m²) gift-wrapping count.
    fn hull_size(l: &Landmarks) -> usize {
        let m = l.count();
        let mut on_hull = vec![false; m];
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let a = l.point(i);
                let b = l.point(j);
                let all_left = (0..m).filter(|&k| k != i && k != j).all(|k| {
                    let p = l.point(k);
                    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
                });
                if all_left {
                    on_hull[i] = true;
                    on_hull[j] = true;
                }
            }
        }
        on_hull.iter().filter(|&&h| h).count()
    }

    #[test]
    fn euler_formula_holds_for_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let l = random_general_landmarks(&mut rng, 10);
            let tri = delaunay_triangulate(&l).unwrap();
            let h = hull_size(&l);
            let interior = l.count() - h;
            assert_eq!(tri.cells.len(), 2 * interior + h - 2);
        }
    }

    #[test]
    fn empty_circumsphere_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = random_general_landmarks(&mut rng, 12);
        let tri = delaunay_triangulate(&l).unwrap();
        for (cell, sphere) in tri.cells.iter().zip(&tri.spheres) {
            for j in 0..l.count() {
                if cell.contains(&j) {
                    continue;
                }
                let diff = &l.point(j).to_owned() - &sphere.center;
                let dist = diff.dot(&diff).sqrt();
                assert!(dist >= sphere.radius - COSPHERE_TOL * sphere.radius);
            }
        }
    }

    #[test]
    fn triangulation_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = random_general_landmarks(&mut rng, 10);
        let t1 = delaunay_triangulate(&l).unwrap();
        let t2 = delaunay_triangulate(&l).unwrap();
        assert_eq!(t1.cells, t2.cells);
        let mut sorted = t1.cells.clone();
        sorted.sort();
        assert_eq!(t1.cells, sorted);
    }

    #[test]
    fn barycentric_trivial_cases() {
        let v = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let c = barycentric_coords(v.view(), array![0.0, 0.0].view()).unwrap();
        assert_abs_diff_eq!(c.as_slice().unwrap(), [1.0, 0.0, 0.0].as_slice(), epsilon = 1e-12);
        let mid = barycentric_coords(v.view(), array![0.5, 0.0].view()).unwrap();
        assert_abs_diff_eq!(mid.as_slice().unwrap(), [0.5, 0.5, 0.0].as_slice(), epsilon = 1e-12);
    }

    #[test]
    fn barycentric_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let v = array![[0.1, 0.9, 0.4], [0.2, 0.1, 0.8]];
        for _ in 0..20 {
            let a: f64 = rng.random();
            let b: f64 = rng.random::<f64>() * (1.0 - a);
            let w = array![a, b, 1.0 - a - b];
            let y = v.dot(&w);
            let c = barycentric_coords(v.view(), y.view()).unwrap();
            let back = v.dot(&c);
            assert_abs_diff_eq!(back[0], y[0], epsilon = 1e-10);
            assert_abs_diff_eq!(back[1], y[1], epsilon = 1e-10);
            assert_abs_diff_eq!(c.sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn locate_vertex_and_centroid() {
        let l = lm(array![[0.0, 1.0, 0.0, 0.25], [0.0, 0.0, 1.0, 0.25]]);
        let tri = delaunay_triangulate(&l).unwrap();

        let (ci, coords) = locate_cell(&tri, &l, l.point(0)).unwrap();
        assert!(tri.cells[ci].contains(&0));
        let pos = tri.cells[ci].iter().position(|&v| v == 0).unwrap();
        assert_abs_diff_eq!(coords[pos], 1.0, epsilon = 1e-10);

        let cell = &tri.cells[0];
        let verts = l.gather(cell);
        let centroid = verts.sum_axis(ndarray::Axis(1)) / 3.0;
        let (ci, coords) = locate_cell(&tri, &l, centroid.view()).unwrap();
        assert_eq!(ci, 0);
        for c in coords {
            assert_abs_diff_eq!(c, 1.0 / 3.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn locate_roundtrip_recovers_dirichlet_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let l = random_general_landmarks(&mut rng, 9);
        let tri = delaunay_triangulate(&l).unwrap();
        for _ in 0..50 {
            let ci = rng.random_range(0..tri.cells.len());
            let verts = l.gather(&tri.cells[ci]);
            // interior Dirichlet draw
            let mut w;
            loop {
                let e: Vec<f64> = (0..3).map(|_| -rng.random::<f64>().ln()).collect();
                let s: f64 = e.iter().sum();
                w = Array1::from_iter(e.into_iter().map(|x| x / s));
                if w.iter().all(|&x| x > 1e-3) {
                    break;
                }
            }
            let y = verts.dot(&w);
            let (found, coords) = locate_cell(&tri, &l, y.view()).unwrap();
            assert_eq!(found, ci);
            for (a, b) in coords.iter().zip(w.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn outside_hull_detected() {
        let l = lm(array![[0.0, 1.0, 0.0, 0.25], [0.0, 0.0, 1.0, 0.25]]);
        let tri = delaunay_triangulate(&l).unwrap();
        assert!(matches!(
            locate_cell(&tri, &l, array![5.0, 5.0].view()),
            Err(Error::OutsideHull)
        ));
    }

    #[test]
    fn coverage_of_hull_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let l = random_general_landmarks(&mut rng, 10);
        let tri = delaunay_triangulate(&l).unwrap();
        let mut hits = 0;
        for _ in 0..1000 {
            // sample inside a random cell, so inside the hull by construction
            let ci = rng.random_range(0..tri.cells.len());
            let verts = l.gather(&tri.cells[ci]);
            let e: Vec<f64> = (0..3).map(|_| -rng.random::<f64>().ln()).collect();
            let s: f64 = e.iter().sum();
            let w = Array1::from_iter(e.into_iter().map(|x| x / s));
            let y = verts.dot(&w);
            if locate_cell(&tri, &l, y.view()).is_ok() {
                hits += 1;
            }
        }
        assert_eq!(hits, 1000);
    }

    #[test]
    fn delaunay_3d_tetrahedron_plus_interior() {
        let l = lm(array![
            [0.0, 1.0, 0.0, 0.0, 0.21],
            [0.0, 0.0, 1.0, 0.0, 0.23],
            [0.0, 0.0, 0.0, 1.0, 0.27]
        ]);
        let tri = delaunay_triangulate(&l).unwrap();
        assert_eq!(tri.cells.len(), 4);
        for cell in &tri.cells {
            assert!(cell.contains(&4));
        }
    }
}
