use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// A d×m dictionary whose columns are the atoms (landmark candidates).
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Array2<f64>,
}

impl Dictionary {
    pub fn new(atoms: Array2<f64>) -> Result<Self> {
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("dictionary entries must be finite".into()));
        }
        Ok(Self { atoms })
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    pub fn atoms(&self) -> ArrayView2<'_, f64> {
        self.atoms.view()
    }

    pub fn atoms_mut(&mut self) -> &mut Array2<f64> {
        &mut self.atoms
    }

    pub fn atom(&self, j: usize) -> ArrayView1<'_, f64> {
        self.atoms.column(j)
    }

    /// Squared distances ‖y − a_j‖² for all atoms.
    pub fn sq_distances(&self, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has dim {}, atoms have dim {}",
                y.len(),
                self.dim()
            )));
        }
        let mut w = Array1::zeros(self.len());
        for j in 0..self.len() {
            let diff = &y.to_owned() - &self.atoms.column(j);
            w[j] = diff.dot(&diff);
        }
        Ok(w)
    }
}

impl From<crate::geometry::Landmarks> for Dictionary {
    fn from(l: crate::geometry::Landmarks) -> Self {
        Self {
            atoms: l.points().to_owned(),
        }
    }
}
