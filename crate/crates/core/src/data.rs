//! Synthetic data generators and an IDX-format image loader.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Landmarks, Triangulation};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Generator provenance carried alongside a dataset.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct DatasetMeta {
    pub generator: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
}

/// A d×n point matrix with optional integer labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }
}

/// Ground truth of the Delaunay generative model.
#[derive(Debug, Clone)]
pub struct GenerativeGroundTruth {
    pub landmarks: Landmarks,
    pub triangulation: Triangulation,
    /// m×n true barycentric codes, one column per point.
    pub true_codes: Array2<f64>,
    pub cell_assignments: Vec<usize>,
}

/// Unit circle with Gaussian noise of scale `sigma`.
pub fn gen_circle(n: usize, sigma: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut points = Array2::zeros((2, n));
    for i in 0..n {
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        points[[0, i]] = theta.cos() + sigma * rng.sample::<f64, _>(normal);
        points[[1, i]] = theta.sin() + sigma * rng.sample::<f64, _>(normal);
    }
    Dataset {
        points,
        labels: Some(vec![0; n]),
        meta: DatasetMeta {
            generator: "circle".into(),
            params: BTreeMap::from([
                ("n".into(), n.to_string()),
                ("sigma".into(), format!("{sigma}")),
            ]),
            seed,
        },
    }
}

/// Two interleaved semicircular arcs: (cos t, sin t) and
/// (1 − cos t, 0.5 − sin t) for t ∈ [0, π], with Gaussian noise.
pub fn gen_two_moons(n: usize, sigma: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut points = Array2::zeros((2, n));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = rng.random::<f64>() * std::f64::consts::PI;
        let (x, y, label) = if i % 2 == 0 {
            (t.cos(), t.sin(), 0)
        } else {
            (1.0 - t.cos(), 0.5 - t.sin(), 1)
        };
        points[[0, i]] = x + sigma * rng.sample::<f64, _>(normal);
        points[[1, i]] = y + sigma * rng.sample::<f64, _>(normal);
        labels.push(label);
    }
    Dataset {
        points,
        labels: Some(labels),
        meta: DatasetMeta {
            generator: "two_moons".into(),
            params: BTreeMap::from([
                ("n".into(), n.to_string()),
                ("sigma".into(), format!("{sigma}")),
            ]),
            seed,
        },
    }
}

fn simplex_volume(verts: &Array2<f64>) -> f64 {
    let d = verts.nrows();
    let mut edges = Array2::zeros((d, d));
    for j in 0..d {
        for i in 0..d {
            edges[[i, j]] = verts[[i, j + 1]] - verts[[i, 0]];
        }
    }
    // |det| by elimination
    let mut det = 1.0;
    let mut a = edges;
    for col in 0..d {
        let mut piv = col;
        for row in col + 1..d {
            if a[[row, col]].abs() > a[[piv, col]].abs() {
                piv = row;
            }
        }
        if a[[piv, col]] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for j in 0..d {
                a.swap([col, j], [piv, j]);
            }
            det = -det;
        }
        det *= a[[col, col]];
        for row in col + 1..d {
            let f = a[[row, col]] / a[[col, col]];
            for j in col..d {
                a[[row, j]] -= f * a[[col, j]];
            }
        }
    }
    let factorial: f64 = (1..=d).map(|x| x as f64).product();
    det.abs() / factorial
}

/// Sample the Delaunay generative model: general-position landmarks in
/// [0,1]^d, points drawn per cell (volume-proportional) with interior
/// Dirichlet(1) weights (all ≥ 1e-3).
pub fn gen_delaunay_model(
    m: usize,
    n: usize,
    d: usize,
    seed: u64,
) -> Result<(Dataset, GenerativeGroundTruth)> {
    if !(2..=3).contains(&d) || m < d + 2 {
        return Err(Error::DimensionMismatch(format!(
            "delaunay model needs d in {{2,3}} and m >= d+2, got d={d}, m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = 100;
    let mut found = None;
    for _ in 0..max_attempts {
        let mut pts = Array2::zeros((d, m));
        for x in pts.iter_mut() {
            *x = rng.random::<f64>();
        }
        let Ok(landmarks) = Landmarks::new(pts) else {
            continue;
        };
        if geometry::general_position_check(&landmarks, geometry::COSPHERE_TOL).is_general() {
            found = Some(landmarks);
            break;
        }
    }
    let landmarks = found.ok_or(Error::GeneralPositionFailure {
        attempts: max_attempts,
    })?;
    let triangulation = geometry::delaunay_triangulate(&landmarks)?;

    let volumes: Vec<f64> = triangulation
        .cells
        .iter()
        .map(|cell| simplex_volume(&landmarks.gather(cell)))
        .collect();
    let total_volume: f64 = volumes.iter().sum();

    let mut points = Array2::zeros((d, n));
    let mut true_codes = Array2::zeros((m, n));
    let mut cell_assignments = Vec::with_capacity(n);
    for i in 0..n {
        // volume-proportional cell choice
        let mut target = rng.random::<f64>() * total_volume;
        let mut ci = volumes.len() - 1;
        for (c, &v) in volumes.iter().enumerate() {
            target -= v;
            if target <= 0.0 {
                ci = c;
                break;
            }
        }
        // interior Dirichlet(1) weights
        let k = d + 1;
        let weights = loop {
            let e: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().ln()).collect();
            let s: f64 = e.iter().sum();
            let w: Vec<f64> = e.into_iter().map(|x| x / s).collect();
            if w.iter().all(|&x| x >= 1e-3) {
                break w;
            }
        };
        let verts = landmarks.gather(&triangulation.cells[ci]);
        let y = verts.dot(&Array1::from_vec(weights.clone()));
        points.column_mut(i).assign(&y);
        for (slot, &j) in triangulation.cells[ci].iter().enumerate() {
            true_codes[[j, i]] = weights[slot];
        }
        cell_assignments.push(ci);
    }

    let dataset = Dataset {
        points,
        labels: Some(cell_assignments.clone()),
        meta: DatasetMeta {
            generator: "delaunay_model".into(),
            params: BTreeMap::from([
                ("m".into(), m.to_string()),
                ("n".into(), n.to_string()),
                ("d".into(), d.to_string()),
            ]),
            seed,
        },
    };
    Ok((
        dataset,
        GenerativeGroundTruth {
            landmarks,
            triangulation,
            true_codes,
            cell_assignments,
        },
    ))
}

fn read_idx_header(
    cursor: &mut std::io::Cursor<Vec<u8>>,
    expected_magic: u32,
    dims: usize,
    path: &Path,
) -> Result<Vec<usize>> {
    let truncated = |what: &str| Error::TruncatedFile(format!("{}: {what}", path.display()));
    let magic = cursor
        .read_u32::<BigEndian>()
        .map_err(|_| truncated("magic"))?;
    if magic != expected_magic {
        return Err(Error::BadMagic {
            expected: expected_magic,
            got: magic,
        });
    }
    let mut sizes = Vec::with_capacity(dims);
    for _ in 0..dims {
        sizes.push(
            cursor
                .read_u32::<BigEndian>()
                .map_err(|_| truncated("dimension sizes"))? as usize,
        );
    }
    Ok(sizes)
}

/// Load an IDX image/label pair, keep the requested digits with
/// `per_digit` seeded samples each, scale pixels to [0, 1], and remap the
/// kept digits to 0..k−1 in ascending digit order.
pub fn load_idx(
    images_path: &Path,
    labels_path: &Path,
    digits: &[u8],
    per_digit: usize,
    seed: u64,
) -> Result<Dataset> {
    let mut image_bytes = Vec::new();
    std::fs::File::open(images_path)?.read_to_end(&mut image_bytes)?;
    let mut cursor = std::io::Cursor::new(image_bytes);
    let sizes = read_idx_header(&mut cursor, IDX_IMAGES_MAGIC, 3, images_path)?;
    let (count, rows, cols) = (sizes[0], sizes[1], sizes[2]);
    let mut pixels = vec![0u8; count * rows * cols];
    cursor
        .read_exact(&mut pixels)
        .map_err(|_| Error::TruncatedFile(format!("{}: pixel data", images_path.display())))?;

    let mut label_bytes = Vec::new();
    std::fs::File::open(labels_path)?.read_to_end(&mut label_bytes)?;
    let mut cursor = std::io::Cursor::new(label_bytes);
    let sizes = read_idx_header(&mut cursor, IDX_LABELS_MAGIC, 1, labels_path)?;
    let label_count = sizes[0];
    if label_count != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let mut raw_labels = vec![0u8; label_count];
    cursor
        .read_exact(&mut raw_labels)
        .map_err(|_| Error::TruncatedFile(format!("{}: label data", labels_path.display())))?;

    let mut sorted_digits = digits.to_vec();
    sorted_digits.sort_unstable();
    sorted_digits.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<(usize, usize)> = Vec::new(); // (source index, remapped label)
    for (class, &digit) in sorted_digits.iter().enumerate() {
        let mut candidates: Vec<usize> = (0..count).filter(|&i| raw_labels[i] == digit).collect();
        if candidates.len() < per_digit {
            return Err(Error::InsufficientData {
                needed: per_digit,
                got: candidates.len(),
            });
        }
        candidates.shuffle(&mut rng);
        candidates.truncate(per_digit);
        candidates.sort_unstable();
        chosen.extend(candidates.into_iter().map(|i| (i, class)));
    }

    let d = rows * cols;
    let n = chosen.len();
    let mut points = Array2::zeros((d, n));
    let mut labels = Vec::with_capacity(n);
    for (col, &(src, class)) in chosen.iter().enumerate() {
        for p in 0..d {
            points[[p, col]] = f64::from(pixels[src * d + p]) / 255.0;
        }
        labels.push(class);
    }

    Ok(Dataset {
        points,
        labels: Some(labels),
        meta: DatasetMeta {
            generator: "idx".into(),
            params: BTreeMap::from([
                ("images".into(), images_path.display().to_string()),
                ("labels".into(), labels_path.display().to_string()),
                (
                    "digits".into(),
                    sorted_digits
                        .iter()
                        .map(|d| d.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                ),
                ("per_digit".into(), per_digit.to_string()),
            ]),
            seed,
        },
    })
}

/// Write an image/label pair in IDX format (used by tests and tooling to
/// produce bit-exact fixtures).
pub fn write_idx(
    images_path: &Path,
    labels_path: &Path,
    images: &[Vec<u8>],
    labels: &[u8],
    rows: usize,
    cols: usize,
) -> Result<()> {
    use byteorder::WriteBytesExt;
    if images.len() != labels.len() {
        return Err(Error::CountMismatch {
            images: images.len(),
            labels: labels.len(),
        });
    }
    let mut img = std::io::BufWriter::new(std::fs::File::create(images_path)?);
    std::io::Write::write_all(&mut img, &IDX_IMAGES_MAGIC.to_be_bytes())?;
    img.write_u32::<BigEndian>(images.len() as u32)?;
    img.write_u32::<BigEndian>(rows as u32)?;
    img.write_u32::<BigEndian>(cols as u32)?;
    for image in images {
        std::io::Write::write_all(&mut img, image)?;
    }

    let mut lbl = std::io::BufWriter::new(std::fs::File::create(labels_path)?);
    std::io::Write::write_all(&mut lbl, &IDX_LABELS_MAGIC.to_be_bytes())?;
    lbl.write_u32::<BigEndian>(labels.len() as u32)?;
    std::io::Write::write_all(&mut lbl, labels)?;
    Ok(())
}
