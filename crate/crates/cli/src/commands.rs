//! The four subcommands: certify, train, cluster, gen.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use simplexcode::data::DatasetMeta;
use simplexcode::geometry::{self, Landmarks, Triangulation};
use simplexcode::io;
use simplexcode::oracle;
use simplexcode::{
    clustering_accuracy, gen_circle, gen_delaunay_model, gen_two_moons, kmeans, load_idx,
    similarity_graph, spectral_embed, train, ClusterLabels, Dataset, Dictionary, Error,
    GenerativeGroundTruth, Result,
};

use crate::config::{
    CertifyConfig, CertifyMetric, ClusterCmdConfig, DatasetConfig, GenCmdConfig, TrainCmdConfig,
};

const STRICT_MARGIN: f64 = 1e-12;
const LANDMARK_ATTEMPTS: usize = 100;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

// ---------------------------------------------------------------- certify

#[derive(Debug, Serialize)]
struct SolveRecord {
    support: Vec<usize>,
    objective: f64,
    cell_match: bool,
    /// ℓ0 only: is the cell support's objective strictly below every other
    /// feasible support's objective?
    strictly_minimal: Option<bool>,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct PointRecord {
    point: Vec<f64>,
    cell: Vec<usize>,
    l1: Option<SolveRecord>,
    l0: Option<SolveRecord>,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct InstanceRecord {
    instance: usize,
    cells: usize,
    points: Vec<PointRecord>,
}

#[derive(Debug, Serialize)]
struct CertifyReport {
    config: CertifyConfig,
    total: usize,
    passed: usize,
    pass_rate: f64,
    instances: Vec<InstanceRecord>,
}

fn sample_landmarks(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Result<Landmarks> {
    for _ in 0..LANDMARK_ATTEMPTS {
        let mut pts = Array2::zeros((d, m));
        for x in pts.iter_mut() {
            *x = rng.random::<f64>();
        }
        let Ok(l) = Landmarks::new(pts) else { continue };
        if geometry::general_position_check(&l, geometry::COSPHERE_TOL).is_general() {
            return Ok(l);
        }
    }
    Err(Error::GeneralPositionFailure {
        attempts: LANDMARK_ATTEMPTS,
    })
}

/// Pick a uniformly random cell, then a Dirichlet(1) interior point whose
/// barycentric coordinates are all at least `min_bc`.
fn sample_interior_point(
    rng: &mut ChaCha8Rng,
    landmarks: &Landmarks,
    tri: &Triangulation,
    min_bc: f64,
) -> (usize, Array1<f64>) {
    let ci = rng.random_range(0..tri.cells.len());
    let verts = landmarks.gather(&tri.cells[ci]);
    let k = verts.ncols();
    loop {
        let mut w: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().ln()).collect();
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        if w.iter().all(|&v| v >= min_bc) {
            let mut y = Array1::zeros(verts.nrows());
            for (j, &wj) in w.iter().enumerate() {
                y = y + verts.column(j).to_owned() * wj;
            }
            return (ci, y);
        }
    }
}

fn l1_record(dict: &Dictionary, y: &Array1<f64>, cell: &[usize]) -> Result<SolveRecord> {
    let r = oracle::solve_weighted_l1_exact(dict, y.view())?;
    let pass = r.support == cell;
    Ok(SolveRecord {
        support: r.support,
        objective: r.objective,
        cell_match: pass,
        strictly_minimal: None,
        pass,
    })
}

fn l0_record(dict: &Dictionary, y: &Array1<f64>, cell: &[usize]) -> Result<SolveRecord> {
    let r = oracle::solve_weighted_l0_exact(dict, y.view())?;
    let cell_match = r.support == cell;
    let weights = dict.sq_distances(y.view())?;
    let cell_obj: f64 = cell.iter().map(|&j| weights[j]).sum();
    let all = oracle::feasible_support_objectives(dict, y.view())?;
    let strictly_minimal = all
        .iter()
        .filter(|(s, _)| s != cell)
        .all(|(_, obj)| *obj > cell_obj + STRICT_MARGIN);
    Ok(SolveRecord {
        support: r.support,
        objective: r.objective,
        cell_match,
        strictly_minimal: Some(strictly_minimal),
        pass: cell_match && strictly_minimal,
    })
}

pub fn cmd_certify(cfg: &CertifyConfig, out: &Path) -> Result<bool> {
    cfg.validate()?;
    ensure_out_dir(out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut instances = Vec::with_capacity(cfg.instances);
    let mut passed = 0usize;
    for instance in 0..cfg.instances {
        let landmarks = sample_landmarks(&mut rng, cfg.m, cfg.d)?;
        let tri = geometry::delaunay_triangulate(&landmarks)?;
        let dict = Dictionary::from(landmarks.clone());
        let mut points = Vec::with_capacity(cfg.points_per_instance);
        for _ in 0..cfg.points_per_instance {
            let (ci, y) = sample_interior_point(&mut rng, &landmarks, &tri, cfg.min_barycentric);
            let cell = &tri.cells[ci];
            let l1 = match cfg.metric {
                CertifyMetric::L1 | CertifyMetric::Both => Some(l1_record(&dict, &y, cell)?),
                CertifyMetric::L0 => None,
            };
            let l0 = match cfg.metric {
                CertifyMetric::L0 | CertifyMetric::Both => Some(l0_record(&dict, &y, cell)?),
                CertifyMetric::L1 => None,
            };
            let pass = l1.as_ref().is_none_or(|r| r.pass) && l0.as_ref().is_none_or(|r| r.pass);
            if pass {
                passed += 1;
            }
            points.push(PointRecord {
                point: y.to_vec(),
                cell: cell.clone(),
                l1,
                l0,
                pass,
            });
        }
        instances.push(InstanceRecord {
            instance,
            cells: tri.cells.len(),
            points,
        });
    }
    let total = cfg.instances * cfg.points_per_instance;
    let report = CertifyReport {
        config: cfg.clone(),
        total,
        passed,
        pass_rate: passed as f64 / total as f64,
        instances,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(passed == total)
}

// ---------------------------------------------------------------- datasets

pub fn build_dataset(cfg: &DatasetConfig) -> Result<(Dataset, Option<GenerativeGroundTruth>)> {
    match cfg.generator.as_str() {
        "circle" => Ok((gen_circle(cfg.n, cfg.sigma, cfg.seed), None)),
        "two-moons" => Ok((gen_two_moons(cfg.n, cfg.sigma, cfg.seed), None)),
        "delaunay-model" => {
            let (ds, truth) = gen_delaunay_model(cfg.landmarks, cfg.n, cfg.d, cfg.seed)?;
            Ok((ds, Some(truth)))
        }
        "idx" => {
            let images = cfg.images_path.as_deref().ok_or_else(|| {
                Error::Parse("idx source needs images_path".into())
            })?;
            let labels = cfg.labels_path.as_deref().ok_or_else(|| {
                Error::Parse("idx source needs labels_path".into())
            })?;
            let ds = load_idx(images, labels, &cfg.digits, cfg.per_digit, cfg.seed)?;
            Ok((ds, None))
        }
        "csv" => {
            let points_path = cfg.points_path.as_deref().ok_or_else(|| {
                Error::Parse("csv source needs points_path".into())
            })?;
            let points = io::read_matrix_csv(points_path)?;
            let labels = match cfg.labels_csv.as_deref() {
                Some(p) => Some(io::read_labels_csv(p)?),
                None => None,
            };
            if let Some(l) = &labels {
                if l.len() != points.ncols() {
                    return Err(Error::LengthMismatch(l.len(), points.ncols()));
                }
            }
            Ok((
                Dataset {
                    points,
                    labels,
                    meta: DatasetMeta {
                        generator: "csv".into(),
                        params: BTreeMap::from([(
                            "points_path".into(),
                            points_path.display().to_string(),
                        )]),
                        seed: cfg.seed,
                    },
                },
                None,
            ))
        }
        other => Err(Error::Parse(format!("unknown generator {other:?}"))),
    }
}

// ---------------------------------------------------------------- train

#[derive(Debug, Serialize)]
struct TrainRunReport {
    config: TrainCmdConfig,
    initial_loss: f64,
    final_loss: f64,
    atom_usage: Vec<f64>,
}

pub fn cmd_train(cfg: &TrainCmdConfig, out: &Path) -> Result<()> {
    cfg.train.validate()?;
    let (dataset, _) = build_dataset(&cfg.dataset)?;
    ensure_out_dir(out)?;
    let report = train(dataset.points.view(), &cfg.train)?;
    io::write_matrix_csv(&out.join("atoms.csv"), report.dictionary.atoms())?;
    io::write_matrix_csv(&out.join("codes.csv"), report.codes.view())?;
    write_loss_history(&out.join("loss_history.csv"), &report.loss_history)?;
    let run = TrainRunReport {
        config: cfg.clone(),
        initial_loss: *report.loss_history.first().expect("epochs > 0"),
        final_loss: *report.loss_history.last().expect("epochs > 0"),
        atom_usage: report.atom_usage().to_vec(),
    };
    write_json(&out.join("report.json"), &run)?;
    Ok(())
}

fn write_loss_history(path: &Path, history: &[f64]) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for v in history {
        writeln!(f, "{}", io::format_f64(*v))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- cluster

#[derive(Debug, Serialize)]
struct ClusterMetrics {
    config: ClusterCmdConfig,
    n: usize,
    components: usize,
    kds_accuracy: f64,
    km_accuracy: f64,
    final_loss: f64,
}

pub fn cmd_cluster(cfg: &ClusterCmdConfig, out: &Path) -> Result<()> {
    cfg.train.validate()?;
    if cfg.k < 2 {
        return Err(Error::Parse(format!("k must be at least 2, got {}", cfg.k)));
    }
    let (dataset, _) = build_dataset(&cfg.dataset)?;
    let truth_labels = dataset
        .labels
        .clone()
        .ok_or_else(|| Error::Parse("clustering needs ground-truth labels".into()))?;
    ensure_out_dir(out)?;

    let report = train(dataset.points.view(), &cfg.train)?;
    let graph = similarity_graph(report.codes.view())?;
    let (embedding, components) = spectral_embed(&graph, cfg.k)?;
    if components > cfg.k && cfg.fatal_degenerate {
        return Err(Error::DegenerateGraph {
            components,
            k: cfg.k,
        });
    }
    let kds = kmeans(embedding.view(), cfg.k, cfg.kmeans_seed)?;
    let km = kmeans(dataset.points.t(), cfg.k, cfg.kmeans_seed)?;
    let truth = ClusterLabels::new(truth_labels, cfg.k)?;
    let metrics = ClusterMetrics {
        config: cfg.clone(),
        n: dataset.len(),
        components,
        kds_accuracy: clustering_accuracy(&kds, &truth)?,
        km_accuracy: clustering_accuracy(&km, &truth)?,
        final_loss: *report.loss_history.last().expect("epochs > 0"),
    };
    io::write_labels_csv(&out.join("labels.csv"), &kds.labels)?;
    write_json(&out.join("metrics.json"), &metrics)?;
    Ok(())
}

// ---------------------------------------------------------------- gen

#[derive(Debug, Serialize)]
struct GenReport {
    config: GenCmdConfig,
    meta: DatasetMeta,
    n: usize,
    dim: usize,
}

pub fn cmd_gen(cfg: &GenCmdConfig, out: &Path) -> Result<()> {
    let (dataset, truth) = build_dataset(&cfg.dataset)?;
    ensure_out_dir(out)?;
    io::write_matrix_csv(&out.join("data.csv"), dataset.points.view())?;
    if let Some(labels) = &dataset.labels {
        io::write_labels_csv(&out.join("labels.csv"), labels)?;
    }
    if let Some(truth) = &truth {
        io::write_landmarks_csv(&out.join("landmarks.csv"), &truth.landmarks)?;
        io::write_matrix_csv(&out.join("true_codes.csv"), truth.true_codes.view())?;
    }
    let report = GenReport {
        config: cfg.clone(),
        meta: dataset.meta.clone(),
        n: dataset.len(),
        dim: dataset.dim(),
    };
    write_json(&out.join("meta.json"), &report)?;
    Ok(())
}
