use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{self, derive_seed};

/// One isotropic Gaussian component. `label` is `None` for OOD components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub label: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRole {
    Train,
    Val,
    TestId,
    TrainOod,
    TestOod,
}

impl SplitRole {
    pub const ALL: [SplitRole; 5] = [
        SplitRole::Train,
        SplitRole::Val,
        SplitRole::TestId,
        SplitRole::TestOod,
        SplitRole::TrainOod,
    ];

    /// Whether rows of this role carry class labels.
    pub fn is_labeled(self) -> bool {
        matches!(self, SplitRole::Train | SplitRole::Val | SplitRole::TestId)
    }

    pub fn name(self) -> &'static str {
        match self {
            SplitRole::Train => "train",
            SplitRole::Val => "val",
            SplitRole::TestId => "test_id",
            SplitRole::TrainOod => "train_ood",
            SplitRole::TestOod => "test_ood",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub features: Matrix,
    pub labels: Option<Vec<usize>>,
    pub role: SplitRole,
}

impl DatasetSplit {
    pub fn new(features: Matrix, labels: Option<Vec<usize>>, role: SplitRole) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::invalid(format!("{} split is empty", role.name())));
        }
        match (&labels, role.is_labeled()) {
            (Some(l), true) if l.len() != features.rows() => Err(Error::shape(format!(
                "{} labels for {} rows",
                l.len(),
                features.rows()
            ))),
            (Some(_), true) | (None, false) => Ok(Self {
                features,
                labels,
                role,
            }),
            (None, true) => Err(Error::invalid(format!("{} split needs labels", role.name()))),
            (Some(_), false) => Err(Error::invalid(format!(
                "{} split must be unlabeled",
                role.name()
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Labels, or an error naming the split when it is unlabeled.
    pub fn labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::MissingInput(format!("labels for {} split", self.role.name())))
    }

    pub fn select(&self, indices: &[usize], role: SplitRole) -> Result<DatasetSplit> {
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        DatasetSplit::new(self.features.select_rows(indices), labels, role)
    }
}

/// Draws exactly `n_per_component` i.i.d. points from every component.
///
/// Components must be either all labeled or all unlabeled; the split role is
/// `Train` for the former and `TestOod` for the latter.
pub fn sample_mixture(specs: &[GaussianSpec], n_per_component: usize, seed: u64) -> Result<DatasetSplit> {
    if specs.is_empty() {
        return Err(Error::invalid("no mixture components"));
    }
    if n_per_component == 0 {
        return Err(Error::invalid("n_per_component must be > 0"));
    }
    let dim = specs[0].mean.len();
    let labeled = specs[0].label.is_some();
    for s in specs {
        if !(s.sigma > 0.0) || !s.sigma.is_finite() {
            return Err(Error::invalid(format!("sigma {} must be > 0", s.sigma)));
        }
        if s.mean.len() != dim || dim == 0 {
            return Err(Error::shape("component means must share a positive dimension"));
        }
        if s.label.is_some() != labeled {
            return Err(Error::invalid("mixture mixes labeled and unlabeled components"));
        }
    }

    let mut rng = seed::rng(seed);
    let mut data = Vec::with_capacity(specs.len() * n_per_component * dim);
    let mut labels = Vec::with_capacity(specs.len() * n_per_component);
    for s in specs {
        for _ in 0..n_per_component {
            for &mu in &s.mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(mu + s.sigma * z);
            }
            if let Some(l) = s.label {
                labels.push(l);
            }
        }
    }
    let features = Matrix::from_vec(specs.len() * n_per_component, dim, data)?;
    if labeled {
        DatasetSplit::new(features, Some(labels), SplitRole::Train)
    } else {
        DatasetSplit::new(features, None, SplitRole::TestOod)
    }
}

/// Geometry and sizes of the synthetic benchmark.
///
/// ID classes sit on the vertices of a regular polygon; OOD components sit on
/// a larger polygon rotated against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub num_classes: usize,
    pub id_radius: f64,
    pub id_sigma: f64,
    pub points_per_class: usize,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub num_ood_components: usize,
    pub ood_radius: f64,
    /// Rotation of the OOD polygon relative to the ID polygon, in degrees.
    pub ood_rotation_deg: f64,
    pub ood_sigma: f64,
    pub points_per_ood_component: usize,
    /// Share of each OOD component used as auxiliary training outliers.
    pub ood_train_fraction: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            num_classes: 3,
            id_radius: 4.0,
            id_sigma: 0.5,
            points_per_class: 500,
            train_fraction: 0.7,
            val_fraction: 0.15,
            num_ood_components: 4,
            ood_radius: 7.0,
            ood_rotation_deg: 45.0,
            ood_sigma: 0.5,
            points_per_ood_component: 500,
            ood_train_fraction: 0.5,
        }
    }
}

impl BenchmarkConfig {
    fn polygon(count: usize, radius: f64, offset_deg: f64) -> Vec<Vec<f64>> {
        (0..count)
            .map(|i| {
                let angle = (90.0 + offset_deg).to_radians() + 2.0 * PI * i as f64 / count as f64;
                vec![radius * angle.cos(), radius * angle.sin()]
            })
            .collect()
    }

    pub fn id_means(&self) -> Vec<Vec<f64>> {
        Self::polygon(self.num_classes, self.id_radius, 0.0)
    }

    pub fn ood_means(&self) -> Vec<Vec<f64>> {
        Self::polygon(self.num_ood_components, self.ood_radius, self.ood_rotation_deg)
    }

    fn split_sizes(&self) -> (usize, usize, usize) {
        let n = self.points_per_class;
        let train = (n as f64 * self.train_fraction).round() as usize;
        let val = (n as f64 * self.val_fraction).round() as usize;
        (train, val, n.saturating_sub(train + val))
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.num_ood_components == 0 {
            return Err(Error::Config("need >= 2 classes and >= 1 OOD component".into()));
        }
        let (train, val, test) = self.split_sizes();
        if train == 0 || val == 0 || test == 0 || train + val + test != self.points_per_class {
            return Err(Error::Config(format!(
                "fractions {} / {} leave an empty ID split",
                self.train_fraction, self.val_fraction
            )));
        }
        let ood_train =
            (self.points_per_ood_component as f64 * self.ood_train_fraction).round() as usize;
        if ood_train == 0 || ood_train >= self.points_per_ood_component {
            return Err(Error::Config("ood_train_fraction leaves an empty OOD split".into()));
        }
        for v in [self.id_radius, self.ood_radius, self.id_sigma, self.ood_sigma] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("invalid geometry value {v}")));
            }
        }
        Ok(())
    }
}

/// All splits of one benchmark draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub train: DatasetSplit,
    pub val: DatasetSplit,
    pub test_id: DatasetSplit,
    pub test_ood: DatasetSplit,
    pub train_ood: Option<DatasetSplit>,
}

impl Benchmark {
    pub fn split(&self, role: SplitRole) -> Option<&DatasetSplit> {
        match role {
            SplitRole::Train => Some(&self.train),
            SplitRole::Val => Some(&self.val),
            SplitRole::TestId => Some(&self.test_id),
            SplitRole::TestOod => Some(&self.test_ood),
            SplitRole::TrainOod => self.train_ood.as_ref(),
        }
    }
}

/// Partitions the pooled draw component by component: within each component
/// the first rows go to the first split, and so on.
fn partition(pool: &DatasetSplit, components: usize, sizes: &[(usize, SplitRole)]) -> Result<Vec<DatasetSplit>> {
    let per = pool.len() / components;
    let mut start = 0;
    let mut out = Vec::with_capacity(sizes.len());
    for &(size, role) in sizes {
        let indices: Vec<usize> = (0..components)
            .flat_map(|c| (c * per + start)..(c * per + start + size))
            .collect();
        out.push(pool.select(&indices, role)?);
        start += size;
    }
    Ok(out)
}

pub fn make_benchmark(config: &BenchmarkConfig, seed: u64) -> Result<Benchmark> {
    config.validate()?;
    let id_specs: Vec<GaussianSpec> = config
        .id_means()
        .into_iter()
        .enumerate()
        .map(|(c, mean)| GaussianSpec {
            mean,
            sigma: config.id_sigma,
            label: Some(c),
        })
        .collect();
    let ood_specs: Vec<GaussianSpec> = config
        .ood_means()
        .into_iter()
        .map(|mean| GaussianSpec {
            mean,
            sigma: config.ood_sigma,
            label: None,
        })
        .collect();

    let id_pool = sample_mixture(&id_specs, config.points_per_class, derive_seed(seed, 1))?;
    let (train, val, test) = config.split_sizes();
    let mut id = partition(
        &id_pool,
        config.num_classes,
        &[
            (train, SplitRole::Train),
            (val, SplitRole::Val),
            (test, SplitRole::TestId),
        ],
    )?
    .into_iter();

    let ood_pool = sample_mixture(&ood_specs, config.points_per_ood_component, derive_seed(seed, 2))?;
    let ood_train = (config.points_per_ood_component as f64 * config.ood_train_fraction).round() as usize;
    let mut ood = partition(
        &ood_pool,
        config.num_ood_components,
        &[
            (ood_train, SplitRole::TrainOod),
            (config.points_per_ood_component - ood_train, SplitRole::TestOod),
        ],
    )?
    .into_iter();

    Ok(Benchmark {
        train: id.next().unwrap(),
        val: id.next().unwrap(),
        test_id: id.next().unwrap(),
        train_ood: ood.next(),
        test_ood: ood.next().unwrap(),
    })
}

/// Three ID classes on a radius-4 triangle and four OOD clusters on a
/// radius-7 square rotated by 45°, all with σ = 0.5.
pub fn make_default_benchmark(seed: u64) -> Result<Benchmark> {
    make_benchmark(&BenchmarkConfig::default(), seed)
}
