//! Planted instances: samples drawn uniformly from the unit ball and labelled
//! by a random `t`-polyhedron, keeping only points at least `gamma` away from
//! the relevant bounding hyperplanes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Provenance};
use crate::dual::{Label, LabeledPoint};
use crate::error::{Error, Result};
use crate::kernel::dot;

/// Total draws (positions plus halfspace resamples) before giving up.
pub const DRAW_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub t: usize,
    pub gamma: f64,
    /// Minimum distance between points of opposite labels.
    pub rho: f64,
    pub m: usize,
    pub dim: usize,
    pub seed: u64,
}

impl PlantedConfig {
    pub fn new(t: usize, gamma: f64, m: usize, dim: usize, seed: u64) -> Self {
        PlantedConfig { t, gamma, rho: 2.0 * gamma, m, dim, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.dim == 0 || self.m == 0 {
            return Err(Error::Input("t, dim and m must all be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Input(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.rho > 0.0) {
            return Err(Error::Input(format!("rho must be positive, got {}", self.rho)));
        }
        Ok(())
    }
}

/// `{x : <normal, x> + offset >= 0}` with a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedHalfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl PlantedHalfspace {
    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) + self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub dataset: Dataset,
    pub truth: Vec<PlantedHalfspace>,
}

fn unit_normal(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = dot(&v, &v).sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn ball_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let dir = unit_normal(rng, dim);
    let r = rng.random::<f64>().powf(1.0 / dim as f64);
    dir.into_iter().map(|x| x * r).collect()
}

/// Label by margin: `Some(+1)` deep inside every halfspace, `Some(-1)` deep
/// outside at least one, `None` inside the exclusion band.
fn margin_label(truth: &[PlantedHalfspace], x: &[f64], gamma: f64) -> Option<Label> {
    let min = truth.iter().map(|h| h.value(x)).fold(f64::INFINITY, f64::min);
    if min >= gamma {
        Some(Label::Positive)
    } else if min <= -gamma {
        Some(Label::Negative)
    } else {
        None
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Draws `ceil(m/2)` positives and `floor(m/2)` negatives by rejection.
pub fn plant_polyhedron(cfg: &PlantedConfig) -> Result<PlantedInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hi = (0.6 - cfg.gamma / 2.0).max(cfg.gamma);
    let truth: Vec<PlantedHalfspace> = (0..cfg.t)
        .map(|_| {
            let normal = unit_normal(&mut rng, cfg.dim);
            let offset = rng.random_range(cfg.gamma..=hi);
            PlantedHalfspace { normal, offset }
        })
        .collect();

    let want_pos = cfg.m.div_ceil(2);
    let want_neg = cfg.m / 2;
    let (mut n_pos, mut n_neg) = (0, 0);
    let mut points: Vec<LabeledPoint> = Vec::with_capacity(cfg.m);
    let rho_sq = cfg.rho * cfg.rho;
    let mut draws = 0;
    while n_pos < want_pos || n_neg < want_neg {
        draws += 1;
        if draws > DRAW_BUDGET {
            return Err(Error::ConfigInfeasible(format!(
                "{DRAW_BUDGET} draws yielded only {n_pos}/{want_pos} positives and {n_neg}/{want_neg} negatives"
            )));
        }
        let x = ball_point(&mut rng, cfg.dim);
        let Some(label) = margin_label(&truth, &x, cfg.gamma) else {
            continue;
        };
        let slot = match label {
            Label::Positive => &mut n_pos,
            Label::Negative => &mut n_neg,
        };
        if *slot >= if label == Label::Positive { want_pos } else { want_neg } {
            continue;
        }
        if points.iter().any(|p| p.label != label && squared_distance(&p.encoding, &x) < rho_sq) {
            continue;
        }
        *slot += 1;
        points.push(LabeledPoint::new(x, label));
    }
    let dataset = Dataset::new(points, Provenance::Generated { config: cfg.clone() })?;
    Ok(PlantedInstance { dataset, truth })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCheck {
    /// Smallest `min_j value_j(x)` over positives.
    pub min_positive_margin: f64,
    /// Smallest `max_j -value_j(x)` over negatives.
    pub min_negative_margin: f64,
    pub min_opposite_distance: f64,
    pub max_norm: f64,
}

impl PlantedCheck {
    pub fn holds(&self, gamma: f64, rho: f64) -> bool {
        self.min_positive_margin >= gamma
            && self.min_negative_margin >= gamma
            && self.min_opposite_distance >= rho
            && self.max_norm <= 1.0
    }
}

/// Recomputes the generator's postconditions from the ground truth.
pub fn verify_planted(points: &[LabeledPoint], truth: &[PlantedHalfspace]) -> PlantedCheck {
    let mut check = PlantedCheck {
        min_positive_margin: f64::INFINITY,
        min_negative_margin: f64::INFINITY,
        min_opposite_distance: f64::INFINITY,
        max_norm: 0.0,
    };
    for (i, p) in points.iter().enumerate() {
        let values: Vec<f64> = truth.iter().map(|h| h.value(&p.encoding)).collect();
        match p.label {
            Label::Positive => {
                check.min_positive_margin = values.iter().copied().fold(check.min_positive_margin, f64::min)
            }
            Label::Negative => {
                let deepest = values.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max);
                check.min_negative_margin = check.min_negative_margin.min(deepest);
            }
        }
        check.max_norm = check.max_norm.max(dot(&p.encoding, &p.encoding).sqrt());
        for q in &points[i + 1..] {
            if q.label != p.label {
                let dist = squared_distance(&p.encoding, &q.encoding).sqrt();
                check.min_opposite_distance = check.min_opposite_distance.min(dist);
            }
        }
    }
    check
}
