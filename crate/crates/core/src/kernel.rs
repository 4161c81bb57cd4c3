//! Kernel evaluation and Gram matrices.
//!
//! Every geometric quantity in the solvers reduces to inner products
//! `K(a, b) = <phi(a), phi(b)>` of feature vectors, so the kernel is the only
//! place where the ambient encoding space is touched.
//!
//! Supported families, written the way they appear on the command line:
//!
//! | string                      | kernel                                         |
//! |-----------------------------|------------------------------------------------|
//! | `linear`                    | `<a, b>`                                       |
//! | `rbf:sigma=S`               | `exp(-|a - b|^2 / (2 S^2))`                     |
//! | `poly:degree=P,c=C`         | `(<a, b> + C)^P`                               |
//! | `normalized:<inner>`        | `(K(a,b) + 1) / sqrt((K(a,a) + 1)(K(b,b) + 1))` |
//!
//! The normalized wrapper maps every instance onto the unit sphere of its
//! feature space, which is what makes arbitrary encodings admissible input
//! for the solvers (they require `|phi(x)| <= 1`).

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};

/// Slack allowed on unit-norm checks.
pub const NORM_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Linear,
    Rbf { sigma: f64 },
    Polynomial { degree: u32, c: f64 },
    Normalized(Box<KernelSpec>),
}

impl KernelSpec {
    pub fn rbf(sigma: f64) -> Result<Self> {
        let spec = KernelSpec::Rbf { sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn polynomial(degree: u32, c: f64) -> Result<Self> {
        let spec = KernelSpec::Polynomial { degree, c };
        spec.validate()?;
        Ok(spec)
    }

    /// Wraps `inner` in the sphere-normalizing transform. Wrapping an already
    /// normalized kernel is rejected.
    pub fn normalized(inner: KernelSpec) -> Result<Self> {
        let spec = KernelSpec::Normalized(Box::new(inner));
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::Input(format!("rbf sigma must be positive, got {sigma}")));
                }
                Ok(())
            }
            KernelSpec::Polynomial { degree, c } => {
                if *degree < 1 {
                    return Err(Error::Input("polynomial degree must be >= 1".into()));
                }
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::Input(format!("polynomial c must be >= 0, got {c}")));
                }
                Ok(())
            }
            KernelSpec::Normalized(inner) => {
                if matches!(**inner, KernelSpec::Normalized(_)) {
                    return Err(Error::Input("nested normalized kernels are not allowed".into()));
                }
                inner.validate()
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, KernelSpec::Linear)
    }

    /// Whether `K(x, x) = 1` for every `x`, i.e. the feature map lands on the
    /// unit sphere without any rescaling of the encodings.
    pub fn is_unit_diagonal(&self) -> bool {
        matches!(self, KernelSpec::Rbf { .. } | KernelSpec::Normalized(_))
    }

    /// Evaluates the kernel without a dimension check.
    pub(crate) fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Rbf { sigma } => (-sq_dist(a, b) / (2.0 * sigma * sigma)).exp(),
            KernelSpec::Polynomial { degree, c } => (dot(a, b) + c).powi(*degree as i32),
            KernelSpec::Normalized(inner) => {
                let kab = inner.eval(a, b);
                let kaa = inner.eval(a, a);
                let kbb = inner.eval(b, b);
                (kab + 1.0) / ((kaa + 1.0).sqrt() * (kbb + 1.0).sqrt())
            }
        }
    }

    /// Smallest value of `K(x, x)` over the cube `[0, scale]^s`.
    fn min_diagonal(&self) -> f64 {
        match self {
            KernelSpec::Linear => 0.0,
            KernelSpec::Rbf { .. } => 1.0,
            KernelSpec::Polynomial { degree, c } => c.powi(*degree as i32),
            KernelSpec::Normalized(_) => 1.0,
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Rbf { sigma } => write!(f, "rbf:sigma={sigma}"),
            KernelSpec::Polynomial { degree, c } => write!(f, "poly:degree={degree},c={c}"),
            KernelSpec::Normalized(inner) => write!(f, "normalized:{inner}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let bad = || Error::Input(format!("unrecognized kernel spec `{s}`"));
        match (head, rest) {
            ("linear", None) => Ok(KernelSpec::Linear),
            ("normalized", Some(inner)) => KernelSpec::normalized(inner.parse()?),
            ("rbf", Some(params)) => {
                let params = parse_params(params).ok_or_else(bad)?;
                match params.as_slice() {
                    [("sigma", v)] => KernelSpec::rbf(v.parse().map_err(|_| bad())?),
                    _ => Err(bad()),
                }
            }
            ("poly", Some(params)) => {
                let params = parse_params(params).ok_or_else(bad)?;
                let mut degree = None;
                let mut c = None;
                for (k, v) in params {
                    match k {
                        "degree" => degree = Some(v.parse::<u32>().map_err(|_| bad())?),
                        "c" => c = Some(v.parse::<f64>().map_err(|_| bad())?),
                        _ => return Err(bad()),
                    }
                }
                KernelSpec::polynomial(degree.ok_or_else(bad)?, c.unwrap_or(0.0))
            }
            _ => Err(bad()),
        }
    }
}

fn parse_params(s: &str) -> Option<Vec<(&str, &str)>> {
    s.split(',').map(|kv| kv.split_once('=').map(|(k, v)| (k.trim(), v.trim()))).collect()
}

impl Serialize for KernelSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `K(a, b)` under `spec`.
pub fn eval_kernel(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Input("encodings must have dimension >= 1".into()));
    }
    check_dim(a.len(), b.len())?;
    Ok(spec.eval(a, b))
}

/// Symmetric matrix of pairwise kernel values, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }
}

/// Builds the Gram matrix of `points`. Each upper-triangle entry is evaluated
/// exactly once and mirrored, so the result does not depend on how rows are
/// scheduled across threads.
pub fn gram(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<GramMatrix> {
    spec.validate()?;
    let first = points.first().ok_or_else(|| Error::Input("gram matrix of an empty point set".into()))?;
    let s = first.len();
    if s == 0 {
        return Err(Error::Input("encodings must have dimension >= 1".into()));
    }
    for p in points {
        check_dim(s, p.len())?;
    }
    let n = points.len();
    let upper: Vec<Vec<f64>> =
        (0..n).into_par_iter().map(|i| (i..n).map(|j| spec.eval(&points[i], &points[j])).collect()).collect();
    let mut entries = vec![0.0; n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    Ok(GramMatrix { n, entries })
}

/// Maps `omega` (with `|omega| <= 1`) onto the unit sphere one dimension up:
/// `(omega, sqrt(1 - |omega|^2))`.
pub fn lift_to_sphere(omega: &[f64]) -> Result<Vec<f64>> {
    let sq = dot(omega, omega);
    if sq.sqrt() > 1.0 + NORM_SLACK {
        return Err(Error::Input(format!("cannot lift a vector of norm {} onto the sphere; rescale first", sq.sqrt())));
    }
    let mut out = Vec::with_capacity(omega.len() + 1);
    out.extend_from_slice(omega);
    out.push((1.0 - sq).max(0.0).sqrt());
    Ok(out)
}

/// Upper bound on the Lipschitz constant of the feature map over the cube
/// `[0, domain_scale]^s`, i.e. a constant `L` with
/// `|phi(x) - phi(y)| <= L |x - y|`.
///
/// Per kernel:
///
/// * linear: the feature map is the identity, `L = 1`.
/// * rbf: `|phi(x) - phi(y)|^2 = 2 - 2 exp(-r^2 / 2 sigma^2) <= r^2 / sigma^2`,
///   so `L = 1 / sigma`.
/// * poly (`K = f(<x, y>)` with `f(u) = (u + c)^p`): the feature map is smooth
///   and the cube is convex, so `L = sup |D phi|`. For a dot-product kernel
///   `|D phi(x)|^2 <= f'(|x|^2) + f''(|x|^2) |x|^2`, and both terms grow with
///   `|x|^2 <= R = s * domain_scale^2`, giving
///   `L^2 = p (R + c)^(p-1) + p (p-1) (R + c)^(p-2) R`.
/// * normalized: `phi(x) = v(x) / |v(x)|` with `v(x) = (phi_inner(x), 1)`.
///   Radial projection onto the sphere of radius `r = min |v|` is
///   non-expansive outside that ball, hence `L = L_inner / r` where
///   `r = sqrt(1 + min K_inner(x, x))`.
pub fn lipschitz_constant(spec: &KernelSpec, dim: usize, domain_scale: f64) -> f64 {
    match spec {
        KernelSpec::Linear => 1.0,
        KernelSpec::Rbf { sigma } => 1.0 / sigma,
        KernelSpec::Polynomial { degree, c } => {
            let p = *degree as f64;
            let r = dim as f64 * domain_scale * domain_scale;
            let base = r + c;
            let mut sq = p * base.powi(*degree as i32 - 1);
            if *degree >= 2 {
                sq += p * (p - 1.0) * base.powi(*degree as i32 - 2) * r;
            }
            sq.sqrt()
        }
        KernelSpec::Normalized(inner) => {
            lipschitz_constant(inner, dim, domain_scale) / (1.0 + inner.min_diagonal()).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm_lin() -> KernelSpec {
        KernelSpec::normalized(KernelSpec::Linear).unwrap()
    }

    #[test]
    fn normalized_linear_values() {
        let k = norm_lin();
        assert!((eval_kernel(&k, &[1.0, 0.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((eval_kernel(&k, &[1.0, 0.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_dot() {
        let v = eval_kernel(&KernelSpec::Linear, &[0.3, 0.4], &[0.3, 0.4]).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            eval_kernel(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]),
            Err(Error::Dimension { expected: 1, found: 2 })
        ));
        assert!(gram(&KernelSpec::Linear, &[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn gram_examples() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let g = gram(&KernelSpec::Linear, &pts).unwrap();
        assert_eq!(g.row(0), &[1.0, 0.0]);
        assert_eq!(g.row(1), &[0.0, 1.0]);

        let g = gram(&norm_lin(), &pts).unwrap();
        assert!((g.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((g.get(0, 0) - 1.0).abs() < 1e-15);

        let single = gram(&KernelSpec::rbf(0.7).unwrap(), &[vec![0.2, 0.9]]).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.get(0, 0), 1.0);
    }

    #[test]
    fn gram_is_exactly_symmetric() {
        let pts: Vec<Vec<f64>> = (0..17).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos() * 0.5]).collect();
        let g = gram(&norm_lin(), &pts).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lift_to_sphere(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(lift_to_sphere(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let v = lift_to_sphere(&[0.6, 0.0]).unwrap();
        assert!((v[2] - 0.8).abs() < 1e-15);
        assert!(lift_to_sphere(&[1.0, 0.1]).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz_constant(&KernelSpec::Linear, 3, 1.0), 1.0);
        assert_eq!(lipschitz_constant(&KernelSpec::rbf(2.0).unwrap(), 3, 1.0), 0.5);
        assert_eq!(lipschitz_constant(&KernelSpec::rbf(1.0).unwrap(), 3, 1.0), 1.0);
        // degree 1 reduces to the linear bound
        let p1 = KernelSpec::polynomial(1, 0.5).unwrap();
        assert!((lipschitz_constant(&p1, 4, 1.0) - 1.0).abs() < 1e-15);
        let nl = norm_lin();
        assert_eq!(lipschitz_constant(&nl, 2, 1.0), 1.0);
    }

    #[test]
    fn spec_parsing_round_trip() {
        for s in ["linear", "rbf:sigma=0.5", "poly:degree=3,c=1", "normalized:rbf:sigma=2"] {
            let k: KernelSpec = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("normalized:normalized:linear".parse::<KernelSpec>().is_err());
        assert!("rbf:sigma=0".parse::<KernelSpec>().is_err());
        assert!("poly:degree=0,c=1".parse::<KernelSpec>().is_err());
        assert!("poly:degree=2,c=-1".parse::<KernelSpec>().is_err());
        assert!("cosine".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn nested_normalization_rejected() {
        let inner = norm_lin();
        assert!(KernelSpec::normalized(inner).is_err());
    }
}
