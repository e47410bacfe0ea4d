//! Probability measures, joint sources and exact information quantities.
//!
//! Every measure in the crate is a [`PointMassMeasure`]: finitely many
//! distinct points of a [`MetricSpace`] with nonnegative masses summing to
//! one. Empirical distributions, quantized Gaussians and discrete marginals
//! all share this representation so the Prohorov machinery only has to deal
//! with one shape.
//!
//! Information quantities are in bits.

use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;

/// Normalization tolerance for probability vectors.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Shannon entropy of a probability vector, in bits.
pub fn entropy_bits(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.log2())
        .sum()
}

/// Binary entropy `h(p)` in bits.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_bits(&[p, 1.0 - p])
}

/// Binary convolution `a * b = a(1-b) + (1-a)b`.
pub fn binary_convolution(a: f64, b: f64) -> f64 {
    a * (1.0 - b) + (1.0 - a) * b
}

/// Mutual information of a row-major joint pmf with `rows` x `cols` cells.
pub fn mutual_information_pmf(pmf: &[f64], rows: usize, cols: usize) -> f64 {
    debug_assert_eq!(pmf.len(), rows * cols);
    let px: Vec<f64> = (0..rows)
        .map(|r| pmf[r * cols..(r + 1) * cols].iter().sum())
        .collect();
    let py: Vec<f64> = (0..cols)
        .map(|c| (0..rows).map(|r| pmf[r * cols + c]).sum())
        .collect();
    let mut mi = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let p = pmf[r * cols + c];
            if p > 0.0 {
                mi += p * (p / (px[r] * py[c])).log2();
            }
        }
    }
    mi.max(0.0)
}

fn check_pmf(name: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution(format!("{name}: empty")));
    }
    for (i, &v) in p.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "{name}: entry {i} = {v} is not a nonnegative finite number"
            )));
        }
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{name}: masses sum to {total:.15}, expected 1"
        )));
    }
    Ok(())
}

/// Underlying metric space of a measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpace {
    /// Symbols `0..size` with the discrete 0/1 metric.
    Finite { size: usize },
    /// The real line with `|x - y|`.
    RealLine,
    /// The plane with the coordinate-max metric.
    RealPair,
}

/// A point of a [`MetricSpace`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Symbol(usize),
    Real(f64),
    Pair([f64; 2]),
}

impl MetricSpace {
    pub fn finite(size: usize) -> Self {
        MetricSpace::Finite { size }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match (self, p) {
            (MetricSpace::Finite { size }, Point::Symbol(s)) => s < size,
            (MetricSpace::RealLine, Point::Real(x)) => x.is_finite(),
            (MetricSpace::RealPair, Point::Pair([a, b])) => a.is_finite() && b.is_finite(),
            _ => false,
        }
    }

    /// Distance between two points of this space.
    ///
    /// Panics if a point does not belong to the space; measures validate
    /// membership at construction.
    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        match (a, b) {
            (Point::Symbol(x), Point::Symbol(y)) => {
                if x == y {
                    0.0
                } else {
                    1.0
                }
            }
            (Point::Real(x), Point::Real(y)) => (x - y).abs(),
            (Point::Pair([x0, x1]), Point::Pair([y0, y1])) => {
                (x0 - y0).abs().max((x1 - y1).abs())
            }
            _ => panic!("points {a:?} and {b:?} do not share a metric space"),
        }
    }

    /// Product space under the coordinate-max metric.
    ///
    /// For two finite spaces the product is again finite with pair `(i, j)`
    /// encoded as `i * size_b + j`; the max of two 0/1 metrics is the 0/1
    /// metric on pairs.
    pub fn product(&self, other: &MetricSpace) -> Result<MetricSpace> {
        match (self, other) {
            (MetricSpace::Finite { size: a }, MetricSpace::Finite { size: b }) => {
                Ok(MetricSpace::Finite { size: a * b })
            }
            (MetricSpace::RealLine, MetricSpace::RealLine) => Ok(MetricSpace::RealPair),
            _ => Err(Error::SpaceMismatch),
        }
    }
}

/// Finite-support probability measure on a metric space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMassMeasure {
    space: MetricSpace,
    support: Vec<Point>,
    masses: Vec<f64>,
}

impl PointMassMeasure {
    pub fn new(space: MetricSpace, support: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        if support.len() != masses.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} support points but {} masses",
                support.len(),
                masses.len()
            )));
        }
        check_pmf("measure", &masses)?;
        if let Some(p) = support.iter().find(|p| !space.contains(p)) {
            return Err(Error::InvalidDistribution(format!(
                "point {p:?} is not in {space:?}"
            )));
        }
        if !points_distinct(&support) {
            return Err(Error::InvalidDistribution(
                "support points are not pairwise distinct".into(),
            ));
        }
        Ok(Self {
            space,
            support,
            masses,
        })
    }

    /// Measure on `Finite { size: pmf.len() }` with mass `pmf[i]` at symbol `i`.
    pub fn from_pmf(pmf: &[f64]) -> Result<Self> {
        Self::new(
            MetricSpace::finite(pmf.len()),
            (0..pmf.len()).map(Point::Symbol).collect(),
            pmf.to_vec(),
        )
    }

    /// Normalizes nonnegative weights into a measure.
    pub fn from_weights(space: MetricSpace, support: Vec<Point>, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "weights must have a positive finite total, got {total}"
            )));
        }
        Self::new(space, support, weights.iter().map(|w| w / total).collect())
    }

    pub fn dirac(space: MetricSpace, point: Point) -> Result<Self> {
        Self::new(space, vec![point], vec![1.0])
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Mass at `point` (zero when the point is not in the support).
    pub fn mass_of(&self, point: &Point) -> f64 {
        self.support
            .iter()
            .zip(&self.masses)
            .filter(|(p, _)| *p == point)
            .map(|(_, m)| *m)
            .sum()
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.support
            .iter()
            .zip(&self.masses)
            .map(|(p, m)| m * f(p))
            .sum()
    }

    /// Dense pmf over a finite space (zero for symbols outside the support).
    pub fn to_pmf(&self) -> Option<Vec<f64>> {
        let MetricSpace::Finite { size } = self.space else {
            return None;
        };
        let mut pmf = vec![0.0; size];
        for (p, m) in self.support.iter().zip(&self.masses) {
            if let Point::Symbol(s) = p {
                pmf[*s] += m;
            }
        }
        Some(pmf)
    }
}

fn points_distinct(points: &[Point]) -> bool {
    let key = |p: &Point| match *p {
        Point::Symbol(s) => [s as f64, 0.0],
        Point::Real(x) => [x, 0.0],
        Point::Pair(v) => v,
    };
    let mut keys: Vec<[f64; 2]> = points.iter().map(key).collect();
    keys.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    keys.windows(2).all(|w| w[0] != w[1])
}

/// Discrete joint pmf `P_XY` over `x_size` x `y_size` symbols, row-major in `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    x_size: usize,
    y_size: usize,
    pmf: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(x_size: usize, y_size: usize, pmf: Vec<f64>) -> Result<Self> {
        if x_size == 0 || y_size == 0 || pmf.len() != x_size * y_size {
            return Err(Error::DimensionMismatch(format!(
                "joint pmf declared {x_size}x{y_size} but has {} entries",
                pmf.len()
            )));
        }
        check_pmf("joint pmf", &pmf)?;
        Ok(Self {
            x_size,
            y_size,
            pmf,
        })
    }

    /// Doubly symmetric binary source: `X` uniform, `Y = X xor Bernoulli(p0)`.
    pub fn dsbs(p0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(invalid("p0", format!("crossover {p0} outside [0, 1]")));
        }
        Self::new(
            2,
            2,
            vec![(1.0 - p0) / 2.0, p0 / 2.0, p0 / 2.0, (1.0 - p0) / 2.0],
        )
    }

    /// Product pmf `P_X x P_Y`.
    pub fn independent(px: &[f64], py: &[f64]) -> Result<Self> {
        check_pmf("P_X", px)?;
        check_pmf("P_Y", py)?;
        let pmf = px
            .iter()
            .flat_map(|a| py.iter().map(move |b| a * b))
            .collect();
        Self::new(px.len(), py.len(), pmf)
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.pmf[x * self.y_size + y]
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        (0..self.x_size)
            .map(|x| self.pmf[x * self.y_size..(x + 1) * self.y_size].iter().sum())
            .collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        (0..self.y_size)
            .map(|y| (0..self.x_size).map(|x| self.p(x, y)).sum())
            .collect()
    }

    /// `P(x | y)` as rows indexed by `y`. Rows of zero-probability `y` fall
    /// back to `P_X`.
    pub fn x_given_y(&self) -> Vec<Vec<f64>> {
        let py = self.marginal_y();
        let px = self.marginal_x();
        (0..self.y_size)
            .map(|y| {
                if py[y] > 0.0 {
                    (0..self.x_size).map(|x| self.p(x, y) / py[y]).collect()
                } else {
                    px.clone()
                }
            })
            .collect()
    }

    /// `P(y | x)` as rows indexed by `x`.
    pub fn y_given_x(&self) -> Vec<Vec<f64>> {
        let px = self.marginal_x();
        let py = self.marginal_y();
        (0..self.x_size)
            .map(|x| {
                if px[x] > 0.0 {
                    (0..self.y_size).map(|y| self.p(x, y) / px[x]).collect()
                } else {
                    py.clone()
                }
            })
            .collect()
    }

    pub fn mutual_information(&self) -> f64 {
        mutual_information_pmf(&self.pmf, self.x_size, self.y_size)
    }

    pub fn space_x(&self) -> MetricSpace {
        MetricSpace::finite(self.x_size)
    }

    pub fn space_y(&self) -> MetricSpace {
        MetricSpace::finite(self.y_size)
    }

    /// `P_XY` as a measure on the finite product space.
    pub fn joint_measure(&self) -> PointMassMeasure {
        PointMassMeasure::from_pmf(&self.pmf).expect("validated pmf")
    }

    fn sample_pairs(&self, n: usize, rng: &mut seed::Rng) -> (Vec<usize>, Vec<usize>) {
        let sampler = CategoricalSampler::new(&self.pmf);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let cell = sampler.sample(rng);
            xs.push(cell / self.y_size);
            ys.push(cell % self.y_size);
        }
        (xs, ys)
    }
}

/// Bivariate Gaussian source.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BivariateGaussian {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub rho: f64,
}

impl BivariateGaussian {
    pub fn new(mean_x: f64, mean_y: f64, var_x: f64, var_y: f64, rho: f64) -> Result<Self> {
        if !(var_x > 0.0 && var_x.is_finite()) || !(var_y > 0.0 && var_y.is_finite()) {
            return Err(invalid("variance", "variances must be positive and finite"));
        }
        if !(rho.abs() < 1.0) {
            return Err(invalid(
                "rho",
                format!("|rho| = {} must be < 1 for finite I(X;Y)", rho.abs()),
            ));
        }
        if !mean_x.is_finite() || !mean_y.is_finite() {
            return Err(invalid("mean", "means must be finite"));
        }
        Ok(Self {
            mean_x,
            mean_y,
            var_x,
            var_y,
            rho,
        })
    }

    pub fn standard(rho: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 1.0, 1.0, rho)
    }

    pub fn std_x(&self) -> f64 {
        self.var_x.sqrt()
    }

    pub fn std_y(&self) -> f64 {
        self.var_y.sqrt()
    }

    pub fn mutual_information(&self) -> f64 {
        -0.5 * (1.0 - self.rho * self.rho).log2()
    }
}

/// Joint source `P_XY`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JointSource {
    Discrete(DiscreteJoint),
    Gaussian(BivariateGaussian),
}

/// A pair of length-n sequences drawn from a [`JointSource`].
#[derive(Clone, Debug, PartialEq)]
pub enum SourceSamples {
    Discrete { x: Vec<usize>, y: Vec<usize> },
    Continuous { x: Vec<f64>, y: Vec<f64> },
}

impl SourceSamples {
    pub fn len(&self) -> usize {
        match self {
            SourceSamples::Discrete { x, .. } => x.len(),
            SourceSamples::Continuous { x, .. } => x.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl JointSource {
    pub fn dsbs(p0: f64) -> Result<Self> {
        DiscreteJoint::dsbs(p0).map(JointSource::Discrete)
    }

    /// Exact `I(X;Y)`: double sum for discrete sources,
    /// `-1/2 log2(1 - rho^2)` for Gaussians.
    pub fn mutual_information(&self) -> f64 {
        match self {
            JointSource::Discrete(d) => d.mutual_information(),
            JointSource::Gaussian(g) => g.mutual_information(),
        }
    }

    /// Draws `n` i.i.d. pairs. Deterministic in `(self, n, seed)`.
    pub fn sample_iid(&self, n: usize, seed: u64) -> Result<SourceSamples> {
        if n == 0 {
            return Err(invalid("n", "block length must be at least 1"));
        }
        let mut rng = seed::rng(seed);
        Ok(self.sample_with(n, &mut rng))
    }

    pub(crate) fn sample_with(&self, n: usize, rng: &mut seed::Rng) -> SourceSamples {
        match self {
            JointSource::Discrete(d) => {
                let (x, y) = d.sample_pairs(n, rng);
                SourceSamples::Discrete { x, y }
            }
            JointSource::Gaussian(g) => {
                let s = (1.0 - g.rho * g.rho).sqrt();
                let mut x = Vec::with_capacity(n);
                let mut y = Vec::with_capacity(n);
                for _ in 0..n {
                    let z1: f64 = rng.sample(StandardNormal);
                    let z2: f64 = rng.sample(StandardNormal);
                    x.push(g.mean_x + g.std_x() * z1);
                    y.push(g.mean_y + g.std_y() * (g.rho * z1 + s * z2));
                }
                SourceSamples::Continuous { x, y }
            }
        }
    }
}

/// Inverse-CDF sampler over a finite pmf.
#[derive(Clone, Debug)]
pub struct CategoricalSampler {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl CategoricalSampler {
    pub fn new(pmf: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last_positive = pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Self {
            cumulative,
            last_positive,
        }
    }

    pub fn sample(&self, rng: &mut seed::Rng) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.last_positive)
    }
}

/// Auxiliary channel `P_{U|X}`; `rows[x]` is the pmf of `U` given `X = x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryChannel {
    x_size: usize,
    u_size: usize,
    probs: Vec<f64>,
}

impl AuxiliaryChannel {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let x_size = rows.len();
        let u_size = rows.first().map_or(0, Vec::len);
        if x_size == 0 || u_size == 0 || rows.iter().any(|r| r.len() != u_size) {
            return Err(Error::DimensionMismatch(
                "auxiliary channel rows must be non-empty and equally long".into(),
            ));
        }
        for (x, r) in rows.iter().enumerate() {
            check_pmf(&format!("P(U | X = {x})"), r)?;
        }
        Ok(Self {
            x_size,
            u_size,
            probs: rows.concat(),
        })
    }

    /// `U = X`.
    pub fn identity(size: usize) -> Self {
        let rows: Vec<Vec<f64>> = (0..size)
            .map(|x| (0..size).map(|u| if u == x { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::from_rows(&rows).expect("identity rows are valid")
    }

    /// `U` independent of `X` with law `pmf`.
    pub fn constant(x_size: usize, pmf: &[f64]) -> Result<Self> {
        Self::from_rows(&vec![pmf.to_vec(); x_size])
    }

    /// `U = X xor Bernoulli(q)` on a binary alphabet.
    pub fn bsc(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(invalid("q", format!("crossover {q} outside [0, 1]")));
        }
        Self::from_rows(&[vec![1.0 - q, q], vec![q, 1.0 - q]])
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn u_size(&self) -> usize {
        self.u_size
    }

    pub fn p(&self, u: usize, x: usize) -> f64 {
        self.probs[x * self.u_size + u]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x * self.u_size..(x + 1) * self.u_size]
    }

    pub fn u_space(&self) -> MetricSpace {
        MetricSpace::finite(self.u_size)
    }

    /// Law of `U` when `X ~ px`.
    pub fn output_pmf(&self, px: &[f64]) -> Vec<f64> {
        (0..self.u_size)
            .map(|u| (0..self.x_size).map(|x| px[x] * self.p(u, x)).sum())
            .collect()
    }
}

/// Joint law `P_UXY = P_{U|X} P_XY` with its two mutual informations.
#[derive(Clone, Debug)]
pub struct MarkovExtension {
    pub u_size: usize,
    pub x_size: usize,
    pub y_size: usize,
    /// Row-major in `(u, x, y)`.
    pub pmf_uxy: Vec<f64>,
    pub i_ux: f64,
    pub i_uy: f64,
}

impl MarkovExtension {
    pub fn p(&self, u: usize, x: usize, y: usize) -> f64 {
        self.pmf_uxy[(u * self.x_size + x) * self.y_size + y]
    }

    /// `P_UX`, row-major in `(u, x)`.
    pub fn pmf_ux(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.u_size * self.x_size];
        for u in 0..self.u_size {
            for x in 0..self.x_size {
                out[u * self.x_size + x] = (0..self.y_size).map(|y| self.p(u, x, y)).sum();
            }
        }
        out
    }

    /// `P_UY`, row-major in `(u, y)`.
    pub fn pmf_uy(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.u_size * self.y_size];
        for u in 0..self.u_size {
            for y in 0..self.y_size {
                out[u * self.y_size + y] = (0..self.x_size).map(|x| self.p(u, x, y)).sum();
            }
        }
        out
    }

    /// `P_XY` recovered by summing out `U`.
    pub fn pmf_xy(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.x_size * self.y_size];
        for x in 0..self.x_size {
            for y in 0..self.y_size {
                out[x * self.y_size + y] = (0..self.u_size).map(|u| self.p(u, x, y)).sum();
            }
        }
        out
    }

    pub fn p_u(&self) -> Vec<f64> {
        (0..self.u_size)
            .map(|u| self.pmf_uxy[u * self.x_size * self.y_size..(u + 1) * self.x_size * self.y_size].iter().sum())
            .collect()
    }
}

/// Forms `P_UXY(u,x,y) = P_{U|X}(u|x) P_XY(x,y)` and the exact pair
/// `(I(U;X), I(U;Y))`.
pub fn markov_extend(source: &DiscreteJoint, aux: &AuxiliaryChannel) -> Result<MarkovExtension> {
    if aux.x_size() != source.x_size() {
        return Err(Error::DimensionMismatch(format!(
            "auxiliary channel expects |X| = {} but the source has |X| = {}",
            aux.x_size(),
            source.x_size()
        )));
    }
    let (nu, nx, ny) = (aux.u_size(), source.x_size(), source.y_size());
    let mut pmf_uxy = vec![0.0; nu * nx * ny];
    for u in 0..nu {
        for x in 0..nx {
            for y in 0..ny {
                pmf_uxy[(u * nx + x) * ny + y] = aux.p(u, x) * source.p(x, y);
            }
        }
    }
    let mut ext = MarkovExtension {
        u_size: nu,
        x_size: nx,
        y_size: ny,
        pmf_uxy,
        i_ux: 0.0,
        i_uy: 0.0,
    };
    ext.i_ux = mutual_information_pmf(&ext.pmf_ux(), nu, nx);
    ext.i_uy = mutual_information_pmf(&ext.pmf_uy(), nu, ny);
    Ok(ext)
}

/// Row-major probability matrix as stored on disk.
///
/// ```toml
/// rows = 2
/// cols = 2
/// values = [0.45, 0.05,
///           0.05, 0.45]
/// ```
///
/// For a joint pmf the whole matrix sums to one; for a channel every row
/// (one per input symbol) sums to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbabilityMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl ProbabilityMatrix {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let m: ProbabilityMatrix = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            reason: e.to_string(),
        })?;
        if m.values.len() != m.rows * m.cols {
            return Err(Error::DimensionMismatch(format!(
                "{origin}: declared {}x{} but found {} values",
                m.rows,
                m.cols,
                m.values.len()
            )));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("matrix serializes")
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn into_joint(self) -> Result<DiscreteJoint> {
        DiscreteJoint::new(self.rows, self.cols, self.values)
    }

    pub fn into_auxiliary(self) -> Result<AuxiliaryChannel> {
        let rows: Vec<Vec<f64>> = (0..self.rows).map(|r| self.row(r).to_vec()).collect();
        AuxiliaryChannel::from_rows(&rows)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Uniform-cell quantizer on a clipped interval.
///
/// Samples outside the interval are clipped into the edge cells, and the
/// edge cells of a quantized Gaussian carry the tail masses, so the two
/// stay consistent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub lo: f64,
    pub width: f64,
    pub cells: usize,
}

impl Quantizer {
    pub fn new(lo: f64, hi: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(invalid("width", format!("cell width {width} must be positive")));
        }
        if !(hi > lo) {
            return Err(invalid("clip", format!("empty clip range [{lo}, {hi}]")));
        }
        let cells = ((hi - lo) / width - 1e-9).ceil().max(1.0) as usize;
        Ok(Self { lo, width, cells })
    }

    /// Cells of width `width` over `[mean - clip_sigmas * std, mean + clip_sigmas * std]`.
    pub fn for_gaussian(mean: f64, std: f64, width: f64, clip_sigmas: f64) -> Result<Self> {
        if !(clip_sigmas > 0.0) {
            return Err(invalid("clip_sigmas", "clip range must be positive"));
        }
        Self::new(mean - clip_sigmas * std, mean + clip_sigmas * std, width)
    }

    pub fn cell(&self, x: f64) -> usize {
        let k = ((x - self.lo) / self.width).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.cells - 1)
        }
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.width
    }

    /// Maps samples to their cell centers.
    pub fn quantize(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.center(self.cell(x))).collect()
    }

    /// Additive slack carried by distances computed on quantized data.
    pub fn slack(&self) -> f64 {
        self.width / 2.0
    }

    fn edge(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.width
    }

    /// Cell masses of `N(mean, std^2)` by CDF differences, tails folded into
    /// the edge cells.
    pub fn gaussian_masses(&self, mean: f64, std: f64) -> Vec<f64> {
        let cdf = |k: usize| {
            if k == 0 {
                0.0
            } else if k == self.cells {
                1.0
            } else {
                normal_cdf((self.edge(k) - mean) / std)
            }
        };
        (0..self.cells).map(|k| cdf(k + 1) - cdf(k)).collect()
    }

    /// Quantized `N(mean, std^2)` on the real line, supported on cell centers.
    pub fn gaussian_measure(&self, mean: f64, std: f64) -> PointMassMeasure {
        let support = (0..self.cells).map(|k| Point::Real(self.center(k))).collect();
        let masses = self.gaussian_masses(mean, std);
        PointMassMeasure::from_weights(MetricSpace::RealLine, support, &masses)
            .expect("gaussian cell masses are valid")
    }

    /// Mass of `[a, b)` under the conditional-Gaussian integrand used for
    /// joint cells; `a`/`b` may be infinite.
    fn interval_probability(a: f64, b: f64, mean: f64, std: f64) -> f64 {
        let lo = if a.is_finite() { normal_cdf((a - mean) / std) } else { 0.0 };
        let hi = if b.is_finite() { normal_cdf((b - mean) / std) } else { 1.0 };
        (hi - lo).max(0.0)
    }

    fn cell_bounds(&self, k: usize) -> (f64, f64) {
        let a = if k == 0 { f64::NEG_INFINITY } else { self.edge(k) };
        let b = if k + 1 == self.cells { f64::INFINITY } else { self.edge(k + 1) };
        (a, b)
    }
}

/// Quantized bivariate Gaussian on the product grid of two quantizers
/// (coordinate-max metric on cell-center pairs).
///
/// Cell masses integrate the conditional law of `Y` given `X` over each
/// `X`-cell with composite Gauss–Legendre quadrature.
pub fn quantized_gaussian_joint(
    g: &BivariateGaussian,
    qx: &Quantizer,
    qy: &Quantizer,
) -> PointMassMeasure {
    const NODES: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const WEIGHTS: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    const PANELS: usize = 8;
    let (sx, sy) = (g.std_x(), g.std_y());
    let slope = g.rho * sy / sx;
    let cond_std = sy * (1.0 - g.rho * g.rho).sqrt();
    let mut support = Vec::with_capacity(qx.cells * qy.cells);
    let mut weights = Vec::with_capacity(qx.cells * qy.cells);
    for i in 0..qx.cells {
        let (a, b) = qx.cell_bounds(i);
        let a = if a.is_finite() { a } else { g.mean_x - 12.0 * sx };
        let b = if b.is_finite() { b } else { g.mean_x + 12.0 * sx };
        let h = (b - a) / PANELS as f64;
        let mut row = vec![0.0; qy.cells];
        for p in 0..PANELS {
            let mid = a + (p as f64 + 0.5) * h;
            for (node, w) in NODES.iter().zip(WEIGHTS) {
                let x = mid + 0.5 * h * node;
                let z = (x - g.mean_x) / sx;
                let density = (-0.5 * z * z).exp() / (sx * (2.0 * std::f64::consts::PI).sqrt());
                let m = g.mean_y + slope * (x - g.mean_x);
                for (j, cell) in row.iter_mut().enumerate() {
                    let (c, d) = qy.cell_bounds(j);
                    *cell += 0.5 * h * w * density * Quantizer::interval_probability(c, d, m, cond_std);
                }
            }
        }
        for (j, m) in row.into_iter().enumerate() {
            support.push(Point::Pair([qx.center(i), qy.center(j)]));
            weights.push(m);
        }
    }
    PointMassMeasure::from_weights(MetricSpace::RealPair, support, &weights)
        .expect("quadrature masses are valid")
}
