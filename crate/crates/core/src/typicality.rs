//! Prohorov typicality: empirical distributions, typical-set membership and
//! seeded Monte-Carlo harnesses for the asymptotic typicality statements.
//!
//! A sequence `x^n` is `(P, eps)`-typical when the Prohorov distance between
//! its empirical distribution and `P` is below `eps`. On finite alphabets with
//! the 0/1 metric that distance is the total variation of the type, which the
//! harnesses evaluate directly from symbol counts. Continuous targets are
//! quantized first (see [`Quantizer`]); distances computed on quantized data
//! carry an additive slack of half a cell width.
//!
//! Every harness draws trial `t` at block length `n` from the seed
//! `derive(derive(seed, label, n), "trial", t)`, evaluates trials in parallel
//! and aggregates in trial order, so tables are reproducible bit for bit.

use std::cmp::Ordering;

use rand::Rng as _;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::{
    CategoricalSampler, DiscreteJoint, MetricSpace, Point, PointMassMeasure, Quantizer,
};
use crate::prohorov::{prohorov_distance, total_variation};
use crate::seed;

/// Distances within this of the radius count as lying on the boundary of the
/// typical set, which the strict inequality excludes. Types have rational
/// coordinates, so exact ties with a decimal radius are common.
pub const BOUNDARY_GUARD: f64 = 1e-12;

/// `distance < radius` with ties (up to rounding) resolved as "outside".
pub fn within_radius(distance: f64, radius: f64) -> bool {
    distance < radius - BOUNDARY_GUARD
}

/// Header shared by every harness CSV.
pub const CSV_HEADER: &str = "n,trials,hits,estimate,stderr";

/// Empirical distribution (type) of a sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    pub measure: PointMassMeasure,
    pub n: usize,
    /// Occurrence count of each support point, aligned with `measure.support()`.
    pub counts: Vec<u64>,
}

fn point_cmp(a: &Point, b: &Point) -> Ordering {
    match (a, b) {
        (Point::Symbol(x), Point::Symbol(y)) => x.cmp(y),
        (Point::Real(x), Point::Real(y)) => x.total_cmp(y),
        (Point::Pair([x0, x1]), Point::Pair([y0, y1])) => {
            x0.total_cmp(y0).then(x1.total_cmp(y1))
        }
        _ => panic!("points {a:?} and {b:?} do not share a metric space"),
    }
}

/// Empirical distribution of `xs` on `space`: mass `count(a) / n` at every
/// distinct value `a`, support sorted.
pub fn empirical_distribution(space: MetricSpace, xs: &[Point]) -> Result<EmpiricalDistribution> {
    if xs.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(point_cmp);
    let mut support: Vec<Point> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for p in sorted {
        match support.last() {
            Some(last) if point_cmp(last, &p) == Ordering::Equal => {
                *counts.last_mut().expect("parallel to support") += 1
            }
            _ => {
                support.push(p);
                counts.push(1);
            }
        }
    }
    let n = xs.len();
    let masses = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(EmpiricalDistribution {
        measure: PointMassMeasure::new(space, support, masses)?,
        n,
        counts,
    })
}

/// Empirical distribution of a symbol sequence over `0..size`.
pub fn empirical_from_symbols(xs: &[usize], size: usize) -> Result<EmpiricalDistribution> {
    let pts: Vec<Point> = xs.iter().map(|&s| Point::Symbol(s)).collect();
    empirical_distribution(MetricSpace::finite(size), &pts)
}

/// Empirical distribution of a real sequence, optionally mapped to cell
/// centers first.
pub fn empirical_from_reals(xs: &[f64], quantizer: Option<&Quantizer>) -> Result<EmpiricalDistribution> {
    let pts: Vec<Point> = match quantizer {
        Some(q) => q.quantize(xs).into_iter().map(Point::Real).collect(),
        None => xs.iter().map(|&x| Point::Real(x)).collect(),
    };
    empirical_distribution(MetricSpace::RealLine, &pts)
}

/// Joint empirical distribution of `(x_l, y_l)` pairs on the product space.
///
/// Finite pairs `(a, b)` are encoded as symbol `a * |Y| + b`; real pairs live
/// on the plane with the coordinate-max metric.
pub fn joint_empirical_distribution(
    space_x: MetricSpace,
    xs: &[Point],
    space_y: MetricSpace,
    ys: &[Point],
) -> Result<EmpiricalDistribution> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    let space = space_x.product(&space_y)?;
    let pairs = xs
        .iter()
        .zip(ys)
        .map(|(a, b)| match (space_y, a, b) {
            (MetricSpace::Finite { size }, Point::Symbol(i), Point::Symbol(j)) => {
                Ok(Point::Symbol(i * size + j))
            }
            (_, Point::Real(x), Point::Real(y)) => Ok(Point::Pair([*x, *y])),
            _ => Err(Error::SpaceMismatch),
        })
        .collect::<Result<Vec<_>>>()?;
    empirical_distribution(space, &pairs)
}

/// Marginal of a measure on a product space (`axis` 0 or 1). `y_size` is the
/// second factor's alphabet size and only matters for finite products.
pub fn product_marginal(joint: &PointMassMeasure, axis: usize, y_size: usize) -> Result<PointMassMeasure> {
    if axis > 1 {
        return Err(invalid("axis", "product spaces have two coordinates"));
    }
    let (space, points): (MetricSpace, Vec<Point>) = match joint.space() {
        MetricSpace::Finite { size } => {
            if y_size == 0 || size % y_size != 0 {
                return Err(Error::DimensionMismatch(format!(
                    "product alphabet of size {size} does not factor with |Y| = {y_size}"
                )));
            }
            let factor = if axis == 0 { size / y_size } else { y_size };
            let pts = joint
                .support()
                .iter()
                .map(|p| match p {
                    Point::Symbol(s) if axis == 0 => Point::Symbol(s / y_size),
                    Point::Symbol(s) => Point::Symbol(s % y_size),
                    _ => unreachable!("finite measure"),
                })
                .collect();
            (MetricSpace::finite(factor), pts)
        }
        MetricSpace::RealPair => (
            MetricSpace::RealLine,
            joint
                .support()
                .iter()
                .map(|p| match p {
                    Point::Pair(v) => Point::Real(v[axis]),
                    _ => unreachable!("planar measure"),
                })
                .collect(),
        ),
        MetricSpace::RealLine => return Err(Error::SpaceMismatch),
    };
    let mut merged: Vec<(Point, f64)> = points.into_iter().zip(joint.masses().iter().copied()).collect();
    merged.sort_by(|a, b| point_cmp(&a.0, &b.0));
    let mut support: Vec<Point> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    for (p, m) in merged {
        match support.last() {
            Some(last) if point_cmp(last, &p) == Ordering::Equal => {
                *masses.last_mut().expect("parallel to support") += m
            }
            _ => {
                support.push(p);
                masses.push(m);
            }
        }
    }
    PointMassMeasure::from_weights(space, support, &masses)
}

/// Radius of a typicality test plus the grid used for continuous targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypicalityParams {
    pub epsilon: f64,
    pub quantization: Option<Quantizer>,
}

impl TypicalityParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(invalid("epsilon", format!("radius {epsilon} must be positive")));
        }
        Ok(Self {
            epsilon,
            quantization: None,
        })
    }

    pub fn with_quantizer(mut self, q: Quantizer) -> Self {
        self.quantization = Some(q);
        self
    }

    /// Accuracy requested from the metric computation.
    pub fn tol(&self) -> f64 {
        self.epsilon / 100.0
    }
}

/// Prohorov distance of an empirical measure to a target. Finite 0/1-metric
/// spaces use the total variation of the pmfs, which is the same number.
pub fn typicality_distance(empirical: &PointMassMeasure, target: &PointMassMeasure, tol: f64) -> Result<f64> {
    match (empirical.to_pmf(), target.to_pmf()) {
        (Some(p), Some(q)) if p.len() == q.len() => Ok(total_variation(&p, &q)),
        (Some(_), Some(_)) => Err(Error::SpaceMismatch),
        _ => prohorov_distance(empirical, target, tol),
    }
}

/// Whether `xs` is `(target, eps)`-typical. Real points are quantized first
/// when `params` carries a grid.
pub fn is_typical(xs: &[Point], target: &PointMassMeasure, params: &TypicalityParams) -> Result<bool> {
    let emp = match (params.quantization, target.space()) {
        (Some(q), MetricSpace::RealLine) => {
            let reals = xs
                .iter()
                .map(|p| match p {
                    Point::Real(x) => Ok(*x),
                    _ => Err(Error::SpaceMismatch),
                })
                .collect::<Result<Vec<_>>>()?;
            empirical_from_reals(&reals, Some(&q))?
        }
        _ => empirical_distribution(*target.space(), xs)?,
    };
    Ok(within_radius(typicality_distance(&emp.measure, target, params.tol())?, params.epsilon))
}

/// `max_a |P_{x^n}(a) - P(a)|`, the classical strong-typicality statistic.
pub fn strong_typicality_deviation(counts: &[u64], pmf: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(pmf)
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .fold(0.0, f64::max)
}

/// One row of a harness table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypicalityRow {
    pub n: usize,
    pub trials: usize,
    pub hits: usize,
    pub estimate: f64,
    pub stderr: f64,
}

impl TypicalityRow {
    fn binomial(n: usize, trials: usize, hits: usize) -> Self {
        let p = hits as f64 / trials as f64;
        Self {
            n,
            trials,
            hits,
            estimate: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }
}

/// Renders rows under [`CSV_HEADER`].
pub fn rows_to_csv(rows: &[TypicalityRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.n, r.trials, r.hits, r.estimate, r.stderr));
    }
    out
}

/// Whether successive estimates never drop by more than two combined
/// standard errors.
pub fn nondecreasing_within_2se(rows: &[TypicalityRow]) -> bool {
    rows.windows(2).all(|w| {
        let se = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].estimate >= w[0].estimate - 2.0 * se
    })
}

/// Source of i.i.d. samples for the marginal typicality harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalModel {
    Discrete { pmf: Vec<f64> },
    Gaussian { mean: f64, std: f64, quantizer: Quantizer },
}

impl MarginalModel {
    pub fn gaussian(mean: f64, std: f64, width: f64, clip_sigmas: f64) -> Result<Self> {
        if !(std > 0.0) {
            return Err(invalid("std", "standard deviation must be positive"));
        }
        Ok(MarginalModel::Gaussian {
            mean,
            std,
            quantizer: Quantizer::for_gaussian(mean, std, width, clip_sigmas)?,
        })
    }

    /// Target measure (quantized for Gaussians).
    pub fn target(&self) -> Result<PointMassMeasure> {
        match self {
            MarginalModel::Discrete { pmf } => PointMassMeasure::from_pmf(pmf),
            MarginalModel::Gaussian { mean, std, quantizer } => Ok(quantizer.gaussian_measure(*mean, *std)),
        }
    }

    /// Quantization slack of reported distances.
    pub fn slack(&self) -> f64 {
        match self {
            MarginalModel::Discrete { .. } => 0.0,
            MarginalModel::Gaussian { quantizer, .. } => quantizer.slack(),
        }
    }

    fn sample(&self, n: usize, rng: &mut seed::Rng) -> Result<EmpiricalDistribution> {
        match self {
            MarginalModel::Discrete { pmf } => {
                let sampler = CategoricalSampler::new(pmf);
                let xs: Vec<usize> = (0..n).map(|_| sampler.sample(rng)).collect();
                empirical_from_symbols(&xs, pmf.len())
            }
            MarginalModel::Gaussian { mean, std, quantizer } => {
                let xs: Vec<f64> = (0..n)
                    .map(|_| mean + std * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                empirical_from_reals(&xs, Some(quantizer))
            }
        }
    }
}

fn check_grid(n_grid: &[usize], trials: usize, min_trials: usize) -> Result<()> {
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(invalid("n_grid", "block lengths must be a nonempty list of positive integers"));
    }
    if trials < min_trials {
        return Err(invalid("trials", format!("{trials} trials; at least {min_trials} are required")));
    }
    Ok(())
}

/// Estimated `Pr{X^n in T_eps^n(P_X)}` per block length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypicalityTable {
    pub epsilon: f64,
    pub quantization_slack: f64,
    pub rows: Vec<TypicalityRow>,
    pub monotone_within_2se: bool,
}

/// Monte-Carlo estimate of the probability that an i.i.d. block is typical.
pub fn typicality_probability(
    model: &MarginalModel,
    n_grid: &[usize],
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<TypicalityTable> {
    check_grid(n_grid, trials, 100)?;
    let params = TypicalityParams::new(epsilon)?;
    let target = model.target()?;
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let base = seed::derive(seed, "typicality", n as u64);
        let outcomes = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive(base, "trial", t as u64));
                let emp = model.sample(n, &mut rng)?;
                Ok(within_radius(typicality_distance(&emp.measure, &target, params.tol())?, epsilon))
            })
            .collect::<Result<Vec<bool>>>()?;
        let hits = outcomes.iter().filter(|&&h| h).count();
        rows.push(TypicalityRow::binomial(n, trials, hits));
    }
    Ok(TypicalityTable {
        epsilon,
        quantization_slack: model.slack(),
        monotone_within_2se: nondecreasing_within_2se(&rows),
        rows,
    })
}

/// Deterministic sequence of length `n` whose counts are `n * pmf` rounded
/// by largest remainders, symbols laid out in blocks.
pub fn type_representative(pmf: &[f64], n: usize) -> Vec<usize> {
    let counts = rounded_counts(pmf, n);
    counts
        .iter()
        .enumerate()
        .flat_map(|(a, &c)| std::iter::repeat_n(a, c as usize))
        .collect()
}

fn rounded_counts(pmf: &[f64], n: usize) -> Vec<u64> {
    let scaled: Vec<f64> = pmf.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..pmf.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &a in order.iter().take((n as u64).saturating_sub(assigned) as usize) {
        counts[a] += 1;
    }
    counts
}

/// How the conditioning sequence `x^n` is chosen at each block length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceSelector {
    /// [`type_representative`] of `P_X`.
    TypeRepresentative,
    /// A fixed sequence, used at its own length only.
    Explicit { symbols: Vec<usize> },
}

/// Radii of the conditional typicality harness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalParams {
    pub epsilon: f64,
    /// Radius at which `x^n` must itself be `P_X`-typical.
    pub inner_radius: f64,
    pub delta: f64,
}

impl ConditionalParams {
    /// Inner radius defaults to `eps / 2`.
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        TypicalityParams::new(epsilon)?;
        if !(0.0..1.0).contains(&delta) {
            return Err(invalid("delta", format!("{delta} must lie in [0, 1)")));
        }
        Ok(Self {
            epsilon,
            inner_radius: epsilon / 2.0,
            delta,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRow {
    #[serde(flatten)]
    pub row: TypicalityRow,
    /// Distance of the conditioning type to `P_X`.
    pub input_distance: f64,
    pub precondition_met: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalReport {
    pub params: ConditionalParams,
    pub rows: Vec<ConditionalRow>,
    /// Whether the estimate at the largest block length exceeds `1 - delta`.
    pub exceeds_threshold: bool,
}

/// Estimated `Pr{(x^n, Y^n) in T_eps^n(P_XY)}` with `Y^n` the output of the
/// memoryless channel `P_{Y|X}` of `joint` driven by a fixed `x^n`.
pub fn conditional_typicality_probability(
    joint: &DiscreteJoint,
    selector: &SequenceSelector,
    params: &ConditionalParams,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ConditionalReport> {
    let n_grid: Vec<usize> = match selector {
        SequenceSelector::TypeRepresentative => n_grid.to_vec(),
        SequenceSelector::Explicit { symbols } => vec![symbols.len()],
    };
    check_grid(&n_grid, trials, 1)?;
    let px = joint.marginal_x();
    let channel: Vec<CategoricalSampler> = joint.y_given_x().iter().map(|r| CategoricalSampler::new(r)).collect();
    let (xs_size, ys_size) = (joint.x_size(), joint.y_size());
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in &n_grid {
        let x = match selector {
            SequenceSelector::TypeRepresentative => type_representative(&px, n),
            SequenceSelector::Explicit { symbols } => symbols.clone(),
        };
        if let Some(&bad) = x.iter().find(|&&a| a >= xs_size) {
            return Err(invalid("x", format!("symbol {bad} outside the input alphabet")));
        }
        let x_emp = empirical_from_symbols(&x, xs_size)?;
        let input_distance = total_variation(&x_emp.measure.to_pmf().expect("finite"), &px);
        let base = seed::derive(seed, "conditional", n as u64);
        let hits = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive(base, "trial", t as u64));
                let mut counts = vec![0u64; xs_size * ys_size];
                for &a in &x {
                    counts[a * ys_size + channel[a].sample(&mut rng)] += 1;
                }
                counts_typical(&counts, joint.pmf(), params.epsilon)
            })
            .collect::<Vec<bool>>()
            .into_iter()
            .filter(|&h| h)
            .count();
        rows.push(ConditionalRow {
            row: TypicalityRow::binomial(n, trials, hits),
            input_distance,
            precondition_met: input_distance < params.inner_radius,
        });
    }
    let exceeds_threshold = rows
        .last()
        .is_some_and(|r| r.row.estimate > 1.0 - params.delta);
    Ok(ConditionalReport {
        params: *params,
        rows,
        exceeds_threshold,
    })
}

/// Typicality of a type given by counts against a pmf on a finite alphabet.
pub(crate) fn counts_typical(counts: &[u64], pmf: &[f64], epsilon: f64) -> bool {
    let n: u64 = counts.iter().sum();
    let s: f64 = counts
        .iter()
        .zip(pmf)
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .sum();
    within_radius(0.5 * s, epsilon)
}

/// Sampling scheme of the large-deviation harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdSampler {
    /// Plain Monte Carlo: `X^n ~ P_X^n`, frequency of joint typicality.
    Direct,
    /// Importance sampling from a mixture of channels
    /// `(1 - s) P_{X|Y} + s P_X`, reweighted to `P_X^n`.
    Tilted,
}

/// Observability guard of the large-deviation harness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdGuard {
    pub max_mutual_information: f64,
    pub max_n: usize,
    pub min_trials_at_largest_n: usize,
}

impl Default for LdGuard {
    fn default() -> Self {
        Self {
            max_mutual_information: 1.5,
            max_n: 2000,
            min_trials_at_largest_n: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdRow {
    #[serde(flatten)]
    pub row: TypicalityRow,
    /// `-(1/n) log2 estimate`; `None` when no hit was observed.
    pub exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdReport {
    pub epsilon: f64,
    pub sampler: LdSampler,
    pub rows: Vec<LdRow>,
    /// Block lengths dropped from the fit for lack of hits.
    pub excluded: Vec<usize>,
    /// Least-squares slope of `-log2 estimate` against `n`.
    pub slope: Option<f64>,
    pub mutual_information: f64,
}

/// Multinomial draw of `total` items over `probs`, by sequential binomials.
fn multinomial(total: u64, probs: &[f64], rng: &mut seed::Rng, out: &mut [u64]) {
    let mut left = total;
    let mut rest: f64 = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        if k + 1 == probs.len() {
            out[k] = left;
            break;
        }
        let q = if rest > 0.0 { (p / rest).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if left == 0 || q == 0.0 {
            0
        } else {
            Binomial::new(left, q).expect("probability in [0, 1]").sample(rng)
        };
        out[k] = draw;
        left -= draw;
        rest -= p;
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Proposal mixture for the tilted sampler: conditional rows `Q_k(x | y)`
/// and mixture weights.
struct Proposal {
    rows: Vec<Vec<Vec<f64>>>,
    weights: Vec<f64>,
}

impl Proposal {
    fn new(joint: &DiscreteJoint, epsilon: f64) -> Self {
        let px = joint.marginal_x();
        let cond = joint.x_given_y();
        let py = joint.marginal_y();
        let product: Vec<f64> = px.iter().flat_map(|a| py.iter().map(move |b| a * b)).collect();
        let spread = total_variation(joint.pmf(), &product);
        // the type under mixing weight s sits at total variation s * spread
        // from P_XY; s_star puts it on the typicality boundary
        let s_star = if spread > 0.0 { (epsilon / spread).min(1.0) } else { 1.0 };
        let mix = |s: f64| -> Vec<Vec<f64>> {
            cond.iter()
                .map(|row| row.iter().zip(&px).map(|(c, p)| (1.0 - s) * c + s * p).collect())
                .collect()
        };
        Self {
            rows: vec![mix(s_star), mix(0.9 * s_star), mix(0.0), mix(1.0)],
            weights: vec![0.5, 0.3, 0.1, 0.1],
        }
    }
}

/// Large-deviation exponent of `Pr{(X^n, y^n) in T_eps^n(P_XY)}` for `X^n`
/// drawn from `P_X^n` independently of a fixed typical `y^n`.
///
/// `y^n` is the [`type_representative`] of `P_Y`. Because the event and the
/// likelihoods depend on `x^n` only through the joint type, each trial draws
/// the joint type directly (a multinomial per `y`-symbol), which has the same
/// law as drawing `x^n` symbol by symbol.
pub fn ld_exponent_estimate(
    joint: &DiscreteJoint,
    epsilon: f64,
    n_grid: &[usize],
    trials: usize,
    sampler: LdSampler,
    guard: &LdGuard,
    seed: u64,
) -> Result<LdReport> {
    check_grid(n_grid, trials, 1)?;
    TypicalityParams::new(epsilon)?;
    let mi = joint.mutual_information();
    if mi > guard.max_mutual_information {
        return Err(Error::Guard {
            guard: "max_mutual_information",
            detail: format!("I(X;Y) = {mi:.4} bits exceeds {} bits", guard.max_mutual_information),
        });
    }
    let largest = *n_grid.iter().max().expect("nonempty grid");
    if largest > guard.max_n {
        return Err(Error::Guard {
            guard: "max_n",
            detail: format!("block length {largest} exceeds {}", guard.max_n),
        });
    }
    if trials < guard.min_trials_at_largest_n {
        return Err(Error::Guard {
            guard: "min_trials_at_largest_n",
            detail: format!("{trials} trials at n = {largest}; at least {} required", guard.min_trials_at_largest_n),
        });
    }
    let (xs, ys) = (joint.x_size(), joint.y_size());
    let px = joint.marginal_x();
    let ln_px: Vec<f64> = px.iter().map(|p| p.ln()).collect();
    let proposal = Proposal::new(joint, epsilon);
    let ln_q: Vec<Vec<Vec<f64>>> = proposal
        .rows
        .iter()
        .map(|rows| rows.iter().map(|r| r.iter().map(|q| q.ln()).collect()).collect())
        .collect();
    let ln_pi: Vec<f64> = proposal.weights.iter().map(|w| w.ln()).collect();
    let component = CategoricalSampler::new(&proposal.weights);

    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let y_counts = rounded_counts(&joint.marginal_y(), n);
        let base = seed::derive(seed, "ld", n as u64);
        // per trial: (hit, importance weight of the hit or 0)
        let draws: Vec<(bool, f64)> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive(base, "trial", t as u64));
                let mut counts = vec![0u64; xs * ys];
                let mut column = vec![0u64; xs];
                let k = match sampler {
                    LdSampler::Direct => None,
                    LdSampler::Tilted => Some(component.sample(&mut rng)),
                };
                for (b, &cb) in y_counts.iter().enumerate() {
                    let probs: Vec<f64> = match k {
                        None => px.clone(),
                        Some(k) => proposal.rows[k][b].clone(),
                    };
                    multinomial(cb, &probs, &mut rng, &mut column);
                    for a in 0..xs {
                        counts[a * ys + b] = column[a];
                    }
                }
                let hit = counts_typical(&counts, joint.pmf(), epsilon);
                let weight = match (hit, k) {
                    (false, _) => 0.0,
                    (true, None) => 1.0,
                    (true, Some(_)) => {
                        let ln_target: f64 = (0..xs * ys)
                            .filter(|&c| counts[c] > 0)
                            .map(|c| counts[c] as f64 * ln_px[c / ys])
                            .sum();
                        let ln_mix: Vec<f64> = (0..ln_q.len())
                            .map(|j| {
                                ln_pi[j]
                                    + (0..xs * ys)
                                        .filter(|&c| counts[c] > 0)
                                        .map(|c| counts[c] as f64 * ln_q[j][c % ys][c / ys])
                                        .sum::<f64>()
                            })
                            .collect();
                        (ln_target - log_sum_exp(&ln_mix)).exp()
                    }
                };
                (hit, weight)
            })
            .collect();
        let hits = draws.iter().filter(|d| d.0).count();
        let row = match sampler {
            LdSampler::Direct => TypicalityRow::binomial(n, trials, hits),
            LdSampler::Tilted => {
                let mean = draws.iter().map(|d| d.1).sum::<f64>() / trials as f64;
                let var = draws.iter().map(|d| (d.1 - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0).max(1.0);
                TypicalityRow {
                    n,
                    trials,
                    hits,
                    estimate: mean,
                    stderr: (var / trials as f64).sqrt(),
                }
            }
        };
        let exponent = (row.estimate > 0.0).then(|| -row.estimate.log2() / n as f64);
        rows.push(LdRow { row, exponent });
    }
    let excluded: Vec<usize> = rows.iter().filter(|r| r.exponent.is_none()).map(|r| r.row.n).collect();
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.exponent.is_some())
        .map(|r| (r.row.n as f64, -r.row.estimate.log2()))
        .collect();
    Ok(LdReport {
        epsilon,
        sampler,
        slope: least_squares_slope(&points),
        excluded,
        rows,
        mutual_information: mi,
    })
}

/// Clipped ramp `clamp((x - shift) / scale + 1/2, 0, 1)`: bounded and
/// `1/scale`-Lipschitz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub shift: f64,
    pub scale: f64,
}

impl Ramp {
    pub fn eval(&self, x: f64) -> f64 {
        ((x - self.shift) / self.scale + 0.5).clamp(0.0, 1.0)
    }
}

/// `m` ramps over `[lo, hi]`: three scales (a half, an eighth and a
/// thirty-second of the range) cycled over equi-spaced shifts.
pub fn ramp_family(lo: f64, hi: f64, m: usize) -> Vec<Ramp> {
    let range = (hi - lo).max(f64::MIN_POSITIVE);
    let scales = [range / 2.0, range / 8.0, range / 32.0];
    let shifts = m.div_ceil(scales.len()).max(1);
    (0..m)
        .map(|k| Ramp {
            shift: lo + ((k / scales.len()) as f64 + 0.5) * range / shifts as f64,
            scale: scales[k % scales.len()],
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakConvergenceReport {
    /// `max_f |∫ f dP_k - ∫ f dP|` per measure.
    pub discrepancies: Vec<f64>,
    pub prohorov: Vec<f64>,
    pub decreasing: bool,
    pub agrees_with_prohorov: bool,
    pub passes: bool,
}

/// Integrals of a ramp family against each `P_k`, compared with the target.
///
/// `decreasing` compares the last discrepancy with the first;
/// `agrees_with_prohorov` asks that the Prohorov distance move the same way.
pub fn weak_convergence_diagnostic(
    measures: &[PointMassMeasure],
    target: &PointMassMeasure,
    family_size: usize,
) -> Result<WeakConvergenceReport> {
    let reals = |m: &PointMassMeasure| -> Result<Vec<f64>> {
        m.support()
            .iter()
            .map(|p| match p {
                Point::Real(x) => Ok(*x),
                _ => Err(Error::SpaceMismatch),
            })
            .collect()
    };
    if family_size == 0 {
        return Err(invalid("family_size", "at least one test function is required"));
    }
    let pts = reals(target)?;
    let lo = pts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let family = ramp_family(lo, hi, family_size);
    let integral = |m: &PointMassMeasure, f: &Ramp| {
        m.integrate(|p| match p {
            Point::Real(x) => f.eval(*x),
            _ => 0.0,
        })
    };
    let target_integrals: Vec<f64> = family.iter().map(|f| integral(target, f)).collect();
    let mut discrepancies = Vec::with_capacity(measures.len());
    let mut prohorov = Vec::with_capacity(measures.len());
    for m in measures {
        reals(m)?;
        let d = family
            .iter()
            .zip(&target_integrals)
            .map(|(f, t)| (integral(m, f) - t).abs())
            .fold(0.0, f64::max);
        discrepancies.push(d);
        prohorov.push(prohorov_distance(m, target, 1e-9)?);
    }
    let (decreasing, agrees) = match (discrepancies.first(), discrepancies.last()) {
        (Some(a), Some(b)) if discrepancies.len() > 1 => {
            let pa = prohorov[0];
            let pb = prohorov[prohorov.len() - 1];
            (b < a, (b < a) == (pb < pa))
        }
        _ => (false, false),
    };
    Ok(WeakConvergenceReport {
        discrepancies,
        prohorov,
        decreasing,
        agrees_with_prohorov: agrees,
        passes: decreasing && agrees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{quantized_gaussian_joint, BivariateGaussian, JointSource, SourceSamples};
    use proptest::prelude::*;

    fn sym(v: &[usize]) -> Vec<Point> {
        v.iter().map(|&s| Point::Symbol(s)).collect()
    }

    #[test]
    fn empirical_of_short_sequence() {
        let e = empirical_from_symbols(&[0, 0, 1], 2).unwrap();
        assert_eq!(e.counts, vec![2, 1]);
        assert_eq!(e.measure.masses(), &[2.0 / 3.0, 1.0 / 3.0]);
        let c = empirical_from_symbols(&[4; 7], 5).unwrap();
        assert_eq!(c.measure.len(), 1);
        assert_eq!(c.measure.masses(), &[1.0]);
        assert!(matches!(empirical_from_symbols(&[], 2), Err(Error::EmptySequence)));
    }

    #[test]
    fn joint_empirical_on_the_diagonal() {
        let x = sym(&[0, 1]);
        let e = joint_empirical_distribution(MetricSpace::finite(2), &x, MetricSpace::finite(2), &x).unwrap();
        assert_eq!(e.measure.support(), &[Point::Symbol(0), Point::Symbol(3)]);
        assert_eq!(e.measure.masses(), &[0.5, 0.5]);
        let err = joint_empirical_distribution(MetricSpace::finite(2), &x, MetricSpace::finite(2), &sym(&[0])).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch(2, 1)));
    }

    #[test]
    fn joint_marginals_recover_sequence_types() {
        let s = JointSource::dsbs(0.3).unwrap();
        let SourceSamples::Discrete { x, y } = s.sample_iid(500, 17).unwrap() else { unreachable!() };
        let j = joint_empirical_distribution(MetricSpace::finite(2), &sym(&x), MetricSpace::finite(2), &sym(&y)).unwrap();
        let mx = product_marginal(&j.measure, 0, 2).unwrap();
        let my = product_marginal(&j.measure, 1, 2).unwrap();
        let ex = empirical_from_symbols(&x, 2).unwrap();
        let ey = empirical_from_symbols(&y, 2).unwrap();
        for (m, e) in [(mx, ex), (my, ey)] {
            assert_eq!(m.support(), e.measure.support());
            for (a, b) in m.masses().iter().zip(e.measure.masses()) {
                assert!((a * 500.0 - b * 500.0).abs() < 1e-9);
            }
        }
        let total: u64 = j.counts.iter().sum();
        assert_eq!(total, 500);
    }

    #[test]
    fn exact_type_is_typical_at_every_radius() {
        let x = type_representative(&[0.25, 0.5, 0.25], 8);
        let target = PointMassMeasure::from_pmf(&[0.25, 0.5, 0.25]).unwrap();
        for eps in [1e-9, 1e-3, 0.5] {
            assert!(is_typical(&sym(&x), &target, &TypicalityParams::new(eps).unwrap()).unwrap());
        }
    }

    #[test]
    fn all_zeros_is_not_typical_for_a_fair_bit() {
        let target = PointMassMeasure::from_pmf(&[0.5, 0.5]).unwrap();
        let params = TypicalityParams::new(0.1).unwrap();
        assert!(!is_typical(&sym(&[0; 50]), &target, &params).unwrap());
        let emp = empirical_from_symbols(&[0; 50], 2).unwrap();
        let d = prohorov_distance(&emp.measure, &target, 1e-9).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn self_type_is_typical() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let emp = empirical_from_reals(&xs, None).unwrap();
        let pts: Vec<Point> = xs.iter().map(|&x| Point::Real(x)).collect();
        for eps in [1e-6, 0.01, 0.3] {
            assert!(is_typical(&pts, &emp.measure, &TypicalityParams::new(eps).unwrap()).unwrap());
        }
    }

    proptest! {
        #[test]
        fn binary_typicality_is_strong_typicality(
            bits in prop::collection::vec(0usize..2, 1..200),
            p in 0.01f64..0.99,
            eps in 0.001f64..0.6,
        ) {
            let pmf = [1.0 - p, p];
            let target = PointMassMeasure::from_pmf(&pmf).unwrap();
            let generalized = is_typical(&sym(&bits), &target, &TypicalityParams::new(eps).unwrap()).unwrap();
            let counts = [bits.iter().filter(|&&b| b == 0).count() as u64, bits.iter().filter(|&&b| b == 1).count() as u64];
            let strong = strong_typicality_deviation(&counts, &pmf) < eps;
            prop_assert_eq!(generalized, strong);
        }

        #[test]
        fn larger_alphabets_sandwich_strong_typicality(
            xs in prop::collection::vec(0usize..5, 1..100),
            w in prop::collection::vec(0.05f64..1.0, 5),
        ) {
            let total: f64 = w.iter().sum();
            let pmf: Vec<f64> = w.iter().map(|v| v / total).collect();
            let emp = empirical_from_symbols(&xs, 5).unwrap();
            let target = PointMassMeasure::from_pmf(&pmf).unwrap();
            let d = prohorov_distance(&emp.measure, &target, 1e-9).unwrap();
            let mut counts = vec![0u64; 5];
            for &a in &xs { counts[a] += 1; }
            let s = strong_typicality_deviation(&counts, &pmf);
            prop_assert!(s <= d + 1e-9 && d <= 2.5 * s + 1e-9, "strong {} prohorov {}", s, d);
        }

        #[test]
        fn marginal_distance_contracts(seed in any::<u64>(), n in 5usize..300) {
            let s = JointSource::dsbs(0.2).unwrap();
            let JointSource::Discrete(joint) = &s else { unreachable!() };
            let SourceSamples::Discrete { x, y } = s.sample_iid(n, seed).unwrap() else { unreachable!() };
            let j = joint_empirical_distribution(MetricSpace::finite(2), &sym(&x), MetricSpace::finite(2), &sym(&y)).unwrap();
            let dj = prohorov_distance(&j.measure, &joint.joint_measure(), 1e-9).unwrap();
            let mx = product_marginal(&j.measure, 0, 2).unwrap();
            let dx = prohorov_distance(&mx, &PointMassMeasure::from_pmf(&joint.marginal_x()).unwrap(), 1e-9).unwrap();
            prop_assert!(dx <= dj + 1e-9);
        }
    }

    #[test]
    fn quantized_gaussian_marginal_distance_contracts() {
        let g = BivariateGaussian::standard(0.6).unwrap();
        let q = Quantizer::for_gaussian(0.0, 1.0, 0.5, 4.0).unwrap();
        let target_joint = quantized_gaussian_joint(&g, &q, &q);
        let target_x = q.gaussian_measure(0.0, 1.0);
        for seed in 0..5 {
            let SourceSamples::Continuous { x, y } = JointSource::Gaussian(g).sample_iid(300, seed).unwrap() else {
                unreachable!()
            };
            let px: Vec<Point> = q.quantize(&x).into_iter().map(Point::Real).collect();
            let py: Vec<Point> = q.quantize(&y).into_iter().map(Point::Real).collect();
            let j = joint_empirical_distribution(MetricSpace::RealLine, &px, MetricSpace::RealLine, &py).unwrap();
            let dj = prohorov_distance(&j.measure, &target_joint, 1e-9).unwrap();
            let mx = product_marginal(&j.measure, 0, 0).unwrap();
            let dx = prohorov_distance(&mx, &target_x, 1e-9).unwrap();
            assert!(dx <= dj + q.slack(), "{dx} vs {dj}");
        }
    }

    #[test]
    fn dsbs_joint_type_concentrates() {
        let s = JointSource::dsbs(0.1).unwrap();
        let JointSource::Discrete(joint) = &s else { unreachable!() };
        let target = joint.joint_measure();
        let close = (0..200u64)
            .into_par_iter()
            .filter(|&t| {
                let SourceSamples::Discrete { x, y } = s.sample_iid(10_000, seed::derive(5, "t", t)).unwrap() else {
                    unreachable!()
                };
                let j = joint_empirical_distribution(MetricSpace::finite(2), &sym(&x), MetricSpace::finite(2), &sym(&y)).unwrap();
                prohorov_distance(&j.measure, &target, 1e-6).unwrap() < 0.05
            })
            .count();
        assert!(close >= 198, "{close}/200");
    }

    #[test]
    fn quantized_gaussian_samples_are_typical() {
        let model = MarginalModel::gaussian(0.0, 1.0, 0.1, 5.0).unwrap();
        let table = typicality_probability(&model, &[5000], 0.1, 100, 3).unwrap();
        assert!(table.rows[0].estimate >= 0.95, "{:?}", table.rows);
        assert_eq!(table.quantization_slack, 0.05);
    }

    #[test]
    fn point_mass_source_is_always_typical() {
        let model = MarginalModel::Discrete { pmf: vec![0.0, 1.0, 0.0] };
        let t = typicality_probability(&model, &[1, 10, 100], 0.01, 100, 0).unwrap();
        assert!(t.rows.iter().all(|r| r.estimate == 1.0 && r.stderr == 0.0));
        assert!(t.monotone_within_2se);
    }

    #[test]
    fn dsbs_marginal_typicality_converges() {
        let model = MarginalModel::Discrete { pmf: vec![0.5, 0.5] };
        let t = typicality_probability(&model, &[100, 500, 2000], 0.05, 1000, 11).unwrap();
        assert!(t.monotone_within_2se);
        assert!(t.rows.iter().all(|r| (0.0..=1.0).contains(&r.estimate)));
        assert!(t.rows[2].estimate >= 0.99, "{:?}", t.rows);
        let again = typicality_probability(&model, &[100, 500, 2000], 0.05, 1000, 11).unwrap();
        assert_eq!(t, again);
        assert!(typicality_probability(&model, &[100], 0.05, 99, 0).is_err());
    }

    #[test]
    fn csv_has_fixed_header() {
        let csv = rows_to_csv(&[TypicalityRow::binomial(10, 100, 50)]);
        assert_eq!(csv, "n,trials,hits,estimate,stderr\n10,100,50,0.5,0.05\n");
    }

    #[test]
    fn type_representative_rounds_to_n() {
        let x = type_representative(&[0.5, 0.5], 7);
        assert_eq!(x, vec![0, 0, 0, 0, 1, 1, 1]);
        let y = type_representative(&[0.2, 0.3, 0.5], 10);
        assert_eq!(y.len(), 10);
        assert_eq!(y.iter().filter(|&&a| a == 2).count(), 5);
    }

    #[test]
    fn conditional_typicality_through_bsc() {
        let joint = DiscreteJoint::dsbs(0.1).unwrap();
        let params = ConditionalParams::new(0.05, 0.05).unwrap();
        let r = conditional_typicality_probability(&joint, &SequenceSelector::TypeRepresentative, &params, &[2000], 500, 1).unwrap();
        assert!(r.rows[0].precondition_met);
        assert!(r.exceeds_threshold, "{:?}", r.rows);
    }

    #[test]
    fn identity_channel_matches_marginal_rate() {
        let joint = DiscreteJoint::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let params = ConditionalParams::new(0.05, 0.05).unwrap();
        let r = conditional_typicality_probability(&joint, &SequenceSelector::TypeRepresentative, &params, &[100, 400], 200, 1).unwrap();
        assert!(r.rows.iter().all(|row| row.row.estimate == 1.0));
        let skewed = SequenceSelector::Explicit { symbols: vec![0; 40] };
        let r = conditional_typicality_probability(&joint, &skewed, &params, &[], 100, 1).unwrap();
        assert!(!r.rows[0].precondition_met);
        assert_eq!(r.rows[0].row.estimate, 0.0);
    }

    /// Exact `Pr{TV(joint type, P_XY) < eps}` for the DSBS with a balanced
    /// `y^n` and uniform independent `X^n`: mismatch counts in the two halves
    /// are independent Binomial(n/2, 1/2).
    fn dsbs_exact(p0: f64, eps: f64, n: usize) -> f64 {
        let h = n / 2;
        let ln_choose = |k: usize| -> f64 {
            (1..=k).map(|i| ((h - k + i) as f64 / i as f64).ln()).sum()
        };
        let lp: Vec<f64> = (0..=h).map(|k| ln_choose(k) - h as f64 * std::f64::consts::LN_2).collect();
        let half_p = (p0 * n as f64).round() as i64;
        let two_eps = (2.0 * eps * n as f64).round() as i64;
        assert!((half_p as f64 - p0 * n as f64).abs() < 1e-9 && (two_eps as f64 - 2.0 * eps * n as f64).abs() < 1e-9);
        let mut total = 0.0;
        for k0 in 0..=h {
            for k1 in 0..=h {
                // n * tv = |k0 - n p0 / 2| + |k1 - n p0 / 2|, compared in integers
                if (2 * k0 as i64 - half_p).abs() + (2 * k1 as i64 - half_p).abs() < two_eps {
                    total += (lp[k0] + lp[k1]).exp();
                }
            }
        }
        total
    }

    #[test]
    fn tilted_sampler_matches_exact_probability() {
        let joint = DiscreteJoint::dsbs(0.1).unwrap();
        let guard = LdGuard { min_trials_at_largest_n: 1, ..LdGuard::default() };
        let r = ld_exponent_estimate(&joint, 0.1, &[200, 600], 20_000, LdSampler::Tilted, &guard, 9).unwrap();
        for row in &r.rows {
            let exact = dsbs_exact(0.1, 0.1, row.row.n);
            let rel = (row.row.estimate - exact).abs() / exact;
            assert!(rel < 0.05, "n={} est {} exact {exact}", row.row.n, row.row.estimate);
        }
    }

    #[test]
    fn direct_sampler_matches_exact_where_observable() {
        let joint = DiscreteJoint::dsbs(0.3).unwrap();
        let guard = LdGuard { min_trials_at_largest_n: 1, ..LdGuard::default() };
        let r = ld_exponent_estimate(&joint, 0.15, &[20, 40], 20_000, LdSampler::Direct, &guard, 2).unwrap();
        for row in &r.rows {
            let exact = dsbs_exact(0.3, 0.15, row.row.n);
            assert!((row.row.estimate - exact).abs() < 4.0 * row.row.stderr + 1e-3, "{row:?} exact {exact}");
        }
    }

    #[test]
    fn independent_source_has_zero_exponent() {
        let joint = DiscreteJoint::independent(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        let guard = LdGuard { min_trials_at_largest_n: 1, ..LdGuard::default() };
        let r = ld_exponent_estimate(&joint, 0.05, &[500, 1000, 2000], 2000, LdSampler::Direct, &guard, 4).unwrap();
        assert!(r.slope.unwrap().abs() < 0.005, "{:?}", r.slope);
        assert!(r.rows[2].row.estimate > 0.9);
    }

    #[test]
    fn exponent_grows_as_the_radius_shrinks() {
        let joint = DiscreteJoint::dsbs(0.1).unwrap();
        let guard = LdGuard { min_trials_at_largest_n: 1, ..LdGuard::default() };
        let slopes: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&eps| {
                ld_exponent_estimate(&joint, eps, &[200, 500, 1000], 10_000, LdSampler::Tilted, &guard, 1)
                    .unwrap()
                    .slope
                    .unwrap()
            })
            .collect();
        assert!(slopes[0] <= slopes[1] && slopes[1] <= slopes[2], "{slopes:?}");
    }

    #[test]
    fn guard_and_zero_hit_exclusion() {
        let joint = DiscreteJoint::dsbs(0.1).unwrap();
        let err = ld_exponent_estimate(&joint, 0.1, &[200], 10, LdSampler::Direct, &LdGuard::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Guard { guard: "min_trials_at_largest_n", .. }));
        let err = ld_exponent_estimate(&joint, 0.1, &[4000], 100_000, LdSampler::Direct, &LdGuard::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Guard { guard: "max_n", .. }));
        let strong = DiscreteJoint::new(4, 4, (0..16).map(|i| if i % 5 == 0 { 0.25 } else { 0.0 }).collect()).unwrap();
        let err = ld_exponent_estimate(&strong, 0.1, &[200], 100_000, LdSampler::Direct, &LdGuard::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Guard { guard: "max_mutual_information", .. }));
        let guard = LdGuard { min_trials_at_largest_n: 1, ..LdGuard::default() };
        let r = ld_exponent_estimate(&joint, 0.2, &[20, 400], 1000, LdSampler::Direct, &guard, 0).unwrap();
        assert_eq!(r.excluded, vec![400]);
        assert!(r.slope.is_none());
    }

    #[test]
    fn weak_convergence_of_identical_measures() {
        let q = Quantizer::for_gaussian(0.0, 1.0, 0.1, 5.0).unwrap();
        let p = q.gaussian_measure(0.0, 1.0);
        let r = weak_convergence_diagnostic(&[p.clone(), p.clone()], &p, 30).unwrap();
        assert!(r.discrepancies.iter().all(|&d| d == 0.0));
        assert!(!r.decreasing);
    }

    #[test]
    fn weak_convergence_of_gaussian_empiricals() {
        let q = Quantizer::for_gaussian(0.0, 1.0, 0.1, 5.0).unwrap();
        let target = q.gaussian_measure(0.0, 1.0);
        let g = JointSource::Gaussian(BivariateGaussian::standard(0.0).unwrap());
        let passed = (0..100u64)
            .into_par_iter()
            .filter(|&run| {
                let measures: Vec<PointMassMeasure> = [100, 5000]
                    .iter()
                    .map(|&n| {
                        let SourceSamples::Continuous { x, .. } = g.sample_iid(n, seed::derive(run, "weak", n as u64)).unwrap() else {
                            unreachable!()
                        };
                        empirical_from_reals(&x, Some(&q)).unwrap().measure
                    })
                    .collect();
                let r = weak_convergence_diagnostic(&measures, &target, 30).unwrap();
                assert!(r.discrepancies.iter().all(|&d| d >= 0.0));
                r.decreasing
            })
            .count();
        assert!(passed >= 95, "{passed}/100");
    }
}
