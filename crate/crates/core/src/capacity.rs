//! Channel capacity and the rate function `L(t)`.
//!
//! [`channel_capacity`] runs Blahut–Arimoto with the standard bracket
//! `log2 sum_x p(x) c(x) <= C <= log2 max_x c(x)`, where
//! `c(x) = 2^{D(W(.|x) || pW)}`.
//!
//! [`rate_function_l`] evaluates
//! `L(t) = sup { I(U;X) : U - X - Y, I(U;X) - I(U;Y) <= t }` over auxiliary
//! channels with `|U| = |X| + 1`. The landscape is not concave, so the search
//! is multi-start ascent on softmax logits with an increasing exterior
//! penalty, followed by a feasibility projection that mixes the channel with
//! the constant channel of the same output law (`I(U;X)` and `I(U;Y)` both
//! fall to zero along that segment, so a feasible point always exists).
//! Every returned value is attained by an explicit feasible channel and is
//! therefore a certified lower estimate of the supremum.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::{markov_extend, AuxiliaryChannel, DiscreteJoint, ProbabilityMatrix, NORMALIZATION_TOL};
use crate::seed;

/// Slack allowed when certifying `I(U;X) - I(U;Y) <= t`.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// Header of rate-function CSV output.
pub const CURVE_CSV_HEADER: &str = "t,value,feasible,restarts,best_slack";

/// Discrete memoryless channel; `rows[t]` is `W(. | t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dmc {
    rows: Vec<Vec<f64>>,
}

impl Dmc {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let outputs = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || outputs == 0 || rows.iter().any(|r| r.len() != outputs) {
            return Err(Error::DimensionMismatch(
                "channel rows must be non-empty and equally long".into(),
            ));
        }
        for (t, r) in rows.iter().enumerate() {
            let total: f64 = r.iter().sum();
            if r.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) || (total - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "channel row {t} is not a probability vector (sum {total})"
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p", format!("crossover {p} outside [0, 1]")));
        }
        Self::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Binary erasure channel; output 2 is the erasure.
    pub fn bec(e: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&e) {
            return Err(invalid("e", format!("erasure probability {e} outside [0, 1]")));
        }
        Self::new(vec![vec![1.0 - e, 0.0, e], vec![0.0, 1.0 - e, e]])
    }

    /// Noiseless channel on `q` symbols.
    pub fn identity(q: usize) -> Result<Self> {
        Self::new((0..q).map(|t| (0..q).map(|z| if z == t { 1.0 } else { 0.0 }).collect()).collect())
    }

    pub fn from_matrix(m: &ProbabilityMatrix) -> Result<Self> {
        Self::new((0..m.rows).map(|r| m.row(r).to_vec()).collect())
    }

    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Result of Blahut–Arimoto.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    /// Midpoint of the final bracket, in bits.
    pub capacity: f64,
    pub lower: f64,
    pub upper: f64,
    pub input_pmf: Vec<f64>,
    pub iterations: usize,
    /// Lower bound after each iteration.
    pub lower_trace: Vec<f64>,
}

/// `log2 c(x) = D(W(.|x) || q)` for every input.
fn divergences(w: &Dmc, q: &[f64]) -> Vec<f64> {
    w.rows()
        .iter()
        .map(|row| {
            row.iter()
                .zip(q)
                .filter(|(&wz, _)| wz > 0.0)
                .map(|(&wz, &qz)| wz * (wz / qz).log2())
                .sum()
        })
        .collect()
}

/// Capacity of `w` in bits, iterated until the bracket is narrower than `tol`.
pub fn channel_capacity(w: &Dmc, tol: f64) -> Result<CapacityEstimate> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(invalid("tol", format!("tolerance {tol} must be positive")));
    }
    const MAX_ITERATIONS: usize = 1_000_000;
    let k = w.inputs();
    let mut p = vec![1.0 / k as f64; k];
    let mut lower_trace = Vec::new();
    for it in 1..=MAX_ITERATIONS {
        let q: Vec<f64> = (0..w.outputs())
            .map(|z| p.iter().zip(w.rows()).map(|(px, row)| px * row[z]).sum())
            .collect();
        let d = divergences(w, &q);
        let dmax = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // shift by dmax before exponentiating
        let weights: Vec<f64> = p.iter().zip(&d).map(|(px, dx)| px * (dx - dmax).exp2()).collect();
        let total: f64 = weights.iter().sum();
        let lower = (dmax + total.log2()).max(0.0);
        let upper = dmax;
        lower_trace.push(lower);
        if upper - lower < tol || it == MAX_ITERATIONS {
            return Ok(CapacityEstimate {
                capacity: 0.5 * (lower + upper),
                lower,
                upper,
                input_pmf: p,
                iterations: it,
                lower_trace,
            });
        }
        p = weights.iter().map(|v| v / total).collect();
    }
    unreachable!("loop returns at the iteration cap")
}

/// Search settings for [`rate_function_l`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFunctionOptions {
    /// Random starts in addition to the deterministic ones.
    pub restarts: usize,
    /// Ascent iterations per penalty weight.
    pub iterations: usize,
    pub penalty_schedule: Vec<f64>,
    pub seed: u64,
}

impl Default for RateFunctionOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            iterations: 200,
            penalty_schedule: vec![1.0, 10.0, 100.0, 1e3, 1e4],
            seed: 0,
        }
    }
}

/// One evaluation of `L(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFunctionPoint {
    pub t: f64,
    /// Certified lower estimate of `L(t)` in bits.
    pub value: f64,
    pub argmax: AuxiliaryChannel,
    pub i_ux: f64,
    pub i_uy: f64,
    /// `t - (I(U;X) - I(U;Y))` at the argmax.
    pub slack: f64,
    pub feasible: bool,
    /// Number of starting points explored.
    pub restarts: usize,
    /// Best feasible objective reached from each start.
    pub trace: Vec<f64>,
}

/// `P_{U|X}` as dense rows plus the source it acts on; the hot loop of the
/// optimizer.
struct Objective<'a> {
    source: &'a DiscreteJoint,
    px: Vec<f64>,
    py: Vec<f64>,
    nu: usize,
}

struct Evaluation {
    i_ux: f64,
    i_uy: f64,
    /// `dI(U;X)/dP(u|x)` and `dI(U;Y)/dP(u|x)`, indexed `[x][u]`.
    grad_x: Vec<Vec<f64>>,
    grad_y: Vec<Vec<f64>>,
}

impl<'a> Objective<'a> {
    fn new(source: &'a DiscreteJoint) -> Self {
        Self {
            source,
            px: source.marginal_x(),
            py: source.marginal_y(),
            nu: source.x_size() + 1,
        }
    }

    fn evaluate(&self, rows: &[Vec<f64>], gradients: bool) -> Evaluation {
        let (nx, ny, nu) = (self.source.x_size(), self.source.y_size(), self.nu);
        let mut pu = vec![0.0; nu];
        let mut puy = vec![0.0; nu * ny];
        for x in 0..nx {
            for u in 0..nu {
                let w = rows[x][u];
                pu[u] += self.px[x] * w;
                for y in 0..ny {
                    puy[u * ny + y] += self.source.p(x, y) * w;
                }
            }
        }
        let mut i_ux = 0.0;
        for x in 0..nx {
            for u in 0..nu {
                let w = rows[x][u];
                if w > 0.0 && self.px[x] > 0.0 {
                    i_ux += self.px[x] * w * (w / pu[u]).log2();
                }
            }
        }
        let mut i_uy = 0.0;
        for u in 0..nu {
            for y in 0..ny {
                let m = puy[u * ny + y];
                if m > 0.0 {
                    i_uy += m * (m / (pu[u] * self.py[y])).log2();
                }
            }
        }
        let (mut grad_x, mut grad_y) = (Vec::new(), Vec::new());
        if gradients {
            grad_x = vec![vec![0.0; nu]; nx];
            grad_y = vec![vec![0.0; nu]; nx];
            for x in 0..nx {
                for u in 0..nu {
                    if rows[x][u] <= 0.0 || pu[u] <= 0.0 {
                        continue;
                    }
                    grad_x[x][u] = self.px[x] * (rows[x][u] / pu[u]).log2();
                    grad_y[x][u] = (0..ny)
                        .filter(|&y| self.source.p(x, y) > 0.0)
                        .map(|y| self.source.p(x, y) * (puy[u * ny + y] / (self.py[y] * pu[u])).log2())
                        .sum();
                }
            }
        }
        Evaluation {
            i_ux: i_ux.max(0.0),
            i_uy: i_uy.max(0.0),
            grad_x,
            grad_y,
        }
    }

    fn penalized(&self, e: &Evaluation, t: f64, lambda: f64) -> f64 {
        let v = (e.i_ux - e.i_uy - t).max(0.0);
        e.i_ux - lambda * v * v
    }

    /// Gradient of the penalized objective with respect to the logits.
    fn logit_gradient(&self, rows: &[Vec<f64>], e: &Evaluation, t: f64, lambda: f64) -> Vec<Vec<f64>> {
        let v = (e.i_ux - e.i_uy - t).max(0.0);
        rows.iter()
            .enumerate()
            .map(|(x, row)| {
                let g: Vec<f64> = (0..self.nu)
                    .map(|u| e.grad_x[x][u] - 2.0 * lambda * v * (e.grad_x[x][u] - e.grad_y[x][u]))
                    .collect();
                let mean: f64 = row.iter().zip(&g).map(|(p, gu)| p * gu).sum();
                row.iter().zip(&g).map(|(p, gu)| p * (gu - mean)).collect()
            })
            .collect()
    }

    fn violation(&self, rows: &[Vec<f64>], t: f64) -> f64 {
        let e = self.evaluate(rows, false);
        e.i_ux - e.i_uy - t
    }

    /// Mixes `rows` with the constant channel of the same output law until
    /// the constraint holds; returns the least mixing found by bisection.
    fn project(&self, rows: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
        if self.violation(rows, t) <= 0.0 {
            return rows.to_vec();
        }
        let pu: Vec<f64> = (0..self.nu)
            .map(|u| rows.iter().zip(&self.px).map(|(r, p)| p * r[u]).sum())
            .collect();
        let mix = |lam: f64| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| r.iter().zip(&pu).map(|(a, b)| (1.0 - lam) * a + lam * b).collect())
                .collect()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.violation(&mix(mid), t) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        mix(hi)
    }

    /// Penalty-schedule ascent from `rows`, in logit space with backtracking.
    fn ascend(&self, rows: &[Vec<f64>], t: f64, opts: &RateFunctionOptions) -> Vec<Vec<f64>> {
        const LOGIT_FLOOR: f64 = -40.0;
        let mut logits: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|&p| if p > 0.0 { p.ln().max(LOGIT_FLOOR) } else { LOGIT_FLOOR }).collect())
            .collect();
        let mut current = softmax_rows(&logits);
        for &lambda in &opts.penalty_schedule {
            let mut step = 1.0;
            let mut e = self.evaluate(&current, true);
            let mut f = self.penalized(&e, t, lambda);
            for _ in 0..opts.iterations {
                let g = self.logit_gradient(&current, &e, t, lambda);
                let norm2: f64 = g.iter().flatten().map(|v| v * v).sum();
                if norm2 < 1e-24 {
                    break;
                }
                let mut accepted = false;
                while step > 1e-12 {
                    let trial: Vec<Vec<f64>> = logits
                        .iter()
                        .zip(&g)
                        .map(|(l, gl)| l.iter().zip(gl).map(|(a, b)| (a + step * b).max(LOGIT_FLOOR)).collect())
                        .collect();
                    let rows_t = softmax_rows(&trial);
                    let e_t = self.evaluate(&rows_t, true);
                    let f_t = self.penalized(&e_t, t, lambda);
                    if f_t >= f + 1e-4 * step * norm2 {
                        logits = trial;
                        current = rows_t;
                        e = e_t;
                        f = f_t;
                        step *= 2.0;
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
        }
        current
    }
}

fn softmax_rows(logits: &[Vec<f64>]) -> Vec<Vec<f64>> {
    logits
        .iter()
        .map(|l| {
            let m = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = l.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Explores one start: the projected start itself, then two rounds of
/// ascent and projection. Returns the best feasible rows and their value.
fn explore(obj: &Objective, start: &[Vec<f64>], t: f64, opts: &RateFunctionOptions) -> (Vec<Vec<f64>>, f64) {
    let mut best = obj.project(start, t);
    let mut best_val = obj.evaluate(&best, false).i_ux;
    let mut from = best.clone();
    for _ in 0..2 {
        let candidate = obj.project(&obj.ascend(&from, t, opts), t);
        let val = obj.evaluate(&candidate, false).i_ux;
        if val > best_val {
            best = candidate.clone();
            best_val = val;
        }
        from = candidate;
    }
    (best, best_val)
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("t", format!("budget {t} must be a finite nonnegative number")));
    }
    Ok(())
}

fn rate_point(
    source: &DiscreteJoint,
    t: f64,
    opts: &RateFunctionOptions,
    warm: Option<&AuxiliaryChannel>,
) -> Result<RateFunctionPoint> {
    check_t(t)?;
    let obj = Objective::new(source);
    let (nx, nu) = (source.x_size(), obj.nu);
    let mut starts: Vec<Vec<Vec<f64>>> = Vec::new();
    // U = X, padded with an unused symbol
    starts.push((0..nx).map(|x| (0..nu).map(|u| if u == x { 1.0 } else { 0.0 }).collect()).collect());
    // U constant
    starts.push(vec![{
        let mut r = vec![0.0; nu];
        r[0] = 1.0;
        r
    }; nx]);
    if let Some(w) = warm {
        starts.push((0..nx).map(|x| w.row(x).to_vec()).collect());
    }
    let base = seed::derive(opts.seed, "rate_function", t.to_bits());
    for k in 0..opts.restarts {
        let mut rng = seed::rng(seed::derive(base, "restart", k as u64));
        let logits: Vec<Vec<f64>> = (0..nx)
            .map(|_| (0..nu).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        starts.push(softmax_rows(&logits));
    }
    let results: Vec<(Vec<Vec<f64>>, f64)> = starts.par_iter().map(|s| explore(&obj, s, t, opts)).collect();
    let trace: Vec<f64> = results.iter().map(|r| r.1).collect();
    // best value; among values equal to 1e-12, the smallest slack
    let slack_of = |rows: &[Vec<f64>]| -obj.violation(rows, t);
    let mut best = 0;
    for k in 1..results.len() {
        let (v, b) = (results[k].1, results[best].1);
        if v > b + 1e-12 || ((v - b).abs() <= 1e-12 && slack_of(&results[k].0) < slack_of(&results[best].0)) {
            best = k;
        }
    }
    let argmax = AuxiliaryChannel::from_rows(&results[best].0)?;
    // certify independently of the optimizer's own bookkeeping
    let ext = markov_extend(source, &argmax)?;
    let slack = t - (ext.i_ux - ext.i_uy);
    Ok(RateFunctionPoint {
        t,
        value: ext.i_ux,
        argmax,
        i_ux: ext.i_ux,
        i_uy: ext.i_uy,
        slack,
        feasible: slack >= -CONSTRAINT_TOL,
        restarts: starts.len(),
        trace,
    })
}

/// Certified lower estimate of `L(t)` for a discrete source.
pub fn rate_function_l(source: &DiscreteJoint, t: f64, opts: &RateFunctionOptions) -> Result<RateFunctionPoint> {
    rate_point(source, t, opts, None)
}

/// `L` on a grid, evaluated in ascending `t` with each point warm-started
/// from the previous argmax (feasible sets nest, so the curve is
/// non-decreasing). Points are returned in the order of `ts`.
pub fn rate_function_curve(source: &DiscreteJoint, ts: &[f64], opts: &RateFunctionOptions) -> Result<Vec<RateFunctionPoint>> {
    for &t in ts {
        check_t(t)?;
    }
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
    let mut out: Vec<Option<RateFunctionPoint>> = vec![None; ts.len()];
    let mut warm: Option<AuxiliaryChannel> = None;
    for &i in &order {
        let p = rate_point(source, ts[i], opts, warm.as_ref())?;
        warm = Some(p.argmax.clone());
        out[i] = Some(p);
    }
    Ok(out.into_iter().map(|p| p.expect("every index visited")).collect())
}

/// CSV rendering of rate-function points under [`CURVE_CSV_HEADER`].
pub fn curve_to_csv(points: &[RateFunctionPoint]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!("{},{},{},{},{}\n", p.t, p.value, p.feasible, p.restarts, p.slack));
    }
    out
}

/// `L(C - alpha)` and `L(C + alpha)` for one `alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityBoundPair {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    #[serde(rename = "C_W")]
    pub c_w: f64,
}

/// Bound pairs over an `alpha` grid plus their envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityBounds {
    pub capacity: f64,
    pub pairs: Vec<CapacityBoundPair>,
    pub sup_lower: f64,
    pub inf_upper: f64,
    /// Reminder that the bounds may differ where `L` is discontinuous; the
    /// evaluation does not locate such points.
    pub note: String,
}

/// Default grid `{0.2, 0.1, 0.05, 0.02, 0.01} * C`.
pub fn default_alpha_grid(capacity: f64) -> Vec<f64> {
    [0.2, 0.1, 0.05, 0.02, 0.01].iter().map(|f| f * capacity).collect()
}

/// Evaluates `L` at `max(C - alpha, 0)` and `C + alpha` for every `alpha`.
///
/// All budgets are evaluated as one warm-started ascending curve, so a
/// pair's lower value never exceeds its upper value.
pub fn cr_capacity_bounds(
    source: &DiscreteJoint,
    channel: &Dmc,
    alphas: Option<&[f64]>,
    opts: &RateFunctionOptions,
) -> Result<CapacityBounds> {
    let capacity = channel_capacity(channel, 1e-9)?.capacity;
    let alphas: Vec<f64> = match alphas {
        Some(a) => a.to_vec(),
        None => default_alpha_grid(capacity),
    };
    if alphas.is_empty() {
        return Err(invalid("alpha", "the alpha grid is empty"));
    }
    if let Some(a) = alphas.iter().find(|&&a| !(a > 0.0) || !a.is_finite()) {
        return Err(invalid("alpha", format!("grid value {a} must be positive")));
    }
    let budgets: Vec<f64> = alphas
        .iter()
        .flat_map(|a| [(capacity - a).max(0.0), capacity + a])
        .collect();
    let curve = rate_function_curve(source, &budgets, opts)?;
    let pairs: Vec<CapacityBoundPair> = alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| CapacityBoundPair {
            alpha,
            lower: curve[2 * k].value,
            upper: curve[2 * k + 1].value,
            c_w: capacity,
        })
        .collect();
    let sup_lower = pairs.iter().map(|p| p.lower).fold(f64::NEG_INFINITY, f64::max);
    let inf_upper = pairs.iter().map(|p| p.upper).fold(f64::INFINITY, f64::min);
    Ok(CapacityBounds {
        capacity,
        pairs,
        sup_lower,
        inf_upper,
        note: "lower and upper bounds may differ at discontinuities of L; values are certified lower estimates of L".into(),
    })
}

/// Best value over the binary symmetric auxiliaries `U = X xor Bernoulli(q)`
/// for a binary source, found on a uniform grid of `points` crossovers in
/// `[0, 1/2]`. An inner bound on `L(t)`.
pub fn bsc_auxiliary_value(source: &DiscreteJoint, t: f64, points: usize) -> Result<f64> {
    if source.x_size() != 2 {
        return Err(Error::DimensionMismatch("BSC auxiliaries need a binary X".into()));
    }
    let mut best: f64 = 0.0;
    for k in 0..points {
        let q = 0.5 * k as f64 / (points - 1).max(1) as f64;
        let ext = markov_extend(source, &AuxiliaryChannel::bsc(q)?)?;
        if ext.i_ux - ext.i_uy <= t + CONSTRAINT_TOL {
            best = best.max(ext.i_ux);
        }
    }
    Ok(best)
}
