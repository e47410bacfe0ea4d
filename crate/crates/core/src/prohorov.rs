//! Prohorov distance between finite-support measures.
//!
//! The directed discrepancy
//! `d'(mu, nu) = inf { eps > 0 : mu(A) <= nu(A^eps) + eps for all A }`
//! is evaluated through the coupling characterisation: `eps` is feasible iff
//! a coupling of `(mu, nu)` puts mass at least `1 - eps` on pairs at distance
//! at most `eps`, i.e. iff the max flow through the threshold graph
//! `{(i, j) : d(x_i, y_j) <= eps}` is at least `1 - eps`.
//!
//! The flow value `F(r)` only changes at pairwise distances, so on an
//! interval `[r_k, r_{k+1})` between consecutive distances feasibility reads
//! `eps >= 1 - F(r_k)`. The discrepancy is therefore
//! `min_k max(r_k, 1 - F(r_k))` (capped at 1), and since `r_k` increases
//! while `1 - F(r_k)` decreases, the minimiser is found by bisecting over the
//! sorted breakpoints. Very large supports fall back to bisection on `eps`
//! itself, stopped at width `tol`.
//!
//! [`prohorov_bruteforce`] evaluates the definition directly by enumerating
//! subsets, with open enlargements `A^eps = {y : d(y, A) < eps}`. It shares
//! no code with the flow route and is used as its oracle.

use crate::error::{invalid, Error, Result};
use crate::flow::{bipartite_max_flow, interval_max_flow};
use crate::measure::{MetricSpace, Point, PointMassMeasure};

pub const DEFAULT_TOL: f64 = 1e-6;

/// Distances within this of a threshold count as inside the enlargement.
pub const ENLARGEMENT_SLACK: f64 = 1e-12;

/// Combined support size accepted by [`prohorov_bruteforce`].
pub const BRUTEFORCE_LIMIT: usize = 20;

/// Above this many support pairs the breakpoint search is replaced by
/// bisection on `eps`.
const BREAKPOINT_PAIR_LIMIT: usize = 1 << 22;

fn check_inputs(mu: &PointMassMeasure, nu: &PointMassMeasure, tol: f64) -> Result<()> {
    if mu.space() != nu.space() {
        return Err(Error::SpaceMismatch);
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(invalid("tol", format!("tolerance {tol} must be positive")));
    }
    Ok(())
}

/// Threshold-graph flow evaluator for a fixed pair of measures.
struct CouplingGraph<'a> {
    mu: &'a PointMassMeasure,
    nu: &'a PointMassMeasure,
    line: Option<LineSupports>,
}

/// Real-line supports sorted by coordinate.
struct LineSupports {
    xs: Vec<f64>,
    a: Vec<f64>,
    ys: Vec<f64>,
    b: Vec<f64>,
}

fn sorted_line(m: &PointMassMeasure) -> (Vec<f64>, Vec<f64>) {
    let mut pts: Vec<(f64, f64)> = m
        .support()
        .iter()
        .zip(m.masses())
        .map(|(p, &w)| match p {
            Point::Real(x) => (*x, w),
            _ => unreachable!("real-line measure"),
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.into_iter().unzip()
}

impl<'a> CouplingGraph<'a> {
    fn new(mu: &'a PointMassMeasure, nu: &'a PointMassMeasure) -> Self {
        let line = matches!(mu.space(), MetricSpace::RealLine).then(|| {
            let (xs, a) = sorted_line(mu);
            let (ys, b) = sorted_line(nu);
            LineSupports { xs, a, ys, b }
        });
        Self { mu, nu, line }
    }

    /// Max mass a coupling can place on pairs at distance `<= r`.
    fn coupled_mass(&self, r: f64) -> f64 {
        let r = r + ENLARGEMENT_SLACK;
        match &self.line {
            Some(l) => {
                let ranges: Vec<(usize, usize)> = l
                    .xs
                    .iter()
                    .map(|&x| {
                        let lo = l.ys.partition_point(|&y| x - y > r);
                        let hi = l.ys.partition_point(|&y| y - x <= r);
                        (lo, hi.max(lo))
                    })
                    .collect();
                interval_max_flow(&l.a, &l.b, &ranges)
            }
            None => {
                let space = self.mu.space();
                let (xs, ys) = (self.mu.support(), self.nu.support());
                bipartite_max_flow(self.mu.masses(), self.nu.masses(), |i, j| {
                    space.distance(&xs[i], &ys[j]) <= r
                })
            }
        }
    }

    fn feasible(&self, eps: f64) -> bool {
        self.coupled_mass(eps) >= 1.0 - eps - ENLARGEMENT_SLACK
    }

    /// Sorted distinct pairwise distances below 1, always starting at 0.
    fn breakpoints(&self) -> Vec<f64> {
        let space = self.mu.space();
        let mut r: Vec<f64> = self
            .mu
            .support()
            .iter()
            .flat_map(|x| self.nu.support().iter().map(move |y| space.distance(x, y)))
            .filter(|&d| d < 1.0)
            .collect();
        r.push(0.0);
        r.sort_by(f64::total_cmp);
        r.dedup();
        r
    }
}

/// Whether a coupling of `(mu, nu)` puts mass at least `1 - eps` on pairs at
/// distance at most `eps`.
pub fn coupling_feasible(mu: &PointMassMeasure, nu: &PointMassMeasure, eps: f64) -> Result<bool> {
    check_inputs(mu, nu, 1.0)?;
    Ok(CouplingGraph::new(mu, nu).feasible(eps))
}

fn bisect_on_eps(graph: &CouplingGraph, tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if graph.feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn search_breakpoints(graph: &CouplingGraph) -> f64 {
    let r = graph.breakpoints();
    let gap = |k: usize| 1.0 - graph.coupled_mass(r[k]);
    // first breakpoint at which eps = r_k is already feasible
    let (mut lo, mut hi) = (0usize, r.len());
    let mut gap_at = vec![f64::NAN; r.len()];
    while lo < hi {
        let mid = (lo + hi) / 2;
        gap_at[mid] = gap(mid);
        if r[mid] >= gap_at[mid] {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut best: f64 = 1.0;
    if lo < r.len() {
        best = best.min(r[lo]);
    }
    if lo > 0 {
        let g = if gap_at[lo - 1].is_nan() { gap(lo - 1) } else { gap_at[lo - 1] };
        best = best.min(g);
    }
    best.clamp(0.0, 1.0)
}

/// Directed discrepancy `d'(mu, nu)`, accurate to `tol` (exact up to rounding
/// whenever the breakpoint search applies).
pub fn directed_discrepancy(mu: &PointMassMeasure, nu: &PointMassMeasure, tol: f64) -> Result<f64> {
    check_inputs(mu, nu, tol)?;
    let graph = CouplingGraph::new(mu, nu);
    if mu.len().saturating_mul(nu.len()) > BREAKPOINT_PAIR_LIMIT {
        Ok(bisect_on_eps(&graph, tol))
    } else {
        Ok(search_breakpoints(&graph))
    }
}

/// Prohorov distance `max(d'(mu, nu), d'(nu, mu))`.
pub fn prohorov_distance(mu: &PointMassMeasure, nu: &PointMassMeasure, tol: f64) -> Result<f64> {
    Ok(directed_discrepancy(mu, nu, tol)?.max(directed_discrepancy(nu, mu, tol)?))
}

/// Total variation `sup_A |p(A) - q(A)|` of two pmfs on a common finite
/// alphabet. Under the 0/1 metric every enlargement with `eps <= 1` is the
/// set itself, so this is the Prohorov distance there.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    (0.5 * s).min(1.0)
}

/// Subset-enumeration evaluation of `d'(mu, nu)` on a bisection grid.
fn directed_bruteforce(mu: &PointMassMeasure, nu: &PointMassMeasure, tol: f64) -> f64 {
    let space = mu.space();
    let (xs, ys) = (mu.support(), nu.support());
    let (m, k) = (xs.len(), ys.len());
    let subsets = 1usize << m;
    // mass[A] and min distance from each y to A, built over subsets by lowest bit
    let mut mass = vec![0.0; subsets];
    let mut reach = vec![f64::INFINITY; subsets * k];
    for set in 1..subsets {
        let low = set.trailing_zeros() as usize;
        let rest = set & (set - 1);
        mass[set] = mass[rest] + mu.masses()[low];
        for j in 0..k {
            let d = space.distance(&xs[low], &ys[j]);
            reach[set * k + j] = reach[rest * k + j].min(d);
        }
    }
    let satisfied = |eps: f64| {
        (1..subsets).all(|set| {
            let enlarged: f64 = (0..k)
                .filter(|&j| reach[set * k + j] < eps)
                .map(|j| nu.masses()[j])
                .sum();
            mass[set] <= enlarged + eps
        })
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if satisfied(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Prohorov distance by direct evaluation of the definition over all subsets
/// of each support. Exponential; limited to [`BRUTEFORCE_LIMIT`] points in
/// total.
pub fn prohorov_bruteforce(mu: &PointMassMeasure, nu: &PointMassMeasure, tol: f64) -> Result<f64> {
    check_inputs(mu, nu, tol)?;
    let size = mu.len() + nu.len();
    if size > BRUTEFORCE_LIMIT {
        return Err(Error::SupportTooLarge {
            size,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    Ok(directed_bruteforce(mu, nu, tol).max(directed_bruteforce(nu, mu, tol)))
}
