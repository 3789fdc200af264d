//! Galton–Watson extinction, the branching-random-walk time constant, and an
//! empirical estimate of the continuous-SI front speed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::trial_rng;

const BRACKET_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;

/// Offspring law Binomial(d, p), optionally with Binomial(d + 1, p) at the root.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingSpec {
    pub p: f64,
    pub d: u32,
    #[serde(default)]
    pub root_override: bool,
}

impl BranchingSpec {
    pub fn new(p: f64, d: u32) -> Self {
        Self {
            p,
            d,
            root_override: false,
        }
    }

    pub fn with_root_override(mut self) -> Self {
        self.root_override = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::arg(format!("p = {} outside [0, 1]", self.p)));
        }
        if self.d < 1 {
            return Err(Error::arg("d must be at least 1"));
        }
        Ok(())
    }

    /// Offspring generating function below the root.
    pub fn pgf(&self, s: f64) -> f64 {
        (1.0 - self.p + self.p * s).powi(self.d as i32)
    }

    pub fn mean(&self) -> f64 {
        self.p * f64::from(self.d)
    }
}

/// Probability the process dies out. With the root override the first
/// generation is Binomial(d + 1, p) and the answer is `f_root(q)`.
pub fn gw_extinction_prob(spec: &BranchingSpec) -> Result<f64> {
    spec.validate()?;
    let q = extinction_below_root(spec)?;
    Ok(if spec.root_override {
        (1.0 - spec.p + spec.p * q).powi(spec.d as i32 + 1)
    } else {
        q
    })
}

fn extinction_below_root(spec: &BranchingSpec) -> Result<f64> {
    let (p, d) = (spec.p, f64::from(spec.d));
    if p == 1.0 {
        return Ok(0.0);
    }
    if spec.mean() <= 1.0 {
        return Ok(1.0);
    }
    // f(s) - s is convex, positive at 0 and minimal where f'(s) = 1
    let s_min = ((1.0 / (d * p)).powf(1.0 / (d - 1.0)) - 1.0 + p) / p;
    let g = |s: f64| spec.pgf(s) - s;
    let (mut lo, mut hi) = (0.0, s_min.clamp(0.0, 1.0));
    if g(lo) <= 0.0 {
        return Ok(0.0);
    }
    for _ in 0..MAX_ITERATIONS {
        if hi - lo <= BRACKET_TOL {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NumericFailure("extinction bisection did not converge".into()))
}

/// `E[sum_r exp(-theta z_r)]` over d Exp(1) edge delays.
pub fn phi(theta: f64, d: u32) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::arg(format!("theta = {theta} must be non-negative")));
    }
    Ok(f64::from(d) / (1.0 + theta))
}

pub fn mu(a: f64, d: u32) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::arg(format!("a = {a} must be positive")));
    }
    Ok(a * f64::from(d) * (1.0 - a).exp())
}

/// `inf { exp(theta a) phi(theta) : theta >= 0 }`, minimized numerically.
pub fn mu_infimum(a: f64, d: u32) -> Result<f64> {
    mu(a, d)?;
    // log of the objective is convex in theta
    let h = |t: f64| t * a - (1.0 + t).ln();
    let (mut lo, mut hi) = (0.0, 1.0 / a + 1.0);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut h1, mut h2) = (h(x1), h(x2));
    while hi - lo > 1e-10 {
        if h1 <= h2 {
            hi = x2;
            x2 = x1;
            h2 = h1;
            x1 = hi - inv_phi * (hi - lo);
            h1 = h(x1);
        } else {
            lo = x1;
            x1 = x2;
            h1 = h2;
            x2 = lo + inv_phi * (hi - lo);
            h2 = h(x2);
        }
    }
    let theta = [0.0, 0.5 * (lo + hi)]
        .into_iter()
        .min_by(|x, y| h(*x).total_cmp(&h(*y)))
        .unwrap_or(0.0);
    Ok((theta * a).exp() * phi(theta, d)?)
}

/// `inf { a : mu(a) >= 1 }`, the per-level first-passage rate.
pub fn time_constant_gamma(d: u32) -> Result<f64> {
    if d < 2 {
        return Err(Error::arg("time constant needs d >= 2"));
    }
    // mu is increasing on (0, 1) with mu(0+) = 0 and mu(1) = d
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let m = mu(mid, d)?;
        if (m - 1.0).abs() <= BRACKET_TOL || hi - lo <= f64::EPSILON {
            return Ok(mid);
        }
        if m < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NumericFailure(format!(
        "time constant bisection for d = {d} did not converge"
    )))
}

/// Constants of the first-passage tail windows. They are supplied, not derived.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageSpec {
    pub d: u32,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub delta: f64,
}

impl FirstPassageSpec {
    /// Illustrative defaults: `c1 = c2 = delta = 1`, `c3 = 1`.
    pub fn with_defaults(d: u32) -> Result<Self> {
        Ok(Self {
            d,
            gamma: time_constant_gamma(d)?,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            delta: 1.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::arg("d must be at least 2"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::arg(format!("gamma = {} outside (0, 1)", self.gamma)));
        }
        if [self.c1, self.c2, self.c3].iter().any(|c| !(*c >= 0.0)) || !(self.delta > 0.0) {
            return Err(Error::arg("window constants must be non-negative and delta positive"));
        }
        Ok(())
    }
}

/// `(gamma n + c1 ln n - x, gamma m + c2 ln m + x)` with `m = n - c3 ln n`.
pub fn first_passage_windows(spec: &FirstPassageSpec, n: u64, x: f64) -> Result<(f64, f64)> {
    spec.validate()?;
    if !(x >= 0.0) {
        return Err(Error::arg(format!("x = {x} must be non-negative")));
    }
    if n < 1 {
        return Err(Error::arg("n must be positive"));
    }
    let nf = n as f64;
    let ln_n = nf.ln();
    let m = nf - spec.c3 * ln_n;
    if !(m > 0.0) {
        return Err(Error::arg(format!("n = {n} too small: n - c3 ln n = {m}")));
    }
    let lower = spec.gamma * nf + spec.c1 * ln_n - x;
    let upper = spec.gamma * m + spec.c2 * m.ln() + x;
    Ok((lower, upper))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontSpeed {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub n_lo: u32,
    pub n_hi: u32,
    /// `samples[trial][n]` is the first time depth n is reached, for n in `0..=n_hi`.
    pub samples: Vec<Vec<f64>>,
    /// Some trial hit the event cap before reaching `n_hi`.
    pub truncated: bool,
}

#[derive(PartialEq)]
struct Pending {
    time: f64,
    depth: u32,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time)
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// First-passage times per depth for continuous SI on a d-regular tree
/// (root degree d + 1). Only depths and times are kept, not the tree.
pub fn first_passage_times<R: Rng + ?Sized>(
    d: u32,
    n_hi: u32,
    max_events: usize,
    rng: &mut R,
) -> (Vec<f64>, bool) {
    let mut first = vec![0.0];
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Pending>, rng: &mut R, time: f64, depth: u32, k: u32| {
        for _ in 0..k {
            let delay: f64 = rng.sample(Exp1);
            heap.push(Pending {
                time: time + delay,
                depth,
            });
        }
    };
    push(&mut heap, rng, 0.0, 1, d + 1);
    let mut events = 0;
    while (first.len() as u32) <= n_hi {
        if events >= max_events {
            return (first, true);
        }
        let Some(Pending { time, depth }) = heap.pop() else {
            return (first, true);
        };
        events += 1;
        if depth as usize == first.len() {
            first.push(time);
        }
        if depth < n_hi {
            push(&mut heap, rng, time, depth + 1, d);
        }
    }
    (first, false)
}

/// Regress first-passage time on depth over `n_lo..=n_hi`, pooling trials.
pub fn estimate_front_speed(
    d: u32,
    n_lo: u32,
    n_hi: u32,
    trials: usize,
    master_seed: u64,
    max_events: usize,
) -> Result<FrontSpeed> {
    if d < 2 {
        return Err(Error::arg("front speed needs d >= 2"));
    }
    if n_lo >= n_hi {
        return Err(Error::arg(format!("empty depth range [{n_lo}, {n_hi}]")));
    }
    if trials == 0 {
        return Err(Error::arg("trials must be positive"));
    }
    let runs: Vec<(Vec<f64>, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| first_passage_times(d, n_hi, max_events, &mut trial_rng(master_seed, i)))
        .collect();
    let truncated = runs.iter().any(|r| r.1);
    let points: Vec<(f64, f64)> = runs
        .iter()
        .flat_map(|(b, _)| {
            (n_lo..=n_hi)
                .filter_map(move |n| b.get(n as usize).map(|&t| (f64::from(n), t)))
        })
        .collect();
    let (slope, intercept, slope_stderr) = ols(&points)?;
    Ok(FrontSpeed {
        slope,
        intercept,
        slope_stderr,
        n_lo,
        n_hi,
        samples: runs.into_iter().map(|r| r.0).collect(),
        truncated,
    })
}

fn ols(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let k = points.len() as f64;
    if points.len() < 3 {
        return Err(Error::NumericFailure("too few points to regress".into()));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::NumericFailure("degenerate regression".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = (sse / (k - 2.0) / sxx).sqrt();
    Ok((slope, intercept, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extinction_edge_cases() {
        assert_eq!(gw_extinction_prob(&BranchingSpec::new(0.2, 4)).unwrap(), 1.0);
        assert_eq!(gw_extinction_prob(&BranchingSpec::new(0.25, 4)).unwrap(), 1.0);
        assert_eq!(gw_extinction_prob(&BranchingSpec::new(1.0, 3)).unwrap(), 0.0);
        assert_eq!(gw_extinction_prob(&BranchingSpec::new(0.0, 3)).unwrap(), 1.0);
        assert!(gw_extinction_prob(&BranchingSpec::new(1.5, 3)).is_err());
        assert!(gw_extinction_prob(&BranchingSpec::new(0.5, 0)).is_err());
    }

    #[test]
    fn extinction_is_a_fixed_point() {
        let s = BranchingSpec::new(0.4, 4);
        let q = gw_extinction_prob(&s).unwrap();
        assert!((s.pgf(q) - q).abs() <= 1e-12);
        assert!(q > 0.2 && q < 0.25);
        let root = gw_extinction_prob(&s.with_root_override()).unwrap();
        assert!((root - (0.6 + 0.4 * q).powi(5)).abs() < 1e-15);
    }

    #[test]
    fn phi_and_mu_values() {
        assert_eq!(phi(0.0, 4).unwrap(), 4.0);
        assert_eq!(phi(1.0, 4).unwrap(), 2.0);
        assert!(phi(-0.1, 4).is_err());
        assert!((mu(1.0, 4).unwrap() - 4.0).abs() < 1e-15);
        assert!(mu(1e-12, 4).unwrap() < 1e-10);
        assert!(mu(0.0, 4).is_err());
    }

    #[test]
    fn gamma_solves_mu_equals_one() {
        for d in [2, 3, 4, 8, 16] {
            let g = time_constant_gamma(d).unwrap();
            assert!(g > 0.0 && g < 1.0);
            assert!((mu(g, d).unwrap() - 1.0).abs() <= 1e-9);
        }
        assert!(time_constant_gamma(1).is_err());
    }

    #[test]
    fn windows_validate_inputs() {
        let mut s = FirstPassageSpec::with_defaults(4).unwrap();
        s.c3 = 10.0;
        assert!(first_passage_windows(&s, 2, 0.0).is_err());
        assert!(first_passage_windows(&s, 1000, -1.0).is_err());
        s.gamma = 1.5;
        assert!(first_passage_windows(&s, 1000, 0.0).is_err());
    }

    #[test]
    fn first_passage_is_increasing() {
        let (b, truncated) = first_passage_times(3, 12, 1_000_000, &mut trial_rng(1, 0));
        assert!(!truncated);
        assert_eq!(b.len(), 13);
        assert!(b.windows(2).all(|w| w[1] > w[0]));
        let (_, truncated) = first_passage_times(3, 12, 10, &mut trial_rng(1, 0));
        assert!(truncated);
    }
}
