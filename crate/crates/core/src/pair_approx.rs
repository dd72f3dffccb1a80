//! Pair approximation.
//!
//! Triple counts are closed by `N_{1 0 1} ≈ N10 J0` and its analogues, where
//! `J_i`, `K_i` are the mean numbers of 1- and 0-neighbors of a vertex in
//! state `i`. With the density `p` held fixed this gives a closed ODE for the
//! per-capita pair counts `(N10, N11, N00) / n`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::OpinionGraph;

/// Critical `nu` predicted by the pair approximation: `p^2 + (1-p)^2`.
pub fn pa_nu_c(p: f64) -> f64 {
    p * p + (1.0 - p) * (1.0 - p)
}

/// Equilibrium neighbor means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaEquilibrium {
    pub p: f64,
    pub nu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "J0")]
    pub j0: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    /// `nu > p^2 + (1-p)^2`, so that all four means are positive.
    pub feasible: bool,
}

impl PaEquilibrium {
    /// Per-capita `(N10, N11, N00)` at equilibrium.
    pub fn state(&self) -> [f64; 3] {
        let q = 1.0 - self.p;
        [self.p * self.k1, self.p * self.j1, q * self.k0]
    }
}

pub fn pa_equilibrium(p: f64, nu: f64, l: f64) -> Result<PaEquilibrium> {
    if !(nu > 0.0) {
        return Err(invalid(format!("nu = {nu} must be positive")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("p = {p} must lie in (0, 1)")));
    }
    if !(l > 0.0) {
        return Err(invalid(format!("L = {l} must be positive")));
    }
    let q = 1.0 - p;
    let c = pa_nu_c(p);
    let core = l * (1.0 - c / nu);
    let j0 = core * p;
    let k1 = core * q;
    Ok(PaEquilibrium {
        p,
        nu,
        l,
        j0,
        j1: j0 + l * p / nu,
        k1,
        k0: k1 + l * q / nu,
        feasible: nu > c,
    })
}

/// Solution of the pair-approximation ODE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaTrajectory {
    pub times: Vec<f64>,
    /// Per-capita `(N10, N11, N00)`.
    pub states: Vec<[f64; 3]>,
    /// `N10` fell below the absorption threshold.
    pub absorbed: bool,
}

impl PaTrajectory {
    pub fn last(&self) -> [f64; 3] {
        *self
            .states
            .last()
            .expect("trajectory has its initial state")
    }
}

/// `N10` values at or below this multiple of `L` count as absorbed. The
/// flow only approaches `N10 = 0` exponentially.
pub const PA_ABSORB_EPS: f64 = 1e-12;

fn pa_rhs(s: [f64; 3], p: f64, nu: f64, l: f64) -> [f64; 3] {
    let q = 1.0 - p;
    let [n10, n11, n00] = s;
    let (j1, j0) = (n11 / p, n10 / q);
    let (k1, k0) = (n10 / p, n00 / q);
    let r = nu / l;
    let h11 = p * n10 + r * (n10 * j0 - n10 * j1);
    let h00 = q * n10 + r * (n10 * k1 - n10 * k0);
    [-(h11 + h00), 2.0 * h11, 2.0 * h00]
}

fn rk4(s: [f64; 3], h: f64, p: f64, nu: f64, l: f64) -> [f64; 3] {
    let f = |x: [f64; 3]| pa_rhs(x, p, nu, l);
    let add =
        |a: [f64; 3], b: [f64; 3], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
    let k1 = f(s);
    let k2 = f(add(s, k1, h / 2.0));
    let k3 = f(add(s, k2, h / 2.0));
    let k4 = f(add(s, k3, h));
    let mut out = s;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Classical RK4 on the per-capita pair counts from `init` to `t_end`.
///
/// A step that produces a negative component is retried with half the step,
/// at most 20 times. Integration stops early once `N10` is absorbed.
pub fn pa_integrate(
    p: f64,
    nu: f64,
    l: f64,
    init: [f64; 3],
    t_end: f64,
    dt: f64,
) -> Result<PaTrajectory> {
    if !(p > 0.0 && p < 1.0) || !(nu >= 0.0) || !(l > 0.0) {
        return Err(invalid("need 0 < p < 1, nu >= 0, L > 0"));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(invalid("need dt > 0 and t_end >= 0"));
    }
    if init.iter().any(|&v| v < 0.0) {
        return Err(invalid("initial state has a negative component"));
    }
    let total = init[1] + 2.0 * init[0] + init[2];
    if (total - l).abs() > 1e-9 * l {
        return Err(invalid(format!(
            "N11 + 2 N10 + N00 = {total}, expected L = {l}"
        )));
    }
    let eps = PA_ABSORB_EPS * l;
    let mut traj = PaTrajectory {
        times: vec![0.0],
        states: vec![init],
        absorbed: init[0] <= eps,
    };
    let (mut t, mut s) = (0.0, init);
    while !traj.absorbed && t < t_end {
        let mut h = dt.min(t_end - t);
        let mut halvings = 0;
        let next = loop {
            let cand = rk4(s, h, p, nu, l);
            if cand.iter().all(|&v| v >= 0.0) {
                break cand;
            }
            if halvings == 20 {
                return Err(Error::Integration(format!(
                    "negative state at t = {t} after 20 step halvings"
                )));
            }
            h /= 2.0;
            halvings += 1;
        };
        t += h;
        s = next;
        traj.times.push(t);
        traj.states.push(s);
        traj.absorbed = s[0] <= eps;
    }
    Ok(traj)
}

/// Sample correlations of `(1-neighbors, 0-neighbors)` over 0-vertices and
/// over 1-vertices. A diagnostic for whether the pair approximation's
/// critical value is a lower bound. `NaN` when a class has fewer than two
/// vertices or no variance.
pub fn neighbor_count_correlation(g: &OpinionGraph) -> (f64, f64) {
    let mut acc = [[0.0f64; 6]; 2];
    for v in 0..g.n() as u32 {
        let s = g.opinion(v) as usize;
        let j = g.ones_neighbors(v) as f64;
        let k = (g.degree(v) - g.ones_neighbors(v)) as f64;
        let a = &mut acc[s];
        a[0] += 1.0;
        a[1] += j;
        a[2] += k;
        a[3] += j * j;
        a[4] += k * k;
        a[5] += j * k;
    }
    let corr = |a: &[f64; 6]| {
        let n = a[0];
        if n < 2.0 {
            return f64::NAN;
        }
        let cov = a[5] / n - a[1] * a[2] / (n * n);
        let vj = a[3] / n - (a[1] / n).powi(2);
        let vk = a[4] / n - (a[2] / n).powi(2);
        cov / (vj * vk).sqrt()
    };
    (corr(&acc[0]), corr(&acc[1]))
}
