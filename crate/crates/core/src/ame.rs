//! The two-plane system of the approximate master equation.
//!
//! A particle sits in plane 1 (focal vertex in state 1) or plane 0 at a
//! position `(x, y)`: its scaled numbers of 1- and 0-neighbors. Within a
//! plane it follows an affine flow `z' = A z + c` towards a fixed point, and
//! it jumps to the other plane at rate `nu y` from plane 1 and `nu x` from
//! plane 0, keeping its position.
//!
//! Plane 1:
//!
//! ```text
//! x' = eta + (p + nu alpha) y - nu beta x
//! y' = eta - (1 + p + nu alpha) y + nu beta x
//! ```
//!
//! Plane 0 is the mirror image with `x <-> y`, `p -> q = 1 - p`,
//! `alpha -> delta`, `beta -> eps`.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, SimRng, Stream};

/// Jump times beyond this are reported as censored.
pub const JUMP_HORIZON: f64 = 1e6;

/// Eigenvalue gap below which the repeated-root formulas are used.
const REPEATED_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmeParams {
    pub bar_alpha: f64,
    pub bar_beta: f64,
    pub bar_delta: f64,
    pub bar_eps: f64,
    pub bar_eta: f64,
    pub nu: f64,
    pub p: f64,
}

impl AmeParams {
    /// Symmetric parameters: `p = 1/2`, `delta = alpha`, `eps = beta`.
    pub fn symmetric(nu: f64, bar_alpha: f64, bar_beta: f64, bar_eta: f64) -> AmeParams {
        AmeParams {
            bar_alpha,
            bar_beta,
            bar_delta: bar_alpha,
            bar_eps: bar_beta,
            bar_eta,
            nu,
            p: 0.5,
        }
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(invalid("nu must be positive"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(invalid("p must lie in (0, 1)"));
        }
        if !(self.bar_beta > 0.0 && self.bar_eps > 0.0) {
            return Err(invalid("bar_beta and bar_eps must be positive"));
        }
        if !(self.bar_alpha >= 0.0 && self.bar_delta >= 0.0 && self.bar_eta >= 0.0) {
            return Err(invalid("bar_alpha, bar_delta and bar_eta must be >= 0"));
        }
        Ok(())
    }

    pub fn system(&self, plane: Plane) -> Result<PlaneSystem> {
        PlaneSystem::new(plane, self)
    }

    pub fn systems(&self) -> Result<[PlaneSystem; 2]> {
        Ok([self.system(Plane::Zero)?, self.system(Plane::One)?])
    }

    /// Plane fixed point, in closed form.
    pub fn fixed_point(&self, plane: Plane) -> Result<[f64; 2]> {
        self.validate()?;
        let e = self.bar_eta;
        Ok(match plane {
            Plane::One => [
                e * (1.0 + 2.0 * self.p + 2.0 * self.nu * self.bar_alpha)
                    / (self.nu * self.bar_beta),
                2.0 * e,
            ],
            Plane::Zero => [
                2.0 * e,
                e * (1.0 + 2.0 * self.q() + 2.0 * self.nu * self.bar_delta)
                    / (self.nu * self.bar_eps),
            ],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Plane {
    Zero = 0,
    One = 1,
}

impl Plane {
    pub fn other(self) -> Plane {
        match self {
            Plane::Zero => Plane::One,
            Plane::One => Plane::Zero,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl From<Plane> for u8 {
    fn from(p: Plane) -> u8 {
        p as u8
    }
}

impl TryFrom<u8> for Plane {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Plane, String> {
        match v {
            0 => Ok(Plane::Zero),
            1 => Ok(Plane::One),
            _ => Err(format!("plane {v} is not 0 or 1")),
        }
    }
}

/// The affine flow of one plane together with its jump rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSystem {
    pub plane: Plane,
    pub a: Matrix2<f64>,
    pub c: Vector2<f64>,
    /// Ascending: `lambda1 <= lambda2 < 0`.
    pub eigenvalues: (f64, f64),
    pub z_star: Vector2<f64>,
    /// Jump rate is `rate_coef` times coordinate `rate_axis`.
    pub rate_coef: f64,
    pub rate_axis: usize,
    a_inv: Matrix2<f64>,
}

impl PlaneSystem {
    pub fn new(plane: Plane, params: &AmeParams) -> Result<PlaneSystem> {
        params.validate()?;
        let nu = params.nu;
        let (a, axis) = match plane {
            Plane::One => {
                let (s, r) = (nu * params.bar_beta, params.p + nu * params.bar_alpha);
                (Matrix2::new(-s, r, s, -(1.0 + r)), 1)
            }
            Plane::Zero => {
                let (s, r) = (nu * params.bar_eps, params.q() + nu * params.bar_delta);
                (Matrix2::new(-(1.0 + r), s, r, -s), 0)
            }
        };
        let c = Vector2::new(params.bar_eta, params.bar_eta);
        PlaneSystem::from_parts(plane, a, c, nu, axis)
    }

    /// Plane-1 shaped system `[[-a, p + b], [a, -(1 + p + b)]]` with
    /// offset `(eta, eta)` and jump rate `y`.
    pub fn from_abp(a: f64, b: f64, p: f64, eta: f64) -> Result<PlaneSystem> {
        let m = Matrix2::new(-a, p + b, a, -(1.0 + p + b));
        PlaneSystem::from_parts(Plane::One, m, Vector2::new(eta, eta), 1.0, 1)
    }

    pub fn from_parts(
        plane: Plane,
        a: Matrix2<f64>,
        c: Vector2<f64>,
        rate_coef: f64,
        rate_axis: usize,
    ) -> Result<PlaneSystem> {
        let tr = a.trace();
        let det = a.determinant();
        let disc = tr * tr - 4.0 * det;
        if !(det > 0.0) || disc < 0.0 || !(tr < 0.0) {
            return Err(invalid(format!(
                "plane matrix needs real negative eigenvalues (trace {tr}, det {det})"
            )));
        }
        let s = disc.sqrt();
        let eigenvalues = ((tr - s) / 2.0, (tr + s) / 2.0);
        let a_inv = a
            .try_inverse()
            .ok_or_else(|| invalid("singular plane matrix"))?;
        Ok(PlaneSystem {
            plane,
            a,
            c,
            eigenvalues,
            z_star: -(a_inv * c),
            rate_coef,
            rate_axis,
            a_inv,
        })
    }

    pub fn trace(&self) -> f64 {
        self.a.trace()
    }

    pub fn det(&self) -> f64 {
        self.a.determinant()
    }

    pub fn fixed_point(&self) -> [f64; 2] {
        [self.z_star[0], self.z_star[1]]
    }

    fn repeated(&self) -> bool {
        (self.eigenvalues.1 - self.eigenvalues.0).abs() < REPEATED_GAP
    }

    /// `e^{A t}` by Sylvester's formula, or its repeated-root limit.
    pub fn exp_at(&self, t: f64) -> Matrix2<f64> {
        let (l1, l2) = self.eigenvalues;
        let id = Matrix2::identity();
        if self.repeated() {
            let l = 0.5 * (l1 + l2);
            (id + (self.a - id * l) * t) * (l * t).exp()
        } else {
            ((self.a - id * l2) * (l1 * t).exp() - (self.a - id * l1) * (l2 * t).exp()) / (l1 - l2)
        }
    }

    pub fn flow(&self, z0: [f64; 2], t: f64) -> [f64; 2] {
        let d = Vector2::new(z0[0], z0[1]) - self.z_star;
        let z = self.z_star + self.exp_at(t) * d;
        [z[0], z[1]]
    }

    /// Operator 2-norm of `e^{A t}`, a Lipschitz constant of the time-`t` flow.
    pub fn contraction(&self, t: f64) -> f64 {
        self.exp_at(t).singular_values().max()
    }

    /// Jump rate at `z`, with negative coordinates clamped to 0.
    pub fn rate(&self, z: [f64; 2]) -> f64 {
        self.rate_coef * z[self.rate_axis].max(0.0)
    }

    /// The jump-rate coordinate along the flow from `z0`, in modal form.
    fn modal(&self, z0: [f64; 2]) -> Modal {
        let d = Vector2::new(z0[0], z0[1]) - self.z_star;
        let k = self.rate_axis;
        let (l1, l2) = self.eigenvalues;
        let id = Matrix2::identity();
        if self.repeated() {
            let l = 0.5 * (l1 + l2);
            Modal::Repeated {
                b0: d[k],
                b1: ((self.a - id * l) * d)[k],
                l,
            }
        } else {
            let p1 = (self.a - id * l2) / (l1 - l2);
            let p2 = (self.a - id * l1) / (l2 - l1);
            Modal::Distinct {
                c1: (p1 * d)[k],
                l1,
                c2: (p2 * d)[k],
                l2,
            }
        }
    }

    /// Cumulative hazard of the first jump when starting at `z0`.
    pub fn hazard(&self, z0: [f64; 2]) -> Hazard {
        Hazard::new(self.rate_coef, self.z_star[self.rate_axis], self.modal(z0))
    }

    /// Unclamped integral `∫_0^t e_k z(s) ds`, computed as
    /// `r* t + e_k A^{-1} (e^{At} - I)(z0 - z*)`.
    pub fn coordinate_integral(&self, z0: [f64; 2], t: f64) -> f64 {
        let d = Vector2::new(z0[0], z0[1]) - self.z_star;
        let m = self.a_inv * (self.exp_at(t) - Matrix2::identity());
        self.z_star[self.rate_axis] * t + (m * d)[self.rate_axis]
    }

    /// The `t` with `P(T > t) = 1 - u` for the first jump from `z0`.
    pub fn jump_time_sample(&self, z0: [f64; 2], u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(invalid(format!("u = {u} must lie in (0, 1)")));
        }
        self.hazard(z0).invert(-(-u).ln_1p())
    }
}

/// `g(s) = e_k e^{As} (z0 - z*)` as a sum of exponentials.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Modal {
    Distinct { c1: f64, l1: f64, c2: f64, l2: f64 },
    Repeated { b0: f64, b1: f64, l: f64 },
}

impl Modal {
    fn value(&self, s: f64) -> f64 {
        match *self {
            Modal::Distinct { c1, l1, c2, l2 } => c1 * (l1 * s).exp() + c2 * (l2 * s).exp(),
            Modal::Repeated { b0, b1, l } => (b0 + b1 * s) * (l * s).exp(),
        }
    }

    /// `∫_0^t g`.
    fn integral(&self, t: f64) -> f64 {
        match *self {
            Modal::Distinct { c1, l1, c2, l2 } => {
                c1 * (l1 * t).exp_m1() / l1 + c2 * (l2 * t).exp_m1() / l2
            }
            Modal::Repeated { b0, b1, l } => {
                let e = (l * t).exp();
                b0 * (l * t).exp_m1() / l + b1 * (t * e / l - (l * t).exp_m1() / (l * l))
            }
        }
    }

    /// The positive zero of `g'`, if any. There is at most one.
    fn critical(&self) -> Option<f64> {
        let s = match *self {
            Modal::Distinct { c1, l1, c2, l2 } => {
                let (u, v) = (c1 * l1, c2 * l2);
                if u == 0.0 {
                    return None;
                }
                let ratio = -v / u;
                if !(ratio > 0.0) {
                    return None;
                }
                ratio.ln() / (l1 - l2)
            }
            Modal::Repeated { b0, b1, l } => {
                if b1 == 0.0 {
                    return None;
                }
                -(b1 + l * b0) / (l * b1)
            }
        };
        (s > 0.0 && s.is_finite()).then_some(s)
    }
}

/// `H(t) = coef ∫_0^t max(r* + g(s), 0) ds`.
#[derive(Debug, Clone)]
pub struct Hazard {
    coef: f64,
    r_star: f64,
    modal: Modal,
    /// Intervals where the rate coordinate is negative.
    negative: Vec<(f64, f64)>,
    critical: Option<f64>,
}

impl Hazard {
    fn new(coef: f64, r_star: f64, modal: Modal) -> Hazard {
        let critical = modal.critical();
        let f = |s: f64| r_star + modal.value(s);
        let mut cuts = vec![0.0];
        cuts.extend(critical);
        let mut roots = Vec::new();
        for (i, &a) in cuts.iter().enumerate() {
            let fa = f(a);
            let b = cuts.get(i + 1).copied();
            let fb = b.map_or(r_star, f);
            if fa == 0.0 || fa.signum() == fb.signum() || fb == 0.0 {
                continue;
            }
            let (mut lo, mut hi) = match b {
                Some(b) => (a, b),
                None => {
                    let mut hi = a.max(1.0);
                    while f(hi).signum() != fb.signum() && hi < JUMP_HORIZON {
                        hi *= 2.0;
                    }
                    (a, hi)
                }
            };
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid).signum() == fa.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        let mut bounds = vec![0.0];
        bounds.extend(&roots);
        let mut negative = Vec::new();
        for (i, &a) in bounds.iter().enumerate() {
            let b = bounds.get(i + 1).copied().unwrap_or(f64::INFINITY);
            let probe = if b.is_finite() {
                0.5 * (a + b)
            } else {
                2.0 * a + 1.0
            };
            if f(probe) < 0.0 {
                negative.push((a, b));
            }
        }
        Hazard {
            coef,
            r_star,
            modal,
            negative,
            critical,
        }
    }

    /// Whether the rate coordinate dips below 0 along the flow.
    pub fn clamps(&self) -> bool {
        !self.negative.is_empty()
    }

    fn raw(&self, t: f64) -> f64 {
        self.r_star * t + self.modal.integral(t)
    }

    /// Instantaneous jump rate after time `s`.
    pub fn rate(&self, s: f64) -> f64 {
        self.coef * (self.r_star + self.modal.value(s)).max(0.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        let mut h = self.raw(t);
        for &(a, b) in &self.negative {
            if a >= t {
                break;
            }
            h -= self.raw(b.min(t)) - self.raw(a);
        }
        self.coef * h.max(0.0)
    }

    /// Supremum of the rate over `[0, inf)`.
    pub fn rate_bound(&self) -> f64 {
        let mut m = self.rate(0.0).max(self.coef * self.r_star.max(0.0));
        if let Some(s) = self.critical {
            m = m.max(self.rate(s));
        }
        m
    }

    /// Solves `H(t) = target` to relative tolerance 1e-10.
    pub fn invert(&self, target: f64) -> Result<f64> {
        if target <= 0.0 {
            return Ok(0.0);
        }
        let asymptote = self.coef * self.r_star;
        let mut hi = if asymptote > 0.0 {
            1.0 / asymptote
        } else {
            1.0
        };
        while self.value(hi) < target {
            if hi >= JUMP_HORIZON {
                return Err(Error::Censored {
                    horizon: JUMP_HORIZON,
                });
            }
            hi = (hi * 2.0).min(JUMP_HORIZON);
        }
        let mut lo = 0.0;
        let mut t = 0.5 * hi;
        for _ in 0..300 {
            let f = self.value(t) - target;
            if f == 0.0 {
                return Ok(t);
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            if hi - lo <= 1e-10 * hi {
                break;
            }
            let r = self.rate(t);
            let newton = if r > 0.0 { t - f / r } else { f64::NAN };
            t = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (hi - lo) <= 1e-10 * t.abs() && f.abs() <= 1e-12 * target {
                break;
            }
        }
        Ok(t)
    }
}

/// Occupation measure on a regular grid over `[0, window]^2`, per plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneHistogram {
    pub bins: usize,
    pub window: f64,
    /// Row-major `[ix * bins + iy]`, indexed by plane.
    pub mass: [Vec<f64>; 2],
    /// Mass that fell outside the window.
    pub outside: [f64; 2],
}

impl PlaneHistogram {
    pub fn new(bins: usize, window: f64) -> PlaneHistogram {
        PlaneHistogram {
            bins,
            window,
            mass: [vec![0.0; bins * bins], vec![0.0; bins * bins]],
            outside: [0.0; 2],
        }
    }

    /// Default window `[0, 3 max fixed-point coordinate]`.
    pub fn for_params(params: &AmeParams, bins: usize) -> Result<PlaneHistogram> {
        let f0 = params.fixed_point(Plane::Zero)?;
        let f1 = params.fixed_point(Plane::One)?;
        let m = f0.iter().chain(&f1).fold(0.0f64, |a, &b| a.max(b));
        let window = if m > 0.0 { 3.0 * m } else { 1.0 };
        Ok(PlaneHistogram::new(bins, window))
    }

    fn cell(&self, z: [f64; 2]) -> Option<usize> {
        let scale = self.bins as f64 / self.window;
        let (fx, fy) = (z[0] * scale, z[1] * scale);
        if fx < 0.0 || fy < 0.0 || fx >= self.bins as f64 || fy >= self.bins as f64 {
            return None;
        }
        Some(fx as usize * self.bins + fy as usize)
    }

    pub fn deposit(&mut self, plane: Plane, z: [f64; 2], w: f64) {
        match self.cell(z) {
            Some(c) => self.mass[plane.index()][c] += w,
            None => self.outside[plane.index()] += w,
        }
    }

    pub fn merge(&mut self, other: &PlaneHistogram) {
        assert_eq!((self.bins, self.window), (other.bins, other.window));
        for p in 0..2 {
            for (a, b) in self.mass[p].iter_mut().zip(&other.mass[p]) {
                *a += b;
            }
            self.outside[p] += other.outside[p];
        }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().flatten().sum::<f64>() + self.outside.iter().sum::<f64>()
    }

    /// Sums `factor x factor` blocks of cells.
    pub fn coarsen(&self, factor: usize) -> PlaneHistogram {
        assert!(factor > 0 && self.bins % factor == 0);
        let nb = self.bins / factor;
        let mut out = PlaneHistogram::new(nb, self.window);
        out.outside = self.outside;
        for p in 0..2 {
            for ix in 0..self.bins {
                for iy in 0..self.bins {
                    out.mass[p][(ix / factor) * nb + iy / factor] +=
                        self.mass[p][ix * self.bins + iy];
                }
            }
        }
        out
    }

    /// Center of the heaviest cell of `plane`.
    pub fn mode(&self, plane: Plane) -> [f64; 2] {
        let m = &self.mass[plane.index()];
        let best = (0..m.len())
            .max_by(|&a, &b| m[a].total_cmp(&m[b]))
            .unwrap_or(0);
        let w = self.window / self.bins as f64;
        [
            ((best / self.bins) as f64 + 0.5) * w,
            ((best % self.bins) as f64 + 0.5) * w,
        ]
    }

    /// Cells that are strict maxima of their 8-neighborhood and carry at
    /// least `floor` of the peak mass.
    pub fn local_maxima(&self, plane: Plane, floor: f64) -> usize {
        let m = &self.mass[plane.index()];
        let b = self.bins as isize;
        let peak = m.iter().cloned().fold(0.0, f64::max);
        let mut count = 0;
        for ix in 0..b {
            for iy in 0..b {
                let v = m[(ix * b + iy) as usize];
                if v < floor * peak || v == 0.0 {
                    continue;
                }
                let mut is_max = true;
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        let (jx, jy) = (ix + dx, iy + dy);
                        if (dx, dy) == (0, 0) || jx < 0 || jy < 0 || jx >= b || jy >= b {
                            continue;
                        }
                        if m[(jx * b + jy) as usize] >= v {
                            is_max = false;
                        }
                    }
                }
                count += is_max as usize;
            }
        }
        count
    }

    /// Total variation distance between plane 0 with axes swapped and
    /// plane 1, each normalized to unit mass.
    pub fn swap_distance(&self) -> f64 {
        let b = self.bins;
        let (s0, s1): (f64, f64) = (self.mass[0].iter().sum(), self.mass[1].iter().sum());
        let mut tv = 0.0;
        for ix in 0..b {
            for iy in 0..b {
                tv += (self.mass[0][iy * b + ix] / s0 - self.mass[1][ix * b + iy] / s1).abs();
            }
        }
        0.5 * tv
    }

    /// CSV with columns `bin_x,bin_y,plane,mass`, mass normalized to the
    /// total.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_x,bin_y,plane,mass")?;
        let total = self.total();
        for p in 0..2 {
            for ix in 0..self.bins {
                for iy in 0..self.bins {
                    let m = self.mass[p][ix * self.bins + iy];
                    writeln!(
                        w,
                        "{ix},{iy},{p},{}",
                        if total > 0.0 { m / total } else { 0.0 }
                    )?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub plane: Plane,
    pub x: f64,
    pub y: f64,
}

/// Options of [`forward_simulate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    /// Spacing of recorded path points; `None` records nothing.
    pub record_dt: Option<f64>,
    /// Quadrature step for the occupation histogram.
    pub hist_dt: f64,
    pub bins: usize,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        ForwardConfig {
            record_dt: Some(0.1),
            hist_dt: 0.02,
            bins: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardResult {
    pub path: Vec<PathPoint>,
    pub hist: PlaneHistogram,
    pub time_in: [f64; 2],
    /// Lengths of completed sojourns that began with a jump, per plane.
    pub sojourns: [Vec<f64>; 2],
    pub jumps: u64,
    pub end_plane: Plane,
    pub end: [f64; 2],
    /// Some sojourn saw its rate coordinate go negative and was clamped.
    pub clamped: bool,
}

impl ForwardResult {
    pub fn occupancy(&self, plane: Plane) -> f64 {
        self.time_in[plane.index()] / (self.time_in[0] + self.time_in[1])
    }
}

/// Particle state carried across simulation chunks.
#[derive(Debug, Clone, Copy)]
struct Particle {
    plane: Plane,
    z: [f64; 2],
    age: f64,
    after_jump: bool,
}

struct Simulator<'a> {
    systems: &'a [PlaneSystem; 2],
    cfg: ForwardConfig,
}

impl Simulator<'_> {
    fn run(
        &self,
        part: &mut Particle,
        t0: f64,
        horizon: f64,
        rng: &mut SimRng,
        out: &mut ForwardResult,
    ) -> Result<()> {
        let mut t = t0;
        let end = t0 + horizon;
        let mut next_rec = self.cfg.record_dt.map(|dt| (t0 / dt).ceil() * dt);
        while t < end {
            let sys = &self.systems[part.plane.index()];
            let u: f64 = rng.random();
            let target = -(-u).ln_1p();
            let hz = sys.hazard(part.z);
            out.clamped |= hz.clamps();
            let remaining = end - t;
            let (s, jumped) = if hz.value(remaining) < target {
                (remaining, false)
            } else {
                (hz.invert(target)?, true)
            };
            if let (Some(dt), Some(nr)) = (self.cfg.record_dt, next_rec.as_mut()) {
                while *nr < t + s || (!jumped && *nr <= end && *nr >= t) {
                    if *nr > end {
                        break;
                    }
                    let z = sys.flow(part.z, *nr - t);
                    out.path.push(PathPoint {
                        t: *nr,
                        plane: part.plane,
                        x: z[0],
                        y: z[1],
                    });
                    *nr += dt;
                    if !jumped && *nr > end {
                        break;
                    }
                }
            }
            let pieces = (s / self.cfg.hist_dt).ceil().max(1.0) as usize;
            let h = s / pieces as f64;
            for i in 0..pieces {
                let z = sys.flow(part.z, (i as f64 + 0.5) * h);
                out.hist.deposit(part.plane, z, h);
            }
            out.time_in[part.plane.index()] += s;
            part.age += s;
            part.z = sys.flow(part.z, s);
            t += s;
            if jumped {
                if part.after_jump {
                    out.sojourns[part.plane.index()].push(part.age);
                }
                part.plane = part.plane.other();
                part.age = 0.0;
                part.after_jump = true;
                out.jumps += 1;
            }
        }
        out.end_plane = part.plane;
        out.end = part.z;
        Ok(())
    }
}

fn empty_result(hist: PlaneHistogram, plane: Plane, z: [f64; 2]) -> ForwardResult {
    ForwardResult {
        path: Vec::new(),
        hist,
        time_in: [0.0; 2],
        sojourns: [Vec::new(), Vec::new()],
        jumps: 0,
        end_plane: plane,
        end: z,
        clamped: false,
    }
}

/// Simulates the two-plane process from `(plane0, z0)` for time `horizon`.
pub fn forward_simulate(
    params: &AmeParams,
    z0: [f64; 2],
    plane0: Plane,
    horizon: f64,
    seed: u64,
) -> Result<ForwardResult> {
    forward_simulate_with(params, z0, plane0, horizon, seed, ForwardConfig::default())
}

pub fn forward_simulate_with(
    params: &AmeParams,
    z0: [f64; 2],
    plane0: Plane,
    horizon: f64,
    seed: u64,
    cfg: ForwardConfig,
) -> Result<ForwardResult> {
    forward_simulate_replica(params, z0, plane0, horizon, seed, 0, cfg)
}

/// [`forward_simulate_with`] on the random stream of `replica`.
pub fn forward_simulate_replica(
    params: &AmeParams,
    z0: [f64; 2],
    plane0: Plane,
    horizon: f64,
    seed: u64,
    replica: u64,
    cfg: ForwardConfig,
) -> Result<ForwardResult> {
    if !(horizon > 0.0) {
        return Err(invalid("horizon must be positive"));
    }
    let systems = params.systems()?;
    let mut rng = stream_rng(seed, replica, Stream::Aux);
    let mut out = empty_result(PlaneHistogram::for_params(params, cfg.bins)?, plane0, z0);
    let mut part = Particle {
        plane: plane0,
        z: z0,
        age: 0.0,
        after_jump: false,
    };
    Simulator {
        systems: &systems,
        cfg,
    }
    .run(&mut part, 0.0, horizon, &mut rng, &mut out)?;
    Ok(out)
}

/// Uniforms `(U_0^k, U_1^k)` for cycles `k = 1..=n`.
pub fn cycle_uniforms(seed: u64, replica: u64, n: usize) -> Vec<[f64; 2]> {
    let mut rng = stream_rng(seed, replica, Stream::Ame);
    (0..n)
        .map(|_| [open01(&mut rng), open01(&mut rng)])
        .collect()
}

fn open01(rng: &mut SimRng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// One cycle map: a sojourn in `first`, then one in the other plane.
/// `first = Zero` is the map `G` (returns the entry point into plane 0),
/// `first = One` is `H` (entry point into plane 1).
pub fn cycle_map(
    systems: &[PlaneSystem; 2],
    first: Plane,
    u: [f64; 2],
    z: [f64; 2],
) -> Result<[f64; 2]> {
    let a = &systems[first.index()];
    let b = &systems[first.other().index()];
    let t1 = a.jump_time_sample(z, u[first.index()])?;
    let w = a.flow(z, t1);
    let t2 = b.jump_time_sample(w, u[first.other().index()])?;
    Ok(b.flow(w, t2))
}

/// `phi^{-n}(z) = M^1 ∘ ... ∘ M^n (z)`.
pub fn backward_point(
    systems: &[PlaneSystem; 2],
    first: Plane,
    uniforms: &[[f64; 2]],
    z: [f64; 2],
) -> Result<[f64; 2]> {
    uniforms
        .iter()
        .rev()
        .try_fold(z, |acc, &u| cycle_map(systems, first, u, acc))
}

/// `phi^{n}(z) = M^n ∘ ... ∘ M^1 (z)`.
pub fn forward_point(
    systems: &[PlaneSystem; 2],
    first: Plane,
    uniforms: &[[f64; 2]],
    z: [f64; 2],
) -> Result<[f64; 2]> {
    uniforms
        .iter()
        .try_fold(z, |acc, &u| cycle_map(systems, first, u, acc))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardResult {
    /// `phi^{-n}(z)` at `n = n_cycles`.
    pub y: [f64; 2],
    /// `|phi^{-n}(z) - phi^{-n}(w)|` for `n = 1..=n_cycles`.
    pub distances: Vec<f64>,
}

/// Backward iteration of the `G` maps from two starts with common
/// uniforms. The limit is the entry point into plane 0 under the
/// stationary cycle law.
pub fn backward_iterate(
    params: &AmeParams,
    seed: u64,
    n_cycles: usize,
    z: [f64; 2],
    w: [f64; 2],
) -> Result<BackwardResult> {
    backward_iterate_from(params, Plane::Zero, seed, n_cycles, z, w)
}

pub fn backward_iterate_from(
    params: &AmeParams,
    first: Plane,
    seed: u64,
    n_cycles: usize,
    z: [f64; 2],
    w: [f64; 2],
) -> Result<BackwardResult> {
    if n_cycles == 0 {
        return Err(invalid("n_cycles must be >= 1"));
    }
    let systems = params.systems()?;
    let us = cycle_uniforms(seed, 0, n_cycles);
    let mut distances = Vec::with_capacity(n_cycles);
    let mut y = z;
    for n in 1..=n_cycles {
        let a = backward_point(&systems, first, &us[..n], z)?;
        let b = backward_point(&systems, first, &us[..n], w)?;
        distances.push(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        y = a;
    }
    Ok(BackwardResult { y, distances })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryMode {
    TimeAverage,
    RenewalWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryEstimate {
    pub mode: StationaryMode,
    /// Long-run fraction of time in plane 1.
    pub occupancy_one: f64,
    pub occupancy_se: f64,
    /// Mean sojourn in plane 0 and in plane 1.
    pub nu0: f64,
    pub nu1: f64,
    pub nu0_se: f64,
    pub nu1_se: f64,
    pub hist: PlaneHistogram,
}

/// Cycles of backward iteration used per renewal sample.
pub const RENEWAL_CYCLES: usize = 40;

/// Estimates the stationary law.
///
/// `TimeAverage`: `budget` is the simulated time, split into 50 batches for
/// the standard error. `RenewalWeighted`: `budget` is the number of entry
/// points drawn per plane by backward iteration; each is followed for one
/// sojourn, whose path is deposited into the histogram.
pub fn stationary_estimate(
    params: &AmeParams,
    mode: StationaryMode,
    budget: f64,
    seed: u64,
) -> Result<StationaryEstimate> {
    if !(budget > 0.0) {
        return Err(invalid("budget must be positive"));
    }
    let systems = params.systems()?;
    let cfg = ForwardConfig {
        record_dt: None,
        ..ForwardConfig::default()
    };
    let hist = PlaneHistogram::for_params(params, cfg.bins)?;
    let z1 = params.fixed_point(Plane::One)?;
    match mode {
        StationaryMode::TimeAverage => {
            const BATCHES: usize = 50;
            let mut rng = stream_rng(seed, 0, Stream::Ame);
            let sim = Simulator {
                systems: &systems,
                cfg,
            };
            let mut part = Particle {
                plane: Plane::One,
                z: z1,
                age: 0.0,
                after_jump: false,
            };
            // burn-in of 5% of the budget, discarded
            let mut burn = empty_result(hist.clone(), Plane::One, z1);
            sim.run(&mut part, 0.0, 0.05 * budget, &mut rng, &mut burn)?;
            let mut total = empty_result(hist, part.plane, part.z);
            let chunk = budget / BATCHES as f64;
            let mut fracs = Vec::with_capacity(BATCHES);
            for k in 0..BATCHES {
                let before = total.time_in;
                sim.run(&mut part, k as f64 * chunk, chunk, &mut rng, &mut total)?;
                let d1 = total.time_in[1] - before[1];
                let d0 = total.time_in[0] - before[0];
                fracs.push(d1 / (d0 + d1));
            }
            let (occ, occ_se) = crate::stats::mean_se(&fracs);
            let (nu0, nu0_se) = crate::stats::mean_se(&total.sojourns[0]);
            let (nu1, nu1_se) = crate::stats::mean_se(&total.sojourns[1]);
            Ok(StationaryEstimate {
                mode,
                occupancy_one: occ,
                occupancy_se: occ_se,
                nu0,
                nu1,
                nu0_se,
                nu1_se,
                hist: total.hist,
            })
        }
        StationaryMode::RenewalWeighted => {
            let m = budget.round().max(2.0) as u64;
            let z0 = params.fixed_point(Plane::Zero)?;
            let mut hist = hist;
            let mut tau = [Vec::new(), Vec::new()];
            for j in 0..m {
                let us = cycle_uniforms(seed, 2 * j, RENEWAL_CYCLES);
                let mut rng = stream_rng(seed, 2 * j + 1, Stream::Ame);
                // H maps give the entry into plane 1; G maps the entry into plane 0.
                for (first, start) in [(Plane::One, z1), (Plane::Zero, z0)] {
                    let entry = backward_point(&systems, first, &us, start)?;
                    let plane = first;
                    let sys = &systems[plane.index()];
                    let t = sys.jump_time_sample(entry, open01(&mut rng))?;
                    let pieces = (t / cfg.hist_dt).ceil().max(1.0) as usize;
                    let h = t / pieces as f64;
                    for i in 0..pieces {
                        hist.deposit(plane, sys.flow(entry, (i as f64 + 0.5) * h), h);
                    }
                    tau[plane.index()].push(t);
                }
            }
            let (nu0, nu0_se) = crate::stats::mean_se(&tau[0]);
            let (nu1, nu1_se) = crate::stats::mean_se(&tau[1]);
            let s = nu0 + nu1;
            let occ_se = ((nu0 * nu1_se).powi(2) + (nu1 * nu0_se).powi(2)).sqrt() / (s * s);
            Ok(StationaryEstimate {
                mode,
                occupancy_one: nu1 / s,
                occupancy_se: occ_se,
                nu0,
                nu1,
                nu0_se,
                nu1_se,
                hist,
            })
        }
    }
}

/// Unscaled two-plane parameters at finite `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteLParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub eps: f64,
    pub eta: f64,
    pub nu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub p: f64,
}

impl FiniteLParams {
    /// The limit parameters `alpha / L`, ... of this system.
    pub fn scaled(&self) -> AmeParams {
        AmeParams {
            bar_alpha: self.alpha / self.l,
            bar_beta: self.beta / self.l,
            bar_delta: self.delta / self.l,
            bar_eps: self.eps / self.l,
            bar_eta: self.eta / self.l,
            nu: self.nu,
            p: self.p,
        }
    }

    /// Plane systems in unscaled coordinates `(j, k)`: drift with
    /// `nu/L` coefficients and jumps at rate `nu k / L` or `nu j / L`.
    pub fn systems(&self) -> Result<[PlaneSystem; 2]> {
        if !(self.l >= 1.0) {
            return Err(invalid("L must be >= 1"));
        }
        self.scaled().validate()?;
        let r = self.nu / self.l;
        let q = 1.0 - self.p;
        let c = Vector2::new(self.eta, self.eta);
        let one = Matrix2::new(
            -r * self.beta,
            self.p + r * self.alpha,
            r * self.beta,
            -(1.0 + self.p + r * self.alpha),
        );
        let zero = Matrix2::new(
            -(1.0 + q + r * self.delta),
            r * self.eps,
            q + r * self.delta,
            -r * self.eps,
        );
        Ok([
            PlaneSystem::from_parts(Plane::Zero, zero, c, r, 0)?,
            PlaneSystem::from_parts(Plane::One, one, c, r, 1)?,
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteLMoments {
    /// Fraction of particle-time spent in each plane.
    pub occupancy: [f64; 2],
    /// Per plane: time-averaged `(j/L, k/L)` over all particles.
    pub mean: [[f64; 2]; 2],
    /// Standard error of `mean` across particles.
    pub mean_se: [[f64; 2]; 2],
}

/// Simulates `n_particles` independent particles of the finite-`L` system
/// for time `horizon`, starting in plane 1 at its fixed point.
pub fn finite_l_two_plane(
    params: &FiniteLParams,
    n_particles: usize,
    horizon: f64,
    seed: u64,
) -> Result<FiniteLMoments> {
    if n_particles == 0 || !(horizon > 0.0) {
        return Err(invalid("need n_particles >= 1 and horizon > 0"));
    }
    let systems = params.systems()?;
    let start = systems[1].fixed_point();
    let mut time_in = [0.0f64; 2];
    let mut per_particle: [Vec<[f64; 2]>; 2] = [Vec::new(), Vec::new()];
    let hist_dt = 0.02;
    for i in 0..n_particles {
        let mut rng = stream_rng(seed, i as u64, Stream::Ame);
        let (mut plane, mut z, mut t) = (Plane::One, start, 0.0);
        let mut acc = [[0.0f64; 3]; 2];
        while t < horizon {
            let sys = &systems[plane.index()];
            let u: f64 = rng.random();
            let target = -(-u).ln_1p();
            let hz = sys.hazard(z);
            let remaining = horizon - t;
            let (s, jumped) = if hz.value(remaining) < target {
                (remaining, false)
            } else {
                (hz.invert(target)?, true)
            };
            let pieces = (s / hist_dt).ceil().max(1.0) as usize;
            let h = s / pieces as f64;
            for k in 0..pieces {
                let w = sys.flow(z, (k as f64 + 0.5) * h);
                let a = &mut acc[plane.index()];
                a[0] += h;
                a[1] += h * w[0] / params.l;
                a[2] += h * w[1] / params.l;
            }
            z = sys.flow(z, s);
            t += s;
            if jumped {
                plane = plane.other();
            }
        }
        for p in 0..2 {
            time_in[p] += acc[p][0];
            if acc[p][0] > 0.0 {
                per_particle[p].push([acc[p][1] / acc[p][0], acc[p][2] / acc[p][0]]);
            }
        }
    }
    let total = time_in[0] + time_in[1];
    let mut mean = [[f64::NAN; 2]; 2];
    let mut mean_se = [[f64::NAN; 2]; 2];
    for p in 0..2 {
        for k in 0..2 {
            let xs: Vec<f64> = per_particle[p].iter().map(|v| v[k]).collect();
            let (m, se) = crate::stats::mean_se(&xs);
            mean[p][k] = m;
            mean_se[p][k] = se;
        }
    }
    Ok(FiniteLMoments {
        occupancy: [time_in[0] / total, time_in[1] / total],
        mean,
        mean_se,
    })
}
