//! Trajectories and the curve fits run over them.
//!
//! The quasi-stationary phase of a run traces a curve in the
//! `(N1/n, N10/(n L))` plane that is well described by `A x(1-x) - B`. Its
//! roots are the densities at which the process disconnects.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::RunResult;
use crate::error::{invalid, Error, Result};
use crate::graph::{OpinionGraph, TripleCounts};

/// One sampled state of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub updates: u64,
    pub time: f64,
    pub n1: u64,
    pub n10: u64,
    pub n11: u64,
    pub n00: u64,
    pub dmax: u64,
    pub triples: Option<TripleCounts>,
}

impl Row {
    pub fn capture(g: &OpinionGraph, updates: u64, time: f64, with_triples: bool) -> Row {
        let c = g.pair_counts();
        Row {
            updates,
            time,
            n1: c.n1,
            n10: c.n10,
            n11: c.n11,
            n00: c.n00,
            dmax: g.max_degree() as u64,
            triples: with_triples.then(|| g.triple_counts()),
        }
    }
}

const CSV_HEADER: &str = "updates,time,N1,N10,N11,N00,Dmax";
const CSV_TRIPLES: &str = ",N100,N101,N110,N010";

/// Time series of a run, in recording order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub rows: Vec<Row>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&Row> {
        self.rows.last()
    }

    /// Checks ordering and the pair-count identity across rows.
    ///
    /// Rows recorded on a time grid may share an update count, so only
    /// `(updates, time)` is required to increase.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.rows.first() else {
            return Ok(());
        };
        let total = first.n11 + 2 * first.n10 + first.n00;
        for w in self.rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if b.updates < a.updates || (b.updates == a.updates && b.time <= a.time) {
                return Err(Error::Contract(format!(
                    "rows out of order at update {}",
                    b.updates
                )));
            }
        }
        if let Some(r) = self
            .rows
            .iter()
            .find(|r| r.n11 + 2 * r.n10 + r.n00 != total)
        {
            return Err(Error::Contract(format!(
                "pair identity broken at update {}",
                r.updates
            )));
        }
        Ok(())
    }

    /// Arch coordinates of every row after dropping the leading
    /// `burn_in` fraction.
    pub fn arch_points(&self, n: usize, l: f64, scale: ArchScale, burn_in: f64) -> Vec<(f64, f64)> {
        let skip = (self.rows.len() as f64 * burn_in).floor() as usize;
        self.rows[skip.min(self.rows.len())..]
            .iter()
            .map(|r| scale.point(r, n, l))
            .collect()
    }

    /// `(N1/n, N100/(n L^2))` for rows that carry triple counts.
    pub fn cubic_points(&self, n: usize, l: f64, burn_in: f64) -> Vec<(f64, f64)> {
        let skip = (self.rows.len() as f64 * burn_in).floor() as usize;
        self.rows[skip.min(self.rows.len())..]
            .iter()
            .filter_map(|r| {
                r.triples
                    .map(|t| (r.n1 as f64 / n as f64, t.n100() as f64 / (n as f64 * l * l)))
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let triples = self.rows.iter().any(|r| r.triples.is_some());
        write!(w, "{CSV_HEADER}")?;
        if triples {
            write!(w, "{CSV_TRIPLES}")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            write!(
                w,
                "{},{},{},{},{},{},{}",
                r.updates, r.time, r.n1, r.n10, r.n11, r.n00, r.dmax
            )?;
            if triples {
                let t = r.triples.unwrap_or_default();
                write!(w, ",{},{},{},{}", t.n100(), t.n101(), t.n110(), t.n010())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Trajectory::write_csv`]. Triple columns
    /// restore only `N100, N101, N110, N010` and their reversals.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Trajectory> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })??;
        let triples = if header == CSV_HEADER {
            false
        } else if header == format!("{CSV_HEADER}{CSV_TRIPLES}") {
            true
        } else {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unexpected header {header:?}"),
            });
        };
        let width = if triples { 11 } else { 7 };
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {width} fields, got {}", fields.len()),
                });
            }
            let int = |k: usize| -> Result<u64> {
                fields[k].parse().map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("field {k}: {e}"),
                })
            };
            let time: f64 = fields[1].parse().map_err(|e| Error::Parse {
                line: lineno,
                msg: format!("time: {e}"),
            })?;
            let t = if triples {
                let mut t = TripleCounts::default();
                let (n100, n101, n110, n010) = (int(7)?, int(8)?, int(9)?, int(10)?);
                t.add(1, 0, 0, n100);
                t.add(0, 0, 1, n100);
                t.add(1, 0, 1, n101);
                t.add(1, 1, 0, n110);
                t.add(0, 1, 1, n110);
                t.add(0, 1, 0, n010);
                Some(t)
            } else {
                None
            };
            rows.push(Row {
                updates: int(0)?,
                time,
                n1: int(2)?,
                n10: int(3)?,
                n11: int(4)?,
                n00: int(5)?,
                dmax: int(6)?,
                triples: t,
            });
        }
        Ok(Trajectory { rows })
    }
}

/// Vertical normalization of the arch plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchScale {
    /// `y = 2 N10 / (n L)`: fraction of edges that are discordant.
    #[default]
    EdgeFraction,
    /// `y = N10 / (n L)`.
    PerVertexDegree,
}

impl ArchScale {
    pub fn point(self, r: &Row, n: usize, l: f64) -> (f64, f64) {
        let x = r.n1 as f64 / n as f64;
        let y = r.n10 as f64 / (n as f64 * l);
        match self {
            ArchScale::EdgeFraction => (x, 2.0 * y),
            ArchScale::PerVertexDegree => (x, y),
        }
    }
}

/// Least-squares fit of `y = A x(1-x) - B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchFit {
    pub a: f64,
    pub b: f64,
    /// `(r-, r+)` when `0 <= B/A <= 1/4`.
    pub roots: Option<(f64, f64)>,
    pub rms: f64,
    pub points: usize,
}

pub fn fit_arch(points: &[(f64, f64)]) -> Result<ArchFit> {
    if points.len() < 3 {
        return Err(invalid(format!(
            "arch fit needs 3 points, got {}",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let u: Vec<f64> = points.iter().map(|&(x, _)| x * (1.0 - x)).collect();
    let u_mean = u.iter().sum::<f64>() / m;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut suu, mut suy) = (0.0, 0.0);
    for (ui, &(_, y)) in u.iter().zip(points) {
        suu += (ui - u_mean) * (ui - u_mean);
        suy += (ui - u_mean) * (y - y_mean);
    }
    let scale = u.iter().map(|v| v * v).sum::<f64>();
    if suu <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateFit("x(1-x) is constant over the points"));
    }
    let a = suy / suu;
    let b = a * u_mean - y_mean;
    let rms = (u
        .iter()
        .zip(points)
        .map(|(ui, &(_, y))| (a * ui - b - y).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(ArchFit {
        a,
        b,
        roots: arch_roots(a, b),
        rms,
        points: points.len(),
    })
}

/// Roots of `A x(1-x) = B` inside `[0, 1]`.
pub fn arch_roots(a: f64, b: f64) -> Option<(f64, f64)> {
    if a == 0.0 {
        return None;
    }
    let ratio = b / a;
    if !(0.0..=0.25).contains(&ratio) {
        return None;
    }
    let h = (0.25 - ratio).sqrt();
    Some((0.5 - h, 0.5 + h))
}

/// Unconstrained least-squares cubic `c0 + c1 x + c2 x^2 + c3 x^3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicFit {
    pub coeffs: [f64; 4],
    /// Sign-change roots in `[0, 1]`, ascending.
    pub roots: Vec<f64>,
    pub rms: f64,
}

impl CubicFit {
    pub fn eval(&self, x: f64) -> f64 {
        let c = &self.coeffs;
        ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
    }
}

pub fn fit_cubic(points: &[(f64, f64)]) -> Result<CubicFit> {
    if points.len() < 4 {
        return Err(invalid(format!(
            "cubic fit needs 4 points, got {}",
            points.len()
        )));
    }
    let m = points.len();
    let design = DMatrix::from_fn(m, 4, |i, j| points[i].0.powi(j as i32));
    let rhs = DVector::from_iterator(m, points.iter().map(|p| p.1));
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.rank(smax * 1e-12) < 4 {
        return Err(Error::DegenerateFit("fewer than 4 distinct x values"));
    }
    let sol = svd
        .solve(&rhs, smax * 1e-12)
        .map_err(|_| Error::DegenerateFit("cubic least squares failed"))?;
    let coeffs = [sol[0], sol[1], sol[2], sol[3]];
    let mut fit = CubicFit {
        coeffs,
        roots: Vec::new(),
        rms: 0.0,
    };
    fit.rms = (points
        .iter()
        .map(|&(x, y)| (fit.eval(x) - y).powi(2))
        .sum::<f64>()
        / m as f64)
        .sqrt();
    let y_scale = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    if coeffs.iter().all(|c| c.abs() <= 1e-13 * y_scale) {
        // zero polynomial: every point is a root, none is isolated
        return Ok(fit);
    }
    fit.roots = cubic_roots_in_unit(&fit);
    Ok(fit)
}

fn cubic_roots_in_unit(fit: &CubicFit) -> Vec<f64> {
    let c = fit.coeffs;
    // Split [0,1] at the critical points so each piece is monotone.
    let mut cuts = vec![0.0, 1.0];
    let (qa, qb, qc) = (3.0 * c[3], 2.0 * c[2], c[1]);
    if qa.abs() > 0.0 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let s = disc.sqrt();
            cuts.push((-qb - s) / (2.0 * qa));
            cuts.push((-qb + s) / (2.0 * qa));
        }
    } else if qb.abs() > 0.0 {
        cuts.push(-qc / qb);
    }
    cuts.retain(|x| (0.0..=1.0).contains(x));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut roots: Vec<f64> = Vec::new();
    for w in cuts.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (fit.eval(lo), fit.eval(hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if fit.eval(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    if fit.eval(1.0) == 0.0 {
        roots.push(1.0);
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    roots
}

/// Result of locating `nu_c(p)` on a grid of arches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "nu")]
pub enum NuCritical {
    Found(f64),
    /// No arch on the grid contains `p`.
    Censored,
}

/// Smallest `nu` whose arch `(a(nu), 1 - a(nu))` contains `p`.
///
/// `grid` holds `(nu, a(nu))` in increasing `nu`, with `None` where no arch
/// was found. When the previous grid point has an arch that does not yet
/// contain `p`, the crossing is interpolated linearly in `a`.
pub fn arch_endpoints_to_nu_c(p: f64, grid: &[(f64, Option<f64>)]) -> Result<NuCritical> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("density {p} outside [0, 1]")));
    }
    if grid.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(invalid("nu grid must be strictly increasing"));
    }
    let m = p.min(1.0 - p);
    let Some(i) = grid.iter().position(|&(_, a)| a.is_some_and(|a| a < m)) else {
        return Ok(NuCritical::Censored);
    };
    let (nu, a) = (grid[i].0, grid[i].1.unwrap());
    if i == 0 {
        return Ok(NuCritical::Found(nu));
    }
    match grid[i - 1] {
        (nu0, Some(a0)) => {
            let frac = (a0 - m) / (a0 - a);
            Ok(NuCritical::Found(nu0 + frac * (nu - nu0)))
        }
        _ => Ok(NuCritical::Found(nu)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Rapid,
    Prolonged,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub c_rapid: f64,
    pub c_prolonged: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            c_rapid: 10.0,
            c_prolonged: 200.0,
        }
    }
}

/// Rapid: absorbed within `c_rapid n L ln(n L)` updates. Prolonged: still
/// discordant after at least `c_prolonged n L` updates.
pub fn classify_run(result: &RunResult, cfg: ClassifyConfig) -> Regime {
    let nl = result.n as f64 * result.l as f64;
    if result.absorbed {
        if (result.updates as f64) <= cfg.c_rapid * nl * nl.ln() {
            return Regime::Rapid;
        }
    } else if result.updates as f64 >= cfg.c_prolonged * nl {
        return Regime::Prolonged;
    }
    Regime::Indeterminate
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("KS test needs two nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    Ok(KsResult {
        d,
        p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d),
    })
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Energy-distance two-sample permutation test on points in the plane.
/// Costs O((|a|+|b|)^2) memory, so callers should subsample large inputs.
pub fn energy_test<R: Rng + ?Sized>(
    a: &[[f64; 2]],
    b: &[[f64; 2]],
    permutations: usize,
    rng: &mut R,
) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(invalid("energy test needs at least 2 points per sample"));
    }
    let pts: Vec<[f64; 2]> = a.iter().chain(b).copied().collect();
    let n = pts.len();
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let na = a.len();
    let stat = |labels: &[usize]| -> f64 {
        let (x, y) = labels.split_at(na);
        let mut xy = 0.0;
        for &i in x {
            for &j in y {
                xy += dist[i * n + j];
            }
        }
        let within = |s: &[usize]| {
            let mut t = 0.0;
            for &i in s {
                for &j in s {
                    t += dist[i * n + j];
                }
            }
            t / (s.len() * s.len()) as f64
        };
        2.0 * xy / (x.len() * y.len()) as f64 - within(x) - within(y)
    };
    let mut labels: Vec<usize> = (0..n).collect();
    let observed = stat(&labels);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        labels.shuffle(rng);
        if stat(&labels) >= observed {
            exceed += 1;
        }
    }
    Ok((exceed + 1) as f64 / (permutations + 1) as f64)
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn synth(a: f64, b: f64) -> Vec<(f64, f64)> {
        (0..41)
            .map(|i| {
                let x = 0.05 + 0.9 * i as f64 / 40.0;
                (x, a * x * (1.0 - x) - b)
            })
            .collect()
    }

    #[test]
    fn arch_recovers_generating_quadratic() {
        let fit = fit_arch(&synth(2.0, 0.1)).unwrap();
        assert!((fit.a - 2.0).abs() < 1e-10 && (fit.b - 0.1).abs() < 1e-10);
        let (lo, hi) = fit.roots.unwrap();
        assert!((lo - 0.052_786_404_5).abs() < 1e-10, "{lo}");
        assert!((hi - 0.947_213_595_5).abs() < 1e-10, "{hi}");
        for r in [lo, hi] {
            assert!((fit.a * r * (1.0 - r) - fit.b).abs() < 1e-12);
        }
    }

    #[test]
    fn arch_degenerate_and_rootless() {
        let same = vec![(0.3, 0.1); 5];
        assert!(matches!(fit_arch(&same), Err(Error::DegenerateFit(_))));
        assert!(fit_arch(&[(0.1, 0.0), (0.2, 0.1)]).is_err());
        let low = fit_arch(&synth(1.0, 0.3)).unwrap();
        assert_eq!(low.roots, None);
    }

    #[test]
    fn cubic_recovers_and_finds_roots() {
        // (x - 0.1)(x - 0.5)(x - 0.9)
        let pts: Vec<(f64, f64)> = (0..30)
            .map(|i| {
                let x = i as f64 / 29.0;
                (x, (x - 0.1) * (x - 0.5) * (x - 0.9))
            })
            .collect();
        let fit = fit_cubic(&pts).unwrap();
        assert!((fit.coeffs[3] - 1.0).abs() < 1e-9);
        assert!((fit.coeffs[0] + 0.045).abs() < 1e-9);
        assert_eq!(fit.roots.len(), 3);
        for (r, want) in fit.roots.iter().zip([0.1, 0.5, 0.9]) {
            assert!((r - want).abs() < 1e-9);
        }
    }

    #[test]
    fn cubic_zero_data_has_no_roots() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 / 9.0, 0.0)).collect();
        let fit = fit_cubic(&pts).unwrap();
        assert!(fit.coeffs.iter().all(|c| *c == 0.0));
        assert!(fit.roots.is_empty());
        assert!(fit_cubic(&[(0.1, 1.0), (0.2, 1.0), (0.1, 1.0), (0.2, 2.0)]).is_err());
    }

    #[test]
    fn nu_c_scan_rules() {
        let grid = [(1.0, Some(0.3)), (2.5, Some(0.074))];
        assert_eq!(
            arch_endpoints_to_nu_c(0.5, &grid).unwrap(),
            NuCritical::Found(1.0)
        );
        let NuCritical::Found(v) = arch_endpoints_to_nu_c(0.2, &grid).unwrap() else {
            panic!("expected a crossing");
        };
        assert!((v - (1.0 + 1.5 * 0.1 / 0.226)).abs() < 1e-12);
        assert!(v > 1.0 && v < 2.5);
        assert_eq!(
            arch_endpoints_to_nu_c(0.99, &grid).unwrap(),
            NuCritical::Censored
        );
        let gap = [(0.4, None), (0.6, Some(0.45)), (0.8, Some(0.2))];
        assert_eq!(
            arch_endpoints_to_nu_c(0.5, &gap).unwrap(),
            NuCritical::Found(0.6)
        );
        assert!(arch_endpoints_to_nu_c(0.5, &[(1.0, None), (0.5, None)]).is_err());
    }

    #[test]
    fn ks_detects_shift_and_accepts_same() {
        let mut rng = stream_rng(1, 0, Stream::Aux);
        let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() + 0.1).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
        assert!(ks_two_sample(&a, &c).unwrap().p_value < 1e-6);
        assert!((kolmogorov_q(1.36) - 0.049).abs() < 0.002);
    }

    #[test]
    fn energy_test_detects_shift() {
        let mut rng = stream_rng(2, 0, Stream::Aux);
        let mut draw = |shift: f64| -> Vec<[f64; 2]> {
            (0..150)
                .map(|_| [rng.random::<f64>() + shift, rng.random::<f64>()])
                .collect()
        };
        let (a, b, c) = (draw(0.0), draw(0.0), draw(0.3));
        let mut prng = stream_rng(3, 0, Stream::Aux);
        assert!(energy_test(&a, &b, 199, &mut prng).unwrap() > 0.01);
        assert!(energy_test(&a, &c, 199, &mut prng).unwrap() <= 0.01);
    }

    #[test]
    fn csv_round_trip() {
        let g = OpinionGraph::from_edges(3, &[(0, 1), (1, 2)], &[1, 0, 0]).unwrap();
        let traj = Trajectory {
            rows: vec![
                Row::capture(&g, 0, 0.0, true),
                Row::capture(&g, 5, 1.25, true),
            ],
        };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("updates,time,N1,N10,N11,N00,Dmax,N100,N101,N110,N010\n"));
        let back = Trajectory::read_csv(&buf[..]).unwrap();
        assert_eq!(back, traj);
        assert!(Trajectory::read_csv("bogus\n".as_bytes()).is_err());
    }
}
