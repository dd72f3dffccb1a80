//! Brute-force checks of the pair-count drift equations and the triple
//! counts, plus a thinning sampler for the two-plane jump times.
//!
//! Every oriented discordant edge `(x, y)` acts at rate 1: `x` adopts the
//! opinion of `y` with probability `nu/L`, otherwise `x` drops `y` and
//! connects to a new target. Writing `a = 1 - nu/L`, `p = N1/n` and `N_ijk`
//! for ordered path counts, the drift is
//!
//! ```text
//!   dN10/dt = -a N10 + (1-a) [-2 N10 + N100 - N010 + N110 - N101]
//! dN11/dt/2 = a p N10 + (1-a) [N10 + N101 - N011]
//! dN00/dt/2 = a (1-p) N10 + (1-a) [N10 + N010 - N100]
//! ```
//!
//! when the rewiring target is a fresh vertex of state 1 with probability
//! `p`. The commonly quoted short form replaces `-a N10 + (1-a)(-2 N10)`
//! by `-N10` and `a p`, `a (1-p)` by `p`, `1-p`; it drops terms of size
//! `(nu/L) N10`.

use std::path::Path;

use num_rational::Ratio;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::ame::{PlaneSystem, JUMP_HORIZON};
use crate::error::{invalid, Error, Result};
use crate::graph::{OpinionGraph, PairCounts, TripleCounts, Vertex};
use crate::io::{read_snapshot, to_versioned_json, write_snapshot};
use crate::rng::{stream_rng, SimRng, Stream};

pub type Q = Ratio<i128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// New neighbor is a fresh vertex, in state 1 with probability `N1/n`.
    IdealizedTarget,
    /// New neighbor is uniform over vertices other than `x` and its
    /// current neighbors, as in the simulator.
    ExcludeNeighbors,
}

/// `(dN10, dN11/2, dN00/2)`.
pub type Drift = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub mode: TargetMode,
    pub formula: Drift,
    pub enumerated: Drift,
    /// Short form without the `(nu/L) N10` terms.
    pub short_formula: Drift,
    /// `formula - short_formula`.
    pub omitted: Drift,
    /// `max |enumerated - formula| / max |formula|` (absolute when the
    /// formula vanishes).
    pub max_rel_gap: f64,
}

/// Exact counterpart of [`DriftReport`] for the idealized target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDrift {
    pub formula: [Q; 3],
    pub enumerated: [Q; 3],
    pub short_formula: [Q; 3],
}

impl ExactDrift {
    pub fn matches(&self) -> bool {
        self.formula == self.enumerated
    }
}

/// Net change of `(N10, N11, N00)` from one event, with `N11`, `N00`
/// ordered and `N10` unordered.
type Delta = [i64; 3];

/// Weight of one event relative to the total rate of its oriented edge.
enum Weight {
    Vote,
    /// `(1 - nu/L) * num / den`.
    Rewire {
        num: u64,
        den: u64,
    },
}

fn delta(before: &PairCounts, after: &PairCounts) -> Delta {
    [
        after.n10 as i64 - before.n10 as i64,
        after.n11 as i64 - before.n11 as i64,
        after.n00 as i64 - before.n00 as i64,
    ]
}

/// Pair counts of a graph rebuilt from scratch.
fn fresh_counts(n: usize, edges: &[(Vertex, Vertex)], opinions: &[u8]) -> Result<PairCounts> {
    Ok(OpinionGraph::from_edges(n, edges, opinions)?.recount())
}

/// Lists every event with its weight and its effect, each effect obtained
/// by rebuilding the modified graph and recounting.
fn enumerate_events(g: &OpinionGraph, mode: TargetMode) -> Result<Vec<(Weight, Delta)>> {
    let n = g.n();
    let edges = g.edges();
    let base = g.recount();
    let opinions = g.opinions().to_vec();
    let n1 = g.members(1).len() as u64;
    let mut out = Vec::new();
    for &(u, v) in &edges {
        if opinions[u as usize] == opinions[v as usize] {
            continue;
        }
        for (x, y) in [(u, v), (v, u)] {
            let mut ops = opinions.clone();
            ops[x as usize] = ops[y as usize];
            out.push((Weight::Vote, delta(&base, &fresh_counts(n, &edges, &ops)?)));

            let kept: Vec<(Vertex, Vertex)> =
                edges.iter().copied().filter(|&e| e != (u, v)).collect();
            match mode {
                TargetMode::IdealizedTarget => {
                    for s in [0u8, 1] {
                        let mut e2 = kept.clone();
                        e2.push((x, n as Vertex));
                        let mut o2 = opinions.clone();
                        o2.push(s);
                        let after = fresh_counts(n + 1, &e2, &o2)?;
                        let num = if s == 1 { n1 } else { n as u64 - n1 };
                        if num > 0 {
                            out.push((Weight::Rewire { num, den: n as u64 }, delta(&base, &after)));
                        }
                    }
                }
                TargetMode::ExcludeNeighbors => {
                    let admissible: Vec<Vertex> = (0..n as Vertex)
                        .filter(|&z| z != x && !g.has_edge(x, z))
                        .collect();
                    let den = admissible.len() as u64;
                    for s in [0u8, 1] {
                        let class: Vec<Vertex> = admissible
                            .iter()
                            .copied()
                            .filter(|&z| opinions[z as usize] == s)
                            .collect();
                        let Some(&z) = class.first() else { continue };
                        let mut e2 = kept.clone();
                        e2.push((x, z));
                        let after = fresh_counts(n, &e2, &opinions)?;
                        out.push((
                            Weight::Rewire {
                                num: class.len() as u64,
                                den,
                            },
                            delta(&base, &after),
                        ));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn formula_f64(pc: &PairCounts, t: &TripleCounts, r: f64, p: f64) -> (Drift, Drift) {
    let a = 1.0 - r;
    let n10 = pc.n10 as f64;
    let [n100, n010, n110, n101, n011] =
        [t.n100(), t.n010(), t.n110(), t.n101(), t.n011()].map(|v| v as f64);
    let full = [
        -a * n10 + r * (-2.0 * n10 + n100 - n010 + n110 - n101),
        a * p * n10 + r * (n10 + n101 - n011),
        a * (1.0 - p) * n10 + r * (n10 + n010 - n100),
    ];
    let short = [
        -n10 + r * (n100 - n010 + n110 - n101),
        p * n10 + r * (n101 - n011),
        (1.0 - p) * n10 + r * (n010 - n100),
    ];
    (full, short)
}

fn formula_exact(pc: &PairCounts, t: &TripleCounts, r: Q, p: Q) -> ([Q; 3], [Q; 3]) {
    let one = Q::from_integer(1);
    let a = one - r;
    let z = |v: u64| Q::from_integer(v as i128);
    let n10 = z(pc.n10);
    let (n100, n010, n110, n101, n011) = (
        z(t.n100()),
        z(t.n010()),
        z(t.n110()),
        z(t.n101()),
        z(t.n011()),
    );
    let two = Q::from_integer(2);
    let full = [
        -a * n10 + r * (-two * n10 + n100 - n010 + n110 - n101),
        a * p * n10 + r * (n10 + n101 - n011),
        a * (one - p) * n10 + r * (n10 + n010 - n100),
    ];
    let short = [
        -n10 + r * (n100 - n010 + n110 - n101),
        p * n10 + r * (n101 - n011),
        (one - p) * n10 + r * (n010 - n100),
    ];
    (full, short)
}

fn rel_gap(a: &Drift, b: &Drift) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Drift of `(N10, N11/2, N00/2)` by enumerating every event, against the
/// closed-form drift, in floating point.
pub fn enumerate_drift(g: &OpinionGraph, nu: f64, l: f64, mode: TargetMode) -> Result<DriftReport> {
    if !(l > 0.0) || !(nu >= 0.0) || nu > l {
        return Err(invalid("need L > 0 and 0 <= nu <= L"));
    }
    if g.n() == 0 {
        return Err(invalid("empty graph"));
    }
    let r = nu / l;
    let mut enumerated = [0.0; 3];
    for (w, d) in enumerate_events(g, mode)? {
        let rate = match w {
            Weight::Vote => r,
            Weight::Rewire { num, den } => (1.0 - r) * num as f64 / den as f64,
        };
        enumerated[0] += rate * d[0] as f64;
        enumerated[1] += rate * d[1] as f64 / 2.0;
        enumerated[2] += rate * d[2] as f64 / 2.0;
    }
    let p = g.members(1).len() as f64 / g.n() as f64;
    let (formula, short_formula) = formula_f64(&g.pair_counts(), &brute_force_triples(g), r, p);
    let omitted = [0, 1, 2].map(|i| formula[i] - short_formula[i]);
    Ok(DriftReport {
        mode,
        max_rel_gap: rel_gap(&enumerated, &formula),
        formula,
        enumerated,
        short_formula,
        omitted,
    })
}

/// Exact rational enumeration with the idealized target.
pub fn enumerate_drift_exact(g: &OpinionGraph, nu: Q, l: Q) -> Result<ExactDrift> {
    let zero = Q::from_integer(0);
    if l <= zero || nu < zero || nu > l {
        return Err(invalid("need L > 0 and 0 <= nu <= L"));
    }
    if g.n() == 0 {
        return Err(invalid("empty graph"));
    }
    let r = nu / l;
    let one = Q::from_integer(1);
    let half = Q::new(1, 2);
    let mut enumerated = [zero; 3];
    for (w, d) in enumerate_events(g, TargetMode::IdealizedTarget)? {
        let rate = match w {
            Weight::Vote => r,
            Weight::Rewire { num, den } => (one - r) * Q::new(num as i128, den as i128),
        };
        enumerated[0] += rate * Q::from_integer(d[0] as i128);
        enumerated[1] += rate * Q::from_integer(d[1] as i128) * half;
        enumerated[2] += rate * Q::from_integer(d[2] as i128) * half;
    }
    let p = Q::new(g.members(1).len() as i128, g.n() as i128);
    let (formula, short_formula) = formula_exact(&g.pair_counts(), &brute_force_triples(g), r, p);
    Ok(ExactDrift {
        formula,
        enumerated,
        short_formula,
    })
}

/// `|2 dN10 + dN11 + dN00| < 1e-9` for the formula and the enumeration.
pub fn verify_identity_sum(report: &DriftReport) -> bool {
    let s = |d: &Drift| (2.0 * d[0] + 2.0 * d[1] + 2.0 * d[2]).abs() < 1e-9;
    s(&report.formula) && s(&report.enumerated)
}

/// Ordered path counts `N_ijk` from all vertex triples, `O(n^3)`.
pub fn brute_force_triples(g: &OpinionGraph) -> TripleCounts {
    let n = g.n() as Vertex;
    let mut counts = TripleCounts::default();
    for a in 0..n {
        for b in 0..n {
            if a == b || !g.has_edge(a, b) {
                continue;
            }
            for c in 0..n {
                if c == a || c == b || !g.has_edge(b, c) {
                    continue;
                }
                counts.add(g.opinion(a), g.opinion(b), g.opinion(c), 1);
            }
        }
    }
    counts
}

/// First jump time from `z0` by thinning a Poisson process whose rate is
/// the supremum of the jump rate along the flow.
pub fn thinning_jump_time(sys: &PlaneSystem, z0: [f64; 2], rng: &mut SimRng) -> Result<f64> {
    let bound = sys.hazard(z0).rate_bound() * (1.0 + 1e-12);
    if !(bound > 0.0) {
        return Err(Error::Censored {
            horizon: JUMP_HORIZON,
        });
    }
    let exp = Exp::new(bound).map_err(|e| invalid(e.to_string()))?;
    let mut t = 0.0;
    loop {
        t += exp.sample(rng);
        if t > JUMP_HORIZON {
            return Err(Error::Censored {
                horizon: JUMP_HORIZON,
            });
        }
        let rate = sys.rate(sys.flow(z0, t));
        if rate > bound {
            return Err(Error::Contract(format!(
                "rate {rate} exceeds thinning bound {bound}"
            )));
        }
        if rng.random::<f64>() * bound < rate {
            return Ok(t);
        }
    }
}

/// Fixture parameters: `nu` and `L` as exact fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureParams {
    pub nu: (i64, i64),
    #[serde(rename = "L")]
    pub l: i64,
}

impl FixtureParams {
    pub fn nu_q(&self) -> Q {
        Q::new(self.nu.0 as i128, self.nu.1 as i128)
    }

    pub fn nu_f64(&self) -> f64 {
        self.nu.0 as f64 / self.nu.1 as f64
    }
}

/// Random graph with `4 <= n <= max_n`, a mixed opinion profile and a
/// rational `nu <= L`.
pub fn random_fixture(
    seed: u64,
    index: u64,
    max_n: usize,
) -> Result<(OpinionGraph, FixtureParams)> {
    if max_n < 4 {
        return Err(invalid("max_n must be >= 4"));
    }
    let mut rng = stream_rng(seed, index, Stream::Fixtures);
    let n = rng.random_range(4..=max_n);
    let mean = rng.random_range(1.5..=(n as f64 / 2.0).clamp(1.5, 8.0));
    let mut g = OpinionGraph::erdos_renyi(n, mean, &mut rng)?;
    let p = rng.random_range(0.2..0.8);
    let ops: Vec<u8> = (0..n).map(|_| rng.random_bool(p) as u8).collect();
    g.set_opinions(&ops);
    let l = (mean.round() as i64).max(1);
    let den = 4;
    let nu = (rng.random_range(1..=(4 * l).min(12)), den);
    Ok((g, FixtureParams { nu, l }))
}

/// Expected-drift sidecar of a fixture snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSidecar {
    pub params: FixtureParams,
    /// Exact idealized-target drift as `"num/den"` strings.
    pub expected: [String; 3],
    pub expected_f64: Drift,
}

/// Writes `count` fixtures as `fixture_XXX.graph` plus
/// `fixture_XXX.json`.
pub fn write_fixture_corpus(dir: &Path, count: u64, seed: u64, max_n: usize) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for i in 0..count {
        let (g, params) = random_fixture(seed, i, max_n)?;
        let exact = enumerate_drift_exact(&g, params.nu_q(), Q::from_integer(params.l as i128))?;
        let sidecar = FixtureSidecar {
            params,
            expected: exact.enumerated.map(|q| q.to_string()),
            expected_f64: exact.enumerated.map(q_to_f64),
        };
        let stem = dir.join(format!("fixture_{i:03}"));
        write_snapshot(
            &g,
            std::io::BufWriter::new(std::fs::File::create(stem.with_extension("graph"))?),
        )?;
        std::fs::write(
            stem.with_extension("json"),
            to_versioned_json(&sidecar)? + "\n",
        )?;
    }
    Ok(())
}

pub fn q_to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn parse_q(s: &str) -> Result<Q> {
    let bad = || invalid(format!("bad rational {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (i128, i128) = (
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            );
            if b == 0 {
                return Err(bad());
            }
            Ok(Q::new(a, b))
        }
        None => Ok(Q::from_integer(s.trim().parse().map_err(|_| bad())?)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureOutcome {
    pub name: String,
    /// Enumeration equals the closed form exactly.
    pub formula_exact: bool,
    /// Enumeration equals the stored sidecar exactly.
    pub sidecar_exact: bool,
    pub identity_sum: bool,
}

impl FixtureOutcome {
    pub fn passed(&self) -> bool {
        self.formula_exact && self.sidecar_exact && self.identity_sum
    }
}

/// Re-checks every `*.graph` in `dir` against its `*.json` sidecar and the
/// closed form. Results are sorted by file name.
pub fn check_fixture_corpus(dir: &Path) -> Result<Vec<FixtureOutcome>> {
    let mut graphs: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "graph"))
        .collect();
    graphs.sort();
    let mut out = Vec::with_capacity(graphs.len());
    for path in graphs {
        let g = read_snapshot(std::io::BufReader::new(std::fs::File::open(&path)?))?;
        let side: FixtureSidecar =
            serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
        let exact = enumerate_drift_exact(
            &g,
            side.params.nu_q(),
            Q::from_integer(side.params.l as i128),
        )?;
        let expected = [
            parse_q(&side.expected[0])?,
            parse_q(&side.expected[1])?,
            parse_q(&side.expected[2])?,
        ];
        let report = enumerate_drift(
            &g,
            side.params.nu_f64(),
            side.params.l as f64,
            TargetMode::IdealizedTarget,
        )?;
        out.push(FixtureOutcome {
            name: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            formula_exact: exact.matches(),
            sidecar_exact: exact.enumerated == expected,
            identity_sum: verify_identity_sum(&report),
        });
    }
    Ok(out)
}
