//! Connected-cluster expansion of Heisenberg-evolved local observables.
//!
//! A cluster is a nonempty multiset of interaction terms, split across the
//! plan's steps, whose distinct terms together with the observable's support
//! form a connected super-interaction subgraph. Summing nested-commutator
//! chains over all clusters of total size at most M reproduces U†OU up to a
//! truncation error that decays geometrically below the short-time radius.

use crate::error::{Error, Result};
use crate::hamiltonian::{short_time_radius, EvolutionPlan, InteractionGraph};
use crate::pauli::{PauliSum, PauliTerm};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    /// Tuning constant for the constant-time truncation branch.
    pub kappa: f64,
    /// Hard cap on the truncation order actually evaluated.
    pub m_cap: u32,
    /// Abort enumeration past this many clusters.
    pub max_clusters: u64,
    /// Abort evaluation when 4^(lightcone qubits) exceeds this.
    pub max_predicted_terms: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            kappa: 0.5,
            m_cap: 8,
            max_clusters: 2_000_000,
            max_predicted_terms: 20_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    ShortTime,
    ConstantTime,
}

/// Truncation order M together with the quantities that produced it.
/// `m_uncapped` keeps the raw formula value (saturated at u64::MAX) so
/// reports can show how hard the cap bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationPlan {
    pub eps_prime: f64,
    pub m: u32,
    pub m_uncapped: u64,
    pub regime: Regime,
    pub kappa: f64,
    pub t_star: f64,
}

impl TruncationPlan {
    /// Fixed order chosen by hand, bypassing the formula.
    pub fn manual(m: u32) -> TruncationPlan {
        TruncationPlan {
            eps_prime: f64::NAN,
            m,
            m_uncapped: m as u64,
            regime: Regime::ShortTime,
            kappa: 0.5,
            t_star: f64::INFINITY,
        }
    }
}

fn saturating_ceil(v: f64) -> u64 {
    if !v.is_finite() || v >= u64::MAX as f64 {
        u64::MAX
    } else if v <= 0.0 {
        0
    } else {
        v.ceil() as u64
    }
}

/// Short-time tail: y^(K(M+1)) / (1-y)^K with y = 2teKd.
pub fn short_time_residual(y: f64, k: u32, m: u32) -> f64 {
    y.powi((k * (m + 1)) as i32) / (1.0 - y).powi(k as i32)
}

/// Constant-time tail: (e^x - 1) e^(-M/e^x) / (1-kappa)^K with
/// x = pi t e K d / kappa.
pub fn constant_time_residual(x: f64, k: u32, kappa: f64, m: f64) -> f64 {
    let ex = x.exp();
    (ex - 1.0) * (-m / ex).exp() / (1.0 - kappa).powi(k as i32)
}

/// Smallest truncation order whose tail bound is below `eps_prime`, chosen
/// by the regime of t against the short-time radius, then clamped to
/// [1, cfg.m_cap].
pub fn truncation_order(
    plan: &EvolutionPlan,
    graph: &InteractionGraph,
    eps_prime: f64,
    cfg: &ClusterConfig,
) -> Result<TruncationPlan> {
    if !(eps_prime > 0.0 && eps_prime < 1.0) {
        return Err(Error::Invalid {
            what: "eps_prime",
            message: format!("{eps_prime} outside (0, 1)"),
        });
    }
    if !(cfg.kappa > 0.0 && cfg.kappa < 1.0) {
        return Err(Error::Invalid {
            what: "kappa",
            message: format!("{} outside (0, 1)", cfg.kappa),
        });
    }
    let k = plan.k() as u32;
    // A term always overlaps itself, so the expansion degree floors at 1.
    let d = graph.max_degree.max(1);
    let t = plan.t_max();
    let t_star = short_time_radius(k as usize, d);
    let ekd = std::f64::consts::E * (k as f64) * (d as f64);
    let (regime, raw) = if t < t_star {
        let y = 2.0 * t * ekd;
        let raw = if y <= 0.0 {
            1.0
        } else {
            let kf = k as f64;
            ((1.0 / eps_prime).ln() - kf * (1.0 - y).ln()) / (kf * (1.0 / y).ln())
        };
        (Regime::ShortTime, raw)
    } else {
        let x = std::f64::consts::PI * t * ekd / cfg.kappa;
        let ex = x.exp();
        let raw = ex * ((ex - 1.0) / ((1.0 - cfg.kappa).powi(k as i32) * eps_prime)).ln();
        (Regime::ConstantTime, raw)
    };
    let m_uncapped = saturating_ceil(raw).max(1);
    let m = m_uncapped.min(cfg.m_cap as u64).max(1) as u32;
    Ok(TruncationPlan {
        eps_prime,
        m,
        m_uncapped,
        regime,
        kappa: cfg.kappa,
        t_star,
    })
}

/// Tail bound for the plan at the already-chosen order `trunc.m`.
pub fn truncation_bound(
    trunc: &TruncationPlan,
    plan: &EvolutionPlan,
    graph: &InteractionGraph,
) -> f64 {
    let k = plan.k() as u32;
    let d = graph.max_degree.max(1);
    let ekd = std::f64::consts::E * (k as f64) * (d as f64);
    let t = plan.t_max();
    match trunc.regime {
        Regime::ShortTime => short_time_residual(2.0 * t * ekd, k, trunc.m),
        Regime::ConstantTime => constant_time_residual(
            std::f64::consts::PI * t * ekd / trunc.kappa,
            k,
            trunc.kappa,
            trunc.m as f64,
        ),
    }
}

/// Upper bound ceil(4^(K Lambda M) max(e d, 1)^M) on the number of candidate
/// Pauli strings per local observable; saturates instead of overflowing.
pub fn term_count_bound(trunc: &TruncationPlan, k: usize, lambda: usize, d: usize) -> u64 {
    let m = trunc.m as f64;
    let strings = 4f64.powf((k * lambda) as f64 * m);
    let growth = (std::f64::consts::E * d as f64).max(1.0).powf(m);
    saturating_ceil(strings * growth)
}

/// Multiset of interaction-term vertices: `items` pairs a vertex index from
/// the interaction graph with its multiplicity, sorted by vertex index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub items: Vec<(usize, u32)>,
    pub m: u32,
}

impl Cluster {
    pub fn size(&self) -> u32 {
        self.m
    }

    pub fn distinct(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().map(|&(v, _)| v)
    }

    /// Union of the supports of the distinct terms.
    pub fn region(&self, graph: &InteractionGraph) -> u64 {
        self.items
            .iter()
            .fold(0u64, |m, &(v, _)| m | graph.vertices[v].support)
    }
}

/// Vertices within graph distance `depth` of the observable support, i.e.
/// the only vertices a connected cluster of that size can use.
fn relevant_vertices(graph: &InteractionGraph, o_support: u64, depth: u32) -> Vec<usize> {
    let n = graph.len();
    let mut dist = vec![u32::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    for v in 0..n {
        if graph.vertices[v].support & o_support != 0 {
            dist[v] = 1;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        if dist[v] >= depth {
            continue;
        }
        for &w in &graph.adjacency[v] {
            if dist[w] == u32::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    (0..n).filter(|&v| dist[v] != u32::MAX).collect()
}

/// Enumerates each vertex set connected to the seed exactly once: candidates
/// are consumed in increasing order, and once a branch returns its root
/// vertex becomes forbidden for every later branch and their subtrees.
fn connected_sets(adj: &[u64], seed: u64, m_max: u32, limit: u64, out: &mut Vec<u64>) -> Result<()> {
    fn rec(
        adj: &[u64],
        set: u64,
        size: u32,
        ext: u64,
        mut forbidden: u64,
        m_max: u32,
        limit: u64,
        out: &mut Vec<u64>,
    ) -> Result<()> {
        let mut remaining = ext;
        while remaining != 0 {
            let v = remaining.trailing_zeros() as usize;
            let bit = 1u64 << v;
            remaining &= !bit;
            let set2 = set | bit;
            if out.len() as u64 >= limit {
                return Err(Error::Capacity {
                    what: "connected cluster sets",
                    predicted: out.len() as u64 + 1,
                    cap: limit,
                });
            }
            out.push(set2);
            if size + 1 < m_max {
                let ext2 = (remaining | adj[v]) & !set2 & !forbidden;
                rec(adj, set2, size + 1, ext2, forbidden, m_max, limit, out)?;
            }
            forbidden |= bit;
        }
        Ok(())
    }
    if m_max == 0 {
        return Ok(());
    }
    rec(adj, 0, 0, seed, 0, m_max, limit, out)
}

fn local_adjacency(graph: &InteractionGraph, verts: &[usize]) -> Vec<u64> {
    let index: HashMap<usize, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut adj = vec![0u64; verts.len()];
    for (i, &v) in verts.iter().enumerate() {
        for &w in &graph.adjacency[v] {
            if let Some(&j) = index.get(&w) {
                adj[i] |= 1 << j;
            }
        }
    }
    adj
}

/// Distinct-vertex sets (sorted vertex lists) whose union with the
/// observable vertex is connected, sizes 1..=m_max.
pub fn enumerate_connected_sets(
    graph: &InteractionGraph,
    o_support: u64,
    m_max: u32,
    cfg: &ClusterConfig,
) -> Result<Vec<Vec<usize>>> {
    if m_max == 0 {
        return Ok(Vec::new());
    }
    let verts = relevant_vertices(graph, o_support, m_max);
    if verts.is_empty() {
        return Ok(Vec::new());
    }
    if verts.len() > 64 {
        return Err(Error::Capacity {
            what: "cluster lightcone vertices",
            predicted: verts.len() as u64,
            cap: 64,
        });
    }
    let adj = local_adjacency(graph, &verts);
    let mut seed = 0u64;
    for (i, &v) in verts.iter().enumerate() {
        if graph.vertices[v].support & o_support != 0 {
            seed |= 1 << i;
        }
    }
    let mut masks = Vec::new();
    connected_sets(&adj, seed, m_max, cfg.max_clusters, &mut masks)?;
    let mut sets: Vec<Vec<usize>> = masks
        .into_iter()
        .map(|mask| {
            let mut vs: Vec<usize> = (0..verts.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| verts[i])
                .collect();
            vs.sort_unstable();
            vs
        })
        .collect();
    sets.sort();
    sets.dedup();
    Ok(sets)
}

/// All clusters of total size at most `m_max` connected to `o_support`,
/// ordered lexicographically by (size, vertex indices, multiplicities).
pub fn enumerate_clusters(
    graph: &InteractionGraph,
    o_support: u64,
    m_max: u32,
    cfg: &ClusterConfig,
) -> Result<Vec<Cluster>> {
    let sets = enumerate_connected_sets(graph, o_support, m_max, cfg)?;
    let mut clusters = Vec::new();
    for verts in &sets {
        // Odometer over multiplicity vectors with entries >= 1, sum <= m_max.
        let mut mults = vec![1u32; verts.len()];
        loop {
            let total: u32 = mults.iter().sum();
            if clusters.len() as u64 >= cfg.max_clusters {
                return Err(Error::Capacity {
                    what: "clusters",
                    predicted: clusters.len() as u64 + 1,
                    cap: cfg.max_clusters,
                });
            }
            clusters.push(Cluster {
                items: verts.iter().copied().zip(mults.iter().copied()).collect(),
                m: total,
            });
            let mut advanced = false;
            let mut pos = mults.len();
            while pos > 0 {
                pos -= 1;
                let sum_before: u32 = mults[..pos].iter().sum();
                let tail_min = (mults.len() - pos - 1) as u32;
                if sum_before + mults[pos] + 1 + tail_min <= m_max {
                    mults[pos] += 1;
                    for v in mults[pos + 1..].iter_mut() {
                        *v = 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
    }
    clusters.sort_by_cached_key(|c| {
        (
            c.m,
            c.items.iter().map(|&(v, _)| v).collect::<Vec<_>>(),
            c.items.iter().map(|&(_, m)| m).collect::<Vec<_>>(),
        )
    });
    Ok(clusters)
}

/// Union-of-supports regions of all connected clusters touching `o_support`,
/// deduplicated; the learner's candidate lightcones.
pub fn connected_regions(
    graph: &InteractionGraph,
    o_support: u64,
    m_max: u32,
    cfg: &ClusterConfig,
) -> Result<Vec<u64>> {
    let sets = enumerate_connected_sets(graph, o_support, m_max, cfg)?;
    let mut regions: Vec<u64> = sets
        .iter()
        .map(|s| s.iter().fold(o_support, |m, &v| m | graph.vertices[v].support))
        .collect();
    regions.push(o_support);
    regions.sort_by_key(|r| (r.count_ones(), *r));
    regions.dedup();
    Ok(regions)
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Permutation sum over one step's multiset, copies distinguishable:
/// f(S) = sum over e in S of mult_S(e) [h_e, f(S - e)], f(empty) = base.
fn perm_sum(bodies: &[(PauliTerm, u32)], base: &PauliSum) -> Result<PauliSum> {
    fn rec(
        bodies: &[(PauliSum, u32)],
        mults: &mut Vec<u32>,
        memo: &mut HashMap<Vec<u32>, PauliSum>,
        base: &PauliSum,
    ) -> Result<PauliSum> {
        if mults.iter().all(|&m| m == 0) {
            return Ok(base.clone());
        }
        if let Some(v) = memo.get(mults.as_slice()) {
            return Ok(v.clone());
        }
        let mut acc = PauliSum::zero(base.n());
        for i in 0..mults.len() {
            if mults[i] == 0 {
                continue;
            }
            let mu = mults[i] as f64;
            mults[i] -= 1;
            let inner = rec(bodies, mults, memo, base)?;
            mults[i] += 1;
            let comm = bodies[i].0.commutator(&inner)?;
            acc.add_assign(&comm, Complex64::new(mu, 0.0))?;
        }
        memo.insert(mults.clone(), acc.clone());
        Ok(acc)
    }
    let sums: Vec<(PauliSum, u32)> = bodies
        .iter()
        .map(|(t, m)| (PauliSum::from_term(t, Complex64::new(1.0, 0.0)), *m))
        .collect();
    let mut mults: Vec<u32> = bodies.iter().map(|&(_, m)| m).collect();
    let mut memo = HashMap::new();
    rec(&sums, &mut mults, &mut memo, base)
}

/// Truncated Heisenberg image of `o` under the plan: the base term plus one
/// nested-commutator contribution per connected cluster of size <= trunc.m.
/// Later steps sit innermost, matching U = U_K ... U_1 with step 1 applied
/// to the state first.
pub fn truncated_heisenberg(
    plan: &EvolutionPlan,
    graph: &InteractionGraph,
    o: &PauliTerm,
    trunc: &TruncationPlan,
    cfg: &ClusterConfig,
) -> Result<PauliSum> {
    let one = Complex64::new(1.0, 0.0);
    if o.weight() == 0 {
        return Ok(PauliSum::from_term(o, one));
    }
    let o_support = o.support();
    let verts = relevant_vertices(graph, o_support, trunc.m);
    let lightcone = verts
        .iter()
        .fold(o_support, |m, &v| m | graph.vertices[v].support);
    let predicted = saturating_ceil(4f64.powi(lightcone.count_ones() as i32));
    if predicted > cfg.max_predicted_terms {
        return Err(Error::Capacity {
            what: "predicted expansion terms",
            predicted,
            cap: cfg.max_predicted_terms,
        });
    }
    let clusters = enumerate_clusters(graph, o_support, trunc.m, cfg)?;
    let mut out = PauliSum::from_term(o, one);
    let base = PauliSum::from_term(o, one);
    for cluster in &clusters {
        // Split the cluster by step; step index k acts for time t_k.
        let mut per_step: Vec<Vec<(PauliTerm, u32)>> = vec![Vec::new(); plan.k()];
        let mut scalar = one;
        for &(v, mult) in &cluster.items {
            let vx = graph.vertices[v];
            let term = &plan.steps[vx.step].ham.terms[vx.term];
            per_step[vx.step].push((term.body(plan.n)?, mult));
            scalar *= Complex64::new(term.coeff.powi(mult as i32), 0.0);
        }
        let mut g = base.clone();
        for k in (0..plan.k()).rev() {
            if per_step[k].is_empty() {
                continue;
            }
            let m_k: u32 = per_step[k].iter().map(|&(_, m)| m).sum();
            let w_fact: f64 = per_step[k].iter().map(|&(_, m)| factorial(m)).product();
            let it = Complex64::new(0.0, plan.steps[k].time);
            scalar *= it.powu(m_k) / Complex64::new(w_fact * factorial(m_k), 0.0);
            g = perm_sum(&per_step[k], &g)?;
        }
        if g.is_empty() {
            continue;
        }
        out.add_assign(&g, scalar)?;
    }
    if out.max_imag() > 1e-9 {
        return Err(Error::Degenerate(format!(
            "expansion produced imaginary weight {}",
            out.max_imag()
        )));
    }
    out.hermitianize();
    Ok(out)
}
