//! Inter-set contrastive objective and adapter training.
//!
//! For sets `S_1..S_N` the loss is
//!
//! ```text
//! L = Σ_i Σ_{m ∈ S_i} log Σ_{n ∉ S_i} exp(cos(h_m, h_n) / τ)
//! ```
//!
//! restricted to a sampled list of (anchor, negative) pairs. Only cross-set
//! pairs appear; there is no positive term. Training fits an affine adapter
//! `h = W·x + b` over frozen base embeddings by full-batch gradient descent
//! with heavy-ball momentum.

use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{AdapterCheckpoint, EmbeddingMatrix, SemanticSet};

/// Upper bound on negatives drawn per anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeCap {
    #[default]
    All,
    AtMost(usize),
}

impl Serialize for NegativeCap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NegativeCap::All => s.serialize_str("all"),
            NegativeCap::AtMost(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for NegativeCap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(NegativeCap::AtMost(n as usize)),
            Raw::Word(w) if w == "all" => Ok(NegativeCap::All),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected \"all\" or a count, got {w:?}"
            ))),
        }
    }
}

impl std::str::FromStr for NegativeCap {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(NegativeCap::All);
        }
        s.parse::<usize>()
            .map(NegativeCap::AtMost)
            .map_err(|_| format!("expected \"all\" or a positive count, got {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Temperature dividing every similarity inside the exponentials.
    pub tau: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub max_negatives_per_anchor: NegativeCap,
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tau: 0.05,
            epochs: 60,
            learning_rate: 0.001,
            seed: 0,
            max_negatives_per_anchor: NegativeCap::All,
            momentum: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Domain(format!("tau must be positive, got {}", self.tau)));
        }
        if self.epochs == 0 {
            return Err(Error::Domain("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Domain(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Domain(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.max_negatives_per_anchor == NegativeCap::AtMost(0) {
            return Err(Error::Domain("max negatives per anchor must be positive".into()));
        }
        Ok(())
    }
}

/// A directed (anchor, negative) pair with the anchor's owning set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct NegativePair {
    pub anchor_id: String,
    pub negative_id: String,
    pub anchor_set: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    /// Loss at the start of each epoch, before that epoch's update.
    pub loss_history: Vec<f64>,
    /// Loss of the final adapter on the last epoch's pairs.
    pub final_loss: f64,
    #[serde(skip)]
    pub final_adapter: AdapterCheckpoint,
    /// Pairs per epoch.
    pub pair_count: usize,
    /// Anchors skipped because every candidate negative was excluded.
    pub dropped_anchors: usize,
}

/// Gradient of the loss with respect to the adapter parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGradient {
    pub loss: f64,
    /// Row-major, same layout as [`AdapterCheckpoint::weights`].
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl AdapterGradient {
    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.bias)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Derives an independent stream seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Sampled {
    pairs: Vec<NegativePair>,
    dropped: usize,
}

fn sample_pairs(sets: &[SemanticSet], cap: NegativeCap, seed: u64) -> Result<Sampled> {
    if sets.len() < 2 {
        return Err(Error::Domain(format!(
            "inter-set pairs need at least 2 sets, got {}",
            sets.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let mut dropped = 0;
    for (i, anchor_set) in sets.iter().enumerate() {
        let own: HashSet<&str> = anchor_set.members().iter().map(String::as_str).collect();
        let mut seen = HashSet::new();
        let pool: Vec<&str> = sets
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, s)| s.members().iter().map(String::as_str))
            .filter(|id| !own.contains(id) && seen.insert(*id))
            .collect();
        for anchor in anchor_set.members() {
            if pool.is_empty() {
                log::warn!(
                    "anchor {anchor:?} in set {:?} has no negatives and is dropped",
                    anchor_set.name()
                );
                dropped += 1;
                continue;
            }
            let chosen: Vec<usize> = match cap {
                NegativeCap::AtMost(k) if k < pool.len() => {
                    let mut idx = rand::seq::index::sample(&mut rng, pool.len(), k).into_vec();
                    idx.sort_unstable();
                    idx
                }
                _ => (0..pool.len()).collect(),
            };
            pairs.extend(chosen.into_iter().map(|j| NegativePair {
                anchor_id: anchor.clone(),
                negative_id: pool[j].to_owned(),
                anchor_set: anchor_set.name().to_owned(),
            }));
        }
    }
    Ok(Sampled { pairs, dropped })
}

/// Draws negatives for every anchor of every set.
///
/// Candidates for an anchor in `S_i` are the members of the other sets that
/// are not themselves in `S_i`, in set-then-member order. With a cap, that
/// many are drawn uniformly without replacement and kept in candidate order.
/// Anchors left without candidates are dropped with a warning.
pub fn sample_negative_pairs(
    sets: &[SemanticSet],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<NegativePair>> {
    Ok(sample_pairs(sets, cfg.max_negatives_per_anchor, seed)?.pairs)
}

/// Pairs resolved to row indices and grouped by (set, anchor), in first-seen order.
struct AnchorGroup {
    anchor: usize,
    negatives: Vec<usize>,
}

fn group_pairs(
    pairs: &[NegativePair],
    mut resolve: impl FnMut(&str) -> Result<usize>,
) -> Result<Vec<AnchorGroup>> {
    if pairs.is_empty() {
        return Err(Error::Domain("no negative pairs: every anchor needs at least one negative".into()));
    }
    let mut slot: HashMap<(&str, &str), usize> = HashMap::new();
    let mut groups: Vec<AnchorGroup> = Vec::new();
    for p in pairs {
        if p.anchor_id == p.negative_id {
            return Err(Error::Validation(format!(
                "sentence {:?} paired with itself",
                p.anchor_id
            )));
        }
        let negative = resolve(&p.negative_id)?;
        let g = match slot.get(&(p.anchor_set.as_str(), p.anchor_id.as_str())) {
            Some(&g) => g,
            None => {
                let anchor = resolve(&p.anchor_id)?;
                groups.push(AnchorGroup {
                    anchor,
                    negatives: Vec::new(),
                });
                slot.insert((p.anchor_set.as_str(), p.anchor_id.as_str()), groups.len() - 1);
                groups.len() - 1
            }
        };
        groups[g].negatives.push(negative);
    }
    Ok(groups)
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("tau must be positive, got {tau}")))
    }
}

/// `log Σ exp(z_k)`, shifted by the maximum.
fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Inter-set loss over `pairs`, evaluated on `emb` as given.
pub fn interset_loss(pairs: &[NegativePair], emb: &EmbeddingMatrix, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let groups = group_pairs(pairs, |id| emb.require(id))?;
    let mut z = Vec::new();
    let mut total = 0.0;
    for g in &groups {
        let (a, sa) = (emb.row(g.anchor), emb.sq_norm(g.anchor));
        z.clear();
        z.extend(g.negatives.iter().map(|&n| {
            crate::geometry::cosine_with_sq_norms(a, sa, emb.row(n), emb.sq_norm(n)) / tau
        }));
        total += log_sum_exp(&z);
    }
    Ok(total)
}

/// Base rows touched by a pair list, with the adapter applied in `f64`.
struct AdaptedRows {
    base: Vec<usize>,
    h: Vec<f64>,
    norms: Vec<f64>,
    dim: usize,
}

impl AdaptedRows {
    fn new(base: Vec<usize>, emb: &EmbeddingMatrix, adapter: &AdapterCheckpoint) -> Result<Self> {
        let dim = emb.dim();
        let mut h = vec![0.0; base.len() * dim];
        let mut norms = Vec::with_capacity(base.len());
        for (k, &row) in base.iter().enumerate() {
            let out = &mut h[k * dim..(k + 1) * dim];
            adapter.transform(emb.row(row), out);
            let n = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::Numeric(format!(
                    "adapted embedding of {:?} has norm {n}",
                    emb.ids()[row]
                )));
            }
            norms.push(n);
        }
        Ok(AdaptedRows { base, h, norms, dim })
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.h[k * self.dim..(k + 1) * self.dim]
    }
}

/// Pair groups re-indexed into a compact list of touched rows.
struct Problem {
    groups: Vec<AnchorGroup>,
    rows: Vec<usize>,
}

impl Problem {
    fn new(pairs: &[NegativePair], emb: &EmbeddingMatrix) -> Result<Self> {
        let mut compact: HashMap<usize, usize> = HashMap::new();
        let mut rows = Vec::new();
        let groups = group_pairs(pairs, |id| {
            let base = emb.require(id)?;
            Ok(*compact.entry(base).or_insert_with(|| {
                rows.push(base);
                rows.len() - 1
            }))
        })?;
        Ok(Problem { groups, rows })
    }

    fn evaluate(
        &self,
        emb: &EmbeddingMatrix,
        adapter: &AdapterCheckpoint,
        tau: f64,
        want_grad: bool,
    ) -> Result<AdapterGradient> {
        let dim = emb.dim();
        let adapted = AdaptedRows::new(self.rows.clone(), emb, adapter)?;
        let mut g_h = if want_grad {
            vec![0.0; self.rows.len() * dim]
        } else {
            Vec::new()
        };
        let mut sims = Vec::new();
        let mut z = Vec::new();
        let mut loss = 0.0;
        for group in &self.groups {
            let a = adapted.row(group.anchor);
            let na = adapted.norms[group.anchor];
            sims.clear();
            sims.extend(group.negatives.iter().map(|&n| {
                let v = adapted.row(n);
                let d: f64 = a.iter().zip(v).map(|(x, y)| x * y).sum();
                d / (na * adapted.norms[n])
            }));
            z.clear();
            z.extend(sims.iter().map(|s| s / tau));
            let lse = log_sum_exp(&z);
            loss += lse;
            if !want_grad {
                continue;
            }
            for (k, &n) in group.negatives.iter().enumerate() {
                // d lse / d s_k = softmax_k / tau
                let c = (z[k] - lse).exp() / tau;
                let s = sims[k];
                let nn = adapted.norms[n];
                let inv = 1.0 / (na * nn);
                let v = adapted.row(n);
                for d in 0..dim {
                    let du = v[d] * inv - s * a[d] / (na * na);
                    let dv = a[d] * inv - s * v[d] / (nn * nn);
                    g_h[group.anchor * dim + d] += c * du;
                    g_h[n * dim + d] += c * dv;
                }
            }
        }
        let mut weights = Vec::new();
        let mut bias = Vec::new();
        if want_grad {
            weights = vec![0.0; dim * dim];
            bias = vec![0.0; dim];
            for (k, &base) in adapted.base.iter().enumerate() {
                let x = emb.row(base);
                let g = &g_h[k * dim..(k + 1) * dim];
                for r in 0..dim {
                    if g[r] == 0.0 {
                        continue;
                    }
                    bias[r] += g[r];
                    let w = &mut weights[r * dim..(r + 1) * dim];
                    for (wc, xc) in w.iter_mut().zip(x) {
                        *wc += g[r] * f64::from(*xc);
                    }
                }
            }
        }
        Ok(AdapterGradient {
            loss,
            weights,
            bias,
        })
    }
}

fn check_adapter(adapter: &AdapterCheckpoint, emb: &EmbeddingMatrix) -> Result<()> {
    if adapter.dim() != emb.dim() {
        return Err(Error::Shape(format!(
            "adapter dim {} does not match embedding dim {}",
            adapter.dim(),
            emb.dim()
        )));
    }
    Ok(())
}

/// Loss of the adapted embeddings, computed in `f64` without narrowing.
pub fn interset_loss_adapted(
    pairs: &[NegativePair],
    base: &EmbeddingMatrix,
    adapter: &AdapterCheckpoint,
    tau: f64,
) -> Result<f64> {
    check_tau(tau)?;
    check_adapter(adapter, base)?;
    Ok(Problem::new(pairs, base)?.evaluate(base, adapter, tau, false)?.loss)
}

/// Loss and its exact gradient with respect to every adapter weight and bias.
pub fn interset_loss_grad(
    pairs: &[NegativePair],
    base: &EmbeddingMatrix,
    adapter: &AdapterCheckpoint,
    tau: f64,
) -> Result<AdapterGradient> {
    check_tau(tau)?;
    check_adapter(adapter, base)?;
    Problem::new(pairs, base)?.evaluate(base, adapter, tau, true)
}

/// Fits an adapter to `sets` starting from the identity map.
///
/// Pairs are resampled every epoch from a seed derived from `(cfg.seed,
/// epoch)`. The run is deterministic in `cfg`.
pub fn train_adapter(
    base: &EmbeddingMatrix,
    sets: &[SemanticSet],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if sets.len() < 2 {
        return Err(Error::Domain(format!(
            "training needs at least 2 sets, got {}",
            sets.len()
        )));
    }
    for s in sets {
        crate::geometry::resolve_rows(s, base)?;
    }
    let dim = base.dim();
    let mut adapter = AdapterCheckpoint::identity(dim);
    let mut vel_w = vec![0.0; dim * dim];
    let mut vel_b = vec![0.0; dim];
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut last: Option<(Problem, usize, usize)> = None;

    for epoch in 0..cfg.epochs {
        let sampled = sample_pairs(sets, cfg.max_negatives_per_anchor, derive_seed(cfg.seed, epoch as u64))?;
        let problem = Problem::new(&sampled.pairs, base)?;
        let grad = problem
            .evaluate(base, &adapter, cfg.tau, true)
            .map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}: {m}")),
                other => other,
            })?;
        if !grad.loss.is_finite() {
            return Err(Error::Numeric(format!(
                "loss became {} at epoch {epoch}",
                grad.loss
            )));
        }
        loss_history.push(grad.loss);

        // Step along the gradient of the mean per-anchor loss so the
        // learning rate does not depend on how many anchors the sets hold.
        let scale = 1.0 / problem.groups.len() as f64;
        let (w, b) = adapter.params_mut();
        step(w, &mut vel_w, &grad.weights, scale, cfg);
        step(b, &mut vel_b, &grad.bias, scale, cfg);
        if w.iter().chain(b.iter()).any(|p| !p.is_finite()) {
            return Err(Error::Numeric(format!(
                "adapter parameters diverged at epoch {epoch}"
            )));
        }
        last = Some((problem, sampled.pairs.len(), sampled.dropped));
    }

    let (problem, pair_count, dropped_anchors) = last.expect("epochs >= 1");
    let final_loss = problem.evaluate(base, &adapter, cfg.tau, false)?.loss;
    if !final_loss.is_finite() {
        return Err(Error::Numeric(format!(
            "loss became {final_loss} after epoch {}",
            cfg.epochs - 1
        )));
    }
    Ok(TrainReport {
        loss_history,
        final_loss,
        final_adapter: adapter.with_metadata(*cfg),
        pair_count,
        dropped_anchors,
    })
}

/// Heavy-ball update: `v ← μ·v + s·g`, `θ ← θ − lr·v`.
fn step(params: &mut [f64], velocity: &mut [f64], grad: &[f64], scale: f64, cfg: &TrainConfig) {
    for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(grad) {
        *v = cfg.momentum * *v + scale * g;
        *p -= cfg.learning_rate * *v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{ClusterSpec, SyntheticCorpus};
    use rand::Rng;

    fn set(name: &str, ids: &[&str]) -> SemanticSet {
        SemanticSet::new(name, ids.iter().copied()).unwrap()
    }

    fn two_by_two() -> Vec<SemanticSet> {
        vec![set("A", &["a1", "a2"]), set("B", &["b1", "b2"])]
    }

    #[test]
    fn exhaustive_pairs() {
        let pairs = sample_negative_pairs(&two_by_two(), &TrainConfig::default(), 1).unwrap();
        assert_eq!(pairs.len(), 8);
        assert_eq!(pairs[0].anchor_id, "a1");
        assert_eq!(pairs[0].negative_id, "b1");
        assert!(pairs.iter().all(|p| p.anchor_id != p.negative_id));
        assert!(pairs
            .iter()
            .all(|p| p.anchor_id.chars().next() != p.negative_id.chars().next()));
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = TrainConfig {
            max_negatives_per_anchor: NegativeCap::AtMost(1),
            ..TrainConfig::default()
        };
        let a = sample_negative_pairs(&two_by_two(), &cfg, 42).unwrap();
        let b = sample_negative_pairs(&two_by_two(), &cfg, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cap_of_one_gives_one_pair_per_anchor() {
        let cfg = TrainConfig {
            max_negatives_per_anchor: NegativeCap::AtMost(1),
            ..TrainConfig::default()
        };
        let pairs = sample_negative_pairs(&two_by_two(), &cfg, 7).unwrap();
        assert_eq!(pairs.len(), 4);
        let anchors: HashSet<_> = pairs.iter().map(|p| p.anchor_id.as_str()).collect();
        assert_eq!(anchors.len(), 4);
    }

    #[test]
    fn single_set_has_no_negatives() {
        let err = sample_negative_pairs(&[set("A", &["a"])], &TrainConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn overlapping_members_are_never_negatives() {
        let sets = vec![set("A", &["x", "a"]), set("B", &["x", "b"])];
        let pairs = sample_negative_pairs(&sets, &TrainConfig::default(), 0).unwrap();
        assert!(pairs.iter().all(|p| p.negative_id != "x" && p.anchor_id != p.negative_id));
        assert_eq!(pairs.len(), 4);
    }

    #[test]
    fn fully_overlapping_anchor_is_dropped() {
        let sets = vec![set("A", &["x"]), set("B", &["x"])];
        let sampled = sample_pairs(&sets, NegativeCap::All, 0).unwrap();
        assert!(sampled.pairs.is_empty());
        assert_eq!(sampled.dropped, 2);
    }

    fn singletons(a: Vec<f32>, b: Vec<f32>) -> (EmbeddingMatrix, Vec<NegativePair>) {
        let e = EmbeddingMatrix::from_rows([("m", a), ("n", b)]).unwrap();
        let sets = vec![set("S1", &["m"]), set("S2", &["n"])];
        let pairs = sample_negative_pairs(&sets, &TrainConfig::default(), 0).unwrap();
        (e, pairs)
    }

    #[test]
    fn closed_form_two_singletons() {
        // cos = 0.5 at 60 degrees.
        let (e, pairs) = singletons(vec![1.0, 0.0], vec![0.5, 0.75f32.sqrt()]);
        let s = crate::geometry::cosine_sim(e.row(0), e.row(1)).unwrap();
        let loss = interset_loss(&pairs, &e, 0.05).unwrap();
        assert!((loss - 2.0 * s / 0.05).abs() < 1e-6);
        assert!((loss - 20.0).abs() < 1e-5);

        let (e, pairs) = singletons(vec![1.0, 0.0], vec![0.0, 1.0]);
        assert!(interset_loss(&pairs, &e, 0.3).unwrap().abs() < 1e-9);
    }

    #[test]
    fn bad_tau_and_empty_pairs() {
        let (e, pairs) = singletons(vec![1.0, 0.0], vec![0.0, 1.0]);
        assert!(matches!(interset_loss(&pairs, &e, 0.0), Err(Error::Domain(_))));
        assert!(matches!(interset_loss(&pairs, &e, -1.0), Err(Error::Domain(_))));
        assert!(matches!(interset_loss(&[], &e, 0.05), Err(Error::Domain(_))));
    }

    #[test]
    fn loss_finite_at_extreme_similarity() {
        let (e, pairs) = singletons(vec![1.0, 0.0], vec![1.0, 0.0]);
        let l = interset_loss(&pairs, &e, 1e-6).unwrap();
        assert!(l.is_finite());
        assert!((l - 2.0e6).abs() < 1e-3);
        let (e, pairs) = singletons(vec![1.0, 0.0], vec![-1.0, 0.0]);
        assert!(interset_loss(&pairs, &e, 1e-6).unwrap().is_finite());
    }

    #[test]
    fn stationary_at_antipodal_configuration() {
        let (e, pairs) = singletons(vec![1.0, 0.0], vec![-1.0, 0.0]);
        let g = interset_loss_grad(&pairs, &e, &AdapterCheckpoint::identity(2), 0.05).unwrap();
        assert!(g.norm() < 1e-6, "{}", g.norm());
    }

    #[test]
    fn radial_scaling_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<(String, Vec<f32>)> = (0..6)
            .map(|i| (format!("r{i}"), (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let e = EmbeddingMatrix::from_rows(rows.clone()).unwrap();
        let e3 = EmbeddingMatrix::from_rows(
            rows.iter().map(|(id, v)| (id.clone(), v.iter().map(|x| x * 3.0).collect())),
        )
        .unwrap();
        let sets = vec![set("A", &["r0", "r1"]), set("B", &["r2", "r3"]), set("C", &["r4", "r5"])];
        let pairs = sample_negative_pairs(&sets, &TrainConfig::default(), 0).unwrap();
        let l1 = interset_loss(&pairs, &e, 0.05).unwrap();
        let l3 = interset_loss(&pairs, &e3, 0.05).unwrap();
        assert!((l1 - l3).abs() < 1e-6);
        let id = AdapterCheckpoint::identity(4);
        let g = interset_loss_grad(&pairs, &e3, &id, 0.05).unwrap();
        let radial: f64 = g.weights.iter().zip(id.weights()).map(|(a, b)| a * b).sum();
        assert!(radial.abs() < 1e-5, "{radial}");
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = TrainConfig::default();
        for cfg in [
            TrainConfig { tau: 0.0, ..base },
            TrainConfig { epochs: 0, ..base },
            TrainConfig { learning_rate: 0.0, ..base },
            TrainConfig { momentum: 1.0, ..base },
            TrainConfig { max_negatives_per_anchor: NegativeCap::AtMost(0), ..base },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn tiny_learning_rate_is_a_no_op() {
        let fx = SyntheticCorpus::clusters(&ClusterSpec {
            classes: 3,
            per_class: 4,
            dim: 6,
            noise: 0.05,
            ..ClusterSpec::default()
        });
        let sets = fx.class_sets();
        let cfg = TrainConfig {
            learning_rate: 1e-30,
            epochs: 5,
            ..TrainConfig::default()
        };
        let report = train_adapter(&fx.embeddings, &sets, &cfg).unwrap();
        let id = AdapterCheckpoint::identity(6);
        for (a, b) in report.final_adapter.weights().iter().zip(id.weights()) {
            assert!((a - b).abs() < 1e-20);
        }
        let first = report.loss_history[0];
        assert!(report.loss_history.iter().all(|l| (l - first).abs() < 1e-9));
    }

    #[test]
    fn single_set_training_rejected() {
        let fx = SyntheticCorpus::clusters(&ClusterSpec::default());
        let sets = fx.class_sets();
        let err = train_adapter(&fx.embeddings, &sets[..1], &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn divergence_reports_epoch() {
        let fx = SyntheticCorpus::clusters(&ClusterSpec {
            classes: 2,
            per_class: 3,
            dim: 4,
            noise: 0.1,
            ..ClusterSpec::default()
        });
        let cfg = TrainConfig {
            learning_rate: 1e300,
            epochs: 10,
            ..TrainConfig::default()
        };
        match train_adapter(&fx.embeddings, &fx.class_sets(), &cfg) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("epoch"), "{msg}"),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }
}
