//! Thresholded sample correlation and block partitioning of predictors.
//!
//! Off-diagonal correlations `|x_j' x_k / n| >= delta` form the edges of a
//! graph; its connected components are the screening blocks. Components that
//! exceed the size cap are split by raising the threshold inside the
//! component (factor 1.25 per step). When escalation cannot split a component
//! gracefully (every remaining edge would vanish at once, or the component is
//! held together only by near-duplicate columns), it falls back to a
//! size-capped union-find over edges in descending weight order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Column panel width for the blocked correlation sweep.
pub const PANEL: usize = 256;
const ESCALATION: f64 = 1.25;
const NEAR_DUPLICATE: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub j: usize,
    pub k: usize,
    /// Absolute sample correlation.
    pub weight: f64,
}

/// Support of the thresholded correlation matrix (upper triangle).
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdEdges {
    pub delta: f64,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    /// Sorted blocks, ordered by their smallest member.
    pub blocks: Vec<Vec<usize>>,
    pub delta: f64,
    pub cap: usize,
    /// Threshold edges whose endpoints ended up in different blocks.
    pub forced_splits: usize,
}

impl BlockPartition {
    /// Every predictor in its own block.
    pub fn singletons(p: usize) -> Self {
        Self {
            blocks: (0..p).map(|j| vec![j]).collect(),
            delta: f64::INFINITY,
            cap: 1,
            forced_splits: 0,
        }
    }

    /// One block holding all predictors.
    pub fn single_block(p: usize) -> Self {
        Self {
            blocks: vec![(0..p).collect()],
            delta: 0.0,
            cap: p,
            forced_splits: 0,
        }
    }

    /// Builds a partition from arbitrary blocks, normalizing the order.
    pub fn from_blocks(blocks: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .filter(|b| !b.is_empty())
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        blocks.sort_by_key(|b| b[0]);
        let cap = blocks.iter().map(Vec::len).max().unwrap_or(1);
        let part = Self {
            blocks,
            delta: f64::NAN,
            cap,
            forced_splits: 0,
        };
        if !part.is_partition_of(p) {
            return Err(Error::InvalidArgument(
                "blocks must be disjoint and cover every predictor".into(),
            ));
        }
        Ok(part)
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Block id of every predictor.
    pub fn block_ids(&self, p: usize) -> Vec<usize> {
        let mut ids = vec![usize::MAX; p];
        for (g, b) in self.blocks.iter().enumerate() {
            for &j in b {
                ids[j] = g;
            }
        }
        ids
    }

    pub fn is_partition_of(&self, p: usize) -> bool {
        let mut seen = vec![false; p];
        for b in &self.blocks {
            for &j in b {
                if j >= p || seen[j] {
                    return false;
                }
                seen[j] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Counts edges joining two different blocks.
    pub fn crossing_edges(&self, edges: &ThresholdEdges, p: usize) -> usize {
        let ids = self.block_ids(p);
        edges
            .edges
            .iter()
            .filter(|e| ids[e.j] != ids[e.k])
            .count()
    }
}

/// `c * sqrt(ln(p) / n)`.
pub fn default_delta(n: usize, p: usize, c: f64) -> Result<f64> {
    if n < 2 || p < 2 {
        return Err(Error::InvalidArgument(format!(
            "default delta needs n >= 2 and p >= 2 (n = {n}, p = {p})"
        )));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("delta multiplier must be > 0, got {c}")));
    }
    Ok(c * ((p as f64).ln() / n as f64).sqrt())
}

/// Default block-size cap, `max(2, floor(n / 2))`.
pub fn default_cap(n: usize) -> usize {
    (n / 2).max(2)
}

/// Collects all pairs with `|x_j' x_k / n| >= delta`, sweeping the
/// correlation matrix in column panels so the full `p x p` matrix is never
/// held in memory.
pub fn threshold_edges(d: &Dataset, delta: f64) -> Result<ThresholdEdges> {
    d.require_standardized()?;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be > 0, got {delta}")));
    }
    let p = d.p();
    let n = d.n() as f64;
    let x = d.x();
    // row-major copy so the panel products go through the blocked gemm path
    let xt = x.transpose();
    let panels: Vec<(usize, usize)> = (0..p)
        .step_by(PANEL)
        .map(|s| (s, PANEL.min(p - s)))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..panels.len())
        .flat_map(|a| (a..panels.len()).map(move |b| (a, b)))
        .collect();

    let chunks: Vec<Vec<Edge>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (sa, la) = panels[a];
            let (sb, lb) = panels[b];
            let prod = xt.rows(sa, la) * x.columns(sb, lb);
            let mut out = Vec::new();
            for jj in 0..la {
                let kk0 = if a == b { jj + 1 } else { 0 };
                for kk in kk0..lb {
                    let w = (prod[(jj, kk)] / n).abs();
                    if w >= delta {
                        out.push(Edge {
                            j: sa + jj,
                            k: sb + kk,
                            weight: w.min(1.0),
                        });
                    }
                }
            }
            out
        })
        .collect();
    let mut edges: Vec<Edge> = chunks.into_iter().flatten().collect();
    edges.sort_by_key(|e| (e.j, e.k));
    Ok(ThresholdEdges { delta, edges })
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        true
    }

    fn set_size(&mut self, a: usize) -> usize {
        let r = self.find(a);
        self.size[r]
    }
}

/// Connected components of `nodes` under `edges` (given in local indices).
fn components(nodes: &[usize], edges: &[(usize, usize, f64)]) -> Vec<Vec<usize>> {
    let m = nodes.len();
    let mut uf = UnionFind::new(m);
    for &(a, b, _) in edges {
        uf.union(a, b);
    }
    group(nodes, &mut uf)
}

fn group(nodes: &[usize], uf: &mut UnionFind) -> Vec<Vec<usize>> {
    let m = nodes.len();
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); m];
    for i in 0..m {
        let r = uf.find(i);
        by_root[r].push(i);
    }
    by_root
        .into_iter()
        .filter(|c| !c.is_empty())
        .collect()
}

/// Size-capped union-find: edges by descending weight, ties by `(j, k)`;
/// unions that would exceed `cap` are refused.
fn capped_union_find(nodes: &[usize], edges: &[(usize, usize, f64)], cap: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<&(usize, usize, f64)> = edges.iter().collect();
    order.sort_by(|x, y| {
        y.2.total_cmp(&x.2)
            .then_with(|| (nodes[x.0], nodes[x.1]).cmp(&(nodes[y.0], nodes[y.1])))
    });
    let mut uf = UnionFind::new(nodes.len());
    for &&(a, b, _) in &order {
        if uf.find(a) != uf.find(b) && uf.set_size(a) + uf.set_size(b) <= cap {
            uf.union(a, b);
        }
    }
    group(nodes, &mut uf)
}

/// Splits one oversized component. `nodes` are global indices, `edges` use
/// local positions into `nodes`.
fn split_component(
    nodes: &[usize],
    edges: &[(usize, usize, f64)],
    threshold: f64,
    cap: usize,
    out: &mut Vec<Vec<usize>>,
) {
    let min_w = edges.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
    let raised = threshold * ESCALATION;
    let kept: Vec<(usize, usize, f64)> = edges.iter().copied().filter(|e| e.2 >= raised).collect();
    if kept.is_empty() || min_w >= NEAR_DUPLICATE {
        for c in capped_union_find(nodes, edges, cap) {
            out.push(c.into_iter().map(|i| nodes[i]).collect());
        }
        return;
    }
    for comp in components(nodes, &kept) {
        let globals: Vec<usize> = comp.iter().map(|&i| nodes[i]).collect();
        if globals.len() <= cap {
            out.push(globals);
            continue;
        }
        let mut local = vec![usize::MAX; nodes.len()];
        for (new, &old) in comp.iter().enumerate() {
            local[old] = new;
        }
        let sub: Vec<(usize, usize, f64)> = kept
            .iter()
            .filter(|e| local[e.0] != usize::MAX && local[e.1] != usize::MAX)
            .map(|e| (local[e.0], local[e.1], e.2))
            .collect();
        split_component(&globals, &sub, raised, cap, out);
    }
}

/// Connected components of the threshold graph, with oversized components
/// split so that no block exceeds `cap`. Isolated predictors are singletons.
pub fn partition_blocks(e: &ThresholdEdges, p: usize, cap: usize) -> Result<BlockPartition> {
    if cap < 1 {
        return Err(Error::InvalidArgument("block cap must be >= 1".into()));
    }
    if let Some(bad) = e.edges.iter().find(|ed| ed.j >= p || ed.k >= p) {
        return Err(Error::InvalidArgument(format!(
            "edge ({}, {}) out of range for p = {p}",
            bad.j, bad.k
        )));
    }
    let mut uf = UnionFind::new(p);
    for ed in &e.edges {
        uf.union(ed.j, ed.k);
    }
    let all: Vec<usize> = (0..p).collect();
    let comps = group(&all, &mut uf);

    let mut blocks = Vec::with_capacity(comps.len());
    let oversized: Vec<&Vec<usize>> = comps.iter().filter(|c| c.len() > cap).collect();
    for c in comps.iter().filter(|c| c.len() <= cap) {
        blocks.push(c.clone());
    }
    if !oversized.is_empty() {
        let mut comp_of = vec![usize::MAX; p];
        let mut local = vec![0usize; p];
        for (ci, c) in oversized.iter().enumerate() {
            for (li, &j) in c.iter().enumerate() {
                comp_of[j] = ci;
                local[j] = li;
            }
        }
        let mut comp_edges: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); oversized.len()];
        for ed in &e.edges {
            let ci = comp_of[ed.j];
            if ci != usize::MAX {
                comp_edges[ci].push((local[ed.j], local[ed.k], ed.weight));
            }
        }
        for (c, ce) in oversized.iter().zip(&comp_edges) {
            split_component(c, ce, e.delta, cap, &mut blocks);
        }
    }

    for b in &mut blocks {
        b.sort_unstable();
    }
    blocks.sort_by_key(|b| b[0]);
    let mut part = BlockPartition {
        blocks,
        delta: e.delta,
        cap,
        forced_splits: 0,
    };
    part.forced_splits = part.crossing_edges(e, p);
    Ok(part)
}

/// Threshold plus partition in one call.
pub fn partition_dataset(d: &Dataset, delta: f64, cap: usize) -> Result<BlockPartition> {
    let edges = threshold_edges(d, delta)?;
    partition_blocks(&edges, d.p(), cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn edges(list: &[(usize, usize, f64)], delta: f64) -> ThresholdEdges {
        ThresholdEdges {
            delta,
            edges: list
                .iter()
                .map(|&(j, k, weight)| Edge { j, k, weight })
                .collect(),
        }
    }

    fn random_std(n: usize, p: usize, mix: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        // neighbouring columns share a common factor so edges exist
        let x = DMatrix::from_fn(n, p, |i, j| {
            if j == 0 {
                z[(i, 0)]
            } else {
                z[(i, j)] + mix * z[(i, j - 1)]
            }
        });
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        Dataset::from_parts(y, x).unwrap().standardize().unwrap()
    }

    #[test]
    fn default_delta_values() {
        let v = default_delta(1000, 10000, 5.0).unwrap();
        assert!((v - 5.0 * (10000f64.ln() / 1000.0).sqrt()).abs() < 1e-15);
        assert!((v - 0.4799).abs() < 1e-4);
        // n = p = e would need real-valued counts; log p = 1 case via formula
        assert!(((1.0f64 / std::f64::consts::E).sqrt() - 0.6065).abs() < 1e-4);
        let a = default_delta(50, 300, 5.0).unwrap();
        let b = default_delta(50, 300, 10.0).unwrap();
        assert_eq!(b, 2.0 * a);
        assert!(default_delta(1, 10, 5.0).is_err());
        assert!(default_delta(10, 10, 0.0).is_err());
    }

    #[test]
    fn equal_columns_give_unit_edge() {
        let x = DMatrix::from_column_slice(4, 2, &[1.0, 2.0, 3.0, 5.0, 1.0, 2.0, 3.0, 5.0]);
        let d = Dataset::from_parts(DVector::zeros(4), x)
            .unwrap()
            .standardize()
            .unwrap();
        let e = threshold_edges(&d, 0.5).unwrap();
        assert_eq!(e.edges.len(), 1);
        assert_eq!((e.edges[0].j, e.edges[0].k), (0, 1));
        assert!((e.edges[0].weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_columns_give_no_edges() {
        // centered Hadamard-like columns
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -1.0, -1.0, 1.0],
        );
        let d = Dataset::from_parts(DVector::zeros(4), x)
            .unwrap()
            .standardize()
            .unwrap();
        assert!(threshold_edges(&d, 1e-6).unwrap().edges.is_empty());
    }

    #[test]
    fn edges_match_dense_oracle() {
        for seed in 0..10 {
            let d = random_std(20, 8, 0.8, seed);
            let e = threshold_edges(&d, 0.3).unwrap();
            let c = d.x().tr_mul(d.x()) / 20.0;
            let mut want = Vec::new();
            for j in 0..8 {
                for k in j + 1..8 {
                    if c[(j, k)].abs() >= 0.3 {
                        want.push((j, k));
                    }
                }
            }
            let got: Vec<(usize, usize)> = e.edges.iter().map(|e| (e.j, e.k)).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn panel_sweep_spans_multiple_panels() {
        let d = random_std(30, PANEL + 40, 0.9, 3);
        let e = threshold_edges(&d, 0.45).unwrap();
        let c = d.x().tr_mul(d.x()) / 30.0;
        let p = d.p();
        let mut want = 0;
        for j in 0..p {
            for k in j + 1..p {
                if c[(j, k)].abs() >= 0.45 {
                    want += 1;
                }
            }
        }
        assert_eq!(e.edges.len(), want);
        assert!(e.edges.iter().any(|ed| ed.j < PANEL && ed.k >= PANEL));
    }

    #[test]
    fn unstandardized_input_rejected() {
        let d = Dataset::from_parts(DVector::zeros(3), DMatrix::identity(3, 2)).unwrap();
        assert!(matches!(threshold_edges(&d, 0.5), Err(Error::NotStandardized)));
    }

    #[test]
    fn two_components() {
        let part = partition_blocks(&edges(&[(0, 1, 0.9), (2, 3, 0.8)], 0.5), 4, 4).unwrap();
        assert_eq!(part.blocks, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(part.forced_splits, 0);
    }

    #[test]
    fn empty_graph_gives_singletons() {
        let part = partition_blocks(&edges(&[], 0.5), 4, 4).unwrap();
        assert_eq!(part.blocks, vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn equal_weight_chain_is_capped() {
        let list: Vec<(usize, usize, f64)> = (0..9).map(|j| (j, j + 1, 0.6)).collect();
        let e = edges(&list, 0.5);
        let part = partition_blocks(&e, 10, 5).unwrap();
        assert!(part.is_partition_of(10));
        assert_eq!(part.blocks.len(), 2);
        assert!(part.blocks.iter().all(|b| b.len() <= 5));
        assert!(part.forced_splits >= 1);
        assert_eq!(part.forced_splits, part.crossing_edges(&e, 10));
    }

    #[test]
    fn escalation_cuts_weakest_links_first() {
        // two tight triangles joined by a weak bridge
        let list = [
            (0, 1, 0.9),
            (1, 2, 0.9),
            (0, 2, 0.9),
            (2, 3, 0.55),
            (3, 4, 0.9),
            (4, 5, 0.9),
            (3, 5, 0.9),
        ];
        let part = partition_blocks(&edges(&list, 0.5), 6, 3).unwrap();
        assert_eq!(part.blocks, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert_eq!(part.forced_splits, 1);
    }

    #[test]
    fn near_duplicate_clique_uses_capped_union_find() {
        let mut list = Vec::new();
        for j in 0..6 {
            for k in j + 1..6 {
                list.push((j, k, 0.9995));
            }
        }
        let part = partition_blocks(&edges(&list, 0.5), 6, 4).unwrap();
        assert!(part.is_partition_of(6));
        assert_eq!(part.blocks, vec![vec![0, 1, 2, 3], vec![4, 5]]);
    }

    #[test]
    fn cap_is_respected_on_real_data() {
        let d = random_std(40, 60, 1.5, 11);
        let e = threshold_edges(&d, 0.2).unwrap();
        let part = partition_blocks(&e, 60, 7).unwrap();
        assert!(part.is_partition_of(60));
        assert!(part.max_block_size() <= 7);
    }

    fn bfs_same_component(p: usize, list: &[(usize, usize)]) -> Vec<usize> {
        let mut adj = vec![Vec::new(); p];
        for &(a, b) in list {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut label = vec![usize::MAX; p];
        let mut next = 0;
        for s in 0..p {
            if label[s] != usize::MAX {
                continue;
            }
            let mut queue = std::collections::VecDeque::from([s]);
            label[s] = next;
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        label
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn uncapped_blocks_match_bfs(p in 1usize..50, raw in proptest::collection::vec((0usize..50, 0usize..50, 0.5f64..1.0), 0..80)) {
            let list: Vec<(usize, usize, f64)> = raw
                .into_iter()
                .filter(|&(a, b, _)| a < p && b < p && a != b)
                .map(|(a, b, w)| (a.min(b), a.max(b), w))
                .collect();
            let e = edges(&list, 0.5);
            let part = partition_blocks(&e, p, p).unwrap();
            prop_assert!(part.is_partition_of(p));
            prop_assert_eq!(part.forced_splits, 0);
            let pairs: Vec<(usize, usize)> = list.iter().map(|e| (e.0, e.1)).collect();
            let label = bfs_same_component(p, &pairs);
            let ids = part.block_ids(p);
            for a in 0..p {
                for b in 0..p {
                    prop_assert_eq!(label[a] == label[b], ids[a] == ids[b]);
                }
            }
        }

        #[test]
        fn permutation_equivariance(seed in 0u64..500, shift in 1usize..12) {
            let d = random_std(25, 12, 1.0, seed);
            let perm: Vec<usize> = (0..12).map(|j| (j * 5 + shift) % 12).collect();
            let dp = d.select_columns(&perm);
            let a = partition_dataset(&d, 0.3, 12).unwrap();
            let b = partition_dataset(&dp, 0.3, 12).unwrap();
            // map b's blocks back to original indices
            let mut mapped: Vec<Vec<usize>> = b
                .blocks
                .iter()
                .map(|blk| {
                    let mut v: Vec<usize> = blk.iter().map(|&i| perm[i]).collect();
                    v.sort_unstable();
                    v
                })
                .collect();
            mapped.sort_by_key(|v| v[0]);
            prop_assert_eq!(mapped, a.blocks);
        }

        #[test]
        fn refinement_under_larger_delta(seed in 0u64..500, d1 in 0.1f64..0.5, gap in 0.0f64..0.4) {
            let d = random_std(30, 20, 1.0, seed);
            let coarse = partition_dataset(&d, d1, 20).unwrap();
            let fine = partition_dataset(&d, d1 + gap, 20).unwrap();
            let ids = coarse.block_ids(20);
            for b in &fine.blocks {
                prop_assert!(b.iter().all(|&j| ids[j] == ids[b[0]]));
            }
        }
    }
}
