use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HdbscanConfig {
    pub min_cluster_size: usize,
    /// The core distance of a point is its distance to the
    /// `min_samples`-th nearest other point.
    pub min_samples: usize,
}

impl Default for HdbscanConfig {
    fn default() -> Self {
        HdbscanConfig { min_cluster_size: 15, min_samples: 10 }
    }
}

pub const NOISE: i32 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabeling {
    /// `-1` is noise; clusters are `0..C`, numbered by their lowest point index.
    pub labels: Vec<i32>,
}

impl ClusterLabeling {
    pub fn cluster_count(&self) -> usize {
        cluster_count(&self.labels)
    }
}

/// Number of distinct non-negative labels.
pub fn cluster_count(labels: &[i32]) -> usize {
    let mut seen: Vec<i32> = labels.iter().copied().filter(|&l| l >= 0).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

pub fn euclidean(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn distances(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| (0..n).map(|j| euclidean(x.row(i), x.row(j))).collect()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| rows[i][j])
}

pub fn core_distances(d: &Array2<f64>, min_samples: usize) -> Vec<f64> {
    let n = d.nrows();
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[[i, j]]).collect();
            row.sort_by(f64::total_cmp);
            row[min_samples - 1]
        })
        .collect()
}

/// `max(core_a, core_b, d(a, b))`.
pub fn mutual_reachability(d: &Array2<f64>, core: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn(d.dim(), |(i, j)| if i == j { 0.0 } else { d[[i, j]].max(core[i]).max(core[j]) })
}

/// An edge `(a, b, weight)` of a spanning tree.
pub type Edge = (usize, usize, f64);

/// Prim's algorithm on a dense weight matrix. Edges come back sorted by
/// weight, ties by endpoints.
pub fn minimum_spanning_tree(w: &Array2<f64>) -> Vec<Edge> {
    let n = w.nrows();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            if w[[current, j]] < best[j] {
                best[j] = w[[current, j]];
                from[j] = current;
            }
            if next == usize::MAX || best[j] < best[next] {
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((from[next].min(next), from[next].max(next), best[next]));
        current = next;
    }
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    edges
}

/// Sum of edge weights in ascending weight order.
pub fn tree_weight(edges: &[Edge]) -> f64 {
    let mut w: Vec<f64> = edges.iter().map(|e| e.2).collect();
    w.sort_by(f64::total_cmp);
    w.iter().sum()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// One merge of the single-linkage hierarchy: node `n + i` joins `left`
/// and `right` at `distance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

/// Single-linkage dendrogram from a sorted spanning tree.
pub fn single_linkage(n: usize, mst: &[Edge]) -> Vec<Merge> {
    let mut uf = UnionFind::new(2 * n);
    let mut size = vec![1usize; 2 * n];
    let mut merges = Vec::with_capacity(n - 1);
    for (i, &(a, b, w)) in mst.iter().enumerate() {
        let (ra, rb) = (uf.find(a), uf.find(b));
        let new = n + i;
        size[new] = size[ra] + size[rb];
        merges.push(Merge { left: ra, right: rb, distance: w, size: size[new] });
        uf.parent[ra] = new;
        uf.parent[rb] = new;
    }
    merges
}

/// An edge of the condensed tree: `child` (a cluster id ≥ n, or a point
/// id < n) leaves `parent` at density `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::MAX
    }
}

fn leaves(n: usize, merges: &[Merge], node: usize, out: &mut Vec<usize>) {
    let mut stack = vec![node];
    while let Some(v) = stack.pop() {
        if v < n {
            out.push(v);
        } else {
            let m = &merges[v - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
}

/// Walk the dendrogram from the root; a split counts only when both sides
/// have at least `min_cluster_size` points, otherwise the small side's
/// points fall out of the surviving cluster. The root cluster is `n`.
pub fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> Vec<CondensedEdge> {
    let size = |v: usize| if v < n { 1 } else { merges[v - n].size };
    let root = 2 * n - 2;
    let mut label = vec![0usize; 2 * n - 1];
    label[root] = n;
    let mut next = n + 1;
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        let m = merges[node - n];
        let lambda = lambda_of(m.distance);
        let (ls, rs) = (size(m.left), size(m.right));
        let parent = label[node];
        let big_l = ls >= min_cluster_size;
        let big_r = rs >= min_cluster_size;
        let fall_out = |child: usize, out: &mut Vec<CondensedEdge>| {
            let mut pts = Vec::new();
            leaves(n, merges, child, &mut pts);
            for p in pts {
                out.push(CondensedEdge { parent, child: p, lambda, size: 1 });
            }
        };
        let mut keep = Vec::new();
        if big_l && big_r {
            for (child, s) in [(m.left, ls), (m.right, rs)] {
                label[child] = next;
                out.push(CondensedEdge { parent, child: next, lambda, size: s });
                next += 1;
                keep.push(child);
            }
        } else {
            for (child, big) in [(m.left, big_l), (m.right, big_r)] {
                if big {
                    label[child] = parent;
                    keep.push(child);
                } else {
                    fall_out(child, &mut out);
                }
            }
        }
        for child in keep.into_iter().rev() {
            if child >= n {
                stack.push(child);
            } else {
                out.push(CondensedEdge { parent: label[child], child, lambda: f64::MAX, size: 1 });
            }
        }
    }
    out
}

/// Excess-of-mass stability of every cluster in a condensed tree.
pub fn stabilities(n: usize, tree: &[CondensedEdge]) -> BTreeMap<usize, f64> {
    let mut birth: BTreeMap<usize, f64> = BTreeMap::from([(n, 0.0)]);
    for e in tree.iter().filter(|e| e.child >= n) {
        birth.insert(e.child, e.lambda);
    }
    let mut stab: BTreeMap<usize, f64> = birth.keys().map(|&c| (c, 0.0)).collect();
    for e in tree {
        let b = birth[&e.parent];
        *stab.get_mut(&e.parent).unwrap() += (e.lambda.min(f64::MAX / 4.0) - b) * e.size as f64;
    }
    stab
}

/// Clusters chosen by excess of mass; the root is never selected.
pub fn select_clusters(n: usize, tree: &[CondensedEdge]) -> Vec<usize> {
    let mut stab = stabilities(n, tree);
    let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in tree.iter().filter(|e| e.child >= n) {
        children.entry(e.parent).or_default().push(e.child);
    }
    let mut selected: BTreeMap<usize, bool> = stab.keys().map(|&c| (c, true)).collect();
    let ids: Vec<usize> = stab.keys().rev().copied().filter(|&c| c != n).collect();
    for c in ids {
        let kids = children.get(&c).cloned().unwrap_or_default();
        let sub: f64 = kids.iter().map(|k| stab[k]).sum();
        if !kids.is_empty() && sub > stab[&c] {
            selected.insert(c, false);
            stab.insert(c, sub);
        } else {
            let mut stack = kids;
            while let Some(k) = stack.pop() {
                selected.insert(k, false);
                if let Some(g) = children.get(&k) {
                    stack.extend(g);
                }
            }
        }
    }
    selected.into_iter().filter(|&(c, s)| s && c != n).map(|(c, _)| c).collect()
}

/// Label every point with its selected cluster, or noise if it left the
/// root before reaching one.
fn label_points(n: usize, tree: &[CondensedEdge], selected: &[usize]) -> Vec<i32> {
    let max_id = tree.iter().map(|e| e.parent.max(e.child)).max().unwrap_or(n);
    let mut uf = UnionFind::new(max_id + 1);
    for e in tree {
        if !selected.contains(&e.child) {
            let (a, b) = (uf.find(e.parent), uf.find(e.child));
            if a != b {
                uf.parent[b] = a;
            }
        }
    }
    let raw: Vec<Option<usize>> = (0..n)
        .map(|p| {
            let r = uf.find(p);
            selected.contains(&r).then_some(r)
        })
        .collect();
    let mut ids: BTreeMap<usize, i32> = BTreeMap::new();
    raw.iter()
        .map(|r| match r {
            Some(c) => {
                let next = ids.len() as i32;
                *ids.entry(*c).or_insert(next)
            }
            None => NOISE,
        })
        .collect()
}

/// Intermediate products of a clustering run.
#[derive(Debug, Clone, PartialEq)]
pub struct HdbscanResult {
    pub labeling: ClusterLabeling,
    pub core_distances: Vec<f64>,
    pub mst: Vec<Edge>,
    pub condensed: Vec<CondensedEdge>,
}

pub fn hdbscan(x: ArrayView2<f64>, config: &HdbscanConfig) -> Result<ClusterLabeling> {
    Ok(hdbscan_detailed(x, config)?.labeling)
}

pub fn hdbscan_detailed(x: ArrayView2<f64>, config: &HdbscanConfig) -> Result<HdbscanResult> {
    let n = x.nrows();
    if config.min_cluster_size < 2 || config.min_samples < 1 {
        return Err(Error::InvalidInput("min_cluster_size must be ≥ 2 and min_samples ≥ 1".into()));
    }
    if n <= config.min_cluster_size || n <= config.min_samples {
        return Err(Error::InvalidInput(format!(
            "{n} points cannot be clustered with min_cluster_size {} and min_samples {}",
            config.min_cluster_size, config.min_samples
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("clustering input contains non-finite values".into()));
    }
    let d = distances(x);
    let core = core_distances(&d, config.min_samples);
    let mst = minimum_spanning_tree(&mutual_reachability(&d, &core));
    let merges = single_linkage(n, &mst);
    let condensed = condense(n, &merges, config.min_cluster_size);
    let selected = select_clusters(n, &condensed);
    let labels = label_points(n, &condensed, &selected);
    Ok(HdbscanResult { labeling: ClusterLabeling { labels }, core_distances: core, mst, condensed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use crate::synthetic::{axis_centers, gaussian_blobs};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    fn kruskal_weight(w: &Array2<f64>) -> f64 {
        let n = w.nrows();
        let mut edges: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((w[[i, j]], i, j));
            }
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut comp: Vec<usize> = (0..n).collect();
        let mut picked = Vec::new();
        for (wt, a, b) in edges {
            let (ca, cb) = (comp[a], comp[b]);
            if ca != cb {
                for c in comp.iter_mut() {
                    if *c == cb {
                        *c = ca;
                    }
                }
                picked.push(wt);
            }
        }
        picked.iter().sum()
    }

    fn same_partition(a: &[i32], b: &[usize]) -> bool {
        let mut map: BTreeMap<i32, usize> = BTreeMap::new();
        let mut back: BTreeMap<usize, i32> = BTreeMap::new();
        a.iter().zip(b).all(|(&x, &y)| *map.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
    }

    #[test]
    fn counts_clusters() {
        assert_eq!(cluster_count(&[-1, -1]), 0);
        assert_eq!(cluster_count(&[0, 0, 1, -1]), 2);
        assert_eq!(cluster_count(&[]), 0);
    }

    proptest! {
        #[test]
        fn cluster_count_is_set_cardinality(labels in prop::collection::vec(-1i32..12, 0..60)) {
            let set: std::collections::HashSet<i32> = labels.iter().copied().filter(|&l| l != -1).collect();
            prop_assert_eq!(cluster_count(&labels), set.len());
        }
    }

    #[test]
    fn core_distance_skips_the_point_itself() {
        let x = ndarray::array![[0.0], [1.0], [3.0], [7.0]];
        let d = distances(x.view());
        assert_eq!(core_distances(&d, 1), vec![1.0, 1.0, 2.0, 4.0]);
        assert_eq!(core_distances(&d, 2), vec![3.0, 2.0, 3.0, 6.0]);
    }

    #[test]
    fn mst_weight_matches_brute_force() {
        let mut rng = seed::rng(11);
        for n in [2usize, 3, 10, 25, 50] {
            let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-5.0..5.0));
            let d = distances(x.view());
            let ms = 1.min(n - 1);
            let mr = mutual_reachability(&d, &core_distances(&d, ms));
            let mst = minimum_spanning_tree(&mr);
            assert_eq!(mst.len(), n - 1);
            let mut ours: Vec<f64> = mst.iter().map(|e| e.2).collect();
            ours.sort_by(f64::total_cmp);
            assert_eq!(ours.iter().sum::<f64>(), kruskal_weight(&mr));
            assert_eq!(tree_weight(&mst), kruskal_weight(&mr));
        }
    }

    #[test]
    fn recovers_three_blobs_without_noise() {
        let (x, truth) = gaussian_blobs(&axis_centers(3, 2, 10.0), 100, 1.0, 5);
        let l = hdbscan(x.view(), &HdbscanConfig::default()).unwrap();
        assert_eq!(l.cluster_count(), 3);
        assert!(l.labels.iter().all(|&v| v >= 0));
        assert!(same_partition(&l.labels, &truth));
    }

    #[test]
    fn sparse_scatter_is_all_noise() {
        let x = Array2::from_shape_fn((40, 2), |(i, c)| if c == 0 { (i * i) as f64 * 10.0 } else { 0.0 });
        let l = hdbscan(x.view(), &HdbscanConfig { min_cluster_size: 5, min_samples: 3 }).unwrap();
        assert!(l.labels.iter().all(|&v| v == NOISE), "{:?}", l.labels);
    }

    #[test]
    fn permutation_equivariant() {
        let (x, _) = gaussian_blobs(&axis_centers(3, 2, 6.0), 40, 1.0, 8);
        let base = hdbscan(x.view(), &HdbscanConfig::default()).unwrap().labels;
        let mut perm: Vec<usize> = (0..x.nrows()).collect();
        perm.shuffle(&mut seed::rng(2));
        let px = Array2::from_shape_fn(x.dim(), |(i, c)| x[[perm[i], c]]);
        let pl = hdbscan(px.view(), &HdbscanConfig::default()).unwrap().labels;
        let expected: Vec<usize> = perm.iter().map(|&i| (base[i] + 1) as usize).collect();
        assert!(same_partition(&pl, &expected));
    }

    #[test]
    fn rejects_too_few_points() {
        let x = Array2::<f64>::zeros((15, 2));
        assert!(hdbscan(x.view(), &HdbscanConfig::default()).is_err());
    }

    #[test]
    fn clusters_meet_the_minimum_size() {
        let (x, _) = gaussian_blobs(&axis_centers(4, 3, 3.0), 30, 1.0, 9);
        let cfg = HdbscanConfig { min_cluster_size: 10, min_samples: 5 };
        let l = hdbscan(x.view(), &cfg).unwrap();
        let c = l.cluster_count();
        for id in 0..c as i32 {
            assert!(l.labels.iter().filter(|&&v| v == id).count() >= 10);
        }
        assert!(l.labels.iter().all(|&v| v >= -1 && v < c as i32));
    }
}
