//! Agglomerative hierarchical clustering of cosine similarities, used to
//! produce the initial assignment of embeddings to speakers.

use ndarray::{Array2, ArrayView2};

use crate::{Error, Result};

/// Linkage rule for merging clusters. Only average linkage on the
/// precomputed similarity matrix is supported; merged similarities are
/// averages of the original entries, never recomputed from centroids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linkage {
    #[default]
    Average,
}

/// Stopping threshold on cosine similarity. Merging continues while the
/// best cluster-pair average similarity is at least `threshold`.
#[derive(Debug, Clone, Copy)]
pub struct AhcConfig {
    pub threshold: f64,
    pub linkage: Linkage,
}

impl AhcConfig {
    pub fn new(threshold: f64) -> Self {
        AhcConfig {
            threshold,
            linkage: Linkage::Average,
        }
    }
}

/// Pairwise cosine similarities with a unit diagonal.
pub fn cosine_similarity_matrix(vectors: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = vectors.nrows();
    let mut norms = Vec::with_capacity(n);
    for (index, row) in vectors.outer_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateRow { index });
        }
        norms.push(norm);
    }
    let mut sim = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        sim[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let dot = vectors.row(i).dot(&vectors.row(j));
            let v = dot / (norms[i] * norms[j]);
            sim[(i, j)] = v;
            sim[(j, i)] = v;
        }
    }
    Ok(sim)
}

/// Average-linkage clustering over a precomputed similarity matrix.
///
/// Repeatedly merges the pair of clusters with the highest average pairwise
/// similarity until the best candidate falls below the threshold. Ties go to
/// the lowest (i, j) pair, ordering clusters by their smallest original
/// member. Labels are 0-based, contiguous and first-occurrence ordered.
///
/// Each cluster caches its best partner; average linkage is reducible (the
/// merged similarity never exceeds the two originals), so a cached entry
/// only goes stale when its partner was just merged. That keeps the whole
/// run near O(N^2) instead of rescanning every pair per merge.
pub fn cluster(sim: ArrayView2<f64>, cfg: &AhcConfig) -> Result<Vec<usize>> {
    let n = sim.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("no rows to cluster".into()));
    }
    if sim.ncols() != n {
        return Err(Error::invalid(format!(
            "similarity matrix is {}x{}, expected square",
            n,
            sim.ncols()
        )));
    }
    let Linkage::Average = cfg.linkage;

    // members[c] lists original indices; sums[(a, b)] accumulates the total
    // original similarity between clusters a and b so averages never touch
    // merged centroids.
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut sums = sim.to_owned();
    let mut alive: Vec<bool> = vec![true; n];
    let mut n_alive = n;

    // Per-cluster best partner (smallest index on ties) and its average.
    let recompute_best = |c: usize,
                          sums: &Array2<f64>,
                          members: &[Vec<usize>],
                          alive: &[bool]|
     -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for d in 0..sums.nrows() {
            if d == c || !alive[d] {
                continue;
            }
            let avg = sums[(c, d)] / (members[c].len() * members[d].len()) as f64;
            if best.is_none_or(|(_, v)| avg > v) {
                best = Some((d, avg));
            }
        }
        best
    };
    let mut best: Vec<Option<(usize, f64)>> = (0..n)
        .map(|c| recompute_best(c, &sums, &members, &alive))
        .collect();

    while n_alive > 1 {
        // Lexicographically first pair among the maxima: scan ascending
        // with a strict comparison.
        let mut top: Option<(usize, usize, f64)> = None;
        for c in 0..n {
            if !alive[c] {
                continue;
            }
            let (d, avg) = best[c].expect("alive cluster has a partner");
            if top.is_none_or(|(_, _, v)| avg > v) {
                top = Some((c.min(d), c.max(d), avg));
            }
        }
        let (a, b, avg) = top.expect("two clusters alive");
        if avg < cfg.threshold {
            break;
        }

        for c in 0..n {
            if alive[c] && c != a && c != b {
                let add = sums[(b, c)];
                sums[(a, c)] += add;
                sums[(c, a)] = sums[(a, c)];
            }
        }
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        alive[b] = false;
        n_alive -= 1;
        if n_alive == 1 {
            break;
        }

        best[a] = recompute_best(a, &sums, &members, &alive);
        for c in 0..n {
            if !alive[c] || c == a {
                continue;
            }
            match best[c] {
                // A cached partner that just merged is stale.
                Some((d, _)) if d == a || d == b => {
                    best[c] = recompute_best(c, &sums, &members, &alive);
                }
                Some((d, v)) => {
                    let avg = sums[(c, a)] / (members[c].len() * members[a].len()) as f64;
                    if avg > v || (avg == v && a < d) {
                        best[c] = Some((a, avg));
                    }
                }
                None => unreachable!("alive cluster lost its partner"),
            }
        }
    }

    // First-occurrence labeling over original indices.
    let mut cluster_of = vec![usize::MAX; n];
    for (c, m) in members.iter().enumerate() {
        if alive[c] {
            for &i in m {
                cluster_of[i] = c;
            }
        }
    }
    let mut relabel: Vec<Option<usize>> = vec![None; n];
    let mut labels = Vec::with_capacity(n);
    let mut next = 0;
    for &c in &cluster_of {
        let label = *relabel[c].get_or_insert_with(|| {
            let l = next;
            next += 1;
            l
        });
        labels.push(label);
    }
    Ok(labels)
}
