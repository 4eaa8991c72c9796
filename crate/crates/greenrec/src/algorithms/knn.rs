//! Cosine-similarity neighborhoods shared by the user-based and
//! item-based KNN recommenders. Vectors are mean-centered ratings for
//! explicit feedback (unless binarized) and binary otherwise.

use crate::par;

/// Sparse vector sorted by index.
pub type SparseVec = Vec<(u32, f64)>;

pub fn lookup(v: &SparseVec, idx: u32) -> Option<f64> {
    v.binary_search_by_key(&idx, |e| e.0).ok().map(|p| v[p].1)
}

pub fn cosine_sparse(a: &SparseVec, b: &SparseVec) -> f64 {
    let na: f64 = a.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    if na < 1e-12 || nb < 1e-12 {
        return 0.0;
    }
    let mut dot = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot / (na * nb)
}

/// All-pairs cosine over the given sparse rows, truncated to the top
/// `max_neighbors` per row (descending similarity, ascending index on
/// ties). Zero and non-positive similarities are dropped.
pub fn top_neighbors(rows: &[SparseVec], n_cols: usize, max_neighbors: usize) -> Vec<Vec<(u32, f64)>> {
    let norms: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt())
        .collect();
    // invert to column -> [(row, value)]
    let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_cols];
    for (r, row) in rows.iter().enumerate() {
        for &(c, x) in row {
            cols[c as usize].push((r as u32, x));
        }
    }
    par::map_indexed(rows.len(), |a| {
        if norms[a] < 1e-12 {
            return Vec::new();
        }
        let mut dots = vec![0.0f64; rows.len()];
        for &(c, x) in &rows[a] {
            for &(b, y) in &cols[c as usize] {
                dots[b as usize] += x * y;
            }
        }
        let mut sims: Vec<(u32, f64)> = dots
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != a && norms[b] >= 1e-12)
            .map(|(b, &d)| (b as u32, d / (norms[a] * norms[b])))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        sims.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
        sims.truncate(max_neighbors);
        sims
    })
}

/// Similarity-weighted sum used for top-N scoring: `sum(sim * x)` over
/// the neighbors that interacted with the item. Unlike a normalized
/// average, the sum rewards items backed by many strong neighbors,
/// which is what ranking quality needs.
pub fn weighted_sum(neighbors: &[(u32, f64)], rows: &[SparseVec], item: u32) -> f64 {
    let mut acc = 0.0;
    for &(v, sim) in neighbors {
        if let Some(x) = lookup(&rows[v as usize], item) {
            acc += sim * x;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_is_symmetric_and_one_on_self() {
        let a: SparseVec = vec![(0, 1.0), (2, -0.5), (5, 2.0)];
        let b: SparseVec = vec![(0, 0.3), (1, 1.0), (5, -1.0)];
        assert!((cosine_sparse(&a, &b) - cosine_sparse(&b, &a)).abs() < 1e-12);
        assert!((cosine_sparse(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vector_has_zero_similarity() {
        let a: SparseVec = vec![];
        let b: SparseVec = vec![(0, 1.0)];
        assert_eq!(cosine_sparse(&a, &b), 0.0);
    }

    #[test]
    fn top_neighbors_matches_pairwise_cosine() {
        let rows: Vec<SparseVec> = vec![
            vec![(0, 1.0), (1, 2.0)],
            vec![(0, 2.0), (1, 4.0)],
            vec![(1, 1.0), (2, -1.0)],
        ];
        let nb = top_neighbors(&rows, 3, 10);
        for (a, list) in nb.iter().enumerate() {
            for &(b, s) in list {
                let expect = cosine_sparse(&rows[a], &rows[b as usize]);
                assert!((s - expect).abs() < 1e-12);
            }
        }
        // rows 0 and 1 are parallel
        assert_eq!(nb[0][0].0, 1);
        assert!((nb[0][0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_keeps_strongest() {
        let rows: Vec<SparseVec> = vec![
            vec![(0, 1.0)],
            vec![(0, 1.0)],
            vec![(0, 1.0), (1, 1.0)],
            vec![(0, 1.0), (1, 5.0)],
        ];
        let nb = top_neighbors(&rows, 2, 1);
        assert_eq!(nb[0].len(), 1);
        assert_eq!(nb[0][0].0, 1); // identical vector, tie-break by index
    }
}
