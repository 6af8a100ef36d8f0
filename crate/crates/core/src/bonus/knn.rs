/// A memory entry returned by [`knn_distances`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// The `k` entries of `memory` closest to `query` in L2 distance, nearest
/// first. Ties keep memory order. Returns the whole memory, sorted, when it
/// holds fewer than `k` entries, and nothing when it is empty.
pub fn knn_distances<M: AsRef<[f64]>>(query: &[f64], memory: &[M], k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = memory
        .iter()
        .enumerate()
        .map(|(index, m)| Neighbor {
            index,
            distance: l2_distance(query, m.as_ref()),
        })
        .collect();
    let k = k.min(all.len());
    if k < all.len() {
        all.select_nth_unstable_by(k, |a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
        all.truncate(k);
    }
    all.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
    all
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
