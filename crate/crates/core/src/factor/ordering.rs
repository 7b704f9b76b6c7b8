use std::collections::VecDeque;

use crate::sparse::SparseMat;

/// Reverse Cuthill-McKee ordering of a symmetric-lower pattern.
/// `perm[k]` is the original index placed at position `k`.
pub fn reverse_cuthill_mckee(a: &SparseMat) -> Vec<usize> {
    let n = a.ncols();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    for nbrs in &mut adj {
        nbrs.sort_by_key(|&v| (degree[v], v));
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| (degree[v], v)).expect("unvisited node remains");
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Symmetry;

    #[test]
    fn is_a_permutation() {
        let a = SparseMat::from_triplets(
            5,
            5,
            &[(0, 0, 1.0), (4, 0, 1.0), (3, 1, 1.0), (2, 2, 1.0), (4, 3, 1.0)],
            Symmetry::SymmetricLower,
        )
        .unwrap();
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3, 4]);
    }
}
