//! Maximum-cardinality bipartite matching (Hopcroft-Karp).
//!
//! Left vertices are `0..adj.len()`, right vertices `0..right_len`. The DFS
//! is iterative so long alternating paths on large instances cannot blow
//! the stack.

use std::collections::VecDeque;

const INF: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteMatching {
    pub left: Vec<Option<usize>>,
    pub right: Vec<Option<usize>>,
    pub size: usize,
}

impl BipartiteMatching {
    pub fn is_perfect(&self) -> bool {
        self.size == self.left.len()
    }

    pub fn unmatched_left(&self) -> impl Iterator<Item = usize> + '_ {
        self.left
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_none())
            .map(|(i, _)| i)
    }
}

pub fn hopcroft_karp(adj: &[Vec<usize>], right_len: usize) -> BipartiteMatching {
    augment_matching(adj, right_len, vec![None; adj.len()])
}

/// Grows a partial matching to maximum cardinality. Pairs in `initial` must
/// be edges of `adj` and must not share a right vertex.
pub fn augment_matching(
    adj: &[Vec<usize>],
    right_len: usize,
    initial: Vec<Option<usize>>,
) -> BipartiteMatching {
    let n = adj.len();
    assert_eq!(initial.len(), n);
    let mut left = initial;
    let mut right = vec![None; right_len];
    for (u, m) in left.iter().enumerate() {
        if let Some(v) = *m {
            assert!(
                right[v].is_none(),
                "initial matching reuses right vertex {v}"
            );
            right[v] = Some(u);
        }
    }
    let mut dist = vec![INF; n];
    let mut it = vec![0usize; n];
    let mut queue = VecDeque::new();
    let mut stack = Vec::new();

    loop {
        // Layer the left side by alternating BFS from free vertices.
        queue.clear();
        for u in 0..n {
            if left[u].is_none() {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = INF;
            }
        }
        let mut reachable_free = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                match right[v] {
                    None => reachable_free = true,
                    Some(w) if dist[w] == INF => {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                    Some(_) => {}
                }
            }
        }
        if !reachable_free {
            break;
        }

        it.iter_mut().for_each(|i| *i = 0);
        let mut augmented = false;
        for root in 0..n {
            if left[root].is_some() || dist[root] != 0 {
                continue;
            }
            stack.clear();
            stack.push(root);
            while let Some(&u) = stack.last() {
                if it[u] == adj[u].len() {
                    dist[u] = INF;
                    stack.pop();
                    if let Some(&p) = stack.last() {
                        it[p] += 1;
                    }
                    continue;
                }
                let v = adj[u][it[u]];
                match right[v] {
                    None => {
                        for &x in &stack {
                            let vx = adj[x][it[x]];
                            left[x] = Some(vx);
                            right[vx] = Some(x);
                        }
                        augmented = true;
                        break;
                    }
                    Some(w) if dist[w] != INF && dist[w] == dist[u] + 1 => stack.push(w),
                    Some(_) => it[u] += 1,
                }
            }
        }
        if !augmented {
            break;
        }
    }

    let size = left.iter().filter(|m| m.is_some()).count();
    BipartiteMatching { left, right, size }
}
