/// A proper vertex coloring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    pub colors: Vec<usize>,
    pub count: usize,
}

/// Greedy coloring in largest-degree-first order (ties by index); each node
/// takes the smallest color unused by its already-colored neighbors.
pub fn greedy_color(n: usize, edges: &[(usize, usize)]) -> Coloring {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u != v {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| adj[y].len().cmp(&adj[x].len()).then(x.cmp(&y)));

    const UNSET: usize = usize::MAX;
    let mut colors = vec![UNSET; n];
    let mut taken = Vec::new();
    for &u in &order {
        taken.clear();
        taken.resize(adj[u].len() + 1, false);
        for &w in &adj[u] {
            if colors[w] != UNSET && colors[w] < taken.len() {
                taken[colors[w]] = true;
            }
        }
        colors[u] = taken.iter().position(|&t| !t).expect("degree + 1 slots");
    }
    let count = colors.iter().max().map_or(0, |m| m + 1);
    Coloring { colors, count }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proper(n: usize, edges: &[(usize, usize)]) -> Coloring {
        let c = greedy_color(n, edges);
        assert!(edges.iter().all(|&(u, v)| c.colors[u] != c.colors[v]));
        c
    }

    #[test]
    fn path_needs_two() {
        assert_eq!(proper(3, &[(0, 1), (1, 2)]).count, 2);
    }

    #[test]
    fn triangle_needs_three() {
        assert_eq!(proper(3, &[(0, 1), (1, 2), (0, 2)]).count, 3);
    }

    #[test]
    fn five_cycle_uses_three() {
        let c = proper(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        assert_eq!(c.colors, vec![0, 1, 0, 1, 2]);
        assert_eq!(c.count, 3);
    }

    #[test]
    fn isolated_nodes_share_color_zero() {
        assert_eq!(proper(4, &[]).colors, vec![0; 4]);
        assert_eq!(greedy_color(0, &[]).count, 0);
    }
}
