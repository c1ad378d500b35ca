// SPDX-License-Identifier: Apache-2.0

//! Compact adjacency lists and strongly connected components.

/// Compressed sparse row adjacency.
#[derive(Debug, Clone, Default)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    /// Builds from `(from, to)` pairs; neighbor lists are sorted and
    /// deduplicated.
    pub fn from_edges(nodes: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut pairs: Vec<(u32, u32)> = edges.into_iter().collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut offsets = vec![0usize; nodes + 1];
        for &(from, _) in &pairs {
            offsets[from as usize + 1] += 1;
        }
        for i in 0..nodes {
            offsets[i + 1] += offsets[i];
        }
        let targets = pairs.into_iter().map(|(_, to)| to).collect();
        Self { offsets, targets }
    }

    /// Builds by asking `fill` for each node's neighbor list in turn.
    pub fn from_fn(nodes: usize, mut fill: impl FnMut(usize, &mut Vec<u32>)) -> Self {
        let mut offsets = Vec::with_capacity(nodes + 1);
        let mut targets = Vec::new();
        let mut buf = Vec::new();
        offsets.push(0);
        for u in 0..nodes {
            buf.clear();
            fill(u, &mut buf);
            targets.extend_from_slice(&buf);
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.targets[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Transposed graph (counting sort, neighbor lists ascending).
    pub fn reversed(&self) -> Self {
        let n = self.node_count();
        let mut offsets = vec![0usize; n + 1];
        for &v in &self.targets {
            offsets[v as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0u32; self.targets.len()];
        for u in 0..n {
            for &v in self.neighbors(u) {
                targets[cursor[v as usize]] = u as u32;
                cursor[v as usize] += 1;
            }
        }
        Self { offsets, targets }
    }
}

/// Strongly connected components (iterative Tarjan).
///
/// Returns the component index of every node plus the component count.
/// Components are numbered in reverse topological order of the condensation.
pub fn strongly_connected(graph: &Csr) -> (Vec<u32>, usize) {
    const UNVISITED: u32 = u32::MAX;
    let n = graph.node_count();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNVISITED; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut call: Vec<(u32, usize)> = Vec::new();
    let mut next_index = 0u32;
    let mut comp_count = 0usize;

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root as u32, 0));
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root as u32);
        on_stack[root] = true;

        while let Some(top) = call.last_mut() {
            let v = top.0 as usize;
            let neigh = graph.neighbors(v);
            if top.1 < neigh.len() {
                let w = neigh[top.1] as usize;
                top.1 += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w as u32);
                    on_stack[w] = true;
                    call.push((w as u32, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    let p = parent as usize;
                    lowlink[p] = lowlink[p].min(lowlink[v]);
                }
                if lowlink[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow") as usize;
                        on_stack[w] = false;
                        comp[w] = comp_count as u32;
                        if w == v {
                            break;
                        }
                    }
                    comp_count += 1;
                }
            }
        }
    }
    (comp, comp_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cycles_and_a_tail() {
        // 0 <-> 1 -> 2 -> 3 -> 2, 4 isolated
        let g = Csr::from_edges(5, [(0, 1), (1, 0), (1, 2), (2, 3), (3, 2)]);
        let (comp, count) = strongly_connected(&g);
        assert_eq!(count, 3);
        assert_eq!(comp[0], comp[1]);
        assert_eq!(comp[2], comp[3]);
        assert_ne!(comp[0], comp[2]);
        // sink component numbered first
        assert!(comp[2] < comp[0]);
    }

    #[test]
    fn long_chain_does_not_recurse() {
        let n = 200_000u32;
        let g = Csr::from_edges(n as usize, (0..n - 1).map(|i| (i, i + 1)));
        let (_, count) = strongly_connected(&g);
        assert_eq!(count, n as usize);
    }

    #[test]
    fn reversed_edges() {
        let g = Csr::from_edges(3, [(0, 1), (0, 2)]);
        let r = g.reversed();
        assert_eq!(r.neighbors(1), &[0]);
        assert_eq!(r.neighbors(2), &[0]);
        assert!(r.neighbors(0).is_empty());
    }
}
