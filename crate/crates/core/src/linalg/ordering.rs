//! Fill-reducing symmetric orderings computed on the symmetrized pattern.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Natural,
    ReverseCuthillMckee,
    #[default]
    NestedDissection,
}

/// Undirected graph in adjacency-list CSR form.
pub struct Graph<'a> {
    offsets: &'a [usize],
    adj: &'a [usize],
}

impl<'a> Graph<'a> {
    pub fn new(offsets: &'a [usize], adj: &'a [usize]) -> Self {
        Self { offsets, adj }
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    fn neighbors(&self, v: usize) -> &'a [usize] {
        &self.adj[self.offsets[v]..self.offsets[v + 1]]
    }

    fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }
}

/// Returns `perm` with `perm[k]` = original index eliminated at step `k`.
pub fn compute(kind: Ordering, g: &Graph<'_>) -> Vec<usize> {
    match kind {
        Ordering::Natural => (0..g.n()).collect(),
        Ordering::ReverseCuthillMckee => reverse_cuthill_mckee(g),
        Ordering::NestedDissection => nested_dissection(g),
    }
}

/// BFS level structure restricted to vertices with `owner[v] == id`.
struct Levels {
    order: Vec<usize>,
    starts: Vec<usize>,
}

struct Workspace {
    owner: Vec<u32>,
    seen: Vec<u32>,
    stamp: u32,
    next_id: u32,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            owner: vec![0; n],
            seen: vec![0; n],
            stamp: 0,
            next_id: 1,
        }
    }

    fn fresh_id(&mut self) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn bfs(&mut self, g: &Graph<'_>, root: usize, id: u32) -> Levels {
        self.stamp += 1;
        let stamp = self.stamp;
        let mut order = vec![root];
        let mut starts = vec![0];
        self.seen[root] = stamp;
        let mut head = 0;
        while head < order.len() {
            let end = order.len();
            starts.push(end);
            for p in head..end {
                let v = order[p];
                for &w in g.neighbors(v) {
                    if self.owner[w] == id && self.seen[w] != stamp {
                        self.seen[w] = stamp;
                        order.push(w);
                    }
                }
            }
            head = end;
            if order.len() == end {
                break;
            }
        }
        starts.dedup();
        if *starts.last().unwrap() != order.len() {
            starts.push(order.len());
        }
        Levels { order, starts }
    }

    fn pseudo_peripheral(&mut self, g: &Graph<'_>, start: usize, id: u32) -> (usize, Levels) {
        let mut root = start;
        let mut levels = self.bfs(g, root, id);
        for _ in 0..8 {
            let nl = levels.starts.len() - 1;
            let last = &levels.order[levels.starts[nl - 1]..levels.starts[nl]];
            let cand = *last
                .iter()
                .min_by_key(|&&v| (g.degree(v), v))
                .expect("level is nonempty");
            let trial = self.bfs(g, cand, id);
            if trial.starts.len() > levels.starts.len() {
                root = cand;
                levels = trial;
            } else {
                break;
            }
        }
        (root, levels)
    }
}

pub fn reverse_cuthill_mckee(g: &Graph<'_>) -> Vec<usize> {
    let n = g.n();
    let mut ws = Workspace::new(n);
    let mut placed = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    for s in 0..n {
        if placed[s] {
            continue;
        }
        let (root, _) = ws.pseudo_peripheral(g, s, 0);
        let mut queue = VecDeque::from([root]);
        placed[root] = true;
        let mut nbrs = Vec::new();
        while let Some(v) = queue.pop_front() {
            perm.push(v);
            nbrs.clear();
            nbrs.extend(g.neighbors(v).iter().copied().filter(|&w| !placed[w]));
            nbrs.sort_by_key(|&w| (g.degree(w), w));
            for &w in &nbrs {
                placed[w] = true;
                queue.push_back(w);
            }
        }
    }
    perm.reverse();
    perm
}

const LEAF_SIZE: usize = 64;

/// Recursive bisection by middle BFS levels. Each subset is ordered as
/// (first part, second part, separator). Very dense vertices are ordered last.
pub fn nested_dissection(g: &Graph<'_>) -> Vec<usize> {
    let n = g.n();
    if n == 0 {
        return Vec::new();
    }
    let mut ws = Workspace::new(n);
    let avg = g.adj.len() as f64 / n as f64;
    let dense_cut = (10.0 * avg).max(64.0) as usize;
    let mut dense = Vec::new();
    let mut sparse = Vec::with_capacity(n);
    for v in 0..n {
        if g.degree(v) > dense_cut {
            ws.owner[v] = u32::MAX;
            dense.push(v);
        } else {
            sparse.push(v);
        }
    }
    let id = ws.fresh_id();
    for &v in &sparse {
        ws.owner[v] = id;
    }
    let mut perm = Vec::with_capacity(n);
    dissect(g, &mut ws, sparse, id, &mut perm);
    perm.extend(dense);
    perm
}

fn dissect(g: &Graph<'_>, ws: &mut Workspace, nodes: Vec<usize>, id: u32, out: &mut Vec<usize>) {
    if nodes.len() <= LEAF_SIZE {
        out.extend(nodes);
        return;
    }
    // split into connected components first
    let first = ws.bfs(g, nodes[0], id);
    if first.order.len() < nodes.len() {
        let mut comps = vec![first.order];
        let mut covered = comps[0].len();
        let mut cursor = 0;
        while covered < nodes.len() {
            // components already found carry a fresh owner id
            let cid = ws.fresh_id();
            for &v in comps.last().unwrap() {
                ws.owner[v] = cid;
            }
            while ws.owner[nodes[cursor]] != id {
                cursor += 1;
            }
            let c = ws.bfs(g, nodes[cursor], id).order;
            covered += c.len();
            comps.push(c);
        }
        let cid = ws.fresh_id();
        for &v in comps.last().unwrap() {
            ws.owner[v] = cid;
        }
        for comp in comps {
            let cid = ws.owner[comp[0]];
            dissect(g, ws, comp, cid, out);
        }
        return;
    }
    let (_, levels) = ws.pseudo_peripheral(g, nodes[0], id);
    let nl = levels.starts.len() - 1;
    if nl < 3 {
        out.extend(nodes);
        return;
    }
    let half = nodes.len() / 2;
    let mut sep = 1;
    while sep < nl - 2 && levels.starts[sep + 1] < half {
        sep += 1;
    }
    let a: Vec<usize> = levels.order[..levels.starts[sep]].to_vec();
    let s: Vec<usize> = levels.order[levels.starts[sep]..levels.starts[sep + 1]].to_vec();
    let b: Vec<usize> = levels.order[levels.starts[sep + 1]..].to_vec();
    let sid = ws.fresh_id();
    for &v in &s {
        ws.owner[v] = sid;
    }
    let aid = ws.fresh_id();
    for &v in &a {
        ws.owner[v] = aid;
    }
    dissect(g, ws, a, aid, out);
    let bid = ws.fresh_id();
    for &v in &b {
        ws.owner[v] = bid;
    }
    dissect(g, ws, b, bid, out);
    out.extend(s);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_graph(nx: usize, ny: usize) -> (Vec<usize>, Vec<usize>) {
        let idx = |i: usize, j: usize| j * nx + i;
        let mut offs = vec![0];
        let mut adj = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let mut nb = Vec::new();
                if i > 0 {
                    nb.push(idx(i - 1, j));
                }
                if i + 1 < nx {
                    nb.push(idx(i + 1, j));
                }
                if j > 0 {
                    nb.push(idx(i, j - 1));
                }
                if j + 1 < ny {
                    nb.push(idx(i, j + 1));
                }
                nb.sort();
                adj.extend(nb);
                offs.push(adj.len());
            }
        }
        (offs, adj)
    }

    fn is_permutation(p: &[usize], n: usize) -> bool {
        let mut s = p.to_vec();
        s.sort();
        s == (0..n).collect::<Vec<_>>()
    }

    #[test]
    fn orderings_are_permutations() {
        let (o, a) = grid_graph(37, 23);
        let g = Graph::new(&o, &a);
        for kind in [
            Ordering::Natural,
            Ordering::ReverseCuthillMckee,
            Ordering::NestedDissection,
        ] {
            let p = compute(kind, &g);
            assert!(is_permutation(&p, 37 * 23), "{kind:?}");
        }
    }

    #[test]
    fn disconnected_graph_is_fully_ordered() {
        // two disjoint paths plus an isolated vertex
        let offs = vec![0, 1, 3, 4, 5, 6, 6];
        let adj = vec![1, 0, 2, 1, 4, 3];
        let g = Graph::new(&offs, &adj);
        assert!(is_permutation(&reverse_cuthill_mckee(&g), 6));
        assert!(is_permutation(&nested_dissection(&g), 6));
    }

    #[test]
    fn rcm_on_path_keeps_bandwidth_one() {
        let offs = vec![0, 1, 3, 5, 6];
        let adj = vec![1, 0, 2, 1, 3, 2];
        let g = Graph::new(&offs, &adj);
        let p = reverse_cuthill_mckee(&g);
        let mut pos = vec![0; 4];
        for (k, &v) in p.iter().enumerate() {
            pos[v] = k;
        }
        for v in 0..3 {
            assert_eq!((pos[v] as i64 - pos[v + 1] as i64).abs(), 1);
        }
    }
}
