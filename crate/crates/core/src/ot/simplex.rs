//! Primal network simplex for the uncapacitated transportation problem on a growing arc set.

/// Sources are nodes `0..n`, sinks `n..n+m`, and node `n+m` is the artificial root.
pub(crate) struct NetworkSimplex {
    n: usize,
    m: usize,
    src: Vec<usize>,
    dst: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    depth: Vec<usize>,
    children: Vec<Vec<usize>>,
    pi: Vec<f64>,
    next_block: usize,
    eps: f64,
    pub pivots: usize,
}

const NONE: usize = usize::MAX;

impl NetworkSimplex {
    /// Starts from the tree of artificial arcs through the root.
    pub fn new(supply: &[f64], demand: &[f64], max_cost: f64) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let root = n + m;
        let art = 2.0 * max_cost + 1.0;
        let mut s = NetworkSimplex {
            n,
            m,
            src: Vec::new(),
            dst: Vec::new(),
            cost: Vec::new(),
            flow: Vec::new(),
            in_tree: Vec::new(),
            parent: vec![root; n + m + 1],
            pred: vec![NONE; n + m + 1],
            depth: vec![1; n + m + 1],
            children: vec![Vec::new(); n + m + 1],
            pi: vec![0.0; n + m + 1],
            next_block: 0,
            eps: 1e-13 * (1.0 + max_cost),
            pivots: 0,
        };
        s.parent[root] = NONE;
        s.depth[root] = 0;
        for (i, &f) in supply.iter().enumerate() {
            s.push_arc(i, root, art, f, true);
            s.pred[i] = i;
            s.pi[i] = -art;
            s.children[root].push(i);
        }
        for (j, &g) in demand.iter().enumerate() {
            s.push_arc(root, n + j, art, g, true);
            s.pred[n + j] = n + j;
            s.pi[n + j] = art;
            s.children[root].push(n + j);
        }
        s
    }

    fn push_arc(&mut self, u: usize, v: usize, c: f64, x: f64, tree: bool) {
        self.src.push(u);
        self.dst.push(v);
        self.cost.push(c);
        self.flow.push(x);
        self.in_tree.push(tree);
    }

    pub fn artificial_arcs(&self) -> usize {
        self.n + self.m
    }

    pub fn add_arc(&mut self, i: usize, j: usize, c: f64) {
        self.push_arc(i, self.n + j, c, 0.0, false);
    }

    pub fn arc_count(&self) -> usize {
        self.src.len()
    }

    /// Reduced cost `c_ij + π_i − π_j` of a real pair.
    pub fn reduced_cost(&self, i: usize, j: usize, c: f64) -> f64 {
        c + self.pi[i] - self.pi[self.n + j]
    }

    pub fn sink_potential(&self, j: usize) -> f64 {
        self.pi[self.n + j]
    }

    /// Real arcs `(i, j, flow)` with positive flow.
    pub fn real_flows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (self.artificial_arcs()..self.arc_count())
            .filter(|&a| self.flow[a] > 0.0)
            .map(|a| (self.src[a], self.dst[a] - self.n, self.flow[a]))
    }

    pub fn artificial_flow(&self) -> f64 {
        self.flow[..self.artificial_arcs()].iter().sum()
    }

    fn rc(&self, a: usize) -> f64 {
        self.cost[a] + self.pi[self.src[a]] - self.pi[self.dst[a]]
    }

    fn find_entering(&mut self) -> Option<usize> {
        let first = self.artificial_arcs();
        let total = self.arc_count() - first;
        if total == 0 {
            return None;
        }
        let block = ((total as f64).sqrt() as usize).max(16).min(total);
        let mut scanned = 0;
        let mut pos = self.next_block.max(first);
        if pos >= self.arc_count() {
            pos = first;
        }
        let mut best = NONE;
        let mut best_rc = -self.eps;
        let mut in_block = 0;
        while scanned < total {
            if !self.in_tree[pos] {
                let r = self.rc(pos);
                if r < best_rc {
                    best_rc = r;
                    best = pos;
                }
            }
            scanned += 1;
            in_block += 1;
            pos += 1;
            if pos == self.arc_count() {
                pos = first;
            }
            if in_block == block {
                if best != NONE {
                    break;
                }
                in_block = 0;
            }
        }
        self.next_block = pos;
        (best != NONE).then_some(best)
    }

    /// Runs pivots until no arc in the current set has negative reduced cost.
    pub fn optimize(&mut self) {
        while let Some(e) = self.find_entering() {
            self.pivot(e);
        }
    }

    fn pivot(&mut self, e: usize) {
        self.pivots += 1;
        let (u, v) = (self.src[e], self.dst[e]);
        // join point
        let (mut a, mut b) = (u, v);
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        let join = a;
        // leaving arc: u side uses strict comparison, v side non-strict
        let mut delta = f64::INFINITY;
        let mut leave_node = NONE;
        let mut on_u_side = true;
        let mut w = u;
        while w != join {
            let arc = self.pred[w];
            if self.src[arc] == w && self.flow[arc] < delta {
                delta = self.flow[arc];
                leave_node = w;
            }
            w = self.parent[w];
        }
        let mut w = v;
        while w != join {
            let arc = self.pred[w];
            if self.dst[arc] == w && self.flow[arc] <= delta {
                delta = self.flow[arc];
                leave_node = w;
                on_u_side = false;
            }
            w = self.parent[w];
        }
        if leave_node == NONE {
            // cannot happen for a bounded problem with the artificial root
            return;
        }
        if delta > 0.0 {
            self.flow[e] += delta;
            let mut w = u;
            while w != join {
                let arc = self.pred[w];
                if self.src[arc] == w {
                    self.flow[arc] -= delta;
                } else {
                    self.flow[arc] += delta;
                }
                w = self.parent[w];
            }
            let mut w = v;
            while w != join {
                let arc = self.pred[w];
                if self.dst[arc] == w {
                    self.flow[arc] -= delta;
                } else {
                    self.flow[arc] += delta;
                }
                w = self.parent[w];
            }
            self.flow[self.pred[leave_node]] = 0.0;
        }
        let leaving = self.pred[leave_node];
        self.in_tree[leaving] = false;
        self.in_tree[e] = true;
        let (new_root, hang) = if on_u_side { (u, v) } else { (v, u) };
        let shift = if on_u_side { -self.rc(e) } else { self.rc(e) };
        // detach the cut subtree
        let top = self.parent[leave_node];
        let kids = &mut self.children[top];
        let pos = kids.iter().position(|&k| k == leave_node).expect("tree child");
        kids.swap_remove(pos);
        // reverse parent pointers along new_root .. leave_node
        let mut prev = hang;
        let mut prev_arc = e;
        let mut w = new_root;
        loop {
            let old_parent = self.parent[w];
            let old_arc = self.pred[w];
            if w != new_root {
                let kids = &mut self.children[w];
                let pos = kids.iter().position(|&k| k == prev).expect("tree child");
                kids.swap_remove(pos);
            }
            self.parent[w] = prev;
            self.pred[w] = prev_arc;
            if prev != hang {
                self.children[prev].push(w);
            }
            if w == leave_node {
                break;
            }
            prev = w;
            prev_arc = old_arc;
            w = old_parent;
        }
        self.children[hang].push(new_root);
        // depths and potentials of the moved subtree
        let mut stack = vec![new_root];
        while let Some(x) = stack.pop() {
            self.depth[x] = self.depth[self.parent[x]] + 1;
            self.pi[x] += shift;
            stack.extend(self.children[x].iter().copied());
        }
    }
}
