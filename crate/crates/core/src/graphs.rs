//! Weighted-graph containers and the greedy maximum-weight clique and
//! maximum-weight independent-set searches, plus exhaustive oracles for
//! testing at small sizes.

use thiserror::Error;

/// What an edge means, and therefore what a "solution" is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Semantics {
    /// Edges permit coexistence; solutions are cliques.
    Compatibility,
    /// Edges forbid coexistence; solutions are independent sets.
    Conflict,
}

/// How the greedy independent-set search scores vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    Original,
    /// Score = psi(v) * sum over surviving non-adjacent v' of psi(v'),
    /// recomputed on the surviving subgraph each iteration (the vertex
    /// itself counts as non-adjacent to itself).
    Modified,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("exhaustive search refused: {0} vertices exceeds the cap of {1}")]
    TooLarge(usize, usize),
}

/// Undirected weighted graph over payloads `P`. Adjacency is kept as bitset
/// rows; vertex ids are insertion order, which all tie-breaking uses.
#[derive(Debug, Clone)]
pub struct WeightedGraph<P> {
    pub semantics: Semantics,
    payloads: Vec<P>,
    weights: Vec<f64>,
    adj: Vec<Vec<u64>>,
    words: usize,
}

impl<P> WeightedGraph<P> {
    pub fn new(semantics: Semantics) -> Self {
        Self {
            semantics,
            payloads: Vec::new(),
            weights: Vec::new(),
            adj: Vec::new(),
            words: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    pub fn payload(&self, v: usize) -> &P {
        &self.payloads[v]
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.weights[v]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn add_vertex(&mut self, payload: P, weight: f64) -> usize {
        assert!(weight.is_finite() && weight >= 0.0, "vertex weights must be finite and non-negative");
        let id = self.payloads.len();
        self.payloads.push(payload);
        self.weights.push(weight);
        let words = id / 64 + 1;
        if words > self.words {
            self.words = words;
            for row in self.adj.iter_mut() {
                row.resize(words, 0);
            }
        }
        self.adj.push(vec![0u64; self.words]);
        id
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        assert_ne!(a, b, "self-edges are not allowed");
        self.adj[a][b / 64] |= 1 << (b % 64);
        self.adj[b][a / 64] |= 1 << (a % 64);
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a][b / 64] >> (b % 64) & 1 == 1
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&u| self.adjacent(v, u))
    }

    /// Build a graph from payload/weight pairs and a pairwise predicate.
    pub fn from_pairwise(
        semantics: Semantics,
        verts: Vec<(P, f64)>,
        mut edge: impl FnMut(&P, &P) -> bool,
    ) -> Self {
        let mut g = Self::new(semantics);
        for (p, w) in verts {
            g.add_vertex(p, w);
        }
        for a in 0..g.len() {
            for b in a + 1..g.len() {
                if edge(&g.payloads[a], &g.payloads[b]) {
                    g.add_edge(a, b);
                }
            }
        }
        g
    }

    fn assert_semantics(&self, wanted: Semantics) {
        assert_eq!(self.semantics, wanted, "graph semantics do not match the requested search");
    }

    /// Greedy maximum-weight clique: repeatedly take the heaviest candidate
    /// adjacent to everything chosen so far (ties to the lowest id). When a
    /// `reweigh` callback is given, candidate weights are recomputed against
    /// the partial selection before every pick.
    pub fn greedy_max_weight_clique(
        &self,
        mut reweigh: Option<&mut dyn FnMut(&[usize], &[usize]) -> Vec<f64>>,
    ) -> Vec<usize> {
        self.assert_semantics(Semantics::Compatibility);
        let mut chosen: Vec<usize> = Vec::new();
        let mut candidates: Vec<usize> = (0..self.len()).collect();
        while !candidates.is_empty() {
            let scores: Vec<f64> = match reweigh.as_mut() {
                Some(f) => {
                    let s = f(&chosen, &candidates);
                    assert_eq!(s.len(), candidates.len());
                    s
                }
                None => candidates.iter().map(|&v| self.weights[v]).collect(),
            };
            let mut best = 0;
            for i in 1..candidates.len() {
                if scores[i] > scores[best] {
                    best = i;
                }
            }
            let v = candidates[best];
            chosen.push(v);
            candidates.retain(|&u| self.adjacent(v, u));
        }
        chosen
    }

    /// Greedy maximum-weight independent set. Picks the best-scoring vertex,
    /// removes it and its conflicting neighbors, repeats. Ties go to the
    /// larger original weight, then the lowest id.
    pub fn greedy_max_weight_independent_set(&self, mode: WeightMode) -> Vec<usize> {
        self.assert_semantics(Semantics::Conflict);
        let mut chosen = Vec::new();
        let mut alive: Vec<usize> = (0..self.len()).collect();
        while !alive.is_empty() {
            let scores: Vec<f64> = match mode {
                WeightMode::Original => alive.iter().map(|&v| self.weights[v]).collect(),
                WeightMode::Modified => alive
                    .iter()
                    .map(|&v| {
                        let pi_sum: f64 = alive
                            .iter()
                            .filter(|&&u| u == v || !self.adjacent(v, u))
                            .map(|&u| self.weights[u])
                            .sum();
                        self.weights[v] * pi_sum
                    })
                    .collect(),
            };
            let mut best = 0;
            for i in 1..alive.len() {
                let better = scores[i] > scores[best]
                    || (scores[i] == scores[best] && self.weights[alive[i]] > self.weights[alive[best]]);
                if better {
                    best = i;
                }
            }
            let v = alive[best];
            chosen.push(v);
            alive.retain(|&u| u != v && !self.adjacent(v, u));
        }
        chosen
    }

    pub fn is_clique(&self, verts: &[usize]) -> bool {
        verts
            .iter()
            .enumerate()
            .all(|(i, &a)| verts[i + 1..].iter().all(|&b| self.adjacent(a, b)))
    }

    pub fn is_independent(&self, verts: &[usize]) -> bool {
        verts
            .iter()
            .enumerate()
            .all(|(i, &a)| verts[i + 1..].iter().all(|&b| !self.adjacent(a, b)))
    }

    /// No vertex outside the set can be added without breaking the set's
    /// defining property under the graph's semantics.
    pub fn is_maximal(&self, verts: &[usize]) -> bool {
        let inside: Vec<bool> = {
            let mut m = vec![false; self.len()];
            for &v in verts {
                m[v] = true;
            }
            m
        };
        (0..self.len()).all(|u| {
            if inside[u] {
                return true;
            }
            match self.semantics {
                Semantics::Compatibility => !verts.iter().all(|&v| self.adjacent(u, v)),
                Semantics::Conflict => verts.iter().any(|&v| self.adjacent(u, v)),
            }
        })
    }

    pub fn total_weight(&self, verts: &[usize]) -> f64 {
        verts.iter().map(|&v| self.weights[v]).sum()
    }

    /// Debug dump in DOT format.
    pub fn to_dot(&self, name: &str, label: impl Fn(usize, &P) -> String) -> String {
        let mut out = String::new();
        out.push_str(&format!("graph {name} {{\n"));
        for v in 0..self.len() {
            out.push_str(&format!(
                "  v{} [label=\"{} | w={:.6}\"];\n",
                v,
                label(v, &self.payloads[v]),
                self.weights[v]
            ));
        }
        for a in 0..self.len() {
            for b in a + 1..self.len() {
                if self.adjacent(a, b) {
                    out.push_str(&format!("  v{a} -- v{b};\n"));
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

pub const EXHAUSTIVE_CAP: usize = 20;

fn exhaustive_best<P>(
    g: &WeightedGraph<P>,
    want: Semantics,
    cap: usize,
) -> Result<(Vec<usize>, f64), GraphError> {
    if g.len() > cap {
        return Err(GraphError::TooLarge(g.len(), cap));
    }
    let n = g.len();
    let mut adj_mask = vec![0u64; n];
    for a in 0..n {
        for b in 0..n {
            if a != b && g.adjacent(a, b) {
                adj_mask[a] |= 1 << b;
            }
        }
    }
    let mut best_mask = 0u64;
    let mut best_weight = 0.0f64;
    for mask in 0u64..(1 << n) {
        let mut ok = true;
        let mut m = mask;
        while m != 0 {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            let others = mask & !(1 << v);
            let fine = match want {
                Semantics::Compatibility => others & adj_mask[v] == others,
                Semantics::Conflict => others & adj_mask[v] == 0,
            };
            if !fine {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let w: f64 = (0..n).filter(|&v| mask >> v & 1 == 1).map(|v| g.weight(v)).sum();
        if w > best_weight {
            best_weight = w;
            best_mask = mask;
        }
    }
    let verts = (0..n).filter(|&v| best_mask >> v & 1 == 1).collect();
    Ok((verts, best_weight))
}

/// Exact maximum-weight clique by subset enumeration; refuses above the cap.
pub fn exhaustive_clique_oracle<P>(g: &WeightedGraph<P>) -> Result<(Vec<usize>, f64), GraphError> {
    exhaustive_best(g, Semantics::Compatibility, EXHAUSTIVE_CAP)
}

/// Exact maximum-weight independent set by subset enumeration.
pub fn exhaustive_is_oracle<P>(g: &WeightedGraph<P>) -> Result<(Vec<usize>, f64), GraphError> {
    exhaustive_best(g, Semantics::Conflict, EXHAUSTIVE_CAP)
}
