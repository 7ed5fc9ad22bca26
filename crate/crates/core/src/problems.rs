//! Instance generators, canonical token encodings, and exact classical
//! oracles for three circuit-hard decision problems: undirected
//! connectivity on disjoint unions of cycles, rooted colored-tree
//! isomorphism, and the S₅ word problem.
//!
//! Every generator is a pure function of its parameters and a seed, and
//! every generated instance stores the oracle's verdict as its label, so
//! downstream consumers never have to re-derive ground truth.
//!
//! Conventions pinned here:
//!
//! * Word composition is left-to-right: the product of `[f1, f2, f3]`
//!   applies `f1` first.
//! * The tree token encoding is the parenthesized preorder form
//!   `(c child1 ... childk)` with children in stored order; isomorphism is
//!   decided on the canonical variant that sorts children bottom-up, with
//!   the color folded into every node's label.

use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("connectivity instances need at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("a tree needs at least one node")]
    EmptyTree,
    #[error("no non-isomorphic pair exists on {0} nodes (rewires preserve the only shape)")]
    NoNonIsomorphicPair(usize),
    #[error("an S5 word needs at least one letter")]
    EmptyWord,
    #[error("{0:?} is not a permutation of 1..=5")]
    BadPermutation([u8; 5]),
    #[error("bad encoding: {0}")]
    BadEncoding(String),
}

// ---------------------------------------------------------------------
// S5 permutations
// ---------------------------------------------------------------------

/// A permutation of {1..5}, stored as the image sequence: `self.0[i]` is
/// the image of `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Perm5(pub [u8; 5]);

impl Perm5 {
    pub const IDENTITY: Perm5 = Perm5([1, 2, 3, 4, 5]);

    pub fn new(images: [u8; 5]) -> Result<Perm5, ProblemError> {
        let mut seen = [false; 5];
        for &v in &images {
            if !(1..=5).contains(&v) || seen[v as usize - 1] {
                return Err(ProblemError::BadPermutation(images));
            }
            seen[v as usize - 1] = true;
        }
        Ok(Perm5(images))
    }

    /// `self` applied first, then `other` (left-to-right composition).
    pub fn then(&self, other: &Perm5) -> Perm5 {
        let mut out = [0u8; 5];
        for i in 0..5 {
            out[i] = other.0[self.0[i] as usize - 1];
        }
        Perm5(out)
    }

    pub fn inverse(&self) -> Perm5 {
        let mut out = [0u8; 5];
        for i in 0..5 {
            out[self.0[i] as usize - 1] = i as u8 + 1;
        }
        Perm5(out)
    }

    pub fn is_identity(&self) -> bool {
        *self == Perm5::IDENTITY
    }

    /// The atomic token for this group element: its image sequence as a
    /// five-digit string, e.g. `21345` for the transposition (1 2).
    pub fn token(&self) -> String {
        self.0.iter().map(|d| char::from(b'0' + d)).collect()
    }

    pub fn parse_token(s: &str) -> Result<Perm5, ProblemError> {
        let bad = || ProblemError::BadEncoding(format!("not a permutation token: {s}"));
        let digits: Vec<u8> = s
            .chars()
            .map(|ch| ch.to_digit(10).map(|d| d as u8).ok_or_else(bad))
            .collect::<Result<_, _>>()?;
        let images: [u8; 5] = digits.try_into().map_err(|_| bad())?;
        Perm5::new(images)
    }

    pub fn random(rng: &mut SplitMix64) -> Perm5 {
        let mut images = [1u8, 2, 3, 4, 5];
        rng.shuffle(&mut images);
        Perm5(images)
    }

    /// All 120 group elements in lexicographic image order.
    pub fn all() -> Vec<Perm5> {
        let mut out = Vec::with_capacity(120);
        let mut images = [1u8, 2, 3, 4, 5];
        loop {
            out.push(Perm5(images));
            // Next lexicographic permutation, or stop at the last one.
            let Some(i) = (0..4).rev().find(|&i| images[i] < images[i + 1]) else {
                break;
            };
            let j = (i + 1..5).rev().find(|&j| images[j] > images[i]).unwrap();
            images.swap(i, j);
            images[i + 1..].reverse();
        }
        out
    }
}

/// Left-to-right product of a word; the empty word is the identity.
pub fn compose_word(word: &[Perm5]) -> Perm5 {
    word.iter()
        .fold(Perm5::IDENTITY, |acc, g| acc.then(g))
}

// ---------------------------------------------------------------------
// Rooted colored trees
// ---------------------------------------------------------------------

/// A rooted tree with integer colors in [1, node count]. Children lists
/// keep their stored order: the plain token encoding is order-sensitive,
/// the isomorphism oracle is not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tree {
    pub root: usize,
    /// Color of each node, 1-based values.
    pub colors: Vec<u32>,
    /// Children of each node, in stored order.
    pub children: Vec<Vec<usize>>,
}

impl Tree {
    pub fn size(&self) -> usize {
        self.colors.len()
    }

    /// A single node of the given color.
    pub fn leaf(color: u32) -> Tree {
        Tree { root: 0, colors: vec![color], children: vec![vec![]] }
    }
}

/// Order-sensitive preorder encoding `(c child1 ... childk)`.
pub fn encode_tree_string(t: &Tree) -> String {
    fn walk(t: &Tree, v: usize, out: &mut String) {
        out.push('(');
        out.push_str(&t.colors[v].to_string());
        for &ch in &t.children[v] {
            walk(t, ch, out);
        }
        out.push(')');
    }
    let mut s = String::new();
    walk(t, t.root, &mut s);
    s
}

/// Inverse of [`encode_tree_string`]; nodes are numbered in preorder, so
/// `decode(encode(t)) == t` whenever `t` is preorder-numbered (the
/// generators here always are).
pub fn decode_tree_string(s: &str) -> Result<Tree, ProblemError> {
    let bad = |msg: &str| ProblemError::BadEncoding(format!("{msg}: {s}"));
    let chars: Vec<char> = s.chars().collect();
    let mut colors = Vec::new();
    let mut children: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '(' => {
                i += 1;
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let color: u32 = chars[start..i]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|_| bad("missing color"))?;
                let id = colors.len();
                colors.push(color);
                children.push(Vec::new());
                if let Some(&parent) = stack.last() {
                    children[parent].push(id);
                } else if id != 0 {
                    return Err(bad("multiple roots"));
                }
                stack.push(id);
            }
            ')' => {
                stack.pop().ok_or_else(|| bad("unbalanced parentheses"))?;
                i += 1;
            }
            _ => return Err(bad("unexpected character")),
        }
    }
    if !stack.is_empty() || colors.is_empty() {
        return Err(bad("unbalanced parentheses"));
    }
    Ok(Tree { root: 0, colors, children })
}

/// Canonical form deciding rooted colored isomorphism: like the plain
/// encoding but with each node's child encodings sorted, so any two
/// isomorphic trees (and only those) print the same string.
pub fn canonical_tree_string(t: &Tree) -> String {
    fn walk(t: &Tree, v: usize) -> String {
        let mut subs: Vec<String> = t.children[v].iter().map(|&ch| walk(t, ch)).collect();
        subs.sort();
        let mut s = String::from("(");
        s.push_str(&t.colors[v].to_string());
        for sub in subs {
            s.push_str(&sub);
        }
        s.push(')');
        s
    }
    walk(t, t.root)
}

/// Random preorder-numbered tree: uniform attachment, shuffled child
/// orders, colors uniform in [1, n] (all 1 when `colored` is false).
pub fn random_tree(rng: &mut SplitMix64, n: usize, colored: bool) -> Tree {
    assert!(n >= 1, "a tree needs at least one node");
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 1..n {
        let parent = rng.next_below(v as u64) as usize;
        children[parent].push(v);
    }
    for list in &mut children {
        rng.shuffle(list);
    }
    let colors: Vec<u32> = (0..n)
        .map(|_| if colored { rng.next_range(1, n as i64) as u32 } else { 1 })
        .collect();
    renumber_preorder(&Tree { root: 0, colors, children })
}

/// Rebuild with node ids assigned in preorder (children keep their order).
fn renumber_preorder(t: &Tree) -> Tree {
    let n = t.size();
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![t.root];
    while let Some(v) = stack.pop() {
        order.push(v);
        for &ch in t.children[v].iter().rev() {
            stack.push(ch);
        }
    }
    let mut new_id = vec![0usize; n];
    for (new, &old) in order.iter().enumerate() {
        new_id[old] = new;
    }
    let mut colors = vec![0u32; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for old in 0..n {
        colors[new_id[old]] = t.colors[old];
        children[new_id[old]] = t.children[old].iter().map(|&ch| new_id[ch]).collect();
    }
    Tree { root: new_id[t.root], colors, children }
}

/// Isomorphic copy: random node relabeling (colors travel with nodes) and
/// fresh child orders.
fn relabeled_copy(rng: &mut SplitMix64, t: &Tree) -> Tree {
    let n = t.size();
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let mut colors = vec![0u32; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        colors[perm[v]] = t.colors[v];
        children[perm[v]] = t.children[v].iter().map(|&ch| perm[ch]).collect();
    }
    for list in &mut children {
        rng.shuffle(list);
    }
    Tree { root: perm[t.root], colors, children }
}

/// Move one random non-root subtree under a node outside it.
fn rewire(rng: &mut SplitMix64, t: &Tree) -> Tree {
    let n = t.size();
    debug_assert!(n >= 2);
    let mut out = t.clone();
    loop {
        let v = loop {
            let v = rng.next_below(n as u64) as usize;
            if v != t.root {
                break v;
            }
        };
        let mut in_subtree = vec![false; n];
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            in_subtree[u] = true;
            stack.extend(&out.children[u]);
        }
        let old_parent = (0..n)
            .find(|&u| out.children[u].contains(&v))
            .expect("non-root node has a parent");
        let candidates: Vec<usize> =
            (0..n).filter(|&u| !in_subtree[u] && u != old_parent).collect();
        if candidates.is_empty() {
            continue;
        }
        let new_parent = candidates[rng.next_below(candidates.len() as u64) as usize];
        out.children[old_parent].retain(|&u| u != v);
        out.children[new_parent].push(v);
        return out;
    }
}

// ---------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------

/// The payload of a problem instance; the serialized form is tagged with
/// the problem kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Connectivity { edges: Vec<(u32, u32)>, query: (u32, u32) },
    TreeIso { left: Tree, right: Tree },
    S5Word { word: Vec<Perm5> },
}

/// One generated decision-problem instance with its ground-truth label
/// and canonical token sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemInstance {
    #[serde(flatten)]
    pub payload: Payload,
    pub label: bool,
    pub tokens: Vec<String>,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn kind(&self) -> &'static str {
        match self.payload {
            Payload::Connectivity { .. } => "connectivity",
            Payload::TreeIso { .. } => "tree_iso",
            Payload::S5Word { .. } => "s5_word",
        }
    }
}

// ---------------------------------------------------------------------
// Connectivity on unions of cycles
// ---------------------------------------------------------------------

/// Partition `1..=n` into random cycles of length ≥ 3 and ask whether two
/// vertices share a cycle; the query is drawn same-cycle with probability
/// one half (always, when a single cycle covers the graph).
pub fn gen_connectivity(n_vertices: usize, seed: u64) -> Result<ProblemInstance, ProblemError> {
    if n_vertices < 3 {
        return Err(ProblemError::TooFewVertices(n_vertices));
    }
    let mut rng = SplitMix64::new(seed);
    let mut vertices: Vec<u32> = (1..=n_vertices as u32).collect();
    rng.shuffle(&mut vertices);

    let mut cycles: Vec<Vec<u32>> = Vec::new();
    let mut start = 0usize;
    while start < n_vertices {
        let remaining = n_vertices - start;
        let len = if remaining < 6 {
            remaining
        } else {
            // Leave room for the next cycle: never strand 1 or 2 vertices.
            loop {
                let len = rng.next_range(3, remaining as i64) as usize;
                if remaining - len != 1 && remaining - len != 2 {
                    break len;
                }
            }
        };
        cycles.push(vertices[start..start + len].to_vec());
        start += len;
    }

    let mut edges = Vec::with_capacity(n_vertices);
    for cycle in &cycles {
        for i in 0..cycle.len() {
            edges.push((cycle[i], cycle[(i + 1) % cycle.len()]));
        }
    }

    let same_cycle = cycles.len() == 1 || rng.next_bool();
    let query = if same_cycle {
        let c = &cycles[rng.next_below(cycles.len() as u64) as usize];
        let i = rng.next_below(c.len() as u64) as usize;
        let j = loop {
            let j = rng.next_below(c.len() as u64) as usize;
            if j != i {
                break j;
            }
        };
        (c[i], c[j])
    } else {
        let a = rng.next_below(cycles.len() as u64) as usize;
        let b = loop {
            let b = rng.next_below(cycles.len() as u64) as usize;
            if b != a {
                break b;
            }
        };
        let u = cycles[a][rng.next_below(cycles[a].len() as u64) as usize];
        let v = cycles[b][rng.next_below(cycles[b].len() as u64) as usize];
        (u, v)
    };

    let payload = Payload::Connectivity { edges, query };
    let label = oracle_payload(&payload);
    assert_eq!(label, same_cycle, "generated query contradicts its construction");
    let tokens = payload_tokens(&payload);
    Ok(ProblemInstance { payload, label, tokens, seed })
}

/// Union-find with path halving.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// True when a path connects the query pair (union-find over the edges).
pub fn oracle_connectivity(inst: &ProblemInstance) -> bool {
    match &inst.payload {
        Payload::Connectivity { .. } => oracle_payload(&inst.payload),
        _ => panic!("oracle_connectivity on a {} instance", inst.kind()),
    }
}

fn oracle_payload(payload: &Payload) -> bool {
    match payload {
        Payload::Connectivity { edges, query } => {
            let top = edges
                .iter()
                .flat_map(|&(u, v)| [u, v])
                .chain([query.0, query.1])
                .max()
                .unwrap_or(0) as usize;
            let mut uf = UnionFind::new(top + 1);
            for &(u, v) in edges {
                uf.union(u as usize, v as usize);
            }
            uf.find(query.0 as usize) == uf.find(query.1 as usize)
        }
        Payload::TreeIso { left, right } => {
            canonical_tree_string(left) == canonical_tree_string(right)
        }
        Payload::S5Word { word } => compose_word(word).is_identity(),
    }
}

// ---------------------------------------------------------------------
// Tree isomorphism
// ---------------------------------------------------------------------

/// A pair of rooted trees, isomorphic or certified non-isomorphic as
/// requested. Isomorphic pairs are random relabelings with shuffled child
/// orders; non-isomorphic pairs rewire one subtree and retry until the
/// oracle confirms the shapes differ. On one or two nodes a rewire cannot
/// change the shape, so requesting a non-isomorphic pair there is an error.
pub fn gen_tree_pair(
    n_nodes: usize,
    make_isomorphic: bool,
    colored: bool,
    seed: u64,
) -> Result<ProblemInstance, ProblemError> {
    if n_nodes == 0 {
        return Err(ProblemError::EmptyTree);
    }
    if !make_isomorphic && n_nodes <= 2 {
        return Err(ProblemError::NoNonIsomorphicPair(n_nodes));
    }
    let mut rng = SplitMix64::new(seed);
    let left = random_tree(&mut rng, n_nodes, colored);
    let copy = relabeled_copy(&mut rng, &left);
    let right = if make_isomorphic {
        copy
    } else {
        let mut attempts = 0;
        loop {
            let cand = rewire(&mut rng, &copy);
            if canonical_tree_string(&cand) != canonical_tree_string(&left) {
                break cand;
            }
            attempts += 1;
            assert!(attempts < 10_000, "rewire search failed to leave the isomorphism class");
        }
    };
    let payload = Payload::TreeIso { left, right };
    let label = oracle_payload(&payload);
    assert_eq!(label, make_isomorphic, "generated pair contradicts its construction");
    let tokens = payload_tokens(&payload);
    Ok(ProblemInstance { payload, label, tokens, seed })
}

/// True when the two rooted colored trees are isomorphic (equal canonical
/// strings).
pub fn oracle_tree_iso(inst: &ProblemInstance) -> bool {
    match &inst.payload {
        Payload::TreeIso { .. } => oracle_payload(&inst.payload),
        _ => panic!("oracle_tree_iso on a {} instance", inst.kind()),
    }
}

// ---------------------------------------------------------------------
// S5 word problem
// ---------------------------------------------------------------------

/// A word over S₅ whose product is or is not the identity as requested.
/// Identity words compose a random word with its reversed inverse word
/// (with an identity letter in the middle when the length is odd);
/// non-identity words resample until the product moves some point.
pub fn gen_s5_word(
    length: usize,
    make_identity: bool,
    seed: u64,
) -> Result<ProblemInstance, ProblemError> {
    if length == 0 {
        return Err(ProblemError::EmptyWord);
    }
    let mut rng = SplitMix64::new(seed);
    let word: Vec<Perm5> = if make_identity {
        let half = length / 2;
        let prefix: Vec<Perm5> = (0..half).map(|_| Perm5::random(&mut rng)).collect();
        let mut word = prefix.clone();
        if length % 2 == 1 {
            word.push(Perm5::IDENTITY);
        }
        word.extend(prefix.iter().rev().map(Perm5::inverse));
        word
    } else {
        loop {
            let word: Vec<Perm5> = (0..length).map(|_| Perm5::random(&mut rng)).collect();
            if !compose_word(&word).is_identity() {
                break word;
            }
        }
    };
    let payload = Payload::S5Word { word };
    let label = oracle_payload(&payload);
    assert_eq!(label, make_identity, "generated word contradicts its construction");
    let tokens = payload_tokens(&payload);
    Ok(ProblemInstance { payload, label, tokens, seed })
}

/// True when the left-to-right product of the word is the identity.
pub fn oracle_s5(inst: &ProblemInstance) -> bool {
    match &inst.payload {
        Payload::S5Word { .. } => oracle_payload(&inst.payload),
        _ => panic!("oracle_s5 on a {} instance", inst.kind()),
    }
}

/// The oracle for any instance kind.
pub fn oracle(inst: &ProblemInstance) -> bool {
    oracle_payload(&inst.payload)
}

// ---------------------------------------------------------------------
// Token encodings
// ---------------------------------------------------------------------

fn payload_tokens(payload: &Payload) -> Vec<String> {
    match payload {
        Payload::Connectivity { edges, query } => {
            let mut tokens = Vec::with_capacity(3 * edges.len() + 3);
            for &(u, v) in edges {
                tokens.push("edge".to_string());
                tokens.push(u.to_string());
                tokens.push(v.to_string());
            }
            tokens.push("query".to_string());
            tokens.push(query.0.to_string());
            tokens.push(query.1.to_string());
            tokens
        }
        Payload::TreeIso { left, right } => {
            let mut tokens = tree_tokens(left);
            tokens.push("|".to_string());
            tokens.extend(tree_tokens(right));
            tokens
        }
        Payload::S5Word { word } => word.iter().map(Perm5::token).collect(),
    }
}

/// The preorder encoding split into tokens: parentheses and whole color
/// numbers.
fn tree_tokens(t: &Tree) -> Vec<String> {
    fn walk(t: &Tree, v: usize, out: &mut Vec<String>) {
        out.push("(".to_string());
        out.push(t.colors[v].to_string());
        for &ch in &t.children[v] {
            walk(t, ch, out);
        }
        out.push(")".to_string());
    }
    let mut tokens = Vec::new();
    walk(t, t.root, &mut tokens);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn handmade_two_triangles(query: (u32, u32)) -> ProblemInstance {
        let payload = Payload::Connectivity {
            edges: vec![(1, 2), (2, 3), (3, 1), (4, 5), (5, 6), (6, 4)],
            query,
        };
        let label = oracle_payload(&payload);
        let tokens = payload_tokens(&payload);
        ProblemInstance { payload, label, tokens, seed: 0 }
    }

    #[test]
    fn two_triangles_same_and_different_cycle() {
        assert!(oracle_connectivity(&handmade_two_triangles((1, 3))));
        assert!(!oracle_connectivity(&handmade_two_triangles((1, 4))));
        assert!(oracle_connectivity(&handmade_two_triangles((2, 2))));
    }

    #[test]
    fn connectivity_generator_invariants() {
        for seed in 0..50u64 {
            let n = 3 + (seed as usize % 18);
            let inst = gen_connectivity(n, seed).unwrap();
            let Payload::Connectivity { edges, query } = &inst.payload else {
                panic!("wrong payload kind");
            };
            // Every vertex has degree exactly 2.
            let mut degree = vec![0u32; n + 1];
            for &(u, v) in edges {
                assert!(u >= 1 && u as usize <= n && v >= 1 && v as usize <= n);
                degree[u as usize] += 1;
                degree[v as usize] += 1;
            }
            assert!(degree[1..].iter().all(|&d| d == 2), "degree-2 invariant broken");
            assert_eq!(edges.len(), n, "a union of cycles has n edges");
            assert_eq!(inst.label, oracle_connectivity(&inst));
            assert!(query.0 >= 1 && query.0 as usize <= n);
            // Tokens: one triple per edge plus the query triple.
            assert_eq!(inst.tokens.len(), 3 * edges.len() + 3);
            assert_eq!(inst.tokens[0], "edge");
            assert_eq!(inst.tokens[inst.tokens.len() - 3], "query");
        }
        assert!(gen_connectivity(2, 0).is_err());
    }

    #[test]
    fn connectivity_generator_is_deterministic() {
        let a = gen_connectivity(12, 424242).unwrap();
        let b = gen_connectivity(12, 424242).unwrap();
        assert_eq!(format!("{:?}", a.payload), format!("{:?}", b.payload));
        assert_eq!(a.tokens, b.tokens);
        assert_eq!(a.label, b.label);
    }

    #[test]
    fn connectivity_generator_hits_both_labels() {
        let labels: Vec<bool> = (0..40)
            .map(|s| gen_connectivity(12, s).unwrap().label)
            .collect();
        assert!(labels.iter().any(|&l| l));
        assert!(labels.iter().any(|&l| !l));
    }

    #[test]
    fn tree_encoding_examples() {
        assert_eq!(encode_tree_string(&Tree::leaf(1)), "(1)");
        let t = Tree {
            root: 0,
            colors: vec![1, 2, 3],
            children: vec![vec![1, 2], vec![], vec![]],
        };
        assert_eq!(encode_tree_string(&t), "(1(2)(3))");
        assert_eq!(
            tree_tokens(&t),
            vec!["(", "1", "(", "2", ")", "(", "3", ")", ")"]
        );
    }

    #[test]
    fn tree_encoding_round_trips() {
        let mut rng = SplitMix64::new(7);
        for trial in 0..300 {
            let n = 1 + (trial % 12);
            let t = random_tree(&mut rng, n, trial % 2 == 0);
            let back = decode_tree_string(&encode_tree_string(&t)).unwrap();
            assert_eq!(back, t, "round trip changed the tree");
        }
        assert!(decode_tree_string("(1(2)").is_err());
        assert!(decode_tree_string("(1)(2)").is_err());
        assert!(decode_tree_string("()").is_err());
        assert!(decode_tree_string("").is_err());
    }

    #[test]
    fn isomorphism_oracle_basics() {
        let chain = decode_tree_string("(1(1(1)))").unwrap();
        let star = decode_tree_string("(1(1)(1))").unwrap();
        assert_ne!(canonical_tree_string(&chain), canonical_tree_string(&star));
        // Child order is invisible to the canonical form.
        let ab = decode_tree_string("(1(2)(3))").unwrap();
        let ba = decode_tree_string("(1(3)(2))").unwrap();
        assert_eq!(canonical_tree_string(&ab), canonical_tree_string(&ba));
        // Colors are not.
        let recolored = decode_tree_string("(2(2)(3))").unwrap();
        assert_ne!(canonical_tree_string(&ab), canonical_tree_string(&recolored));
        // Multi-digit colors cannot be confused with nested nodes.
        let wide = Tree::leaf(12);
        let nested = decode_tree_string("(1(2))").unwrap();
        assert_ne!(canonical_tree_string(&wide), canonical_tree_string(&nested));
    }

    #[test]
    fn tree_pair_generator_invariants() {
        for seed in 0..40u64 {
            let n = 3 + (seed as usize % 8);
            let iso = seed % 2 == 0;
            let colored = seed % 3 == 0;
            let inst = gen_tree_pair(n, iso, colored, seed).unwrap();
            assert_eq!(inst.label, iso);
            assert_eq!(inst.label, oracle_tree_iso(&inst));
            let Payload::TreeIso { left, right } = &inst.payload else {
                panic!("wrong payload kind");
            };
            assert_eq!(left.size(), n);
            assert_eq!(right.size(), n);
            assert!(inst.tokens.contains(&"|".to_string()));
        }
        let again = gen_tree_pair(6, true, true, 99).unwrap();
        let again2 = gen_tree_pair(6, true, true, 99).unwrap();
        assert_eq!(again.tokens, again2.tokens);
    }

    #[test]
    fn impossible_tree_pairs_are_errors() {
        assert!(gen_tree_pair(0, true, false, 1).is_err());
        assert!(gen_tree_pair(1, false, false, 1).is_err());
        assert!(gen_tree_pair(2, false, true, 1).is_err());
        assert!(gen_tree_pair(1, true, false, 1).is_ok());
        assert!(gen_tree_pair(2, true, true, 1).is_ok());
    }

    #[test]
    fn perm_composition_is_left_to_right() {
        // (1 2) then (2 3): 1 -> 2 -> 3.
        let f = Perm5::new([2, 1, 3, 4, 5]).unwrap();
        let g = Perm5::new([1, 3, 2, 4, 5]).unwrap();
        let fg = f.then(&g);
        assert_eq!(fg.0, [3, 1, 2, 4, 5]);
        assert_eq!(compose_word(&[f, g]).0, fg.0);
        assert!(f.then(&f.inverse()).is_identity());
        assert!(Perm5::new([1, 1, 2, 3, 4]).is_err());
    }

    #[test]
    fn all_group_elements_are_distinct() {
        let all = Perm5::all();
        assert_eq!(all.len(), 120);
        let tokens: std::collections::HashSet<String> =
            all.iter().map(Perm5::token).collect();
        assert_eq!(tokens.len(), 120);
        for g in &all {
            assert_eq!(Perm5::parse_token(&g.token()).unwrap(), *g);
        }
    }

    #[test]
    fn s5_frozen_examples() {
        let id_word = Payload::S5Word { word: vec![Perm5::IDENTITY; 4] };
        assert!(oracle_payload(&id_word));
        let swap = Perm5::new([2, 1, 3, 4, 5]).unwrap();
        assert!(oracle_payload(&Payload::S5Word { word: vec![swap, swap] }));
        assert!(!oracle_payload(&Payload::S5Word { word: vec![swap] }));
    }

    #[test]
    fn s5_generator_invariants() {
        for seed in 0..60u64 {
            let len = 1 + (seed as usize % 9);
            let ident = seed % 2 == 0;
            let inst = gen_s5_word(len, ident, seed).unwrap();
            let Payload::S5Word { word } = &inst.payload else {
                panic!("wrong payload kind");
            };
            assert_eq!(word.len(), len);
            assert_eq!(inst.label, ident);
            assert_eq!(inst.label, oracle_s5(&inst));
            assert_eq!(inst.tokens.len(), len);
            assert!(inst.tokens.iter().all(|t| t.len() == 5));
        }
        assert!(gen_s5_word(0, true, 1).is_err());
    }

    #[test]
    fn composition_is_associative() {
        fn balanced(word: &[Perm5]) -> Perm5 {
            match word.len() {
                0 => Perm5::IDENTITY,
                1 => word[0],
                n => balanced(&word[..n / 2]).then(&balanced(&word[n / 2..])),
            }
        }
        let mut rng = SplitMix64::new(0x5e5);
        for _ in 0..1000 {
            let len = 1 + rng.next_below(12) as usize;
            let word: Vec<Perm5> = (0..len).map(|_| Perm5::random(&mut rng)).collect();
            assert_eq!(compose_word(&word), balanced(&word));
        }
    }

    #[test]
    fn instances_serialize_round_trip() {
        for inst in [
            gen_connectivity(9, 3).unwrap(),
            gen_tree_pair(5, false, true, 3).unwrap(),
            gen_s5_word(6, true, 3).unwrap(),
        ] {
            let text = serde_json::to_string(&inst).unwrap();
            assert!(text.contains(&format!("\"kind\":\"{}\"", inst.kind())));
            let back: ProblemInstance = serde_json::from_str(&text).unwrap();
            assert_eq!(back.label, inst.label);
            assert_eq!(back.tokens, inst.tokens);
            assert_eq!(oracle(&back), oracle(&inst));
        }
    }
}
