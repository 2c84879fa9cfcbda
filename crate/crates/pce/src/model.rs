//! Relations, conjunctive queries, hypergraphs, variable orderings, and
//! acyclicity tests. The vocabulary every other module speaks.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An opaque, totally ordered scalar. Integers sort numerically, strings
/// lexicographically, and every integer sorts before every string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl Value {
    /// Integer-looking text becomes an integer; everything else stays a string.
    pub fn parse(text: &str) -> Value {
        match text.parse::<i64>() {
            Ok(n) => Value::Int(n),
            Err(_) => Value::Str(text.to_string()),
        }
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Int(_), Value::Str(_)) => Ordering::Less,
            (Value::Str(_), Value::Int(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => write!(f, "{s}"),
        }
    }
}

/// A named finite set of tuples over a fixed attribute list.
///
/// Tuples are deduplicated and kept sorted, so iteration order is
/// deterministic and cardinality reflects set semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    name: String,
    attributes: Vec<String>,
    tuples: Vec<Vec<Value>>,
}

impl Relation {
    pub fn new(
        name: impl Into<String>,
        attributes: Vec<String>,
        rows: Vec<Vec<Value>>,
    ) -> Result<Relation> {
        let name = name.into();
        let mut seen = BTreeSet::new();
        for a in &attributes {
            if !seen.insert(a.clone()) {
                return Err(Error::Input(format!(
                    "relation {name}: duplicate attribute {a}"
                )));
            }
        }
        let arity = attributes.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != arity {
                return Err(Error::Input(format!(
                    "relation {name}: row {i} has arity {} but the relation has {arity} attributes",
                    row.len()
                )));
            }
        }
        let mut tuples = rows;
        tuples.sort();
        tuples.dedup();
        Ok(Relation {
            name,
            attributes,
            tuples,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn attr_index(&self, attr: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a == attr)
            .ok_or_else(|| {
                Error::Input(format!("relation {}: unknown attribute {attr}", self.name))
            })
    }

    pub fn tuples(&self) -> &[Vec<Value>] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

/// One body atom: a relation name applied to query variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<String>,
}

/// A conjunctive query `Head(vars) :- Atom1(vars), ..., AtomM(vars).`
///
/// Variables are identified by name; `vars()` lists them in first-occurrence
/// order over the body, and variable sets elsewhere in the crate are bitmasks
/// relative to that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjunctiveQuery {
    name: String,
    head: Vec<String>,
    atoms: Vec<Atom>,
    vars: Vec<String>,
}

impl ConjunctiveQuery {
    pub fn new(name: impl Into<String>, head: Vec<String>, atoms: Vec<Atom>) -> Result<Self> {
        let name = name.into();
        if atoms.is_empty() {
            return Err(Error::Parse {
                pos: 0,
                msg: "query body is empty".into(),
            });
        }
        let mut vars: Vec<String> = Vec::new();
        for atom in &atoms {
            if atom.args.is_empty() {
                return Err(Error::Parse {
                    pos: 0,
                    msg: format!("atom {} has no arguments", atom.relation),
                });
            }
            let mut within: BTreeSet<&str> = BTreeSet::new();
            for v in &atom.args {
                if !within.insert(v) {
                    return Err(Error::Parse {
                        pos: 0,
                        msg: format!(
                            "variable {v} repeats within atom {}; repeated variables in one atom are not supported",
                            atom.relation
                        ),
                    });
                }
                if !vars.iter().any(|w| w == v) {
                    vars.push(v.clone());
                }
            }
        }
        for h in &head {
            if !vars.iter().any(|v| v == h) {
                return Err(Error::Parse {
                    pos: 0,
                    msg: format!("head variable {h} does not occur in the body"),
                });
            }
        }
        Ok(ConjunctiveQuery {
            name,
            head,
            atoms,
            vars,
        })
    }

    /// Parse the textual form `Head(v1,...,vk) :- R(w,...), S(w,...).`
    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).query()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn head_vars(&self) -> &[String] {
        &self.head
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// All query variables in first-occurrence order.
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::Input(format!("unknown query variable {name}")))
    }

    /// Bitmask of the named variables relative to `vars()` order.
    pub fn var_mask<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Result<u64> {
        let mut mask = 0u64;
        for n in names {
            mask |= 1u64 << self.var_index(n)?;
        }
        Ok(mask)
    }

    /// Mask with one bit per query variable.
    pub fn full_mask(&self) -> u64 {
        if self.vars.len() >= 64 {
            panic!("queries with 64+ variables are not supported");
        }
        (1u64 << self.vars.len()) - 1
    }

    /// Names of the variables in `mask`, in `vars()` order.
    pub fn mask_vars(&self, mask: u64) -> Vec<String> {
        self.vars
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, v)| v.clone())
            .collect()
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) :- ", self.name, self.head.join(","))?;
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}({})", atom.relation, atom.args.join(","))?;
        }
        write!(f, ".")
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser { text, pos: 0 }
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() {
            let b = bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'%' {
                // comment runs to end of line
                while self.pos < bytes.len() && bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.as_bytes().get(self.pos).copied()
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        self.skip_ws();
        if self.text[self.pos..].starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len()
            && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected an identifier"));
        }
        Ok(self.text[start..self.pos].to_string())
    }

    fn var_list(&mut self, allow_empty: bool) -> Result<Vec<String>> {
        self.expect("(")?;
        let mut vars = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b')') {
            self.pos += 1;
            if vars.is_empty() && !allow_empty {
                return Err(self.error("expected at least one variable"));
            }
            return Ok(vars);
        }
        loop {
            vars.push(self.ident()?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    return Ok(vars);
                }
                _ => return Err(self.error("expected `,` or `)`")),
            }
        }
    }

    fn query(&mut self) -> Result<ConjunctiveQuery> {
        let name = self.ident()?;
        let head = self.var_list(true)?;
        self.expect(":-")?;
        let mut atoms = Vec::new();
        loop {
            let rel = self.ident()?;
            let args = self.var_list(false)?;
            atoms.push(Atom {
                relation: rel,
                args,
            });
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'.') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.error("expected `,` or `.`")),
            }
        }
        self.skip_ws();
        if self.pos != self.text.len() {
            return Err(self.error("trailing input after query"));
        }
        ConjunctiveQuery::new(name, head, atoms)
    }
}

/// The query's hypergraph: one vertex per variable, one edge per atom.
/// Duplicate edges are preserved, so self-joins yield repeated edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    pub vertices: Vec<String>,
    pub edges: Vec<Vec<usize>>,
}

pub fn build_hypergraph(q: &ConjunctiveQuery) -> Hypergraph {
    let edges = q
        .atoms()
        .iter()
        .map(|atom| {
            let mut e: Vec<usize> = atom
                .args
                .iter()
                .map(|v| q.var_index(v).expect("atom variable is a query variable"))
                .collect();
            e.sort_unstable();
            e
        })
        .collect();
    Hypergraph {
        vertices: q.vars().to_vec(),
        edges,
    }
}

/// True iff the bipartite incidence graph (variables vs. edges) is a forest.
///
/// Union-find cycle detection on the incidence multigraph: two atoms sharing
/// two or more variables immediately form a cycle.
pub fn is_berge_acyclic(h: &Hypergraph) -> bool {
    let nv = h.vertices.len();
    let mut uf = UnionFind::new(nv + h.edges.len());
    for (ei, edge) in h.edges.iter().enumerate() {
        for &vi in edge {
            if !uf.union(vi, nv + ei) {
                return false;
            }
        }
    }
    true
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    /// Returns false when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// A permutation of the query variables, as indices into `vars()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableOrdering(pub Vec<usize>);

impl VariableOrdering {
    /// position[v] = rank of variable v in the ordering
    pub fn positions(&self, num_vars: usize) -> Vec<usize> {
        let mut pos = vec![usize::MAX; num_vars];
        for (rank, &v) in self.0.iter().enumerate() {
            pos[v] = rank;
        }
        pos
    }
}

/// An ordering compatible with a set of degree statistics: for every pair
/// `(V|U)` all of U precedes all of V∖U. `None` when the statistics'
/// dependency graph is cyclic.
///
/// `pairs` are (U, V) bitmasks over `num_vars` variables; ties in the
/// topological sort break toward the smallest variable index, so the result
/// is deterministic.
pub fn statistics_topological_order(
    pairs: &[(u64, u64)],
    num_vars: usize,
) -> Option<VariableOrdering> {
    let mut succ: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut indegree = vec![0usize; num_vars];
    for &(u_mask, v_mask) in pairs {
        let targets = v_mask & !u_mask;
        for u in 0..num_vars {
            if u_mask >> u & 1 == 0 {
                continue;
            }
            for v in 0..num_vars {
                if targets >> v & 1 == 0 || u == v {
                    continue;
                }
                if succ.entry(u).or_default().insert(v) {
                    indegree[v] += 1;
                }
            }
        }
    }
    let mut ready: BTreeSet<usize> = (0..num_vars).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(num_vars);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        if let Some(out) = succ.get(&v) {
            for &w in out {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    ready.insert(w);
                }
            }
        }
    }
    if order.len() == num_vars {
        Some(VariableOrdering(order))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(text: &str) -> ConjunctiveQuery {
        ConjunctiveQuery::parse(text).unwrap()
    }

    #[test]
    fn parses_triangle() {
        let c3 = q("C3(X,Y,Z) :- R(X,Y), S(Y,Z), T(Z,X).");
        assert_eq!(c3.atoms().len(), 3);
        assert_eq!(c3.vars(), &["X", "Y", "Z"]);
        assert_eq!(c3.head_vars(), &["X", "Y", "Z"]);
    }

    #[test]
    fn parses_two_way_join() {
        let j2 = q("J2(X,Y,Z) :- R(X,Y), S(Y,Z).");
        assert_eq!(j2.atoms().len(), 2);
        assert_eq!(j2.vars(), &["X", "Y", "Z"]);
    }

    #[test]
    fn parses_minimal_query() {
        let single = q("Q(X) :- R(X).");
        assert_eq!(single.atoms().len(), 1);
        assert_eq!(single.vars(), &["X"]);
    }

    #[test]
    fn parse_is_whitespace_insensitive_and_skips_comments() {
        let a = q("Q(X):-R(X,Y),S(Y).");
        let b = q("% a comment line\nQ( X ) :- R( X , Y ),\n  S(Y) .");
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_queries() {
        assert!(matches!(
            ConjunctiveQuery::parse("Q(X) :- ."),
            Err(Error::Parse { .. })
        ));
        // head variable not in body
        assert!(ConjunctiveQuery::parse("Q(W) :- R(X,Y).").is_err());
        // repeated variable within one atom
        assert!(ConjunctiveQuery::parse("Q(X) :- R(X,X).").is_err());
        // syntax error carries a position
        match ConjunctiveQuery::parse("Q(X) :- R(X,Y)") {
            Err(Error::Parse { pos, .. }) => assert!(pos >= 14),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unparse_parse_is_a_fixpoint() {
        for text in [
            "C3(X,Y,Z) :- R(X,Y), S(Y,Z), T(Z,X).",
            "Q() :- R(A,B), R(B,C).",
            "J3(X,Y,Z,U) :- R(X,Y), S(Y,Z), T(Z,U).",
        ] {
            let parsed = q(text);
            let printed = parsed.to_string();
            assert_eq!(q(&printed), parsed);
            assert_eq!(q(&printed).to_string(), printed);
        }
    }

    #[test]
    fn hypergraph_edges_follow_atoms() {
        let c3 = q("C3(X,Y,Z) :- R(X,Y), S(Y,Z), T(Z,X).");
        let h = build_hypergraph(&c3);
        assert_eq!(h.edges, vec![vec![0, 1], vec![1, 2], vec![0, 2]]);

        let self_join = q("Q(X,Y) :- R(X,Y), R(X,Y).");
        let h = build_hypergraph(&self_join);
        assert_eq!(h.edges, vec![vec![0, 1], vec![0, 1]]);
    }

    #[test]
    fn berge_acyclicity_examples() {
        assert!(is_berge_acyclic(&build_hypergraph(&q(
            "J2(X,Y,Z) :- R(X,Y), S(Y,Z)."
        ))));
        assert!(!is_berge_acyclic(&build_hypergraph(&q(
            "C3(X,Y,Z) :- R(X,Y), S(Y,Z), T(Z,X)."
        ))));
        assert!(is_berge_acyclic(&build_hypergraph(&q("Q(X) :- R(X,Y)."))));
        // two atoms sharing two variables form a cycle
        assert!(!is_berge_acyclic(&build_hypergraph(&q(
            "Q(X,Y) :- R(X,Y), S(X,Y)."
        ))));
    }

    /// Independent oracle: DFS cycle search on the incidence multigraph,
    /// never reusing the incidence edge it arrived by.
    fn has_incidence_cycle(edges: &[Vec<usize>], num_vertices: usize) -> bool {
        // nodes: 0..num_vertices are variables, then one node per hyperedge
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_vertices + edges.len()];
        let mut eid = 0usize;
        for (i, e) in edges.iter().enumerate() {
            for &v in e {
                adj[v].push((num_vertices + i, eid));
                adj[num_vertices + i].push((v, eid));
                eid += 1;
            }
        }
        let n = adj.len();
        let mut color = vec![0u8; n];
        for start in 0..n {
            if color[start] != 0 {
                continue;
            }
            // iterative DFS carrying the arrival edge id
            let mut stack = vec![(start, usize::MAX)];
            while let Some((node, via)) = stack.pop() {
                if color[node] == 1 {
                    continue;
                }
                color[node] = 1;
                for &(next, e) in &adj[node] {
                    if e == via {
                        continue;
                    }
                    if color[next] == 1 {
                        return true;
                    }
                    stack.push((next, e));
                }
            }
        }
        false
    }

    #[test]
    fn berge_acyclicity_matches_exhaustive_search() {
        // all hypergraphs with <= 4 edges over <= 5 vertices (edges are
        // nonempty subsets; unordered with repetition)
        for nv in 1..=5usize {
            let subsets: Vec<Vec<usize>> = (1u32..(1 << nv))
                .map(|m| (0..nv).filter(|&v| m >> v & 1 == 1).collect())
                .collect();
            let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
            while let Some(chosen) = stack.pop() {
                if !chosen.is_empty() {
                    let edges: Vec<Vec<usize>> =
                        chosen.iter().map(|&i| subsets[i].clone()).collect();
                    let h = Hypergraph {
                        vertices: (0..nv).map(|v| format!("V{v}")).collect(),
                        edges: edges.clone(),
                    };
                    assert_eq!(
                        is_berge_acyclic(&h),
                        !has_incidence_cycle(&edges, nv),
                        "mismatch on {nv} vertices, edges {edges:?}"
                    );
                }
                if chosen.len() < 4 {
                    let lo = chosen.last().copied().unwrap_or(0);
                    for i in lo..subsets.len() {
                        let mut next = chosen.clone();
                        next.push(i);
                        stack.push(next);
                    }
                }
            }
        }
    }

    #[test]
    fn topological_order_examples() {
        // {(Y|∅), (Z|Y)} over {X,Y,Z}: Y must precede Z
        let order = statistics_topological_order(&[(0b000, 0b010), (0b010, 0b100)], 3).unwrap();
        let pos = order.positions(3);
        assert!(pos[1] < pos[2]);

        // {(X|Y), (Y|X)} is cyclic
        assert!(statistics_topological_order(&[(0b10, 0b01), (0b01, 0b10)], 2).is_none());

        // empty statistics: any ordering works
        let order = statistics_topological_order(&[], 3).unwrap();
        assert_eq!(order.0.len(), 3);
    }

    #[test]
    fn topological_order_separates_u_from_v() {
        // (V|U) with U={X0,X1}, V={X2,X3}; plus (X1 | X3) forcing interleave check
        let pairs = [(0b0011, 0b1100), (0b1000, 0b0010)];
        // cyclic: X3 before X1 (second pair), but X1 before X3 (first pair)
        assert!(statistics_topological_order(&pairs, 4).is_none());

        let pairs = [(0b0011, 0b1100)];
        let order = statistics_topological_order(&pairs, 4).unwrap();
        let pos = order.positions(4);
        assert!(pos[0].max(pos[1]) < pos[2].min(pos[3]));
    }

    #[test]
    fn relation_enforces_set_semantics() {
        let rows = vec![
            vec![Value::Int(1), Value::Str("a".into())],
            vec![Value::Int(1), Value::Str("a".into())],
            vec![Value::Int(2), Value::Str("b".into())],
        ];
        let r = Relation::new("R", vec!["X".into(), "Y".into()], rows).unwrap();
        assert_eq!(r.len(), 2);

        let ragged = Relation::new(
            "R",
            vec!["X".into(), "Y".into()],
            vec![vec![Value::Int(1)]],
        );
        assert!(ragged.is_err());
    }

    #[test]
    fn value_order_is_total() {
        let mut vals = vec![
            Value::Str("b".into()),
            Value::Int(10),
            Value::Str("a".into()),
            Value::Int(2),
        ];
        vals.sort();
        assert_eq!(
            vals,
            vec![
                Value::Int(2),
                Value::Int(10),
                Value::Str("a".into()),
                Value::Str("b".into()),
            ]
        );
    }
}
