//! Sponge-crossing values on series-parallel networks, plus the approximate
//! star-mesh treatment of Wheatstone and Kelvin bridges.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::det_rules::{parallel_combine, series_combine};
use crate::error::{check_unit, domain, Error, Result};
use crate::solve::bisect;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub u: NodeId,
    pub v: NodeId,
    pub chi: f64,
}

/// Weighted multigraph with source and target node sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QNGraph {
    names: Vec<String>,
    index: BTreeMap<String, NodeId>,
    links: Vec<Link>,
    source: BTreeSet<NodeId>,
    target: BTreeSet<NodeId>,
}

impl QNGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Id of the named node, creating it if needed.
    pub fn node(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn add_link(&mut self, u: &str, v: &str, chi: f64) -> Result<()> {
        check_unit("link chi", chi)?;
        let (u, v) = (self.node(u), self.node(v));
        self.links.push(Link { u, v, chi });
        Ok(())
    }

    pub fn add_source(&mut self, name: &str) {
        let id = self.node(name);
        self.source.insert(id);
    }

    pub fn add_target(&mut self, name: &str) {
        let id = self.node(name);
        self.target.insert(id);
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn source(&self) -> &BTreeSet<NodeId> {
        &self.source
    }

    pub fn target(&self) -> &BTreeSet<NodeId> {
        &self.target
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.is_empty() || self.target.is_empty() {
            return Err(domain("source and target sets must be nonempty"));
        }
        if let Some(n) = self.source.intersection(&self.target).next() {
            return Err(domain(format!(
                "node {} is both source and target",
                self.names[*n]
            )));
        }
        for l in &self.links {
            check_unit("link chi", l.chi)?;
        }
        Ok(())
    }

    /// `n` links in a row from `s` to `t`.
    pub fn chain(n: usize, chi: f64) -> Result<Self> {
        let mut g = Self::new();
        g.add_source("s");
        g.add_target("t");
        let name = |i: usize| match i {
            0 => "s".to_string(),
            i if i == n => "t".to_string(),
            i => format!("r{i}"),
        };
        for i in 0..n {
            g.add_link(&name(i), &name(i + 1), chi)?;
        }
        Ok(g)
    }

    /// `k` parallel links between `s` and `t`.
    pub fn bundle(k: usize, chi: f64) -> Result<Self> {
        let mut g = Self::new();
        g.add_source("s");
        g.add_target("t");
        for _ in 0..k {
            g.add_link("s", "t", chi)?;
        }
        Ok(g)
    }

    /// Wheatstone bridge: `s-a, s-b, a-t, b-t` plus the bridge `a-b`.
    pub fn wheatstone(chi: f64) -> Result<Self> {
        let mut g = Self::new();
        g.add_source("s");
        g.add_target("t");
        for (u, v) in [("s", "a"), ("s", "b"), ("a", "t"), ("b", "t"), ("a", "b")] {
            g.add_link(u, v, chi)?;
        }
        Ok(g)
    }

    /// Cayley tree of degree `k` and depth `depth`: root is the source, leaves the target.
    pub fn bethe(k: usize, depth: usize, chi: f64) -> Result<Self> {
        if k < 2 || depth == 0 {
            return Err(domain("bethe graph needs k >= 2 and depth >= 1"));
        }
        let mut g = Self::new();
        g.add_source("n0");
        let mut frontier = vec![(String::from("n0"), k)];
        let mut next_id = 1usize;
        for level in 1..=depth {
            let mut next = Vec::new();
            for (parent, children) in &frontier {
                for _ in 0..*children {
                    let name = format!("n{next_id}");
                    next_id += 1;
                    g.add_link(parent, &name, chi)?;
                    if level == depth {
                        g.add_target(&name);
                    }
                    next.push((name, k - 1));
                }
            }
            frontier = next;
        }
        Ok(g)
    }

    /// Edge-list text: `S: a b`, `T: c` header lines and `u v chi` link lines.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut g = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("S:") {
                rest.split_whitespace().for_each(|n| g.add_source(n));
                continue;
            }
            if let Some(rest) = line.strip_prefix("T:") {
                rest.split_whitespace().for_each(|n| g.add_target(n));
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [u, v, chi] = fields[..] else {
                return Err(domain(format!("line {}: expected `u v chi`", lineno + 1)));
            };
            let chi: f64 = chi
                .parse()
                .map_err(|_| domain(format!("line {}: bad chi {chi:?}", lineno + 1)))?;
            g.add_link(u, v, chi)?;
        }
        g.validate()?;
        Ok(g)
    }

    /// JSON form `{"source": [..], "target": [..], "links": [{"u":..,"v":..,"chi":..}]}`.
    pub fn parse_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct LinkRecord {
            u: String,
            v: String,
            chi: f64,
        }
        #[derive(Deserialize)]
        struct GraphRecord {
            source: Vec<String>,
            target: Vec<String>,
            links: Vec<LinkRecord>,
        }
        let rec: GraphRecord =
            serde_json::from_str(text).map_err(|e| domain(format!("graph JSON: {e}")))?;
        let mut g = Self::new();
        rec.source.iter().for_each(|n| g.add_source(n));
        rec.target.iter().for_each(|n| g.add_target(n));
        for l in &rec.links {
            g.add_link(&l.u, &l.v, l.chi)?;
        }
        g.validate()?;
        Ok(g)
    }
}

/// One applicable reduction step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    /// Merge two links with the same endpoints.
    Parallel(usize, usize),
    /// Contract an interior node with exactly two incident links.
    Series(NodeId),
    /// Remove the only link of a dangling interior node.
    Prune(usize),
    /// Remove a self-loop.
    DropLoop(usize),
}

const SUPER_S: NodeId = 0;
const SUPER_T: NodeId = 1;

/// Link of the working graph; parallel members stay unmerged until a series move consumes
/// the link, so every move order evaluates the same flattened series-parallel tree.
#[derive(Debug, Clone)]
struct WorkLink {
    u: NodeId,
    v: NodeId,
    members: Vec<f64>,
}

impl WorkLink {
    fn value(&self) -> Result<f64> {
        if self.members.len() == 1 {
            Ok(self.members[0])
        } else {
            parallel_combine(&self.members, 1.0)
        }
    }

    fn key(&self) -> (NodeId, NodeId) {
        (self.u.min(self.v), self.u.max(self.v))
    }
}

struct Work<'g> {
    graph: &'g QNGraph,
    /// original node id -> working node id (S and T contracted)
    label: Vec<NodeId>,
    links: Vec<Option<WorkLink>>,
}

impl<'g> Work<'g> {
    fn new(g: &'g QNGraph) -> Result<Self> {
        g.validate()?;
        let mut label = vec![0; g.node_count()];
        let mut next = 2;
        for (id, l) in label.iter_mut().enumerate() {
            *l = if g.source.contains(&id) {
                SUPER_S
            } else if g.target.contains(&id) {
                SUPER_T
            } else {
                next += 1;
                next - 1
            };
        }
        let links = g
            .links
            .iter()
            .map(|l| {
                Some(WorkLink {
                    u: label[l.u],
                    v: label[l.v],
                    members: vec![l.chi],
                })
            })
            .collect();
        let mut w = Self {
            graph: g,
            label,
            links,
        };
        w.drop_unreachable();
        Ok(w)
    }

    /// Drops components that touch neither terminal.
    fn drop_unreachable(&mut self) {
        let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for l in self.links.iter().flatten() {
            adj.entry(l.u).or_default().push(l.v);
            adj.entry(l.v).or_default().push(l.u);
        }
        let mut seen = BTreeSet::from([SUPER_S, SUPER_T]);
        let mut queue = VecDeque::from([SUPER_S, SUPER_T]);
        while let Some(n) = queue.pop_front() {
            for &m in adj.get(&n).into_iter().flatten() {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        for slot in &mut self.links {
            if slot.as_ref().is_some_and(|l| !seen.contains(&l.u)) {
                *slot = None;
            }
        }
    }

    fn incident(&self) -> BTreeMap<NodeId, Vec<usize>> {
        let mut inc: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (i, l) in self.links.iter().enumerate() {
            if let Some(l) = l {
                inc.entry(l.u).or_default().push(i);
                if l.v != l.u {
                    inc.entry(l.v).or_default().push(i);
                }
            }
        }
        inc
    }

    fn moves(&self) -> Vec<Move> {
        let mut moves = Vec::new();
        let mut first_by_key: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
        for (i, l) in self.links.iter().enumerate() {
            let Some(l) = l else { continue };
            if l.u == l.v {
                moves.push(Move::DropLoop(i));
                continue;
            }
            match first_by_key.get(&l.key()) {
                Some(&j) => moves.push(Move::Parallel(j, i)),
                None => {
                    first_by_key.insert(l.key(), i);
                }
            }
        }
        for (node, inc) in self.incident() {
            if node == SUPER_S || node == SUPER_T {
                continue;
            }
            match inc.as_slice() {
                [only] => moves.push(Move::Prune(*only)),
                [a, b] => {
                    let (la, lb) = (self.link(*a), self.link(*b));
                    let other = |l: &WorkLink| if l.u == node { l.v } else { l.u };
                    if la.u != la.v && lb.u != lb.v && other(la) != other(lb) {
                        moves.push(Move::Series(node));
                    }
                }
                _ => {}
            }
        }
        moves
    }

    fn link(&self, i: usize) -> &WorkLink {
        self.links[i].as_ref().expect("live link")
    }

    fn apply(&mut self, m: Move) -> Result<()> {
        match m {
            Move::DropLoop(i) | Move::Prune(i) => self.links[i] = None,
            Move::Parallel(i, j) => {
                let b = self.links[j].take().expect("live link");
                self.links[i]
                    .as_mut()
                    .expect("live link")
                    .members
                    .extend(b.members);
            }
            Move::Series(node) => {
                let inc = self.incident().remove(&node).unwrap_or_default();
                let [a, b] = inc[..] else {
                    return Err(Error::Numeric(format!(
                        "series move on node of degree {}",
                        inc.len()
                    )));
                };
                let la = self.links[a].take().expect("live link");
                let lb = self.links[b].take().expect("live link");
                let other = |l: &WorkLink| if l.u == node { l.v } else { l.u };
                let chi = series_combine(&[la.value()?, lb.value()?], 1.0)?;
                self.links[a] = Some(WorkLink {
                    u: other(&la),
                    v: other(&lb),
                    members: vec![chi],
                });
            }
        }
        Ok(())
    }

    fn finished(&self) -> Option<Result<f64>> {
        let live: Vec<&WorkLink> = self.links.iter().flatten().collect();
        match live.as_slice() {
            [] => Some(Ok(0.0)),
            [l] if l.key() == (SUPER_S, SUPER_T) => Some(l.value()),
            _ => None,
        }
    }

    fn describe(&self) -> String {
        let name = |n: NodeId| -> String {
            match n {
                SUPER_S => "S".into(),
                SUPER_T => "T".into(),
                n => {
                    let orig = self
                        .label
                        .iter()
                        .position(|&l| l == n)
                        .expect("labelled node");
                    self.graph.name(orig).to_string()
                }
            }
        };
        let mut out = String::new();
        for l in self.links.iter().flatten() {
            let _ = write!(out, "{}-{} ", name(l.u), name(l.v));
        }
        out.trim_end().to_string()
    }

    fn stuck(&self) -> Error {
        let live: Vec<&WorkLink> = self.links.iter().flatten().collect();
        let nodes: BTreeSet<NodeId> = live.iter().flat_map(|l| [l.u, l.v]).collect();
        Error::Irreducible {
            // a two-terminal graph that resists series/parallel moves has a
            // Wheatstone-bridge (K4) minor
            minor: "Wheatstone bridge (K4)",
            nodes: nodes.len(),
            links: live.len(),
            remaining: self.describe(),
        }
    }
}

/// Exact sponge-crossing `chi` of a series-parallel network, with the move chosen by
/// `choose` (given the applicable moves, return an index).
pub fn reduce_series_parallel_with<F>(g: &QNGraph, mut choose: F) -> Result<f64>
where
    F: FnMut(&[Move]) -> usize,
{
    let mut work = Work::new(g)?;
    loop {
        if let Some(done) = work.finished() {
            return done;
        }
        let moves = work.moves();
        if moves.is_empty() {
            return Err(work.stuck());
        }
        let pick = choose(&moves).min(moves.len() - 1);
        work.apply(moves[pick])?;
    }
}

/// Exact sponge-crossing `chi` of a series-parallel network between `S` and `T`.
pub fn reduce_series_parallel(g: &QNGraph) -> Result<f64> {
    reduce_series_parallel_with(g, |_| 0)
}

/// Roots of `Y^3 - Y^2 - Y/W + 1 = 0` from the trigonometric (Shengjin) formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubicRoots {
    pub roots: [f64; 3],
    /// Index of the root with `0 <= Y <= W`, if any.
    pub selected: Option<usize>,
    /// Amount by which the arccos argument left `[-1, 1]`.
    pub clamp: f64,
}

pub fn shengjin_roots(w: f64) -> CubicRoots {
    let a = 1.0 + 3.0 / w;
    let arg = 0.5 * (25.0 - 9.0 / w) * a.powf(-1.5);
    let clamped = arg.clamp(-1.0, 1.0);
    let clamp = (arg - clamped).abs();
    if clamp > 0.0 {
        log::debug!("Shengjin arccos argument {arg} clamped by {clamp:e}");
    }
    let theta = clamped.acos();
    let sa = a.sqrt();
    let pi = std::f64::consts::PI;
    let roots = [
        (1.0 - 2.0 * sa * (theta / 3.0).cos()) / 3.0,
        (1.0 + 2.0 * sa * ((theta - pi) / 3.0).cos()) / 3.0,
        (1.0 + 2.0 * sa * ((theta + pi) / 3.0).cos()) / 3.0,
    ];
    let window = |y: f64| (-1e-12..=w + 1e-12).contains(&y);
    let selected = [2, 1, 0].into_iter().find(|&i| window(roots[i]));
    CubicRoots {
        roots,
        selected,
        clamp,
    }
}

/// `xi / sqrt(xi^6 - xi^4 + 1)`: series of two `chi` links equals parallel of `xi` and `xi^2`.
fn star_mesh_lhs(xi: f64) -> f64 {
    let x2 = xi * xi;
    xi / (x2 * x2 * (x2 - 1.0) + 1.0).sqrt()
}

/// Residual of the star-mesh relation for `xi` at link weight `chi`.
pub fn y_delta_residual(chi: f64, xi: f64) -> f64 {
    (chi * chi - star_mesh_lhs(xi)).abs()
}

/// Star-mesh (Y-Δ) link weight `xi` for a three-arm star of `chi` links.
pub fn y_delta(chi: f64) -> Result<f64> {
    check_unit("chi", chi)?;
    if chi == 0.0 || chi == 1.0 {
        return Ok(chi);
    }
    let target = chi * chi;
    let roots = shengjin_roots(target * target);
    let mut xi = roots
        .selected
        .map(|i| roots.roots[i].max(0.0).sqrt().min(target))
        .unwrap_or(f64::NAN);
    // Newton polish on the monotone relation; the closed form cancels badly for small chi
    for _ in 0..8 {
        if !(0.0..=target).contains(&xi) {
            break;
        }
        let x2 = xi * xi;
        let g = x2 * x2 * (x2 - 1.0) + 1.0;
        let f = xi / g.sqrt() - target;
        let df = (1.0 + x2 * x2 - 2.0 * x2 * x2 * x2) / g.powf(1.5);
        let step = f / df;
        xi -= step;
        if step.abs() <= 1e-17 * xi.max(1e-300) {
            break;
        }
    }
    if !(0.0..=target).contains(&xi) || y_delta_residual(chi, xi) > 1e-13 * target.max(1e-3) {
        xi = bisect(|x| star_mesh_lhs(x) - target, 0.0, target, 0.0)?;
    }
    Ok(xi)
}

/// Inverse of [`y_delta`] by bisection on `[0, 1]`.
pub fn delta_y(chi: f64) -> Result<f64> {
    check_unit("chi", chi)?;
    if chi == 0.0 || chi == 1.0 {
        return Ok(chi);
    }
    let f = |x: f64| y_delta(x).map(|y| y - chi).unwrap_or(f64::NAN);
    bisect(f, 0.0, 1.0, 1e-15)
}

/// Table-II bridge closed form `b(x, y)`.
pub fn bridge_value(x: f64, y: f64) -> Result<f64> {
    check_unit("x", x)?;
    check_unit("y", y)?;
    let (x2, y2) = (x * x, y * y);
    let x4 = x2 * x2;
    if x4 == 0.0 {
        return Ok(0.0);
    }
    let d = x2 * y2 - y2 + 1.0;
    let val = x2 / (x4 + (1.0 - y2) * (d * d - x4)).sqrt();
    Ok(val.min(1.0))
}

/// Approximate Wheatstone-bridge sponge crossing `b(chi, y(chi))`.
pub fn wheatstone_sponge(chi: f64) -> Result<f64> {
    bridge_value(chi, y_delta(chi)?)
}

/// Approximate Kelvin-bridge sponge crossing `b(chi, y(chi * delta(chi)))`.
pub fn kelvin_sponge(chi: f64) -> Result<f64> {
    let d = delta_y(chi)?;
    bridge_value(chi, y_delta(chi * d)?)
}
