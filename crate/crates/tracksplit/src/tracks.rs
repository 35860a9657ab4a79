//! Standardly embedded train tracks on punctured disks.
//!
//! A track is stored combinatorially: infinitesimal polygons (loops are
//! 1-gons), their corner switches, and real edges whose ends sit at switches.
//! At each switch the real ends are kept left to right as seen from the
//! switch facing its real edges, so `l(v)` is first and `r(v)` last. Corners of
//! a k-gon are numbered counterclockwise; the left neighbour `v_l` of corner
//! `i` is corner `i+1`.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrackError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("no polygons")]
    NoPolygons,
    #[error("dangling edge end: edge {edge} references undeclared switch {switch}")]
    DanglingEnd { edge: String, switch: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("switch-order mismatch at {switch}: {msg}")]
    OrderMismatch { switch: String, msg: String },
    #[error("unknown track name {0}")]
    UnknownName(String),
    #[error("invalid track: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polygon {
    pub id: String,
    pub cusps: usize,
    pub punctured: bool,
    pub is_loop: bool,
    /// Switch indices of the corners, counterclockwise.
    pub corners: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Switch {
    pub polygon: usize,
    pub corner: usize,
}

/// One end of a real edge: `side` 0 is the tail, 1 the head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeEnd {
    pub edge: usize,
    pub side: u8,
}

impl EdgeEnd {
    pub fn other(self) -> EdgeEnd {
        EdgeEnd {
            edge: self.edge,
            side: 1 - self.side,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealEdge {
    pub id: String,
    /// Switch at the tail and at the head.
    pub ends: [usize; 2],
}

/// Token of an explicit cyclic layout at a switch, used only to describe
/// layouts that violate the embedding rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayoutToken {
    End(EdgeEnd),
    InfLeft,
    InfRight,
}

/// An oriented traversal of a real edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter {
    pub edge: usize,
    pub rev: bool,
}

impl Letter {
    pub fn fwd(edge: usize) -> Letter {
        Letter { edge, rev: false }
    }

    pub fn inv(self) -> Letter {
        Letter {
            edge: self.edge,
            rev: !self.rev,
        }
    }

    /// The end this letter arrives at.
    pub fn head_end(self) -> EdgeEnd {
        EdgeEnd {
            edge: self.edge,
            side: if self.rev { 0 } else { 1 },
        }
    }

    /// The end this letter departs from.
    pub fn tail_end(self) -> EdgeEnd {
        self.head_end().other()
    }
}

/// Letter traversing the edge of `end` towards `end`.
pub fn letter_into(end: EdgeEnd) -> Letter {
    Letter {
        edge: end.edge,
        rev: end.side == 0,
    }
}

/// Reverse a word of letters.
pub fn reverse_word(w: &[Letter]) -> Vec<Letter> {
    w.iter().rev().map(|l| l.inv()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainTrack {
    pub name: String,
    pub punctures: usize,
    pub polygons: Vec<Polygon>,
    pub switches: Vec<Switch>,
    pub edges: Vec<RealEdge>,
    /// Real ends at each switch, left to right.
    pub orders: Vec<Vec<EdgeEnd>>,
    /// Explicit layouts given in the file, kept only for validation.
    pub layouts: BTreeMap<usize, Vec<LayoutToken>>,
    pub exterior_cusps: Option<usize>,
    pub exterior_punctured: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stratum {
    pub boundary_prongs: Vec<usize>,
    pub puncture_prongs: Vec<usize>,
    pub interior_prongs: Vec<usize>,
}

fn render_prongs(v: &[usize]) -> String {
    if v.is_empty() {
        return "∅".into();
    }
    let mut counts: BTreeMap<std::cmp::Reverse<usize>, usize> = BTreeMap::new();
    for &k in v {
        *counts.entry(std::cmp::Reverse(k)).or_default() += 1;
    }
    counts
        .iter()
        .map(|(k, c)| {
            if *c == 1 {
                k.0.to_string()
            } else {
                format!("{}^{}", k.0, c)
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

impl Stratum {
    pub fn new(mut b: Vec<usize>, mut m: Vec<usize>, mut k: Vec<usize>) -> Stratum {
        b.sort_unstable_by(|x, y| y.cmp(x));
        m.sort_unstable_by(|x, y| y.cmp(x));
        k.sort_unstable_by(|x, y| y.cmp(x));
        Stratum {
            boundary_prongs: b,
            puncture_prongs: m,
            interior_prongs: k,
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({};{};{})",
            render_prongs(&self.boundary_prongs),
            render_prongs(&self.puncture_prongs),
            render_prongs(&self.interior_prongs)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    Polygon(String),
    Exterior,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub kind: RegionKind,
    pub cusps: usize,
    pub punctured: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "valid")
        } else {
            write!(f, "{}", self.violations.join("\n"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchInfo {
    pub name: String,
    pub loop_switch: bool,
    pub valence: usize,
    pub l: Option<String>,
    pub r: Option<String>,
    pub v_l: String,
    pub v_r: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureReport {
    pub loop_switches: Vec<String>,
    pub joints: Vec<String>,
    pub stems: Vec<String>,
    pub j: usize,
    pub switches: Vec<SwitchInfo>,
}

/// Half-edges of the ribbon structure used for face tracing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Half {
    Real(EdgeEnd),
    InfL(usize),
    InfR(usize),
}

pub const PEACOCK: &str = "track peacock
surface disk punctures=5
loop L1 punctured
loop L2 punctured
loop L3 punctured
loop L4 punctured
loop L5 punctured
polygon T cusps=3
edge o L1.1 T.1
edge g L2.1 T.1
edge p L3.1 T.2
edge b L4.1 T.2
edge r L5.1 T.3
order T.1 o g
order T.2 p b
exterior cusps=2 punctured
";

pub const SNAIL: &str = "track snail
surface disk punctures=5
loop L1 punctured
loop L2 punctured
loop L3 punctured
loop L4 punctured
loop L5 punctured
polygon T cusps=3
edge a L1.1 T.1
edge b L2.1 T.1
edge c L3.1 T.1
edge d L4.1 T.2
edge e L5.1 T.3
order T.1 a b c
exterior cusps=2 punctured
";

pub fn builtin_track(name: &str) -> Result<TrainTrack, TrackError> {
    match name {
        "peacock" => parse_track(PEACOCK),
        "snail" => parse_track(SNAIL),
        other => Err(TrackError::UnknownName(other.to_string())),
    }
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> TrackError {
    TrackError::Syntax {
        line,
        col,
        msg: msg.into(),
    }
}

/// Tokens of a line with 1-based columns; `#` starts a comment.
fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let body = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in body.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &body[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &body[s..]));
    }
    out
}

fn parse_kv(tok: &str, key: &str, line: usize, col: usize) -> Result<usize, TrackError> {
    let val = tok
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| syntax(line, col, format!("expected {key}=<n>")))?;
    val.parse()
        .map_err(|_| syntax(line, col, format!("bad number in {tok}")))
}

pub fn parse_track(text: &str) -> Result<TrainTrack, TrackError> {
    let mut name = None;
    let mut punctures = None;
    let mut polygons: Vec<Polygon> = Vec::new();
    let mut switches: Vec<Switch> = Vec::new();
    let mut switch_ids: HashMap<String, usize> = HashMap::new();
    let mut edges: Vec<RealEdge> = Vec::new();
    let mut edge_ids: HashMap<String, usize> = HashMap::new();
    let mut pending_edges: Vec<(usize, usize, String, String, String)> = Vec::new();
    let mut pending_orders: Vec<(usize, usize, String, Vec<(usize, String)>)> = Vec::new();
    let mut exterior_cusps = None;
    let mut exterior_punctured = false;
    let mut seen_ids: HashMap<String, ()> = HashMap::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let toks = tokenize(raw);
        let Some(&(col0, head)) = toks.first() else {
            continue;
        };
        match head {
            "track" => {
                let (_, n) = toks.get(1).ok_or_else(|| syntax(line, col0, "track needs a name"))?;
                name = Some(n.to_string());
            }
            "surface" => {
                let (c, kind) = toks.get(1).ok_or_else(|| syntax(line, col0, "surface needs a kind"))?;
                if *kind != "disk" {
                    return Err(syntax(line, *c, "only disk surfaces are supported"));
                }
                let (c, kv) = toks.get(2).ok_or_else(|| syntax(line, col0, "missing punctures=<n>"))?;
                punctures = Some(parse_kv(kv, "punctures", line, *c)?);
            }
            "loop" | "polygon" => {
                let (c, id) = toks.get(1).ok_or_else(|| syntax(line, col0, "missing id"))?;
                if seen_ids.insert(id.to_string(), ()).is_some() {
                    return Err(TrackError::DuplicateId(id.to_string()));
                }
                let mut cusps = 1;
                let mut punctured = false;
                for &(c, t) in &toks[2..] {
                    if t == "punctured" {
                        punctured = true;
                    } else if head == "polygon" && t.starts_with("cusps") {
                        cusps = parse_kv(t, "cusps", line, c)?;
                    } else {
                        return Err(syntax(line, c, format!("unexpected token {t}")));
                    }
                }
                if head == "polygon" && !toks.iter().any(|(_, t)| t.starts_with("cusps")) {
                    return Err(syntax(line, *c, "polygon needs cusps=<k>"));
                }
                if cusps == 0 {
                    return Err(syntax(line, *c, "cusps must be positive"));
                }
                let pi = polygons.len();
                let mut corners = Vec::new();
                for k in 0..cusps {
                    let sid = format!("{id}.{}", k + 1);
                    switch_ids.insert(sid, switches.len());
                    corners.push(switches.len());
                    switches.push(Switch {
                        polygon: pi,
                        corner: k,
                    });
                }
                polygons.push(Polygon {
                    id: id.to_string(),
                    cusps,
                    punctured,
                    is_loop: head == "loop",
                    corners,
                });
            }
            "edge" => {
                if toks.len() != 4 {
                    return Err(syntax(line, col0, "edge needs: edge <id> <switch> <switch>"));
                }
                let id = toks[1].1;
                if seen_ids.insert(id.to_string(), ()).is_some() {
                    return Err(TrackError::DuplicateId(id.to_string()));
                }
                edge_ids.insert(id.to_string(), edges.len());
                edges.push(RealEdge {
                    id: id.to_string(),
                    ends: [usize::MAX; 2],
                });
                pending_edges.push((line, toks[2].0, id.to_string(), toks[2].1.to_string(), toks[3].1.to_string()));
            }
            "order" => {
                let (c, sw) = toks.get(1).ok_or_else(|| syntax(line, col0, "order needs a switch"))?;
                let rest = toks[2..].iter().map(|&(c, t)| (c, t.to_string())).collect();
                pending_orders.push((line, *c, sw.to_string(), rest));
            }
            "exterior" => {
                for &(c, t) in &toks[1..] {
                    if t == "punctured" {
                        exterior_punctured = true;
                    } else if t.starts_with("cusps") {
                        exterior_cusps = Some(parse_kv(t, "cusps", line, c)?);
                    } else {
                        return Err(syntax(line, c, format!("unexpected token {t}")));
                    }
                }
            }
            other => return Err(syntax(line, col0, format!("unknown directive {other}"))),
        }
    }

    if polygons.is_empty() {
        return Err(TrackError::NoPolygons);
    }
    let name = name.unwrap_or_else(|| "track".to_string());

    for (i, (_, _, id, a, b)) in pending_edges.iter().enumerate() {
        for (k, sw) in [a, b].into_iter().enumerate() {
            let s = *switch_ids.get(sw).ok_or_else(|| TrackError::DanglingEnd {
                edge: id.clone(),
                switch: sw.clone(),
            })?;
            edges[i].ends[k] = s;
        }
    }

    // Ends incident to each switch, in declaration order.
    let mut incident: Vec<Vec<EdgeEnd>> = vec![Vec::new(); switches.len()];
    for (e, edge) in edges.iter().enumerate() {
        for side in 0..2u8 {
            incident[edge.ends[side as usize]].push(EdgeEnd { edge: e, side });
        }
    }

    let mut orders: Vec<Option<Vec<EdgeEnd>>> = vec![None; switches.len()];
    let mut layouts = BTreeMap::new();
    for (line, col, sw, toks) in &pending_orders {
        let s = *switch_ids.get(sw).ok_or_else(|| syntax(*line, *col, format!("unknown switch {sw}")))?;
        if orders[s].is_some() {
            return Err(TrackError::DuplicateId(format!("order {sw}")));
        }
        let mut layout = Vec::new();
        let mut ends = Vec::new();
        for (c, t) in toks {
            let tok = match t.as_str() {
                "^l" => LayoutToken::InfLeft,
                "^r" => LayoutToken::InfRight,
                _ => {
                    let (eid, which) = match t.split_once(':') {
                        Some((e, w)) => (e, Some(w)),
                        None => (t.as_str(), None),
                    };
                    let e = *edge_ids
                        .get(eid)
                        .ok_or_else(|| syntax(*line, *c, format!("unknown edge {eid}")))?;
                    let cands: Vec<EdgeEnd> = incident[s].iter().copied().filter(|x| x.edge == e).collect();
                    let end = match (which, cands.len()) {
                        (_, 0) => {
                            return Err(TrackError::OrderMismatch {
                                switch: sw.clone(),
                                msg: format!("edge {eid} is not incident"),
                            })
                        }
                        (None, 1) => cands[0],
                        (Some("a"), _) => EdgeEnd { edge: e, side: 0 },
                        (Some("b"), _) => EdgeEnd { edge: e, side: 1 },
                        _ => return Err(syntax(*line, *c, format!("ambiguous end {t}; use {eid}:a or {eid}:b"))),
                    };
                    if !cands.contains(&end) {
                        return Err(TrackError::OrderMismatch {
                            switch: sw.clone(),
                            msg: format!("end {t} is not incident"),
                        });
                    }
                    ends.push(end);
                    LayoutToken::End(end)
                }
            };
            layout.push(tok);
        }
        let mut sorted = ends.clone();
        sorted.sort();
        let mut expect = incident[s].clone();
        expect.sort();
        if sorted != expect {
            return Err(TrackError::OrderMismatch {
                switch: sw.clone(),
                msg: "order must list every incident end exactly once".into(),
            });
        }
        if layout.len() != ends.len() {
            layouts.insert(s, layout);
        }
        orders[s] = Some(ends);
    }
    let mut final_orders = Vec::with_capacity(switches.len());
    for (s, o) in orders.into_iter().enumerate() {
        match o {
            Some(o) => final_orders.push(o),
            None if incident[s].len() <= 1 => final_orders.push(incident[s].clone()),
            None => {
                return Err(TrackError::OrderMismatch {
                    switch: switch_name_raw(&polygons, &switches, s),
                    msg: "missing order line for a switch with several real ends".into(),
                })
            }
        }
    }

    let punctures = punctures.unwrap_or_else(|| polygons.iter().filter(|p| p.punctured).count());
    Ok(TrainTrack {
        name,
        punctures,
        polygons,
        switches,
        edges,
        orders: final_orders,
        layouts,
        exterior_cusps,
        exterior_punctured,
    })
}

fn switch_name_raw(polys: &[Polygon], switches: &[Switch], s: usize) -> String {
    let sw = &switches[s];
    format!("{}.{}", polys[sw.polygon].id, sw.corner + 1)
}

impl TrainTrack {
    pub fn switch_name(&self, s: usize) -> String {
        switch_name_raw(&self.polygons, &self.switches, s)
    }

    pub fn switch_index(&self, name: &str) -> Option<usize> {
        (0..self.switches.len()).find(|&s| self.switch_name(s) == name)
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn edge_names(&self) -> Vec<String> {
        self.edges.iter().map(|e| e.id.clone()).collect()
    }

    pub fn switch_of(&self, end: EdgeEnd) -> usize {
        self.edges[end.edge].ends[end.side as usize]
    }

    pub fn head(&self, l: Letter) -> usize {
        self.switch_of(l.head_end())
    }

    pub fn tail(&self, l: Letter) -> usize {
        self.switch_of(l.tail_end())
    }

    pub fn polygon_of(&self, s: usize) -> &Polygon {
        &self.polygons[self.switches[s].polygon]
    }

    pub fn is_loop_switch(&self, s: usize) -> bool {
        self.polygon_of(s).is_loop
    }

    pub fn valence(&self, s: usize) -> usize {
        self.orders[s].len()
    }

    /// `(v_l, v_r)`; both equal `v` at a loop switch.
    pub fn neighbours(&self, s: usize) -> (usize, usize) {
        let sw = &self.switches[s];
        let p = &self.polygons[sw.polygon];
        let k = p.cusps;
        (p.corners[(sw.corner + 1) % k], p.corners[(sw.corner + k - 1) % k])
    }

    /// Left extremal end `l(v)`.
    pub fn l_end(&self, s: usize) -> Option<EdgeEnd> {
        self.orders[s].first().copied()
    }

    /// Right extremal end `r(v)`.
    pub fn r_end(&self, s: usize) -> Option<EdgeEnd> {
        self.orders[s].last().copied()
    }

    /// Position of an end within its switch order.
    pub fn position(&self, end: EdgeEnd) -> usize {
        let s = self.switch_of(end);
        self.orders[s].iter().position(|&e| e == end).expect("end listed at its switch")
    }

    /// Whether train path `a` may be followed by `b`.
    pub fn legal_turn(&self, a: Letter, b: Letter) -> bool {
        let v = self.head(a);
        let w = self.tail(b);
        if self.switches[v].polygon != self.switches[w].polygon {
            return false;
        }
        if self.is_loop_switch(v) {
            return true;
        }
        let (vl, vr) = self.neighbours(v);
        w != v && (w == vl || w == vr)
    }

    pub fn loop_switches(&self) -> Vec<usize> {
        (0..self.switches.len()).filter(|&s| self.is_loop_switch(s)).collect()
    }

    pub fn joint_count(&self) -> usize {
        self.loop_switches()
            .into_iter()
            .map(|s| self.valence(s).saturating_sub(1))
            .sum()
    }

    pub fn is_jointless(&self) -> bool {
        self.joint_count() == 0
    }

    /// Counterclockwise cyclic order of half-edges at a switch.
    fn ccw(&self, s: usize) -> Vec<Half> {
        let mut v: Vec<Half> = self.orders[s].iter().rev().map(|&e| Half::Real(e)).collect();
        v.push(Half::InfL(s));
        v.push(Half::InfR(s));
        v
    }

    fn twin(&self, h: Half) -> Half {
        match h {
            Half::Real(e) => Half::Real(e.other()),
            Half::InfL(s) => {
                let (vl, _) = self.neighbours(s);
                Half::InfR(vl)
            }
            Half::InfR(s) => {
                let (_, vr) = self.neighbours(s);
                Half::InfL(vr)
            }
        }
    }

    /// Faces of the ribbon structure as lists of corners `(a, b)` with `b`
    /// following `a` counterclockwise.
    fn faces(&self) -> Vec<Vec<(Half, Half)>> {
        let mut next_ccw: HashMap<Half, Half> = HashMap::new();
        let mut all = Vec::new();
        for s in 0..self.switches.len() {
            let c = self.ccw(s);
            for i in 0..c.len() {
                next_ccw.insert(c[i], c[(i + 1) % c.len()]);
                all.push(c[i]);
            }
        }
        let mut seen: HashMap<Half, ()> = HashMap::new();
        let mut faces = Vec::new();
        for &start in &all {
            if seen.contains_key(&start) {
                continue;
            }
            let mut face = Vec::new();
            let mut h = start;
            loop {
                seen.insert(h, ());
                let t = self.twin(h);
                let n = next_ccw[&t];
                face.push((t, n));
                h = n;
                if h == start {
                    break;
                }
            }
            faces.push(face);
        }
        faces
    }

    /// Complementary regions with cusp counts, and the stratum they determine.
    pub fn complement_census(&self) -> Result<(Vec<Region>, Stratum), TrackError> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(TrackError::Invalid(report.violations.join("; ")));
        }
        Ok(self.census_unchecked())
    }

    fn census_unchecked(&self) -> (Vec<Region>, Stratum) {
        let mut regions = Vec::new();
        let mut b = Vec::new();
        let mut m = Vec::new();
        let mut k = Vec::new();
        for face in self.faces() {
            let cusps = face.iter().filter(|(a, c)| is_cusp(*a, *c)).count();
            let poly = face.iter().find_map(|(a, c)| match (a, c) {
                (Half::InfL(s), Half::InfR(t)) if s == t => Some(self.switches[*s].polygon),
                _ => None,
            });
            match poly {
                Some(pi) => {
                    let p = &self.polygons[pi];
                    if p.punctured {
                        m.push(cusps);
                    } else {
                        k.push(cusps);
                    }
                    regions.push(Region {
                        kind: RegionKind::Polygon(p.id.clone()),
                        cusps,
                        punctured: p.punctured,
                    });
                }
                None => {
                    b.push(cusps);
                    regions.push(Region {
                        kind: RegionKind::Exterior,
                        cusps,
                        punctured: self.exterior_punctured,
                    });
                }
            }
        }
        (regions, Stratum::new(b, m, k))
    }

    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        for (&s, layout) in &self.layouts {
            let n = layout.len();
            let li = layout.iter().position(|t| *t == LayoutToken::InfLeft);
            let ri = layout.iter().position(|t| *t == LayoutToken::InfRight);
            match (li, ri) {
                (Some(a), Some(b)) => {
                    let adjacent = (a + 1) % n == b || (b + 1) % n == a;
                    if !adjacent {
                        v.push(format!("R(v) not connected at {}", self.switch_name(s)));
                    }
                }
                _ => v.push(format!("incomplete layout at {}", self.switch_name(s))),
            }
        }
        for s in 0..self.switches.len() {
            if self.orders[s].is_empty() {
                v.push(format!("switch {} has no real edges", self.switch_name(s)));
            }
        }
        for p in &self.polygons {
            if !p.punctured && p.cusps <= 2 {
                v.push(format!("region with {} cusps, no puncture ({})", p.cusps, p.id));
            }
        }
        let declared = self.polygons.iter().filter(|p| p.punctured).count();
        if declared != self.punctures {
            v.push(format!(
                "puncture count mismatch: declared {} but {} punctured regions",
                self.punctures, declared
            ));
        }
        if !v.is_empty() {
            return ValidationReport { violations: v };
        }
        let faces = self.faces();
        let (regions, _) = self.census_unchecked();
        let exteriors: Vec<&Region> = regions.iter().filter(|r| r.kind == RegionKind::Exterior).collect();
        if exteriors.len() != 1 {
            v.push(format!("expected one exterior region, found {}", exteriors.len()));
        }
        let polys_seen = regions.len() - exteriors.len();
        if polys_seen != self.polygons.len() {
            v.push("polygon interiors are not distinct regions".into());
        }
        for r in &regions {
            if let RegionKind::Polygon(id) = &r.kind {
                let p = self.polygons.iter().find(|p| &p.id == id).unwrap();
                if p.cusps != r.cusps {
                    v.push(format!("polygon {id} bounds a region with {} cusps", r.cusps));
                }
            }
        }
        if let (Some(d), Some(e)) = (self.exterior_cusps, exteriors.first()) {
            if d != e.cusps {
                v.push(format!("exterior declared with {d} cusps but has {}", e.cusps));
            }
        }
        if let Some(e) = exteriors.first() {
            if !e.punctured && e.cusps <= 2 {
                v.push(format!("region with {} cusps, no puncture (exterior)", e.cusps));
            }
        }
        // Euler characteristic of the capped sphere, then the prong index sum.
        let n_inf: usize = self.polygons.iter().map(|p| p.cusps).sum();
        let chi = self.switches.len() as i64 - (self.edges.len() + n_inf) as i64 + faces.len() as i64;
        if chi != 2 {
            v.push(format!("Euler characteristic {chi} is not that of a disk"));
        }
        let index: i64 = regions.iter().map(|r| r.cusps as i64 - 2).sum();
        if index != -4 {
            v.push(format!("prong index sum {index} violates the disk index formula"));
        }
        ValidationReport { violations: v }
    }

    pub fn structure_query(&self) -> StructureReport {
        let loops = self.loop_switches();
        let joints: Vec<String> = loops
            .iter()
            .filter(|&&s| self.valence(s) >= 2)
            .map(|&s| self.switch_name(s))
            .collect();
        let stems: Vec<String> = self
            .edges
            .iter()
            .filter(|e| e.ends.iter().any(|&s| self.polygon_of(s).cusps >= 2))
            .map(|e| e.id.clone())
            .collect();
        let switches = (0..self.switches.len())
            .map(|s| {
                let (vl, vr) = self.neighbours(s);
                SwitchInfo {
                    name: self.switch_name(s),
                    loop_switch: self.is_loop_switch(s),
                    valence: self.valence(s),
                    l: self.l_end(s).map(|e| self.edges[e.edge].id.clone()),
                    r: self.r_end(s).map(|e| self.edges[e.edge].id.clone()),
                    v_l: self.switch_name(vl),
                    v_r: self.switch_name(vr),
                }
            })
            .collect();
        StructureReport {
            loop_switches: loops.iter().map(|&s| self.switch_name(s)).collect(),
            joints,
            stems,
            j: self.joint_count(),
            switches,
        }
    }

    fn end_token(&self, end: EdgeEnd) -> String {
        let e = &self.edges[end.edge];
        if e.ends[0] == e.ends[1] {
            format!("{}:{}", e.id, if end.side == 0 { 'a' } else { 'b' })
        } else {
            e.id.clone()
        }
    }

    /// Deterministic text in the track-file grammar.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("track {}\n", self.name));
        out.push_str(&format!("surface disk punctures={}\n", self.punctures));
        for p in &self.polygons {
            let punct = if p.punctured { " punctured" } else { "" };
            if p.is_loop {
                out.push_str(&format!("loop {}{}\n", p.id, punct));
            } else {
                out.push_str(&format!("polygon {} cusps={}{}\n", p.id, p.cusps, punct));
            }
        }
        for e in &self.edges {
            out.push_str(&format!(
                "edge {} {} {}\n",
                e.id,
                self.switch_name(e.ends[0]),
                self.switch_name(e.ends[1])
            ));
        }
        for s in 0..self.switches.len() {
            if let Some(layout) = self.layouts.get(&s) {
                let toks: Vec<String> = layout
                    .iter()
                    .map(|t| match t {
                        LayoutToken::End(e) => self.end_token(*e),
                        LayoutToken::InfLeft => "^l".into(),
                        LayoutToken::InfRight => "^r".into(),
                    })
                    .collect();
                out.push_str(&format!("order {} {}\n", self.switch_name(s), toks.join(" ")));
            } else if self.orders[s].len() >= 2 {
                let toks: Vec<String> = self.orders[s].iter().map(|&e| self.end_token(e)).collect();
                out.push_str(&format!("order {} {}\n", self.switch_name(s), toks.join(" ")));
            }
        }
        out.push_str("exterior");
        if let Some(c) = self.exterior_cusps {
            out.push_str(&format!(" cusps={c}"));
        }
        if self.exterior_punctured {
            out.push_str(" punctured");
        }
        out.push('\n');
        out
    }

    /// Mirror image: every left-right order and every corner cycle reversed.
    pub fn mirror(&self) -> TrainTrack {
        let mut t = self.clone();
        t.name = format!("{}-mirror", self.name);
        for o in &mut t.orders {
            o.reverse();
        }
        for (pi, p) in t.polygons.iter_mut().enumerate() {
            let k = p.cusps;
            // corner i becomes corner (k - i) mod k, keeping corner 1 fixed
            let old = p.corners.clone();
            for i in 0..k {
                p.corners[(k - i) % k] = old[i];
            }
            for (ci, &s) in p.corners.iter().enumerate() {
                t.switches[s] = Switch { polygon: pi, corner: ci };
            }
        }
        t.layouts.clear();
        t
    }

    /// Canonical code, minimal over anchors (and over mirror images when allowed).
    pub fn canonical_form(&self, allow_reflection: bool) -> CanonicalCode {
        let mut best: Option<Vec<usize>> = None;
        for mirrored in mirror_options(allow_reflection) {
            for s in 0..self.switches.len() {
                let (code, _) = self.encode(s, mirrored);
                if best.as_ref().is_none_or(|b| code < *b) {
                    best = Some(code);
                }
            }
        }
        CanonicalCode(best.unwrap_or_default())
    }

    pub fn is_isomorphic(&self, other: &TrainTrack, allow_reflection: bool) -> bool {
        self.canonical_form(allow_reflection) == other.canonical_form(allow_reflection)
    }

    /// Breadth-first encoding from an anchor corner.
    fn encode(&self, anchor: usize, mirrored: bool) -> (Vec<usize>, Labeling) {
        let ns = self.switches.len();
        let mut label = vec![usize::MAX; ns];
        let mut order: Vec<usize> = Vec::new();
        let mut headers = Vec::new();
        let mut queue = VecDeque::new();
        let discover = |s: usize, label: &mut Vec<usize>, order: &mut Vec<usize>, headers: &mut Vec<usize>, queue: &mut VecDeque<usize>| {
            let sw = &self.switches[s];
            let p = &self.polygons[sw.polygon];
            let k = p.cusps;
            headers.push(k);
            headers.push(p.punctured as usize);
            for i in 0..k {
                let c = if mirrored {
                    p.corners[(sw.corner + k - i) % k]
                } else {
                    p.corners[(sw.corner + i) % k]
                };
                label[c] = order.len();
                order.push(c);
                queue.push_back(c);
            }
        };
        discover(anchor, &mut label, &mut order, &mut headers, &mut queue);
        let mut body = Vec::new();
        let mut end_pos: HashMap<EdgeEnd, (usize, usize)> = HashMap::new();
        while let Some(s) = queue.pop_front() {
            let ends = self.ordered_ends(s, mirrored);
            body.push(usize::MAX);
            body.push(ends.len());
            for (pos, &e) in ends.iter().enumerate() {
                end_pos.insert(e, (label[s], pos));
                let far = e.other();
                let fs = self.switch_of(far);
                if label[fs] == usize::MAX {
                    discover(fs, &mut label, &mut order, &mut headers, &mut queue);
                }
                let fpos = self.ordered_ends(fs, mirrored).iter().position(|&x| x == far).unwrap();
                body.push(label[fs]);
                body.push(fpos);
            }
        }
        let mut code = vec![ns, self.edges.len(), self.exterior_punctured as usize];
        code.extend(headers);
        code.extend(body);
        (
            code,
            Labeling {
                switch_label: label,
                end_pos,
            },
        )
    }

    fn ordered_ends(&self, s: usize, mirrored: bool) -> Vec<EdgeEnd> {
        let mut v = self.orders[s].clone();
        if mirrored {
            v.reverse();
        }
        v
    }

    /// All isomorphisms `self -> other` (orientation-reversing ones only when allowed).
    pub fn isomorphisms(&self, other: &TrainTrack, allow_reflection: bool) -> Vec<TrackIso> {
        if self.switches.len() != other.switches.len() || self.edges.len() != other.edges.len() {
            return Vec::new();
        }
        let Some(anchor) = (0..self.switches.len()).next() else {
            return Vec::new();
        };
        let (code_a, lab_a) = self.encode(anchor, false);
        let mut out = Vec::new();
        for mirrored in mirror_options(allow_reflection) {
            for s in 0..other.switches.len() {
                let (code_b, lab_b) = other.encode(s, mirrored);
                if code_b != code_a {
                    continue;
                }
                let mut by_label = vec![0; other.switches.len()];
                for (t, &l) in lab_b.switch_label.iter().enumerate() {
                    by_label[l] = t;
                }
                let switch_map: Vec<usize> = lab_a.switch_label.iter().map(|&l| by_label[l]).collect();
                let pos_b: HashMap<(usize, usize), EdgeEnd> =
                    lab_b.end_pos.iter().map(|(&e, &p)| (p, e)).collect();
                let mut end_map = HashMap::new();
                for (&e, p) in &lab_a.end_pos {
                    end_map.insert(e, pos_b[p]);
                }
                let edge_map = (0..self.edges.len())
                    .map(|e| {
                        let img = end_map[&EdgeEnd { edge: e, side: 0 }];
                        (img.edge, img.side == 1)
                    })
                    .collect();
                out.push(TrackIso {
                    switch_map,
                    edge_map,
                    reflecting: mirrored,
                });
            }
        }
        out
    }
}

fn mirror_options(allow_reflection: bool) -> Vec<bool> {
    if allow_reflection {
        vec![false, true]
    } else {
        vec![false]
    }
}

fn is_cusp(a: Half, b: Half) -> bool {
    matches!(
        (a, b),
        (Half::Real(_), Half::Real(_))
            | (Half::InfL(_), Half::InfR(_))
            | (Half::InfR(_), Half::InfL(_))
            | (Half::InfL(_), Half::InfL(_))
            | (Half::InfR(_), Half::InfR(_))
    )
}

struct Labeling {
    switch_label: Vec<usize>,
    end_pos: HashMap<EdgeEnd, (usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CanonicalCode(pub Vec<usize>);

/// Combinatorial isomorphism between two tracks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrackIso {
    pub switch_map: Vec<usize>,
    /// Image edge and whether the orientation is reversed.
    pub edge_map: Vec<(usize, bool)>,
    pub reflecting: bool,
}

impl TrackIso {
    pub fn map_letter(&self, l: Letter) -> Letter {
        let (e, flip) = self.edge_map[l.edge];
        Letter {
            edge: e,
            rev: l.rev ^ flip,
        }
    }
}
