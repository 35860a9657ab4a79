//! Train-track maps, transition matrices and their spectra.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::IntMatrix;
use crate::poly::{rat_from_f64, rat_to_f64, IntPoly};
use crate::tracks::{reverse_word, EdgeEnd, Letter, TrackError, TrainTrack, ValidationReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("map syntax error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error("invalid map: {0}")]
    Invalid(String),
    #[error("decoration error: {0}")]
    Decoration(String),
    #[error("matrix is not square")]
    NotSquare,
    #[error("matrix has a negative entry")]
    NegativeEntry,
    #[error("gate bound {0} exceeded")]
    GateBound(usize),
    #[error("ambiguous connector through polygon {0}")]
    AmbiguousConnector(String),
    #[error("census too large: {0}")]
    CensusTooLarge(String),
    #[error("{0}")]
    Numeric(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decoration {
    Plain,
    Plus,
    Minus,
    Terminal,
}

/// A letter of an image word. Decorated letters ignore `rev`: they always
/// describe a visit to the puncture at the loop end of their edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeLetter {
    pub edge: usize,
    pub rev: bool,
    pub deco: Decoration,
}

impl EdgeLetter {
    pub fn plain(l: Letter) -> EdgeLetter {
        EdgeLetter {
            edge: l.edge,
            rev: l.rev,
            deco: Decoration::Plain,
        }
    }

    pub fn decorated(edge: usize, deco: Decoration) -> EdgeLetter {
        EdgeLetter { edge, rev: false, deco }
    }
}

/// The letter of `edge` that runs into its loop end.
pub fn toward_puncture(track: &TrainTrack, edge: usize) -> Result<Letter, MapError> {
    let ends = track.edges[edge].ends;
    match (track.is_loop_switch(ends[0]), track.is_loop_switch(ends[1])) {
        (false, true) => Ok(Letter::fwd(edge)),
        (true, false) => Ok(Letter::fwd(edge).inv()),
        _ => Err(MapError::Decoration(format!(
            "edge {} needs exactly one loop end to carry a decoration",
            track.edges[edge].id
        ))),
    }
}

/// Plain expansion of a word: `x±` becomes `x` into the puncture and back,
/// `x∘` becomes `x` into the puncture.
pub fn expand_word(track: &TrainTrack, word: &[EdgeLetter]) -> Result<Vec<Letter>, MapError> {
    let mut out = Vec::with_capacity(word.len() * 2);
    for l in word {
        match l.deco {
            Decoration::Plain => out.push(Letter { edge: l.edge, rev: l.rev }),
            Decoration::Plus | Decoration::Minus => {
                let t = toward_puncture(track, l.edge)?;
                out.push(t);
                out.push(t.inv());
            }
            Decoration::Terminal => out.push(toward_puncture(track, l.edge)?),
        }
    }
    Ok(out)
}

pub fn format_letter(track: &TrainTrack, l: &EdgeLetter) -> String {
    let id = &track.edges[l.edge].id;
    match l.deco {
        Decoration::Plain if l.rev => format!("~{id}"),
        Decoration::Plain => id.clone(),
        Decoration::Plus => format!("{id}+"),
        Decoration::Minus => format!("{id}-"),
        Decoration::Terminal => format!("{id}0"),
    }
}

pub fn format_word(track: &TrainTrack, w: &[EdgeLetter]) -> String {
    w.iter().map(|l| format_letter(track, l)).collect::<Vec<_>>().join(" ")
}

pub fn format_path(track: &TrainTrack, w: &[Letter]) -> String {
    format_word(track, &w.iter().map(|&l| EdgeLetter::plain(l)).collect::<Vec<_>>())
}

/// Parse one word token such as `r-`, `p0`, `~o` or `o`.
pub fn parse_letter(track: &TrainTrack, tok: &str) -> Result<EdgeLetter, String> {
    let (rev, body) = match tok.strip_prefix('~') {
        Some(b) => (true, b),
        None => (false, tok),
    };
    if let Some(e) = track.edge_index(body) {
        return Ok(EdgeLetter {
            edge: e,
            rev,
            deco: Decoration::Plain,
        });
    }
    let deco = match body.chars().last() {
        Some('+') => Decoration::Plus,
        Some('-') => Decoration::Minus,
        Some('0') | Some('∘') => Decoration::Terminal,
        _ => return Err(format!("unknown edge {body}")),
    };
    let stem = &body[..body.len() - body.chars().last().unwrap().len_utf8()];
    let e = track.edge_index(stem).ok_or_else(|| format!("unknown edge {stem}"))?;
    if rev {
        return Err(format!("decorated letter {tok} cannot carry an orientation prefix"));
    }
    Ok(EdgeLetter::decorated(e, deco))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainTrackMap {
    pub name: String,
    pub track: TrainTrack,
    /// Image switch of each switch.
    pub vertex_map: Vec<usize>,
    /// Image word of each real edge. Plain words describe the edge in its
    /// stored orientation; decorated words describe it running into its loop.
    pub images: Vec<Vec<EdgeLetter>>,
    pub decorated: bool,
}

impl TrainTrackMap {
    /// A plain map from forward image paths; the vertex map is read off the endpoints.
    pub fn from_paths(name: &str, track: TrainTrack, paths: Vec<Vec<Letter>>) -> TrainTrackMap {
        let mut vertex_map = vec![usize::MAX; track.switches.len()];
        for (e, p) in paths.iter().enumerate() {
            if let (Some(first), Some(last)) = (p.first(), p.last()) {
                let [a, b] = track.edges[e].ends;
                if vertex_map[a] == usize::MAX {
                    vertex_map[a] = track.tail(*first);
                }
                if vertex_map[b] == usize::MAX {
                    vertex_map[b] = track.head(*last);
                }
            }
        }
        TrainTrackMap {
            name: name.to_string(),
            images: paths
                .into_iter()
                .map(|p| p.into_iter().map(EdgeLetter::plain).collect())
                .collect(),
            track,
            vertex_map,
            decorated: false,
        }
    }

    /// Image path of each edge in its stored orientation.
    pub fn paths(&self) -> Result<Vec<Vec<Letter>>, MapError> {
        (0..self.images.len()).map(|e| self.edge_path(e)).collect()
    }

    pub fn edge_path(&self, e: usize) -> Result<Vec<Letter>, MapError> {
        let w = expand_word(&self.track, &self.images[e])?;
        if self.decorated && !toward_puncture(&self.track, e)?.rev {
            Ok(w)
        } else if self.decorated {
            Ok(reverse_word(&w))
        } else {
            Ok(w)
        }
    }

    /// Image of an oriented letter.
    pub fn letter_image(&self, l: Letter) -> Result<Vec<Letter>, MapError> {
        let p = self.edge_path(l.edge)?;
        Ok(if l.rev { reverse_word(&p) } else { p })
    }

    /// Composite `self ∘ other` as a plain map on the shared track.
    pub fn compose(&self, other: &TrainTrackMap) -> Result<TrainTrackMap, MapError> {
        let mut paths = Vec::new();
        for p in other.paths()? {
            let mut w = Vec::new();
            for l in p {
                w.extend(self.letter_image(l)?);
            }
            paths.push(w);
        }
        let mut m = TrainTrackMap::from_paths(&format!("{}*{}", self.name, other.name), self.track.clone(), paths);
        m.vertex_map = other.vertex_map.iter().map(|&v| self.vertex_map[v]).collect();
        Ok(m)
    }

    /// The same map with every word expanded to plain letters.
    pub fn to_plain(&self) -> Result<TrainTrackMap, MapError> {
        let mut m = TrainTrackMap::from_paths(&self.name, self.track.clone(), self.paths()?);
        m.vertex_map = self.vertex_map.clone();
        Ok(m)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let t = &self.track;
        let tv = t.validate();
        v.extend(tv.violations);
        if self.images.len() != t.edges.len() {
            v.push("image count differs from edge count".into());
            return ValidationReport { violations: v };
        }
        if self.vertex_map.iter().any(|&s| s >= t.switches.len()) {
            v.push("vertex map is incomplete".into());
            return ValidationReport { violations: v };
        }
        let paths = match self.paths() {
            Ok(p) => p,
            Err(e) => {
                v.push(e.to_string());
                return ValidationReport { violations: v };
            }
        };
        for (e, p) in paths.iter().enumerate() {
            let id = &t.edges[e].id;
            if p.is_empty() {
                v.push(format!("empty image for {id}"));
                continue;
            }
            for w in p.windows(2) {
                if !t.legal_turn(w[0], w[1]) {
                    v.push(format!("sharp turn in image of {id}"));
                    break;
                }
            }
            let [a, b] = t.edges[e].ends;
            if t.tail(p[0]) != self.vertex_map[a] || t.head(*p.last().unwrap()) != self.vertex_map[b] {
                v.push(format!("endpoint mismatch in image of {id}"));
            }
        }
        for (pi, poly) in t.polygons.iter().enumerate() {
            let imgs: BTreeSet<usize> = poly
                .corners
                .iter()
                .map(|&c| t.switches[self.vertex_map[c]].polygon)
                .collect();
            let target = *imgs.iter().next().unwrap();
            if imgs.len() != 1 || t.polygons[target].cusps != poly.cusps {
                v.push(format!("vertex map does not carry polygon {} onto a polygon", t.polygons[pi].id));
            }
        }
        if v.is_empty() {
            // legal turns must go to legal turns
            'outer: for s in 0..t.switches.len() {
                for &x in &t.orders[s] {
                    let into = crate::tracks::letter_into(x);
                    for s2 in 0..t.switches.len() {
                        for &y in &t.orders[s2] {
                            let out = crate::tracks::letter_into(y).inv();
                            if !t.legal_turn(into, out) {
                                continue;
                            }
                            let fa = turn_ends(&paths, into).0;
                            let fb = turn_ends(&paths, out).1;
                            if !t.legal_turn(fa, fb) {
                                v.push(format!(
                                    "image of a legal turn at {} is a sharp turn",
                                    t.switch_name(s)
                                ));
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }
        ValidationReport { violations: v }
    }

    pub fn transition_matrix(&self, extended: bool) -> Result<TransitionMatrix, MapError> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(MapError::Invalid(report.violations.join("; ")));
        }
        let t = &self.track;
        let m = t.edges.len();
        let sides = if extended { infinitesimal_sides(t) } else { Vec::new() };
        let n = m + sides.len();
        let mut mat = IntMatrix::zeros(n);
        for (j, p) in self.paths()?.iter().enumerate() {
            for l in p {
                mat.add_to(l.edge, j, 1);
            }
            if extended {
                for w in p.windows(2) {
                    let k = connector(t, &sides, t.head(w[0]), t.tail(w[1]))?;
                    mat.add_to(m + k, j, 1);
                }
            }
        }
        let mut labels = t.edge_names();
        if extended {
            for &(s, _) in &sides {
                labels.push(format!("i[{}]", t.switch_name(s)));
            }
            for (k, &(s, _)) in sides.iter().enumerate() {
                let a = self.vertex_map[s];
                let (nl, _) = t.neighbours(s);
                let b = self.vertex_map[nl];
                // image of the side from s to its left neighbour
                let poly = t.polygon_of(a);
                let kk = poly.cusps;
                let ia = t.switches[a].corner;
                let ib = t.switches[b].corner;
                let steps = if kk == 1 { 1 } else { (ib + kk - ia) % kk };
                for st in 0..steps {
                    let c = poly.corners[(ia + st) % kk];
                    let idx = sides.iter().position(|&(x, _)| x == c).unwrap();
                    mat.add_to(m + idx, m + k, 1);
                }
            }
        }
        Ok(TransitionMatrix {
            matrix: mat,
            labels,
            extended,
        })
    }

    /// Serialize in the map-file grammar; `track_ref` names the track.
    pub fn serialize(&self, track_ref: &str) -> String {
        let t = &self.track;
        let mut out = format!("map {} track={}", self.name, track_ref);
        if self.decorated {
            out.push_str(" mode=decorated");
        }
        out.push('\n');
        for (s, &img) in self.vertex_map.iter().enumerate() {
            if !t.is_loop_switch(s) {
                out.push_str(&format!("vertex {} -> {}\n", t.switch_name(s), t.switch_name(img)));
            }
        }
        for (e, w) in self.images.iter().enumerate() {
            out.push_str(&format!("edge {} -> {}\n", t.edges[e].id, format_word(t, w)));
        }
        out
    }
}

/// Last and first letters of the image of an oriented letter.
fn turn_ends(paths: &[Vec<Letter>], l: Letter) -> (Letter, Letter) {
    let p = &paths[l.edge];
    let (first, last) = (p[0], *p.last().unwrap());
    if l.rev {
        (first.inv(), last.inv())
    } else {
        (last, first)
    }
}

/// Infinitesimal sides: `(s, polygon)` is the side from corner `s` to its left neighbour.
pub fn infinitesimal_sides(t: &TrainTrack) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for (pi, p) in t.polygons.iter().enumerate() {
        for &c in &p.corners {
            v.push((c, pi));
        }
    }
    v
}

fn connector(t: &TrainTrack, sides: &[(usize, usize)], v: usize, w: usize) -> Result<usize, MapError> {
    let poly = t.polygon_of(v);
    if poly.cusps == 2 {
        return Err(MapError::AmbiguousConnector(poly.id.clone()));
    }
    let (vl, vr) = t.neighbours(v);
    let from = if poly.is_loop || w == vl { v } else if w == vr { vr } else {
        return Err(MapError::Invalid("connector between non-adjacent corners".into()));
    };
    Ok(sides.iter().position(|&(s, _)| s == from).unwrap())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub matrix: IntMatrix,
    pub labels: Vec<String>,
    pub extended: bool,
}

impl TransitionMatrix {
    /// Reorder rows and columns to the given label order.
    pub fn reordered(&self, order: &[String]) -> Result<TransitionMatrix, MapError> {
        if order.len() != self.labels.len() {
            return Err(MapError::Invalid("order must list every edge".into()));
        }
        let mut perm = vec![0; order.len()];
        for (i, l) in self.labels.iter().enumerate() {
            perm[i] = order
                .iter()
                .position(|o| o == l)
                .ok_or_else(|| MapError::Invalid(format!("order is missing {l}")))?;
        }
        Ok(TransitionMatrix {
            matrix: self.matrix.permuted(&perm),
            labels: order.to_vec(),
            extended: self.extended,
        })
    }
}

/// Eigenvector normalization.
#[derive(Clone, Debug, PartialEq)]
pub enum Normalization {
    MaxOne,
    /// Pin the entry at the given index to a value.
    Pin(usize, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub char_poly: IntPoly,
    pub pf: bool,
    pub witness: Option<usize>,
    pub lambda: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub mu: Option<Vec<f64>>,
    pub residual: Option<f64>,
}

/// Least `N ≤ n²−2n+2` with `M^N` strictly positive.
pub fn pf_witness(m: &IntMatrix) -> Option<usize> {
    let n = m.size();
    if n == 0 {
        return None;
    }
    let s = m.support();
    let bound = n * n - 2 * n + 2;
    let mut p = s.clone();
    for k in 1..=bound {
        if p.iter().all(|r| r.iter().all(|&x| x)) {
            return Some(k);
        }
        let mut q = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                q[i][j] = (0..n).any(|l| p[i][l] && s[l][j]);
            }
        }
        p = q;
    }
    None
}

pub fn spectral(m: &IntMatrix, norm: &Normalization) -> Result<Spectrum, MapError> {
    if !m.is_nonnegative() {
        return Err(MapError::NegativeEntry);
    }
    let cp = m.char_poly();
    let witness = pf_witness(m);
    let root = cp
        .largest_real_root(1e-12)
        .ok_or_else(|| MapError::Numeric("no real eigenvalue".into()))?;
    let lambda = root.mid_f64();
    let mut spec = Spectrum {
        char_poly: cp,
        pf: witness.is_some(),
        witness,
        lambda,
        lambda_lo: rat_to_f64(&root.lo),
        lambda_hi: rat_to_f64(&root.hi),
        mu: None,
        residual: None,
    };
    if lambda > 0.0 {
        if let Some(mu) = eigenvector(m, lambda, norm) {
            let mv = m.mul_vec(&mu);
            let scale = mu.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let res = mv.iter().zip(&mu).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max) / scale;
            spec.residual = Some(res);
            spec.mu = Some(mu);
        }
    }
    Ok(spec)
}

/// Right eigenvector for `lambda` by shifted inverse iteration.
pub fn eigenvector(m: &IntMatrix, lambda: f64, norm: &Normalization) -> Option<Vec<f64>> {
    let n = m.size();
    let shift = lambda + 1e-9 * lambda.max(1.0);
    let a = DMatrix::from_fn(n, n, |i, j| m.get(i, j) as f64 - if i == j { shift } else { 0.0 });
    let lu = a.lu();
    let mut x = nalgebra::DVector::from_element(n, 1.0);
    for _ in 0..60 {
        let y = lu.solve(&x)?;
        let nrm = y.amax();
        if !nrm.is_finite() || nrm == 0.0 {
            return None;
        }
        let y = y / nrm;
        let diff = (&y - &x).amax().min((&y + &x).amax());
        x = y;
        if diff < 1e-15 {
            break;
        }
    }
    let mut v: Vec<f64> = x.iter().copied().collect();
    let sum: f64 = v.iter().sum();
    if sum < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
    match norm {
        Normalization::MaxOne => {
            let mx = v.iter().cloned().fold(f64::MIN, f64::max);
            v.iter_mut().for_each(|a| *a /= mx);
        }
        Normalization::Pin(i, val) => {
            let d = v[*i];
            if d == 0.0 {
                return None;
            }
            v.iter_mut().for_each(|a| *a *= val / d);
        }
    }
    Some(v)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkMap {
    /// `(x, Df(x))` for each end `x` in `R(v)`.
    pub df: Vec<(EdgeEnd, EdgeEnd)>,
    pub gate_depth: usize,
}

/// First letter of the image of the edge leaving through `end`, as an end at the image switch.
pub fn df(map: &TrainTrackMap, end: EdgeEnd) -> Result<EdgeEnd, MapError> {
    let out = crate::tracks::letter_into(end).inv();
    let img = map.letter_image(out)?;
    Ok(img.first().ok_or_else(|| MapError::Invalid("empty image".into()))?.tail_end())
}

pub fn link_map(map: &TrainTrackMap, v: usize) -> Result<LinkMap, MapError> {
    let t = &map.track;
    let mut pairs = Vec::new();
    for &e in &t.orders[v] {
        pairs.push((e, df(map, e)?));
    }
    let bound = t.edges.len() * t.switches.len();
    let mut cur: BTreeSet<EdgeEnd> = t.orders[v].iter().copied().collect();
    if cur.len() <= 1 {
        return Ok(LinkMap { df: pairs, gate_depth: 1 });
    }
    for k in 1..=bound {
        let mut next = BTreeSet::new();
        for &e in &cur {
            next.insert(df(map, e)?);
        }
        cur = next;
        if cur.len() == 1 {
            return Ok(LinkMap { df: pairs, gate_depth: k });
        }
    }
    Err(MapError::GateBound(bound))
}

/// Complete list of n×n Perron–Frobenius matrices with spectral radius at most `b`.
pub fn pf_census(n: usize, b: f64) -> Result<Vec<IntMatrix>, MapError> {
    if !(1..=3).contains(&n) {
        return Err(MapError::CensusTooLarge(format!("size {n} is outside 1..=3")));
    }
    if b < 1.0 {
        return Ok(Vec::new());
    }
    let e = (n * n - 2 * n + 3) as i32;
    let total = (b.powi(e) + 1e-9).floor() as u64;
    let cells = (n * n) as u64;
    // number of non-negative vectors with sum ≤ total
    let mut count: f64 = 1.0;
    for i in 1..=cells {
        count *= (total + i) as f64 / i as f64;
    }
    if count > 5e7 {
        return Err(MapError::CensusTooLarge(format!("{count:.0} candidate matrices")));
    }
    let bound = rat_from_f64(b);
    let mut out = Vec::new();
    let mut cur = vec![0i64; n * n];
    enumerate_bounded(&mut cur, 0, total as i64, &mut |cells| {
        let rows: Vec<Vec<i64>> = cells.chunks(n).map(|r| r.to_vec()).collect();
        let m = IntMatrix::from_rows(&rows).unwrap();
        if pf_witness(&m).is_none() {
            return;
        }
        let sf = m.char_poly().squarefree();
        let hi = sf.cauchy_bound() + num_rational::BigRational::from_integer(1.into());
        if sf.count_roots(&bound, &hi) == 0 {
            out.push(m);
        }
    });
    out.sort();
    Ok(out)
}

fn enumerate_bounded(cur: &mut Vec<i64>, i: usize, left: i64, f: &mut dyn FnMut(&[i64])) {
    if i == cur.len() {
        f(cur);
        return;
    }
    for v in 0..=left {
        cur[i] = v;
        enumerate_bounded(cur, i + 1, left - v, f);
    }
    cur[i] = 0;
}

/// Parse a map file; `resolve` turns the `track=` reference into a track.
pub fn parse_map(
    text: &str,
    resolve: &dyn Fn(&str) -> Result<TrainTrack, MapError>,
) -> Result<TrainTrackMap, MapError> {
    let perr = |line: usize, msg: String| MapError::Parse { line, msg };
    let mut name = None;
    let mut track: Option<TrainTrack> = None;
    let mut mode_decorated: Option<bool> = None;
    let mut vertex_lines = Vec::new();
    let mut edge_lines = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        match toks[0] {
            "map" => {
                name = Some(toks.get(1).ok_or_else(|| perr(line, "map needs a name".into()))?.to_string());
                for kv in &toks[2..] {
                    if let Some(r) = kv.strip_prefix("track=") {
                        track = Some(resolve(r)?);
                    } else if let Some(m) = kv.strip_prefix("mode=") {
                        mode_decorated = Some(match m {
                            "decorated" => true,
                            "plain" => false,
                            _ => return Err(perr(line, format!("unknown mode {m}"))),
                        });
                    } else {
                        return Err(perr(line, format!("unexpected token {kv}")));
                    }
                }
            }
            "vertex" => {
                if toks.len() != 4 || toks[2] != "->" {
                    return Err(perr(line, "expected: vertex <switch> -> <switch>".into()));
                }
                vertex_lines.push((line, toks[1].to_string(), toks[3].to_string()));
            }
            "edge" => {
                if toks.len() < 4 || toks[2] != "->" {
                    return Err(perr(line, "expected: edge <id> -> <word>".into()));
                }
                edge_lines.push((line, toks[1].to_string(), toks[3..].iter().map(|s| s.to_string()).collect::<Vec<_>>()));
            }
            other => return Err(perr(line, format!("unknown directive {other}"))),
        }
    }
    let track = track.ok_or_else(|| perr(1, "missing map header with track=".into()))?;
    let mut images: Vec<Option<Vec<EdgeLetter>>> = vec![None; track.edges.len()];
    for (line, id, toks) in &edge_lines {
        let e = track.edge_index(id).ok_or_else(|| perr(*line, format!("unknown edge {id}")))?;
        if images[e].is_some() {
            return Err(perr(*line, format!("edge {id} given twice")));
        }
        let w: Result<Vec<EdgeLetter>, String> = toks.iter().map(|t| parse_letter(&track, t)).collect();
        images[e] = Some(w.map_err(|m| perr(*line, m))?);
    }
    let images: Vec<Vec<EdgeLetter>> = images
        .into_iter()
        .enumerate()
        .map(|(e, w)| w.ok_or_else(|| perr(0, format!("missing image for edge {}", track.edges[e].id))))
        .collect::<Result<_, _>>()?;
    let decorated = mode_decorated
        .unwrap_or_else(|| images.iter().flatten().any(|l| l.deco != Decoration::Plain));
    let mut map = TrainTrackMap {
        name: name.unwrap_or_else(|| "map".into()),
        vertex_map: vec![usize::MAX; track.switches.len()],
        track,
        images,
        decorated,
    };
    for (line, a, b) in &vertex_lines {
        let sa = map.track.switch_index(a).ok_or_else(|| perr(*line, format!("unknown switch {a}")))?;
        let sb = map.track.switch_index(b).ok_or_else(|| perr(*line, format!("unknown switch {b}")))?;
        map.vertex_map[sa] = sb;
    }
    // switches without a vertex line take the endpoint of an image
    for e in 0..map.images.len() {
        let p = map.edge_path(e)?;
        if let (Some(first), Some(last)) = (p.first(), p.last()) {
            let [a, b] = map.track.edges[e].ends;
            if map.vertex_map[a] == usize::MAX {
                map.vertex_map[a] = map.track.tail(*first);
            }
            if map.vertex_map[b] == usize::MAX {
                map.vertex_map[b] = map.track.head(*last);
            }
        }
    }
    Ok(map)
}

impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "charpoly {}; lambda {:.6}; pf {}", self.char_poly, self.lambda, self.pf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracks::builtin_track;

    fn resolve(name: &str) -> Result<TrainTrack, MapError> {
        Ok(builtin_track(name)?)
    }

    const F0: &str = "map f0 track=peacock
vertex T.1 -> T.2
vertex T.2 -> T.3
vertex T.3 -> T.1
edge o -> p0
edge g -> b0
edge r -> g0
edge p -> r- o- r0
edge b -> r- o0
";

    #[test]
    fn f0_matrix() {
        let f = parse_map(F0, &resolve).unwrap();
        assert!(f.validate().is_valid(), "{}", f.validate());
        let m = f.transition_matrix(false).unwrap().matrix;
        assert_eq!(
            m.rows(),
            vec![
                vec![0, 0, 2, 1, 0],
                vec![0, 0, 0, 0, 1],
                vec![1, 0, 0, 0, 0],
                vec![0, 1, 0, 0, 0],
                vec![0, 0, 3, 2, 0]
            ]
        );
    }

    #[test]
    fn bad_maps_are_reported() {
        let sharp = F0.replace("edge o -> p0", "edge o -> p ~p p");
        let f = parse_map(&sharp, &resolve).unwrap();
        assert!(f.validate().violations.iter().any(|v| v.starts_with("sharp turn")));
        let wrong_end = F0.replace("edge o -> p0", "vertex L1.1 -> L3.1\nedge o -> b0");
        let f = parse_map(&wrong_end, &resolve).unwrap();
        assert!(f.validate().violations.iter().any(|v| v.starts_with("endpoint mismatch")));
    }

    #[test]
    fn serialization_round_trips() {
        let f = parse_map(F0, &resolve).unwrap();
        let s = f.serialize("peacock");
        let g = parse_map(&s, &resolve).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn spectral_of_fibonacci() {
        let m = IntMatrix::from_rows(&[vec![1, 1], vec![1, 0]]).unwrap();
        let s = spectral(&m, &Normalization::MaxOne).unwrap();
        assert!((s.lambda - 1.618033988749895).abs() < 1e-12);
        assert_eq!(s.witness, Some(2));
        assert!(s.residual.unwrap() < 1e-9);
        let z = spectral(&IntMatrix::zeros(3), &Normalization::MaxOne).unwrap();
        assert!(!z.pf);
        assert_eq!(z.witness, None);
    }

    #[test]
    fn link_map_gate_depth() {
        let f = parse_map(F0, &resolve).unwrap();
        let t1 = f.track.switch_index("T.1").unwrap();
        let lm = link_map(&f, t1).unwrap();
        assert_eq!(lm.df.len(), 2);
        assert_eq!(lm.gate_depth, 2);
        let l1 = f.track.switch_index("L1.1").unwrap();
        assert_eq!(link_map(&f, l1).unwrap().gate_depth, 1);
    }

    #[test]
    fn census_small() {
        assert!(pf_census(2, 0.5).unwrap().is_empty());
        let c = pf_census(2, 1.7).unwrap();
        assert!(c.contains(&IntMatrix::from_rows(&[vec![1, 1], vec![1, 0]]).unwrap()));
    }
}
