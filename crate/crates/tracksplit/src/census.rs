//! The βₙ family on the Peacock and a bounded search over decorated maps.
//!
//! Image strands are realized in a ribbon structure on the Peacock: every
//! switch carries its real ends, the two infinitesimal ends, and a virtual end
//! `P` between them (the marked image point at a trigon corner, the puncture at
//! a loop). Two strands cross when their chords interleave at a node, or when a
//! run of shared edges is entered on one side and left on the other.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::lift;
use crate::maps::{format_word, pf_witness, toward_puncture, Decoration, EdgeLetter, MapError, TrainTrackMap};
use crate::matrix::IntMatrix;
use crate::tracks::{builtin_track, EdgeEnd, TrainTrack};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CensusError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("bound exceeded: {0}")]
    Bound(String),
    #[error("unrealizable strand: {0}")]
    Strand(String),
    #[error("{0}")]
    Other(String),
}


/// Closed form of the transition matrix of `f_n` in the order (o,g,p,b,r).
pub fn closed_form_matrix(n: i64) -> IntMatrix {
    IntMatrix::from_rows(&[
        vec![0, 0, n + 2, n + 1, 0],
        vec![0, 0, 0, 0, 1],
        vec![1, 0, 0, 0, 0],
        vec![0, 1, 0, 0, 0],
        vec![0, 0, n + 3, n + 2, 0],
    ])
    .unwrap()
}

fn family_words(n: usize) -> (String, String) {
    let pair = |k: usize| "r- o- ".repeat(k);
    if n.is_multiple_of(2) {
        (format!("{}r0", pair(n / 2 + 1)), format!("{}r- o0", pair(n / 2)))
    } else {
        (format!("{}r- o0", pair(n.div_ceil(2))), format!("{}r0", pair(n.div_ceil(2))))
    }
}

/// Map-file text of `f_n`.
pub fn family_map_text(n: usize) -> String {
    let (p, b) = family_words(n);
    format!(
        "map f{n} track=peacock\nvertex T.1 -> T.2\nvertex T.2 -> T.3\nvertex T.3 -> T.1\nedge o -> p0\nedge g -> b0\nedge r -> g0\nedge p -> {p}\nedge b -> {b}\n"
    )
}

/// `f_n` together with the closed-form matrix `M_n`.
pub fn beta_family(n: i64) -> Result<(TrainTrackMap, IntMatrix), CensusError> {
    if n < 0 {
        return Err(CensusError::Other("negative index".into()));
    }
    let resolve = |name: &str| -> Result<TrainTrack, MapError> { Ok(builtin_track(name)?) };
    let map = crate::maps::parse_map(&family_map_text(n as usize), &resolve)?;
    Ok((map, closed_form_matrix(n)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Half {
    Real(EdgeEnd),
    L(usize),
    R(usize),
    P(usize),
}

struct Ribbon<'a> {
    t: &'a TrainTrack,
    pos: HashMap<Half, (usize, usize)>,
    len: Vec<usize>,
}

impl<'a> Ribbon<'a> {
    fn new(t: &'a TrainTrack) -> Ribbon<'a> {
        let mut pos = HashMap::new();
        let mut len = Vec::new();
        for s in 0..t.switches.len() {
            // the side toward v_r sits next to l(v): this is the handedness
            // under which the family maps are embedded
            let mut c: Vec<Half> = t.orders[s].iter().rev().map(|&e| Half::Real(e)).collect();
            c.extend([Half::R(s), Half::P(s), Half::L(s)]);
            for (i, h) in c.iter().enumerate() {
                pos.insert(*h, (s, i));
            }
            len.push(c.len());
        }
        Ribbon { t, pos, len }
    }

    fn node(&self, h: Half) -> usize {
        self.pos[&h].0
    }

    fn twin(&self, h: Half) -> Half {
        match h {
            Half::Real(e) => Half::Real(e.other()),
            Half::L(s) => Half::R(self.t.neighbours(s).0),
            Half::R(s) => Half::L(self.t.neighbours(s).1),
            Half::P(s) => Half::P(s),
        }
    }

    /// Counterclockwise steps from `from` to `to` at their common node.
    fn dist(&self, from: Half, to: Half) -> usize {
        let (n, a) = self.pos[&from];
        let (_, b) = self.pos[&to];
        (b + self.len[n] - a) % self.len[n]
    }

    fn interleaved(&self, a: Half, b: Half, c: Half, d: Half) -> bool {
        let db = self.dist(a, b);
        let inside = |x: Half| {
            let dx = self.dist(a, x);
            dx > 0 && dx < db
        };
        inside(c) != inside(d)
    }

    fn is_corner_mark(&self, h: Half) -> bool {
        matches!(h, Half::P(s) if !self.t.is_loop_switch(s))
    }

}

type Chord = (Half, Half);

/// Chords traced by a decorated word starting at the marked point of `start`.
fn strand(t: &TrainTrack, rb: &Ribbon, start: usize, word: &[EdgeLetter]) -> Result<Vec<Chord>, String> {
    open_strand(t, rb, start, word, false)
}

/// With `open` set, a word may stop after a side letter.
fn open_strand(t: &TrainTrack, rb: &Ribbon, start: usize, word: &[EdgeLetter], open: bool) -> Result<Vec<Chord>, String> {
    let mut chords = Vec::new();
    let mut node = start;
    let mut inh = Half::P(start);
    for (k, l) in word.iter().enumerate() {
        let x = toward_puncture(t, l.edge).map_err(|e| e.to_string())?;
        let c = t.tail(x);
        if k == 0 {
            if c != node {
                return Err("word does not start at the image corner".into());
            }
        } else {
            if c == node || t.switches[c].polygon != t.switches[node].polygon {
                return Err("sharp turn".into());
            }
            let (vl, vr) = t.neighbours(node);
            let out = if c == vl {
                Half::L(node)
            } else if c == vr {
                Half::R(node)
            } else {
                return Err("corners are not adjacent".into());
            };
            chords.push((inh, out));
            inh = rb.twin(out);
            node = c;
        }
        chords.push((inh, Half::Real(x.tail_end())));
        let lp = t.head(x);
        let hin = Half::Real(x.head_end());
        match l.deco {
            Decoration::Terminal => {
                if k + 1 != word.len() {
                    return Err("terminal letter inside a word".into());
                }
                chords.push((hin, Half::P(lp)));
                return Ok(chords);
            }
            Decoration::Plus | Decoration::Minus => {
                // `x+` turns right around the loop, keeping the puncture on its left
                let exit = if l.deco == Decoration::Plus { Half::R(lp) } else { Half::L(lp) };
                chords.push((hin, exit));
                chords.push((rb.twin(exit), hin));
                inh = Half::Real(x.tail_end());
            }
            Decoration::Plain => return Err("plain letter in a decorated word".into()),
        }
    }
    if open {
        return Ok(chords);
    }
    Err("word does not end with a terminal letter".into())
}

fn reversed(s: &[Chord]) -> Vec<Chord> {
    s.iter().rev().map(|&(a, b)| (b, a)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    Absorbed,
    Crossing,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsorptionViolation {
    pub kind: ViolationKind,
    pub strands: (String, String),
    pub node: String,
}

struct Conflict {
    kind: ViolationKind,
    node: usize,
}

/// First conflict between two strands. `same` marks a strand compared with
/// itself; `start_right` says whether `t` leaves a shared marked point to the
/// right of `s`.
fn conflict(rb: &Ribbon, s: &[Chord], t: &[Chord], same: bool, start_right: Option<bool>, chords: bool) -> Option<Conflict> {
    if chords {
        for (i, &(a, b)) in s.iter().enumerate() {
            for (j, &(c, d)) in t.iter().enumerate() {
                if (same && i == j) || rb.node(a) != rb.node(c) {
                    continue;
                }
                if a == c && rb.is_corner_mark(a) && b != d && !same {
                    if Some(rb.dist(a, d) < rb.dist(a, b)) != start_right {
                        return Some(Conflict {
                            kind: ViolationKind::Absorbed,
                            node: rb.node(a),
                        });
                    }
                    continue;
                }
                let distinct = a != c && a != d && b != c && b != d;
                if distinct && rb.interleaved(a, b, c, d) {
                    return Some(Conflict {
                        kind: ViolationKind::Crossing,
                        node: rb.node(a),
                    });
                }
            }
        }
    }
    for i in 0..s.len() {
        for j in 0..t.len() {
            if (same && i == j) || s[i].1 != t[j].1 || matches!(s[i].1, Half::P(_)) {
                continue;
            }
            let shared_mark = s[i].0 == t[j].0 && matches!(s[i].0, Half::P(_));
            if s[i].0 == t[j].0 && !shared_mark {
                continue;
            }
            let start = if shared_mark {
                match start_right {
                    Some(r) => r,
                    None => continue,
                }
            } else {
                let h = s[i].1;
                rb.dist(h, t[j].0) >= rb.dist(h, s[i].0)
            };
            let mut k = 1;
            while i + k < s.len() && j + k < t.len() && s[i + k].1 == t[j + k].1 {
                if matches!(s[i + k].1, Half::P(_)) {
                    return Some(Conflict {
                        kind: ViolationKind::Crossing,
                        node: rb.node(s[i + k].1),
                    });
                }
                k += 1;
            }
            if i + k >= s.len() || j + k >= t.len() {
                continue;
            }
            let (hin, so, to) = (s[i + k].0, s[i + k].1, t[j + k].1);
            let end = rb.dist(hin, to) < rb.dist(hin, so);
            if start != end {
                let kind = if shared_mark || rb.is_corner_mark(s[i].0) || rb.is_corner_mark(t[j].0) {
                    ViolationKind::Absorbed
                } else {
                    ViolationKind::Crossing
                };
                return Some(Conflict {
                    kind,
                    node: rb.node(hin),
                });
            }
        }
    }
    None
}

fn self_conflict(rb: &Ribbon, s: &[Chord]) -> Option<Conflict> {
    conflict(rb, s, s, true, None, true).or_else(|| conflict(rb, s, &reversed(s), false, None, false))
}

/// The polygon end of an edge.
fn source_end(t: &TrainTrack, e: usize) -> Option<EdgeEnd> {
    Some(toward_puncture(t, e).ok()?.tail_end())
}

fn pair_conflict(rb: &Ribbon, t: &TrainTrack, a: usize, s: &[Chord], b: usize, u: &[Chord]) -> Option<Conflict> {
    let start_right = match (source_end(t, a), source_end(t, b)) {
        (Some(ea), Some(eb)) if t.switch_of(ea) == t.switch_of(eb) => {
            let p = Half::P(t.switch_of(ea));
            Some(rb.dist(p, Half::Real(eb)) < rb.dist(p, Half::Real(ea)))
        }
        _ => None,
    };
    conflict(rb, s, u, false, start_right, true).or_else(|| conflict(rb, s, &reversed(u), false, None, false))
}

fn strands_of(map: &TrainTrackMap, rb: &Ribbon) -> Result<Vec<Vec<Chord>>, CensusError> {
    let t = &map.track;
    (0..t.edges.len())
        .map(|e| {
            let corner = toward_puncture(t, e)?.tail_end();
            let start = map.vertex_map[t.switch_of(corner)];
            strand(t, rb, start, &map.images[e]).map_err(|m| CensusError::Strand(format!("{}: {m}", t.edges[e].id)))
        })
        .collect()
}

/// Crossings and absorptions among the image strands of a decorated map.
pub fn absorption_check(map: &TrainTrackMap) -> Result<Vec<AbsorptionViolation>, CensusError> {
    // without side decorations there is nothing to order
    if !map.decorated {
        return Ok(Vec::new());
    }
    let t = &map.track;
    let rb = Ribbon::new(t);
    let strands = strands_of(map, &rb)?;
    let mut out = Vec::new();
    let name = |e: usize| t.edges[e].id.clone();
    for a in 0..strands.len() {
        if let Some(c) = self_conflict(&rb, &strands[a]) {
            out.push(AbsorptionViolation {
                kind: c.kind,
                strands: (name(a), name(a)),
                node: t.switch_name(c.node),
            });
        }
        for b in a + 1..strands.len() {
            if let Some(c) = pair_conflict(&rb, t, a, &strands[a], b, &strands[b]) {
                out.push(AbsorptionViolation {
                    kind: c.kind,
                    strands: (name(a), name(b)),
                    node: t.switch_name(c.node),
                });
            }
        }
    }
    Ok(out)
}

/// Image strands over one edge, listed left to right along its orientation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrandOrder {
    pub edge: String,
    /// `(source edge, occurrence along the source word, decoration)`.
    pub strands: Vec<(String, usize, String)>,
}

pub fn strand_order(map: &TrainTrackMap, edge: usize) -> Result<StrandOrder, CensusError> {
    let t = &map.track;
    let rb = Ribbon::new(t);
    let strands = strands_of(map, &rb)?;
    let fwd = Half::Real(EdgeEnd { edge, side: 0 });
    let bwd = Half::Real(EdgeEnd { edge, side: 1 });
    // each occurrence as (strand, oriented chords, chord index whose out runs along the edge)
    let mut occ: Vec<(usize, usize, Vec<Chord>, usize)> = Vec::new();
    for (k, s) in strands.iter().enumerate() {
        let mut n = 0;
        for i in 0..s.len() {
            if s[i].1 == fwd {
                occ.push((k, n, s.clone(), i));
                n += 1;
            } else if s[i].1 == bwd {
                let r = reversed(s);
                // chord i of s runs backwards; in the reversal the chord before leaves along the edge
                let ri = s.len() - 1 - i;
                occ.push((k, n, r.clone(), ri - 1));
                n += 1;
            }
        }
    }
    let left_of = |x: &(usize, usize, Vec<Chord>, usize), y: &(usize, usize, Vec<Chord>, usize)| -> bool {
        let (s, i) = (&x.2, x.3);
        let (u, j) = (&y.2, y.3);
        let mut k = 1;
        while i + k < s.len() && j + k < u.len() && s[i + k].1 == u[j + k].1 {
            k += 1;
        }
        // x is left of y exactly when y is right of x
        if i + k < s.len() && j + k < u.len() {
            let hin = s[i + k].0;
            return rb.dist(hin, u[j + k].1) < rb.dist(hin, s[i + k].1);
        }
        let mut k = 0;
        while k < i && k < j && s[i - k].0 == u[j - k].0 && !matches!(s[i - k].0, Half::P(_)) {
            k += 1;
        }
        if s[i - k].0 == u[j - k].0 {
            // both leave the same marked point: the source order decides
            let (ex, ey) = (source_end(t, x.0), source_end(t, y.0));
            if let (Some(ex), Some(ey)) = (ex, ey) {
                let p = Half::P(t.switch_of(ex));
                return rb.dist(p, Half::Real(ey)) < rb.dist(p, Half::Real(ex));
            }
            return x.0 < y.0;
        }
        let h = s[i - k].1;
        rb.dist(h, u[j - k].0) > rb.dist(h, s[i - k].0)
    };
    let mut sorted: Vec<usize> = Vec::new();
    for idx in 0..occ.len() {
        let pos = sorted.iter().position(|&o| left_of(&occ[idx], &occ[o])).unwrap_or(sorted.len());
        sorted.insert(pos, idx);
    }
    // a side letter crosses its edge twice, a terminal letter once
    let deco_of = |k: usize, n: usize| -> String {
        let mut seen = 0;
        for l in &map.images[k] {
            if l.edge == edge {
                let width = if l.deco == Decoration::Terminal { 1 } else { 2 };
                if n < seen + width {
                    return match l.deco {
                        Decoration::Plus => "+",
                        Decoration::Minus => "-",
                        Decoration::Terminal => "0",
                        Decoration::Plain => "",
                    }
                    .to_string();
                }
                seen += width;
            }
        }
        String::new()
    };
    Ok(StrandOrder {
        edge: t.edges[edge].id.clone(),
        strands: sorted
            .into_iter()
            .map(|o| (t.edges[occ[o].0].id.clone(), occ[o].1, deco_of(occ[o].0, occ[o].1)))
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    LemmaReplay,
    Full,
}

pub const MAX_LEN_GUARD: usize = 12;

fn decorated_map(t: &TrainTrack, rotation: &[usize], images: Vec<Vec<EdgeLetter>>, name: &str) -> Result<TrainTrackMap, CensusError> {
    let mut vertex_map = vec![usize::MAX; t.switches.len()];
    for (s, &img) in rotation.iter().enumerate() {
        if img != usize::MAX {
            vertex_map[s] = img;
        }
    }
    for (e, w) in images.iter().enumerate() {
        let last = w.last().ok_or_else(|| CensusError::Other("empty word".into()))?;
        let lp = t.head(toward_puncture(t, last.edge)?);
        vertex_map[t.head(toward_puncture(t, e)?)] = lp;
    }
    Ok(TrainTrackMap {
        name: name.to_string(),
        track: t.clone(),
        vertex_map,
        images,
        decorated: true,
    })
}

/// All self-consistent decorated words for edge `e` from `start`, avoiding `e`.
fn words_for(t: &TrainTrack, rb: &Ribbon, e: usize, start: usize, max_len: usize) -> Vec<(Vec<EdgeLetter>, Vec<Chord>)> {
    let mut out = Vec::new();
    let mut word = Vec::new();
    extend_words(t, rb, e, start, start, true, max_len, &mut word, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn extend_words(
    t: &TrainTrack,
    rb: &Ribbon,
    e: usize,
    start: usize,
    corner: usize,
    first: bool,
    max_len: usize,
    word: &mut Vec<EdgeLetter>,
    out: &mut Vec<(Vec<EdgeLetter>, Vec<Chord>)>,
) {
    let used = 2 * word.len();
    for x in 0..t.edges.len() {
        if x == e {
            continue;
        }
        let Ok(l) = toward_puncture(t, x) else { continue };
        let c = t.tail(l);
        let ok = if first { c == corner } else { c != corner && t.switches[c].polygon == t.switches[corner].polygon };
        if !ok {
            continue;
        }
        if used < max_len {
            word.push(EdgeLetter::decorated(x, Decoration::Terminal));
            if let Ok(s) = strand(t, rb, start, word) {
                if self_conflict(rb, &s).is_none() {
                    out.push((word.clone(), s));
                }
            }
            word.pop();
        }
        if used + 3 <= max_len {
            for d in [Decoration::Plus, Decoration::Minus] {
                word.push(EdgeLetter::decorated(x, d));
                // prune prefixes that already cross themselves
                let alive = match open_strand(t, rb, start, word, true) {
                    Ok(s) => self_conflict(rb, &s).is_none(),
                    Err(_) => false,
                };
                if alive {
                    extend_words(t, rb, e, start, c, false, max_len, word, out);
                }
                word.pop();
            }
        }
    }
}

fn letter_label(t: &TrainTrack, l: &EdgeLetter) -> String {
    crate::maps::format_letter(t, l)
}

fn axioms_hold(t: &TrainTrack, e: usize, w: &[EdgeLetter]) -> bool {
    let id = t.edges[e].id.as_str();
    let first = letter_label(t, &w[0]);
    match id {
        "p" | "b" => first == "r-",
        "r" => first == "g-" || first == "g0",
        _ => true,
    }
}

/// The Peacock with its trigon rotation `T.1 → T.2 → T.3 → T.1`.
fn peacock_rotation(t: &TrainTrack) -> Vec<usize> {
    let mut rot = vec![usize::MAX; t.switches.len()];
    let s = |n: &str| t.switch_index(n).unwrap();
    rot[s("T.1")] = s("T.2");
    rot[s("T.2")] = s("T.3");
    rot[s("T.3")] = s("T.1");
    rot
}

/// Surviving decorated maps on the Peacock with image words of at most
/// `max_len` plain letters, normalized so that `T.1 ↦ T.2`.
pub fn enumerate_candidates(max_len: usize, mode: Mode) -> Result<Vec<TrainTrackMap>, CensusError> {
    enumerate_candidates_jobs(max_len, mode, 1)
}

/// As [`enumerate_candidates`], splitting the first search level over `jobs`
/// threads. The result does not depend on `jobs`.
pub fn enumerate_candidates_jobs(max_len: usize, mode: Mode, jobs: usize) -> Result<Vec<TrainTrackMap>, CensusError> {
    if max_len > MAX_LEN_GUARD {
        return Err(CensusError::Bound(format!("max length {max_len} exceeds {MAX_LEN_GUARD}")));
    }
    let t = builtin_track("peacock").map_err(MapError::from)?;
    let rb = Ribbon::new(&t);
    let rot = peacock_rotation(&t);
    let order: Vec<usize> = ["r", "p", "b", "o", "g"].iter().map(|n| t.edge_index(n).unwrap()).collect();
    let mut cands = Vec::new();
    for &e in &order {
        let corner = toward_puncture(&t, e)?.tail_end();
        let start = rot[t.switch_of(corner)];
        let mut ws = words_for(&t, &rb, e, start, max_len);
        if mode == Mode::LemmaReplay {
            ws.retain(|(w, _)| axioms_hold(&t, e, w));
        }
        cands.push(ws);
    }
    let jobs = jobs.max(1);
    let first = cands[0].len();
    let parts: Vec<Result<Vec<TrainTrackMap>, CensusError>> = std::thread::scope(|sc| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                let (t, rb, rot, order, cands) = (&t, &rb, &rot, &order, &cands);
                sc.spawn(move || {
                    let mut found = Vec::new();
                    for ci in (j..first).step_by(jobs) {
                        let mut chosen = vec![ci];
                        search(t, rb, rot, order, cands, &mut chosen, &mut found)?;
                    }
                    Ok(found)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("search thread panicked")).collect()
    });
    let mut found = Vec::new();
    for p in parts {
        found.extend(p?);
    }
    found.sort_by_key(|m: &TrainTrackMap| m.serialize("peacock"));
    for (i, m) in found.iter_mut().enumerate() {
        m.name = format!("survivor{}", i + 1);
    }
    Ok(found)
}

fn search(
    t: &TrainTrack,
    rb: &Ribbon,
    rot: &[usize],
    order: &[usize],
    cands: &[Vec<(Vec<EdgeLetter>, Vec<Chord>)>],
    chosen: &mut Vec<usize>,
    found: &mut Vec<TrainTrackMap>,
) -> Result<(), CensusError> {
    let depth = chosen.len();
    if depth == order.len() {
        let mut images = vec![Vec::new(); t.edges.len()];
        for (k, &c) in chosen.iter().enumerate() {
            images[order[k]] = cands[k][c].0.clone();
        }
        let map = decorated_map(t, rot, images, "candidate")?;
        if !map.validate().is_valid() {
            return Ok(());
        }
        let m = map.transition_matrix(false)?.matrix;
        if pf_witness(&m).is_none() {
            return Ok(());
        }
        match lift(&map, 1) {
            Ok(l) if l.trace == 0 => found.push(map),
            Ok(_) => {}
            Err(e) => return Err(CensusError::Other(e.to_string())),
        }
        return Ok(());
    }
    let e = order[depth];
    'cand: for (ci, (w, s)) in cands[depth].iter().enumerate() {
        let term = w.last().unwrap().edge;
        for (k, &c) in chosen.iter().enumerate() {
            let (w2, s2) = &cands[k][c];
            if w2.last().unwrap().edge == term {
                continue 'cand;
            }
            if pair_conflict(rb, t, order[k], s2, e, s).is_some() {
                continue 'cand;
            }
        }
        chosen.push(ci);
        search(t, rb, rot, order, cands, chosen, found)?;
        chosen.pop();
    }
    Ok(())
}

/// Observed `Df` (first decorated letter) of each edge over the survivors.
pub fn first_letter_census(maps: &[TrainTrackMap]) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for m in maps {
        for (e, w) in m.images.iter().enumerate() {
            if let Some(l) = w.first() {
                out.entry(m.track.edges[e].id.clone())
                    .or_default()
                    .insert(letter_label(&m.track, l));
            }
        }
    }
    out
}

/// First letters of every self-consistent word for `edge` that avoids `edge`.
pub fn depth_one_first_letters(edge: &str, max_len: usize) -> Result<BTreeSet<String>, CensusError> {
    let t = builtin_track("peacock").map_err(MapError::from)?;
    let rb = Ribbon::new(&t);
    let rot = peacock_rotation(&t);
    let e = t
        .edge_index(edge)
        .ok_or_else(|| CensusError::Other(format!("unknown edge {edge}")))?;
    let corner = toward_puncture(&t, e)?.tail_end();
    let start = rot[t.switch_of(corner)];
    Ok(words_for(&t, &rb, e, start, max_len)
        .iter()
        .map(|(w, _)| letter_label(&t, &w[0]))
        .collect())
}

/// Conjugate by the orientation-reversing symmetry of the Peacock, swapping
/// the side decorations.
pub fn reverse_inverse(map: &TrainTrackMap) -> Result<TrainTrackMap, CensusError> {
    let t = &map.track;
    let rho = t
        .isomorphisms(t, true)
        .into_iter()
        .find(|i| i.reflecting)
        .ok_or_else(|| CensusError::Other("track has no orientation-reversing symmetry".into()))?;
    let images = (0..t.edges.len())
        .map(|e| {
            let src = rho.edge_map[e].0;
            map.images[src]
                .iter()
                .map(|l| {
                    let edge = rho.edge_map[l.edge].0;
                    let deco = match l.deco {
                        Decoration::Plus => Decoration::Minus,
                        Decoration::Minus => Decoration::Plus,
                        d => d,
                    };
                    EdgeLetter { edge, rev: false, deco }
                })
                .collect()
        })
        .collect();
    let vertex_map = (0..t.switches.len())
        .map(|s| rho.switch_map[map.vertex_map[rho.switch_map[s]]])
        .collect();
    Ok(TrainTrackMap {
        name: format!("{}-ri", map.name),
        track: t.clone(),
        vertex_map,
        images,
        decorated: map.decorated,
    })
}

pub fn describe(map: &TrainTrackMap) -> String {
    let t = &map.track;
    t.edges
        .iter()
        .enumerate()
        .map(|(e, ed)| format!("f({})={}", ed.id, format_word(t, &map.images[e])))
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_words_match_parity_forms() {
        assert_eq!(family_words(0), ("r- o- r0".into(), "r- o0".into()));
        assert_eq!(family_words(1), ("r- o- r- o0".into(), "r- o- r0".into()));
        assert_eq!(family_words(2), ("r- o- r- o- r0".into(), "r- o- r- o0".into()));
    }

    #[test]
    fn family_is_realizable() {
        for n in 0..6 {
            let (f, _) = beta_family(n).unwrap();
            assert_eq!(absorption_check(&f).unwrap(), vec![], "f{n}");
        }
    }

    #[test]
    fn family_matrices() {
        for n in 0..=10 {
            let (f, m) = beta_family(n).unwrap();
            assert!(f.validate().is_valid());
            assert_eq!(f.transition_matrix(false).unwrap().matrix, m, "n={n}");
            assert!(pf_witness(&m).unwrap() <= 7);
            assert_eq!(lift(&f, 1).unwrap().trace, 0);
        }
        assert!(beta_family(-1).is_err());
    }

    #[test]
    fn swapped_cone_is_absorbed() {
        let resolve = |name: &str| -> Result<TrainTrack, MapError> { Ok(builtin_track(name)?) };
        let text = family_map_text(0).replace("edge o -> p0", "edge o -> b0").replace("edge g -> b0", "edge g -> p0");
        let f = crate::maps::parse_map(&text, &resolve).unwrap();
        let v = absorption_check(&f).unwrap();
        assert!(v.iter().any(|x| x.kind == ViolationKind::Absorbed), "{v:?}");
    }

    #[test]
    fn plain_maps_are_vacuous() {
        let (f, _) = beta_family(0).unwrap();
        assert!(absorption_check(&f.to_plain().unwrap()).unwrap().is_empty());
    }

    #[test]
    fn short_words_leave_nothing() {
        assert!(enumerate_candidates(1, Mode::LemmaReplay).unwrap().is_empty());
        assert!(enumerate_candidates(13, Mode::Full).is_err());
    }

    #[test]
    fn replay_finds_the_family() {
        let found = enumerate_candidates(9, Mode::LemmaReplay).unwrap();
        let family: Vec<_> = (0..3).map(|n| beta_family(n).unwrap().0.images).collect();
        let mut got: Vec<_> = found.iter().map(|m| m.images.clone()).collect();
        got.sort_by_key(|w| w[2].len());
        assert_eq!(got, family);
    }

    #[test]
    fn reverse_inverse_is_an_involution() {
        let (f, _) = beta_family(0).unwrap();
        let g = reverse_inverse(&f).unwrap();
        let t = &f.track;
        let s = |n: &str| t.switch_index(n).unwrap();
        assert_eq!(g.vertex_map[s("T.1")], s("T.3"));
        assert_eq!(lift(&g, 1).unwrap().trace, 0);
        assert!(absorption_check(&g).unwrap().is_empty());
        let h = reverse_inverse(&g).unwrap();
        assert_eq!(h.images, f.images);
        assert_eq!(h.vertex_map, f.vertex_map);
    }

    #[test]
    fn strand_order_over_r() {
        let (f, _) = beta_family(0).unwrap();
        let r = f.track.edge_index("r").unwrap();
        let o = strand_order(&f, r).unwrap();
        // f(p) = r- o- r0 crosses r three times, f(b) = r- o0 twice
        assert_eq!(o.strands.len(), 5);
        let count = |e: &str| o.strands.iter().filter(|s| s.0 == e).count();
        assert_eq!((count("p"), count("b")), (3, 2));
        assert!(o.strands.iter().all(|s| s.2 == "-" || s.2 == "0"));
    }
}
