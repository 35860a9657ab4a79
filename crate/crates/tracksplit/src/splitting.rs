//! Tight splits, rigidity, joint reduction and a fold-based map generator.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maps::{spectral, MapError, Normalization, TrainTrackMap};
use crate::matrix::IntMatrix;
use crate::tracks::{letter_into, EdgeEnd, Letter, TrackIso, TrainTrack};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("no preimage switch for {0}")]
    NoPreimage(String),
    #[error("side {side:?} is not admissible at {switch}")]
    NotAdmissible { switch: String, side: Side },
    #[error("unsupported split configuration at {0}")]
    Unsupported(String),
    #[error("trichotomy violated at {0}")]
    Trichotomy(String),
    #[error("rewriting left an unreplaced letter of {0}")]
    Rewrite(String),
    #[error("conjugation check failed at {0}")]
    Conjugation(String),
    #[error("no splittable maximal-valence loop switch")]
    NoCandidate,
    #[error("step limit {0} exceeded")]
    MaxSteps(usize, Box<SplitLog>),
    #[error("matrix memory guard exceeded")]
    MemoryGuard,
    #[error("transition matrix is not Perron-Frobenius")]
    NotPf,
    #[error("no legal fold available")]
    NoFold,
    #[error("could not return to the starting track")]
    NoReturn,
    #[error("{0}")]
    Other(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Splittability {
    Left,
    Right,
    Rigid,
    Singleton,
    Unsupported,
}

/// Combinatorial data of a split: `alpha` replaces edge `a.edge` and runs as `a·~b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitGeometry {
    pub a: Letter,
    pub b: Letter,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMove {
    pub switch: String,
    pub side: Side,
    pub folded: (String, String),
    pub alpha: String,
    /// `(i, j)` with `P = I + D_{i,j}`, 1-based.
    pub p: (usize, usize),
    pub p_matrix: IntMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStep {
    pub step: usize,
    pub split: SplitMove,
    pub before: IntMatrix,
    pub after: IntMatrix,
    pub mu_before: Vec<f64>,
    pub mu_after: Vec<f64>,
    pub joints_before: usize,
    pub joints_after: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitLog {
    pub steps: Vec<SplitStep>,
    pub seen: usize,
    pub recurrences: usize,
}

/// The pair folded by a tight split at `v`, as letters running into their
/// switches. Corners of polygons are only supported when both neighbouring
/// corners carry a single real edge.
pub fn split_pair(t: &TrainTrack, v: usize, side: Side) -> Result<SplitGeometry, SplitError> {
    let (vl, vr) = t.neighbours(v);
    if !t.is_loop_switch(v) && t.valence(v) >= 2 && (t.valence(vl) != 1 || t.valence(vr) != 1) {
        return Err(SplitError::Unsupported(t.switch_name(v)));
    }
    fold_pair(t, v, side)
}

/// The pair of a combinatorial split at `v`, with no restriction on neighbours.
pub fn fold_pair(t: &TrainTrack, v: usize, side: Side) -> Result<SplitGeometry, SplitError> {
    let name = || t.switch_name(v);
    if t.valence(v) < 2 {
        return Err(SplitError::Unsupported(name()));
    }
    let (vl, vr) = t.neighbours(v);
    let (ea, eb) = match side {
        Side::Left => (t.l_end(v), t.r_end(vl)),
        Side::Right => (t.r_end(v), t.l_end(vr)),
    };
    let (ea, eb) = (ea.unwrap(), eb.ok_or_else(|| SplitError::Unsupported(name()))?);
    if ea.edge == eb.edge {
        return Err(SplitError::Unsupported(name()));
    }
    Ok(SplitGeometry {
        a: letter_into(ea),
        b: letter_into(eb),
    })
}

fn fresh_name(t: &TrainTrack, old: &str) -> String {
    let base = old.trim_end_matches('\'');
    for k in 1..4 {
        let cand = format!("{base}{}", "'".repeat(k));
        if t.edge_index(&cand).is_none() {
            return cand;
        }
    }
    (1..)
        .map(|k| format!("{base}#{k}"))
        .find(|c| t.edge_index(c).is_none())
        .unwrap()
}

/// The split track; switches keep their indices and `alpha` takes the index of `a`.
pub fn split_track(t: &TrainTrack, v: usize, side: Side) -> Result<(TrainTrack, SplitGeometry), SplitError> {
    let g = fold_pair(t, v, side)?;
    let j = g.a.edge;
    let mut n = t.clone();
    n.layouts.clear();
    let a_far = g.a.tail_end();
    let b_far = g.b.tail_end();
    let far_a_switch = t.switch_of(a_far);
    let u = t.switch_of(b_far);
    let alpha_tail = EdgeEnd { edge: j, side: 0 };
    let alpha_head = EdgeEnd { edge: j, side: 1 };
    let old_a_here = g.a.head_end();
    n.orders[v].retain(|&e| e != old_a_here);
    let slot = n.orders[far_a_switch].iter().position(|&e| e == a_far).unwrap();
    n.orders[far_a_switch][slot] = alpha_tail;
    let pos = n.orders[u].iter().position(|&e| e == b_far).unwrap();
    match side {
        Side::Left => n.orders[u].insert(pos, alpha_head),
        Side::Right => n.orders[u].insert(pos + 1, alpha_head),
    }
    n.edges[j].id = fresh_name(t, &t.edges[j].id);
    n.edges[j].ends = [far_a_switch, u];
    n.exterior_cusps = None;
    Ok((n, g))
}

/// Rewrite a path on the old track into letters of the split track.
fn rewrite(path: &[Letter], g: SplitGeometry) -> Result<Vec<Letter>, SplitError> {
    let j = g.a.edge;
    let mut out = Vec::with_capacity(path.len());
    let mut i = 0;
    while i < path.len() {
        let x = path[i];
        if x == g.a && path.get(i + 1) == Some(&g.b.inv()) {
            out.push(Letter::fwd(j));
            i += 2;
        } else if x == g.b && path.get(i + 1) == Some(&g.a.inv()) {
            out.push(Letter::fwd(j).inv());
            i += 2;
        } else if x.edge == j {
            return Err(SplitError::Rewrite(format!("edge index {j}")));
        } else {
            out.push(x);
            i += 1;
        }
    }
    Ok(out)
}

/// Whether every occurrence of `a` in any image is followed by `~b`.
fn tight(paths: &[Vec<Letter>], g: SplitGeometry) -> bool {
    paths.iter().all(|p| {
        p.iter().enumerate().all(|(i, &x)| {
            if x == g.a {
                p.get(i + 1) == Some(&g.b.inv())
            } else if x == g.a.inv() {
                i > 0 && p[i - 1] == g.b
            } else {
                true
            }
        })
    })
}

fn preimage(map: &TrainTrackMap, v: usize) -> Result<usize, SplitError> {
    let pre: Vec<usize> = (0..map.vertex_map.len()).filter(|&w| map.vertex_map[w] == v).collect();
    if pre.len() == 1 {
        Ok(pre[0])
    } else {
        Err(SplitError::NoPreimage(map.track.switch_name(v)))
    }
}

/// Whether `Df` from the preimage switch hits all of `R(v)`.
pub fn is_rigid(map: &TrainTrackMap, v: usize) -> Result<bool, SplitError> {
    let t = &map.track;
    if t.valence(v) < 2 {
        return Ok(false);
    }
    let w = preimage(map, v)?;
    let mut hit = HashSet::new();
    for &e in &t.orders[w] {
        hit.insert(crate::maps::df(map, e)?);
    }
    Ok(t.orders[v].iter().all(|e| hit.contains(e)))
}

pub fn splittability(map: &TrainTrackMap, v: usize) -> Result<Splittability, SplitError> {
    let t = &map.track;
    if t.valence(v) <= 1 {
        return Ok(Splittability::Singleton);
    }
    let paths = map.paths()?;
    let check = |side| match split_pair(t, v, side) {
        Ok(g) => Ok(Some(tight(&paths, g))),
        Err(SplitError::Unsupported(_)) => Ok(None),
        Err(e) => Err(e),
    };
    let left = check(Side::Left)?;
    let right = check(Side::Right)?;
    if left.is_none() || right.is_none() {
        return Ok(Splittability::Unsupported);
    }
    let (left, right) = (left.unwrap(), right.unwrap());
    let rigid = is_rigid(map, v)?;
    if t.is_loop_switch(v) {
        match (left, right, rigid) {
            (true, false, false) => Ok(Splittability::Left),
            (false, true, false) => Ok(Splittability::Right),
            (false, false, true) => Ok(Splittability::Rigid),
            _ => Err(SplitError::Trichotomy(format!(
                "{} (left {left}, right {right}, rigid {rigid})",
                t.switch_name(v)
            ))),
        }
    } else if left {
        Ok(Splittability::Left)
    } else if right {
        Ok(Splittability::Right)
    } else if rigid {
        Ok(Splittability::Rigid)
    } else {
        Ok(Splittability::Unsupported)
    }
}

/// Split at `v` on `side` and transport the map; checks `M' = P⁻¹MP`.
pub fn tight_split(map: &TrainTrackMap, v: usize, side: Side) -> Result<(TrainTrackMap, SplitMove), SplitError> {
    let t = &map.track;
    let g = split_pair(t, v, side)?;
    let paths = map.paths()?;
    if !tight(&paths, g) {
        return Err(SplitError::NotAdmissible {
            switch: t.switch_name(v),
            side,
        });
    }
    let (nt, g) = split_track(t, v, side)?;
    let j = g.a.edge;
    let mut new_paths = Vec::with_capacity(paths.len());
    for (e, p) in paths.iter().enumerate() {
        if e == j {
            let mut w = map.letter_image(g.a)?;
            w.extend(map.letter_image(g.b.inv())?);
            new_paths.push(rewrite(&w, g)?);
        } else {
            new_paths.push(rewrite(p, g)?);
        }
    }
    let mut nm = TrainTrackMap::from_paths(&map.name, nt, new_paths);
    nm.vertex_map = map.vertex_map.clone();
    let before = map.transition_matrix(false)?.matrix;
    let after = nm.transition_matrix(false)?.matrix;
    let n = before.size();
    let (pi, pj) = (g.b.edge + 1, j + 1);
    let p = IntMatrix::identity(n).add(&IntMatrix::unit(n, pi, pj));
    let pinv = IntMatrix::identity(n).sub(&IntMatrix::unit(n, pi, pj));
    if pinv.mul(&before).mul(&p) != after {
        return Err(SplitError::Conjugation(t.switch_name(v)));
    }
    let mv = SplitMove {
        switch: t.switch_name(v),
        side,
        folded: (t.edges[g.a.edge].id.clone(), t.edges[g.b.edge].id.clone()),
        alpha: nm.track.edges[j].id.clone(),
        p: (pi, pj),
        p_matrix: p,
    };
    Ok((nm, mv))
}

/// Switches of every rigid cycle of the preimage chain.
pub fn rigid_cycle_check(map: &TrainTrackMap) -> Result<Vec<Vec<String>>, SplitError> {
    let t = &map.track;
    let ns = t.switches.len();
    let mut rigid = vec![false; ns];
    for (v, r) in rigid.iter_mut().enumerate() {
        *r = match is_rigid(map, v) {
            Ok(x) => x,
            Err(SplitError::NoPreimage(_)) => false,
            Err(e) => return Err(e),
        };
    }
    let mut cycles = Vec::new();
    let mut reported = HashSet::new();
    for start in 0..ns {
        if !rigid[start] || reported.contains(&start) {
            continue;
        }
        let mut chain = vec![start];
        let mut cur = start;
        for _ in 0..ns {
            let Ok(w) = preimage(map, cur) else { break };
            if !rigid[w] {
                break;
            }
            if w == start {
                for &c in &chain {
                    reported.insert(c);
                }
                cycles.push(chain.iter().map(|&c| t.switch_name(c)).collect());
                break;
            }
            if chain.contains(&w) {
                break;
            }
            chain.push(w);
            cur = w;
        }
    }
    Ok(cycles)
}

fn mu_of(m: &IntMatrix) -> Vec<f64> {
    spectral(m, &Normalization::MaxOne)
        .ok()
        .and_then(|s| s.mu)
        .unwrap_or_default()
}

const MATRIX_GUARD: usize = 1_000_000;
pub const DEFAULT_MAX_STEPS: usize = 100_000;

/// Split non-rigid maximal-valence loop switches until no joints remain.
pub fn reduce_joints(map: &TrainTrackMap, max_steps: usize) -> Result<(TrainTrackMap, SplitLog), SplitError> {
    let m0 = map.transition_matrix(false)?.matrix;
    if crate::maps::pf_witness(&m0).is_none() {
        return Err(SplitError::NotPf);
    }
    let mut cur = map.clone();
    let mut log = SplitLog::default();
    let mut seen: HashSet<IntMatrix> = HashSet::new();
    seen.insert(m0);
    while cur.track.joint_count() > 0 {
        if log.steps.len() >= max_steps {
            return Err(SplitError::MaxSteps(max_steps, Box::new(log)));
        }
        let t = &cur.track;
        let mut best: Option<(usize, usize, Side)> = None;
        for v in t.loop_switches() {
            let val = t.valence(v);
            if val < 2 || best.is_some_and(|(bv, _, _)| bv >= val) {
                continue;
            }
            let side = match splittability(&cur, v)? {
                Splittability::Left => Side::Left,
                Splittability::Right => Side::Right,
                _ => continue,
            };
            best = Some((val, v, side));
        }
        let (_, v, side) = best.ok_or(SplitError::NoCandidate)?;
        let before = cur.transition_matrix(false)?.matrix;
        let jb = cur.track.joint_count();
        let (next, mv) = tight_split(&cur, v, side)?;
        let after = next.transition_matrix(false)?.matrix;
        if !seen.insert(after.clone()) {
            log.recurrences += 1;
        }
        if seen.len() > MATRIX_GUARD {
            return Err(SplitError::MemoryGuard);
        }
        log.steps.push(SplitStep {
            step: log.steps.len() + 1,
            split: mv,
            mu_before: mu_of(&before),
            mu_after: mu_of(&after),
            before,
            after,
            joints_before: jb,
            joints_after: next.track.joint_count(),
        });
        cur = next;
    }
    log.seen = seen.len();
    Ok((cur, log))
}

/// Reduce joints, and split the valence-3 trigon corner of a Snail-type track,
/// until the track is the Peacock.
pub fn reduce_to_peacock(map: &TrainTrackMap, max_rounds: usize) -> Result<(TrainTrackMap, SplitLog), SplitError> {
    let peacock = crate::tracks::builtin_track("peacock").map_err(MapError::from)?;
    let snail = crate::tracks::builtin_track("snail").map_err(MapError::from)?;
    let mut cur = map.clone();
    let mut log = SplitLog::default();
    for _ in 0..max_rounds {
        let (next, l) = reduce_joints(&cur, DEFAULT_MAX_STEPS)?;
        log.steps.extend(l.steps);
        log.recurrences += l.recurrences;
        log.seen += l.seen;
        cur = next;
        if cur.track.is_isomorphic(&peacock, false) {
            return Ok((cur, log));
        }
        if !cur.track.is_isomorphic(&snail, false) {
            return Err(SplitError::Other("jointless track is neither Peacock nor Snail".into()));
        }
        let v = (0..cur.track.switches.len())
            .find(|&s| !cur.track.is_loop_switch(s) && cur.track.valence(s) == 3)
            .ok_or_else(|| SplitError::Other("no valence-3 corner".into()))?;
        let side = match splittability(&cur, v)? {
            Splittability::Left => Side::Left,
            Splittability::Right => Side::Right,
            other => return Err(SplitError::Other(format!("valence-3 corner is {other:?}"))),
        };
        let before = cur.transition_matrix(false)?.matrix;
        let jb = cur.track.joint_count();
        let (next, mv) = tight_split(&cur, v, side)?;
        let after = next.transition_matrix(false)?.matrix;
        log.steps.push(SplitStep {
            step: log.steps.len() + 1,
            split: mv,
            mu_before: mu_of(&before),
            mu_after: mu_of(&after),
            before,
            after,
            joints_before: jb,
            joints_after: next.track.joint_count(),
        });
        cur = next;
    }
    Err(SplitError::Other("round limit reached".into()))
}

/// All combinatorial splits of a track, tight or not.
pub fn split_options(t: &TrainTrack) -> Vec<(usize, Side)> {
    let mut v = Vec::new();
    for s in 0..t.switches.len() {
        for side in [Side::Left, Side::Right] {
            if fold_pair(t, s, side).is_ok() {
                v.push((s, side));
            }
        }
    }
    v
}

/// Apply a fold `α ↦ a·~b` to a path on the split track.
fn unfold(path: &[Letter], g: SplitGeometry) -> Vec<Letter> {
    let j = g.a.edge;
    let mut out = Vec::with_capacity(path.len() + 4);
    for &x in path {
        if x.edge == j {
            if x.rev {
                out.push(g.b);
                out.push(g.a.inv());
            } else {
                out.push(g.a);
                out.push(g.b.inv());
            }
        } else {
            out.push(x);
        }
    }
    out
}

/// Shortest split sequence from `start` to a track isomorphic to `target`.
fn path_back(start: &TrainTrack, target: &TrainTrack, max_depth: usize) -> Option<Vec<(usize, Side)>> {
    let goal = target.canonical_form(false);
    if start.canonical_form(false) == goal {
        return Some(Vec::new());
    }
    let mut seen = HashSet::new();
    seen.insert(start.canonical_form(false));
    let mut queue = VecDeque::new();
    queue.push_back((start.clone(), Vec::new()));
    while let Some((t, moves)) = queue.pop_front() {
        if moves.len() >= max_depth {
            continue;
        }
        for (s, side) in split_options(&t) {
            let Ok((n, _)) = split_track(&t, s, side) else { continue };
            let code = n.canonical_form(false);
            let mut mv = moves.clone();
            mv.push((s, side));
            if code == goal {
                return Some(mv);
            }
            if seen.insert(code) {
                queue.push_back((n, mv));
            }
        }
    }
    None
}

/// Compose random elementary folds that return to a track isomorphic to `track`,
/// then close up with an isomorphism and a random automorphism.
pub fn generate_map_by_folds(track: &TrainTrack, seed: u64, length: usize) -> Result<TrainTrackMap, SplitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _attempt in 0..20 {
        let mut tracks = vec![track.clone()];
        let mut geoms = Vec::new();
        for _ in 0..length {
            let t = tracks.last().unwrap();
            let opts = split_options(t);
            let &(s, side) = opts.choose(&mut rng).ok_or(SplitError::NoFold)?;
            let (n, g) = split_track(t, s, side)?;
            tracks.push(n);
            geoms.push(g);
        }
        let Some(back) = path_back(tracks.last().unwrap(), track, 14) else {
            continue;
        };
        for (s, side) in back {
            let (n, g) = split_track(tracks.last().unwrap(), s, side)?;
            tracks.push(n);
            geoms.push(g);
        }
        let last = tracks.last().unwrap();
        let isos = track.isomorphisms(last, false);
        if isos.is_empty() {
            continue;
        }
        let autos = track.isomorphisms(track, false);
        let phi: &TrackIso = &isos[rng.gen_range(0..isos.len())];
        let aut: &TrackIso = &autos[rng.gen_range(0..autos.len())];
        let mut paths = Vec::new();
        for e in 0..track.edges.len() {
            let mut w = vec![phi.map_letter(aut.map_letter(Letter::fwd(e)))];
            for g in geoms.iter().rev() {
                w = unfold(&w, *g);
            }
            paths.push(w);
        }
        let mut map = TrainTrackMap::from_paths(&format!("folds-{seed}"), track.clone(), paths);
        map.vertex_map = (0..track.switches.len())
            .map(|s| phi.switch_map[aut.switch_map[s]])
            .collect();
        return Ok(map);
    }
    Err(SplitError::NoReturn)
}

/// Track obtained by a sequence of combinatorial splits at named switches.
pub fn split_sequence(t: &TrainTrack, moves: &[(&str, Side)]) -> Result<TrainTrack, SplitError> {
    let mut cur = t.clone();
    for (name, side) in moves {
        let s = cur
            .switch_index(name)
            .ok_or_else(|| SplitError::Other(format!("unknown switch {name}")))?;
        cur = split_track(&cur, s, *side)?.0;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracks::builtin_track;

    #[test]
    fn split_tracks_stay_valid() {
        for name in ["peacock", "snail"] {
            let t = builtin_track(name).unwrap();
            for (s, side) in split_options(&t) {
                let (n, _) = split_track(&t, s, side).unwrap();
                assert!(n.validate().is_valid(), "{name} {} {side:?}: {}", t.switch_name(s), n.validate());
            }
        }
    }

    #[test]
    fn fold_generated_maps_are_valid() {
        let t = builtin_track("peacock").unwrap();
        for seed in 0..5 {
            let f = generate_map_by_folds(&t, seed, 6).unwrap();
            assert!(f.validate().is_valid(), "{}", f.validate());
        }
    }

    #[test]
    fn length_zero_is_a_permutation() {
        let t = builtin_track("peacock").unwrap();
        let f = generate_map_by_folds(&t, 1, 0).unwrap();
        let m = f.transition_matrix(false).unwrap().matrix;
        assert!(m.rows().iter().all(|r| r.iter().sum::<i64>() == 1));
    }
}
