//! Lifts to the double cover branched over the punctures, and the trace test.
//!
//! Away from its loops a jointless track sits in a disk free of punctures, so
//! that part lifts to two sheets. A path changes sheet exactly when it turns
//! around a loop, and keeps its sheet through every other polygon.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maps::{toward_puncture, MapError, TrainTrackMap};
use crate::matrix::IntMatrix;
use crate::tracks::{EdgeEnd, Letter, Stratum, TrainTrack};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("unsupported lift: {0}")]
    Unsupported(String),
}

/// A letter of a lifted word: an oriented edge on sheet 1 or 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SheetLetter {
    pub letter: Letter,
    pub sheet: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftResult {
    pub sheet: u8,
    /// `e^1` labels first, then `e^2`.
    pub labels: Vec<String>,
    /// Lifted image of `e^1` for each real edge `e`, read from the polygon end.
    pub words: Vec<Vec<SheetLetter>>,
    pub matrix: IntMatrix,
    pub trace: i64,
}

fn check_liftable(t: &TrainTrack) -> Result<(), LiftError> {
    if !t.is_jointless() {
        return Err(LiftError::Unsupported("track has a joint".into()));
    }
    if let Some(p) = t.polygons.iter().find(|p| p.punctured && !p.is_loop) {
        return Err(LiftError::Unsupported(format!(
            "puncture in polygon {} has {} prongs",
            p.id, p.cusps
        )));
    }
    for e in &t.edges {
        if t.is_loop_switch(e.ends[0]) && t.is_loop_switch(e.ends[1]) {
            return Err(LiftError::Unsupported(format!("edge {} joins two loops", e.id)));
        }
    }
    Ok(())
}

/// Orientation of `e` starting at a polygon end.
fn from_polygon(t: &TrainTrack, e: usize) -> Letter {
    toward_puncture(t, e).unwrap_or(Letter::fwd(e))
}

/// Assign sheets along a path that starts on `sheet`.
pub fn sheet_path(t: &TrainTrack, path: &[Letter], sheet: u8) -> Vec<SheetLetter> {
    let mut s = sheet;
    let mut out = Vec::with_capacity(path.len());
    for (i, &l) in path.iter().enumerate() {
        if i > 0 && t.is_loop_switch(t.tail(l)) {
            s = 3 - s;
        }
        out.push(SheetLetter { letter: l, sheet: s });
    }
    out
}

pub fn lift(map: &TrainTrackMap, sheet: u8) -> Result<LiftResult, LiftError> {
    let t = &map.track;
    check_liftable(t)?;
    if sheet != 1 && sheet != 2 {
        return Err(LiftError::Unsupported(format!("sheet {sheet}")));
    }
    let report = map.validate();
    if !report.is_valid() {
        return Err(MapError::Invalid(report.violations.join("; ")).into());
    }
    let m = t.edges.len();
    let mut matrix = IntMatrix::zeros(2 * m);
    let mut words = Vec::with_capacity(m);
    for e in 0..m {
        let path = map.letter_image(from_polygon(t, e))?;
        let w = sheet_path(t, &path, sheet);
        for sl in &w {
            let row = sl.letter.edge + if sl.sheet == 1 { 0 } else { m };
            let swapped = sl.letter.edge + if sl.sheet == 1 { m } else { 0 };
            matrix.add_to(row, e, 1);
            matrix.add_to(swapped, e + m, 1);
        }
        words.push(w);
    }
    let mut labels: Vec<String> = t.edges.iter().map(|e| format!("{}^1", e.id)).collect();
    labels.extend(t.edges.iter().map(|e| format!("{}^2", e.id)));
    Ok(LiftResult {
        sheet,
        labels,
        words,
        trace: matrix.trace(),
        matrix,
    })
}

/// Sum the sheet blocks of a lifted matrix back to a base matrix.
pub fn collapse_sheets(lifted: &IntMatrix) -> IntMatrix {
    let m = lifted.size() / 2;
    let mut out = IntMatrix::zeros(m);
    for i in 0..m {
        for j in 0..m {
            out.set(i, j, lifted.get(i, j) + lifted.get(i + m, j));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum LHalf {
    Real(EdgeEnd, u8),
    InfL(usize, u8),
    InfR(usize, u8),
}

/// Stratum of the lifted track, whose lifted loops are smoothed to regular points.
pub fn lifted_census(t: &TrainTrack) -> Result<(Stratum, i64), LiftError> {
    check_liftable(t)?;
    let mut ccw: HashMap<LHalf, LHalf> = HashMap::new();
    let mut all = Vec::new();
    let mut nodes = 0i64;
    for s in 0..t.switches.len() {
        if t.is_loop_switch(s) {
            let end = t.orders[s][0];
            let pair = [LHalf::Real(end, 1), LHalf::Real(end, 2)];
            ccw.insert(pair[0], pair[1]);
            ccw.insert(pair[1], pair[0]);
            all.extend(pair);
            nodes += 1;
            continue;
        }
        for k in 1..=2u8 {
            let mut c: Vec<LHalf> = t.orders[s].iter().rev().map(|&e| LHalf::Real(e, k)).collect();
            c.push(LHalf::InfL(s, k));
            c.push(LHalf::InfR(s, k));
            for i in 0..c.len() {
                ccw.insert(c[i], c[(i + 1) % c.len()]);
            }
            all.extend(c);
            nodes += 1;
        }
    }
    let twin = |h: LHalf| match h {
        LHalf::Real(e, k) => LHalf::Real(e.other(), k),
        LHalf::InfL(s, k) => LHalf::InfR(t.neighbours(s).0, k),
        LHalf::InfR(s, k) => LHalf::InfL(t.neighbours(s).1, k),
    };
    let is_loop_half = |h: LHalf| matches!(h, LHalf::Real(e, _) if t.is_loop_switch(t.switch_of(e)));
    let mut seen = std::collections::HashSet::new();
    let mut boundary = Vec::new();
    let mut interior = Vec::new();
    let mut faces = 0i64;
    for &start in &all {
        if seen.contains(&start) {
            continue;
        }
        faces += 1;
        let mut h = start;
        let mut cusps = 0;
        let mut polygon = false;
        loop {
            seen.insert(h);
            let a = twin(h);
            let b = ccw[&a];
            match (a, b) {
                (LHalf::InfL(s, _), LHalf::InfR(r, _)) => {
                    cusps += 1;
                    if s == r {
                        polygon = true;
                    }
                }
                (LHalf::InfR(..), LHalf::InfL(..)) => cusps += 1,
                (LHalf::Real(..), LHalf::Real(..)) if !is_loop_half(a) => cusps += 1,
                _ => {}
            }
            h = b;
            if h == start {
                break;
            }
        }
        if polygon {
            interior.push(cusps);
        } else {
            boundary.push(cusps);
        }
    }
    let sides: usize = t
        .polygons
        .iter()
        .filter(|p| !p.is_loop)
        .map(|p| p.cusps)
        .sum();
    let edges = 2 * (t.edges.len() + sides) as i64;
    let chi = nodes - edges + faces;
    Ok((Stratum::new(boundary, Vec::new(), interior), chi))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceVerdict {
    TraceZero,
    TraceNonzero(i64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointReport {
    /// Edges `a` whose image contains a visit to `a`.
    pub predicate_failures: Vec<String>,
    pub trace_sheet1: i64,
    pub trace_sheet2: i64,
    pub verdict: TraceVerdict,
}

impl FixedPointReport {
    pub fn predicate_passes(&self) -> bool {
        self.predicate_failures.is_empty()
    }
}

pub fn fixed_point_test(map: &TrainTrackMap) -> Result<FixedPointReport, LiftError> {
    let t = &map.track;
    let mut failures = Vec::new();
    for (e, w) in map.images.iter().enumerate() {
        if w.iter().any(|l| l.edge == e) {
            failures.push(t.edges[e].id.clone());
        }
    }
    let one = lift(map, 1)?;
    let two = lift(map, 2)?;
    let verdict = if one.trace == 0 {
        TraceVerdict::TraceZero
    } else {
        TraceVerdict::TraceNonzero(one.trace)
    };
    Ok(FixedPointReport {
        predicate_failures: failures,
        trace_sheet1: one.trace,
        trace_sheet2: two.trace,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracks::builtin_track;

    #[test]
    fn lifted_peacock_is_genus_two() {
        let t = builtin_track("peacock").unwrap();
        let (s, chi) = lifted_census(&t).unwrap();
        assert_eq!(s.to_string(), "(4;∅;3^2)");
        assert_eq!(chi, -2);
    }

    #[test]
    fn sheets_toggle_at_loops() {
        let t = builtin_track("peacock").unwrap();
        let o = t.edge_index("o").unwrap();
        let into = Letter::fwd(o).inv();
        let w = sheet_path(&t, &[into, into.inv()], 1);
        assert_eq!(w[0].sheet, 1);
        assert_eq!(w[1].sheet, 2);
    }
}
