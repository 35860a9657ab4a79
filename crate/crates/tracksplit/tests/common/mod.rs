//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use tracksplit::maps::pf_witness;
use tracksplit::matrix::IntMatrix;
use tracksplit::splitting::{generate_map_by_folds, split_sequence, Side};
use tracksplit::tracks::{builtin_track, parse_track, TrainTrack};
use tracksplit::maps::TrainTrackMap;

/// Four punctures, three of them in loops around a trigon.
pub const D4TRI: &str = "track d4tri
surface disk punctures=4
loop L1 punctured
loop L2 punctured
loop L3 punctured
loop L4 punctured
polygon T cusps=3
edge a L1.1 T.1
edge b L2.1 T.1
edge c L3.1 T.2
edge d L4.1 T.3
order T.1 a b
exterior cusps=1 punctured
";

/// Four punctures, one of them inside a bigon.
pub const D4BI: &str = "track d4bigon
surface disk punctures=4
loop L1 punctured
loop L2 punctured
loop L3 punctured
polygon B cusps=2 punctured
edge a L1.1 B.1
edge b L2.1 B.1
edge c L3.1 B.2
order B.1 a b
exterior cusps=1 punctured
";

/// The Peacock with one trigon corner split, which leaves a joint.
pub fn jointed_peacock() -> TrainTrack {
    let p = builtin_track("peacock").unwrap();
    split_sequence(&p, &[("T.1", Side::Left)]).unwrap()
}

/// Peacock, Snail and three synthetic tracks.
pub fn corpus() -> Vec<(String, TrainTrack)> {
    vec![
        ("peacock".into(), builtin_track("peacock").unwrap()),
        ("snail".into(), builtin_track("snail").unwrap()),
        ("d4tri".into(), parse_track(D4TRI).unwrap()),
        ("d4bigon".into(), parse_track(D4BI).unwrap()),
        ("jointed-peacock".into(), jointed_peacock()),
    ]
}

/// The first `count` Perron–Frobenius maps generated on `t`, with their seeds.
pub fn pf_maps(t: &TrainTrack, count: usize, length: usize) -> Vec<(u64, TrainTrackMap)> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < count {
        assert!(seed < 20 * count as u64 + 100, "too few PF maps on {}", t.name);
        if let Ok(f) = generate_map_by_folds(t, seed, length) {
            if pf_witness(&f.transition_matrix(false).unwrap().matrix).is_some() {
                out.push((seed, f));
            }
        }
        seed += 1;
    }
    out
}

pub type Mat = Vec<Vec<i64>>;

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| (i == j) as i64).collect()).collect()
}

/// `I + E_{i,j}` for 1-based `(i, j)`.
pub fn elementary(n: usize, i: usize, j: usize) -> Mat {
    let mut m = identity(n);
    m[i - 1][j - 1] += 1;
    m
}

pub fn rows(m: &IntMatrix) -> Mat {
    m.rows()
}

/// Characteristic polynomial `det(tI − M)` by Faddeev–LeVerrier, highest
/// coefficient first.
pub fn charpoly_leverrier(m: &Mat) -> Vec<i64> {
    let n = m.len();
    let mut c = vec![1i64];
    let mut a = identity(n);
    for k in 1..=n {
        let am = mat_mul(m, &a);
        let tr: i64 = (0..n).map(|i| am[i][i]).sum();
        assert_eq!(tr % k as i64, 0, "trace not divisible");
        let ck = -tr / k as i64;
        c.push(ck);
        a = am;
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += ck;
        }
    }
    c
}

/// Polynomial product, highest coefficient first.
pub fn poly_mul(a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut out = vec![0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Largest real root of a polynomial with a sign change on `[lo, hi]`, by bisection.
pub fn bisect(p: &[i64], mut lo: f64, mut hi: f64) -> f64 {
    let ev = |x: f64| p.iter().fold(0.0, |acc, c| acc * x + *c as f64);
    let slo = ev(lo).signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ev(mid).signum() == slo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Transition counts read off decorated image words: `x±` adds two to row
/// `x`, `x0` adds one.
pub fn count_decorated(labels: &[&str], images: &[(&str, &str)]) -> Mat {
    let n = labels.len();
    let idx = |s: &str| labels.iter().position(|l| *l == s).unwrap();
    let mut m = vec![vec![0; n]; n];
    for (src, word) in images {
        for tok in word.split_whitespace() {
            let (name, deco) = tok.split_at(tok.len() - 1);
            m[idx(name)][idx(src)] += if deco == "0" { 1 } else { 2 };
        }
    }
    m
}
