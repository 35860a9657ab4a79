mod common;

use std::collections::HashMap;

use common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use tracksplit::arith::{braid_stats, fdtc_filter, full_twist_exponent, BraidWord, FdtcInterval};
use tracksplit::maps::{pf_witness, spectral, Normalization};
use tracksplit::matrix::IntMatrix;
use tracksplit::poly::IntPoly;
use tracksplit::splitting::{generate_map_by_folds, reduce_joints};
use tracksplit::tracks::{parse_track, TrainTrack};

/// Rename edges, loops and polygons, rotate polygon corners and shuffle the
/// edge lines of a track file.
fn relabel(t: &TrainTrack, perm_seed: u64, rot: usize) -> String {
    let text = t.serialize();
    let mut rng = perm_seed;
    let mut next = || {
        rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (rng >> 33) as usize
    };
    let mut names: HashMap<String, String> = HashMap::new();
    let mut cusps: HashMap<String, usize> = HashMap::new();
    for line in text.lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("edge") => {
                let k = names.len();
                names.insert(toks[1].to_string(), format!("x{}", (k * 7 + 3) % 101));
            }
            Some("loop") => {
                let k = names.len();
                names.insert(toks[1].to_string(), format!("Loop{}", (k * 13 + 5) % 97));
            }
            Some("polygon") => {
                let k = names.len();
                names.insert(toks[1].to_string(), format!("Poly{k}"));
                let c = toks[2].trim_start_matches("cusps=").parse().unwrap();
                cusps.insert(toks[1].to_string(), c);
            }
            _ => {}
        }
    }
    let switch = |s: &str| -> String {
        let (region, k) = s.split_once('.').unwrap();
        let k: usize = k.parse().unwrap();
        let k = match cusps.get(region) {
            Some(&c) => (k - 1 + rot) % c + 1,
            None => k,
        };
        format!("{}.{}", names[region], k)
    };
    let mut head = Vec::new();
    let mut edges = Vec::new();
    let mut tail = Vec::new();
    for line in text.lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("edge") => edges.push(format!("edge {} {} {}", names[toks[1]], switch(toks[2]), switch(toks[3]))),
            Some("loop") | Some("polygon") => {
                let mut t2: Vec<String> = toks.iter().map(|s| s.to_string()).collect();
                t2[1] = names[toks[1]].clone();
                head.push(t2.join(" "));
            }
            Some("order") => {
                let rest: Vec<String> = toks[2..].iter().map(|e| names[*e].clone()).collect();
                tail.push(format!("order {} {}", switch(toks[1]), rest.join(" ")));
            }
            _ => head.push(line.to_string()),
        }
    }
    for i in (1..edges.len()).rev() {
        edges.swap(i, next() % (i + 1));
    }
    let mut out = head;
    out.extend(edges);
    out.extend(tail);
    out.join("\n") + "\n"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn canonical_form_ignores_labels(which in 0usize..5, seed in any::<u64>(), rot in 0usize..3) {
        let (_, t) = &corpus()[which];
        let u = parse_track(&relabel(t, seed, rot)).unwrap();
        prop_assert_eq!(t.canonical_form(false), u.canonical_form(false));
        prop_assert!(t.is_isomorphic(&u, false));
        prop_assert_eq!(t.complement_census().unwrap().1, u.complement_census().unwrap().1);
    }

    #[test]
    fn mirror_images_agree_with_reflection(which in 0usize..5) {
        let (_, t) = &corpus()[which];
        let m = t.mirror();
        prop_assert_eq!(t.canonical_form(true), m.canonical_form(true));
        prop_assert_eq!(t.complement_census().unwrap().1, m.complement_census().unwrap().1);
    }

    /// Products of distinct linear factors and positive quadratics have a known
    /// number of real roots.
    #[test]
    fn sturm_counts_known_roots(
        roots in proptest::collection::btree_set(-6i64..=6, 0..5),
        quads in proptest::collection::vec(1i64..5, 0..2),
        lo in -7i64..=7,
        width in 1i64..8,
    ) {
        let mut p = IntPoly::one();
        for r in &roots {
            p = p.mul(&IntPoly::from_high(vec![1, -r]));
        }
        for c in &quads {
            p = p.mul(&IntPoly::from_high(vec![1, 0, *c]));
        }
        prop_assert_eq!(p.count_real_roots(), roots.len());
        // half-integer ends never hit a root
        let a = BigRational::new(BigInt::from(2 * lo + 1), BigInt::from(2));
        let b = BigRational::new(BigInt::from(2 * (lo + width) + 1), BigInt::from(2));
        let inside = roots.iter().filter(|&&r| r > lo && r <= lo + width).count();
        prop_assert_eq!(p.count_roots(&a, &b), inside);
    }

    #[test]
    fn char_poly_matches_leverrier(cells in proptest::collection::vec(0i64..4, 16), n in 1usize..=4) {
        let m: Mat = (0..n).map(|i| cells[i * 4..i * 4 + n].to_vec()).collect();
        let im = IntMatrix::from_rows(&m).unwrap();
        prop_assert_eq!(im.char_poly().to_i64_high(), charpoly_leverrier(&m));
    }

    #[test]
    fn pf_witness_is_least_positive_power(cells in proptest::collection::vec(0i64..2, 9)) {
        let m: Mat = cells.chunks(3).map(|r| r.to_vec()).collect();
        let mut pow = m.clone();
        let mut least = None;
        for k in 1..=5 {
            if pow.iter().flatten().all(|&x| x > 0) {
                least = Some(k);
                break;
            }
            pow = mat_mul(&pow, &m);
        }
        prop_assert_eq!(pf_witness(&IntMatrix::from_rows(&m).unwrap()), least);
    }

    #[test]
    fn braid_relations(gens in proptest::collection::vec((1i32..5, any::<bool>()), 0..12), m in -2i32..3) {
        let gens: Vec<i32> = gens.into_iter().map(|(g, s)| if s { g } else { -g }).collect();
        let w = BraidWord::new(5, gens.clone()).unwrap();
        prop_assert_eq!(w.inverse().inverse(), w.clone());
        let e = braid_stats(&w).exponent_sum;
        prop_assert_eq!(braid_stats(&w.inverse()).exponent_sum, -e);
        prop_assert_eq!(braid_stats(&w.with_twist(m)).exponent_sum, e + full_twist_exponent(5, m as i64));
        prop_assert_eq!(full_twist_exponent(5, m as i64), 20 * m as i64);
        let mut rotated = gens;
        if !rotated.is_empty() {
            rotated.rotate_left(1);
        }
        // conjugation by a generator keeps the self-linking number
        prop_assert_eq!(braid_stats(&BraidWord::new(5, rotated).unwrap()).self_linking, braid_stats(&w).self_linking);
        let text = w.to_string();
        prop_assert_eq!(BraidWord::parse(5, &text).unwrap(), w);
    }

    #[test]
    fn fdtc_matches_direct_test(a in -40i64..40, len in 0i64..40, den in 1i64..6, lo_closed: bool, hi_closed: bool) {
        let lo = BigRational::new(a.into(), den.into());
        let hi = BigRational::new((a + len).into(), den.into());
        let Ok(c) = FdtcInterval::new(lo.clone(), hi.clone(), lo_closed, hi_closed) else {
            prop_assert!(len == 0);
            return Ok(());
        };
        let got = fdtc_filter(&c);
        let one = BigRational::from_integer(1.into());
        for m in -20i64..=20 {
            let mr = BigRational::from_integer(m.into());
            // [lo+m, hi+m] with the given ends meets (−1, 1)
            let l = &lo + &mr;
            let h = &hi + &mr;
            let meets = l < one && h > -&one && (len > 0 || (lo_closed && hi_closed));
            prop_assert_eq!(got.contains(&m), meets, "m={}", m);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Joint reduction preserves the characteristic polynomial exactly.
    #[test]
    fn reduction_keeps_char_poly(which in 0usize..5, seed in 0u64..400, length in 3usize..10) {
        let (_, t) = &corpus()[which];
        let f = generate_map_by_folds(t, seed, length).unwrap();
        prop_assert!(f.validate().is_valid());
        let m = f.transition_matrix(false).unwrap().matrix;
        prop_assume!(pf_witness(&m).is_some());
        let (g, log) = reduce_joints(&f, 100_000).unwrap();
        prop_assert_eq!(g.track.joint_count(), 0);
        let m2 = g.transition_matrix(false).unwrap().matrix;
        prop_assert_eq!(charpoly_leverrier(&rows(&m2)), charpoly_leverrier(&rows(&m)));
        for s in &log.steps {
            prop_assert!(s.mu_after.iter().all(|&x| x > 0.0));
        }
        let mu = spectral(&m2, &Normalization::MaxOne).unwrap().mu.unwrap();
        prop_assert!(mu.iter().all(|&x| x > 0.0));
    }
}

#[test]
fn relabel_changes_the_text() {
    let (_, t) = &corpus()[4];
    let text = relabel(t, 7, 1);
    assert_ne!(text, t.serialize());
    let u = parse_track(&text).unwrap();
    assert!(u.edges.iter().all(|e| e.id.starts_with('x')));
}
