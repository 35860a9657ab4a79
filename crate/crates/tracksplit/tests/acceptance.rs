//! Acceptance criteria, one pass/fail line each.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};

use common::*;
use nalgebra::DMatrix;
use tracksplit::arith::{alexander_candidates, braid_stats, fdtc_filter, full_twist_exponent, rykken_check, BraidWord, FdtcInterval, RykkenVerdict};
use tracksplit::census::{
    absorption_check, beta_family, depth_one_first_letters, enumerate_candidates, first_letter_census, Mode,
};
use tracksplit::cover::{collapse_sheets, lift, lifted_census};
use tracksplit::maps::{pf_census, pf_witness, spectral, Normalization};
use tracksplit::matrix::IntMatrix;
use tracksplit::poly::IntPoly;
use tracksplit::splitting::{reduce_joints, reduce_to_peacock, rigid_cycle_check, splittability, tight_split, Side, Splittability};
use tracksplit::tracks::builtin_track;

const M1: [[i64; 5]; 5] = [[0, 0, 1, 0, 0], [0, 0, 0, 1, 0], [0, 0, 0, 1, 1], [1, 2, 0, 0, 0], [1, 1, 0, 0, 0]];
const M2: [[i64; 5]; 5] = [[0, 0, 1, 0, 0], [0, 0, 0, 1, 1], [0, 0, 0, 1, 2], [0, 1, 0, 0, 0], [1, 1, 0, 0, 0]];
const M3: [[i64; 5]; 5] = [[0, 0, 1, 0, 0], [0, 0, 0, 2, 1], [0, 0, 0, 3, 2], [0, 1, 0, 0, 0], [1, 0, 0, 0, 0]];

fn int(m: &[[i64; 5]; 5]) -> IntMatrix {
    IntMatrix::from_rows(&m.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn mat(m: &[[i64; 5]; 5]) -> Mat {
    m.iter().map(|r| r.to_vec()).collect()
}

/// λ of M₁ from the quartic factor, independent of the library.
fn lambda1() -> f64 {
    bisect(&[1, -1, -1, -1, 1], 1.0, 2.0)
}

/// μ₁ from its closed form in λ.
fn mu1_closed() -> [f64; 5] {
    let l = lambda1();
    [
        2.0 + 5.0 * l - l * l - l.powi(3),
        -2.0 - 2.0 * l + l * l + l.powi(3),
        1.0 + l + 4.0 * l * l - 2.0 * l.powi(3),
        -1.0 - l - l * l + 2.0 * l.powi(3),
        3.0,
    ]
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Each entry starts with the given digits, as a printed `2.537...` does.
fn truncates_to(a: &[f64], digits: &[f64]) -> bool {
    a.len() == digits.len() && a.iter().zip(digits).all(|(x, d)| *x >= d - 1e-12 && *x < d + 1e-3)
}

fn criterion_1() {
    let m = int(&M1);
    let expected = poly_mul(&[1, 1], &[1, -1, -1, -1, 1]);
    assert_eq!(m.char_poly().to_i64_high(), expected);
    assert_eq!(charpoly_leverrier(&mat(&M1)), expected);
    let sp = spectral(&m, &Normalization::MaxOne).unwrap();
    assert!((sp.lambda - 1.72208).abs() <= 1e-5, "lambda {}", sp.lambda);
    assert!((sp.lambda - lambda1()).abs() <= 1e-10);
}

fn criterion_2() {
    let sp = spectral(&int(&M1), &Normalization::Pin(4, 3.0)).unwrap();
    let mu = sp.mu.unwrap();
    let printed = [2.537, 2.628, 4.370, 4.526, 3.0];
    assert!(close(&mu, &mu1_closed(), 1e-9), "{mu:?}");
    assert!(truncates_to(&mu, &printed), "{mu:?}");
    assert!(close(&mu, &printed, 5e-4), "mu1 {mu:?} is not within 5e-4 of {printed:?}");
}

fn criterion_3() {
    let m1 = int(&M1);
    let p1 = IntMatrix::identity(5).add(&IntMatrix::unit(5, 4, 5));
    let p1inv = IntMatrix::identity(5).sub(&IntMatrix::unit(5, 4, 5));
    let p2 = IntMatrix::identity(5).add(&IntMatrix::unit(5, 5, 4));
    let p2inv = IntMatrix::identity(5).sub(&IntMatrix::unit(5, 5, 4));
    assert_eq!(rows(&p1), elementary(5, 4, 5));
    assert_eq!(rows(&p2), elementary(5, 5, 4));
    assert_eq!(p1.mul(&p1inv), IntMatrix::identity(5));
    let m2 = p1inv.mul(&m1).mul(&p1);
    let m3 = p2inv.mul(&m2).mul(&p2);
    assert_eq!(m2, int(&M2));
    assert_eq!(m3, int(&M3));
    // P·M' = M·P avoids the inverse altogether
    assert_eq!(mat_mul(&elementary(5, 4, 5), &mat(&M2)), mat_mul(&mat(&M1), &elementary(5, 4, 5)));
    assert_eq!(mat_mul(&elementary(5, 5, 4), &mat(&M3)), mat_mul(&mat(&M2), &elementary(5, 5, 4)));
    let cp = m1.char_poly();
    assert_eq!(m2.char_poly(), cp);
    assert_eq!(m3.char_poly(), cp);
    assert_eq!(charpoly_leverrier(&mat(&M3)), cp.to_i64_high());

    let mu1 = mu1_closed();
    let mu2 = spectral(&m2, &Normalization::Pin(4, 3.0)).unwrap().mu.unwrap();
    let printed2 = [2.537, 2.628, 4.370, 1.526, 3.0];
    let expect2 = [mu1[0], mu1[1], mu1[2], mu1[3] - mu1[4], mu1[4]];
    assert!(close(&mu2, &expect2, 1e-9));
    assert!(truncates_to(&mu2, &printed2), "{mu2:?}");
    let expect3 = [mu2[0], mu2[1], mu2[2], mu2[3], mu2[4] - mu2[3]];
    let mu3 = spectral(&m3, &Normalization::Pin(0, mu2[0])).unwrap().mu.unwrap();
    assert!(close(&mu3, &expect3, 1e-9), "{mu3:?}");
    // P2 leaves e2 alone, so it stays 2.628
    assert!(truncates_to(&mu3, &[2.537, 2.628, 4.370, 1.526, 1.473]), "{mu3:?}");
    assert!(close(&mu2, &printed2, 5e-4), "mu2 {mu2:?} is not within 5e-4 of {printed2:?}");
}

fn family_images(n: i64) -> Vec<(&'static str, String)> {
    let pair = |k: i64| "r- o- ".repeat(k as usize);
    let (p, b) = if n % 2 == 0 {
        (format!("{}r0", pair(n / 2 + 1)), format!("{}r- o0", pair(n / 2)))
    } else {
        (format!("{}r- o0", pair((n + 1) / 2)), format!("{}r0", pair((n + 1) / 2)))
    };
    vec![("o", "p0".into()), ("g", "b0".into()), ("p", p), ("b", b), ("r", "g0".into())]
}

fn printed_mn(n: i64) -> Mat {
    vec![
        vec![0, 0, n + 2, n + 1, 0],
        vec![0, 0, 0, 0, 1],
        vec![1, 0, 0, 0, 0],
        vec![0, 1, 0, 0, 0],
        vec![0, 0, n + 3, n + 2, 0],
    ]
}

fn criterion_4() {
    let labels = ["o", "g", "p", "b", "r"];
    for n in 0..=10 {
        let (f, mn) = beta_family(n).unwrap();
        let order: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        let tm = f.transition_matrix(false).unwrap().reordered(&order).unwrap();
        assert_eq!(rows(&tm.matrix), printed_mn(n), "n={n}");
        assert_eq!(rows(&mn), printed_mn(n), "n={n}");
        let imgs = family_images(n);
        let pairs: Vec<(&str, &str)> = imgs.iter().map(|(a, w)| (*a, w.as_str())).collect();
        assert_eq!(count_decorated(&labels, &pairs), printed_mn(n), "n={n}");
        let mut pow = printed_mn(n);
        for _ in 1..7 {
            pow = mat_mul(&pow, &printed_mn(n));
        }
        assert!(pow.iter().flatten().all(|&x| x > 0), "n={n}");
        assert!(mn.pow(7).is_positive());
        let w = pf_witness(&tm.matrix).expect("primitive");
        assert!(w <= 7, "n={n} witness {w}");
    }
}

fn criterion_5() {
    let p = builtin_track("peacock").unwrap();
    assert_eq!(p.complement_census().unwrap().1.to_string(), "(2;1^5;3)");
    assert_eq!(lifted_census(&p).unwrap().0.to_string(), "(4;∅;3^2)");
}

fn spectral_radius(m: &IntMatrix) -> f64 {
    let n = m.size();
    let d = DMatrix::from_fn(n, n, |i, j| m.get(i, j) as f64);
    d.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn criterion_6() {
    for n in 0..=5 {
        let (f, mn) = beta_family(n).unwrap();
        let l = lift(&f, 1).unwrap();
        assert_eq!(l.matrix.size(), 10);
        assert_eq!(l.trace, 0);
        assert_eq!(l.matrix.trace(), 0);
        let base = f.transition_matrix(false).unwrap().matrix;
        assert_eq!(collapse_sheets(&l.matrix), base);
        let lr = rows(&l.matrix);
        let summed: Mat = (0..5).map(|i| (0..5).map(|j| lr[i][j] + lr[i + 5][j]).collect()).collect();
        assert_eq!(summed, rows(&base));
        assert_eq!(base.char_poly(), mn.char_poly());
        let lambda = spectral(&mn, &Normalization::MaxOne).unwrap().lambda;
        let lifted = spectral(&l.matrix, &Normalization::MaxOne).unwrap().lambda;
        assert!((lifted - lambda).abs() <= 1e-9, "n={n}: {lifted} vs {lambda}");
        assert!((spectral_radius(&l.matrix) - lambda).abs() <= 1e-9, "n={n}");
    }
}

fn first_letter(word: &str) -> &str {
    word.split_whitespace().next().unwrap()
}

fn criterion_7() {
    let r: BTreeSet<String> = depth_one_first_letters("r", 9).unwrap();
    assert!(!r.contains("o+") && !r.contains("g+"), "{r:?}");

    let full = enumerate_candidates(9, Mode::Full).unwrap();
    let df = first_letter_census(&full);
    let set = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    assert_eq!(df["p"], set(&["r-"]));
    assert_eq!(df["b"], set(&["r-"]));
    assert!(df["r"].is_subset(&set(&["g-", "g0"])), "{:?}", df["r"]);

    let found = enumerate_candidates(9, Mode::LemmaReplay).unwrap();
    let got: BTreeSet<_> = found.iter().map(|m| m.images.clone()).collect();
    let want: BTreeSet<_> = (0..3).map(|n| beta_family(n).unwrap().0.images).collect();
    assert_eq!(got, want);

    for n in 0..=5 {
        let (f, _) = beta_family(n).unwrap();
        assert!(f.validate().is_valid());
        assert!(absorption_check(&f).unwrap().is_empty(), "f{n}");
        assert!(pf_witness(&f.transition_matrix(false).unwrap().matrix).is_some());
        assert_eq!(lift(&f, 1).unwrap().trace, 0);
        let imgs = family_images(n);
        assert_eq!(first_letter(&imgs[2].1), "r-");
        assert_eq!(first_letter(&imgs[3].1), "r-");
        assert!(["g-", "g0"].contains(&first_letter(&imgs[4].1)));
    }
}

fn criterion_8() {
    let a = alexander_candidates(1, 2).unwrap();
    let minus = IntPoly::from_high(vec![1, -1, -1, -1, 1]);
    let plus = IntPoly::from_high(vec![1, -1, 1, -1, 1]);
    let got: BTreeSet<Vec<i64>> = a.candidates.iter().map(|p| p.to_i64_high()).collect();
    assert_eq!(got, [minus.to_i64_high(), plus.to_i64_high()].into_iter().collect());
    assert_eq!(a.selected, vec![minus.clone()]);
    assert_eq!(minus.eval_i64(1), (-1).into());
    assert_eq!(plus.count_real_roots(), 0);
    // (t+1)(t⁴−t³+t²−t+1) = t⁵+1, whose only real root is −1
    assert_eq!(poly_mul(&[1, 1], &plus.to_i64_high()), vec![1, 0, 0, 0, 0, 1]);

    let r = rykken_check(7, 8, 4, 0).unwrap();
    assert_eq!((r.bound, r.verdict), (3, RykkenVerdict::Contradiction));

    let alpha = BraidWord::parse(5, "s1 s2 s3 s4 s1 s2").unwrap();
    assert_eq!(braid_stats(&alpha).self_linking, 1);
    assert_eq!(braid_stats(&alpha.inverse().with_twist(1)).self_linking, 9);
    // Δ² on 5 strands is (σ1σ2σ3σ4)^5, exponent sum 20; α⁻¹ contributes −6
    assert_eq!(full_twist_exponent(5, 1), 20);
    assert_eq!(braid_stats(&alpha.inverse().with_twist(1)).exponent_sum, 20 - 6);

    assert_eq!(fdtc_filter(&FdtcInterval::parse("(0,1]").unwrap()), vec![-1, 0]);
}

/// Property checks on one fold-generated PF map; returns the number of splits checked.
fn check_map(name: &str, seed: u64, f: &tracksplit::maps::TrainTrackMap) -> usize {
    let t = &f.track;
    let tm = f.transition_matrix(false).unwrap();
    let m = rows(&tm.matrix);
    let sp = spectral(&tm.matrix, &Normalization::MaxOne).unwrap();
    let mu = sp.mu.clone().unwrap();
    assert!(mu.iter().all(|&x| x > 0.0), "{name}/{seed}: {mu:?}");
    let cp = charpoly_leverrier(&m);
    let mut splits = 0;
    for v in 0..t.switches.len() {
        let side = match splittability(f, v) {
            Ok(Splittability::Left) => Side::Left,
            Ok(Splittability::Right) => Side::Right,
            _ => continue,
        };
        let (g, mv) = tight_split(f, v, side).unwrap();
        let (i, j) = mv.p;
        let p = elementary(m.len(), i, j);
        assert_eq!(rows(&mv.p_matrix), p);
        let m2 = rows(&g.transition_matrix(false).unwrap().matrix);
        assert_eq!(mat_mul(&p, &m2), mat_mul(&m, &p), "{name}/{seed} at {}", mv.switch);
        assert_eq!(charpoly_leverrier(&m2), cp);
        // the folded edge is shorter than the edge it is folded over
        let at = |e: &str| mu[tm.labels.iter().position(|l| l == e).unwrap()];
        assert!(at(&mv.folded.0) < at(&mv.folded.1), "{name}/{seed} at {}", mv.switch);
        assert!(mu[i - 1] - mu[j - 1] > 0.0);
        splits += 1;
    }
    assert!(rigid_cycle_check(f).unwrap().is_empty(), "{name}/{seed}");

    let (g, log) = reduce_joints(f, 100_000).unwrap();
    assert_eq!(g.track.joint_count(), 0);
    for s in &log.steps {
        let p = elementary(s.before.size(), s.split.p.0, s.split.p.1);
        assert_eq!(mat_mul(&p, &rows(&s.after)), mat_mul(&rows(&s.before), &p));
        assert!(s.joints_after <= s.joints_before);
    }
    let after = spectral(&g.transition_matrix(false).unwrap().matrix, &Normalization::MaxOne).unwrap();
    assert!((after.lambda - sp.lambda).abs() <= 1e-9, "{name}/{seed}");
    if name == "snail" {
        let (h, _) = reduce_to_peacock(f, 50).unwrap();
        assert!(h.track.is_isomorphic(&builtin_track("peacock").unwrap(), false), "{name}/{seed}");
    }
    splits
}

fn criterion_9() {
    const PER_TRACK: usize = 100;
    let totals: Vec<(usize, usize)> = std::thread::scope(|s| {
        let handles: Vec<_> = corpus()
            .into_iter()
            .map(|(name, t)| {
                s.spawn(move || {
                    let maps = pf_maps(&t, PER_TRACK, 8);
                    let splits: usize = maps.iter().map(|(seed, f)| check_map(&name, *seed, f)).sum();
                    (maps.len(), splits)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let maps: usize = totals.iter().map(|t| t.0).sum();
    let splits: usize = totals.iter().map(|t| t.1).sum();
    assert!(maps >= 500, "{maps} maps");
    assert!(splits > 0);
}

fn criterion_10() {
    let got = pf_census(2, 1.7).unwrap();
    let fib = IntMatrix::from_rows(&[vec![1, 1], vec![1, 0]]).unwrap();
    assert!(got.contains(&fib));
    let cap = 1.7f64.powi(3).ceil() as i64;
    let mut want = Vec::new();
    for a in 0..=cap {
        for b in 0..=cap - a {
            for c in 0..=cap - a - b {
                for d in 0..=cap - a - b - c {
                    let m = [[a, b], [c, d]];
                    // a 2×2 non-negative matrix is primitive iff its square is positive
                    let sq = [
                        [a * a + b * c, a * b + b * d],
                        [c * a + d * c, c * b + d * d],
                    ];
                    if sq.iter().flatten().any(|&x| x == 0) {
                        continue;
                    }
                    let tr = (a + d) as f64;
                    let det = (a * d - b * c) as f64;
                    let rho = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;
                    if rho <= 1.7 {
                        want.push(IntMatrix::from_rows(&[m[0].to_vec(), m[1].to_vec()]).unwrap());
                    }
                }
            }
        }
    }
    want.sort();
    let mut got = got;
    got.sort();
    assert_eq!(got, want);
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn()); 10] = [
        ("characteristic polynomial and dilatation of M1", criterion_1),
        ("pinned eigenvector mu1", criterion_2),
        ("split conjugation P1, P2 and eigenvector updates", criterion_3),
        ("family matrices, positivity of M_n^7", criterion_4),
        ("Peacock and lifted Peacock strata", criterion_5),
        ("lifted family matrices", criterion_6),
        ("decorated-map search", criterion_7),
        ("arithmetic pipeline", criterion_8),
        ("property suite over fold-generated maps", criterion_9),
        ("2x2 PF census", criterion_10),
    ];
    println!();
    let mut failed = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        match catch_unwind(AssertUnwindSafe(f)) {
            Ok(()) => println!("criterion {}: PASS ({name})", k + 1),
            Err(e) => {
                let why = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {}: FAIL ({name}): {why}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria {failed:?}");
}
