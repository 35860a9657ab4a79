//! The `tracksplit` command line.
//!
//! Every subcommand collects plain lines and structured records; the printer
//! emits one or the other and, with `--log`, appends the records and a run
//! manifest as JSON lines.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::arith::{
    alexander_candidates, braid_stats, fdtc_filter, lefschetz_trace, rykken_check, BraidWord, FdtcInterval, RykkenVerdict,
};
use crate::census::{
    absorption_check, beta_family, depth_one_first_letters, enumerate_candidates_jobs, first_letter_census,
    reverse_inverse, strand_order, Mode,
};
use crate::cover::{fixed_point_test, lift, lifted_census, LiftError, TraceVerdict};
use crate::maps::{link_map, parse_map, pf_census, spectral, MapError, Normalization, TrainTrackMap};
use crate::matrix::{parse_matrix, IntMatrix};
use crate::splitting::{
    generate_map_by_folds, reduce_joints, reduce_to_peacock, rigid_cycle_check, splittability, tight_split, Side,
    SplitError, SplitLog, DEFAULT_MAX_STEPS,
};
use crate::tracks::{builtin_track, parse_track, TrainTrack};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

/// Library operation and the one subcommand that reaches it.
pub const OP_REGISTRY: &[(&str, &str)] = &[
    ("parse_track", "validate"),
    ("validate_track", "validate"),
    ("validate_map", "validate"),
    ("structure_query", "validate"),
    ("canonical_form", "validate"),
    ("builtin_track", "validate"),
    ("complement_census", "census"),
    ("enumerate_candidates", "census"),
    ("transition_matrix", "matrix"),
    ("link_map", "matrix"),
    ("spectral", "spectral"),
    ("pf_census", "spectral"),
    ("splittability", "split"),
    ("tight_split", "split"),
    ("rigid_cycle_check", "split"),
    ("reduce_joints", "reduce"),
    ("generate_map_by_folds", "enumerate"),
    ("lift", "lift"),
    ("fixed_point_test", "fpf"),
    ("beta_family", "family"),
    ("absorption_check", "family"),
    ("reverse_inverse", "family"),
    ("lefschetz_trace", "alexander"),
    ("alexander_candidates", "alexander"),
    ("rykken_check", "rykken"),
    ("fdtc_filter", "fdtc"),
    ("braid_stats", "braid"),
];

#[derive(Parser, Debug)]
#[command(name = "tracksplit", version, about = "Train tracks and train-track maps on punctured disks")]
pub struct Cli {
    /// Output as plain text or as JSON records, one per line.
    #[arg(long, value_enum, default_value_t = Format::Plain, global = true)]
    pub format: Format,
    /// Significant digits for floating-point output.
    #[arg(long, default_value_t = 6, global = true)]
    pub digits: usize,
    /// Append the records and a run manifest to this file.
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Plain,
    Records,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    LemmaReplay,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Left,
    Right,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a track or map file; a bare name loads a builtin track.
    Validate {
        file: PathBuf,
        /// Also report loop switches, joints, stems and neighbours.
        #[arg(long)]
        structure: bool,
        /// Print a digest of the canonical form of the track.
        #[arg(long)]
        canonical: bool,
        /// Compare the track with another one.
        #[arg(long)]
        isomorphic: Option<PathBuf>,
        /// Let `--canonical` and `--isomorphic` identify mirror images.
        #[arg(long)]
        reflect: bool,
    },
    /// Complement census of a track; without a track, the decorated-map search.
    Census {
        track: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
        /// Report the first letters of the survivors.
        #[arg(long)]
        first_letters: bool,
    },
    /// Transition matrix of a map.
    Matrix {
        map: PathBuf,
        #[arg(long)]
        extended: bool,
        /// Comma-separated row and column order.
        #[arg(long)]
        order: Option<String>,
        /// Also print the link map and gate depth at each switch.
        #[arg(long)]
        links: bool,
    },
    /// Characteristic polynomial, Perron-Frobenius data and eigenvector.
    Spectral {
        /// A map file or a matrix file.
        file: Option<PathBuf>,
        /// Pin one eigenvector entry, e.g. `e5=3` or `r=1`.
        #[arg(long)]
        pin: Option<String>,
        /// List Perron-Frobenius matrices of this size instead.
        #[arg(long)]
        pf_census: Option<usize>,
        /// Dilatation bound for `--pf-census`.
        #[arg(long, default_value_t = 1.7)]
        bound: f64,
    },
    /// Tight split at a switch, or the splittability of every switch.
    Split {
        map: PathBuf,
        #[arg(long)]
        switch: Option<String>,
        #[arg(long, value_enum)]
        side: Option<SideArg>,
        /// Write `<prefix>.track` and `<prefix>.map`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split away every joint of a map.
    Reduce {
        map: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: usize,
        /// Continue to the Peacock for at most this many rounds.
        #[arg(long)]
        peacock: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lift a map to the double cover.
    Lift {
        map: PathBuf,
        #[arg(long, default_value_t = 1)]
        sheet: u8,
        #[arg(long)]
        emit_matrix: bool,
        /// Also report the stratum of the lifted track.
        #[arg(long)]
        census: bool,
    },
    /// Trace test for interior fixed points.
    Fpf { map: PathBuf },
    /// The family maps f_n, or census data of a given decorated map.
    Family {
        #[arg(long, default_value_t = 0)]
        n: i64,
        /// Use this map instead of f_n.
        #[arg(long)]
        map: Option<PathBuf>,
        /// Any of map, matrix, reverse, strands, absorption.
        #[arg(long, default_value = "map,matrix")]
        emit: String,
    },
    /// Fold-generated maps, or first letters of single decorated words.
    Enumerate {
        /// Generate a map on this track by random folds.
        #[arg(long, conflicts_with = "depth_one", required_unless_present = "depth_one")]
        generate: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        length: usize,
        /// Write `<prefix>.track` and `<prefix>.map`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// First letters of all single words for this edge of the Peacock.
        #[arg(long)]
        depth_one: Option<String>,
        #[arg(long, default_value_t = 9)]
        max_len: usize,
    },
    /// Alexander polynomial candidates from a Lefschetz trace.
    Alexander {
        #[arg(long, allow_hyphen_values = true)]
        trace: Option<i64>,
        /// Fixed-point indices, summed into a trace.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        indices: Option<Vec<i64>>,
        #[arg(long, default_value_t = 2)]
        genus: u32,
    },
    /// Compare a matrix trace with the homological bound.
    Rykken {
        #[arg(allow_hyphen_values = true)]
        hom_trace: i64,
        real_edges: i64,
        hom_rank: i64,
        #[arg(allow_hyphen_values = true)]
        matrix_trace: i64,
    },
    /// Twist exponents compatible with a twist-coefficient interval.
    Fdtc {
        #[arg(long, allow_hyphen_values = true)]
        interval: String,
    },
    /// Braid word statistics.
    Braid {
        #[arg(long, allow_hyphen_values = true)]
        word: String,
        #[arg(long)]
        strands: u32,
        #[arg(long)]
        stats: bool,
        #[arg(long)]
        inverse: bool,
        /// Prepend this power of the full twist.
        #[arg(long, allow_hyphen_values = true)]
        twist: Option<i32>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 9)]
    pub max_len: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::LemmaReplay)]
    pub mode: ModeArg,
    /// Directory for the survivor map files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// What a command produced.
#[derive(Default)]
struct Output {
    lines: Vec<String>,
    records: Vec<Value>,
    code: i32,
}

impl Output {
    fn both(&mut self, line: String, record: Value) {
        self.lines.push(line);
        self.records.push(record);
    }
}

enum Failure {
    Invalid(String),
    Unsupported(String),
    Negative(String),
}

impl From<MapError> for Failure {
    fn from(e: MapError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<SplitError> for Failure {
    fn from(e: SplitError) -> Self {
        match e {
            SplitError::Unsupported(_) | SplitError::Trichotomy(_) => Failure::Negative(e.to_string()),
            SplitError::Map(m) => m.into(),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

impl From<LiftError> for Failure {
    fn from(e: LiftError) -> Self {
        match e {
            LiftError::Map(m) => m.into(),
            LiftError::Unsupported(m) => Failure::Unsupported(m),
        }
    }
}

impl From<crate::census::CensusError> for Failure {
    fn from(e: crate::census::CensusError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<crate::arith::ArithError> for Failure {
    fn from(e: crate::arith::ArithError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Res = Result<Output, Failure>;

/// Significant-digit rendering.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn sha(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

struct Inputs {
    digests: Vec<(String, String)>,
}

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
        self.digests.push((path.display().to_string(), sha(text.as_bytes())));
        Ok(text)
    }

    fn track(&mut self, path: &Path) -> Result<TrainTrack, Failure> {
        let name = path.to_string_lossy();
        if !path.exists() {
            if let Ok(t) = builtin_track(&name) {
                return Ok(t);
            }
        }
        let text = self.read(path)?;
        parse_track(&text).map_err(|e| Failure::Invalid(e.to_string()))
    }

    fn map(&mut self, path: &Path) -> Result<TrainTrackMap, Failure> {
        let text = self.read(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let resolve = |r: &str| -> Result<TrainTrack, MapError> {
            let p = dir.join(r);
            if p.is_file() {
                let t = fs::read_to_string(&p).map_err(|e| MapError::Invalid(format!("{}: {e}", p.display())))?;
                return Ok(parse_track(&t)?);
            }
            Ok(builtin_track(r)?)
        };
        Ok(parse_map(&text, &resolve)?)
    }
}

fn first_directive(text: &str) -> Option<&str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .and_then(|l| l.split_whitespace().next())
}

fn matrix_lines(out: &mut Output, labels: &[String], m: &IntMatrix) {
    out.lines.push(format!("labels {}", labels.join(" ")));
    for (i, row) in m.rows().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.lines.push(format!("{} {}", labels.get(i).cloned().unwrap_or_default(), cells.join(" ")));
    }
    out.records.push(json!({"kind": "matrix", "labels": labels, "rows": m.rows()}));
}

fn floats(v: &[f64], digits: usize) -> String {
    v.iter().map(|x| sig(*x, digits)).collect::<Vec<_>>().join(" ")
}

fn side_of(s: SideArg) -> Side {
    match s {
        SideArg::Left => Side::Left,
        SideArg::Right => Side::Right,
    }
}

fn mode_of(m: ModeArg) -> Mode {
    match m {
        ModeArg::LemmaReplay => Mode::LemmaReplay,
        ModeArg::Full => Mode::Full,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Failure::Invalid(format!("{}: {e}", dir.display())))?;
        }
    }
    fs::write(path, text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

/// Print a track and a map referring to it, or write both next to `prefix`.
fn emit_track_map(out: &mut Output, map: &TrainTrackMap, prefix: Option<&Path>) -> Result<(), Failure> {
    let track_text = map.track.serialize();
    match prefix {
        Some(p) => {
            let tp = p.with_extension("track");
            let mp = p.with_extension("map");
            let tname = tp.file_name().unwrap().to_string_lossy().to_string();
            write_file(&tp, &track_text)?;
            write_file(&mp, &map.serialize(&tname))?;
            out.both(format!("wrote {} {}", tp.display(), mp.display()), json!({"kind": "written", "track": tp, "map": mp}));
        }
        None => {
            out.lines.extend(track_text.lines().map(String::from));
            let text = map.serialize(&map.track.name);
            out.lines.extend(text.lines().map(String::from));
            out.records.push(json!({"kind": "map", "track": track_text, "map": text}));
        }
    }
    Ok(())
}

struct ValidateArgs<'a> {
    structure: bool,
    canonical: bool,
    isomorphic: Option<&'a Path>,
    reflect: bool,
}

fn cmd_validate(inp: &mut Inputs, file: &Path, a: ValidateArgs) -> Res {
    let mut out = Output::default();
    let is_map = file.exists() && first_directive(&inp.read(file)?) == Some("map");
    inp.digests.clear();
    let (report, track) = if is_map {
        let m = inp.map(file)?;
        (m.validate(), m.track)
    } else {
        let t = inp.track(file)?;
        (t.validate(), t)
    };
    if report.is_valid() {
        out.lines.push("valid".into());
    } else {
        out.lines.extend(report.violations.iter().cloned());
        out.code = EXIT_NEGATIVE;
    }
    out.records.push(json!({"kind": "validation", "valid": report.is_valid(), "violations": report.violations}));
    if a.canonical {
        let code = track.canonical_form(a.reflect);
        let bytes: Vec<u8> = code.0.iter().flat_map(|x| (*x as u64).to_le_bytes()).collect();
        let d = sha(&bytes);
        out.both(format!("canonical {d}"), json!({"kind": "canonical", "digest": d, "code": code.0}));
    }
    if let Some(other) = a.isomorphic {
        let o = inp.track(other)?;
        let iso = track.is_isomorphic(&o, a.reflect);
        out.both(format!("isomorphic {iso}"), json!({"kind": "isomorphic", "isomorphic": iso}));
        if !iso {
            out.code = EXIT_NEGATIVE;
        }
    }
    if a.structure {
        let s = track.structure_query();
        out.lines.push(format!("loop switches {}", s.loop_switches.join(" ")));
        out.lines.push(format!("joints {}", s.joints.join(" ")));
        out.lines.push(format!("stems {}", s.stems.join(" ")));
        out.lines.push(format!("J {}", s.j));
        for sw in &s.switches {
            out.lines.push(format!(
                "switch {} valence {} l {} r {} v_l {} v_r {}",
                sw.name,
                sw.valence,
                sw.l.as_deref().unwrap_or("-"),
                sw.r.as_deref().unwrap_or("-"),
                sw.v_l,
                sw.v_r
            ));
        }
        out.records.push(json!({"kind": "structure", "report": s}));
    }
    Ok(out)
}

fn cmd_complement(inp: &mut Inputs, file: &Path) -> Res {
    let mut out = Output::default();
    let t = inp.track(file)?;
    let (regions, stratum) = t.complement_census().map_err(|e| Failure::Invalid(e.to_string()))?;
    for r in &regions {
        let name = match &r.kind {
            crate::tracks::RegionKind::Polygon(id) => id.clone(),
            crate::tracks::RegionKind::Exterior => "exterior".into(),
        };
        out.both(
            format!("region {name} cusps={} punctured={}", r.cusps, r.punctured),
            json!({"kind": "region", "region": r}),
        );
    }
    out.both(format!("stratum {stratum}"), json!({"kind": "stratum", "stratum": stratum.to_string()}));
    Ok(out)
}

fn cmd_search(s: &SearchArgs, first_letters: bool) -> Res {
    let mut out = Output::default();
    let found = enumerate_candidates_jobs(s.max_len, mode_of(s.mode), s.jobs)?;
    for m in &found {
        let text = m.serialize("peacock");
        out.both(
            format!("{}: {}", m.name, crate::census::describe(m)),
            json!({"kind": "survivor", "name": m.name, "map": text}),
        );
        if let Some(dir) = &s.out {
            write_file(&dir.join(format!("{}.map", m.name)), &text)?;
        }
    }
    out.both(format!("survivors {}", found.len()), json!({"kind": "count", "survivors": found.len()}));
    if first_letters {
        for (edge, set) in first_letter_census(&found) {
            let v: Vec<String> = set.into_iter().collect();
            out.both(format!("Df({edge}) {}", v.join(" ")), json!({"kind": "first_letters", "edge": edge, "letters": v}));
        }
    }
    Ok(out)
}

fn cmd_matrix(inp: &mut Inputs, file: &Path, extended: bool, order: Option<&str>, links: bool) -> Res {
    let mut out = Output::default();
    let m = inp.map(file)?;
    let mut tm = m.transition_matrix(extended)?;
    if let Some(o) = order {
        let o: Vec<String> = o.split(',').map(|s| s.trim().to_string()).collect();
        tm = tm.reordered(&o)?;
    }
    matrix_lines(&mut out, &tm.labels, &tm.matrix);
    if links {
        let t = &m.track;
        for s in 0..t.switches.len() {
            let lm = link_map(&m, s)?;
            let pairs: Vec<String> = lm
                .df
                .iter()
                .map(|(x, y)| format!("{}@{}->{}@{}", t.edges[x.edge].id, t.switch_name(t.switch_of(*x)), t.edges[y.edge].id, t.switch_name(t.switch_of(*y))))
                .collect();
            out.both(
                format!("links {} gate_depth {} {}", t.switch_name(s), lm.gate_depth, pairs.join(" ")),
                json!({"kind": "links", "switch": t.switch_name(s), "gate_depth": lm.gate_depth, "df": pairs}),
            );
        }
    }
    Ok(out)
}

fn cmd_spectral(inp: &mut Inputs, file: Option<&Path>, pin: Option<&str>, pfc: Option<usize>, bound: f64, digits: usize) -> Res {
    let mut out = Output::default();
    if let Some(n) = pfc {
        let ms = pf_census(n, bound)?;
        for m in &ms {
            out.both(format!("{:?}", m.rows()), json!({"kind": "pf_matrix", "rows": m.rows()}));
        }
        out.both(format!("count {}", ms.len()), json!({"kind": "count", "matrices": ms.len()}));
        return Ok(out);
    }
    let file = file.ok_or_else(|| Failure::Invalid("spectral needs a map or matrix file".into()))?;
    let text = inp.read(file)?;
    let (m, labels) = if first_directive(&text) == Some("map") {
        inp.digests.pop();
        let map = inp.map(file)?;
        let tm = map.transition_matrix(false)?;
        (tm.matrix, tm.labels)
    } else {
        let m = parse_matrix(&text).map_err(Failure::Invalid)?;
        let labels = (1..=m.size()).map(|i| format!("e{i}")).collect();
        (m, labels)
    };
    let norm = match pin {
        None => Normalization::MaxOne,
        Some(p) => {
            let (name, val) = p.split_once('=').ok_or_else(|| Failure::Invalid(format!("bad pin {p}")))?;
            let val: f64 = val.parse().map_err(|_| Failure::Invalid(format!("bad pin value {val}")))?;
            let idx = labels
                .iter()
                .position(|l| l == name)
                .or_else(|| name.strip_prefix('e').and_then(|k| k.parse::<usize>().ok()).filter(|k| *k >= 1 && *k <= labels.len()).map(|k| k - 1))
                .ok_or_else(|| Failure::Invalid(format!("unknown pin label {name}")))?;
            Normalization::Pin(idx, val)
        }
    };
    let sp = spectral(&m, &norm)?;
    out.both(format!("charpoly {}", sp.char_poly), json!({"kind": "charpoly", "coeffs_high": sp.char_poly.to_i64_high()}));
    out.both(
        format!("pf {} witness {}", sp.pf, sp.witness.map(|w| w.to_string()).unwrap_or_else(|| "-".into())),
        json!({"kind": "pf", "pf": sp.pf, "witness": sp.witness}),
    );
    out.both(
        format!("lambda {}", sig(sp.lambda, digits)),
        json!({"kind": "lambda", "lambda": sig(sp.lambda, digits), "lo": sp.lambda_lo, "hi": sp.lambda_hi}),
    );
    if let Some(mu) = &sp.mu {
        out.both(
            format!("mu {}", floats(mu, digits)),
            json!({"kind": "mu", "labels": labels, "mu": mu.iter().map(|x| sig(*x, digits)).collect::<Vec<_>>()}),
        );
    }
    if let Some(r) = sp.residual {
        out.both(format!("residual {r:.1e}"), json!({"kind": "residual", "residual": r}));
    }
    Ok(out)
}

fn cmd_split(inp: &mut Inputs, file: &Path, switch: Option<&str>, side: Option<SideArg>, prefix: Option<&Path>) -> Res {
    let mut out = Output::default();
    let m = inp.map(file)?;
    let t = &m.track;
    let Some(sw) = switch else {
        for s in 0..t.switches.len() {
            let k = match splittability(&m, s) {
                Ok(k) => format!("{k:?}"),
                Err(e) => format!("error: {e}"),
            };
            out.both(format!("{} {k}", t.switch_name(s)), json!({"kind": "splittability", "switch": t.switch_name(s), "class": k}));
        }
        for c in rigid_cycle_check(&m)? {
            out.both(format!("rigid cycle {}", c.join(" ")), json!({"kind": "rigid_cycle", "switches": c}));
        }
        return Ok(out);
    };
    let side = side.ok_or_else(|| Failure::Invalid("--side is required with --switch".into()))?;
    let v = t.switch_index(sw).ok_or_else(|| Failure::Invalid(format!("unknown switch {sw}")))?;
    let (m2, mv) = tight_split(&m, v, side_of(side))?;
    out.both(
        format!("split {} {} folds {} {} into {} P=I+D({},{})", mv.switch, mv.side.name(), mv.folded.0, mv.folded.1, mv.alpha, mv.p.0, mv.p.1),
        json!({"kind": "split", "move": mv}),
    );
    let tm = m2.transition_matrix(false)?;
    matrix_lines(&mut out, &tm.labels, &tm.matrix);
    emit_track_map(&mut out, &m2, prefix)?;
    Ok(out)
}

fn log_records(log: &SplitLog) -> Vec<Value> {
    log.steps
        .iter()
        .map(|s| {
            json!({"kind": "split_step", "step": s.step, "switch": s.split.switch, "side": s.split.side.name(),
                   "P": [s.split.p.0, s.split.p.1], "matrix": s.after.rows()})
        })
        .collect()
}

fn cmd_reduce(inp: &mut Inputs, file: &Path, max_steps: usize, peacock: Option<usize>, prefix: Option<&Path>, digits: usize) -> Res {
    let mut out = Output::default();
    let m = inp.map(file)?;
    let before = spectral(&m.transition_matrix(false)?.matrix, &Normalization::MaxOne)?;
    let (m2, log) = match peacock {
        Some(r) => reduce_to_peacock(&m, r)?,
        None => reduce_joints(&m, max_steps)?,
    };
    let after = spectral(&m2.transition_matrix(false)?.matrix, &Normalization::MaxOne)?;
    for (s, rec) in log.steps.iter().zip(log_records(&log)) {
        out.lines.push(format!("step {} {} {} P=I+D({},{}) J {}->{}", s.step, s.split.switch, s.split.side.name(), s.split.p.0, s.split.p.1, s.joints_before, s.joints_after));
        out.records.push(rec);
    }
    out.both(
        format!(
            "J {} -> {} in {} steps; lambda {} -> {}",
            m.track.joint_count(),
            m2.track.joint_count(),
            log.steps.len(),
            sig(before.lambda, digits),
            sig(after.lambda, digits)
        ),
        json!({"kind": "reduce", "joints_before": m.track.joint_count(), "joints_after": m2.track.joint_count(),
               "steps": log.steps.len(), "seen": log.seen, "recurrences": log.recurrences,
               "lambda_before": sig(before.lambda, digits), "lambda_after": sig(after.lambda, digits)}),
    );
    emit_track_map(&mut out, &m2, prefix)?;
    Ok(out)
}

fn cmd_lift(inp: &mut Inputs, file: &Path, sheet: u8, emit_matrix: bool, census: bool) -> Res {
    let mut out = Output::default();
    let m = inp.map(file)?;
    let l = lift(&m, sheet)?;
    let t = &m.track;
    for (e, w) in l.words.iter().enumerate() {
        let word: Vec<String> = w
            .iter()
            .map(|s| format!("{}{}^{}", if s.letter.rev { "~" } else { "" }, t.edges[s.letter.edge].id, s.sheet))
            .collect();
        out.both(format!("{}^1 -> {}", t.edges[e].id, word.join(" ")), json!({"kind": "lifted_word", "edge": t.edges[e].id, "word": word}));
    }
    out.both(format!("trace {}", l.trace), json!({"kind": "trace", "sheet": sheet, "trace": l.trace}));
    if emit_matrix {
        matrix_lines(&mut out, &l.labels, &l.matrix);
    }
    if census {
        let (s, chi) = lifted_census(t)?;
        out.both(format!("lifted stratum {s} chi {chi}"), json!({"kind": "lifted_census", "stratum": s.to_string(), "chi": chi}));
    }
    Ok(out)
}

fn cmd_fpf(inp: &mut Inputs, file: &Path) -> Res {
    let mut out = Output::default();
    let m = inp.map(file)?;
    let r = fixed_point_test(&m)?;
    out.both(
        format!("predicate {}", if r.predicate_passes() { "pass".to_string() } else { format!("fail {}", r.predicate_failures.join(" ")) }),
        json!({"kind": "predicate", "failures": r.predicate_failures}),
    );
    out.both(format!("trace sheet1 {} sheet2 {}", r.trace_sheet1, r.trace_sheet2), json!({"kind": "traces", "sheet1": r.trace_sheet1, "sheet2": r.trace_sheet2}));
    let v = match r.verdict {
        TraceVerdict::TraceZero => "TraceZero".to_string(),
        TraceVerdict::TraceNonzero(k) => format!("TraceNonzero({k})"),
    };
    out.both(format!("verdict {v}"), json!({"kind": "verdict", "verdict": v}));
    if r.verdict != TraceVerdict::TraceZero {
        out.code = EXIT_NEGATIVE;
    }
    Ok(out)
}

fn cmd_family(inp: &mut Inputs, n: i64, file: Option<&Path>, emit: &str) -> Res {
    let mut out = Output::default();
    let map = match file {
        Some(f) => inp.map(f)?,
        None => beta_family(n)?.0,
    };
    for item in emit.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "map" => {
                let text = map.serialize("peacock");
                out.lines.extend(text.lines().map(String::from));
                out.records.push(json!({"kind": "map", "map": text}));
            }
            "matrix" => {
                let tm = map.transition_matrix(false)?;
                matrix_lines(&mut out, &tm.labels, &tm.matrix);
            }
            "reverse" => {
                let r = reverse_inverse(&map)?;
                let text = r.serialize("peacock");
                out.lines.extend(text.lines().map(String::from));
                out.records.push(json!({"kind": "reverse_inverse", "map": text}));
            }
            "strands" => {
                for e in 0..map.track.edges.len() {
                    let o = strand_order(&map, e)?;
                    let s: Vec<String> = o.strands.iter().map(|(src, k, d)| format!("{src}#{k}{d}")).collect();
                    out.both(format!("strands {} {}", o.edge, s.join(" ")), json!({"kind": "strand_order", "order": o}));
                }
            }
            "absorption" => {
                let vs = absorption_check(&map)?;
                for v in &vs {
                    out.both(
                        format!("{:?} strands {} and {} at {}", v.kind, v.strands.0, v.strands.1, v.node),
                        json!({"kind": "violation", "violation": format!("{:?}", v.kind), "strands": [v.strands.0, v.strands.1], "node": v.node}),
                    );
                }
                if vs.is_empty() {
                    out.both("no absorption violations".into(), json!({"kind": "absorption", "violations": 0}));
                } else {
                    out.code = EXIT_NEGATIVE;
                }
            }
            other => return Err(Failure::Invalid(format!("unknown emit item {other}"))),
        }
    }
    Ok(out)
}

fn cmd_enumerate(inp: &mut Inputs, generate: Option<&Path>, seed: u64, length: usize, prefix: Option<&Path>, depth_one: Option<&str>, max_len: usize) -> Res {
    let mut out = Output::default();
    if let Some(tp) = generate {
        let t = inp.track(tp)?;
        let m = generate_map_by_folds(&t, seed, length)?;
        emit_track_map(&mut out, &m, prefix)?;
    } else if let Some(e) = depth_one {
        let v: Vec<String> = depth_one_first_letters(e, max_len)?.into_iter().collect();
        out.both(format!("Df({e}) {}", v.join(" ")), json!({"kind": "first_letters", "edge": e, "letters": v}));
    }
    Ok(out)
}

fn cmd_alexander(trace: Option<i64>, indices: Option<&[i64]>, genus: u32) -> Res {
    let mut out = Output::default();
    let trace = match (trace, indices) {
        (Some(t), _) => t,
        (None, Some(ix)) => lefschetz_trace(ix),
        (None, None) => return Err(Failure::Invalid("give --trace or --indices".into())),
    };
    let a = alexander_candidates(trace, genus)?;
    out.both(format!("trace {trace}"), json!({"kind": "trace", "trace": trace}));
    for p in &a.candidates {
        let sel = a.selected.contains(p);
        out.both(
            format!("candidate {p}{}", if sel { " selected" } else { "" }),
            json!({"kind": "candidate", "poly": p.to_string(), "coeffs_high": p.to_i64_high(), "selected": sel}),
        );
    }
    Ok(out)
}

fn run(cli: &Cli, inp: &mut Inputs) -> Res {
    let d = cli.digits;
    match &cli.command {
        Command::Validate { file, structure, canonical, isomorphic, reflect } => cmd_validate(
            inp,
            file,
            ValidateArgs { structure: *structure, canonical: *canonical, isomorphic: isomorphic.as_deref(), reflect: *reflect },
        ),
        Command::Census { track: Some(t), .. } => cmd_complement(inp, t),
        Command::Census { track: None, search, first_letters } => cmd_search(search, *first_letters),
        Command::Matrix { map, extended, order, links } => cmd_matrix(inp, map, *extended, order.as_deref(), *links),
        Command::Spectral { file, pin, pf_census, bound } => cmd_spectral(inp, file.as_deref(), pin.as_deref(), *pf_census, *bound, d),
        Command::Split { map, switch, side, out } => cmd_split(inp, map, switch.as_deref(), *side, out.as_deref()),
        Command::Reduce { map, max_steps, peacock, out } => cmd_reduce(inp, map, *max_steps, *peacock, out.as_deref(), d),
        Command::Lift { map, sheet, emit_matrix, census } => cmd_lift(inp, map, *sheet, *emit_matrix, *census),
        Command::Fpf { map } => cmd_fpf(inp, map),
        Command::Family { n, map, emit } => cmd_family(inp, *n, map.as_deref(), emit),
        Command::Enumerate { generate, seed, length, out, depth_one, max_len } => {
            cmd_enumerate(inp, generate.as_deref(), *seed, *length, out.as_deref(), depth_one.as_deref(), *max_len)
        }
        Command::Alexander { trace, indices, genus } => cmd_alexander(*trace, indices.as_deref(), *genus),
        Command::Rykken { hom_trace, real_edges, hom_rank, matrix_trace } => {
            let mut out = Output::default();
            let r = rykken_check(*hom_trace, *real_edges, *hom_rank, *matrix_trace)?;
            out.both(format!("bound {} verdict {:?}", r.bound, r.verdict), json!({"kind": "rykken", "result": r}));
            if r.verdict == RykkenVerdict::Contradiction {
                out.code = EXIT_NEGATIVE;
            }
            Ok(out)
        }
        Command::Fdtc { interval } => {
            let mut out = Output::default();
            let c = FdtcInterval::parse(interval)?;
            let ms = fdtc_filter(&c);
            let s: Vec<String> = ms.iter().map(|m| m.to_string()).collect();
            out.both(format!("interval {c} m {}", s.join(" ")), json!({"kind": "fdtc", "interval": c.to_string(), "m": ms}));
            Ok(out)
        }
        Command::Braid { word, strands, stats, inverse, twist } => {
            let mut out = Output::default();
            let mut w = BraidWord::parse(*strands, word)?;
            if *inverse {
                w = w.inverse();
            }
            if let Some(m) = twist {
                w = w.with_twist(*m);
            }
            out.both(format!("word {w}"), json!({"kind": "braid", "strands": w.strands, "gens": w.gens}));
            if *stats {
                let s = braid_stats(&w);
                out.both(format!("exponent_sum {} self_linking {}", s.exponent_sum, s.self_linking), json!({"kind": "braid_stats", "stats": s}));
            }
            Ok(out)
        }
    }
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub inputs: Vec<(String, String)>,
    pub version: String,
    pub wall_ms: u128,
    pub result_digest: String,
}

/// Run the tool on `argv` (program name first), writing to the given streams.
pub fn dispatch(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    let start = Instant::now();
    let mut inp = Inputs { digests: Vec::new() };
    let (out, code) = match run(&cli, &mut inp) {
        Ok(o) => {
            let c = o.code;
            (o, c)
        }
        Err(f) => {
            let (msg, code) = match f {
                Failure::Invalid(m) => (m, EXIT_INVALID),
                Failure::Unsupported(m) => (format!("unsupported: {m}"), EXIT_USAGE),
                Failure::Negative(m) => (m, EXIT_NEGATIVE),
            };
            let _ = writeln!(stderr, "error: {msg}");
            (Output::default(), code)
        }
    };
    let body: String = match cli.format {
        Format::Plain => out.lines.iter().map(|l| format!("{l}\n")).collect(),
        Format::Records => out.records.iter().map(|r| format!("{r}\n")).collect(),
    };
    let _ = write!(stdout, "{body}");
    if let Some(path) = &cli.log {
        let manifest = RunManifest {
            command: argv.iter().skip(1).cloned().collect(),
            inputs: inp.digests.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_ms: start.elapsed().as_millis(),
            result_digest: sha(body.as_bytes()),
        };
        let mut text: String = out.records.iter().map(|r| format!("{r}\n")).collect();
        text.push_str(&format!("{}\n", json!({"kind": "manifest", "manifest": manifest})));
        let written = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| f.write_all(text.as_bytes()));
        if let Err(e) = written {
            let _ = writeln!(stderr, "error: cannot write log {}: {e}", path.display());
            return EXIT_INVALID;
        }
    }
    code
}
