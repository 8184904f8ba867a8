use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use mtp_core::cantor::{
    build_levels, build_measure, holder_probes, lip_sweep, lip_verify, verify_holder, LevelParams,
};
use mtp_core::content::content_estimate;
use mtp_core::covering::{five_r_cover_indices, select_kgb_balls};
use mtp_core::estimate::estimate_critical_exponent;
use mtp_core::families::{
    ball_sets, generate_balls, truncate_limsup, BallFamilyKind, BallFamilySpec, ExampleLLVZSpec, ShrinkLaw,
    ShrunkOpenFamily,
};
use mtp_core::formulas::{estimate_kappa, limsup_dimension, parse_rational, KappaInput, Scalar, SequenceData};
use mtp_core::{dimension_number, Ball, CubeMask, ExponentData, MtpError, Result, Shape};

use crate::input::{parse_f, parse_grid, parse_levels, parse_list, read_json, read_mask};
use crate::svg;

pub const SCHEMA_VERSION: u32 = 1;

/// Result object with the common header fields first.
pub struct Report {
    pub command: &'static str,
    pub seed: u64,
    pub body: Value,
}

impl Report {
    fn new(command: &'static str, seed: u64, body: impl Serialize) -> Result<Self> {
        let body = serde_json::to_value(body).map_err(|e| MtpError::Invalid(e.to_string()))?;
        Ok(Report { command, seed, body })
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
        m.insert("command".into(), json!(self.command));
        m.insert("seed".into(), json!(self.seed));
        if let Value::Object(body) = &self.body {
            for (k, v) in body {
                m.insert(k.clone(), v.clone());
            }
        }
        Value::Object(m)
    }
}

fn lists(a: &str, t: &str, delta: &str, kappa: &str) -> Result<[Vec<String>; 4]> {
    let split = |s: &str| s.split(',').map(|x| x.trim().to_string()).collect::<Vec<_>>();
    let out = [split(a), split(t), split(delta), split(kappa)];
    let d = out[0].len();
    if out.iter().any(|v| v.len() != d) {
        return Err(MtpError::Invalid("a, t, delta and kappa need the same number of entries".into()));
    }
    Ok(out)
}

pub fn dimension(a: &str, t: &str, delta: &str, kappa: &str, exact: bool, seed: u64) -> Result<Report> {
    let [a, t, delta, kappa] = lists(a, t, delta, kappa)?;
    if exact {
        let q = |v: &[String]| v.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>();
        let data = ExponentData::new(q(&a)?, q(&t)?, q(&delta)?, q(&kappa)?)?;
        let dn = dimension_number(&data)?;
        let candidates: Vec<Value> = dn
            .candidates
            .iter()
            .map(|(tau, v)| json!({"tau": tau.to_string(), "value": v.to_string(), "value_f64": v.to_f64()}))
            .collect();
        return Report::new(
            "dimension",
            seed,
            json!({
                "s": dn.value.to_f64(),
                "s_exact": dn.value.to_string(),
                "argmin_tau": dn.argmin_tau.to_f64(),
                "argmin_tau_exact": dn.argmin_tau.to_string(),
                "candidates": candidates,
            }),
        );
    }
    let f = |v: &[String]| parse_list(&v.join(","));
    let data = ExponentData::new(f(&a)?, f(&t)?, f(&delta)?, f(&kappa)?)?;
    let dn = dimension_number(&data)?;
    let candidates: Vec<Value> = dn.candidates.iter().map(|(tau, v)| json!({"tau": tau, "value": v})).collect();
    Report::new("dimension", seed, json!({"s": dn.value, "argmin_tau": dn.argmin_tau, "candidates": candidates}))
}

/// The limsup report, with the per-`n` values also written as `n,s` CSV rows.
pub fn dimension_sequence(
    sequence: Option<&Path>,
    llvz: Option<f64>,
    n_max: usize,
    csv_out: Option<&mut dyn Write>,
    seed: u64,
) -> Result<Report> {
    let data: SequenceData = match (sequence, llvz) {
        (Some(p), None) => read_json(p)?,
        (None, Some(t)) => ExampleLLVZSpec::new(t, (1, n_max.max(1)))?.sequence_data(),
        _ => return Err(MtpError::Invalid("give exactly one of --sequence and --llvz".into())),
    };
    let report = limsup_dimension(&data, n_max)?;
    if let Some(out) = csv_out {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| MtpError::Invalid(format!("csv: {e}"));
        w.write_record(["n", "s"]).map_err(io)?;
        for (n, s) in &report.values {
            w.write_record([n.to_string(), s.to_string()]).map_err(io)?;
        }
        w.flush().map_err(|e| MtpError::Invalid(format!("csv: {e}")))?;
    }
    Report::new("dimension", seed, report)
}

pub fn content(set: &Path, f: &str, depth: u32, seed: u64) -> Result<Report> {
    let f = parse_f(f)?;
    let mask = read_mask(set, depth)?;
    let est = content_estimate(&mask, &f, depth)?;
    Report::new("content", seed, est)
}

fn load_family(path: &Path, seed: Option<u64>) -> Result<(BallFamilySpec, u64)> {
    let mut spec: BallFamilySpec = read_json(path)?;
    let used = match (&mut spec.kind, seed) {
        (BallFamilyKind::Geometric { seed: s, .. }, Some(override_seed)) => {
            *s = override_seed;
            override_seed
        }
        (BallFamilyKind::Geometric { seed: s, .. }, None) => *s,
        (_, s) => s.unwrap_or(0),
    };
    spec.validate()?;
    Ok((spec, used))
}

fn parse_shrink(text: &str) -> Result<ShrinkLaw> {
    match text.split_once(':') {
        None if text == "sub_ball" => Ok(ShrinkLaw::SubBall),
        Some(("sub_grid", k)) => Ok(ShrinkLaw::SubGrid {
            k: k.parse().map_err(|_| MtpError::Invalid(format!("bad sub_grid count {k:?}")))?,
        }),
        _ => Err(MtpError::Invalid(format!("unknown shrink law {text:?}; use sub_ball or sub_grid:K"))),
    }
}

pub struct SimulateArgs<'a> {
    pub family: &'a Path,
    pub f: &'a str,
    pub g: &'a str,
    pub depth: u32,
    pub center: &'a str,
    pub radius: f64,
    pub shrink: &'a str,
    pub level_cap: Option<usize>,
    pub svg: Option<&'a PathBuf>,
    pub seed: Option<u64>,
}

pub fn simulate(args: SimulateArgs) -> Result<Report> {
    let (spec, seed) = load_family(args.family, args.seed)?;
    let f = parse_f(args.f)?;
    let g = parse_f(args.g)?;
    let container = Ball::new(parse_list(args.center)?, args.radius)?;
    let balls = generate_balls(&spec, usize::MAX)?;
    let shapes: Vec<Shape> = balls.iter().cloned().map(Shape::Ball).collect();
    let fam = ShrunkOpenFamily::build(&shapes, &parse_shrink(args.shrink)?, &f, args.depth, 0.0)?;
    let mut params = LevelParams::default();
    if let Some(cap) = args.level_cap {
        params.level_cap = cap;
    }
    let ls = build_levels(&container, &fam, &f, &g, params)?;
    let mu = build_measure(&ls, &f)?;
    let probes = holder_probes(&mu.weights, &container)?;
    let holder = verify_holder(&mu.weights, &f, &container, &probes)?;
    let d = container.dim();
    let union = truncate_limsup(&ball_sets(&balls), 1, usize::MAX, d, args.depth)?;
    let probe_levels: Vec<u32> = (1..=args.depth.min(if d == 1 { 3 } else { 2 })).collect();
    let lip = lip_verify(&union, &f, &probe_levels)?;
    if let Some(path) = args.svg {
        svg::write_levels(path, &ls, &mu.weights)?;
    }
    let levels: Vec<Value> = ls
        .levels
        .iter()
        .map(|lv| {
            json!({
                "g": lv.g,
                "entries": lv.entries.iter().map(|e| json!({
                    "index": e.index,
                    "ball": e.ball,
                    "eta": e.eta,
                    "measure": e.set.measure(),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    Report::new(
        "simulate",
        seed,
        json!({
            "l_b": ls.l_b,
            "resolution": ls.resolution,
            "levels": levels,
            "P_checks": ls.checks,
            "mass": mu.weights.total(),
            "C_star": holder.c_star,
            "holder": holder,
            "lip_certificate": lip,
        }),
    )
}

pub struct LipArgs<'a> {
    pub family: &'a Path,
    pub f: &'a str,
    pub n: usize,
    pub end: Option<usize>,
    pub depth: u32,
    pub probe_levels: &'a str,
    pub sweep: Option<&'a str>,
    pub seed: Option<u64>,
}

fn truncation(family: &Path, n: usize, end: Option<usize>, depth: u32, seed: Option<u64>) -> Result<(CubeMask, u64)> {
    let (spec, seed) = load_family(family, seed)?;
    let balls = generate_balls(&spec, end.unwrap_or(usize::MAX))?;
    let d = balls.first().map(|b| b.dim()).unwrap_or(1);
    let mask = truncate_limsup(&ball_sets(&balls), n, end.unwrap_or(usize::MAX), d, depth)?;
    Ok((mask, seed))
}

pub fn verify_lip(args: LipArgs) -> Result<Report> {
    let (mask, seed) = truncation(args.family, args.n, args.end, args.depth, args.seed)?;
    let f = parse_f(args.f)?;
    let levels = parse_levels(args.probe_levels)?;
    let cert = lip_verify(&mask, &f, &levels)?;
    let sweep = match args.sweep {
        Some(s) => Some(lip_sweep(&mask, &parse_list(s)?, &levels)?),
        None => None,
    };
    let sweep: Option<Vec<Value>> =
        sweep.map(|v| v.into_iter().map(|(a, c)| json!({"alpha": a, "c_measured": c})).collect());
    let mut body = serde_json::to_value(&cert).map_err(|e| MtpError::Invalid(e.to_string()))?;
    body["sweep"] = json!(sweep);
    body["set_measure"] = json!(mask.measure());
    Report::new("verify-lip", seed, body)
}

pub fn kappa(input: &Path, seed: u64) -> Result<Report> {
    let inp: KappaInput = read_json(input)?;
    Report::new("kappa", seed, estimate_kappa(&inp)?)
}

pub fn estimate(
    family: &Path,
    n: usize,
    end: Option<usize>,
    depth: u32,
    grid: &str,
    seed: Option<u64>,
) -> Result<Report> {
    let (mask, seed) = truncation(family, n, end, depth, seed)?;
    let est = estimate_critical_exponent(&mask, &parse_grid(grid)?)?;
    Report::new("estimate", seed, est)
}

pub fn cover(family: &Path, center: &str, radius: f64, mode: &str, g: usize, seed: Option<u64>) -> Result<Report> {
    let (spec, seed) = load_family(family, seed)?;
    let balls = generate_balls(&spec, usize::MAX)?;
    match mode {
        "five-r" => {
            let idx = five_r_cover_indices(&balls);
            let chosen: Vec<Value> = idx.iter().map(|&i| json!({"index": i + 1, "ball": balls[i]})).collect();
            Report::new("cover", seed, json!({"mode": mode, "count": chosen.len(), "chosen": chosen}))
        }
        "kgb" => {
            let container = Ball::new(parse_list(center)?, radius)?;
            let sel = select_kgb_balls(&container, &balls, g)?;
            let mut body = serde_json::to_value(&sel).map_err(|e| MtpError::Invalid(e.to_string()))?;
            body["mode"] = json!(mode);
            body["count"] = json!(sel.chosen.len());
            Report::new("cover", seed, body)
        }
        _ => Err(MtpError::Invalid(format!("unknown cover mode {mode:?}; use five-r or kgb"))),
    }
}
