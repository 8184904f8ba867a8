//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mtp_core::cantor::{
    build_levels, build_measure, build_measure_rectangles, holder_exponent, holder_probes, lip_verify,
    rectangle_probes, verify_holder, ExponentRun, LevelParams, RectangleMeasureMode,
};
use mtp_core::content::{fractional_cover, frostman_lp, net_content, singular_value};
use mtp_core::covering::{five_r_cover_indices, select_kgb_balls, select_kgb_rectangles, RectangleMode};
use mtp_core::estimate::critical_exponent_of_family;
use mtp_core::families::{
    ball_sets, generate_balls, shifted_sets, truncate_limsup, BallFamilySpec, ExampleLLVZSpec, ShrinkLaw,
    ShrunkOpenFamily,
};
use mtp_core::formulas::{
    estimate_kappa, limsup_dimension, product_dimension, product_dimension_argmin, product_dimension_functions,
    KappaInput,
};
use mtp_core::space::side;
use mtp_core::{
    dimension_number, doubling_constant, Aabb, Ball, Cube, CubeMask, DimensionFunction, ExponentData, Rectangle,
    Shape,
};

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn within(t: Instant, limit: Duration) -> Result<Duration, String> {
    let e = t.elapsed();
    if e > limit {
        return Err(format!("took {e:.2?}, limit {limit:?}"));
    }
    Ok(e)
}

fn random_mask(rng: &mut ChaCha8Rng, d: usize, l: u32) -> CubeMask {
    let mut cubes = Vec::new();
    for _ in 0..rng.gen_range(1..=10) {
        let lv = rng.gen_range(0..=l);
        let idx = (0..d).map(|_| rng.gen_range(0..1u64 << (2 * lv))).collect();
        cubes.push(Cube::new(lv, idx).unwrap());
    }
    for _ in 0..rng.gen_range(0..=24) {
        let idx = (0..d).map(|_| rng.gen_range(0..1u64 << (2 * l))).collect();
        cubes.push(Cube::new(l, idx).unwrap());
    }
    CubeMask::from_cubes(d, l, &cubes).unwrap()
}

fn c01_llvz_limsup() -> Outcome {
    let t0 = Instant::now();
    let (ln2, ln3) = (2f64.ln(), 3f64.ln());
    let mut worst = 0.0f64;
    for t in [1.0, 2.0, 3.0, 5.0] {
        let spec = ok(ExampleLLVZSpec::new(t, (1, 50)))?;
        let r = ok(limsup_dimension(&spec.sequence_data(), 50))?;
        let want = ((ln2 + ln3) / (ln2 + t)).min(1.0);
        worst = worst.max((r.limsup - want).abs());
        check!((r.limsup - want).abs() <= 1e-9, "t={t}: limsup {} vs {want}", r.limsup);
        check!(r.nonincreasing_tail, "t={t}: tail not nonincreasing");
        for &(n, v) in r.values.iter().filter(|(n, _)| *n >= 3) {
            let nf = n as f64;
            let per = (1.0 + (ln3 - t) / (ln3 + nf * nf)).min((ln2 + ln3) / (ln2 + t));
            worst = worst.max((v - per).abs());
            check!((v - per).abs() <= 1e-9, "t={t}, n={n}: {v} vs {per}");
        }
    }
    let e = within(t0, Duration::from_secs(1))?;
    Ok(format!("max error {worst:.1e}, {e:.2?}"))
}

fn c02_jarnik_formula() -> Outcome {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for tau in [2.5, 3.0, 4.0, 8.0] {
        // base radius q^{-2/a} for a in {1, 2, 4}: B(p/q, q^{-τ}) = B(p/q, ρ^{a + t})
        for a in [1.0, 2.0, 4.0] {
            let t = a * tau / 2.0 - a;
            let data = ok(ExponentData::new(vec![a], vec![t], vec![1.0], vec![0.0]))?;
            let s = ok(dimension_number(&data))?.value;
            worst = worst.max((s - 2.0 / tau).abs());
            check!((s - 2.0 / tau).abs() <= 1e-12, "tau={tau}, a={a}: {s}");
        }
    }
    let e = within(t0, Duration::from_secs(1))?;
    Ok(format!("max error {worst:.1e}, {e:.2?}"))
}

fn c03_lp_duality() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let d = rng.gen_range(1..=2);
        let l = rng.gen_range(1..=6);
        let mask = random_mask(&mut rng, d, l);
        let f = DimensionFunction::power(rng.gen_range(0.2..=d as f64));
        let p = ok(frostman_lp(&mask, &f, l))?.value;
        let c = ok(fractional_cover(&mask, &f, l))?.value;
        let gap = (p - c).abs() / c;
        worst = worst.max(gap);
        check!(gap <= 1e-6, "case {case} (d={d}, L={l}, α={}): packing {p} vs cover {c}", f.alpha);
    }
    let e = within(t0, Duration::from_secs(60))?;
    Ok(format!("max relative gap {worst:.1e} over 50 masks, {e:.2?}"))
}

/// Every cover of `mask ∩ q` by cubes of level `<= l` inside `q` that meet the
/// mask, listed explicitly.
fn all_cover_costs(mask: &CubeMask, q: &Cube, l: u32, f: &DimensionFunction) -> Vec<f64> {
    if !mask.meets_cube(q) {
        return vec![0.0];
    }
    let own = if q.side() <= f.valid_radius_max { f.eval(q.side()) } else { f64::INFINITY };
    if q.level == l {
        return vec![own];
    }
    let mut acc = vec![0.0];
    for ch in q.children() {
        let sub = all_cover_costs(mask, &ch, l, f);
        acc = acc.iter().flat_map(|a| sub.iter().map(move |b| a + b)).collect();
    }
    acc.push(own);
    acc
}

fn cover_count(mask: &CubeMask, q: &Cube, l: u32) -> f64 {
    if !mask.meets_cube(q) {
        return 1.0;
    }
    if q.level == l {
        return 1.0;
    }
    1.0 + q.children().iter().map(|c| cover_count(mask, c, l)).product::<f64>()
}

fn c04_net_content_exact() -> Outcome {
    let t0 = Instant::now();
    // powers whose cube values are exact dyadic rationals, and one with a log factor
    let exact = [DimensionFunction::power(0.5), DimensionFunction::power(1.0), DimensionFunction::power(1.5)];
    let logf = ok(DimensionFunction::with_max(0.5, 1.0, side(2)))?;
    let mut checked = 0usize;
    let mut compare = |mask: &CubeMask, l: u32| -> Result<(), String> {
        let with_log = if l >= 2 { Some(&logf) } else { None };
        for f in exact.iter().chain(with_log) {
            let want = all_cover_costs(mask, &Cube::root(1), l, f).into_iter().fold(f64::INFINITY, f64::min);
            let got = ok(net_content(mask, f, l))?;
            if f.beta == 0.0 {
                check!(got == want, "mask {:?}, α={}: {got} vs {want}", mask.runs(), f.alpha);
            } else {
                check!((got - want).abs() <= 1e-12 * want, "mask {:?} with log factor: {got} vs {want}", mask.runs());
            }
        }
        checked += 1;
        Ok(())
    };
    for l in 0..=2u32 {
        let n = 1usize << (2 * l);
        for bits in 1u64..(1u64 << n) {
            let cubes: Vec<Cube> = (0..n).filter(|i| bits >> i & 1 == 1).map(|i| Cube::new(l, vec![i as u64]).unwrap()).collect();
            compare(&CubeMask::from_cubes(1, l, &cubes).unwrap(), l)?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut sampled = 0;
    while sampled < 400 {
        let l = rng.gen_range(3..=4u32);
        let k = rng.gen_range(1..=8);
        let cubes: Vec<Cube> = (0..k)
            .map(|_| {
                let lv = rng.gen_range(1..=l);
                Cube::new(lv, vec![rng.gen_range(0..1u64 << (2 * lv))]).unwrap()
            })
            .collect();
        let mask = CubeMask::from_cubes(1, l, &cubes).unwrap();
        if cover_count(&mask, &Cube::root(1), l) > 2e5 {
            continue;
        }
        compare(&mask, l)?;
        sampled += 1;
    }
    let e = within(t0, Duration::from_secs(30))?;
    Ok(format!("{checked} masks equal to the cut enumeration, {e:.2?}"))
}

/// Largest `4^{-k}` on which `r^α (ln 1/r)^β` is increasing.
fn monotone_max(alpha: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return 1.0;
    }
    let need = (beta / alpha).max(0.0);
    let k = ((need / 4f64.ln()).floor() as u32 + 1).max(1);
    side(k)
}

fn c05_frostman_sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_ratio = 0.0f64;
    let mut envelope = f64::INFINITY;
    for case in 0..120 {
        let d = rng.gen_range(1..=2);
        let alpha = rng.gen_range(0.2..=d as f64);
        let beta = if rng.gen_bool(0.3) { rng.gen_range(-1.0..=1.0) } else { 0.0 };
        let f = ok(DimensionFunction::with_max(alpha, beta, monotone_max(alpha, beta)))?;
        let top = (-f.valid_radius_max.log(4.0)).round() as u32;
        let l = rng.gen_range(top.max(1)..=top.max(5));
        let mask = random_mask(&mut rng, d, l);
        let phi = ok(singular_value(&mask, &f, l))?;
        let net = ok(net_content(&mask, &f, l))?;
        check!(phi <= net * (1.0 + 1e-6), "case {case}: φ={phi} exceeds net content {net}");
        let dbl = ok(doubling_constant(&f, side(l).min(f.valid_radius_max / 4.0)))?;
        let bound = dbl.powi(11);
        check!(net / phi <= bound, "case {case}: ratio {} above D^11={bound}", net / phi);
        worst_ratio = worst_ratio.max(net / phi);
        envelope = envelope.min(bound);
    }
    Ok(format!("net/φ at most {worst_ratio:.4} over 120 masks (smallest D^11 seen {envelope:.1})"))
}

fn c06_covering() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut selected = 0usize;
    for case in 0..1000 {
        let d = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=60);
        let fam: Vec<Ball> = (0..n)
            .map(|_| Ball::new((0..d).map(|_| rng.gen_range(0.0..1.0)).collect(), rng.gen_range(1e-3..0.2)).unwrap())
            .collect();
        let pick = five_r_cover_indices(&fam);
        for (x, &i) in pick.iter().enumerate() {
            for &j in &pick[x + 1..] {
                check!(fam[i].disjoint(&fam[j]), "case {case}: selected {} and {} meet", i + 1, j + 1);
            }
        }
        for (k, b) in fam.iter().enumerate() {
            let hit = pick.iter().any(|&i| fam[i].scaled(5.0).to_box().contains_box(&b.to_box()));
            check!(hit, "case {case}: ball {} is outside every 5-dilate", k + 1);
        }
        let container = Ball::new(vec![0.5; d], 0.5).unwrap();
        let g = rng.gen_range(1..=n);
        let sel = ok(select_kgb_balls(&container, &fam, g))?;
        let cb = container.to_box();
        for (x, c) in sel.chosen.iter().enumerate() {
            check!(c.index >= g, "case {case}: index {} below G={g}", c.index);
            check!(cb.contains_box(&c.shape.to_box()), "case {case}: {} leaves the container", c.index);
            for c2 in &sel.chosen[x + 1..] {
                let (a, b) = (c.shape.dilate_box(3.0), c2.shape.dilate_box(3.0));
                check!(!a.meets(&b), "case {case}: 3-dilates of {} and {} meet", c.index, c2.index);
            }
        }
        selected += sel.chosen.len();
    }
    let e = within(t0, Duration::from_secs(30))?;
    Ok(format!("1000 families, {selected} K_G,B picks, {e:.2?}"))
}

fn c07_cantor() -> Outcome {
    let t0 = Instant::now();
    let f = DimensionFunction::power(0.5);
    let g = DimensionFunction::power(1.0);
    let container = ok(Ball::new(vec![0.5], 0.25))?;
    let balls = ok(generate_balls(&BallFamilySpec::rational(2.0, 128), usize::MAX))?;
    let shapes: Vec<Shape> = balls.into_iter().map(Shape::Ball).collect();
    let mut c_star = Vec::new();
    let mut shape = String::new();
    for l in [9u32, 10] {
        let fam = ok(ShrunkOpenFamily::build(&shapes, &ShrinkLaw::SubGrid { k: 2 }, &f, l, 0.0))?;
        let ls = ok(build_levels(&container, &fam, &f, &g, LevelParams::default()))?;
        let p = &ls.checks;
        check!(p.p1 && p.p2 && p.p3 && p.p4, "L={l}: P1..P4 = {} {} {} {}", p.p1, p.p2, p.p3, p.p4);
        let mu = ok(build_measure(&ls, &f))?;
        let total = mu.weights.total();
        check!((total - 1.0).abs() <= 1e-9, "L={l}: mass {total}");
        let probes = ok(holder_probes(&mu.weights, &container))?;
        let h = ok(verify_holder(&mu.weights, &f, &container, &probes))?;
        c_star.push(h.c_star);
        if l == 10 {
            shape = format!("{:?} sets per level", ls.levels.iter().map(|v| v.entries.len()).collect::<Vec<_>>());
        }
    }
    let factor = (c_star[1] / c_star[0]).max(c_star[0] / c_star[1]);
    check!(factor <= 4.0, "C* moved by {factor} ({c_star:?})");
    let e = within(t0, Duration::from_secs(300))?;
    Ok(format!("{shape}, C* {:.4} -> {:.4}, {e:.2?}", c_star[0], c_star[1]))
}

/// Rectangles `Δ(x, (ρ, ρ²))` around the lattice points `((2i+1)ρ, (2j+1)ρ²)`.
fn lattice_rectangles(rho: f64) -> Vec<Rectangle> {
    let mut out = Vec::new();
    let (cols, rows) = ((0.5 / rho).round() as usize, (0.5 / (rho * rho)).round() as usize);
    for i in 0..cols {
        for j in 0..rows {
            let c = vec![(2 * i + 1) as f64 * rho, (2 * j + 1) as f64 * rho * rho];
            out.push(Rectangle::new(c, rho, vec![1.0, 2.0]).unwrap());
        }
    }
    out
}

fn c08_rectangle_exponent() -> Outcome {
    let t0 = Instant::now();
    let data = ok(ExponentData::new(vec![1.0, 2.0], vec![0.0, 2.0], vec![1.0, 1.0], vec![0.0, 0.0]))?;
    let s = ok(dimension_number(&data))?.value;
    let container = ok(Ball::new(vec![0.5, 0.5], 0.5))?;
    let law = ShrinkLaw::ResonantCore { t: vec![0.0, 2.0] };
    let f = DimensionFunction::power(s);
    let mut runs = Vec::new();
    for n in [3, 4] {
        let rects = lattice_rectangles(0.5f64.powi(n));
        let sel = ok(select_kgb_rectangles(&container, &rects, RectangleMode::Ubiquity))?;
        let shapes: Vec<Shape> = rects.into_iter().map(Shape::Rectangle).collect();
        let fam = ok(ShrunkOpenFamily::geometric(&shapes, &law, &f, 10))?;
        let m = ok(build_measure_rectangles(&sel, &fam, s, RectangleMeasureMode::EqualSidelength))?;
        let probes = ok(rectangle_probes(&sel, &fam))?;
        runs.push(ExponentRun { measure: m.weights, probes, scale: m.selection_mass });
    }
    let grid: Vec<f64> = (100..=200).map(|i| i as f64 / 100.0).collect();
    let est = ok(holder_exponent(&runs, &grid))?;
    check!(est.exponent >= s - 0.05, "measured {} below s - 0.05 = {}", est.exponent, s - 0.05);
    let e = within(t0, Duration::from_secs(300))?;
    Ok(format!("measured {:.2} vs s = {s}, {e:.2?}", est.exponent))
}

fn c09_product() -> Outcome {
    let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
    let one = [q(1, 1), q(1, 1)];
    let v = ok(product_dimension(&[q(1, 2), q(1, 3)], &one))?;
    check!(v == q(4, 3), "product dimension {v}");
    let (i, _) = ok(product_dimension_argmin(&[q(1, 2), q(1, 3)], &one))?;
    let f = [DimensionFunction::power(0.5), DimensionFunction::power(1.0 / 3.0)];
    let g = [DimensionFunction::power(1.0), DimensionFunction::power(1.0)];
    let (k, fk) = ok(product_dimension_functions(&f, &g))?;
    // s_i + Σ_{k≠i} δ_k for each i
    let sums = [0.5 + 1.0, 1.0 / 3.0 + 1.0];
    let imin = if sums[0] <= sums[1] { 0 } else { 1 };
    check!(k == imin && i == imin, "index {k} (argmin {i}) vs minimal exponent at {imin}");
    check!(fk.alpha == sums[imin] && fk.beta == 0.0, "f̃_k = r^{}", fk.alpha);
    Ok(format!("4/3 exact, index {} (0-based) with exponent {}", k, fk.alpha))
}

fn c10_kappa() -> Outcome {
    let t0 = Instant::now();
    let input = |resonant: Vec<Aabb>| KappaInput {
        resonant,
        samples: vec![vec![0.5, 0.5]],
        g_exponent: 2.0,
        eta_grid: (7..=12).map(|j| 0.5f64.powi(j)).collect(),
        r_grid: (3..=7).map(|j| 0.5f64.powi(j)).collect(),
        resolution: 9,
    };
    let point = ok(estimate_kappa(&input(vec![Aabb { lo: vec![0.5, 0.5], hi: vec![0.5, 0.5] }])))?;
    let line = ok(estimate_kappa(&input(vec![Aabb { lo: vec![0.0, 0.5], hi: vec![1.0, 0.5] }])))?;
    check!(point.kappa.abs() <= 0.05, "point κ = {}", point.kappa);
    check!((line.kappa - 0.5).abs() <= 0.05, "line κ = {}", line.kappa);
    let e = within(t0, Duration::from_secs(60))?;
    Ok(format!("point {:.4}, line {:.4}, {e:.2?}", point.kappa, line.kappa))
}

fn c11_critical_exponent() -> Outcome {
    let t0 = Instant::now();
    let q_max = 64u64;
    let balls = ok(generate_balls(&BallFamilySpec::rational(4.0, q_max), usize::MAX))?;
    // truncation start: the last dyadic block q > q_max / 2
    let start = 1 + balls.iter().position(|b| b.radius <= ((q_max / 2) as f64).powf(-4.0)).unwrap();
    let grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.05).collect();
    let est = ok(critical_exponent_of_family(&ball_sets(&balls), start, usize::MAX, 1, 10, &grid))?;
    check!(!est.saturated && !est.below_grid, "no crossing inside the grid");
    check!((0.35..=0.65).contains(&est.s), "critical exponent {}", est.s);
    Ok(format!("s = {:.4} (target 0.5), {:.2?}", est.s, t0.elapsed()))
}

fn c12_lip() -> Outcome {
    let f = DimensionFunction::power(1.0);
    let balls = ok(generate_balls(&BallFamilySpec::rational(2.0, 64), usize::MAX))?;
    let sets = ball_sets(&balls);
    let probes = [1, 2, 3];
    let base = ok(truncate_limsup(&sets, 1, usize::MAX, 1, 8))?;
    let c = ok(lip_verify(&base, &f, &probes))?;
    check!(c.passed && c.c_measured >= 0.9, "Dirichlet truncation c = {} ({:?})", c.c_measured, c.failure);
    let a = ok(truncate_limsup(&ok(shifted_sets(&sets, &[0.5 * (5f64.sqrt() - 1.0)]))?, 1, usize::MAX, 1, 8))?;
    let b = ok(truncate_limsup(&ok(shifted_sets(&sets, &[2f64.sqrt() - 1.0]))?, 1, usize::MAX, 1, 8))?;
    let ab = ok(a.intersection(&b))?;
    let cab = ok(lip_verify(&ab, &f, &probes))?;
    check!(cab.passed && cab.c_measured >= 0.5, "intersection c = {} ({:?})", cab.c_measured, cab.failure);
    Ok(format!("c = {:.4}, shifted intersection c = {:.4}", c.c_measured, cab.c_measured))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("limsup of s(t_n) on the LLVZ example", c01_llvz_limsup),
        ("Jarnik-Besicovitch via the dimension number", c02_jarnik_formula),
        ("LP strong duality", c03_lp_duality),
        ("net content equals the cut enumeration", c04_net_content_exact),
        ("Frostman sandwich", c05_frostman_sandwich),
        ("covering invariants", c06_covering),
        ("Cantor construction on the Jarnik fixture", c07_cantor),
        ("rectangle Holder exponent", c08_rectangle_exponent),
        ("product formula", c09_product),
        ("kappa scaling", c10_kappa),
        ("critical exponent proxy", c11_critical_exponent),
        ("LIP certificate", c12_lip),
    ];
    let mut failed = BTreeSet::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match out {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
                failed.insert(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
