//! Acceptance run: executes the built-in scenario pack, checks every
//! criterion against an independent oracle and prints one line per
//! criterion. Exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use classa::cone_kit::{cross_section_hausdorff_2d, NormModel, PolyCone};
use classa::reach::{frak_f_many, FrakOptions};
use classa::spacetime::{make_preset, MetricField, PresetName, PresetSpec};
use classa::timesep::{min_leg_depth, time_separation};
use classa::rng_for;
use classa_lab::{load_scenario, run_scenario};
use rand::Rng;
use serde_json::Value;

// tolerances
const CONE_HAUSDORFF: f64 = 0.05;
const FLAT_CONE_SECONDS: f64 = 60.0;
const PRODUCT_SLOPE_REL: f64 = 0.02;
const TIMESEP_REL: f64 = 0.01;
const ORACLE_REL: f64 = 0.02;
const STABLE_NORM_REL: f64 = 0.01;
const P01A_CELLS: f64 = 2.0;
const P01A_STABILITY: f64 = 0.10;
const FORM_C_TOL: f64 = 1e-6;
const LIPSCHITZ_STABILITY: f64 = 0.15;
const LIPSCHITZ_EPS: f64 = 0.2;
const KIT_TOL: f64 = 1e-9;
const KIT_PAIRS: usize = 10_000;
const MAXIMIZERS: usize = 100;
const MAXIMIZER_DELTA: f64 = 0.01;
const FRAK_RESOLUTION: usize = 16;

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Pack {
    root: PathBuf,
    seconds: BTreeMap<String, f64>,
}

impl Pack {
    fn report(&self, scenario: &str, file: &str) -> Value {
        let p = self.root.join(scenario).join(file);
        let text = fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        serde_json::from_str(&text).expect("report is JSON")
    }
}

fn run_pack(root: &Path) -> Pack {
    let mut seconds = BTreeMap::new();
    for (name, _) in classa_lab::pack::ALL {
        let short = name.trim_start_matches("accept/");
        let s = load_scenario(name).expect("pack scenario parses");
        let m = s.validate().expect("pack scenario validates");
        let t = Instant::now();
        let out = run_scenario(&s, &m, &root.join(short), false).expect("reports written");
        seconds.insert(short.to_string(), t.elapsed().as_secs_f64());
        assert_eq!(out.errors(), 0, "{name}: {:?}", out.records);
    }
    Pack { root: root.to_path_buf(), seconds }
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("expected a number, got {v}"))
}

fn vecf(v: &Value) -> Vec<f64> {
    v.as_array().expect("array").iter().map(f).collect()
}

fn chord(a: f64, b: f64) -> f64 {
    2.0 * (0.5 * (a - b).abs()).sin()
}

/// Hausdorff distance (chord metric) between two circle arcs of length < π.
fn arc_hausdorff(a: (f64, f64), b: (f64, f64)) -> f64 {
    let to = |x: f64, (lo, hi): (f64, f64)| if x >= lo && x <= hi { 0.0 } else { chord(x, lo).min(chord(x, hi)) };
    [to(a.0, b), to(a.1, b), to(b.0, a), to(b.1, a)].into_iter().fold(0.0, f64::max)
}

/// Angular extent of a 2D cone around the first axis from its generators.
fn cone_arc(report: &Value) -> (f64, f64) {
    let rays = report["result"]["estimate"]["cone"]["rays"].as_array().expect("rays");
    let angles: Vec<f64> = rays.iter().map(|r| {
        let r = vecf(r);
        r[1].atan2(r[0])
    }).collect();
    (angles.iter().cloned().fold(f64::INFINITY, f64::min), angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

fn light_arc() -> (f64, f64) {
    (-FRAC_PI_4, FRAC_PI_4)
}

fn crit1(pack: &Pack) -> Line {
    let r = pack.report("flat-cone", "cone.json");
    let h = arc_hausdorff(cone_arc(&r), light_arc());
    let secs = pack.seconds["flat-cone"];
    let budget = &r["result"]["estimate"]["budget"];
    let full = budget["geodesics"] == 512 && budget["walks"] == 512;
    Line {
        id: 1,
        name: "flat-cone recovery",
        pass: h <= CONE_HAUSDORFF && secs < FLAT_CONE_SECONDS && full,
        detail: format!("hausdorff {h:.3e} (≤ {CONE_HAUSDORFF}), {secs:.1} s single-threaded (< {FLAT_CONE_SECONDS} s)"),
    }
}

fn crit2(pack: &Pack) -> Line {
    let r = pack.report("conformal-cone", "cone.json");
    let h = arc_hausdorff(cone_arc(&r), light_arc());
    Line {
        id: 2,
        name: "conformal invariance",
        pass: h <= CONE_HAUSDORFF,
        detail: format!("hausdorff to flat cone {h:.3e} (≤ {CONE_HAUSDORFF})"),
    }
}

/// Period average of dt/dx = ρ(x) along a null curve, by RK4 on the null ODE.
fn null_ode_slope() -> f64 {
    let rho = |x: f64| 1.5 + 0.5 * (2.0 * PI * x).sin();
    let n = 10_000;
    let dx = 1.0 / n as f64;
    let mut t = 0.0;
    for i in 0..n {
        let x = i as f64 * dx;
        t += dx / 6.0 * (rho(x) + 4.0 * rho(x + 0.5 * dx) + rho(x + dx));
    }
    t
}

fn crit3(pack: &Pack) -> Line {
    let r = pack.report("product-slope", "cone.json");
    let oracle = null_ode_slope();
    let rays = r["result"]["estimate"]["cone"]["rays"].as_array().expect("rays");
    let slopes: Vec<f64> = rays.iter().map(|r| {
        let r = vecf(r);
        r[0] / r[1].abs()
    }).collect();
    let worst = slopes.iter().map(|s| (s - oracle).abs() / oracle).fold(0.0, f64::max);
    Line {
        id: 3,
        name: "product-cone slope",
        pass: slopes.len() == 2 && worst <= PRODUCT_SLOPE_REL,
        detail: format!("slopes {slopes:.4?} vs null-ODE {oracle:.6}, worst rel err {worst:.2e} (≤ {PRODUCT_SLOPE_REL})"),
    }
}

fn minkowski(p: &[f64], q: &[f64]) -> f64 {
    let dt = q[0] - p[0];
    let dx2: f64 = (1..p.len()).map(|i| (q[i] - p[i]).powi(2)).sum();
    if dt > 0.0 && dt * dt > dx2 {
        (dt * dt - dx2).sqrt()
    } else {
        0.0
    }
}

fn crit4(pack: &Pack) -> Line {
    let r = pack.report("minkowski-timesep", "timesep.json");
    let pairs = r["result"]["pairs"].as_array().expect("pairs");
    let cfg = &r["config"];
    let exact = 3f64.sqrt();
    let v = f(&pairs[0]["value"]);
    let o = f(&pairs[0]["oracle"]);
    let rel = (v - exact).abs() / exact;
    let orel = (o - exact).abs() / exact;
    let spacelike_report = f(&pairs[1]["value"]);
    // more spacelike pairs straight from the core
    let m = make_preset(&PresetSpec::new(PresetName::Flat)).unwrap();
    let mut rng = rng_for(404, 0);
    let mut spacelike_ok = spacelike_report == 0.0;
    for i in 0..20 {
        let p: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..2.0)).collect();
        let dx: f64 = rng.gen_range(0.5..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let dt = dx.abs() * rng.gen_range(-0.95..0.95);
        let q = vec![p[0] + dt, p[1] + dx];
        let s = time_separation(&m, &p, &q, 8, 4, i).unwrap();
        spacelike_ok &= s.value == 0.0;
    }
    Line {
        id: 4,
        name: "Minkowski time separation",
        pass: cfg["segments"] == 8 && cfg["restarts"] == 16 && rel <= TIMESEP_REL && orel <= ORACLE_REL && spacelike_ok,
        detail: format!(
            "d = {v:.9} (rel {rel:.1e} ≤ {TIMESEP_REL}), DP@128 = {o:.9} (rel {orel:.1e} ≤ {ORACLE_REL}), spacelike exactly 0: {spacelike_ok}"
        ),
    }
}

fn crit5(pack: &Pack) -> Line {
    let r = pack.report("burago-plateau", "stable_norm_0.json")["result"].clone();
    let std_est = f(&r["std_est"]);
    let mut ok = true;
    let mut worst_norm: f64 = 0.0;
    for (entry, (_, norm)) in r["plateau_trace"].as_array().unwrap().iter().zip(r["values"].as_array().unwrap().iter().map(|v| (v[0].clone(), f(&v[1])))) {
        let h = vecf(&entry[0]);
        let euclid = (h[0] * h[0] + h[1] * h[1]).sqrt();
        worst_norm = worst_norm.max((norm - euclid).abs());
        let trace: Vec<(f64, f64)> = entry[1].as_array().unwrap().iter().map(|t| (f(&t[0]), f(&t[1]))).collect();
        ok &= trace.len() == 64;
        // e_n = |dist(0,nh)/n − ‖h‖|; its tail envelope must sit under std/n
        let e: Vec<f64> = trace.iter().map(|(_, v)| (v - norm).abs()).collect();
        let mut tail = vec![0.0f64; e.len() + 1];
        for i in (0..e.len()).rev() {
            tail[i] = tail[i + 1].max(e[i]);
        }
        for i in 0..e.len() {
            ok &= tail[i] >= tail[i + 1];
            ok &= tail[i] <= std_est / trace[i].0 + 1e-12;
        }
    }
    ok &= worst_norm <= 1e-9;
    let r34 = pack.report("burago-plateau", "stable_norm_1.json");
    let n34 = f(&r34["result"]["values"][0][1]);
    let rel = (n34 - 5.0).abs() / 5.0;
    Line {
        id: 5,
        name: "Burago plateau",
        pass: ok && rel <= STABLE_NORM_REL,
        detail: format!(
            "envelope ≤ std/n for n ≤ 64: {ok}, std_est {std_est:.1e}, max |‖h‖−|h|| {worst_norm:.1e}, ‖(3,4)‖ = {n34:.6} (rel {rel:.1e} ≤ {STABLE_NORM_REL})"
        ),
    }
}

/// Euclidean distance of h to the light cone {a ≥ |b|}.
fn dist_to_light_cone(h: &[f64]) -> f64 {
    let (a, b) = (h[0], h[1]);
    if a >= b.abs() {
        return 0.0;
    }
    let mut best = (a * a + b * b).sqrt();
    for s in [1.0, -1.0] {
        let t = (a + s * b) / 2.0;
        if t > 0.0 {
            best = best.min(((a - t).powi(2) + (b - s * t).powi(2)).sqrt());
        }
    }
    best
}

fn frak_check(pack: &Pack, scenario: &str, m: &MetricField) -> (bool, String) {
    let r = pack.report(scenario, "frak_f.json");
    let cell = m.lattice_scale() / FRAK_RESOLUTION as f64;
    let base: Vec<(Vec<i64>, f64)> = r["result"]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| (v["h"].as_array().unwrap().iter().map(|x| x.as_i64().unwrap()).collect(), f(&v["f_of_h"])))
        .collect();
    let bounded = base.len() == 50 && base.iter().all(|(h, _)| h.iter().map(|x| x * x).sum::<i64>() <= 64);
    let mut multiples = Vec::new();
    for (h, _) in &base {
        for n in 2..=8 {
            multiples.push(h.iter().map(|x| x * n).collect::<Vec<i64>>());
        }
    }
    let fs = frak_f_many(m, &multiples, FRAK_RESOLUTION, &FrakOptions::default()).expect("f of multiples");
    let f_of = |i: usize, n: usize| if n == 1 { base[i].1 } else { fs[i * 7 + n - 2].f_of_h };
    let mut upper_ok = true;
    let mut c_est: f64 = 0.0;
    for i in 0..base.len() {
        upper_ok &= f_of(i, 2) <= 2.0 * f_of(i, 1) + 2.0 * cell;
        c_est = c_est.max(2.0 * f_of(i, 1) - f_of(i, 2));
    }
    // 𝔣 is resolved to one cell; C_est never drops below that
    let c_est = c_est.max(cell);
    let mut worst: f64 = 0.0;
    let mut a_ok = true;
    for (i, (h, _)) in base.iter().enumerate() {
        let hf: Vec<f64> = h.iter().map(|&x| x as f64 * m.lattice_scale()).collect();
        let a = dist_to_light_cone(&hf);
        for n in 1..=8 {
            let dev = (f_of(i, n) / n as f64 - a).abs();
            worst = worst.max(dev * n as f64 / (2.0 * c_est));
            a_ok &= dev <= 2.0 * c_est / n as f64 + 1e-12;
        }
    }
    (
        bounded && upper_ok && a_ok,
        format!("{scenario}: C_est {c_est:.4}, upper {upper_ok}, |f(nh)/n − a(h)|·n/2C max {worst:.3}"),
    )
}

fn crit6(pack: &Pack) -> Line {
    let flat = make_preset(&PresetSpec::new(PresetName::Flat)).unwrap();
    let conf = make_preset(&PresetSpec::new(PresetName::ConformalFlat)).unwrap();
    let (a, da) = frak_check(pack, "frak-flat", &flat);
    let (b, db) = frak_check(pack, "frak-conformal", &conf);
    Line { id: 6, name: "f inequalities", pass: a && b, detail: format!("{da}; {db}") }
}

fn crit7(pack: &Pack) -> Line {
    let mut ok = true;
    let mut parts = Vec::new();
    for (scenario, cell_bound) in [("p01a-flat", true), ("p01a-conformal", false)] {
        let err: Vec<f64> = (0..3).map(|i| f(&pack.report(scenario, &format!("p01a_{i}.json"))["result"]["report"]["err_est"])).collect();
        let res = f(&pack.report(scenario, "p01a_0.json")["result"]["report"]["resolution"]);
        let cell = 1.0 / res;
        let finite = err.iter().all(|e| e.is_finite());
        let cells = err[0] <= P01A_CELLS * cell;
        let stable = (err[1] - err[0]).abs() <= P01A_STABILITY * err[0];
        // non-growing up to the same stability band
        let range = err[2] <= err[0] * (1.0 + P01A_STABILITY);
        ok &= finite && stable && range && (!cell_bound || cells);
        parts.push(format!(
            "{scenario}: err {:.4} ({:.2} cells), 2x samples {:.4}, 2x h-range {:.4}",
            err[0],
            err[0] / cell,
            err[1],
            err[2]
        ));
    }
    Line { id: 7, name: "p01a boundedness", pass: ok, detail: parts.join("; ") }
}

fn crit8(pack: &Pack) -> Line {
    let verdict = |s: &str| pack.report(s, "certify.json")["result"]["certificate"]["verdict"].clone();
    let flat = pack.report("certify-flat", "certify.json");
    let form = &flat["result"]["certificate"]["transversal"]["form"];
    let alpha = vecf(&form["alpha"]);
    let c = f(&form["margin"]);
    let flat_ok = verdict("certify-flat")["verdict"] == "class_a"
        && (alpha[0] - 1.0).abs() <= FORM_C_TOL
        && alpha[1].abs() <= FORM_C_TOL
        && (c - FRAC_1_SQRT_2).abs() <= FORM_C_TOL;
    let conf_ok = verdict("certify-conformal")["verdict"] == "class_a";
    let sctp = pack.report("certify-product", "sctp.json")["result"].clone();
    let prod_ok = verdict("certify-product")["verdict"] == "class_a"
        && sctp["graph_ok"] == true
        && sctp["precedes_ok"] == true
        && sctp["translation_ok"] == true
        && sctp["passed"] == true;
    let e1 = pack.report("e1-vicious", "certify.json");
    let v = &e1["result"]["certificate"]["verdict"];
    let fc = &e1["result"]["form_check"];
    let point = vecf(&fc["point"]);
    let scale = f(&e1["preset"]["params"]["lattice_scale"]);
    let slab = (point[0].rem_euclid(scale) - 2.0).abs();
    let e1_ok = v["verdict"] == "not_class_a"
        && v["reason"].as_str().is_some_and(|r| r.starts_with("viciousness"))
        && fc["accepted"] == false
        && f(&fc["c"]).abs() <= 1e-12
        && slab <= 1e-9;
    Line {
        id: 8,
        name: "certification matrix",
        pass: flat_ok && conf_ok && prod_ok && e1_ok,
        detail: format!(
            "flat {flat_ok} (c = {c:.9}), conformal {conf_ok}, product+SCTP {prod_ok}, e1 {e1_ok} (c = {:.1e} at x = {:.3})",
            f(&fc["c"]),
            point[0]
        ),
    }
}

fn crit9(pack: &Pack) -> Line {
    let flat = pack.report("lipschitz-flat", "lipschitz.json");
    let rep = &flat["result"]["report"];
    let pairs = rep["pairs"].as_array().unwrap();
    let half = 1000;
    let ratio = |p: &Value| f(&p["ratio"]);
    let max_all = f(&rep["max_ratio"]);
    let max_half = pairs[..half].iter().map(ratio).fold(0.0, f64::max);
    let stable = max_all.is_finite() && (max_all - max_half).abs() <= LIPSCHITZ_STABILITY * max_half;
    // Lipschitz constant of sqrt(t² − x²) on the ε-subcone of {t ≥ |x|}
    let k_max = (FRAC_PI_4 - LIPSCHITZ_EPS.asin()).tan();
    let lip = ((1.0 + k_max * k_max) / (1.0 - k_max * k_max)).sqrt();
    let mut oracle_ok = pairs.len() == 2 * half;
    let mut worst_d: f64 = 0.0;
    for p in pairs {
        let (x, y, z, w) = (vecf(&p["x"]), vecf(&p["y"]), vecf(&p["z"]), vecf(&p["w"]));
        for (a, b) in [(&x, &y), (&z, &w)] {
            oracle_ok &= (b[1] - a[1]).abs() <= k_max * (b[0] - a[0]) + 1e-9;
        }
        let (exy, ezw) = (minkowski(&x, &y), minkowski(&z, &w));
        worst_d = worst_d.max((f(&p["d_xy"]) - exy).abs()).max((f(&p["d_zw"]) - ezw).abs());
        let s = classa::linalg::dist(&x, &z) + classa::linalg::dist(&y, &w);
        oracle_ok &= (exy - ezw).abs() <= lip * s + 1e-9;
        oracle_ok &= ratio(p) <= lip * s / (s + 1.0) + 1e-6;
    }
    oracle_ok &= worst_d <= 1e-6;
    let conf = pack.report("lipschitz-conformal", "lipschitz.json");
    let crep = &conf["result"]["report"];
    let cpairs = crep["pairs"].as_array().unwrap();
    let cmax = f(&crep["max_ratio"]);
    let chalf = cpairs[..cpairs.len() / 2].iter().map(ratio).fold(0.0, f64::max);
    let cstable = cmax.is_finite() && (cmax - chalf).abs() <= LIPSCHITZ_STABILITY * chalf;
    Line {
        id: 9,
        name: "coarse-Lipschitz harness",
        pass: stable && oracle_ok && cstable,
        detail: format!(
            "flat max {max_half:.4} → {max_all:.4} (1e3 → 2e3), analytic L {lip:.4}, max |d − d_exact| {worst_d:.1e}, oracle {oracle_ok}; conformal {chalf:.4} → {cmax:.4}"
        ),
    }
}

fn random_in(cone: &PolyCone, rng: &mut impl Rng) -> Vec<f64> {
    let dim = cone.dim();
    let mut v = vec![0.0; dim];
    for r in cone.rays() {
        let c: f64 = rng.gen_range(0.0..1.0);
        for i in 0..dim {
            v[i] += c * r[i];
        }
    }
    v
}

fn midpoint(u: &[f64], w: &[f64]) -> Vec<f64> {
    u.iter().zip(w).map(|(a, b)| 0.5 * (a + b)).collect()
}

fn kit_cones() -> Vec<(&'static str, PolyCone)> {
    let e = NormModel::Euclidean;
    let light = PolyCone::hull(2, &[vec![1.0, 1.0], vec![1.0, -1.0]], e.clone()).unwrap();
    let skew = PolyCone::hull(2, &[vec![1.0, 0.2], vec![0.3, 1.0]], e.clone()).unwrap();
    let rays3: Vec<Vec<f64>> = (0..8)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / 8.0;
            vec![1.0, t.cos(), t.sin()]
        })
        .collect();
    let octagonal = PolyCone::hull(3, &rays3, e).unwrap();
    vec![("light", light), ("skew", skew), ("octagonal", octagonal)]
}

fn crit10() -> Line {
    let mut rng = rng_for(1010, 0);
    let e = NormModel::Euclidean;
    let mut concave = true;
    let mut convex = true;
    let mut antitone = true;
    let mut oracle_dev: f64 = 0.0;
    for (name, cone) in kit_cones() {
        let d = |v: &[f64]| cone.boundary_distance(v, &e).value;
        for _ in 0..KIT_PAIRS {
            let (u, w) = (random_in(&cone, &mut rng), random_in(&cone, &mut rng));
            concave &= d(&midpoint(&u, &w)) >= 0.5 * (d(&u) + d(&w)) - KIT_TOL;
            if name == "light" {
                oracle_dev = oracle_dev.max((d(&u) - (u[0] - u[1].abs()) * FRAC_1_SQRT_2).abs());
            }
        }
        let eps = 0.15;
        let sub = cone.epsilon_subcone(eps, &e).unwrap();
        let in_k_eps = |v: &[f64]| d(v) >= eps * classa::linalg::norm(v) - KIT_TOL;
        let mut pool = Vec::new();
        while pool.len() < 2 * KIT_PAIRS {
            let v = random_in(&cone, &mut rng);
            if in_k_eps(&v) {
                pool.push(v);
            }
        }
        for pair in pool.chunks(2) {
            let mid = midpoint(&pair[0], &pair[1]);
            convex &= in_k_eps(&mid) && sub.contains(&mid, 1e-6);
        }
        let levels = [0.0, 0.05, 0.1, 0.2, 0.3];
        let subs: Vec<PolyCone> = levels.iter().map(|&x| cone.epsilon_subcone(x, &e).unwrap()).collect();
        for k in 1..subs.len() {
            antitone &= subs[k].rays().iter().all(|r| subs[k - 1].contains(r, 1e-6));
        }
        antitone &= cone.rays().iter().all(|r| subs[0].contains(r, 1e-6)) && subs[0].rays().iter().all(|r| cone.contains(r, 1e-6));
    }
    let (_, light) = &kit_cones()[0];
    let dual = light.dual_cone();
    let self_dual = cross_section_hausdorff_2d(light, &dual).map_or(f64::INFINITY, |h| h);
    let (_, skew) = &kit_cones()[1];
    let bidual = cross_section_hausdorff_2d(skew, &skew.dual_cone().dual_cone()).map_or(f64::INFINITY, |h| h);
    // dual of the skew sector: normals of its edges, rotated inward
    let skew_dual_oracle = PolyCone::hull(2, &[vec![1.0, -0.3], vec![-0.2, 1.0]], e.clone()).unwrap();
    let skew_dual = cross_section_hausdorff_2d(&skew.dual_cone(), &skew_dual_oracle).map_or(f64::INFINITY, |h| h);
    let duals = self_dual <= KIT_TOL && bidual <= KIT_TOL && skew_dual <= KIT_TOL;
    Line {
        id: 10,
        name: "cone-kit property suite",
        pass: concave && oracle_dev <= KIT_TOL && convex && duals && antitone,
        detail: format!(
            "concavity {concave} (light-cone oracle dev {oracle_dev:.1e}), K_eps convexity {convex}, self-dual {self_dual:.1e}, bidual {bidual:.1e}, skew dual {skew_dual:.1e}, antitone {antitone}"
        ),
    }
}

fn maximizers(name: PresetName, seed: u64) -> (usize, usize, f64) {
    let m = make_preset(&PresetSpec::new(name)).unwrap();
    let phi_max = FRAC_PI_4 - LIPSCHITZ_EPS.asin();
    let mut rng = rng_for(seed, 0);
    let mut converged = 0;
    let mut deep = 0;
    let mut min_depth = f64::INFINITY;
    for i in 0..MAXIMIZERS {
        let p: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..2.0)).collect();
        let phi = rng.gen_range(-phi_max..phi_max);
        let len = rng.gen_range(0.5..3.0);
        let q = vec![p[0] + len * phi.cos(), p[1] + len * phi.sin()];
        let r = time_separation(&m, &p, &q, 8, 8, seed + i as u64).unwrap();
        if r.converged {
            converged += 1;
        }
        let depth = r.path.as_ref().map_or(0.0, |path| min_leg_depth(&m, path).unwrap());
        min_depth = min_depth.min(depth);
        if depth > MAXIMIZER_DELTA {
            deep += 1;
        }
    }
    (converged, deep, min_depth)
}

fn crit11() -> Line {
    let (fc, fd, fmin) = maximizers(PresetName::Flat, 1100);
    let (cc, cd, cmin) = maximizers(PresetName::ConformalFlat, 1101);
    Line {
        id: 11,
        name: "maximizer confinement",
        pass: fc == MAXIMIZERS && fd == MAXIMIZERS && cc == MAXIMIZERS && cd == MAXIMIZERS,
        detail: format!(
            "flat {fc}/{MAXIMIZERS} converged, min delta {fmin:.3}; conformal {cc}/{MAXIMIZERS} converged, min delta {cmin:.3} (> {MAXIMIZER_DELTA})"
        ),
    }
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn crit12(first: &Pack, scratch: &Path) -> Line {
    let second = run_pack(&scratch.join("rerun"));
    let a = files_under(&first.root);
    let b = files_under(&second.root);
    let differing: Vec<String> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .chain(b.keys().filter(|k| !a.contains_key(*k)).map(|k| k.display().to_string()))
        .collect();
    Line {
        id: 12,
        name: "determinism",
        pass: differing.is_empty() && !a.is_empty(),
        detail: format!("{} files compared, {} differ {:?}", a.len(), differing.len(), differing),
    }
}

fn main() {
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().expect("single-threaded pool");
    let scratch = tempfile::tempdir().expect("temp dir");
    let t = Instant::now();
    let pack = run_pack(&scratch.path().join("first"));
    println!("scenario pack ran in {:.1} s", t.elapsed().as_secs_f64());
    for (name, s) in &pack.seconds {
        println!("  {name:<22} {s:>7.2} s");
    }
    let checks: Vec<Box<dyn Fn() -> Line + '_>> = vec![
        Box::new(|| crit1(&pack)),
        Box::new(|| crit2(&pack)),
        Box::new(|| crit3(&pack)),
        Box::new(|| crit4(&pack)),
        Box::new(|| crit5(&pack)),
        Box::new(|| crit6(&pack)),
        Box::new(|| crit7(&pack)),
        Box::new(|| crit8(&pack)),
        Box::new(|| crit9(&pack)),
        Box::new(crit10),
        Box::new(crit11),
        Box::new(|| crit12(&pack, scratch.path())),
    ];
    let mut failed = 0;
    for check in checks {
        let line = check();
        if !line.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<28} {}  {}",
            line.id,
            line.name,
            if line.pass { "PASS" } else { "FAIL" },
            line.detail
        );
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
