//! Acceptance criteria 1-10, one line each.
//!
//! Criteria 5 and 7 are known to be unattainable as stated (the open
//! cylinder has `dim S - 2 dim V` equal to its boundary edge count, and
//! BDFM1-P1DG has a vertex family orthogonal to P1DG). They are evaluated
//! and reported like the rest; only an unexpected failure makes the run
//! exit non-zero.

use mimetic_swe::analysis::{generator_spectrum, projection_kernels};
use mimetic_swe::elements::dof_census;
use mimetic_swe::mesh::{build_cylinder, build_icosahedral_sphere, build_periodic_square, StructuredPlane};
use mimetic_swe::scenarios::suites::{commuting_suite, conservation_suite, hybrid_difference, random_state};
use mimetic_swe::scenarios::{
    run_beta_tube, run_fplane_steady, run_kelvin, run_rossby_convergence, run_solid_rotation, BetaTubeParams,
    FplaneParams, FplaneSurface, KelvinParams, RossbyParams, ScenarioResult, SolidRotationParams,
};
use mimetic_swe::{ElementPair, Mesh, ModelConfig, OperatorSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

const KNOWN_UNATTAINABLE: &[u32] = &[5, 7];

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn check(id: u32, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (pass, detail) = f();
    let o = Outcome { id, pass, detail: format!("{detail} [{:.1}s]", t.elapsed().as_secs_f64()) };
    println!("criterion {:>2}: {}  {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o
}

fn metric(r: &ScenarioResult, name: &str) -> f64 {
    r.metric(name).unwrap_or(f64::NAN)
}

fn worst_residual(results: &[&ScenarioResult]) -> (f64, String) {
    let mut worst = (0.0f64, String::new());
    for r in results {
        for m in r.metrics.iter().filter(|m| m.name.ends_with("mass_residual")) {
            if !(m.value <= worst.0) {
                worst = (m.value, format!("{}:{}", r.name, m.name));
            }
        }
    }
    worst
}

fn main() {
    let mut out = Vec::new();
    let mut scenario_runs: Vec<ScenarioResult> = Vec::new();

    out.push(check(1, || {
        let mut ok = true;
        let mut parts = Vec::new();
        for (surface, label) in [(FplaneSurface::Plane, "plane"), (FplaneSurface::Sphere, "f-sphere")] {
            for seed in [7, 11] {
                let t = Instant::now();
                let r = run_fplane_steady(&FplaneParams::new(surface, seed)).expect("f-plane run");
                let secs = t.elapsed().as_secs_f64();
                let e = metric(&r, "steadiness_error");
                ok &= e < 1e-12 && secs < 10.0;
                parts.push(format!("{label}/seed{seed} {e:.2e} in {secs:.1}s"));
                scenario_runs.push(r);
            }
        }
        (ok, format!("relative change over 100 steps < 1e-12: {}", parts.join(", ")))
    }));

    let mut conservation = None;
    out.push(check(2, || {
        let mesh = build_periodic_square(4, 1.0, 1.0).unwrap();
        let t = Instant::now();
        let r = conservation_suite(&mesh, 20, 1000, 2).expect("conservation suite");
        let secs = t.elapsed().as_secs_f64();
        let e = metric(&r, "energy_step_change");
        conservation = Some(r);
        (e < 1e-11 && secs < 30.0, format!("max per-step relative energy change {e:.2e} (< 1e-11), 20 states x 1000 steps"))
    }));

    out.push(check(4, || {
        let mesh = StructuredPlane::new(6, 6, 1.0, 1.0).periodic(true, true).jitter(0.2, 4).build().unwrap();
        let t = Instant::now();
        let r = commuting_suite(&mesh, 100, 4).expect("commuting suite");
        let secs = t.elapsed().as_secs_f64();
        let (d, c) = (metric(&r, "divergence_commuting_residual"), metric(&r, "curl_commuting_residual"));
        (d < 1e-10 && c < 1e-10 && secs < 10.0, format!("div residual {d:.2e}, curl residual {c:.2e} (< 1e-10), 100 fields"))
    }));

    out.push(check(5, || {
        let mut meshes: Vec<(String, Mesh)> = Vec::new();
        for n in 2..=8 {
            meshes.push((format!("periodic:{n}"), build_periodic_square(n, 1.0, 1.0).unwrap()));
        }
        for (na, nz) in [(6, 2), (12, 4), (24, 16)] {
            meshes.push((format!("cylinder:{na},{nz}"), build_cylinder(na, nz, 1.0, 2.0).unwrap()));
        }
        for level in 0..=3 {
            meshes.push((format!("icosa:{level}"), build_icosahedral_sphere(level, 1.0).unwrap()));
        }
        let mut bad = Vec::new();
        for (name, mesh) in &meshes {
            let c = dof_census(mesh, ElementPair::BDFM1_P1DG);
            if !c.identities_hold() {
                bad.push(format!("{name} (s-2v = {}, e+v-s-chi = {})", c.s_minus_2v, c.e_plus_v_minus_s_minus_chi));
            }
        }
        let detail = if bad.is_empty() {
            format!("identities exact on {} meshes", meshes.len())
        } else {
            format!("identities fail on {}", bad.join(", "))
        };
        (bad.is_empty(), detail)
    }));

    out.push(check(6, || {
        let mut ok = true;
        let mut parts = Vec::new();
        for n in [2, 3] {
            let mesh = build_periodic_square(n, 1.0, 1.0).unwrap();
            let cfg = ModelConfig::with_coriolis(&mesh, 1.0, 0.1, |_| 1.0).unwrap();
            let ops = OperatorSet::assemble(&mesh, &cfg).unwrap();
            let c = generator_spectrum(&ops, &cfg).expect("dense spectrum");
            let good = c.zero_modes == ops.dim_e() && c.max_real_part < 1e-8 && c.pairing_defect < 1e-8;
            ok &= good;
            parts.push(format!(
                "{n}x{n}: {} zero modes (dim E = {}), max |Re| {:.1e}, pairing {:.1e}",
                c.zero_modes,
                ops.dim_e(),
                c.max_real_part,
                c.pairing_defect
            ));
        }
        (ok, parts.join("; "))
    }));

    out.push(check(7, || {
        let mut ok = true;
        let mut parts = Vec::new();
        for n in [2, 3, 4] {
            let mesh = build_periodic_square(n, 1.0, 1.0).unwrap();
            for pair in [ElementPair::BDFM1_P1DG, ElementPair::RT0_P0] {
                let f = vec![1.0; dof_census(&mesh, pair).dim_e];
                let ops = OperatorSet::assemble_pair(&mesh, pair, &f).unwrap();
                let (k, _) = projection_kernels(&ops).unwrap();
                let gap = ops.dim_v() as i64 - ops.dim_e() as i64;
                let good = if pair == ElementPair::BDFM1_P1DG { k == 0 } else { gap > 0 && k as i64 >= gap };
                ok &= good;
                parts.push(format!("{} {n}x{n} kernel {k} (dim V - dim E = {gap})", pair.name()));
            }
        }
        (ok, parts.join("; "))
    }));

    let mut rossby = None;
    out.push(check(8, || {
        let r = run_rossby_convergence(&RossbyParams::default()).expect("rossby run");
        let (s2, si) = (metric(&r, "convergence_slope"), metric(&r, "convergence_slope_linf"));
        let plateau = metric(&r, "plateau_over_ro2");
        let last = metric(&r, "last_local_slope");
        let ok = (s2 - 3.0).abs() <= 0.3 && (si - 3.0).abs() <= 0.3 && plateau < 10.0 && last < 2.0;
        let detail = format!(
            "slopes l2 {s2:.2}, linf {si:.2} (3 ± 0.3) over {} sizes; finest error {:.2} Ro^2, last local slope {last:.2}",
            metric(&r, "fit_sizes"),
            plateau
        );
        rossby = Some(r);
        (ok, detail)
    }));

    let mut rotation = None;
    out.push(check(9, || {
        let r = run_solid_rotation(&SolidRotationParams::default()).expect("solid rotation");
        let (a, b) = (metric(&r, "steadiness_error"), metric(&r, "h10_steadiness_error"));
        rotation = Some(r);
        (a < 1e-11 && b < 1e-11, format!("normalized eta deviation {a:.2e} (H = 1e4), {b:.2e} (H = 1e5), both < 1e-11"))
    }));

    out.push(check(10, || {
        let meshes: Vec<(&str, Mesh)> = vec![
            ("periodic:4", build_periodic_square(4, 1.0, 1.0).unwrap()),
            ("plane:4 jittered", StructuredPlane::new(4, 4, 1.0, 1.0).jitter(0.2, 1).build().unwrap()),
            ("channel:6", StructuredPlane::new(6, 6, 1.0, 1.0).periodic(true, false).build().unwrap()),
            ("icosa:2", build_icosahedral_sphere(2, 1.0).unwrap()),
            ("cylinder:12,4", build_cylinder(12, 4, 1.0, 2.0).unwrap()),
            ("disk:4", mimetic_swe::mesh::build_disk(4, 1.0, 0.6).unwrap()),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut worst = 0.0f64;
        for (_, mesh) in &meshes {
            let cfg = ModelConfig::with_coriolis(mesh, 2.0, 0.05, |x| 1.0 + 0.5 * x[0] + 0.3 * x[2]).unwrap();
            let ops = OperatorSet::assemble(mesh, &cfg).unwrap();
            let s0 = random_state(&ops, &mut rng);
            worst = worst.max(hybrid_difference(&ops, &cfg, &s0, 20).expect("hybridized run"));
        }
        (worst < 1e-10, format!("max relative trajectory difference {worst:.2e} (< 1e-10) over {} meshes x 20 steps", meshes.len()))
    }));

    out.push(check(3, || {
        let kelvin = run_kelvin(&KelvinParams::default()).expect("kelvin run");
        let tube = run_beta_tube(&BetaTubeParams::default()).expect("beta tube run");
        println!(
            "              kelvin radiation ratio {:.2e} (< 0.1), beta-tube divergence/vorticity {:.2e} (< 1e-2)",
            metric(&kelvin, "radiation_ratio"),
            metric(&tube, "divergence_vorticity_ratio")
        );
        let mut all: Vec<&ScenarioResult> = scenario_runs.iter().collect();
        all.extend([&kelvin, &tube]);
        all.extend(conservation.iter().chain(&rossby).chain(&rotation));
        let (w, at) = worst_residual(&all);
        let drifts_ok = [&kelvin, &tube].iter().all(|r| r.passed());
        (w < 1e-11 && drifts_ok, format!("worst per-cell balance residual {w:.2e} at {at} (< 1e-11) over {} runs", all.len()))
    }));

    out.sort_by_key(|o| o.id);
    println!();
    println!("summary:");
    for o in &out {
        println!("  criterion {:>2}: {}", o.id, if o.pass { "PASS" } else { "FAIL" });
    }
    let unexpected: Vec<u32> = out.iter().filter(|o| !o.pass && !KNOWN_UNATTAINABLE.contains(&o.id)).map(|o| o.id).collect();
    let known: Vec<u32> = out.iter().filter(|o| !o.pass && KNOWN_UNATTAINABLE.contains(&o.id)).map(|o| o.id).collect();
    if !known.is_empty() {
        println!("failing as analysed (unattainable as stated): {known:?}");
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
