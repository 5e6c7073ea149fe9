//! Acceptance gate: one test per release criterion. Each test prints a
//! single `[criterion N] PASS/FAIL — description` line before asserting, so
//! `cargo test --test acceptance -- --nocapture` reads as a checklist.

use conekit::cones::{self, Answer, ConeKind, Membership};
use conekit::corpus;
use conekit::diff::{self, DiffStatus, FnModel};
use conekit::geom::{self, unit_sphere_grid, vec_from, DirectionGrid, Vector};
use conekit::probe::ProbeConfig;
use conekit::regula::{self, Satisfied};
use conekit::setmodel::{shapes, SetModel};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn cfg() -> ProbeConfig {
    ProbeConfig::default()
}

fn report(n: usize, desc: &str, pass: bool) {
    println!("[criterion {n}] {} — {desc}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {desc}");
}

fn random_cloud(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> (SetModel, Vec<Vector>) {
    let pts: Vec<Vector> =
        (0..n).map(|_| Vector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0))).collect();
    (SetModel::new(shapes::PointCloudShape::new(pts.clone())), pts)
}

#[test]
fn criterion_1_cone_verdicts_on_sequence_and_curve_sets() {
    let cfg = cfg();
    let mut ok = true;
    let mut detail = String::new();
    for name in ["factorial_sequence", "tsin_curve", "kinked_b"] {
        let t = Instant::now();
        let rep = corpus::run_case(name, &cfg).unwrap();
        let dt = t.elapsed().as_secs_f64();
        if !rep.pass() || dt >= 10.0 {
            ok = false;
            detail.push_str(&format!(" {name}(pass={}, {dt:.1}s)", rep.pass()));
        }
    }
    report(
        1,
        &format!("cone verdicts for the sequence/curve sets, <10 s each{detail}"),
        ok,
    );
}

#[test]
fn criterion_2_cone_inclusion_chain_never_violated() {
    let cfg = cfg();
    let mut violations: Vec<String> = Vec::new();
    for case in corpus::list_cases() {
        let (m, base) = corpus::case_model(case.name).unwrap();
        violations.extend(
            corpus::chain_violations(&m, &base, 8, &cfg)
                .into_iter()
                .map(|v| format!("{}: {v}", case.name)),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..25 {
        let dim = rng.gen_range(1..=4);
        let n = rng.gen_range(5..=500);
        let (m, pts) = random_cloud(&mut rng, dim, n);
        violations.extend(
            corpus::chain_violations(&m, &pts[0], 8, &cfg)
                .into_iter()
                .map(|v| format!("cloud {k}: {v}")),
        );
    }
    report(
        2,
        &format!(
            "inner-to-outer cone nesting holds on 14 cases + 25 clouds ({} violations)",
            violations.len()
        ),
        violations.is_empty(),
    );
    for v in violations.iter().take(10) {
        println!("    violation: {v}");
    }
}

#[test]
fn criterion_3_differentiability_classifications() {
    let cfg = cfg();
    let names = [
        "guareschi_radical",
        "severi_horn",
        "interior_discontinuity",
        "interior_nonlinear_directional",
        "interior_cone_dimension",
    ];
    let t = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for name in names {
        let rep = corpus::run_case(name, &cfg).unwrap();
        if !rep.pass() {
            ok = false;
            detail.push_str(&format!(" {name} failed"));
        }
    }
    let dt = t.elapsed().as_secs_f64();
    if dt >= 30.0 {
        ok = false;
        detail.push_str(&format!(" total {dt:.1}s >= 30s"));
    }
    report(3, &format!("radical/horn/interior classifications, <30 s total{detail}"), ok);
}

#[test]
fn criterion_4_method_cross_agreement() {
    let cfg = cfg();
    // (function, base point, grid size for the graph-cone method)
    let fns: Vec<(FnModel, Vector, usize)> = vec![
        (corpus::radical_fn(), vec_from(&[0.0, 0.0]), 18),
        (corpus::x2sin_fn(), vec_from(&[0.0]), 12),
        (corpus::cbrt_fn(), vec_from(&[0.0]), 12),
        (corpus::xy_over_r2_fn(), vec_from(&[0.0, 0.0]), 18),
        (
            FnModel::scalar(shapes::box_nd(vec![-1.0, -1.0], vec![1.0, 1.0]), "2x - 3y", |p| {
                2.0 * p[0] - 3.0 * p[1]
            }),
            vec_from(&[0.1, 0.2]),
            18,
        ),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (f, x, grid_n) in &fns {
        let direct = diff::estimate_differential(f, x, &cfg);
        let grid = unit_sphere_grid(f.in_dim() + 1, *grid_n, 0).unwrap();
        let cone = diff::cone_diff_test(f, x, &grid, &cfg);
        let d_pos = direct.status == DiffStatus::Differentiable;
        let c_pos = cone.status == DiffStatus::Differentiable;
        if d_pos != c_pos {
            ok = false;
            detail.push_str(&format!(
                " {}: direct={} cone={}",
                f.descriptor,
                direct.status.name(),
                cone.status.name()
            ));
            continue;
        }
        if d_pos {
            let l = direct.l.as_ref().unwrap();
            // the cone fit pins L only when the cone spans the input space
            if cone.unique != Some(false) {
                let diff_l = cone.l.as_ref().map(|cl| cl.max_entry_diff(l)).unwrap_or(f64::MAX);
                if diff_l > 1e-3 {
                    ok = false;
                    detail.push_str(&format!(" {}: L mismatch {diff_l:.2e}", f.descriptor));
                }
            }
            if diff::cyrenian_check(f, x, l, &cfg) == Answer::No {
                ok = false;
                detail.push_str(&format!(" {}: decoupled-pair check rejects L", f.descriptor));
            }
        }
    }
    report(4, &format!("direct, graph-cone, and decoupled-pair methods agree{detail}"), ok);
}

#[test]
fn criterion_5_half_line_test_matches_upper_cone() {
    let cfg = cfg();
    let mut ok = true;
    let mut detail = String::new();
    for case in corpus::list_cases() {
        let (m, base) = corpus::case_model(case.name).unwrap();
        let grid = unit_sphere_grid(m.ambient_dim(), 8, 7).unwrap();
        let est = cones::estimate_cone(&m, &base, ConeKind::TanUpper, &grid, &cfg);
        for d in &est.dirs {
            let cas = cones::cassina_member(&m, &base, &d.v, &cfg);
            if d.membership != Membership::Unknown
                && cas != Membership::Unknown
                && cas != d.membership
            {
                ok = false;
                detail.push_str(&format!(" {}: dir {:?} {:?} vs {:?}", case.name, d.v.as_slice(), d.membership, cas));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for k in 0..50 {
        let dim = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=60);
        let (m, pts) = random_cloud(&mut rng, dim, n);
        // points drawn uniformly from a box are isolated with probability 1
        let base = &pts[0];
        let grid = unit_sphere_grid(dim, (2 * dim).max(6), k).unwrap();
        for kind in [ConeKind::TanLower, ConeKind::TanUpper, ConeKind::PTanLower, ConeKind::PTanUpper] {
            let est = cones::estimate_cone(&m, base, kind, &grid, &cfg);
            if !est.in_directions().is_empty() {
                ok = false;
                detail.push_str(&format!(" cloud {k}: {} nonempty at isolated point", kind.name()));
            }
        }
        let est = cones::estimate_cone(&m, base, ConeKind::TanUpper, &grid, &cfg);
        for d in &est.dirs {
            let cas = cones::cassina_member(&m, base, &d.v, &cfg);
            if d.membership != Membership::Unknown && cas != Membership::Unknown && cas != d.membership {
                ok = false;
                detail.push_str(&format!(" cloud {k}: half-line test disagrees"));
            }
        }
        if cones::is_accumulation_point(&m, base, &cfg) != Answer::No {
            ok = false;
            detail.push_str(&format!(" cloud {k}: isolated point flagged as accumulation"));
        }
    }
    report(5, &format!("tangent half-line test matches the upper cone; isolated points have empty cones{detail}"), ok);
}

#[test]
fn criterion_6_distance_gradient_formula() {
    let cfg = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut ok = true;
    let mut worst = 0.0f64;
    for k in 0..20 {
        let dim = rng.gen_range(2..=4);
        let c = Vector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let r = rng.gen_range(0.2..1.5);
        let m = if k % 2 == 0 {
            SetModel::new(shapes::SphereShape::new(c.clone(), r))
        } else {
            SetModel::new(shapes::BallShape::new(c.clone(), r))
        };
        // a point strictly outside, so the nearest set point is on the sphere
        let mut u = Vector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        u /= u.norm();
        let x = &c + &u * (r + rng.gen_range(0.3..1.0));
        let nearest = &c + &u * r;
        let g = diff::distance_gradient(&m, &x, &nearest).unwrap();
        let h = 1e-6;
        let fd = diff::distance_gradient_fd(&m, &x, h);
        let err_bound = m.distance(&x, h).err_bound;
        let tol = 1e-5f64.max(4.0 * err_bound / h);
        let e = (g - fd).norm();
        worst = worst.max(e);
        if e > tol {
            ok = false;
        }
    }
    let _ = cfg;
    report(6, &format!("closed-form distance gradient matches finite differences (worst {worst:.2e})"), ok);
}

#[test]
fn criterion_7_first_order_optimality_certificates() {
    let cfg = cfg();
    let disc = shapes::disc(1.0);
    let x = vec_from(&[1.0, 0.0]);
    let grid = unit_sphere_grid(2, 24, 0).unwrap();
    let tol = regula::default_tol();
    let mut ok = true;
    let mut detail = String::new();
    for c in [1e-3, 1.0, 1e3] {
        // x maximizes ⟨(1,0), ·⟩ over the disc
        let rep =
            regula::regula_check(&(vec_from(&[1.0, 0.0]) * c), &disc, &x, &grid, &cfg, tol).unwrap();
        if rep.satisfied != Satisfied::Yes {
            ok = false;
            detail.push_str(&format!(" positive instance failed at c={c:e}"));
        }
        // (1,1) is not normal to the disc at (1,0): (0,1) is an improving
        // tangent direction and must appear as a witness
        let rep =
            regula::regula_check(&(vec_from(&[1.0, 1.0]) * c), &disc, &x, &grid, &cfg, tol).unwrap();
        let witness_ok = rep
            .violations
            .first()
            .map(|(v, m)| v[1] > 0.9 && (m / c - 1.0).abs() < 0.05)
            .unwrap_or(false);
        if rep.satisfied != Satisfied::No || !witness_ok {
            ok = false;
            detail.push_str(&format!(" negative instance failed at c={c:e}"));
        }
        // interior point: every direction is tangent, any nonzero gradient fails
        let rep = regula::regula_check(
            &(vec_from(&[0.0, 1.0]) * c),
            &disc,
            &vec_from(&[0.0, 0.0]),
            &grid,
            &cfg,
            tol,
        )
        .unwrap();
        if rep.satisfied != Satisfied::No {
            ok = false;
            detail.push_str(&format!(" interior instance failed at c={c:e}"));
        }
    }
    report(7, &format!("optimality certificates correct and scale-invariant{detail}"), ok);
}

#[test]
fn criterion_8_differentiable_but_not_strict() {
    let cfg = cfg();
    let f = corpus::x2sin_fn();
    let zero = vec_from(&[0.0]);
    let mut ok = true;
    let mut detail = String::new();

    let d = diff::estimate_differential(&f, &zero, &cfg);
    if d.status != DiffStatus::Differentiable
        || d.l.as_ref().map(|l| l.op_norm_bound()).unwrap_or(1.0) > 1e-3
    {
        ok = false;
        detail.push_str(" plain differential wrong");
    }
    let s = diff::estimate_strict_differential(&f, &zero, &cfg);
    if s.status != DiffStatus::NotStrict {
        ok = false;
        detail.push_str(&format!(" pair test gave {}", s.status.name()));
    }
    let grid = unit_sphere_grid(2, 12, 0).unwrap();
    let c = diff::cone_strict_diff_test(&f, &zero, &grid, &cfg);
    if c.status != DiffStatus::NotStrict {
        ok = false;
        detail.push_str(&format!(" chord-cone test gave {}", c.status.name()));
    }
    let through_zero: Vec<Vector> = (-4..=4).map(|i| vec_from(&[i as f64 * 0.05])).collect();
    if diff::c1_scan(&f, &through_zero, &cfg) != Answer::No {
        ok = false;
        detail.push_str(" scan through 0 not rejected");
    }
    let away: Vec<Vector> = (21..=25).map(|i| vec_from(&[i as f64 * 0.01])).collect();
    if diff::c1_scan(&f, &away, &cfg) != Answer::Yes {
        ok = false;
        detail.push_str(" scan away from 0 not accepted");
    }
    report(8, &format!("x²sin(1/x): differentiable with L=0 but not strictly{detail}"), ok);
}

#[test]
fn criterion_9_determinism_and_rigid_equivariance() {
    let cfg = cfg();
    let m = shapes::kinked_b();
    let base = vec_from(&[0.0, 0.0]);
    let grid = unit_sphere_grid(2, 16, 3).unwrap();
    let a = cones::estimate_cone(&m, &base, ConeKind::TanUpper, &grid, &cfg).to_json().to_string();
    let b = cones::estimate_cone(&m, &base, ConeKind::TanUpper, &grid, &cfg).to_json().to_string();
    let deterministic = a == b;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut agree = 0usize;
    let mut decided = 0usize;
    for _ in 0..10 {
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let (s, c) = theta.sin_cos();
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let trans = Vector::from_fn(2, |_, _| rng.gen_range(-0.5..0.5));
        let moved = SetModel::new(shapes::AffineShape::new(
            shapes::kinked_b(),
            rot.clone(),
            trans.clone(),
        ));
        let moved_base = &rot * &base + &trans;
        let moved_grid = DirectionGrid {
            dim: 2,
            dirs: grid.dirs.iter().map(|v| &rot * v).collect(),
            seed: grid.seed,
        };
        let est0 = cones::estimate_cone(&m, &base, ConeKind::TanUpper, &grid, &cfg);
        let est1 = cones::estimate_cone(&moved, &moved_base, ConeKind::TanUpper, &moved_grid, &cfg);
        for (d0, d1) in est0.dirs.iter().zip(est1.dirs.iter()) {
            if d0.membership != Membership::Unknown && d1.membership != Membership::Unknown {
                decided += 1;
                if d0.membership == d1.membership {
                    agree += 1;
                }
            }
        }
    }
    let frac = agree as f64 / decided.max(1) as f64;
    let ok = deterministic && decided > 0 && frac >= 0.99;
    report(
        9,
        &format!(
            "repeated runs byte-identical ({deterministic}); rigid-motion agreement {agree}/{decided} = {frac:.4}"
        ),
        ok,
    );
}

#[test]
fn tolerance_band_stability() {
    // every corpus case passes across a band of membership thresholds
    for eps in [1e-2, 1e-3, 3e-4] {
        let cfg = ProbeConfig { eps, ..ProbeConfig::default() };
        for rep in corpus::run_all(&cfg) {
            assert!(rep.pass(), "case {} failed at eps={eps:e}: {:?}", rep.name, rep.expectations.iter().filter(|e| !e.pass).map(|e| &e.label).collect::<Vec<_>>());
        }
    }
    println!("[stability] PASS — full corpus green at eps 1e-2, 1e-3, 3e-4");
}

fn _assert_geom_used() {
    let _ = geom::angle_between(&vec_from(&[1.0]), &vec_from(&[1.0]));
}
