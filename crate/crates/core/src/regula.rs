//! First-order necessary-condition certification for maximizers over
//! arbitrary feasible sets: at a constrained maximizer the gradient makes a
//! nonpositive inner product with every upper tangent direction. Violations
//! come back as witness directions with their margins.

use serde_json::json;
use thiserror::Error;

use crate::cones::{estimate_cone, normal_cone_member, Answer, ConeKind, Membership};
use crate::geom::{DirectionGrid, Vector};
use crate::probe::ProbeConfig;
use crate::setmodel::SetModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Satisfied {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct RegulaReport {
    pub satisfied: Satisfied,
    /// Failing tangent directions with their inner-product margins, sorted
    /// by decreasing margin.
    pub violations: Vec<(Vector, f64)>,
    pub unknown_dirs: usize,
    pub gradient: Vector,
    pub tol: f64,
}

impl RegulaReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "satisfied": match self.satisfied {
                Satisfied::Yes => serde_json::Value::Bool(true),
                Satisfied::No => serde_json::Value::Bool(false),
                Satisfied::Unknown => serde_json::Value::String("UNKNOWN".into()),
            },
            "violations": self.violations.iter().map(|(v, m)| json!({
                "direction": v.iter().copied().collect::<Vec<f64>>(),
                "margin": m,
            })).collect::<Vec<_>>(),
            "unknown_dirs": self.unknown_dirs,
            "gradient": self.gradient.iter().copied().collect::<Vec<f64>>(),
            "tol": self.tol,
        })
    }

    /// Exit-code contract: 0 satisfied, 3 violated, 4 unknown.
    pub fn exit_code(&self) -> i32 {
        match self.satisfied {
            Satisfied::Yes => 0,
            Satisfied::No => 3,
            Satisfied::Unknown => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum RegulaError {
    #[error("base point is not in the feasible set (distance {d:.3e}, err {err:.3e})")]
    Infeasible { d: f64, err: f64 },
}

fn check_feasible(feasible: &SetModel, x_hat: &Vector, cfg: &ProbeConfig) -> Result<(), RegulaError> {
    let d = feasible.distance(x_hat, cfg.t0);
    if d.value > 2.0 * d.err_bound + 1e-12 {
        return Err(RegulaError::Infeasible { d: d.value, err: d.err_bound });
    }
    Ok(())
}

/// Certifies "⟨gradient, v⟩ ≤ 0 for every upper tangent direction v" at a
/// candidate maximizer, with the comparison slackened by `tol·‖gradient‖`.
pub fn regula_check(
    gradient: &Vector,
    feasible: &SetModel,
    x_hat: &Vector,
    grid: &DirectionGrid,
    cfg: &ProbeConfig,
    tol: f64,
) -> Result<RegulaReport, RegulaError> {
    check_feasible(feasible, x_hat, cfg)?;
    let est = estimate_cone(feasible, x_hat, ConeKind::TanUpper, grid, cfg);
    let gnorm = gradient.norm();
    let cutoff = tol * gnorm;
    let mut violations: Vec<(Vector, f64)> = Vec::new();
    let mut unknown_dirs = 0usize;
    for d in &est.dirs {
        match d.membership {
            Membership::In => {
                let margin = gradient.dot(&d.v);
                if margin > cutoff {
                    violations.push((d.v.clone(), margin));
                }
            }
            Membership::Unknown => unknown_dirs += 1,
            Membership::Out => {}
        }
    }
    violations.sort_by(|a, b| b.1.total_cmp(&a.1));
    let satisfied = if !violations.is_empty() {
        Satisfied::No
    } else if unknown_dirs * 20 > est.dirs.len() {
        // more than 5% of the grid undecided: a clean bill means little
        Satisfied::Unknown
    } else {
        Satisfied::Yes
    };
    Ok(RegulaReport {
        satisfied,
        violations,
        unknown_dirs,
        gradient: gradient.clone(),
        tol: cutoff,
    })
}

/// Default relative slack for the inner-product comparison.
pub fn default_tol() -> f64 {
    1e-6
}

/// Normal-cone membership of `w` at `x_hat`: w is polar to every confirmed
/// upper tangent direction.
pub fn normal_certificate(
    feasible: &SetModel,
    x_hat: &Vector,
    w: &Vector,
    grid: &DirectionGrid,
    cfg: &ProbeConfig,
    tol: f64,
) -> Result<Answer, RegulaError> {
    check_feasible(feasible, x_hat, cfg)?;
    let est = estimate_cone(feasible, x_hat, ConeKind::TanUpper, grid, cfg);
    let ans = normal_cone_member(&est, w, tol * w.norm().max(1e-300));
    if ans.member && ans.unknown_dirs * 20 > est.dirs.len() {
        return Ok(Answer::Unknown);
    }
    Ok(if ans.member { Answer::Yes } else { Answer::No })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{unit_sphere_grid, vec_from};
    use crate::setmodel::shapes::disc;

    fn setup() -> (SetModel, DirectionGrid, ProbeConfig) {
        let cfg = ProbeConfig::default();
        let grid = unit_sphere_grid(2, 24, cfg.seed).unwrap();
        (disc(1.0), grid, cfg)
    }

    #[test]
    fn satisfied_at_the_true_maximizer_on_the_disc() {
        let (m, grid, cfg) = setup();
        let s = 0.5f64.sqrt();
        let x = vec_from(&[s, s]);
        let g = vec_from(&[1.0, 1.0]);
        let rep = regula_check(&g, &m, &x, &grid, &cfg, default_tol()).unwrap();
        assert_eq!(rep.satisfied, Satisfied::Yes, "{:?}", rep.violations);
        assert!(rep.violations.is_empty());
    }

    #[test]
    fn violated_away_from_the_maximizer_with_a_witness() {
        let (m, grid, cfg) = setup();
        let x = vec_from(&[1.0, 0.0]);
        let g = vec_from(&[1.0, 1.0]);
        let rep = regula_check(&g, &m, &x, &grid, &cfg, default_tol()).unwrap();
        assert_eq!(rep.satisfied, Satisfied::No);
        let (v, margin) = &rep.violations[0];
        // strongest witness is the tangent direction (0,1) with margin 1
        assert!(v[1] > 0.9, "witness {v:?}");
        assert!((margin - 1.0).abs() < 0.1, "margin {margin}");
    }

    #[test]
    fn zero_gradient_is_always_satisfied() {
        let (m, grid, cfg) = setup();
        let x = vec_from(&[1.0, 0.0]);
        let g = vec_from(&[0.0, 0.0]);
        let rep = regula_check(&g, &m, &x, &grid, &cfg, default_tol()).unwrap();
        assert_eq!(rep.satisfied, Satisfied::Yes);
    }

    #[test]
    fn verdict_is_invariant_under_gradient_scaling() {
        let (m, grid, cfg) = setup();
        for (x, g) in [
            (vec_from(&[1.0, 0.0]), vec_from(&[1.0, 1.0])),
            (vec_from(&[0.5f64.sqrt(), 0.5f64.sqrt()]), vec_from(&[1.0, 1.0])),
        ] {
            let mut verdicts = Vec::new();
            let mut witnesses = Vec::new();
            for c in [1e-3, 1.0, 1e3] {
                let rep = regula_check(&(&g * c), &m, &x, &grid, &cfg, default_tol()).unwrap();
                verdicts.push(rep.satisfied);
                witnesses.push(rep.violations.iter().map(|(v, _)| v.clone()).collect::<Vec<_>>());
            }
            assert!(verdicts.windows(2).all(|w| w[0] == w[1]), "{verdicts:?}");
            assert!(witnesses.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn normal_certificate_on_the_disc() {
        let (m, grid, cfg) = setup();
        let x = vec_from(&[1.0, 0.0]);
        let outward = vec_from(&[1.0, 0.0]);
        assert_eq!(normal_certificate(&m, &x, &outward, &grid, &cfg, 1e-6).unwrap(), Answer::Yes);
        let skew = vec_from(&[1.0, 1.0]);
        assert_eq!(normal_certificate(&m, &x, &skew, &grid, &cfg, 1e-6).unwrap(), Answer::No);
        // interior point: the tangent cone is everything, only 0 is normal
        let inner = vec_from(&[0.2, 0.1]);
        assert_eq!(normal_certificate(&m, &inner, &outward, &grid, &cfg, 1e-6).unwrap(), Answer::No);
    }

    #[test]
    fn regula_and_normal_certificate_agree() {
        let (m, grid, cfg) = setup();
        for x in [vec_from(&[1.0, 0.0]), vec_from(&[0.5f64.sqrt(), 0.5f64.sqrt()])] {
            for g in [vec_from(&[1.0, 1.0]), vec_from(&[1.0, 0.0])] {
                let rep = regula_check(&g, &m, &x, &grid, &cfg, 1e-6).unwrap();
                let cert = normal_certificate(&m, &x, &g, &grid, &cfg, 1e-6).unwrap();
                match rep.satisfied {
                    Satisfied::Yes => assert_eq!(cert, Answer::Yes),
                    Satisfied::No => assert_eq!(cert, Answer::No),
                    Satisfied::Unknown => {}
                }
            }
        }
    }

    #[test]
    fn rejects_infeasible_points() {
        let (m, grid, cfg) = setup();
        let x = vec_from(&[2.0, 0.0]);
        let g = vec_from(&[1.0, 0.0]);
        assert!(regula_check(&g, &m, &x, &grid, &cfg, 1e-6).is_err());
    }

    #[test]
    fn report_serializes() {
        let (m, grid, cfg) = setup();
        let rep = regula_check(
            &vec_from(&[1.0, 1.0]),
            &m,
            &vec_from(&[1.0, 0.0]),
            &grid,
            &cfg,
            1e-6,
        )
        .unwrap();
        let j = rep.to_json();
        assert_eq!(j["satisfied"], serde_json::Value::Bool(false));
        assert!(!j["violations"].as_array().unwrap().is_empty());
    }
}
