//! Limit detection on finite data: geometric scale grids and the classifier
//! separating "quotient tends to 0" from "quotient has 0 as a cluster value"
//! from "bounded away from 0".

use serde::{Deserialize, Serialize};

/// Scale grid and thresholds shared by every probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    /// Largest scale.
    pub t0: f64,
    /// Ratio between consecutive scales, in (0,1).
    pub rho: f64,
    /// Number of ratio steps; the grid has `k_scales + 1` scales.
    pub k_scales: usize,
    /// Sub-threshold cutoff for "quotient is zero".
    pub eps: f64,
    /// Number of smallest scales driving verdicts.
    pub tail: usize,
    /// Minimum valid tail entries for a decided verdict.
    pub min_valid: usize,
    /// Base-point samples per scale for paratangent probes.
    pub budget: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            t0: 1e-1,
            rho: 0.5,
            k_scales: 36,
            eps: 1e-3,
            tail: 12,
            min_valid: 6,
            budget: 256,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    /// Per-entry quotient error bound below which the entry counts as valid.
    pub fn validity_gate(&self) -> f64 {
        self.eps / 4.0
    }
}

/// One probed scale. `q = None` marks a MISSING entry: the sampler found no
/// admissible point there (treated as "no hit", not as invalid data).
#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub t: f64,
    pub q: Option<f64>,
    pub err: f64,
    pub valid: bool,
}

/// Samples of a nonnegative quotient along decreasing scales.
#[derive(Debug, Clone, Default, Serialize)]
pub struct QuotientTrace {
    pub entries: Vec<TraceEntry>,
}

impl QuotientTrace {
    pub fn push(&mut self, t: f64, q: Option<f64>, err: f64, valid: bool) {
        if let Some(last) = self.entries.last() {
            debug_assert!(t < last.t, "scales must be strictly decreasing");
        }
        self.entries.push(TraceEntry { t, q, err, valid });
    }

    /// Smallest quotient among valid tail entries (diagnostic).
    pub fn min_tail_q(&self, tail: usize) -> Option<f64> {
        let n = self.entries.len();
        let start = n.saturating_sub(tail);
        self.entries[start..]
            .iter()
            .filter(|e| e.valid)
            .filter_map(|e| e.q)
            .fold(None, |acc, q| Some(acc.map_or(q, |a: f64| a.min(q))))
    }

    /// CSV with columns t,q,err,valid; MISSING quotients print as empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,q,err,valid\n");
        for e in &self.entries {
            let q = e.q.map(|q| format!("{q}")).unwrap_or_default();
            s.push_str(&format!("{},{},{},{}\n", e.t, q, e.err, e.valid));
        }
        s
    }
}

/// Verdict classes for the decay of a nonnegative quotient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecayClass {
    /// Every valid tail quotient is sub-threshold: the limit is 0.
    LimitZero,
    /// Sub-threshold hits recur but do not fill the tail: liminf 0, limit not.
    LiminfZeroOnly,
    /// No tail hit survives: bounded away from 0 at the probed scales.
    Positive,
    /// Not enough valid tail data to decide.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayVerdict {
    pub class: DecayClass,
    /// Indices into the trace where sub-threshold hits occurred.
    pub witnesses: Vec<usize>,
}

/// Geometric scale grid `{t0·rho^k}` truncated at `floor`.
pub fn scale_grid(cfg: &ProbeConfig, floor: f64) -> Vec<f64> {
    assert!(floor >= 0.0);
    let mut out = Vec::with_capacity(cfg.k_scales + 1);
    for k in 0..=cfg.k_scales {
        let t = cfg.t0 * cfg.rho.powi(k as i32);
        if t < floor || t <= 0.0 || !t.is_finite() {
            break;
        }
        out.push(t);
    }
    out
}

/// Classifies a quotient trace.
///
/// The verdict is driven by the tail window of smallest scales; recurrence
/// for the liminf class is counted over distinct hit scales anywhere in the
/// trace, so sets whose sub-threshold scales thin out geometrically (e.g.
/// factorially sparse sequences) still register. The liminf class also
/// demands at least two distinct hit scales inside the tail itself: hits
/// that cluster at shallow scales and barely graze the tail are transient
/// geometry, not recurrence.
pub fn classify(trace: &QuotientTrace, cfg: &ProbeConfig) -> DecayVerdict {
    let n = trace.entries.len();
    let tail_n = cfg.tail.min(n);
    if tail_n == 0 {
        return DecayVerdict { class: DecayClass::Inconclusive, witnesses: vec![] };
    }
    let tail_start = n - tail_n;
    let is_hit = |e: &TraceEntry| e.valid && e.q.map_or(false, |q| q < cfg.eps);

    let valid_tail = trace.entries[tail_start..].iter().filter(|e| e.valid).count();
    if valid_tail < cfg.min_valid.min(tail_n) {
        return DecayVerdict { class: DecayClass::Inconclusive, witnesses: vec![] };
    }
    let witnesses: Vec<usize> = trace
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| is_hit(e))
        .map(|(i, _)| i)
        .collect();
    let tail_hits = witnesses.iter().filter(|&&i| i >= tail_start).count();
    let recurrence = (tail_n + 2) / 3; // ceil(tail/3)
    // Recurrence means hits keep returning after valid misses. A single
    // contiguous block of hits that stops partway down the grid is a
    // threshold effect of shrinking scale, not a liminf of zero.
    let interleaved = witnesses.windows(2).any(|w| {
        trace.entries[w[0] + 1..w[1]].iter().any(|e| e.valid && !is_hit(e))
    });

    // A decaying quotient can cross the eps threshold inside the tail window:
    // the valid tail then splits into a non-increasing miss prefix followed by
    // an unbroken hit suffix. That is still a limit of zero, provided the hit
    // suffix alone meets the evidence quota.
    let threshold_crossing = {
        let valid: Vec<&TraceEntry> =
            trace.entries[tail_start..].iter().filter(|e| e.valid).collect();
        let first_hit = valid.iter().position(|e| is_hit(e));
        match first_hit {
            Some(k) if valid[k..].iter().all(|e| is_hit(e)) && valid.len() - k >= cfg.min_valid => {
                let prefix_qs: Vec<f64> = valid[..k].iter().filter_map(|e| e.q).collect();
                prefix_qs.windows(2).all(|w| w[1] <= w[0] * 1.05)
            }
            _ => false,
        }
    };

    let class = if (tail_hits == valid_tail && tail_hits > 0) || threshold_crossing {
        DecayClass::LimitZero
    } else if tail_hits >= 2 && interleaved && witnesses.len() >= recurrence {
        DecayClass::LiminfZeroOnly
    } else {
        DecayClass::Positive
    };
    DecayVerdict { class, witnesses }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_from(qs: &[f64]) -> QuotientTrace {
        let mut t = QuotientTrace::default();
        let cfg = ProbeConfig::default();
        for (k, &q) in qs.iter().enumerate() {
            t.push(cfg.t0 * cfg.rho.powi(k as i32), Some(q), 0.0, true);
        }
        t
    }

    #[test]
    fn default_grid_has_37_scales() {
        let cfg = ProbeConfig::default();
        let g = scale_grid(&cfg, 0.0);
        assert_eq!(g.len(), 37);
        assert!((g[0] - 0.1).abs() < 1e-15);
        assert!((g[36] - 1.4551915228366852e-12).abs() < 1e-24);
    }

    #[test]
    fn grid_truncates_at_floor() {
        let cfg = ProbeConfig::default();
        // count of k with 0.1 * 0.5^k >= 1e-6
        let g = scale_grid(&cfg, 1e-6);
        assert_eq!(g.len(), 17);
        assert!(g.iter().all(|&t| t >= 1e-6));
        assert!(scale_grid(&cfg, 0.2).is_empty());
    }

    #[test]
    fn all_small_tail_is_limit_zero() {
        let v = classify(&trace_from(&[1e-6; 37]), &ProbeConfig::default());
        assert_eq!(v.class, DecayClass::LimitZero);
    }

    #[test]
    fn alternating_tail_is_liminf_only() {
        let qs: Vec<f64> = (0..37).map(|k| if k % 2 == 0 { 1e-6 } else { 0.7 }).collect();
        let v = classify(&trace_from(&qs), &ProbeConfig::default());
        assert_eq!(v.class, DecayClass::LiminfZeroOnly);
    }

    #[test]
    fn bounded_below_is_positive() {
        let v = classify(&trace_from(&[0.9; 37]), &ProbeConfig::default());
        assert_eq!(v.class, DecayClass::Positive);
    }

    #[test]
    fn single_lucky_hit_is_noise() {
        let mut qs = vec![0.9; 37];
        qs[30] = 1e-6;
        let v = classify(&trace_from(&qs), &ProbeConfig::default());
        assert_eq!(v.class, DecayClass::Positive);
    }

    #[test]
    fn sparse_recurrent_hits_are_liminf() {
        // hits thin out like a factorial sequence: a few in the tail,
        // more across the full trace
        let mut qs = vec![0.9; 37];
        for &k in &[3, 8, 14, 21, 25, 29, 33] {
            qs[k] = 1e-6;
        }
        let v = classify(&trace_from(&qs), &ProbeConfig::default());
        assert_eq!(v.class, DecayClass::LiminfZeroOnly);
    }

    #[test]
    fn too_little_valid_data_is_inconclusive() {
        let mut t = QuotientTrace::default();
        let cfg = ProbeConfig::default();
        for k in 0..37 {
            t.push(cfg.t0 * cfg.rho.powi(k), Some(0.5), 1.0, false);
        }
        assert_eq!(classify(&t, &cfg).class, DecayClass::Inconclusive);
    }

    #[test]
    fn missing_blocks_limit_zero_but_not_liminf() {
        let mut t = QuotientTrace::default();
        let cfg = ProbeConfig::default();
        for k in 0..37 {
            let q = if k % 2 == 0 { Some(1e-6) } else { None };
            t.push(cfg.t0 * cfg.rho.powi(k), q, 0.0, true);
        }
        assert_eq!(classify(&t, &cfg).class, DecayClass::LiminfZeroOnly);
    }

    #[test]
    fn verdict_ignores_non_tail_entries() {
        let mut qs = vec![0.9; 37];
        let v1 = classify(&trace_from(&qs), &ProbeConfig::default());
        for q in qs.iter_mut().take(20) {
            *q = 0.2;
        }
        let v2 = classify(&trace_from(&qs), &ProbeConfig::default());
        assert_eq!(v1.class, v2.class);
    }
}
