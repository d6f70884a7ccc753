//! Daily index weights under a turnover penalty.
//!
//! The problem solved each day is
//!
//! ```text
//! maximize   sum_i  s_i w_i - delta |p_i - w_i|
//! subject to 0 <= w_i <= cap,  lo <= sum_i w_i <= hi
//! ```
//!
//! with `s` the sentiment, `p` the (drifted) prior weights and `delta` the
//! penalty per unit of turnover.
//!
//! The objective is separable, and each term is concave and piecewise linear
//! in `w_i` with a single kink at the prior. Restricted to `[0, cap]` it
//! splits into two pieces, writing `a_i = min(p_i, cap)`:
//!
//! * `[0, a_i]`   slope `s_i + delta` (buying back towards the prior),
//! * `[a_i, cap]` slope `s_i - delta` (buying beyond the prior).
//!
//! A prior above the cap only contributes a constant `-delta (p_i - cap)`
//! plus the first piece, so clipping it for segment construction is exact.
//!
//! Every feasible `w` is a fill level of these segments, and because slopes
//! are non-increasing within each company, filling segments in globally
//! descending slope order never fills an upper piece before the lower piece
//! of the same company. The optimal total `T = sum w` is then a 1-D concave
//! problem: the band forces `T >= lo`, so the greedy fills to `lo`
//! unconditionally and then keeps going while the marginal slope is strictly
//! positive, stopping at `hi`. Ties are broken by company order, then by
//! segment position, which makes degenerate instances reproducible.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used when deciding whether a segment fits the remaining
/// budget, so that accumulated rounding never produces sub-ulp fills.
const FILL_SLACK: f64 = 1e-13;

/// Tolerance used when checking weight-vector invariants.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Turnover penalty, in sentiment units per unit of weight traded.
    pub delta: f64,
    /// Maximum weight per name.
    pub cap: f64,
    pub budget_lo: f64,
    pub budget_hi: f64,
    /// Weight changes at or below this are not counted as trades.
    pub trade_epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            cap: 0.10,
            budget_lo: 0.99,
            budget_hi: 0.999,
            trade_epsilon: 1e-6,
        }
    }
}

impl OptimizerConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::Config(format!(
                "delta must be >= 0, got {}",
                self.delta
            )));
        }
        if !(self.cap > 0.0 && self.cap <= 1.0) {
            return Err(Error::Config(format!(
                "cap must be in (0, 1], got {}",
                self.cap
            )));
        }
        if !(0.0 <= self.budget_lo && self.budget_lo <= self.budget_hi && self.budget_hi <= 1.0) {
            return Err(Error::Config(format!(
                "budget band must satisfy 0 <= lo <= hi <= 1, got [{}, {}]",
                self.budget_lo, self.budget_hi
            )));
        }
        if !(self.trade_epsilon.is_finite() && self.trade_epsilon >= 0.0) {
            return Err(Error::Config("trade_epsilon must be >= 0".into()));
        }
        Ok(())
    }

    /// Rejects universes too small to reach `budget_lo` under the cap.
    pub fn check_feasible(&self, universe: usize) -> Result<()> {
        if (universe as f64) * self.cap < self.budget_lo {
            return Err(Error::Infeasible {
                universe,
                cap: self.cap,
                budget_lo: self.budget_lo,
                required: (self.budget_lo / self.cap).ceil() as usize,
            });
        }
        Ok(())
    }
}

/// Company -> weight, iterated in ascending company id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(BTreeMap<String, f64>);

impl WeightVector {
    pub fn new(weights: BTreeMap<String, f64>) -> Self {
        Self(weights)
    }

    pub fn zeros<'a>(companies: impl IntoIterator<Item = &'a String>) -> Self {
        Self(companies.into_iter().map(|c| (c.clone(), 0.0)).collect())
    }

    pub fn get(&self, company: &str) -> Option<f64> {
        self.0.get(company).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, f64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    pub fn companies(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.values().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    fn same_keys(&self, other: &WeightVector) -> bool {
        self.0.len() == other.0.len() && self.0.keys().zip(other.0.keys()).all(|(a, b)| a == b)
    }

    fn require_same_keys(&self, other: &WeightVector, what: &str) -> Result<()> {
        if self.same_keys(other) {
            Ok(())
        } else {
            Err(Error::KeyMismatch(format!(
                "{what}: [{}] vs [{}]",
                self.0.keys().cloned().collect::<Vec<_>>().join(","),
                other.0.keys().cloned().collect::<Vec<_>>().join(",")
            )))
        }
    }

    /// Checks `0 <= w <= cap` per name and the budget band, at
    /// [`WEIGHT_TOLERANCE`].
    pub fn check_invariants(&self, cfg: &OptimizerConfig) -> Result<()> {
        check_weights(&self.values(), cfg)
    }
}

impl FromIterator<(String, f64)> for WeightVector {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

pub fn check_weights(weights: &[f64], cfg: &OptimizerConfig) -> Result<()> {
    for (i, &w) in weights.iter().enumerate() {
        if !(w >= -WEIGHT_TOLERANCE && w <= cfg.cap + WEIGHT_TOLERANCE) {
            return Err(Error::Invalid(format!(
                "weight {i} = {w} outside [0, {}]",
                cfg.cap
            )));
        }
    }
    let total: f64 = weights.iter().sum();
    if total < cfg.budget_lo - WEIGHT_TOLERANCE || total > cfg.budget_hi + WEIGHT_TOLERANCE {
        return Err(Error::Invalid(format!(
            "total weight {total} outside [{}, {}]",
            cfg.budget_lo, cfg.budget_hi
        )));
    }
    Ok(())
}

/// `sum_i s_i w_i - delta |p_i - w_i|` over aligned slices.
pub fn objective(weights: &[f64], sentiments: &[f64], prior: &[f64], delta: f64) -> f64 {
    weights
        .iter()
        .zip(sentiments)
        .zip(prior)
        .map(|((&w, &s), &p)| s * w - delta * (p - w).abs())
        .sum()
}

pub fn objective_value(
    weights: &WeightVector,
    sentiments: &WeightVector,
    prior: &WeightVector,
    delta: f64,
) -> Result<f64> {
    weights.require_same_keys(sentiments, "weights vs sentiments")?;
    weights.require_same_keys(prior, "weights vs prior")?;
    Ok(objective(
        &weights.values(),
        &sentiments.values(),
        &prior.values(),
        delta,
    ))
}

/// One linear piece of a company's objective term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub company: usize,
    pub lower: f64,
    pub upper: f64,
    pub slope: f64,
}

pub(crate) fn build_segments(
    sentiments: &[f64],
    prior: &[f64],
    cfg: &OptimizerConfig,
) -> Vec<Segment> {
    let mut segments = Vec::with_capacity(2 * sentiments.len());
    for (company, (&s, &p)) in sentiments.iter().zip(prior).enumerate() {
        let anchor = p.clamp(0.0, cfg.cap);
        if anchor > 0.0 {
            segments.push(Segment {
                company,
                lower: 0.0,
                upper: anchor,
                slope: s + cfg.delta,
            });
        }
        if anchor < cfg.cap {
            segments.push(Segment {
                company,
                lower: anchor,
                upper: cfg.cap,
                slope: s - cfg.delta,
            });
        }
    }
    segments.sort_by(|a, b| {
        b.slope
            .total_cmp(&a.slope)
            .then(a.company.cmp(&b.company))
            .then(a.lower.total_cmp(&b.lower))
    });
    segments
}

/// Exact maximizer over aligned slices. Index order is the tie-break order,
/// so callers pass companies sorted by id.
pub fn solve(sentiments: &[f64], prior: &[f64], cfg: &OptimizerConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if sentiments.len() != prior.len() {
        return Err(Error::KeyMismatch(format!(
            "{} sentiments vs {} prior weights",
            sentiments.len(),
            prior.len()
        )));
    }
    cfg.check_feasible(sentiments.len())?;
    if let Some(s) = sentiments.iter().find(|s| !s.is_finite()) {
        return Err(Error::Invalid(format!("non-finite sentiment {s}")));
    }
    if let Some(p) = prior.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::Invalid(format!(
            "prior weight {p} must be finite and >= 0"
        )));
    }

    let (lo, hi) = (cfg.budget_lo, cfg.budget_hi);
    let mut weights = vec![0.0; sentiments.len()];
    let mut total = 0.0;
    for seg in build_segments(sentiments, prior, cfg) {
        let mut pos = seg.lower;
        if total < lo - FILL_SLACK {
            // below the band: fill regardless of slope sign
            let need = lo - total;
            let len = seg.upper - pos;
            if len <= need + FILL_SLACK {
                weights[seg.company] = seg.upper;
                total += len;
                continue;
            }
            pos += need;
            weights[seg.company] = pos;
            total = lo;
        }
        if seg.slope <= 0.0 {
            break;
        }
        let room = hi - total;
        if room <= FILL_SLACK {
            break;
        }
        let len = seg.upper - pos;
        if len <= room + FILL_SLACK {
            weights[seg.company] = seg.upper;
            total += len;
        } else {
            weights[seg.company] = pos + room;
            break;
        }
    }
    Ok(weights)
}

/// Keyed front end to [`solve`]; companies are processed in ascending id.
pub fn optimize_weights(
    sentiments: &WeightVector,
    prior: &WeightVector,
    cfg: &OptimizerConfig,
) -> Result<WeightVector> {
    sentiments.require_same_keys(prior, "sentiments vs prior")?;
    let w = solve(&sentiments.values(), &prior.values(), cfg)?;
    Ok(sentiments.companies().cloned().zip(w).collect())
}

/// Largest universe the grid oracle accepts.
pub const ORACLE_MAX_NAMES: usize = 4;

/// Exhaustive reference solver for small universes.
///
/// The first `n - 1` weights range over the grid `{0, step, ..., cap}`; the
/// last weight is chosen exactly within whatever part of `[0, cap]` keeps the
/// total inside the band (a 1-D concave maximization over an interval, so the
/// candidates are the two endpoints and the clamped prior). Shares nothing
/// with [`solve`] beyond [`objective`].
pub fn brute_force_oracle(
    sentiments: &[f64],
    prior: &[f64],
    cfg: &OptimizerConfig,
    grid_step: f64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = sentiments.len();
    if n == 0 || n > ORACLE_MAX_NAMES {
        return Err(Error::Invalid(format!(
            "grid oracle handles 1..={ORACLE_MAX_NAMES} names, got {n}"
        )));
    }
    if prior.len() != n {
        return Err(Error::KeyMismatch("oracle prior length".into()));
    }
    let steps = cfg.cap / grid_step;
    if grid_step.is_nan() || grid_step <= 0.0 || (steps - steps.round()).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "grid step {grid_step} does not divide cap {}",
            cfg.cap
        )));
    }
    cfg.check_feasible(n)?;
    let steps = steps.round() as usize;
    let term = |i: usize, w: f64| sentiments[i] * w - cfg.delta * (prior[i] - w).abs();

    let last = n - 1;
    let mut best: Option<(f64, Vec<usize>, f64)> = None;
    let mut idx = vec![0usize; last];
    loop {
        let mut used = 0.0;
        let mut base = 0.0;
        for (i, &k) in idx.iter().enumerate() {
            let w = k as f64 * grid_step;
            used += w;
            base += term(i, w);
        }
        let a = (cfg.budget_lo - used).max(0.0);
        let b = (cfg.budget_hi - used).min(cfg.cap);
        if a <= b {
            for cand in [a, b, prior[last].clamp(a, b)] {
                let value = base + term(last, cand);
                if best.as_ref().is_none_or(|(v, _, _)| value > *v) {
                    best = Some((value, idx.clone(), cand));
                }
            }
        }
        // odometer over the grid
        let mut k = 0;
        loop {
            if k == idx.len() {
                let (_, head, tail) = best
                    .ok_or_else(|| Error::Invalid("grid oracle found no feasible point".into()))?;
                let mut w: Vec<f64> = head.iter().map(|&k| k as f64 * grid_step).collect();
                w.push(tail);
                return Ok(w);
            }
            idx[k] += 1;
            if idx[k] <= steps {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub company: String,
    pub delta_weight: f64,
}

/// Indices and signed changes `new - prior` larger than `epsilon` in
/// magnitude.
pub fn trade_deltas(new: &[f64], prior: &[f64], epsilon: f64) -> Vec<(usize, f64)> {
    new.iter()
        .zip(prior)
        .enumerate()
        .map(|(i, (&n, &p))| (i, n - p))
        .filter(|(_, d)| d.abs() > epsilon)
        .collect()
}

pub fn extract_trades(
    new: &WeightVector,
    prior_drifted: &WeightVector,
    epsilon: f64,
) -> Result<Vec<Trade>> {
    new.require_same_keys(prior_drifted, "new vs prior")?;
    let companies: Vec<&String> = new.companies().collect();
    Ok(
        trade_deltas(&new.values(), &prior_drifted.values(), epsilon)
            .into_iter()
            .map(|(i, d)| Trade {
                company: companies[i].clone(),
                delta_weight: d,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(delta: f64) -> OptimizerConfig {
        OptimizerConfig {
            delta,
            ..Default::default()
        }
    }

    fn keyed(values: &[f64]) -> WeightVector {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("c{i:02}"), *v))
            .collect()
    }

    fn assert_close(got: &[f64], want: &[f64]) {
        assert_eq!(got.len(), want.len());
        for (i, (g, w)) in got.iter().zip(want).enumerate() {
            assert!(
                (g - w).abs() < 1e-12,
                "index {i}: got {g}, want {w}\n{got:?}"
            );
        }
    }

    #[test]
    fn objective_examples() {
        let s = [0.4, -0.2, 0.9];
        let w = [0.3, 0.3, 0.4];
        let plain = 0.4 * 0.3 - 0.2 * 0.3 + 0.9 * 0.4;
        assert!((objective(&w, &s, &w, 1.0) - plain).abs() < 1e-15);
        assert_eq!(objective(&[0.1], &[1.0], &[0.0], 1.0), 0.0);
        let p = [0.0, 0.5, 0.5];
        assert!((objective(&w, &s, &p, 0.0) - plain).abs() < 1e-15);
    }

    #[test]
    fn objective_rejects_mismatched_keys() {
        let a = keyed(&[0.5, 0.5]);
        let b: WeightVector = [("x".to_string(), 1.0), ("y".to_string(), 0.0)]
            .into_iter()
            .collect();
        assert!(matches!(
            objective_value(&a, &b, &a, 1.0),
            Err(Error::KeyMismatch(_))
        ));
        assert!(objective_value(&a, &a, &a, 1.0).is_ok());
    }

    #[test]
    fn initial_fill_with_single_positive_name() {
        // values from an independent LP solve
        let mut s = vec![0.0; 12];
        s[0] = 1.0;
        let w = solve(&s, &[0.0; 12], &cfg(1.0)).unwrap();
        let mut want = vec![0.1; 9];
        want.extend([0.09, 0.0, 0.0]);
        assert_close(&w, &want);
    }

    #[test]
    fn feasible_prior_within_penalty_is_held() {
        let s = [
            0.9, -0.8, 0.3, 0.1, -0.2, 0.5, 0.7, -0.9, 0.2, 0.0, 0.95, -0.5,
        ];
        let mut prior = vec![0.1; 9];
        prior.extend([0.095, 0.0, 0.0]);
        let w = solve(&s, &prior, &cfg(1.0)).unwrap();
        assert_eq!(w, prior);
    }

    #[test]
    fn drifted_name_above_cap_is_cut_and_refilled() {
        let s = [
            0.2, 0.1, 0.0, -0.1, 0.3, 0.4, -0.2, 0.1, 0.0, 0.6, 0.8, -0.3,
        ];
        let mut prior = vec![0.12];
        prior.extend([0.1; 7]);
        prior.extend([0.09, 0.08, 0.0, 0.0]);
        let w = solve(&s, &prior, &cfg(1.0)).unwrap();
        let mut want = vec![0.1; 8];
        want.extend([0.09, 0.08, 0.02, 0.0]);
        assert_close(&w, &want);
        assert_eq!(w[0], 0.1);
    }

    #[test]
    fn uncapped_all_in_on_best_name() {
        let c = OptimizerConfig {
            delta: 0.0,
            cap: 1.0,
            budget_lo: 1.0,
            budget_hi: 1.0,
            trade_epsilon: 1e-6,
        };
        assert_eq!(solve(&[0.3, 0.1], &[0.0, 0.0], &c).unwrap(), [1.0, 0.0]);
        assert_eq!(
            brute_force_oracle(&[0.3, 0.1], &[0.0, 0.0], &c, 0.005).unwrap(),
            [1.0, 0.0]
        );
    }

    #[test]
    fn positive_slopes_fill_to_budget_hi() {
        let c = cfg(0.0);
        let s: Vec<f64> = (0..12).map(|i| 1.2 - 0.05 * i as f64).collect();
        let w = solve(&s, &[0.0; 12], &c).unwrap();
        let total: f64 = w.iter().sum();
        assert!((total - 0.999).abs() < 1e-12, "{total}");
        assert_eq!(&w[..9], &[0.1; 9]);
        assert!((w[9] - 0.099).abs() < 1e-12);
        assert_eq!(&w[10..], &[0.0; 2]);
    }

    #[test]
    fn non_positive_slopes_stop_at_budget_lo() {
        let c = cfg(0.0);
        let s: Vec<f64> = (0..12).map(|i| 0.5 - 0.1 * i as f64).collect();
        let w = solve(&s, &[0.0; 12], &c).unwrap();
        let total: f64 = w.iter().sum();
        assert!((total - 0.99).abs() < 1e-12, "{total}");
    }

    #[test]
    fn infeasible_universe_is_rejected() {
        let err = solve(&[0.0; 9], &[0.0; 9], &cfg(1.0)).unwrap_err();
        match err {
            Error::Infeasible {
                required, universe, ..
            } => {
                assert_eq!(required, 10);
                assert_eq!(universe, 9);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(solve(&[0.0; 12], &[0.0; 11], &cfg(1.0)).is_err());
        assert!(solve(&[f64::NAN; 12], &[0.0; 12], &cfg(1.0)).is_err());
        let mut prior = [0.0; 12];
        prior[3] = -0.1;
        assert!(solve(&[0.0; 12], &prior, &cfg(1.0)).is_err());
        let bad = OptimizerConfig {
            budget_lo: 0.9,
            budget_hi: 0.8,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(OptimizerConfig {
            cap: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig {
            delta: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn oracle_guards() {
        let c = OptimizerConfig {
            cap: 0.5,
            ..Default::default()
        };
        assert!(brute_force_oracle(&[0.0; 5], &[0.0; 5], &c, 0.005).is_err());
        assert!(brute_force_oracle(&[0.0; 3], &[0.0; 3], &c, 0.003).is_err());
        assert!(brute_force_oracle(&[0.0; 3], &[0.0; 3], &c, 0.005).is_ok());
    }

    #[test]
    fn segments_respect_per_company_order() {
        let segs = build_segments(&[0.2, 0.2], &[0.05, 0.2], &cfg(0.0));
        // equal slopes: company 0 lower piece, company 0 upper, then company 1
        let order: Vec<_> = segs.iter().map(|s| (s.company, s.lower)).collect();
        assert_eq!(order, [(0, 0.0), (0, 0.05), (1, 0.0)]);
    }

    #[test]
    fn trades_examples() {
        let a = keyed(&[0.12, 0.08, 0.1]);
        assert!(extract_trades(&a, &a, 1e-6).unwrap().is_empty());
        let b = keyed(&[0.10, 0.10, 0.1]);
        let trades = extract_trades(&b, &a, 1e-6).unwrap();
        assert_eq!(trades.len(), 2);
        assert_eq!(trades[0].company, "c00");
        assert!((trades[0].delta_weight + 0.02).abs() < 1e-15);
        let c = keyed(&[0.12 + 1e-9, 0.08, 0.1]);
        assert!(extract_trades(&c, &a, 1e-6).unwrap().is_empty());
    }

    fn arb_instance(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
        (
            prop::collection::vec(-1.0f64..=1.0, n),
            prop::collection::vec(0.0f64..0.15, n),
            prop::sample::select(vec![0.0, 0.3, 1.0]),
        )
    }

    proptest! {
        #[test]
        fn output_is_always_feasible((s, p, delta) in arb_instance(14)) {
            let c = cfg(delta);
            let w = solve(&s, &p, &c).unwrap();
            prop_assert!(check_weights(&w, &c).is_ok());
        }

        #[test]
        fn permuting_companies_permutes_output((s, p, delta) in arb_instance(12), rot in 0usize..12) {
            // distinct sentiments so tie-breaking does not depend on position
            let s: Vec<f64> = s.iter().enumerate().map(|(i, v)| v + i as f64 * 1e-9).collect();
            let c = cfg(delta);
            let w = solve(&s, &p, &c).unwrap();
            let rs: Vec<f64> = s.iter().cycle().skip(rot).take(12).copied().collect();
            let rp: Vec<f64> = p.iter().cycle().skip(rot).take(12).copied().collect();
            let rw = solve(&rs, &rp, &c).unwrap();
            let back: Vec<f64> = w.iter().cycle().skip(rot).take(12).copied().collect();
            for (a, b) in rw.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn zero_delta_is_descending_sentiment_fill(s in prop::collection::vec(-1.0f64..=1.0, 12)) {
            let c = cfg(0.0);
            let w = solve(&s, &[0.0; 12], &c).unwrap();
            let mut order: Vec<usize> = (0..12).collect();
            order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
            let mut total = 0.0;
            let mut expect = vec![0.0; 12];
            for i in order {
                if total >= c.budget_lo && s[i] <= 0.0 { break; }
                let limit = if total < c.budget_lo && s[i] <= 0.0 { c.budget_lo } else { c.budget_hi };
                let take = (limit - total).min(c.cap);
                if take <= 0.0 { break; }
                expect[i] = take;
                total += take;
            }
            for (a, b) in w.iter().zip(&expect) {
                prop_assert!((a - b).abs() < 1e-12, "{:?} vs {:?}", w, expect);
            }
        }
    }
}
