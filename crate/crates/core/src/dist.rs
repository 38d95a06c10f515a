//! Tail arrays of integer weights, geometric tail rounding, and i.i.d. sums
//! by repeated doubling.
//!
//! A [`TailArray`] stores `Pr{X >= w}` for `w in [1, cap]` as a sparse step
//! function. Sums are clamped at `cap`: every outcome `>= cap` behaves the
//! same for the knapsack, so the mass is merged into `cap`.

use serde::Serialize;

use crate::error::{Result, SumkError};
use crate::instance::WeightDistribution;

/// Largest position span handled by the dense accumulator in [`convolve`].
const DENSE_SPAN_LIMIT: u64 = 1 << 22;

// ---------------------------------------------------------------------------
// TailArray
// ---------------------------------------------------------------------------

/// Sparse tail array of a random weight `X >= 1`.
///
/// `tail(w) = 1` for `w <= 1`, the value of the last breakpoint at or below
/// `w` for `1 <= w <= max`, and `0` for `w > max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailArray {
    cap: u64,
    max: u64,
    breakpoints: Vec<(u64, f64)>,
}

impl TailArray {
    /// Exact tail array of `d`, clamped at `cap`. `d` must have positive
    /// support.
    pub fn from_distribution(d: &WeightDistribution, cap: u64) -> Self {
        assert!(d.min_value() >= 1, "tail arrays need positive support");
        let d = d.clamped(cap);
        let support = d.support();
        let mut breakpoints = Vec::with_capacity(support.len());
        breakpoints.push((1, 1.0));
        for &(x, _) in &support[..support.len() - 1] {
            breakpoints.push((x + 1, d.tail(x as i64 + 1)));
        }
        Self {
            cap,
            max: d.max_value(),
            breakpoints,
        }
    }

    /// Point mass at `value` (clamped to `cap`).
    pub fn point(value: u64, cap: u64) -> Self {
        assert!(value >= 1);
        Self {
            cap,
            max: value.min(cap),
            breakpoints: vec![(1, 1.0)],
        }
    }

    /// Builds an array from explicit parts, checking every invariant.
    pub fn from_breakpoints(cap: u64, max: u64, breakpoints: Vec<(u64, f64)>) -> Result<Self> {
        let bad = |msg: &str| Err(SumkError::InvalidInstance(format!("tail array: {msg}")));
        if max < 1 || max > cap {
            return bad("max outside [1, cap]");
        }
        if breakpoints.first() != Some(&(1, 1.0)) {
            return bad("first breakpoint must be (1, 1)");
        }
        for pair in breakpoints.windows(2) {
            if pair[1].0 <= pair[0].0 || !(pair[1].1 < pair[0].1 && pair[1].1 > 0.0) {
                return bad("breakpoints must be strictly increasing with strictly decreasing positive tails");
            }
        }
        if breakpoints[breakpoints.len() - 1].0 > max {
            return bad("breakpoint beyond max");
        }
        Ok(Self {
            cap,
            max,
            breakpoints,
        })
    }

    /// Builds the array from masses listed in strictly decreasing position
    /// order; all positions must lie in `[1, cap]` and masses must be > 0.
    fn from_descending_masses(cap: u64, masses: &[(u64, f64)]) -> Self {
        let max = masses[0].0;
        let mut rev: Vec<(u64, f64)> = Vec::with_capacity(masses.len());
        let mut suffix = 0.0;
        for (k, &(_, mass)) in masses.iter().enumerate() {
            suffix += mass;
            if let Some(&(lower, _)) = masses.get(k + 1) {
                rev.push((lower + 1, suffix));
            }
        }
        let mut breakpoints = Vec::with_capacity(rev.len() + 1);
        breakpoints.push((1, 1.0));
        for &(pos, tail) in rev.iter().rev() {
            if tail < breakpoints[breakpoints.len() - 1].1 {
                breakpoints.push((pos, tail));
            }
        }
        Self {
            cap,
            max,
            breakpoints,
        }
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    /// Largest position with positive probability.
    pub fn max(&self) -> u64 {
        self.max
    }

    pub fn breakpoints(&self) -> &[(u64, f64)] {
        &self.breakpoints
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `Pr{X >= w}`.
    #[inline]
    pub fn tail(&self, w: i64) -> f64 {
        if w <= 1 {
            return 1.0;
        }
        if w as u64 > self.max {
            return 0.0;
        }
        let idx = self.breakpoints.partition_point(|&(p, _)| p <= w as u64);
        self.breakpoints[idx - 1].1
    }

    /// Position masses in increasing order: the tail drops just after the
    /// end of each constant segment.
    pub fn masses(&self) -> Vec<(u64, f64)> {
        let bp = &self.breakpoints;
        let mut out = Vec::with_capacity(bp.len());
        for pair in bp.windows(2) {
            out.push((pair[1].0 - 1, pair[0].1 - pair[1].1));
        }
        out.push((self.max, bp[bp.len() - 1].1));
        out
    }

    /// `Pr{X >= w}` for `w = 1..=cap`. Test and debugging helper.
    pub fn to_dense(&self) -> Vec<f64> {
        (1..=self.cap as i64).map(|w| self.tail(w)).collect()
    }

    /// Pointwise `self >= other - tol` over `[1, cap]`, checked at every
    /// position where either array changes.
    pub fn dominates(&self, other: &TailArray, tol: f64) -> bool {
        let mut points: Vec<u64> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .map(|&(p, _)| p)
            .chain([self.max + 1, other.max + 1])
            .filter(|&p| p <= self.cap)
            .collect();
        points.sort_unstable();
        points.dedup();
        points
            .into_iter()
            .all(|p| self.tail(p as i64) >= other.tail(p as i64) - tol)
    }
}

// ---------------------------------------------------------------------------
// Rounding
// ---------------------------------------------------------------------------

/// Rounding grid `(1 + eta)^-k` with floor `(1 + eta)^-zeta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ApproxParams {
    pub eta: f64,
    pub zeta: f64,
    floor: f64,
}

impl ApproxParams {
    /// `eta = epsilon / (10 log2 W)`, `zeta = log_{1+eta}(W / eta)`.
    pub fn from_epsilon(epsilon: f64, cap: u64) -> Self {
        // log2 W would vanish at W = 1; no doubling happens there anyway.
        let log_w = (cap.max(2) as f64).log2();
        Self::from_eta(epsilon / (10.0 * log_w), cap)
    }

    /// `zeta = log_{1+eta}(W / eta)`, so the floor is exactly `eta / W`.
    pub fn from_eta(eta: f64, cap: u64) -> Self {
        let zeta = (cap as f64 / eta).ln() / eta.ln_1p();
        Self {
            eta,
            zeta,
            floor: (eta / cap as f64).min(1.0),
        }
    }

    /// Arbitrary `(zeta, eta)` pair; the floor is evaluated directly.
    pub fn new(eta: f64, zeta: f64) -> Self {
        Self {
            eta,
            zeta,
            floor: (-zeta * eta.ln_1p()).exp(),
        }
    }

    /// `(1 + eta)^-zeta`.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// `(1 + eta)^-k`.
    pub fn grid(&self, k: u64) -> f64 {
        (-(k as f64) * self.eta.ln_1p()).exp()
    }

    /// Rounds one tail value up to the grid, or to the floor when it is at
    /// or below the floor.
    pub fn round_value(&self, a: f64) -> f64 {
        if a <= self.floor {
            return self.floor;
        }
        if a >= 1.0 {
            return 1.0;
        }
        let mut k = (-a.ln() / self.eta.ln_1p()).floor().max(0.0) as u64;
        while k > 0 && self.grid(k) < a {
            k -= 1;
        }
        while self.grid(k + 1) >= a {
            k += 1;
        }
        self.grid(k)
    }
}

/// Rounds every tail up to the `(1 + eta)` grid, with tails at or below
/// `(1 + eta)^-zeta` (including the zero tail past `max`) lifted to exactly
/// that floor. The result dominates the input pointwise.
pub fn round_zeta_eta(a: &TailArray, p: &ApproxParams) -> TailArray {
    let mut breakpoints: Vec<(u64, f64)> = Vec::with_capacity(a.breakpoints.len() + 1);
    for &(pos, tail) in &a.breakpoints {
        let r = p.round_value(tail);
        match breakpoints.last() {
            Some(&(_, prev)) if r >= prev => {}
            _ => breakpoints.push((pos, r)),
        }
    }
    if a.max < a.cap && breakpoints[breakpoints.len() - 1].1 > p.floor() {
        breakpoints.push((a.max + 1, p.floor()));
    }
    TailArray {
        cap: a.cap,
        max: a.cap,
        breakpoints,
    }
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Exact tail array of `X + Y` for independent `X ~ a`, `Y ~ b`, with the
/// sum clamped at the shared cap.
///
/// Pairs of support points are accumulated either in a dense buffer over
/// the span of reachable sums or, for wide spans, by sorting the pairwise
/// sums; cost is `O(k^2 log k)` for `k` breakpoints in the worst case.
pub fn convolve(a: &TailArray, b: &TailArray) -> TailArray {
    assert_eq!(a.cap, b.cap, "convolving arrays with different caps");
    let cap = a.cap;
    let (ma, mb) = (a.masses(), b.masses());
    // X, Y >= 1, so every sum is >= 2; anything >= cap is merged into cap.
    let mut top = 0.0;
    let lo = ma[0].0 + mb[0].0;
    let hi = (ma[ma.len() - 1].0 + mb[mb.len() - 1].0).min(cap);
    let mut masses: Vec<(u64, f64)>;
    if lo >= cap {
        masses = Vec::new();
        top = 1.0;
    } else if hi - lo < DENSE_SPAN_LIMIT {
        let mut dense = vec![0.0; (hi - lo + 1) as usize];
        for &(x, p) in &ma {
            for &(y, q) in &mb {
                let s = x + y;
                if s >= cap {
                    top += p * q;
                } else {
                    dense[(s - lo) as usize] += p * q;
                }
            }
        }
        masses = dense
            .iter()
            .enumerate()
            .rev()
            .filter(|&(_, &m)| m > 0.0)
            .map(|(k, &m)| (lo + k as u64, m))
            .collect();
    } else {
        let mut pairs: Vec<(u64, f64)> = Vec::with_capacity(ma.len() * mb.len());
        for &(x, p) in &ma {
            for &(y, q) in &mb {
                let s = x + y;
                if s >= cap {
                    top += p * q;
                } else {
                    pairs.push((s, p * q));
                }
            }
        }
        pairs.sort_by_key(|&(s, _)| std::cmp::Reverse(s));
        masses = Vec::with_capacity(pairs.len());
        for (s, m) in pairs {
            match masses.last_mut() {
                Some(last) if last.0 == s => last.1 += m,
                _ => masses.push((s, m)),
            }
        }
        masses.retain(|&(_, m)| m > 0.0);
    }
    if top > 0.0 {
        masses.insert(0, (cap, top));
    }
    TailArray::from_descending_masses(cap, &masses)
}

/// Approximate tail array of the sum of `multiplicity` i.i.d. copies of
/// `base`: round once, then alternately self-convolve and re-round.
///
/// The result dominates the exact sum pointwise.
pub fn approx_iid_sum(base: &TailArray, multiplicity: u64, p: &ApproxParams) -> Result<TailArray> {
    if !multiplicity.is_power_of_two() {
        return Err(SumkError::NotPowerOfTwo(multiplicity));
    }
    let mut acc = round_zeta_eta(base, p);
    for _ in 0..multiplicity.trailing_zeros() {
        acc = round_zeta_eta(&convolve(&acc, &acc), p);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(points: &[(u64, f64)]) -> WeightDistribution {
        WeightDistribution::new(points.to_vec()).unwrap()
    }

    /// Dense pmf oracle: index = weight, clamped at cap.
    fn dense_pmf(d: &WeightDistribution, cap: u64) -> Vec<f64> {
        let mut pmf = vec![0.0; cap as usize + 1];
        for &(v, p) in d.support() {
            pmf[v.min(cap) as usize] += p;
        }
        pmf
    }

    fn dense_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
        let cap = a.len() - 1;
        let mut out = vec![0.0; cap + 1];
        for (x, &p) in a.iter().enumerate() {
            for (y, &q) in b.iter().enumerate() {
                out[(x + y).min(cap)] += p * q;
            }
        }
        out
    }

    fn dense_tails(pmf: &[f64]) -> Vec<f64> {
        let mut tails = vec![0.0; pmf.len() - 1];
        let mut acc = 0.0;
        for w in (1..pmf.len()).rev() {
            acc += pmf[w];
            tails[w - 1] = acc;
        }
        tails
    }

    #[test]
    fn tail_from_distribution_examples() {
        let a = TailArray::from_distribution(&dist(&[(1, 0.5), (2, 0.5)]), 10);
        assert_eq!(a.breakpoints(), &[(1, 1.0), (2, 0.5)]);
        assert_eq!(a.max(), 2);
        assert_eq!(a.tail(3), 0.0);

        let a = TailArray::from_distribution(&dist(&[(1, 1.0)]), 10);
        assert_eq!(a.breakpoints(), &[(1, 1.0)]);
        assert_eq!(a.tail(2), 0.0);

        let a = TailArray::from_distribution(&dist(&[(1, 0.25), (3, 0.75)]), 10);
        assert_eq!(a.breakpoints(), &[(1, 1.0), (2, 0.75)]);
        assert_eq!(a.tail(3), 0.75);
        assert_eq!(a.tail(4), 0.0);
    }

    #[test]
    fn masses_round_trip() {
        let d = dist(&[(2, 0.1), (3, 0.2), (7, 0.3), (9, 0.4)]);
        let a = TailArray::from_distribution(&d, 8);
        let m = a.masses();
        assert_eq!(m.len(), 4);
        assert_eq!(m[3], (8, 0.4));
        for (got, want) in m.iter().zip(d.clamped(8).support()) {
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() < 1e-15);
        }
    }

    #[test]
    fn round_example_eta_one() {
        let a = TailArray::from_breakpoints(10, 3, vec![(1, 1.0), (2, 0.6), (3, 0.3)]).unwrap();
        let p = ApproxParams::new(1.0, 60.0);
        let r = round_zeta_eta(&a, &p);
        assert_eq!(r.tail(1), 1.0);
        assert_eq!(r.tail(2), 1.0);
        assert_eq!(r.tail(3), 0.5);
        assert_eq!(r.tail(4), p.floor());
        assert_eq!(r.tail(10), p.floor());
    }

    #[test]
    fn round_on_grid_is_identity() {
        let p = ApproxParams::new(0.5, 20.0);
        let a = TailArray::from_breakpoints(
            6,
            6,
            vec![(1, 1.0), (3, p.grid(1)), (5, p.grid(4))],
        )
        .unwrap();
        assert_eq!(round_zeta_eta(&a, &p), a);
    }

    #[test]
    fn round_below_floor_is_constant() {
        let p = ApproxParams::from_eta(0.5, 8);
        let a = TailArray::from_breakpoints(8, 5, vec![(1, 1.0), (2, 1e-9), (4, 1e-12)]).unwrap();
        let r = round_zeta_eta(&a, &p);
        assert_eq!(r.breakpoints(), &[(1, 1.0), (2, p.floor())]);
        assert_eq!(r.max(), 8);
    }

    #[test]
    fn floor_closed_form_matches_power() {
        for (eps, cap) in [(0.1, 10u64), (0.2, 1_000), (0.5, 1_000_000_000), (0.3, 2)] {
            let p = ApproxParams::from_epsilon(eps, cap);
            let direct = (1.0 + p.eta).powf(-p.zeta);
            assert!((p.floor() - direct).abs() <= 1e-12, "{eps} {cap}");
            // powf drifts by about zeta ulps; the log1p form does not.
            let stable = (-p.zeta * p.eta.ln_1p()).exp();
            assert!((p.floor() - stable).abs() <= 1e-12 * stable, "{eps} {cap}");
            assert!((p.eta - eps / (10.0 * (cap.max(2) as f64).log2())).abs() < 1e-15);
        }
    }

    #[test]
    fn convolve_uniform_with_itself() {
        let u = TailArray::from_distribution(&dist(&[(1, 0.5), (2, 0.5)]), 10);
        let s = convolve(&u, &u);
        assert_eq!(s.breakpoints(), &[(1, 1.0), (3, 0.75), (4, 0.25)]);
        assert_eq!(s.max(), 4);
        assert_eq!(s.to_dense()[..5], [1.0, 1.0, 0.75, 0.25, 0.0]);
    }

    #[test]
    fn convolve_with_unit_point_shifts() {
        let b = TailArray::from_distribution(&dist(&[(2, 0.3), (5, 0.7)]), 6);
        let s = convolve(&TailArray::point(1, 6), &b);
        let dense = s.to_dense();
        for w in 1..=6usize {
            let shifted = if w == 1 { 1.0 } else { b.tail(w as i64 - 1) };
            assert!((dense[w - 1] - shifted).abs() < 1e-15, "w={w}");
        }
        assert_eq!(s.max(), 6);
    }

    #[test]
    fn convolve_wide_span_uses_sorted_pairs() {
        let cap = 1u64 << 40;
        let a = TailArray::from_distribution(&dist(&[(1, 0.5), (1 << 30, 0.5)]), cap);
        let b = TailArray::from_distribution(&dist(&[(3, 0.25), (1 << 38, 0.75)]), cap);
        let s = convolve(&a, &b);
        assert_eq!(s.max(), (1 << 30) + (1 << 38));
        assert_eq!(s.tail(4), 1.0);
        assert_eq!(s.tail(5), 0.875);
        assert_eq!(s.tail((1 << 30) + 3), 0.875);
        assert_eq!(s.tail((1 << 30) + 4), 0.75);
        assert_eq!(s.tail((1 << 38) + 2), 0.375);
        assert_eq!(s.tail((1 << 38) + (1 << 30)), 0.375);
        assert_eq!(s.tail((1 << 38) + (1 << 30) + 1), 0.0);
    }

    #[test]
    fn approx_iid_sum_errors_and_identity() {
        let base = TailArray::from_distribution(&dist(&[(1, 0.5), (3, 0.5)]), 20);
        let p = ApproxParams::from_eta(0.1, 20);
        assert!(matches!(approx_iid_sum(&base, 3, &p), Err(SumkError::NotPowerOfTwo(3))));
        assert_eq!(approx_iid_sum(&base, 1, &p).unwrap(), round_zeta_eta(&base, &p));
    }

    #[test]
    fn approx_iid_sum_of_unit_point_mass() {
        let p = ApproxParams::from_eta(0.01, 16);
        let s = approx_iid_sum(&TailArray::point(1, 16), 4, &p).unwrap();
        let dense = s.to_dense();
        for w in 1..=4 {
            assert!(dense[w - 1] >= 1.0 - 1e-12);
        }
        for w in 5..=16 {
            assert!(dense[w - 1] >= p.floor() && dense[w - 1] <= 4.0 * p.floor() * 1.01f64.powi(3));
        }
    }

    #[test]
    fn approx_iid_sum_dominates_uniform_pair() {
        for eta in [0.01, 0.1, 0.5, 1.0] {
            let p = ApproxParams::from_eta(eta, 10);
            let base = TailArray::from_distribution(&dist(&[(1, 0.5), (2, 0.5)]), 10);
            let s = approx_iid_sum(&base, 2, &p).unwrap().to_dense();
            for (got, want) in s.iter().zip([1.0, 1.0, 0.75, 0.25]) {
                assert!(*got >= want - 1e-12);
            }
        }
    }

    fn arb_dist(max_w: u64) -> impl Strategy<Value = WeightDistribution> {
        proptest::collection::btree_map(1..=max_w, 0.01f64..1.0, 1..=6).prop_map(|m| {
            let total: f64 = m.values().sum();
            WeightDistribution::new(m.into_iter().map(|(v, p)| (v, p / total)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn convolve_matches_dense_oracle(a in arb_dist(40), b in arb_dist(40), cap in 2u64..48) {
            let got = convolve(
                &TailArray::from_distribution(&a, cap),
                &TailArray::from_distribution(&b, cap),
            ).to_dense();
            let want = dense_tails(&dense_convolve(&dense_pmf(&a, cap), &dense_pmf(&b, cap)));
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
            }
        }

        #[test]
        fn convolve_is_symmetric(a in arb_dist(30), b in arb_dist(30), cap in 2u64..40) {
            let ta = TailArray::from_distribution(&a, cap);
            let tb = TailArray::from_distribution(&b, cap);
            let ab = convolve(&ta, &tb).to_dense();
            let ba = convolve(&tb, &ta).to_dense();
            for (x, y) in ab.iter().zip(&ba) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn convolution_preserves_dominance(
            y in arb_dist(20), z in arb_dist(20), eta in 0.05f64..1.0,
        ) {
            let cap = 32;
            let p = ApproxParams::from_eta(eta, cap);
            // Rounding up yields a dominating array of the same variable.
            let ty = TailArray::from_distribution(&y, cap);
            let tx = round_zeta_eta(&ty, &p);
            prop_assert!(tx.dominates(&ty, 0.0));
            let tz = TailArray::from_distribution(&z, cap);
            prop_assert!(convolve(&tx, &tz).dominates(&convolve(&ty, &tz), 1e-12));
        }

        #[test]
        fn rounding_invariants(d in arb_dist(60), eta in 0.01f64..1.0, cap in 1u64..64) {
            let p = ApproxParams::from_eta(eta, cap);
            let a = TailArray::from_distribution(&d, cap);
            let r = round_zeta_eta(&a, &p);
            prop_assert!(r.dominates(&a, 0.0));
            prop_assert_eq!(&round_zeta_eta(&r, &p), &r);
            prop_assert!(r.len() as f64 <= p.zeta.ceil() + 1.0);
            for &(_, v) in r.breakpoints() {
                let k = (-v.ln() / p.eta.ln_1p()).round();
                prop_assert!(v == p.floor() || (k <= p.zeta && v == p.grid(k as u64)));
            }
        }
    }
}
