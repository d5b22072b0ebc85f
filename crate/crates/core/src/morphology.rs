//! 1-D binary morphology on the zero-velocity indicator.
//!
//! Border convention: dilation reads outside positions as 0 and erosion
//! reads them as 1, so a closing never creates a zero run at a border that
//! was not already there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{Axis, VelocitySeries};

/// Smallest structuring element width.
pub const MIN_WIDTH: usize = 3;
/// Largest closing width swept by the method.
pub const MAX_WIDTH: usize = 39;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BinarySignal(pub Vec<bool>);

impl BinarySignal {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Indicator of exactly-zero entries.
    pub fn zero_indicator(values: &[f64]) -> Self {
        BinarySignal(values.iter().map(|&v| v == 0.0).collect())
    }
}

impl From<Vec<bool>> for BinarySignal {
    fn from(v: Vec<bool>) -> Self {
        BinarySignal(v)
    }
}

/// Flat line segment of odd width `w >= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StructuringElement(usize);

impl StructuringElement {
    pub fn new(w: usize) -> Result<Self> {
        if w < MIN_WIDTH || w % 2 == 0 {
            return Err(Error::InvalidWidth(w));
        }
        Ok(StructuringElement(w))
    }

    pub fn width(self) -> usize {
        self.0
    }

    pub fn radius(self) -> usize {
        (self.0 - 1) / 2
    }
}

/// Odd widths `3, 5, ..., w_max`.
pub fn width_grid(w_max: usize) -> impl Iterator<Item = usize> + Clone {
    (MIN_WIDTH..=w_max).step_by(2)
}

fn prefix_ones(bits: &[bool]) -> Vec<usize> {
    let mut acc = Vec::with_capacity(bits.len() + 1);
    acc.push(0);
    let mut s = 0;
    for &b in bits {
        s += usize::from(b);
        acc.push(s);
    }
    acc
}

pub fn dilate(b: &BinarySignal, se: StructuringElement) -> BinarySignal {
    let n = b.len();
    let r = se.radius();
    let pre = prefix_ones(&b.0);
    BinarySignal(
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(r);
                let hi = (i + r + 1).min(n);
                pre[hi] - pre[lo] > 0
            })
            .collect(),
    )
}

pub fn erode(b: &BinarySignal, se: StructuringElement) -> BinarySignal {
    let n = b.len();
    let r = se.radius();
    let pre = prefix_ones(&b.0);
    BinarySignal(
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(r);
                let hi = (i + r + 1).min(n);
                // out-of-range positions count as ones
                pre[hi] - pre[lo] == hi - lo
            })
            .collect(),
    )
}

pub fn close(b: &BinarySignal, se: StructuringElement) -> BinarySignal {
    erode(&dilate(b, se), se)
}

/// Maximal runs of ones with their break instants.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ZeroRuns {
    /// Inclusive `(start, end)` index pairs, sorted and disjoint.
    pub runs: Vec<(usize, usize)>,
    /// Time of the lower-middle element of each run.
    pub break_instants: Vec<f64>,
}

impl ZeroRuns {
    pub fn count(&self) -> usize {
        self.runs.len()
    }
}

fn runs_of_ones(bits: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &b) in bits.iter().enumerate() {
        match (b, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, bits.len() - 1));
    }
    runs
}

pub fn run_count(b: &BinarySignal) -> usize {
    let bits = &b.0;
    bits.iter()
        .enumerate()
        .filter(|&(i, &v)| v && (i == 0 || !bits[i - 1]))
        .count()
}

pub fn zero_runs(b: &BinarySignal, times: &[f64]) -> Result<ZeroRuns> {
    if times.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: b.len(),
            right: times.len(),
        });
    }
    let runs = runs_of_ones(&b.0);
    let break_instants = runs.iter().map(|&(s, e)| times[s + (e - s) / 2]).collect();
    Ok(ZeroRuns {
        runs,
        break_instants,
    })
}

/// Zero runs of the closed indicator of one velocity component, computed
/// stroke by stroke so that closing never bridges a pen-up gap. Run
/// indices are global into the velocity series.
pub fn axis_zero_runs(v: &VelocitySeries, axis: Axis, se: StructuringElement) -> ZeroRuns {
    let comp = v.component(axis);
    let times = v.start_times();
    let mut out = ZeroRuns::default();
    for stroke in &v.strokes {
        let ind = BinarySignal::zero_indicator(&comp[stroke.clone()]);
        let closed = close(&ind, se);
        let local = zero_runs(&closed, &times[stroke.clone()]).expect("lengths agree");
        out.runs
            .extend(local.runs.iter().map(|&(s, e)| (s + stroke.start, e + stroke.start)));
        out.break_instants.extend(local.break_instants);
    }
    out
}

/// Per-axis zero-run counts after closing, for every width of the grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroProfile {
    pub w_max: usize,
    /// `counts_x[k]` is the count at width `3 + 2k`.
    pub counts_x: Vec<u32>,
    pub counts_y: Vec<u32>,
}

impl ZeroProfile {
    pub fn from_counts(w_max: usize, counts_x: Vec<u32>, counts_y: Vec<u32>) -> Self {
        debug_assert_eq!(counts_x.len(), width_grid(w_max).count());
        debug_assert_eq!(counts_y.len(), counts_x.len());
        ZeroProfile {
            w_max,
            counts_x,
            counts_y,
        }
    }

    pub fn counts(&self, axis: Axis) -> &[u32] {
        match axis {
            Axis::X => &self.counts_x,
            Axis::Y => &self.counts_y,
        }
    }

    pub fn count(&self, axis: Axis, w: usize) -> Option<u32> {
        if w < MIN_WIDTH || w % 2 == 0 || w > self.w_max {
            return None;
        }
        self.counts(axis).get((w - MIN_WIDTH) / 2).copied()
    }

    /// Restriction to a smaller `w_max`.
    pub fn truncated(&self, w_max: usize) -> ZeroProfile {
        let k = width_grid(w_max.min(self.w_max)).count();
        ZeroProfile {
            w_max: w_max.min(self.w_max),
            counts_x: self.counts_x[..k].to_vec(),
            counts_y: self.counts_y[..k].to_vec(),
        }
    }

    pub fn widths(&self) -> impl Iterator<Item = usize> + Clone {
        width_grid(self.w_max)
    }
}

/// Run counts of the closed zero indicator over `3..=w_max` for one axis.
pub fn count_zeros_over_w(v: &VelocitySeries, axis: Axis, w_max: usize) -> Vec<u32> {
    let comp = v.component(axis);
    let indicators: Vec<BinarySignal> = v
        .strokes
        .iter()
        .map(|s| BinarySignal::zero_indicator(&comp[s.clone()]))
        .collect();
    width_grid(w_max)
        .map(|w| {
            let se = StructuringElement(w);
            indicators
                .iter()
                .map(|ind| run_count(&close(ind, se)) as u32)
                .sum()
        })
        .collect()
}

pub fn zero_profile(v: &VelocitySeries, w_max: usize) -> ZeroProfile {
    ZeroProfile::from_counts(
        w_max,
        count_zeros_over_w(v, Axis::X, w_max),
        count_zeros_over_w(v, Axis::Y, w_max),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{compute_velocity, Sample, SymbolId, Trace};
    use proptest::prelude::*;

    fn sig(bits: &[u8]) -> BinarySignal {
        BinarySignal(bits.iter().map(|&b| b == 1).collect())
    }

    fn se(w: usize) -> StructuringElement {
        StructuringElement::new(w).unwrap()
    }

    /// Window-scan oracle with explicit padding values.
    fn scan(b: &[bool], w: usize, pad: bool, any: bool) -> Vec<bool> {
        let r = (w as isize - 1) / 2;
        (0..b.len() as isize)
            .map(|i| {
                let mut vals = (i - r..=i + r).map(|j| {
                    if j < 0 || j >= b.len() as isize {
                        pad
                    } else {
                        b[j as usize]
                    }
                });
                if any {
                    vals.any(|v| v)
                } else {
                    vals.all(|v| v)
                }
            })
            .collect()
    }

    #[test]
    fn structuring_element_validation() {
        assert!(StructuringElement::new(1).is_err());
        assert!(StructuringElement::new(4).is_err());
        assert_eq!(se(7).radius(), 3);
        assert_eq!(width_grid(9).collect::<Vec<_>>(), vec![3, 5, 7, 9]);
    }

    #[test]
    fn dilation_examples() {
        assert_eq!(dilate(&sig(&[0, 0, 0]), se(3)), sig(&[0, 0, 0]));
        assert_eq!(dilate(&sig(&[0, 1, 0, 0]), se(3)), sig(&[1, 1, 1, 0]));
        assert_eq!(scan(&sig(&[0, 1, 0, 0]).0, 3, false, true), sig(&[1, 1, 1, 0]).0);
        for w in [3, 9, 21] {
            assert_eq!(dilate(&sig(&[1; 6]), se(w)), sig(&[1; 6]));
        }
    }

    #[test]
    fn erosion_examples() {
        assert_eq!(erode(&sig(&[1; 7]), se(5)), sig(&[1; 7]));
        assert_eq!(erode(&sig(&[1, 1, 0, 1, 1]), se(3)), sig(&[1, 0, 0, 0, 1]));
        assert_eq!(scan(&sig(&[1, 1, 0, 1, 1]).0, 3, true, false), sig(&[1, 0, 0, 0, 1]).0);
        assert_eq!(erode(&sig(&[1]), se(3)), sig(&[1]));
    }

    #[test]
    fn closing_examples() {
        assert_eq!(close(&sig(&[1, 0, 0, 1]), se(3)), sig(&[1, 1, 1, 1]));
        assert_eq!(close(&sig(&[1, 0, 0, 0, 1]), se(3)), sig(&[1, 0, 0, 0, 1]));
        for w in [3, 5, 39] {
            assert_eq!(close(&sig(&[0; 12]), se(w)), sig(&[0; 12]));
        }
    }

    #[test]
    fn zero_run_examples() {
        let runs = zero_runs(&sig(&[1, 1, 0, 1]), &[0.0, 0.005, 0.010, 0.015]).unwrap();
        assert_eq!(runs.runs, vec![(0, 1), (3, 3)]);
        assert_eq!(runs.break_instants, vec![0.0, 0.015]);

        assert_eq!(zero_runs(&sig(&[0; 5]), &[0.0; 5]).unwrap().count(), 0);

        let times: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let all = zero_runs(&sig(&[1; 9]), &times).unwrap();
        assert_eq!(all.count(), 1);
        assert_eq!(all.break_instants, vec![times[4]]);

        assert!(zero_runs(&sig(&[1, 0]), &[0.0]).is_err());
    }

    #[test]
    fn constant_position_counts_one_for_every_width() {
        let samples = (0..40).map(|i| Sample::new(i as f64 / 200.0, 2.0, 3.0, true)).collect();
        let trace = Trace::new(SymbolId::from_index(0).unwrap(), samples, 0.25).unwrap();
        let v = compute_velocity(&trace).unwrap();
        let p = zero_profile(&v, 39);
        assert!(p.counts_x.iter().all(|&c| c == 1));
        assert!(p.counts_y.iter().all(|&c| c == 1));
        assert_eq!(p.count(Axis::X, 17), Some(1));
        assert_eq!(p.count(Axis::X, 41), None);
        assert_eq!(p.truncated(23).counts_x.len(), 11);
    }

    #[test]
    fn closing_does_not_bridge_strokes() {
        // two strokes each with a zero run at the shared boundary region
        let mut samples = Vec::new();
        let mut t = 0.0;
        for i in 0..10 {
            samples.push(Sample::new(t, if i < 5 { 0.0 } else { (i - 4) as f64 }, 0.0, true));
            t += 0.005;
        }
        samples.push(Sample::new(t, 9.0, 0.0, false));
        t += 0.005;
        for i in 0..10 {
            samples.push(Sample::new(t, 20.0 + i as f64, 0.0, true));
            t += 0.005;
        }
        let trace = Trace::new(SymbolId::from_index(0).unwrap(), samples, 0.25).unwrap();
        let v = compute_velocity(&trace).unwrap();
        assert_eq!(v.strokes.len(), 2);
        let runs = axis_zero_runs(&v, Axis::X, se(3));
        assert_eq!(runs.count(), 1);
        assert_eq!(count_zeros_over_w(&v, Axis::X, 5), vec![1, 1]);
    }

    proptest! {
        #[test]
        fn operators_match_window_scan(bits in proptest::collection::vec(any::<bool>(), 1..120), k in 1usize..20) {
            let w = 2 * k + 1;
            let b = BinarySignal(bits.clone());
            let d = scan(&bits, w, false, true);
            prop_assert_eq!(&dilate(&b, se(w)).0, &d);
            prop_assert_eq!(&erode(&b, se(w)).0, &scan(&bits, w, true, false));
            prop_assert_eq!(&close(&b, se(w)).0, &scan(&d, w, true, false));
        }

        #[test]
        fn closing_is_extensive_idempotent_and_monotone(bits in proptest::collection::vec(any::<bool>(), 1..150)) {
            let b = BinarySignal(bits.clone());
            let mut prev = usize::MAX;
            for w in width_grid(MAX_WIDTH) {
                let c = close(&b, se(w));
                prop_assert!(bits.iter().zip(&c.0).all(|(&o, &n)| n || !o));
                prop_assert_eq!(&close(&c, se(w)), &c);
                let n = run_count(&c);
                prop_assert!(n <= prev);
                prev = n;
            }
        }

        #[test]
        fn dilation_erosion_duality(bits in proptest::collection::vec(any::<bool>(), 1..100), k in 1usize..10) {
            let w = 2 * k + 1;
            let b = BinarySignal(bits.clone());
            let not_b = BinarySignal(bits.iter().map(|v| !v).collect());
            let lhs = dilate(&not_b, se(w));
            let rhs: Vec<bool> = erode(&b, se(w)).0.into_iter().map(|v| !v).collect();
            prop_assert_eq!(lhs.0, rhs);
        }

        #[test]
        fn profile_counts_match_brute_force(bits in proptest::collection::vec(any::<bool>(), 2..120)) {
            // build a one-stroke velocity series whose x indicator is `bits`
            let mut x = 0.0;
            let mut samples = vec![Sample::new(0.0, 0.0, 0.0, true)];
            for (i, &zero) in bits.iter().enumerate() {
                if !zero { x += 0.25; }
                samples.push(Sample::new((i + 1) as f64 / 200.0, x, 0.0, true));
            }
            while samples.len() < 4 {
                let t = samples.len() as f64 / 200.0;
                samples.push(Sample::new(t, x + 0.25 * samples.len() as f64, 0.0, true));
            }
            let trace = Trace::new(SymbolId::from_index(0).unwrap(), samples, 0.25).unwrap();
            let v = compute_velocity(&trace).unwrap();
            let ind = BinarySignal::zero_indicator(&v.component(Axis::X));
            let counts = count_zeros_over_w(&v, Axis::X, MAX_WIDTH);
            for (k, w) in width_grid(MAX_WIDTH).enumerate() {
                let closed = scan(&scan(&ind.0, w, false, true), w, true, false);
                let brute = closed.iter().enumerate().filter(|&(i, &b)| b && (i == 0 || !closed[i - 1])).count();
                prop_assert_eq!(counts[k] as usize, brute);
            }
        }
    }
}
