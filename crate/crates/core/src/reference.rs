//! Age-indexed reference of expected zero counts and per-trace width
//! estimation.
//!
//! For a symbol, an axis and an age `a` (in months), the reference value is
//! the median of every zero count `n_i(w)`, `w` in `3..=w_max`, of every
//! typically developing writer `i` whose age lies within `a ± 3` months.
//! A trace's width estimate is the smallest grid width at which its own
//! count drops to that reference value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::ChildRecord;
use crate::morphology::{width_grid, ZeroProfile, MIN_WIDTH};
use crate::stats::{median, CountHistogram};
use crate::trace::{Axis, SymbolId};

/// Half-width of the age window.
pub const AGE_WINDOW_MONTHS: u32 = 3;

/// Monthly age grid `[min, max]`, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeGrid {
    pub min_months: u32,
    pub max_months: u32,
}

impl AgeGrid {
    pub fn new(min_months: u32, max_months: u32) -> Self {
        assert!(min_months <= max_months, "empty age grid");
        AgeGrid {
            min_months,
            max_months,
        }
    }

    /// Grid spanning the ages of the given children.
    pub fn spanning<'a>(children: impl IntoIterator<Item = &'a ChildRecord>) -> Option<Self> {
        let mut it = children.into_iter().map(|c| c.age_months);
        let first = it.next()?;
        let (lo, hi) = it.fold((first, first), |(lo, hi), a| (lo.min(a), hi.max(a)));
        Some(AgeGrid::new(lo, hi))
    }

    pub fn len(&self) -> usize {
        (self.max_months - self.min_months + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ages(&self) -> impl Iterator<Item = u32> {
        self.min_months..=self.max_months
    }

    fn index(&self, age: u32) -> usize {
        (age.clamp(self.min_months, self.max_months) - self.min_months) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCell {
    /// Reference zero count after nearest-age borrowing; `None` when the
    /// symbol has no support at any age.
    pub n: Option<f64>,
    /// Number of aggregated `(child, w)` observations at this exact age.
    pub support: u64,
}

/// Reference zero counts per (symbol, axis, age).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub w_max: usize,
    pub ages: AgeGrid,
    /// `cells[symbol][axis][age_index]`, axis 0 = x.
    cells: Vec<[Vec<ReferenceCell>; 2]>,
    /// Child ids that contributed, in input order.
    pub contributors: Vec<String>,
}

fn axis_slot(axis: Axis) -> usize {
    match axis {
        Axis::X => 0,
        Axis::Y => 1,
    }
}

impl ReferenceTable {
    /// Build from typically developing writers only. `profile_of` returns the
    /// zero profile of a child's trace for a symbol (computed up to at least
    /// `w_max`), or `None` when the symbol is absent.
    pub fn build<'a, F>(
        td_children: &[&'a ChildRecord],
        profile_of: F,
        w_max: usize,
        ages: AgeGrid,
    ) -> Result<Self>
    where
        F: Fn(&'a ChildRecord, SymbolId) -> Option<&'a ZeroProfile>,
    {
        if w_max < MIN_WIDTH || w_max % 2 == 0 {
            return Err(Error::InvalidWidth(w_max));
        }
        if let Some(c) = td_children.iter().find(|c| c.dysgraphia) {
            return Err(Error::Reference(format!(
                "child {:?} is labelled dysgraphic; the reference uses typically developing writers only",
                c.child_id
            )));
        }
        let n_ages = ages.len();
        let mut cells = Vec::with_capacity(SymbolId::COUNT);
        for symbol in SymbolId::all() {
            let mut per_axis: [Vec<ReferenceCell>; 2] = [Vec::new(), Vec::new()];
            for axis in Axis::BOTH {
                // histogram of counts per exact age (ages outside the grid clamp in)
                let mut by_age: BTreeMap<u32, CountHistogram> = BTreeMap::new();
                for child in td_children {
                    let Some(profile) = profile_of(child, symbol) else {
                        continue;
                    };
                    if profile.w_max < w_max {
                        return Err(Error::Reference(format!(
                            "profile of {:?}/{symbol} computed to w_max {} < {w_max}",
                            child.child_id, profile.w_max
                        )));
                    }
                    let hist = by_age.entry(child.age_months).or_default();
                    let k = width_grid(w_max).count();
                    for &c in &profile.counts(axis)[..k] {
                        hist.add(c, 1);
                    }
                }
                let mut own: Vec<Option<f64>> = Vec::with_capacity(n_ages);
                let mut support = Vec::with_capacity(n_ages);
                for age in ages.ages() {
                    let lo = age.saturating_sub(AGE_WINDOW_MONTHS);
                    let hi = age + AGE_WINDOW_MONTHS;
                    let mut merged = CountHistogram::new();
                    for (_, h) in by_age.range(lo..=hi) {
                        merged.merge(h);
                    }
                    support.push(merged.total());
                    own.push(merged.median());
                }
                let filled = fill_nearest(&own);
                per_axis[axis_slot(axis)] = filled
                    .into_iter()
                    .zip(support)
                    .map(|(n, support)| ReferenceCell { n, support })
                    .collect();
            }
            cells.push(per_axis);
        }
        Ok(ReferenceTable {
            w_max,
            ages,
            cells,
            contributors: td_children.iter().map(|c| c.child_id.clone()).collect(),
        })
    }

    pub fn cell(&self, symbol: SymbolId, axis: Axis, age_months: u32) -> ReferenceCell {
        self.cells[symbol.index()][axis_slot(axis)][self.ages.index(age_months)]
    }

    /// Reference count for a writer of the given age; ages outside the grid
    /// use the nearest grid age.
    pub fn lookup(&self, symbol: SymbolId, axis: Axis, age_months: u32) -> Result<f64> {
        self.cell(symbol, axis, age_months)
            .n
            .ok_or(Error::UnsupportedReference { symbol, age_months })
    }

    /// `symbol,axis,age_months,N,support` rows preceded by a `# w_max=` line.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# w_max={}\nsymbol,axis,age_months,N,support\n", self.w_max);
        for symbol in SymbolId::all() {
            for axis in Axis::BOTH {
                for age in self.ages.ages() {
                    let c = self.cell(symbol, axis, age);
                    let n = c.n.map(|v| v.to_string()).unwrap_or_default();
                    out.push_str(&format!("{symbol},{axis},{age},{n},{}\n", c.support));
                }
            }
        }
        out
    }

    pub fn from_csv(content: &str) -> Result<Self> {
        let mut w_max = None;
        let mut rows: Vec<(SymbolId, Axis, u32, Option<f64>, u64)> = Vec::new();
        let mut header_seen = false;
        for (idx, line) in content.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("w_max=") {
                    w_max = Some(v.trim().parse::<usize>().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("bad w_max {v:?}"),
                    })?);
                }
                continue;
            }
            if !header_seen {
                if line != "symbol,axis,age_months,N,support" {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("unexpected header {line:?}"),
                    });
                }
                header_seen = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = |m: &str| Error::Parse {
                line: line_no,
                message: m.to_string(),
            };
            if f.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let symbol: SymbolId = f[0].parse()?;
            let axis: Axis = f[1].parse()?;
            let age: u32 = f[2].parse().map_err(|_| bad("bad age"))?;
            let n = if f[3].is_empty() {
                None
            } else {
                Some(f[3].parse::<f64>().map_err(|_| bad("bad N"))?)
            };
            let support: u64 = f[4].parse().map_err(|_| bad("bad support"))?;
            rows.push((symbol, axis, age, n, support));
        }
        let w_max = w_max.ok_or_else(|| Error::Reference("missing # w_max= line".into()))?;
        let (lo, hi) = rows
            .iter()
            .fold((u32::MAX, 0), |(lo, hi), r| (lo.min(r.2), hi.max(r.2)));
        if rows.is_empty() {
            return Err(Error::Reference("no rows".into()));
        }
        let ages = AgeGrid::new(lo, hi);
        let empty = ReferenceCell { n: None, support: 0 };
        let mut cells: Vec<[Vec<ReferenceCell>; 2]> = (0..SymbolId::COUNT)
            .map(|_| [vec![empty; ages.len()], vec![empty; ages.len()]])
            .collect();
        let mut filled = vec![[vec![false; ages.len()], vec![false; ages.len()]]; SymbolId::COUNT];
        for (symbol, axis, age, n, support) in rows {
            let i = ages.index(age);
            cells[symbol.index()][axis_slot(axis)][i] = ReferenceCell { n, support };
            filled[symbol.index()][axis_slot(axis)][i] = true;
        }
        if filled.iter().flatten().flatten().any(|f| !f) {
            return Err(Error::Reference("incomplete table: missing rows".into()));
        }
        Ok(ReferenceTable {
            w_max,
            ages,
            cells,
            contributors: Vec::new(),
        })
    }
}

/// Replace empty cells by the value at the nearest non-empty index
/// (ties go to the lower index).
fn fill_nearest(own: &[Option<f64>]) -> Vec<Option<f64>> {
    let supported: Vec<usize> = own
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|_| i))
        .collect();
    if supported.is_empty() {
        return vec![None; own.len()];
    }
    (0..own.len())
        .map(|i| {
            if own[i].is_some() {
                return own[i];
            }
            let pos = supported.partition_point(|&s| s < i);
            let below = pos.checked_sub(1).map(|p| supported[p]);
            let above = supported.get(pos).copied();
            let pick = match (below, above) {
                (Some(b), Some(a)) => {
                    if i - b <= a - i {
                        b
                    } else {
                        a
                    }
                }
                (Some(b), None) => b,
                (None, Some(a)) => a,
                (None, None) => unreachable!(),
            };
            own[pick]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub w_hat_x: usize,
    pub w_hat_y: usize,
    pub saturated_x: bool,
    pub saturated_y: bool,
}

impl WidthEstimate {
    pub fn get(&self, axis: Axis) -> (usize, bool) {
        match axis {
            Axis::X => (self.w_hat_x, self.saturated_x),
            Axis::Y => (self.w_hat_y, self.saturated_y),
        }
    }
}

/// Smallest grid width whose count is at most `target`; `(w_max, true)` if
/// none qualifies.
pub fn min_width_at_most(counts: &[u32], w_max: usize, target: f64) -> (usize, bool) {
    width_grid(w_max)
        .zip(counts)
        .find(|&(_, &c)| c as f64 <= target)
        .map(|(w, _)| (w, false))
        .unwrap_or((w_max, true))
}

pub fn estimate_w(
    profile: &ZeroProfile,
    reference: &ReferenceTable,
    age_months: u32,
    symbol: SymbolId,
) -> Result<WidthEstimate> {
    let w_max = reference.w_max;
    if profile.w_max < w_max {
        return Err(Error::Reference(format!(
            "profile computed to w_max {} < reference w_max {w_max}",
            profile.w_max
        )));
    }
    let nx = reference.lookup(symbol, Axis::X, age_months)?;
    let ny = reference.lookup(symbol, Axis::Y, age_months)?;
    let (w_hat_x, saturated_x) = min_width_at_most(&profile.counts_x, w_max, nx);
    let (w_hat_y, saturated_y) = min_width_at_most(&profile.counts_y, w_max, ny);
    Ok(WidthEstimate {
        w_hat_x,
        w_hat_y,
        saturated_x,
        saturated_y,
    })
}

/// Median zero count of one writer over the width grid.
pub fn median_zero_count(profile: &ZeroProfile, axis: Axis) -> f64 {
    let values: Vec<f64> = profile.counts(axis).iter().map(|&c| c as f64).collect();
    median(&values).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(counts: &[u32]) -> ZeroProfile {
        let w_max = MIN_WIDTH + 2 * (counts.len() - 1);
        ZeroProfile::from_counts(w_max, counts.to_vec(), counts.to_vec())
    }

    fn sym(i: usize) -> SymbolId {
        SymbolId::from_index(i).unwrap()
    }

    /// A table where symbol `a`, both axes, holds the given per-child profiles.
    fn table_from(kids: &[(u32, Vec<u32>)], w_max: usize, ages: AgeGrid) -> ReferenceTable {
        let children: Vec<ChildRecord> = kids
            .iter()
            .enumerate()
            .map(|(i, (age, _))| ChildRecord::new(format!("T{i}"), *age, 3, false))
            .collect();
        let profiles: Vec<ZeroProfile> = kids.iter().map(|(_, c)| profile(c)).collect();
        let refs: Vec<&ChildRecord> = children.iter().collect();
        let lookup = |c: &ChildRecord, s: SymbolId| {
            let i: usize = c.child_id[1..].parse().unwrap();
            (s.index() == 0).then(|| &profiles[i])
        };
        ReferenceTable::build(&refs, lookup, w_max, ages).unwrap()
    }

    #[test]
    fn aggregated_median_odd_and_even() {
        // one child at age 100 with counts {4,5,6,6,7} over w = 3..11
        let t = table_from(&[(100, vec![4, 5, 6, 6, 7])], 11, AgeGrid::new(100, 100));
        assert_eq!(t.lookup(sym(0), Axis::X, 100).unwrap(), 6.0);
        let t = table_from(&[(100, vec![4, 6])], 5, AgeGrid::new(100, 100));
        assert_eq!(t.lookup(sym(0), Axis::Y, 100).unwrap(), 5.0);
    }

    #[test]
    fn window_is_plus_minus_three_months() {
        let kids = vec![(100, vec![10, 10]), (103, vec![2, 2]), (104, vec![50, 50])];
        let t = table_from(&kids, 5, AgeGrid::new(95, 110));
        // at 100: children aged 100 and 103 -> {10,10,2,2} -> 6
        assert_eq!(t.lookup(sym(0), Axis::X, 100).unwrap(), 6.0);
        assert_eq!(t.cell(sym(0), Axis::X, 100).support, 4);
        // at 107: only the child aged 104
        assert_eq!(t.lookup(sym(0), Axis::X, 107).unwrap(), 50.0);
    }

    #[test]
    fn unsupported_ages_borrow_nearest() {
        let kids = vec![(80, vec![9, 9]), (120, vec![3, 3])];
        let t = table_from(&kids, 5, AgeGrid::new(78, 130));
        let c = t.cell(sym(0), Axis::X, 95);
        assert_eq!(c.support, 0);
        assert_eq!(c.n, Some(9.0)); // 83 is nearer than 117
        assert_eq!(t.lookup(sym(0), Axis::X, 110).unwrap(), 3.0);
        // outside the grid clamps to the boundary age
        assert_eq!(t.lookup(sym(0), Axis::X, 200).unwrap(), 3.0);
        // symbols nobody wrote are unsupported
        assert!(matches!(
            t.lookup(sym(5), Axis::X, 100),
            Err(Error::UnsupportedReference { .. })
        ));
    }

    #[test]
    fn dysgraphic_children_rejected() {
        let c = ChildRecord::new("D1", 100, 3, true);
        let p = profile(&[1, 1]);
        let err = ReferenceTable::build(&[&c], |_, _| Some(&p), 5, AgeGrid::new(100, 100));
        assert!(matches!(err, Err(Error::Reference(_))));
    }

    #[test]
    fn estimate_examples() {
        let t = table_from(&[(100, vec![8; 5])], 11, AgeGrid::new(100, 100));
        let est = estimate_w(&profile(&[12, 10, 8, 8, 6]), &t, 100, sym(0)).unwrap();
        assert_eq!((est.w_hat_x, est.saturated_x), (7, false));

        let est = estimate_w(&profile(&[7, 7, 7, 7, 7]), &t, 100, sym(0)).unwrap();
        assert_eq!((est.w_hat_y, est.saturated_y), (3, false));

        let est = estimate_w(&profile(&[20, 19, 18, 17, 9]), &t, 100, sym(0)).unwrap();
        assert_eq!((est.w_hat_x, est.saturated_x), (11, true));
    }

    #[test]
    fn per_child_median_examples() {
        assert_eq!(median_zero_count(&profile(&[7; 6]), Axis::X), 7.0);
        assert_eq!(median_zero_count(&profile(&[12, 10, 8, 8, 6]), Axis::X), 8.0);
    }

    #[test]
    fn csv_round_trip() {
        let kids = vec![(80, vec![9, 8, 7]), (90, vec![3, 3, 2])];
        let t = table_from(&kids, 7, AgeGrid::new(78, 92));
        let back = ReferenceTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.w_max, 7);
        for age in 78..=92 {
            for s in [sym(0), sym(1)] {
                assert_eq!(back.cell(s, Axis::X, age), t.cell(s, Axis::X, age));
            }
        }
    }

    proptest! {
        #[test]
        fn estimate_matches_exhaustive_scan(
            mut counts in proptest::collection::vec(0u32..30, 19),
            target in 0.0f64..30.0,
        ) {
            counts.sort_unstable_by(|a, b| b.cmp(a));
            let (w, sat) = min_width_at_most(&counts, 39, target);
            let mut expect = (39, true);
            for (k, wv) in (3..=39).step_by(2).enumerate() {
                if counts[k] as f64 <= target {
                    expect = (wv, false);
                    break;
                }
            }
            prop_assert_eq!((w, sat), expect);
        }

        #[test]
        fn w_hat_nonincreasing_in_reference(
            mut counts in proptest::collection::vec(0u32..30, 19),
            a in 0.0f64..30.0,
            b in 0.0f64..30.0,
        ) {
            counts.sort_unstable_by(|x, y| y.cmp(x));
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(min_width_at_most(&counts, 39, hi).0 <= min_width_at_most(&counts, 39, lo).0);
        }
    }
}
