//! Synthetic handwriting with known oscillator structure.
//!
//! A symbol template is a sequence of phases; during a phase each axis
//! either dwells or traces one half-sine velocity lobe, so positions are the
//! exact integral of a piecewise-sinusoidal velocity. Dysgraphia-like
//! perturbations are extra full stops inserted mid-movement and additive
//! tremor. Cohorts combine both with an age trend and missing symbols.

use std::f64::consts::PI;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{ChildRecord, MAX_AGE_MONTHS, MIN_AGE_MONTHS};
use crate::pomh::PomhSegment;
use crate::seed::{derive, derive_path, rng, tag_str, Rng};
use crate::trace::{snap_to_grid, Sample, SymbolId, Trace, DEFAULT_RESOLUTION_MM, NOMINAL_RATE_HZ};

/// One phase of a stroke: `samples` sampling intervals during which the pen
/// moves by `(dx, dy)` along half-sine velocity lobes (0 = dwell).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub samples: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Phase {
    pub fn new(samples: usize, dx: f64, dy: f64) -> Self {
        Phase { samples, dx, dy }
    }

    pub fn dwell(samples: usize) -> Self {
        Phase::new(samples, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolTemplate {
    pub symbol: SymbolId,
    /// Pen-down strokes; each is a sequence of phases.
    pub strokes: Vec<Vec<Phase>>,
    /// Sampling intervals spent airborne between consecutive strokes.
    pub pen_up_samples: usize,
    /// Pen displacement while airborne, in mm.
    pub pen_up_offset: (f64, f64),
}

impl SymbolTemplate {
    pub fn single_stroke(symbol: SymbolId, phases: Vec<Phase>) -> Self {
        SymbolTemplate {
            symbol,
            strokes: vec![phases],
            pen_up_samples: 0,
            pen_up_offset: (0.0, 0.0),
        }
    }

    /// Number of samples in the generated trace.
    pub fn n_samples(&self) -> usize {
        let moving: usize = self.strokes.iter().flatten().map(|p| p.samples).sum();
        moving + self.pen_up_samples * self.strokes.len().saturating_sub(1) + 1
    }

    /// Durations divided by `speed`, displacements multiplied by `size`.
    pub fn scaled(&self, speed: f64, size: f64) -> Self {
        let mut t = self.clone();
        for p in t.strokes.iter_mut().flatten() {
            p.samples = ((p.samples as f64 / speed).round() as usize).max(2);
            p.dx *= size;
            p.dy *= size;
        }
        t.pen_up_samples = (t.pen_up_samples as f64 / speed).round() as usize;
        t
    }

    /// Ground-truth oscillator segments of each axis (dwells omitted).
    pub fn segments(&self, rate_hz: f64) -> (Vec<PomhSegment>, Vec<PomhSegment>) {
        let h = 1.0 / rate_hz;
        let (mut sx, mut sy) = (Vec::new(), Vec::new());
        let mut k = 0usize;
        for (i, stroke) in self.strokes.iter().enumerate() {
            if i > 0 {
                k += self.pen_up_samples;
            }
            for p in stroke {
                let (t0, t1) = (k as f64 * h, (k + p.samples) as f64 * h);
                let span = t1 - t0;
                if p.dx != 0.0 {
                    sx.push(PomhSegment::new(t0, t1, PI * p.dx / (2.0 * span)));
                }
                if p.dy != 0.0 {
                    sy.push(PomhSegment::new(t0, t1, PI * p.dy / (2.0 * span)));
                }
                k += p.samples;
            }
        }
        (sx, sy)
    }
}

/// Exact positions of a template sampled at `rate_hz`, plus Gaussian noise,
/// quantized to `resolution_mm`.
pub fn gen_smooth_trace(
    template: &SymbolTemplate,
    rate_hz: f64,
    resolution_mm: f64,
    noise_sd_mm: f64,
    rng: &mut Rng,
) -> Result<Trace> {
    if template.strokes.is_empty() || template.strokes.iter().any(|s| s.is_empty()) {
        return Err(Error::Generator("template needs non-empty strokes".into()));
    }
    let h = 1.0 / rate_hz;
    let mut samples = Vec::with_capacity(template.n_samples());
    let (mut x, mut y) = (0.0f64, 0.0f64);
    let mut k = 0usize;
    samples.push(Sample::new(0.0, x, y, true));
    for (i, stroke) in template.strokes.iter().enumerate() {
        if i > 0 {
            let n = template.pen_up_samples.max(1);
            let (ox, oy) = template.pen_up_offset;
            for j in 1..=n {
                let f = j as f64 / n as f64;
                samples.push(Sample::new((k + j) as f64 * h, x + ox * f, y + oy * f, j == n));
            }
            x += ox;
            y += oy;
            k += n;
        }
        for p in stroke {
            for j in 1..=p.samples {
                let s = 0.5 * (1.0 - (PI * j as f64 / p.samples as f64).cos());
                samples.push(Sample::new((k + j) as f64 * h, x + p.dx * s, y + p.dy * s, true));
            }
            x += p.dx;
            y += p.dy;
            k += p.samples;
        }
    }
    if noise_sd_mm > 0.0 {
        let normal = Normal::new(0.0, noise_sd_mm)
            .map_err(|e| Error::Generator(format!("noise: {e}")))?;
        for s in &mut samples {
            s.x += normal.sample(rng);
            s.y += normal.sample(rng);
        }
    }
    for s in &mut samples {
        s.x = snap_to_grid(s.x, resolution_mm);
        s.y = snap_to_grid(s.y, resolution_mm);
    }
    Trace::new(template.symbol, samples, resolution_mm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub extra_stops: u32,
    pub stop_duration_s: f64,
    pub tremor_amp_mm: f64,
    pub tremor_hz: f64,
    /// Preferred number of moving sampling intervals (both axes) on each side
    /// of an inserted stop; halved down to 1 when no sample qualifies.
    pub stop_margin: usize,
}

impl Perturbation {
    pub fn none() -> Self {
        Perturbation {
            extra_stops: 0,
            stop_duration_s: 0.0,
            tremor_amp_mm: 0.0,
            tremor_hz: 0.0,
            stop_margin: 8,
        }
    }

    pub fn is_identity(&self) -> bool {
        (self.extra_stops == 0 || self.stop_duration_s <= 0.0) && self.tremor_amp_mm == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Edit {
    Stop { at_sample: usize, samples: usize },
    /// A movement phase written twice, separated by a pause.
    Repeat { stroke: usize, phase: usize, pause_samples: usize },
    Tremor { amp_mm: f64, hz: f64, phase_x: f64, phase_y: f64 },
    StopSkipped { reason: String },
}

fn moving_runs(trace: &Trace) -> (Vec<usize>, Vec<usize>) {
    // For each sample k, the number of consecutive intervals ending at k
    // (backward) and starting at k (forward) whose displacement is nonzero on
    // both axes within the same stroke.
    let s = trace.samples();
    let n = s.len();
    let moving: Vec<bool> = s
        .windows(2)
        .map(|w| w[0].pen_down && w[1].pen_down && w[1].x != w[0].x && w[1].y != w[0].y)
        .collect();
    let mut back = vec![0usize; n];
    for k in 1..n {
        back[k] = if moving[k - 1] { back[k - 1] + 1 } else { 0 };
    }
    let mut fwd = vec![0usize; n];
    for k in (0..n - 1).rev() {
        fwd[k] = if moving[k] { fwd[k + 1] + 1 } else { 0 };
    }
    (back, fwd)
}

/// Insert full stops and add tremor; every edit is logged.
pub fn perturb_trace(trace: &Trace, p: &Perturbation, rng: &mut Rng) -> Result<(Trace, Vec<Edit>)> {
    let mut edits = Vec::new();
    if p.is_identity() {
        return Ok((trace.clone(), edits));
    }
    let res = trace.resolution_mm();
    let mut samples = trace.samples().to_vec();
    let h = median_step(&samples);
    let stop_samples = (p.stop_duration_s / h).round() as usize;
    if stop_samples > 0 {
        for _ in 0..p.extra_stops {
            let current = Trace::new(trace.symbol(), samples.clone(), res)?;
            let (back, fwd) = moving_runs(&current);
            // relax the margin before giving up on short moving runs
            let candidates: Vec<usize> = std::iter::successors(Some(p.stop_margin.max(1)), |&m| (m > 1).then(|| m / 2))
                .map(|m| (0..samples.len()).filter(|&k| back[k] >= m && fwd[k] >= m).collect::<Vec<_>>())
                .find(|c| !c.is_empty())
                .unwrap_or_default();
            let Some(&k) = candidates.get(rng.random_range(0..candidates.len().max(1))) else {
                edits.push(Edit::StopSkipped {
                    reason: "no sample with a moving interval on both sides".into(),
                });
                continue;
            };
            let anchor = samples[k];
            let shift = stop_samples as f64 * h;
            for s in &mut samples[k + 1..] {
                s.t += shift;
            }
            let dwell = (1..=stop_samples).map(|j| Sample { t: anchor.t + j as f64 * h, ..anchor });
            samples.splice(k + 1..k + 1, dwell);
            edits.push(Edit::Stop { at_sample: k, samples: stop_samples });
        }
    }
    if p.tremor_amp_mm != 0.0 {
        let phase_x = rng.random_range(0.0..2.0 * PI);
        let phase_y = rng.random_range(0.0..2.0 * PI);
        let w = 2.0 * PI * p.tremor_hz;
        for s in samples.iter_mut().filter(|s| s.pen_down) {
            s.x = snap_to_grid(s.x + p.tremor_amp_mm * (w * s.t + phase_x).sin(), res);
            s.y = snap_to_grid(s.y + p.tremor_amp_mm * (w * s.t + phase_y).sin(), res);
        }
        edits.push(Edit::Tremor {
            amp_mm: p.tremor_amp_mm,
            hz: p.tremor_hz,
            phase_x,
            phase_y,
        });
    }
    Ok((Trace::new(trace.symbol(), samples, res)?, edits))
}

fn median_step(samples: &[Sample]) -> f64 {
    let mut d: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    d.sort_by(|a, b| a.total_cmp(b));
    d[d.len() / 2]
}

/// Less fluent writing in younger children: extra corrective movements,
/// fewer with age.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeTrend {
    /// Mean number of repeated movements per symbol at the youngest age.
    pub repeats_at_min_age: f64,
    pub decline_per_year: f64,
    /// Multiplier on the mean for dysgraphic writers.
    pub dys_repeat_factor: f64,
}

impl AgeTrend {
    pub fn mean_repeats(&self, age_months: u32, dysgraphia: bool) -> f64 {
        let years = (age_months.saturating_sub(MIN_AGE_MONTHS)) as f64 / 12.0;
        let base = (self.repeats_at_min_age - self.decline_per_year * years).max(0.0);
        if dysgraphia {
            base * self.dys_repeat_factor
        } else {
            base
        }
    }
}

/// Write `n` randomly chosen movement phases twice, with a pause of
/// `pause_samples` in between. Every repeat adds one full-size velocity lobe
/// and one zero run per moving axis, so it survives closing at widths below
/// the movement's duration.
pub fn repeat_movements(
    template: &SymbolTemplate,
    n: u32,
    pause_samples: usize,
    rng: &mut Rng,
) -> (SymbolTemplate, Vec<Edit>) {
    let mut t = template.clone();
    let mut edits = Vec::new();
    for _ in 0..n {
        let moves: Vec<(usize, usize)> = t
            .strokes
            .iter()
            .enumerate()
            .flat_map(|(i, st)| st.iter().enumerate().filter(|(_, p)| p.dx != 0.0 || p.dy != 0.0).map(move |(j, _)| (i, j)))
            .collect();
        if moves.is_empty() {
            break;
        }
        let (i, j) = moves[rng.random_range(0..moves.len())];
        let p = t.strokes[i][j];
        t.strokes[i].splice(j..=j, [p, Phase::dwell(pause_samples), p]);
        edits.push(Edit::Repeat {
            stroke: i,
            phase: j,
            pause_samples,
        });
    }
    (t, edits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub rate_hz: f64,
    pub resolution_mm: f64,
    pub noise_sd_mm: f64,
    /// Applied to the affected symbols of dysgraphic writers.
    pub perturbation: Perturbation,
    /// Probability that a given symbol of a dysgraphic writer is perturbed.
    pub affected_fraction: f64,
    pub age_trend: AgeTrend,
    /// Pause before a repeated movement, in seconds.
    pub trend_pause_s: f64,
    /// Per-symbol probability that a symbol is missing.
    pub missing_td: f64,
    pub missing_dys: f64,
    /// Standard deviation of the per-writer log speed and log size factors.
    pub writer_sd: f64,
    /// Relative slowdown of dysgraphic writers.
    pub dys_slowdown: f64,
    pub template_seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec::calibrated()
    }
}

impl GeneratorSpec {
    /// Settings at which the planted signal is learnable but not trivial.
    pub fn calibrated() -> Self {
        GeneratorSpec {
            rate_hz: NOMINAL_RATE_HZ,
            resolution_mm: DEFAULT_RESOLUTION_MM,
            noise_sd_mm: 0.02,
            perturbation: Perturbation {
                extra_stops: 2,
                stop_duration_s: 0.06,
                tremor_amp_mm: 0.3,
                tremor_hz: 7.0,
                stop_margin: 4,
            },
            affected_fraction: 0.8,
            age_trend: AgeTrend {
                repeats_at_min_age: 2.0,
                decline_per_year: 0.2,
                dys_repeat_factor: 1.5,
            },
            trend_pause_s: 0.04,
            missing_td: 0.00767,
            missing_dys: 0.01249,
            writer_sd: 0.12,
            dys_slowdown: 0.1,
            template_seed: 0x5EED_7E3F,
        }
    }

    /// Same spec with perturbation magnitudes multiplied by `level`.
    pub fn with_level(&self, level: f64) -> Self {
        let mut s = self.clone();
        s.perturbation.extra_stops = (self.perturbation.extra_stops as f64 * level).round() as u32;
        s.perturbation.tremor_amp_mm *= level;
        s.age_trend.dys_repeat_factor = 1.0 + (self.age_trend.dys_repeat_factor - 1.0) * level;
        s.dys_slowdown *= level;
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Generator(m));
        if !(self.rate_hz > 0.0) || !(self.resolution_mm > 0.0) {
            return bad("rate and resolution must be positive".into());
        }
        if !(self.noise_sd_mm >= 0.0) || !(self.perturbation.tremor_amp_mm >= 0.0) {
            return bad("noise and tremor must be non-negative".into());
        }
        if self.perturbation.tremor_hz * 2.0 >= self.rate_hz {
            return bad(format!(
                "tremor {} Hz is not below the Nyquist rate of {} Hz sampling",
                self.perturbation.tremor_hz, self.rate_hz
            ));
        }
        for (name, p) in [
            ("affected_fraction", self.affected_fraction),
            ("missing_td", self.missing_td),
            ("missing_dys", self.missing_dys),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        Ok(())
    }

    pub fn templates(&self) -> Vec<SymbolTemplate> {
        default_templates(self.template_seed)
    }
}

/// Procedural templates, one per symbol: dwell, then alternating movement
/// phases and short pauses, then a final dwell. Every phase moves at least
/// one axis, often both; a fifth of the symbols have two strokes.
pub fn default_templates(seed: u64) -> Vec<SymbolTemplate> {
    SymbolId::all()
        .map(|symbol| {
            let mut r = rng(derive(seed, symbol.index() as u64));
            let n_strokes = if symbol.index() % 5 == 2 { 2 } else { 1 };
            let strokes = (0..n_strokes)
                .map(|_| {
                    let n_moves = r.random_range(3..=5);
                    let mut phases = vec![Phase::dwell(r.random_range(8..=14))];
                    for m in 0..n_moves {
                        let samples = r.random_range(26..=40);
                        let mag = |r: &mut Rng| {
                            let v: f64 = r.random_range(5.0..11.0);
                            if r.random_bool(0.5) {
                                v
                            } else {
                                -v
                            }
                        };
                        let (dx, dy) = match r.random_range(0..5) {
                            0 => (mag(&mut r), 0.0),
                            1 => (0.0, mag(&mut r)),
                            _ => (mag(&mut r), mag(&mut r)),
                        };
                        phases.push(Phase::new(samples, dx, dy));
                        if m + 1 < n_moves {
                            phases.push(Phase::dwell(r.random_range(6..=12)));
                        }
                    }
                    phases.push(Phase::dwell(r.random_range(8..=14)));
                    phases
                })
                .collect();
            SymbolTemplate {
                symbol,
                strokes,
                pen_up_samples: 30,
                pen_up_offset: (4.0, 3.0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub child_id: String,
    pub symbol: SymbolId,
    pub edits: Vec<Edit>,
    /// Whether this is a planted dysgraphia perturbation (as opposed to an
    /// age-trend repeat).
    pub planted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub children: Vec<ChildRecord>,
    pub provenance: Vec<ProvenanceEntry>,
}

pub fn grade_for_age(age_months: u32) -> u8 {
    ((age_months as i64 - 66) / 12).clamp(1, 9) as u8
}

pub fn gen_cohort(
    spec: &GeneratorSpec,
    n_children: usize,
    dys_fraction: f64,
    seed: u64,
) -> Result<SyntheticCohort> {
    gen_cohort_symbols(spec, n_children, dys_fraction, seed, &SymbolId::all().collect::<Vec<_>>())
}

/// Like [`gen_cohort`] restricted to a subset of symbols (the others are
/// left missing); per-symbol streams do not depend on the subset.
pub fn gen_cohort_symbols(
    spec: &GeneratorSpec,
    n_children: usize,
    dys_fraction: f64,
    seed: u64,
    symbols: &[SymbolId],
) -> Result<SyntheticCohort> {
    spec.validate()?;
    if n_children < 20 {
        return Err(Error::Generator(format!("need at least 20 children, got {n_children}")));
    }
    if !(0.0..=1.0).contains(&dys_fraction) {
        return Err(Error::Generator(format!("dys_fraction {dys_fraction} outside [0, 1]")));
    }
    let n_dys = (n_children as f64 * dys_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n_children).collect();
    order.shuffle(&mut rng(derive(seed, tag_str("labels"))));
    let mut is_dys = vec![false; n_children];
    for &i in &order[..n_dys] {
        is_dys[i] = true;
    }

    let templates = spec.templates();
    let width = n_children.to_string().len().max(4);
    let mut children = Vec::with_capacity(n_children);
    let mut provenance = Vec::new();
    for (i, &dys) in is_dys.iter().enumerate() {
        let child_seed = derive(seed, i as u64);
        let mut r = rng(child_seed);
        let age = r.random_range(MIN_AGE_MONTHS..=MAX_AGE_MONTHS);
        let child_id = format!("C{:0width$}", i + 1);
        let mut child = ChildRecord::new(child_id.clone(), age, grade_for_age(age), dys);

        // writer-level speed and size jitter; age acts through fluency
        // (the repeat trend), since speed alone moves zero counts in
        // opposite directions at small and large widths
        let jitter = Normal::new(0.0, spec.writer_sd.max(0.0) + f64::MIN_POSITIVE)
            .map_err(|e| Error::Generator(e.to_string()))?;
        let mut speed = jitter.sample(&mut r).exp();
        if dys {
            speed /= 1.0 + spec.dys_slowdown;
        }
        let size = jitter.sample(&mut r).exp();
        let missing_p = if dys { spec.missing_dys } else { spec.missing_td };
        let trend_mean = spec.age_trend.mean_repeats(age, dys);
        let pause_samples = (spec.trend_pause_s * spec.rate_hz).round() as usize;

        for &symbol in symbols {
            let mut rs = rng(derive_path(child_seed, &[1, symbol.index() as u64]));
            if rs.random_bool(missing_p) {
                continue;
            }
            let mut template = templates[symbol.index()].scaled(speed, size);
            let n_trend = if trend_mean > 0.0 {
                Poisson::new(trend_mean)
                    .map_err(|e| Error::Generator(e.to_string()))?
                    .sample(&mut rs) as u32
            } else {
                0
            };
            if n_trend > 0 {
                let (t, edits) = repeat_movements(&template, n_trend, pause_samples, &mut rs);
                template = t;
                provenance.push(ProvenanceEntry {
                    child_id: child_id.clone(),
                    symbol,
                    edits,
                    planted: false,
                });
            }
            let mut trace =
                gen_smooth_trace(&template, spec.rate_hz, spec.resolution_mm, spec.noise_sd_mm, &mut rs)?;
            if dys && rs.random_bool(spec.affected_fraction) {
                let (t, edits) = perturb_trace(&trace, &spec.perturbation, &mut rs)?;
                trace = t;
                provenance.push(ProvenanceEntry {
                    child_id: child_id.clone(),
                    symbol,
                    edits,
                    planted: true,
                });
            }
            child.set_trace(trace);
        }
        children.push(child);
    }
    let skipped = provenance
        .iter()
        .flat_map(|p| &p.edits)
        .filter(|e| matches!(e, Edit::StopSkipped { .. }))
        .count();
    if skipped > 0 {
        warn!("{skipped} requested stops had no admissible insertion point");
    }
    Ok(SyntheticCohort { children, provenance })
}
