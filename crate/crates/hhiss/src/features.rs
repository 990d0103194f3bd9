//! Raw wearable signals → windowed statistical feature vectors with
//! change-score normalization.
//!
//! The pipeline mirrors a wrist-device recording: EDA (4 Hz), BVP (64 Hz),
//! skin temperature (4 Hz), 3-axis accelerometer (32 Hz), and optionally
//! heart rate (1 Hz), annotated per segment as calm or stress. Sessions are
//! cut into 30-second windows at a 15-second hop; per window, a fixed
//! registry of 340 descriptors is computed: 20 statistics over 16 raw and
//! derived channels, a 12-value heart-rate-variability block, and an
//! 8-value skin-conductance-response block. Each subject's first three calm
//! windows form a baseline that is subtracted from every other window and
//! then excluded — the change-score step that removes person-specific
//! offsets.
//!
//! Conventions (documented, fixed): skewness, kurtosis, and all entropies of
//! a constant series are 0; counts over empty event lists are 0 and their
//! means 0; the change score is a subtraction, so zero-valued baselines are
//! fine. Missing samples are NaN; short runs are filled by a quartic
//! least-squares fit over flanking samples, runs longer than 5 s split the
//! session.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::rng;

/// Window extent in seconds.
pub const WINDOW_S: f64 = 30.0;
/// Hop between window starts in seconds.
pub const HOP_S: f64 = 15.0;
/// Minimum rise amplitude for a skin-conductance-response event.
pub const SCR_THRESHOLD: f64 = 0.05;
/// Refractory period between detected pulse peaks, seconds.
pub const PEAK_REFRACTORY_S: f64 = 0.25;
/// Gaps longer than this split the session instead of being interpolated.
pub const MAX_GAP_S: f64 = 5.0;
/// Number of calm windows averaged into the change-score baseline.
pub const BASELINE_WINDOWS: usize = 3;
/// Total registry size.
pub const REGISTRY_SIZE: usize = 340;

// ---------------------------------------------------------------------------
// Session types
// ---------------------------------------------------------------------------

/// One uniformly sampled signal. Samples are NaN where the device dropped
/// out; everything downstream treats NaN as "missing", never as a value.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub rate: f64,
    pub samples: Vec<f64>,
}

impl Channel {
    pub fn new(rate: f64, samples: Vec<f64>) -> Self {
        Self { rate, samples }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Calm,
    Stress,
}

impl Task {
    pub fn label(self) -> usize {
        match self {
            Task::Calm => 0,
            Task::Stress => 1,
        }
    }
}

/// One annotated span of the session timeline, `[start_s, end_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub start_s: f64,
    pub end_s: f64,
    pub task: Task,
}

/// One recording session of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub session_id: String,
    pub subject_id: String,
    pub eda: Channel,
    pub bvp: Channel,
    pub temp: Channel,
    pub acc: [Channel; 3],
    /// Device-provided heart rate; derived from inter-beat intervals when
    /// absent.
    pub hr: Option<Channel>,
    pub annotations: Vec<Annotation>,
}

impl SessionRecord {
    fn channels(&self) -> Vec<(&'static str, &Channel)> {
        let mut list = vec![
            ("eda", &self.eda),
            ("bvp", &self.bvp),
            ("temp", &self.temp),
            ("acc_x", &self.acc[0]),
            ("acc_y", &self.acc[1]),
            ("acc_z", &self.acc[2]),
        ];
        if let Some(hr) = &self.hr {
            list.push(("hr", hr));
        }
        list
    }

    pub fn validate(&self) -> Result<()> {
        for (name, ch) in self.channels() {
            if !(ch.rate.is_finite() && ch.rate > 0.0) {
                return Err(Error::Signal(format!(
                    "channel {name}: rate must be positive, got {}",
                    ch.rate
                )));
            }
            if ch.samples.is_empty() {
                return Err(Error::Signal(format!("channel {name}: empty")));
            }
        }
        let durations: Vec<f64> = self.channels().iter().map(|(_, c)| c.duration_s()).collect();
        let (lo, hi) = durations
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| {
                (a.min(d), b.max(d))
            });
        if hi - lo > WINDOW_S {
            return Err(Error::Signal(format!(
                "channel durations disagree by {:.1} s (more than one window)",
                hi - lo
            )));
        }
        for a in &self.annotations {
            if !(a.start_s.is_finite() && a.end_s.is_finite() && a.start_s < a.end_s) {
                return Err(Error::Signal(format!(
                    "bad annotation interval [{}, {})",
                    a.start_s, a.end_s
                )));
            }
        }
        Ok(())
    }

    /// Duration usable for windowing: the shortest channel.
    pub fn duration_s(&self) -> f64 {
        self.channels()
            .iter()
            .map(|(_, c)| c.duration_s())
            .fold(f64::INFINITY, f64::min)
    }

    fn task_at(&self, t: f64) -> Option<Task> {
        self.annotations
            .iter()
            .find(|a| a.start_s <= t && t < a.end_s)
            .map(|a| a.task)
    }

    /// Split the session wherever the pulse channel has a missing run
    /// longer than `MAX_GAP_S`. Every channel is cut at the same time
    /// boundaries; segment annotations are shifted to segment-local time
    /// and segment ids get a `-segN` suffix. Segments shorter than one
    /// window are discarded.
    pub fn split_on_long_gaps(&self) -> Vec<SessionRecord> {
        let rate = self.bvp.rate;
        let max_run = (MAX_GAP_S * rate).round() as usize;
        let mut boundaries_s: Vec<(f64, f64)> = Vec::new(); // kept spans
        let mut span_start = 0.0;
        let mut i = 0;
        let n = self.bvp.samples.len();
        while i < n {
            if self.bvp.samples[i].is_nan() {
                let run_start = i;
                while i < n && self.bvp.samples[i].is_nan() {
                    i += 1;
                }
                if i - run_start > max_run {
                    boundaries_s.push((span_start, run_start as f64 / rate));
                    span_start = i as f64 / rate;
                }
            } else {
                i += 1;
            }
        }
        boundaries_s.push((span_start, self.duration_s()));

        if boundaries_s.len() == 1 {
            // No long gaps: pass the session through untouched.
            return if self.duration_s() < WINDOW_S {
                Vec::new()
            } else {
                vec![self.clone()]
            };
        }
        let mut out = Vec::new();
        for (k, &(a, b)) in boundaries_s.iter().enumerate() {
            if b - a < WINDOW_S {
                continue;
            }
            let cut = |ch: &Channel| -> Channel {
                let lo = ((a * ch.rate).round() as usize).min(ch.samples.len());
                let hi = ((b * ch.rate).round() as usize).min(ch.samples.len());
                Channel::new(ch.rate, ch.samples[lo..hi].to_vec())
            };
            let annotations = self
                .annotations
                .iter()
                .filter(|ann| ann.end_s > a && ann.start_s < b)
                .map(|ann| Annotation {
                    start_s: (ann.start_s - a).max(0.0),
                    end_s: (ann.end_s - a).min(b - a),
                    task: ann.task,
                })
                .collect();
            out.push(SessionRecord {
                session_id: format!("{}-seg{}", self.session_id, k + 1),
                subject_id: self.subject_id.clone(),
                eda: cut(&self.eda),
                bvp: cut(&self.bvp),
                temp: cut(&self.temp),
                acc: [cut(&self.acc[0]), cut(&self.acc[1]), cut(&self.acc[2])],
                hr: self.hr.as_ref().map(&cut),
                annotations,
            });
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Filters
// ---------------------------------------------------------------------------

/// One second-order section, direct form II transposed.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Run over `x`, starting from the steady state for a constant input
    /// `x[0]` — so a constant signal passes through a unit-DC-gain section
    /// bit-exactly from the first sample.
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let g = self.dc_gain();
        let scale = x.first().copied().unwrap_or(0.0);
        let mut z1 = (g - self.b0) * scale;
        let mut z2 = (self.b2 - self.a2 * g) * scale;
        x.iter()
            .map(|&v| {
                let y = self.b0 * v + z1;
                z1 = self.b1 * v - self.a1 * y + z2;
                z2 = self.b2 * v - self.a2 * y;
                y
            })
            .collect()
    }
}

/// Butterworth sections of even `order` via the bilinear transform with
/// cutoff pre-warping. The cutoff is clamped to 0.45 of the sampling rate so
/// a nominal cutoff at or above Nyquist degrades to "keep (or reject)
/// everything representable" instead of failing.
fn butterworth_sections(order: usize, cutoff_hz: f64, rate: f64, highpass: bool) -> Vec<Biquad> {
    assert!(order >= 2 && order % 2 == 0, "even order required");
    let fc = cutoff_hz.min(0.45 * rate);
    let warped = 2.0 * rate * (std::f64::consts::PI * fc / rate).tan();
    let k = 2.0 * rate;
    let n = order as f64;
    (0..order / 2)
        .map(|pair| {
            // Conjugate pole pair of the unit Butterworth prototype.
            let theta = std::f64::consts::PI * (2.0 * pair as f64 + n + 1.0) / (2.0 * n);
            let re = theta.cos();
            // Analog section: (b2 s^2 + b0) / (s^2 + a1 s + a0).
            let a1 = -2.0 * warped * re;
            let a0 = warped * warped;
            let (b2, b0) = if highpass { (1.0, 0.0) } else { (0.0, a0) };
            let d0 = k * k + a1 * k + a0;
            Biquad {
                b0: (b2 * k * k + b0) / d0,
                b1: (2.0 * b0 - 2.0 * b2 * k * k) / d0,
                b2: (b2 * k * k + b0) / d0,
                a1: (2.0 * a0 - 2.0 * k * k) / d0,
                a2: (k * k - a1 * k + a0) / d0,
            }
        })
        .collect()
}

fn cascade(sections: &[Biquad], x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for s in sections {
        y = s.run(&y);
    }
    y
}

/// Zero-phase filtering: odd-reflection padding, forward pass, backward
/// pass. The pad length grows with the period of the lowest cutoff so slow
/// filters settle before the real data begins.
fn filtfilt(sections: &[Biquad], x: &[f64], padlen: usize) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return x.to_vec();
    }
    let p = padlen.min(n - 1);
    let mut padded = Vec::with_capacity(n + 2 * p);
    let first = x[0];
    let last = x[n - 1];
    for i in (1..=p).rev() {
        padded.push(2.0 * first - x[i]);
    }
    padded.extend_from_slice(x);
    for i in (n - 1 - p..n - 1).rev() {
        padded.push(2.0 * last - x[i]);
    }

    let mut y = cascade(sections, &padded);
    y.reverse();
    y = cascade(sections, &y);
    y.reverse();
    y[p..p + n].to_vec()
}

fn settle_pad(rate: f64, cutoff_hz: f64) -> usize {
    (3.0 * rate / cutoff_hz.min(0.45 * rate)).ceil() as usize
}

/// 4th-order zero-phase Butterworth low pass.
pub fn low_pass(x: &[f64], rate: f64, cutoff_hz: f64) -> Vec<f64> {
    let sections = butterworth_sections(4, cutoff_hz, rate, false);
    filtfilt(&sections, x, settle_pad(rate, cutoff_hz))
}

/// 4th-order zero-phase Butterworth high pass.
pub fn high_pass(x: &[f64], rate: f64, cutoff_hz: f64) -> Vec<f64> {
    let sections = butterworth_sections(4, cutoff_hz, rate, true);
    filtfilt(&sections, x, settle_pad(rate, cutoff_hz))
}

/// Band pass as cascaded 4th-order high- and low-pass sections.
pub fn band_pass(x: &[f64], rate: f64, low_hz: f64, high_hz: f64) -> Vec<f64> {
    low_pass(&high_pass(x, rate, low_hz), rate, high_hz)
}

// ---------------------------------------------------------------------------
// Gap filling
// ---------------------------------------------------------------------------

/// NaN runs as (start, length).
fn gap_runs(x: &[f64]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < x.len() {
        if x[i].is_nan() {
            let start = i;
            while i < x.len() && x[i].is_nan() {
                i += 1;
            }
            runs.push((start, i - start));
        } else {
            i += 1;
        }
    }
    runs
}

/// Solve a small linear system by Gaussian elimination with partial
/// pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Fill one missing run with a quartic least-squares fit over up to five
/// valid samples on each side. Sample indices are rescaled to [-1, 1] so
/// the normal equations stay well conditioned.
fn quartic_fill(x: &mut [f64], start: usize, len: usize) -> Result<()> {
    const FLANK: usize = 5;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut i = start;
    while i > 0 && pts.len() < FLANK {
        i -= 1;
        if !x[i].is_nan() {
            pts.push((i as f64, x[i]));
        }
    }
    let mut i = start + len;
    let mut right = 0;
    while i < x.len() && right < FLANK {
        if !x[i].is_nan() {
            pts.push((i as f64, x[i]));
            right += 1;
        }
        i += 1;
    }
    if pts.len() < 2 {
        return Err(Error::Signal(
            "cannot interpolate: not enough valid samples around gap".into(),
        ));
    }
    let degree = 4.min(pts.len() - 1);
    let center = (start as f64 + (start + len - 1) as f64) / 2.0;
    let span = pts
        .iter()
        .map(|(t, _)| (t - center).abs())
        .fold(1.0_f64, f64::max);

    // Normal equations for the polynomial in u = (t - center) / span.
    let dim = degree + 1;
    let mut ata = vec![vec![0.0; dim]; dim];
    let mut atb = vec![0.0; dim];
    for &(t, v) in &pts {
        let u = (t - center) / span;
        let mut powers = vec![1.0; dim];
        for d in 1..dim {
            powers[d] = powers[d - 1] * u;
        }
        for r in 0..dim {
            for c in 0..dim {
                ata[r][c] += powers[r] * powers[c];
            }
            atb[r] += powers[r] * v;
        }
    }
    let coef = solve_dense(ata, atb)
        .ok_or_else(|| Error::Signal("degenerate interpolation system".into()))?;
    for j in start..start + len {
        let u = (j as f64 - center) / span;
        let mut acc = 0.0;
        for d in (0..dim).rev() {
            acc = acc * u + coef[d];
        }
        x[j] = acc;
    }
    Ok(())
}

/// Fill every missing run of at most `MAX_GAP_S`; a longer run is an error
/// (the session should have been split first), as is an all-missing signal.
fn fill_gaps(x: &mut [f64], rate: f64) -> Result<()> {
    if x.iter().all(|v| v.is_nan()) {
        return Err(Error::Signal("all samples missing".into()));
    }
    let max_run = (MAX_GAP_S * rate).round() as usize;
    for (start, len) in gap_runs(x) {
        if len > max_run {
            return Err(Error::Signal(format!(
                "missing run of {:.1} s exceeds the {MAX_GAP_S} s limit",
                len as f64 / rate
            )));
        }
        quartic_fill(x, start, len)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Preprocessing ops
// ---------------------------------------------------------------------------

/// Pulse-signal preprocessing: fill short missing runs (quartic), then a
/// zero-phase 0.5–8 Hz band pass. Runs longer than 5 s must be split out of
/// the session beforehand.
pub fn preprocess_bvp(channel: &Channel) -> Result<Vec<f64>> {
    let mut x = channel.samples.clone();
    fill_gaps(&mut x, channel.rate)?;
    Ok(band_pass(&x, channel.rate, 0.5, 8.0))
}

/// Skin-conductance preprocessing: zero-phase 4th-order low pass with a
/// nominal 3 Hz cutoff. At a 4 Hz sampling rate the nominal cutoff exceeds
/// Nyquist, so it clamps to 0.45 of the rate (1.8 Hz) — the filter then
/// removes only near-Nyquist noise, which is the most faithful realizable
/// reading of the nominal design.
pub fn preprocess_eda(channel: &Channel) -> Result<Vec<f64>> {
    if channel.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("skin-conductance samples".into()));
    }
    Ok(low_pass(&channel.samples, channel.rate, 3.0))
}

/// Split filtered skin conductance into a slow tonic level (0.05 Hz low
/// pass) and the phasic residual. `tonic + phasic` reconstructs the input
/// exactly by construction.
pub fn decompose_eda(filtered: &[f64], rate: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if filtered.len() < 2 {
        return Err(Error::Signal(
            "series shorter than the tonic filter warm-up".into(),
        ));
    }
    let tonic = low_pass(filtered, rate, 0.05);
    let phasic = filtered
        .iter()
        .zip(&tonic)
        .map(|(x, t)| x - t)
        .collect();
    Ok((tonic, phasic))
}

// ---------------------------------------------------------------------------
// Event detection
// ---------------------------------------------------------------------------

/// One skin-conductance response: a local rise of at least `SCR_THRESHOLD`
/// from onset (local minimum) to peak (next local maximum).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrEvent {
    pub onset_index: usize,
    pub peak_index: usize,
    pub amplitude: f64,
    pub rise_time_s: f64,
}

/// Detect response events on a phasic series.
pub fn detect_scr_events(phasic: &[f64], rate: f64) -> Vec<ScrEvent> {
    let mut events = Vec::new();
    if phasic.len() < 3 {
        return events;
    }
    let mut onset = 0usize;
    for i in 1..phasic.len() {
        let rising = phasic[i] > phasic[i - 1];
        if !rising {
            onset = i; // walking down: most recent local minimum candidate
            continue;
        }
        let at_peak = i + 1 == phasic.len() || phasic[i + 1] <= phasic[i];
        if at_peak {
            let amplitude = phasic[i] - phasic[onset];
            if amplitude >= SCR_THRESHOLD {
                events.push(ScrEvent {
                    onset_index: onset,
                    peak_index: i,
                    amplitude,
                    rise_time_s: (i - onset) as f64 / rate,
                });
            }
        }
    }
    events
}

/// Systolic peak times (seconds) via strict local maxima above zero with a
/// 250 ms refractory period, earliest peak kept on conflict.
pub fn detect_bvp_peaks(filtered: &[f64], rate: f64) -> Vec<f64> {
    let mut peaks = Vec::new();
    let refractory = PEAK_REFRACTORY_S;
    for i in 1..filtered.len().saturating_sub(1) {
        if filtered[i] > 0.0 && filtered[i] > filtered[i - 1] && filtered[i] > filtered[i + 1] {
            let t = i as f64 / rate;
            if peaks.last().is_none_or(|&last| t - last >= refractory) {
                peaks.push(t);
            }
        }
    }
    peaks
}

/// Successive inter-beat intervals in milliseconds.
pub fn peaks_to_ibis(peak_times_s: &[f64]) -> Result<Vec<f64>> {
    if peak_times_s.len() < 2 {
        return Err(Error::Signal(
            "need at least two pulse peaks for an inter-beat interval".into(),
        ));
    }
    Ok(peak_times_s
        .windows(2)
        .map(|w| (w[1] - w[0]) * 1000.0)
        .collect())
}

// ---------------------------------------------------------------------------
// HRV metrics
// ---------------------------------------------------------------------------

/// Heart-rate-variability summary of one window's inter-beat intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrvMetrics {
    pub mean_nn: f64,
    pub median_nn: f64,
    pub min_nn: f64,
    pub max_nn: f64,
    pub sdnn: f64,
    pub rmssd: f64,
    /// SDNN / MeanNN.
    pub cvnn: f64,
    /// Median absolute deviation / MedianNN.
    pub mcvnn: f64,
    /// Fraction of successive differences above 20 ms.
    pub pnn20: f64,
    /// Fraction of successive differences above 50 ms.
    pub pnn50: f64,
    pub mad_nn: f64,
    /// Variance of the intervals (ms²) — total power over the window.
    pub total_power: f64,
}

impl HrvMetrics {
    pub fn values(&self) -> [f64; 12] {
        [
            self.mean_nn,
            self.median_nn,
            self.min_nn,
            self.max_nn,
            self.sdnn,
            self.rmssd,
            self.cvnn,
            self.mcvnn,
            self.pnn20,
            self.pnn50,
            self.mad_nn,
            self.total_power,
        ]
    }

    pub fn names() -> [&'static str; 12] {
        [
            "hrv_mean_nn",
            "hrv_median_nn",
            "hrv_min_nn",
            "hrv_max_nn",
            "hrv_sdnn",
            "hrv_rmssd",
            "hrv_cvnn",
            "hrv_mcvnn",
            "hrv_pnn20",
            "hrv_pnn50",
            "hrv_mad_nn",
            "hrv_total_power",
        ]
    }
}

/// HRV metrics from at least two intervals (ms).
pub fn hrv_metrics(ibis_ms: &[f64]) -> Result<HrvMetrics> {
    if ibis_ms.len() < 2 {
        return Err(Error::Signal(format!(
            "need at least 2 inter-beat intervals, got {}",
            ibis_ms.len()
        )));
    }
    if ibis_ms.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("inter-beat intervals".into()));
    }
    let n = ibis_ms.len() as f64;
    let mean = ibis_ms.iter().sum::<f64>() / n;
    let variance = ibis_ms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sdnn = (ibis_ms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let diffs: Vec<f64> = ibis_ms.windows(2).map(|w| w[1] - w[0]).collect();
    let rmssd =
        (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    let median = median_of(ibis_ms);
    let mad = median_of(&ibis_ms.iter().map(|v| (v - median).abs()).collect::<Vec<_>>());
    let frac_above = |cut: f64| {
        diffs.iter().filter(|d| d.abs() > cut).count() as f64 / diffs.len() as f64
    };
    Ok(HrvMetrics {
        mean_nn: mean,
        median_nn: median,
        min_nn: ibis_ms.iter().copied().fold(f64::INFINITY, f64::min),
        max_nn: ibis_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        sdnn,
        rmssd,
        cvnn: if mean == 0.0 { 0.0 } else { sdnn / mean },
        mcvnn: if median == 0.0 { 0.0 } else { mad / median },
        pnn20: frac_above(20.0),
        pnn50: frac_above(50.0),
        mad_nn: mad,
        total_power: variance,
    })
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

const STAT_NAMES: [&str; 20] = [
    "mean",
    "median",
    "std",
    "min",
    "max",
    "ptp",
    "rms",
    "iqr",
    "p05",
    "p95",
    "skewness",
    "kurtosis",
    "line_integral",
    "energy",
    "sum",
    "count_below_mean",
    "shannon_entropy",
    "svd_entropy",
    "perm_entropy",
    "n_peaks",
];

fn median_of(x: &[f64]) -> f64 {
    percentile(x, 0.5)
}

/// Linear-interpolation percentile (the common "type 7" estimator).
fn percentile(x: &[f64], q: f64) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

fn shannon_entropy(x: &[f64]) -> f64 {
    const BINS: usize = 10;
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if hi <= lo {
        return 0.0;
    }
    let mut counts = [0usize; BINS];
    for &v in x {
        let idx = (((v - lo) / (hi - lo)) * BINS as f64) as usize;
        counts[idx.min(BINS - 1)] += 1;
    }
    let n = x.len() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues_3x3(mut m: [[f64; 3]; 3]) -> [f64; 3] {
    for _ in 0..64 {
        let off = m[0][1].abs() + m[0][2].abs() + m[1][2].abs();
        if off < 1e-14 {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if m[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = 0.5 * (2.0 * m[p][q]).atan2(m[q][q] - m[p][p]);
            let (s, c) = theta.sin_cos();
            for k in 0..3 {
                let (mkp, mkq) = (m[k][p], m[k][q]);
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let (mpk, mqk) = (m[p][k], m[q][k]);
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
        }
    }
    [m[0][0].max(0.0), m[1][1].max(0.0), m[2][2].max(0.0)]
}

/// Entropy of the normalized singular-value spectrum of the order-3 delay
/// embedding. Zero for a constant series.
fn svd_entropy(x: &[f64]) -> f64 {
    if x.len() < 3 {
        return 0.0;
    }
    // Gram matrix of the (n-2) x 3 trajectory matrix.
    let mut g = [[0.0; 3]; 3];
    for w in x.windows(3) {
        for r in 0..3 {
            for c in 0..3 {
                g[r][c] += w[r] * w[c];
            }
        }
    }
    let eig = symmetric_eigenvalues_3x3(g);
    let raw: Vec<f64> = eig.iter().map(|&e| e.sqrt()).collect();
    let raw_total: f64 = raw.iter().sum();
    if raw_total <= 0.0 {
        return 0.0;
    }
    // Rotation round-off leaves dust in zero singular values; drop it
    // before normalizing so a rank-one spectrum yields exactly zero.
    let sigmas: Vec<f64> = raw
        .into_iter()
        .filter(|&s| s > 1e-9 * raw_total)
        .collect();
    let total: f64 = sigmas.iter().sum();
    -sigmas
        .iter()
        .map(|&s| {
            let p = s / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Entropy of ordinal patterns of consecutive triples (ties broken by
/// position). Zero for a constant series.
fn permutation_entropy(x: &[f64]) -> f64 {
    if x.len() < 3 {
        return 0.0;
    }
    let mut counts = [0usize; 27];
    for w in x.windows(3) {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| w[a].total_cmp(&w[b]).then(a.cmp(&b)));
        counts[order[0] * 9 + order[1] * 3 + order[2]] += 1;
    }
    let n = (x.len() - 2) as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// The 20 registry statistics of one series, in `STAT_NAMES` order.
/// Degenerate cases (constant input, zero variance) yield the documented
/// conventions instead of NaN.
pub fn series_statistics(x: &[f64]) -> Vec<f64> {
    assert!(!x.is_empty(), "statistics of an empty series");
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let std = if x.len() > 1 {
        (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let energy = x.iter().map(|v| v * v).sum::<f64>();
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };
    let line_integral = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
    let count_below_mean = x.iter().filter(|&&v| v < mean).count() as f64;
    let n_peaks = if x.len() < 3 {
        0.0
    } else {
        (1..x.len() - 1)
            .filter(|&i| x[i] > x[i - 1] && x[i] > x[i + 1])
            .count() as f64
    };
    vec![
        mean,
        median_of(x),
        std,
        min,
        max,
        max - min,
        (energy / n).sqrt(),
        percentile(x, 0.75) - percentile(x, 0.25),
        percentile(x, 0.05),
        percentile(x, 0.95),
        skewness,
        kurtosis,
        line_integral,
        energy,
        x.iter().sum::<f64>(),
        count_below_mean,
        shannon_entropy(x),
        svd_entropy(x),
        permutation_entropy(x),
        n_peaks,
    ]
}

const CHANNEL_NAMES: [&str; 16] = [
    "eda",
    "eda_tonic",
    "eda_phasic",
    "temp",
    "bvp",
    "hr",
    "acc_x",
    "acc_y",
    "acc_z",
    "acc_norm",
    "eda_diff",
    "eda_phasic_diff",
    "temp_diff",
    "bvp_diff",
    "hr_diff",
    "acc_norm_diff",
];

const SCR_NAMES: [&str; 8] = [
    "scr_count",
    "scr_rate_per_min",
    "scr_amp_mean",
    "scr_amp_max",
    "scr_amp_sum",
    "scr_amp_std",
    "scr_rise_mean",
    "scr_rise_max",
];

/// The full ordered feature registry: 20 statistics for each of 16 raw and
/// derived channels, then the 12 HRV values, then the 8 SCR values.
pub fn feature_registry() -> Vec<String> {
    let mut names = Vec::with_capacity(REGISTRY_SIZE);
    for ch in CHANNEL_NAMES {
        for st in STAT_NAMES {
            names.push(format!("{ch}_{st}"));
        }
    }
    names.extend(HrvMetrics::names().iter().map(|s| s.to_string()));
    names.extend(SCR_NAMES.iter().map(|s| s.to_string()));
    names
}

fn scr_features(events: &[ScrEvent]) -> [f64; 8] {
    let count = events.len() as f64;
    if events.is_empty() {
        return [0.0; 8];
    }
    let amps: Vec<f64> = events.iter().map(|e| e.amplitude).collect();
    let rises: Vec<f64> = events.iter().map(|e| e.rise_time_s).collect();
    let amp_mean = amps.iter().sum::<f64>() / count;
    let amp_std = if events.len() > 1 {
        (amps.iter().map(|a| (a - amp_mean).powi(2)).sum::<f64>() / (count - 1.0)).sqrt()
    } else {
        0.0
    };
    [
        count,
        count / (WINDOW_S / 60.0),
        amp_mean,
        amps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        amps.iter().sum::<f64>(),
        amp_std,
        rises.iter().sum::<f64>() / count,
        rises.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ]
}

// ---------------------------------------------------------------------------
// Windowing and extraction
// ---------------------------------------------------------------------------

/// Number of 30 s windows at a 15 s hop in a session of this duration
/// (trailing partial window dropped).
pub fn window_count(duration_s: f64) -> usize {
    if duration_s < WINDOW_S {
        0
    } else {
        ((duration_s - WINDOW_S) / HOP_S).floor() as usize + 1
    }
}

/// Window start times for a session of this duration.
pub fn window_starts(duration_s: f64) -> Vec<f64> {
    (0..window_count(duration_s)).map(|k| k as f64 * HOP_S).collect()
}

/// One extracted window before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub subject_id: String,
    pub session_id: String,
    pub start_s: f64,
    pub label: usize,
    pub features: Vec<f64>,
}

/// Slice a channel-rate series to one window; `None` when the window
/// overruns the series or touches a missing sample.
fn window_slice(x: &[f64], rate: f64, start_s: f64) -> Option<&[f64]> {
    let lo = (start_s * rate).round() as usize;
    let hi = lo + (WINDOW_S * rate).round() as usize;
    if hi > x.len() {
        return None;
    }
    let s = &x[lo..hi];
    s.iter().all(|v| v.is_finite()).then_some(s)
}

fn diff_series(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Extract every valid window of one (already gap-split) session. Windows
/// whose midpoint has no task annotation, that overlap missing samples, or
/// that hold fewer than two inter-beat intervals are dropped; the count of
/// dropped windows is returned alongside.
pub fn extract_session(session: &SessionRecord) -> Result<(Vec<FeatureWindow>, usize)> {
    session.validate()?;
    let duration = session.duration_s();
    if duration < WINDOW_S {
        return Err(Error::Signal(format!(
            "session {} is shorter than one window ({duration:.1} s)",
            session.session_id
        )));
    }

    let eda = preprocess_eda(&session.eda)?;
    let (tonic, phasic) = decompose_eda(&eda, session.eda.rate)?;
    let bvp = preprocess_bvp(&session.bvp)?;
    let peak_times = detect_bvp_peaks(&bvp, session.bvp.rate);
    let scr_events = detect_scr_events(&phasic, session.eda.rate);

    // Heart rate: device channel if present, else a 1 Hz series derived
    // from the inter-beat intervals (step interpolation between beats).
    let (hr_series, hr_rate) = match &session.hr {
        Some(ch) => (ch.samples.clone(), ch.rate),
        None => {
            let mut hr = vec![f64::NAN; duration.floor() as usize];
            for w in peak_times.windows(2) {
                let bpm = 60.0 / (w[1] - w[0]);
                let lo = w[0].floor() as usize;
                let hi = (w[1].ceil() as usize).min(hr.len());
                for slot in hr.iter_mut().take(hi).skip(lo) {
                    *slot = bpm;
                }
            }
            (hr, 1.0)
        }
    };

    let acc_norm: Vec<f64> = (0..session.acc[0].samples.len().min(
        session.acc[1].samples.len().min(session.acc[2].samples.len()),
    ))
        .map(|i| {
            (session.acc[0].samples[i].powi(2)
                + session.acc[1].samples[i].powi(2)
                + session.acc[2].samples[i].powi(2))
            .sqrt()
        })
        .collect();

    let mut windows = Vec::new();
    let mut dropped = 0usize;
    'windows: for start in window_starts(duration) {
        let Some(task) = session.task_at(start + WINDOW_S / 2.0) else {
            dropped += 1;
            continue;
        };

        // (series, rate) per registry channel, in CHANNEL_NAMES order.
        let eda_rate = session.eda.rate;
        let acc_rate = session.acc[0].rate;
        let slices: [(&[f64], f64); 10] = [
            (&eda, eda_rate),
            (&tonic, eda_rate),
            (&phasic, eda_rate),
            (&session.temp.samples, session.temp.rate),
            (&bvp, session.bvp.rate),
            (&hr_series, hr_rate),
            (&session.acc[0].samples, acc_rate),
            (&session.acc[1].samples, acc_rate),
            (&session.acc[2].samples, acc_rate),
            (&acc_norm, acc_rate),
        ];

        let mut features = Vec::with_capacity(REGISTRY_SIZE);
        let mut diff_sources: Vec<Vec<f64>> = Vec::with_capacity(6);
        for (idx, (series, rate)) in slices.iter().enumerate() {
            let Some(s) = window_slice(series, *rate, start) else {
                dropped += 1;
                continue 'windows;
            };
            features.extend(series_statistics(s));
            // eda, eda_phasic, temp, bvp, hr, acc_norm feed the derived
            // first-difference channels.
            if [0usize, 2, 3, 4, 5, 9].contains(&idx) {
                diff_sources.push(diff_series(s));
            }
        }
        for d in &diff_sources {
            features.extend(series_statistics(d));
        }

        // HRV block from the beats inside this window.
        let in_window: Vec<f64> = peak_times
            .iter()
            .copied()
            .filter(|&t| t >= start && t < start + WINDOW_S)
            .collect();
        let ibis = match peaks_to_ibis(&in_window) {
            Ok(i) if i.len() >= 2 => i,
            _ => {
                dropped += 1;
                continue;
            }
        };
        features.extend(hrv_metrics(&ibis)?.values());

        // SCR block from events whose peak falls inside this window.
        let events: Vec<ScrEvent> = scr_events
            .iter()
            .copied()
            .filter(|e| {
                let t = e.peak_index as f64 / session.eda.rate;
                t >= start && t < start + WINDOW_S
            })
            .collect();
        features.extend(scr_features(&events));

        debug_assert_eq!(features.len(), REGISTRY_SIZE);
        if features.iter().any(|v| !v.is_finite()) {
            dropped += 1;
            continue;
        }
        windows.push(FeatureWindow {
            subject_id: session.subject_id.clone(),
            session_id: session.session_id.clone(),
            start_s: start,
            label: task.label(),
            features,
        });
    }
    Ok((windows, dropped))
}

/// Change-score normalization: per subject, average the first
/// `BASELINE_WINDOWS` calm windows into a baseline, subtract it from every
/// other window, and drop the baseline windows. Subjects without enough
/// calm windows are dropped entirely and reported.
pub fn change_score_normalize(
    windows: Vec<FeatureWindow>,
) -> (Vec<FeatureWindow>, Vec<String>) {
    // Group per subject, preserving input order (sessions in arrival
    // order, windows chronological within a session).
    let mut per_subject: BTreeMap<String, Vec<FeatureWindow>> = BTreeMap::new();
    let mut subject_order = Vec::new();
    for w in windows {
        if !per_subject.contains_key(&w.subject_id) {
            subject_order.push(w.subject_id.clone());
        }
        per_subject.entry(w.subject_id.clone()).or_default().push(w);
    }

    let mut out = Vec::new();
    let mut dropped_subjects = Vec::new();
    for subject in subject_order {
        let rows = per_subject.remove(&subject).expect("grouped above");
        let baseline_idx: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, w)| w.label == Task::Calm.label())
            .map(|(i, _)| i)
            .take(BASELINE_WINDOWS)
            .collect();
        if baseline_idx.len() < BASELINE_WINDOWS {
            dropped_subjects.push(subject);
            continue;
        }
        let dim = rows[0].features.len();
        let mut baseline = vec![0.0; dim];
        for &i in &baseline_idx {
            for (b, v) in baseline.iter_mut().zip(&rows[i].features) {
                *b += v / BASELINE_WINDOWS as f64;
            }
        }
        for (i, mut w) in rows.into_iter().enumerate() {
            if baseline_idx.contains(&i) {
                continue;
            }
            for (v, b) in w.features.iter_mut().zip(&baseline) {
                *v -= b;
            }
            out.push(w);
        }
    }
    (out, dropped_subjects)
}

/// Outcome of a full extraction run.
#[derive(Debug)]
pub struct ExtractOutcome {
    pub dataset: FeatureDataset,
    /// Subjects dropped for lacking calm baseline windows.
    pub dropped_subjects: Vec<String>,
    /// Windows dropped for missing annotations, gaps, or too few beats.
    pub dropped_windows: usize,
}

/// Run the whole pipeline over a set of sessions: split on long gaps,
/// extract windows, change-score normalize per subject, and assemble the
/// feature table under the standard registry.
pub fn extract_sessions(sessions: &[SessionRecord], dataset_name: &str) -> Result<ExtractOutcome> {
    let mut windows = Vec::new();
    let mut dropped_windows = 0;
    for session in sessions {
        for segment in session.split_on_long_gaps() {
            let (w, dropped) = extract_session(&segment)?;
            windows.extend(w);
            dropped_windows += dropped;
        }
    }
    let (rows, dropped_subjects) = change_score_normalize(windows);
    if rows.is_empty() {
        return Err(Error::Empty("no windows survived extraction".into()));
    }

    let n = rows.len();
    let mut features = Array2::zeros((n, REGISTRY_SIZE));
    for (i, w) in rows.iter().enumerate() {
        for (j, &v) in w.features.iter().enumerate() {
            features[[i, j]] = v;
        }
    }
    let dataset = FeatureDataset::new(
        dataset_name,
        features,
        rows.iter().map(|w| w.label).collect(),
        rows.iter().map(|w| w.subject_id.clone()).collect(),
        rows.iter().map(|w| w.session_id.clone()).collect(),
        rows.iter().map(|w| w.start_s).collect(),
        feature_registry(),
    )?;
    Ok(ExtractOutcome {
        dataset,
        dropped_subjects,
        dropped_windows,
    })
}

// ---------------------------------------------------------------------------
// Session files
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SessionManifest {
    session_id: String,
    subject_id: String,
    eda_rate: f64,
    bvp_rate: f64,
    temp_rate: f64,
    acc_rate: f64,
    hr_rate: Option<f64>,
    annotations: Vec<Annotation>,
}

fn write_channel_file(path: &Path, ch: &Channel) -> Result<()> {
    let mut out = String::from("timestamp_s,value\n");
    for (i, &v) in ch.samples.iter().enumerate() {
        if v.is_nan() {
            continue; // gaps are absent rows
        }
        writeln!(out, "{},{}", i as f64 / ch.rate, v).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

fn read_channel_file(path: &Path, rate: f64) -> Result<Channel> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("timestamp_s,value") => {}
        other => {
            return Err(Error::Schema(format!(
                "{}: expected 'timestamp_s,value' header, got {:?}",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    let mut pairs = Vec::new();
    let mut max_idx = 0usize;
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (t_str, v_str) = line.split_once(',').ok_or_else(|| {
            Error::Schema(format!("{}: line {}: not two fields", path.display(), lineno + 2))
        })?;
        let t: f64 = t_str.trim().parse().map_err(|_| {
            Error::Schema(format!("{}: line {}: bad timestamp", path.display(), lineno + 2))
        })?;
        let v: f64 = v_str.trim().parse().map_err(|_| {
            Error::Schema(format!("{}: line {}: bad value", path.display(), lineno + 2))
        })?;
        let idx_f = t * rate;
        let idx = idx_f.round();
        if (idx_f - idx).abs() > 0.5 {
            return Err(Error::Schema(format!(
                "{}: line {}: timestamp {t} is off the {rate} Hz grid",
                path.display(),
                lineno + 2
            )));
        }
        let idx = idx as usize;
        pairs.push((idx, v));
        max_idx = max_idx.max(idx);
    }
    if pairs.is_empty() {
        return Err(Error::Empty(format!("{}: no samples", path.display())));
    }
    let mut samples = vec![f64::NAN; max_idx + 1];
    for (idx, v) in pairs {
        samples[idx] = v;
    }
    Ok(Channel::new(rate, samples))
}

/// Write one session as a directory: a manifest plus one delimited file per
/// channel (missing samples are absent rows).
pub fn save_session(dir: &Path, session: &SessionRecord) -> Result<()> {
    session.validate()?;
    fs::create_dir_all(dir)?;
    let manifest = SessionManifest {
        session_id: session.session_id.clone(),
        subject_id: session.subject_id.clone(),
        eda_rate: session.eda.rate,
        bvp_rate: session.bvp.rate,
        temp_rate: session.temp.rate,
        acc_rate: session.acc[0].rate,
        hr_rate: session.hr.as_ref().map(|c| c.rate),
        annotations: session.annotations.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Serde(e.to_string()))?;
    fs::write(dir.join("session.json"), json)?;
    write_channel_file(&dir.join("eda.csv"), &session.eda)?;
    write_channel_file(&dir.join("bvp.csv"), &session.bvp)?;
    write_channel_file(&dir.join("temp.csv"), &session.temp)?;
    write_channel_file(&dir.join("acc_x.csv"), &session.acc[0])?;
    write_channel_file(&dir.join("acc_y.csv"), &session.acc[1])?;
    write_channel_file(&dir.join("acc_z.csv"), &session.acc[2])?;
    if let Some(hr) = &session.hr {
        write_channel_file(&dir.join("hr.csv"), hr)?;
    }
    Ok(())
}

/// Load one session directory written by [`save_session`] (or following the
/// same layout).
pub fn load_session(dir: &Path) -> Result<SessionRecord> {
    let manifest_text = fs::read_to_string(dir.join("session.json"))?;
    let manifest: SessionManifest = serde_json::from_str(&manifest_text)
        .map_err(|e| Error::Schema(format!("{}: {e}", dir.join("session.json").display())))?;
    let session = SessionRecord {
        session_id: manifest.session_id,
        subject_id: manifest.subject_id,
        eda: read_channel_file(&dir.join("eda.csv"), manifest.eda_rate)?,
        bvp: read_channel_file(&dir.join("bvp.csv"), manifest.bvp_rate)?,
        temp: read_channel_file(&dir.join("temp.csv"), manifest.temp_rate)?,
        acc: [
            read_channel_file(&dir.join("acc_x.csv"), manifest.acc_rate)?,
            read_channel_file(&dir.join("acc_y.csv"), manifest.acc_rate)?,
            read_channel_file(&dir.join("acc_z.csv"), manifest.acc_rate)?,
        ],
        hr: match manifest.hr_rate {
            Some(rate) => Some(read_channel_file(&dir.join("hr.csv"), rate)?),
            None => None,
        },
        annotations: manifest.annotations,
    };
    session.validate()?;
    Ok(session)
}

// ---------------------------------------------------------------------------
// Deterministic fixture sessions
// ---------------------------------------------------------------------------

/// A deterministic synthetic session with plausible physiology: calm /
/// stress / calm segments, a phase-continuous pulse wave whose rate rises
/// under stress, conductance bumps big enough to register as response
/// events, and small seeded noise everywhere. Useful as a pipeline fixture:
/// a 600 s session yields 39 windows, 36 after baseline exclusion.
pub fn fixture_session(subject_id: &str, session_id: &str, duration_s: f64, seed: u64) -> SessionRecord {
    let mut noise_rng = rng::stream(seed, rng::salt::SYNTH, 900);
    let noise = |scale: f64, rng: &mut ChaCha8Rng| -> f64 {
        let n: f64 = rng.sample(StandardNormal);
        n * scale
    };
    let stress_start = 0.3 * duration_s;
    let stress_end = 0.8 * duration_s;
    let annotations = vec![
        Annotation { start_s: 0.0, end_s: stress_start, task: Task::Calm },
        Annotation { start_s: stress_start, end_s: stress_end, task: Task::Stress },
        Annotation { start_s: stress_end, end_s: duration_s + 1.0, task: Task::Calm },
    ];
    let stressed = |t: f64| t >= stress_start && t < stress_end;
    // Small per-subject physiology shift.
    let base_hr = 0.95 + 0.1 * ((seed % 7) as f64 / 7.0);

    // Pulse wave with a continuous phase.
    let bvp_rate = 64.0;
    let n_bvp = (duration_s * bvp_rate) as usize;
    let mut bvp = Vec::with_capacity(n_bvp);
    let mut phase = 0.0f64;
    for i in 0..n_bvp {
        let t = i as f64 / bvp_rate;
        let f = if stressed(t) { base_hr * 1.25 } else { base_hr };
        phase += 2.0 * std::f64::consts::PI * f / bvp_rate;
        bvp.push(phase.sin() + 0.05 * (3.0 * phase + 1.0).sin() + noise(0.004, &mut noise_rng));
    }

    // Conductance: slow drift, stress elevation, and response bumps.
    let eda_rate = 4.0;
    let n_eda = (duration_s * eda_rate) as usize;
    let mut eda = Vec::with_capacity(n_eda);
    for i in 0..n_eda {
        let t = i as f64 / eda_rate;
        let drift = 2.0 + 0.3 * (2.0 * std::f64::consts::PI * t / 300.0).sin();
        let elevation = if stressed(t) { 0.8 } else { 0.0 };
        // Bumps every 40 s when calm, every 18 s under stress: sharp rise,
        // slow decay, comfortably above the event threshold.
        let interval = if stressed(t) { 18.0 } else { 40.0 };
        let since = t % interval;
        let bump = if since < 6.0 {
            0.18 * (since / 0.8).min(1.0) * (-(since - 0.8).max(0.0) / 2.5).exp()
        } else {
            0.0
        };
        eda.push(drift + elevation + bump + noise(0.002, &mut noise_rng));
    }

    let temp_rate = 4.0;
    let n_temp = (duration_s * temp_rate) as usize;
    let mut temp = Vec::with_capacity(n_temp);
    for i in 0..n_temp {
        let t = i as f64 / temp_rate;
        let drop = if stressed(t) { -0.3 } else { 0.0 };
        temp.push(
            33.5 + 0.4 * (2.0 * std::f64::consts::PI * t / 600.0).sin()
                + drop
                + noise(0.01, &mut noise_rng),
        );
    }

    let acc_rate = 32.0;
    let n_acc = (duration_s * acc_rate) as usize;
    let mut acc = [Vec::with_capacity(n_acc), Vec::with_capacity(n_acc), Vec::with_capacity(n_acc)];
    for i in 0..n_acc {
        let t = i as f64 / acc_rate;
        let boost = if stressed(t) { 1.6 } else { 1.0 };
        acc[0].push(0.2 * boost * (2.0 * std::f64::consts::PI * 0.8 * t).sin() + noise(0.02, &mut noise_rng));
        acc[1].push(0.15 * boost * (2.0 * std::f64::consts::PI * 1.1 * t + 0.5).sin() + noise(0.02, &mut noise_rng));
        acc[2].push(0.9 + 0.05 * boost * (2.0 * std::f64::consts::PI * 0.35 * t).sin() + noise(0.02, &mut noise_rng));
    }

    let n_hr = duration_s as usize;
    let mut hr = Vec::with_capacity(n_hr);
    for i in 0..n_hr {
        let t = i as f64;
        let f = if stressed(t) { base_hr * 1.25 } else { base_hr };
        hr.push(60.0 * f + noise(0.5, &mut noise_rng));
    }

    let [ax, ay, az] = acc;
    SessionRecord {
        session_id: session_id.to_string(),
        subject_id: subject_id.to_string(),
        eda: Channel::new(eda_rate, eda),
        bvp: Channel::new(bvp_rate, bvp),
        temp: Channel::new(temp_rate, temp),
        acc: [
            Channel::new(acc_rate, ax),
            Channel::new(acc_rate, ay),
            Channel::new(acc_rate, az),
        ],
        hr: Some(Channel::new(1.0, hr)),
        annotations,
    }
}
