//! Pulse-time vectors for CPMG and Uhrig decoupling, their compilation into
//! finite-width timelines, and the one-line text format for sequence specs.

use std::f64::consts::PI;
use std::fmt;

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::spinops::Spin;
use crate::units;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// No pulses: free evolution over the period.
    Free,
    Cpmg,
    Udd,
    /// Instants supplied directly.
    Custom,
}

impl Scheme {
    pub fn keyword(self) -> &'static str {
        match self {
            Scheme::Free => "free",
            Scheme::Cpmg => "cpmg",
            Scheme::Udd => "udd",
            Scheme::Custom => "custom",
        }
    }
}

/// Pulse instants `0 < t_1 < ... < t_N < T` within one period `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingVector {
    scheme: Scheme,
    total_period: f64,
    instants: Vec<f64>,
}

fn check_order_period(order: usize, period: f64) -> Result<()> {
    if order < 1 {
        return Err(Error::domain(format!("order must be at least 1, got {order}")));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::domain(format!("period must be positive, got {period}")));
    }
    Ok(())
}

/// `t_j = T (2j - 1) / (2N)`.
pub fn cpmg_times(order: usize, period: f64) -> Result<TimingVector> {
    check_order_period(order, period)?;
    let n = order as f64;
    let instants = (1..=order)
        .map(|j| period * (2.0 * j as f64 - 1.0) / (2.0 * n))
        .collect();
    Ok(TimingVector {
        scheme: Scheme::Cpmg,
        total_period: period,
        instants,
    })
}

/// `t_j = T sin^2(pi j / (2N + 2))`.
pub fn udd_times(order: usize, period: f64) -> Result<TimingVector> {
    check_order_period(order, period)?;
    let denom = 2.0 * order as f64 + 2.0;
    let mut instants: Vec<f64> = (1..=order)
        .map(|j| {
            let s = (PI * j as f64 / denom).sin();
            period * s * s
        })
        .collect();
    // sin^2 and cos^2 round differently; pin the mirror image exactly
    for j in 0..order / 2 {
        instants[order - 1 - j] = period - instants[j];
    }
    if order % 2 == 1 {
        instants[order / 2] = period / 2.0;
    }
    Ok(TimingVector {
        scheme: Scheme::Udd,
        total_period: period,
        instants,
    })
}

/// `N (2 tau_cpmg + tau_pi)`.
pub fn block_duration(order: usize, tau_cpmg: f64, tau_pi: f64) -> Result<f64> {
    if order < 1 {
        return Err(Error::domain("order must be at least 1"));
    }
    if !(tau_cpmg > 0.0) || !(tau_pi >= 0.0) {
        return Err(Error::domain(format!(
            "delays must be positive (tau_cpmg={tau_cpmg}, tau_pi={tau_pi})"
        )));
    }
    Ok(order as f64 * (2.0 * tau_cpmg + tau_pi))
}

impl TimingVector {
    pub fn free(period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::domain(format!("period must be positive, got {period}")));
        }
        Ok(TimingVector {
            scheme: Scheme::Free,
            total_period: period,
            instants: Vec::new(),
        })
    }

    pub fn custom(period: f64, instants: Vec<f64>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::domain(format!("period must be positive, got {period}")));
        }
        let inside = instants.iter().all(|&t| t > 0.0 && t < period);
        let increasing = instants.windows(2).all(|w| w[0] < w[1]);
        if !inside || !increasing {
            return Err(Error::domain("instants must be strictly increasing inside (0, T)"));
        }
        Ok(TimingVector {
            scheme: Scheme::Custom,
            total_period: period,
            instants,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn order(&self) -> usize {
        self.instants.len()
    }

    pub fn total_period(&self) -> f64 {
        self.total_period
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    /// Same timing scaled to a new period.
    pub fn rescaled(&self, period: f64) -> Result<Self> {
        let n = self.order();
        match self.scheme {
            Scheme::Free => Self::free(period),
            Scheme::Cpmg => cpmg_times(n, period),
            Scheme::Udd => udd_times(n, period),
            Scheme::Custom => Self::custom(
                period,
                self.instants
                    .iter()
                    .map(|t| t / self.total_period * period)
                    .collect(),
            ),
        }
    }

    /// Instants in double-double precision. Rule-generated schemes are
    /// re-evaluated from their closed forms so the vanishing low-order moments
    /// survive to ~1e-30.
    pub fn instants_dd(&self) -> Vec<TwoFloat> {
        let n = self.order();
        let period = TwoFloat::from(self.total_period);
        match self.scheme {
            Scheme::Cpmg => (1..=n)
                .map(|j| period * TwoFloat::from((2 * j - 1) as f64) / (2 * n) as f64)
                .collect(),
            Scheme::Udd => (1..=n)
                .map(|j| {
                    let theta = twofloat::consts::PI * TwoFloat::from(j as f64) / (2 * n + 2) as f64;
                    let (s, _) = crate::ddtrig::sin_cos_dd(theta);
                    period * s * s
                })
                .collect(),
            Scheme::Free | Scheme::Custom => {
                self.instants.iter().map(|&t| TwoFloat::from(t)).collect()
            }
        }
    }
}

/// Alternation of pulse phases along a train.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PhaseCycle {
    /// Every pulse at the configured phase.
    #[default]
    Constant,
    /// Every second pulse shifted by pi.
    Alternating,
}

/// A rectangular pulse. A zero duration denotes an instantaneous rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseParams {
    /// Width in seconds.
    pub duration: f64,
    /// Nominal rotation angle (radians) at unit RF scale.
    pub flip_angle: f64,
    /// Transverse axis of the rotation, radians from x.
    pub phase: f64,
    pub selectivity: Spin,
}

impl PulseParams {
    /// Nominally calibrated pi pulse of the given width on both spins, phase x.
    pub fn pi(duration: f64) -> Self {
        PulseParams {
            duration,
            flip_angle: PI,
            phase: 0.0,
            selectivity: Spin::Both,
        }
    }

    pub fn ideal_pi() -> Self {
        Self::pi(0.0)
    }

    pub fn rotation(flip_angle: f64, phase: f64, selectivity: Spin) -> Self {
        PulseParams {
            duration: 0.0,
            flip_angle,
            phase,
            selectivity,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn is_instantaneous(&self) -> bool {
        self.duration == 0.0
    }

    /// RF amplitude in Hz such that `2 pi nu tau = flip_angle`.
    pub fn nominal_amplitude(&self) -> f64 {
        self.flip_angle / (2.0 * PI * self.duration)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::domain(format!("pulse width {} must be >= 0", self.duration)));
        }
        if !self.flip_angle.is_finite() || !self.phase.is_finite() {
            return Err(Error::domain("pulse angle and phase must be finite"));
        }
        if self.duration > 0.0 && !(self.flip_angle > 0.0) {
            return Err(Error::domain("finite-width pulse needs a positive amplitude"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SegmentKind {
    Delay,
    Pulse(PulseParams),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration: f64,
}

impl Segment {
    pub fn delay(duration: f64) -> Self {
        Segment {
            kind: SegmentKind::Delay,
            duration,
        }
    }

    pub fn pulse(pulse: PulseParams) -> Self {
        Segment {
            kind: SegmentKind::Pulse(pulse),
            duration: pulse.duration,
        }
    }
}

/// A validated block of segments, repeated back to back.
#[derive(Clone, Debug, PartialEq)]
pub struct Timeline {
    segments: Vec<Segment>,
    repeats: usize,
    block_duration: f64,
}

impl Timeline {
    pub fn from_segments(segments: Vec<Segment>, repeats: usize) -> Result<Self> {
        if repeats < 1 {
            return Err(Error::domain("repeats must be at least 1"));
        }
        for seg in &segments {
            if !(seg.duration >= 0.0 && seg.duration.is_finite()) {
                return Err(Error::domain(format!("segment duration {} invalid", seg.duration)));
            }
            if let SegmentKind::Pulse(p) = seg.kind {
                p.validate()?;
            }
        }
        let block_duration = segments.iter().map(|s| s.duration).sum();
        Ok(Timeline {
            segments,
            repeats,
            block_duration,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn repeats(&self) -> usize {
        self.repeats
    }

    pub fn block_duration(&self) -> f64 {
        self.block_duration
    }

    pub fn total_duration(&self) -> f64 {
        self.block_duration * self.repeats as f64
    }

    pub fn with_repeats(&self, repeats: usize) -> Result<Self> {
        Self::from_segments(self.segments.clone(), repeats)
    }

    /// Centers of the pulses in the first block.
    pub fn pulse_centers(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut centers = Vec::new();
        for seg in &self.segments {
            if matches!(seg.kind, SegmentKind::Pulse(_)) {
                centers.push(t + seg.duration / 2.0);
            }
            t += seg.duration;
        }
        centers
    }

    pub fn pulse_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s.kind, SegmentKind::Pulse(_)))
            .count()
    }
}

/// Places a pulse centered on each instant and fills the gaps with delays.
///
/// Every gap must be strictly positive; touching pulses are rejected.
pub fn compile(timing: &TimingVector, pulse: &PulseParams, repeats: usize) -> Result<Timeline> {
    compile_with_cycle(timing, pulse, PhaseCycle::Constant, repeats)
}

pub fn compile_with_cycle(
    timing: &TimingVector,
    pulse: &PulseParams,
    cycle: PhaseCycle,
    repeats: usize,
) -> Result<Timeline> {
    pulse.validate()?;
    if repeats < 1 {
        return Err(Error::domain("repeats must be at least 1"));
    }
    let period = timing.total_period();
    let width = pulse.duration;
    let zero_gap = 1e-12 * period;
    let instants = timing.instants();
    let mut segments = Vec::with_capacity(2 * instants.len() + 1);
    let mut edge = 0.0;
    for (j, &t) in instants.iter().enumerate() {
        let (available, required) = if j == 0 {
            (t, width / 2.0)
        } else {
            (t - instants[j - 1], width)
        };
        if available - required <= zero_gap {
            return Err(Error::Overlap {
                index: j,
                available,
                required,
            });
        }
        let start = t - width / 2.0;
        segments.push(Segment::delay(start - edge));
        let phase = match cycle {
            PhaseCycle::Constant => pulse.phase,
            PhaseCycle::Alternating if j % 2 == 1 => pulse.phase + PI,
            PhaseCycle::Alternating => pulse.phase,
        };
        segments.push(Segment::pulse(pulse.with_phase(phase)));
        edge = start + width;
    }
    if let Some(&last) = instants.last() {
        let available = period - last;
        if available - width / 2.0 <= zero_gap {
            return Err(Error::Overlap {
                index: instants.len(),
                available,
                required: width / 2.0,
            });
        }
    }
    segments.push(Segment::delay(period - edge));
    let mut timeline = Timeline::from_segments(segments, repeats)?;
    // the sum of the segments differs from T by rounding only
    timeline.block_duration = period;
    Ok(timeline)
}

/// One line of the sequence text format.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSpec {
    pub scheme: Scheme,
    pub order: usize,
    pub tau_cpmg: f64,
    pub tau_pi: f64,
    pub repeats: usize,
    /// Pulse phase in degrees.
    pub phase_deg: f64,
}

impl SequenceSpec {
    pub fn label(&self) -> String {
        match self.scheme {
            Scheme::Cpmg => format!("CPMG-{}", self.order),
            Scheme::Udd => format!("UDD-{}", self.order),
            Scheme::Free => "free".to_string(),
            Scheme::Custom => format!("custom-{}", self.order),
        }
    }

    pub fn period(&self) -> Result<f64> {
        block_duration(self.order, self.tau_cpmg, self.tau_pi)
    }

    pub fn timing(&self) -> Result<TimingVector> {
        let period = self.period()?;
        match self.scheme {
            Scheme::Cpmg => cpmg_times(self.order, period),
            Scheme::Udd => udd_times(self.order, period),
            other => Err(Error::domain(format!("{} is not a pulse scheme", other.keyword()))),
        }
    }

    pub fn pulse(&self) -> PulseParams {
        PulseParams::pi(self.tau_pi).with_phase(self.phase_deg.to_radians())
    }

    pub fn compile(&self) -> Result<Timeline> {
        compile(&self.timing()?, &self.pulse(), self.repeats)
    }
}

impl fmt::Display for SequenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} order={} tau_cpmg={}s tau_pi={}s repeats={}",
            self.scheme.keyword(),
            self.order,
            self.tau_cpmg,
            self.tau_pi,
            self.repeats
        )?;
        if self.phase_deg != 0.0 {
            write!(f, " phase={}", self.phase_deg)?;
        }
        Ok(())
    }
}

/// Parses a single sequence line (line number 1 in errors).
pub fn parse_sequence_spec(text: &str) -> Result<SequenceSpec> {
    parse_line(text, 1)
}

/// Parses one sequence per non-empty line; `#` starts a comment.
pub fn parse_sequence_specs(text: &str) -> Result<Vec<SequenceSpec>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}

fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(move |(byte, tok)| (line[..byte].chars().count() + 1, tok))
}

fn parse_line(line: &str, line_no: usize) -> Result<SequenceSpec> {
    let syntax = |column: usize, message: String| Error::Syntax {
        line: line_no,
        column,
        message,
    };
    let semantic = |message: String| Error::Semantic {
        line: line_no,
        message,
    };
    let line = line.split('#').next().unwrap_or("");
    let mut toks = tokens(line);
    let (col, word) = toks
        .next()
        .ok_or_else(|| syntax(1, "empty sequence line".into()))?;
    let scheme = match word {
        "cpmg" => Scheme::Cpmg,
        "udd" => Scheme::Udd,
        other => return Err(syntax(col, format!("unknown scheme `{other}` (expected cpmg or udd)"))),
    };

    let mut order: Option<i64> = None;
    let mut tau_cpmg: Option<f64> = None;
    let mut tau_pi: Option<f64> = None;
    let mut repeats: Option<i64> = None;
    let mut phase: Option<f64> = None;

    for (col, tok) in toks {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| syntax(col, format!("expected key=value, found `{tok}`")))?;
        let vcol = col + key.chars().count() + 1;
        if value.is_empty() {
            return Err(syntax(vcol, format!("missing value for `{key}`")));
        }
        let int = |v: &str| -> Result<i64> {
            v.parse::<i64>()
                .map_err(|_| syntax(vcol, format!("`{v}` is not an integer")))
        };
        let time = |v: &str| -> Result<f64> {
            let (x, unit) = units::split_number(v)
                .ok_or_else(|| syntax(vcol, format!("`{v}` is not a number")))?;
            if unit.is_empty() {
                return Err(syntax(vcol + v.len(), format!("`{v}` is missing a unit (s, ms or us)")));
            }
            let scale = units::time_unit_scale(unit).ok_or_else(|| {
                syntax(vcol + v.len() - unit.len(), format!("unknown time unit `{unit}`"))
            })?;
            Ok(x * scale)
        };
        let duplicate = || syntax(col, format!("duplicate key `{key}`"));
        match key {
            "order" => {
                if order.replace(int(value)?).is_some() {
                    return Err(duplicate());
                }
            }
            "repeats" => {
                if repeats.replace(int(value)?).is_some() {
                    return Err(duplicate());
                }
            }
            "tau_cpmg" => {
                if tau_cpmg.replace(time(value)?).is_some() {
                    return Err(duplicate());
                }
            }
            "tau_pi" => {
                if tau_pi.replace(time(value)?).is_some() {
                    return Err(duplicate());
                }
            }
            "phase" => {
                let (x, rest) = units::split_number(value)
                    .ok_or_else(|| syntax(vcol, format!("`{value}` is not a number")))?;
                if !rest.is_empty() {
                    return Err(syntax(vcol + value.len() - rest.len(), format!("unexpected `{rest}` after phase")));
                }
                if phase.replace(x).is_some() {
                    return Err(duplicate());
                }
            }
            other => return Err(syntax(col, format!("unknown key `{other}`"))),
        }
    }

    let end = line.chars().count() + 1;
    let missing = |k: &str| syntax(end, format!("missing `{k}=`"));
    let order = order.ok_or_else(|| missing("order"))?;
    let tau_cpmg = tau_cpmg.ok_or_else(|| missing("tau_cpmg"))?;
    let tau_pi = tau_pi.ok_or_else(|| missing("tau_pi"))?;
    let repeats = repeats.ok_or_else(|| missing("repeats"))?;
    let phase_deg = phase.unwrap_or(0.0);

    if order < 1 {
        return Err(semantic(format!("order must be >= 1, got {order}")));
    }
    if !(tau_cpmg > 0.0 && tau_cpmg.is_finite()) {
        return Err(semantic(format!("tau_cpmg must be > 0, got {tau_cpmg}")));
    }
    if !(tau_pi >= 0.0 && tau_pi.is_finite()) {
        return Err(semantic(format!("tau_pi must be >= 0, got {tau_pi}")));
    }
    if repeats < 1 {
        return Err(semantic(format!("repeats must be >= 1, got {repeats}")));
    }
    if !phase_deg.is_finite() {
        return Err(semantic("phase must be finite".into()));
    }
    Ok(SequenceSpec {
        scheme,
        order: order as usize,
        tau_cpmg,
        tau_pi,
        repeats: repeats as usize,
        phase_deg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cpmg_examples() {
        let t = 3.7;
        assert_eq!(cpmg_times(1, t).unwrap().instants(), &[t / 2.0]);
        assert_eq!(cpmg_times(2, t).unwrap().instants(), &[t / 4.0, 3.0 * t / 4.0]);
        assert_eq!(cpmg_times(4, 1.0).unwrap().instants(), &[0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn udd_matches_cpmg_for_low_orders() {
        for t in [1.0, 4.0272e-3, 28.1904e-3] {
            for n in [1, 2] {
                let u = udd_times(n, t).unwrap();
                let c = cpmg_times(n, t).unwrap();
                for (a, b) in u.instants().iter().zip(c.instants()) {
                    assert_abs_diff_eq!(*a, *b, epsilon = 1e-12 * t);
                }
            }
        }
    }

    #[test]
    fn udd7_instants() {
        let t = 7.0 * 4.0272e-3;
        // 30-digit evaluation of T sin^2(pi j / 16)
        let want_ms = [
            1.072933213346911,
            4.128388497819375,
            8.701200484127586,
            14.0952,
            19.489199515872414,
            24.062011502180624,
            27.11746678665309,
        ];
        let got = udd_times(7, t).unwrap();
        for (g, w) in got.instants().iter().zip(want_ms) {
            assert_abs_diff_eq!(g * 1e3, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn bad_order_or_period() {
        assert!(matches!(cpmg_times(0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(udd_times(3, 0.0), Err(Error::Domain(_))));
        assert!(matches!(udd_times(3, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn block_law() {
        assert_abs_diff_eq!(block_duration(7, 2e-3, 27.2e-6).unwrap(), 28.1904e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(block_duration(1, 2e-3, 27.2e-6).unwrap(), 4.0272e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(block_duration(3, 1e-3, 0.0).unwrap(), 6e-3, epsilon = 1e-15);
        assert!(block_duration(3, 0.0, 0.0).is_err());
        assert!(block_duration(3, 1e-3, -1.0).is_err());
    }

    #[test]
    fn cpmg_unit_block() {
        let tau = 2e-3;
        let width = 27.2e-6;
        let timing = cpmg_times(1, block_duration(1, tau, width).unwrap()).unwrap();
        let tl = compile(&timing, &PulseParams::pi(width), 1).unwrap();
        let d: Vec<f64> = tl.segments().iter().map(|s| s.duration).collect();
        assert_eq!(d.len(), 3);
        assert_abs_diff_eq!(d[0], tau, epsilon = 1e-15);
        assert_abs_diff_eq!(d[1], width, epsilon = 0.0);
        assert_abs_diff_eq!(d[2], tau, epsilon = 1e-15);
        assert!(matches!(tl.segments()[1].kind, SegmentKind::Pulse(_)));
    }

    #[test]
    fn cpmg_n_repeats_unit_exactly() {
        let tau = 2e-3;
        let width = 27.2e-6;
        let n = 5;
        let timing = cpmg_times(n, block_duration(n, tau, width).unwrap()).unwrap();
        let tl = compile(&timing, &PulseParams::pi(width), 3).unwrap();
        let segs = tl.segments();
        assert_abs_diff_eq!(segs[0].duration, tau, epsilon = 1e-15);
        for inner in segs.iter().skip(2).step_by(2).take(n - 1) {
            assert_abs_diff_eq!(inner.duration, 2.0 * tau, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(segs.last().unwrap().duration, tau, epsilon = 1e-15);
        assert_abs_diff_eq!(tl.total_duration(), 3.0 * n as f64 * (2.0 * tau + width), epsilon = 1e-15);
    }

    #[test]
    fn touching_pulses_overlap() {
        let t = 1.0;
        let timing = udd_times(2, t).unwrap();
        let err = compile(&timing, &PulseParams::pi(t / 2.0), 1).unwrap_err();
        assert!(matches!(err, Error::Overlap { .. }));
        // just below the limit compiles
        compile(&timing, &PulseParams::pi(0.49 * t), 1).unwrap();
    }

    #[test]
    fn smallest_overlapping_udd_order() {
        // brute-force oracle: first N whose instants leave no room for the pulses
        let (tau, width) = (2e-3, 27.2e-6);
        let fits = |n: usize| {
            let period = n as f64 * (2.0 * tau + width);
            let t: Vec<f64> = (1..=n)
                .map(|j| period * (PI * j as f64 / (2 * n + 2) as f64).sin().powi(2))
                .collect();
            t[0] > width / 2.0
                && period - t[n - 1] > width / 2.0
                && t.windows(2).all(|w| w[1] - w[0] > width)
        };
        let oracle = (1..5000).find(|&n| !fits(n)).unwrap();
        let first_fail = (1..5000)
            .find(|&n| {
                let spec = SequenceSpec {
                    scheme: Scheme::Udd,
                    order: n,
                    tau_cpmg: tau,
                    tau_pi: width,
                    repeats: 1,
                    phase_deg: 0.0,
                };
                spec.compile().is_err()
            })
            .unwrap();
        assert_eq!(first_fail, oracle);
        assert!(first_fail > 100, "got {first_fail}");
    }

    #[test]
    fn alternating_phase() {
        let timing = cpmg_times(4, 1.0).unwrap();
        let tl = compile_with_cycle(&timing, &PulseParams::pi(0.01), PhaseCycle::Alternating, 1).unwrap();
        let phases: Vec<f64> = tl
            .segments()
            .iter()
            .filter_map(|s| match s.kind {
                SegmentKind::Pulse(p) => Some(p.phase),
                _ => None,
            })
            .collect();
        assert_eq!(phases, vec![0.0, PI, 0.0, PI]);
    }

    #[test]
    fn parse_example() {
        let spec = parse_sequence_spec("udd order=7 tau_cpmg=2ms tau_pi=27.2us repeats=100").unwrap();
        assert_eq!(spec.scheme, Scheme::Udd);
        assert_eq!(spec.order, 7);
        assert_abs_diff_eq!(spec.tau_cpmg, 2e-3, epsilon = 1e-18);
        assert_abs_diff_eq!(spec.tau_pi, 27.2e-6, epsilon = 1e-18);
        assert_eq!(spec.repeats, 100);
        assert_eq!(spec.phase_deg, 0.0);
        assert_eq!(spec.label(), "UDD-7");
    }

    #[test]
    fn parse_errors() {
        let err = parse_sequence_spec("cpmg order=0 tau_cpmg=2ms tau_pi=27.2us repeats=1").unwrap_err();
        assert!(matches!(err, Error::Semantic { line: 1, .. }), "{err}");

        let err = parse_sequence_spec("udd order=7 tau_cpmg=2").unwrap_err();
        match err {
            Error::Syntax { line, column, message } => {
                assert_eq!(line, 1);
                assert_eq!(column, 23);
                assert!(message.contains("missing a unit"));
            }
            other => panic!("{other}"),
        }

        let err = parse_sequence_spec("udd order=7 tau_cpmg=2,5ms tau_pi=1us repeats=1").unwrap_err();
        assert!(matches!(err, Error::Syntax { column: 23, .. }), "{err}");

        let err = parse_sequence_specs("cpmg order=1 tau_cpmg=1ms tau_pi=0s repeats=1\n\nxy4 order=1")
            .unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 3, column: 1, .. }), "{err}");

        let err = parse_sequence_spec("udd order=7 order=3 tau_cpmg=2ms tau_pi=1us repeats=1").unwrap_err();
        assert!(matches!(err, Error::Syntax { column: 13, .. }), "{err}");
    }

    #[test]
    fn parse_multi_and_phase() {
        let specs = parse_sequence_specs(
            "# orders\nudd order=3 tau_cpmg=1ms tau_pi=10us repeats=2 phase=90\ncpmg order=2 tau_cpmg=0.5s tau_pi=0s repeats=1\n",
        )
        .unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].phase_deg, 90.0);
        assert_abs_diff_eq!(specs[0].pulse().phase, PI / 2.0, epsilon = 1e-15);
        assert_eq!(specs[1].scheme, Scheme::Cpmg);
    }
}
