//! The sampling environment: a bag of arms that may only be explored one at a
//! time. Drawing a new arm permanently discards the previous one, and only the
//! most recently drawn arm can be sampled or declared heavy.

use std::io::Write;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::model::{draw_label, ArmSampler, Label, MixtureSpec, RandomSource};

pub const DEFAULT_MAX_TOTAL_SAMPLES: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("no arm has been drawn yet")]
    NoCurrentArm,
    #[error("session already terminated")]
    Terminated,
    #[error("sample budget of {0} exhausted")]
    BudgetExhausted(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionOptions {
    pub record_trace: bool,
    pub max_total_samples: u64,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            record_trace: false,
            max_total_samples: DEFAULT_MAX_TOTAL_SAMPLES,
        }
    }
}

/// Opaque reference to the arm currently out of the bag; arm indices start at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArmHandle {
    index: u64,
}

impl ArmHandle {
    pub fn index(&self) -> u64 {
        self.index
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TraceKind {
    DrawArm,
    Sample(f64),
    DeclareHeavy,
    DeclareNull,
    BudgetExhausted,
}

impl TraceKind {
    pub fn name(&self) -> &'static str {
        match self {
            TraceKind::DrawArm => "draw_arm",
            TraceKind::Sample(_) => "sample",
            TraceKind::DeclareHeavy => "declare_heavy",
            TraceKind::DeclareNull => "declare_null",
            TraceKind::BudgetExhausted => "budget_exhausted",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            TraceKind::DeclareHeavy | TraceKind::DeclareNull | TraceKind::BudgetExhausted
        )
    }
}

/// One protocol event; `t` is the cumulative sample count after the event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEvent {
    pub kind: TraceKind,
    pub arm: Option<u64>,
    pub t: u64,
}

impl Serialize for TraceEvent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("TraceEvent", 3)?;
        st.serialize_field("kind", self.kind.name())?;
        st.serialize_field("arm", &self.arm)?;
        st.serialize_field("t", &self.t)?;
        st.end()
    }
}

/// Writes one JSON object per line.
pub fn write_trace_jsonl<W: Write>(events: &[TraceEvent], mut w: W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    DeclaredHeavy,
    DeclaredNull,
    BudgetExhausted,
}

/// Where in a multi-stage schedule a strategy stopped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageInfo {
    #[default]
    None,
    Doubling { k: u32 },
    Landmark { ell: u32, k: u32 },
}

/// Terminal report of one strategy run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyOutcome {
    pub declared: Option<u64>,
    pub truth: Option<Label>,
    /// `None` when nothing was declared.
    pub correct: Option<bool>,
    pub arms_drawn: u64,
    pub total_samples: u64,
    pub termination: Termination,
    pub stage: StageInfo,
    #[serde(skip)]
    pub trace: Vec<TraceEvent>,
}

impl StrategyOutcome {
    pub fn is_light_error(&self) -> bool {
        self.correct == Some(false)
    }
}

#[derive(Clone, Copy, Debug)]
struct CurrentArm {
    index: u64,
    label: Label,
    samples: u64,
}

/// A single run of the one-coin-at-a-time protocol.
#[derive(Debug)]
pub struct BagSession {
    spec: MixtureSpec,
    rng: RandomSource,
    options: SessionOptions,
    light: ArmSampler,
    heavy: ArmSampler,
    current: Option<CurrentArm>,
    arms_drawn: u64,
    total_samples: u64,
    trace: Vec<TraceEvent>,
    finished: Option<StrategyOutcome>,
    terminated: bool,
}

impl BagSession {
    pub fn new(spec: MixtureSpec, rng: RandomSource, options: SessionOptions) -> Self {
        let family = spec.family();
        // spec construction already validated both means
        let light = ArmSampler::new(family, spec.theta0()).expect("validated spec");
        let heavy = ArmSampler::new(family, spec.theta1()).expect("validated spec");
        Self {
            spec,
            rng,
            options,
            light,
            heavy,
            current: None,
            arms_drawn: 0,
            total_samples: 0,
            trace: Vec::new(),
            finished: None,
            terminated: false,
        }
    }

    pub fn spec(&self) -> &MixtureSpec {
        &self.spec
    }

    /// `N`, the number of arms drawn so far.
    pub fn arms_drawn(&self) -> u64 {
        self.arms_drawn
    }

    /// `T`, the number of samples taken so far.
    pub fn total_samples(&self) -> u64 {
        self.total_samples
    }

    /// Samples taken from the current arm.
    pub fn current_samples(&self) -> Option<u64> {
        self.current.map(|c| c.samples)
    }

    pub fn current_arm(&self) -> Option<ArmHandle> {
        self.current.map(|c| ArmHandle { index: c.index })
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    fn record(&mut self, kind: TraceKind, arm: Option<u64>) {
        if self.options.record_trace {
            self.trace.push(TraceEvent {
                kind,
                arm,
                t: self.total_samples,
            });
        }
    }

    fn live(&self) -> Result<(), SessionError> {
        if self.terminated {
            Err(SessionError::Terminated)
        } else {
            Ok(())
        }
    }

    /// Returns the current arm to the bag for good and draws a fresh one.
    pub fn draw_next(&mut self) -> Result<ArmHandle, SessionError> {
        self.live()?;
        let label = draw_label(&self.spec, &mut self.rng);
        self.arms_drawn += 1;
        let index = self.arms_drawn;
        self.current = Some(CurrentArm {
            index,
            label,
            samples: 0,
        });
        self.record(TraceKind::DrawArm, Some(index));
        Ok(ArmHandle { index })
    }

    /// One more observation of the current arm.
    ///
    /// Hitting the sample budget terminates the session; the terminal outcome
    /// is then available from [`BagSession::finish`].
    #[inline]
    pub fn sample_current(&mut self) -> Result<f64, SessionError> {
        self.live()?;
        let cur = self.current.as_mut().ok_or(SessionError::NoCurrentArm)?;
        if self.total_samples >= self.options.max_total_samples {
            let arm = Some(cur.index);
            self.close(TraceKind::BudgetExhausted, arm, Termination::BudgetExhausted, None);
            return Err(SessionError::BudgetExhausted(self.options.max_total_samples));
        }
        cur.samples += 1;
        let (index, label) = (cur.index, cur.label);
        self.total_samples += 1;
        let x = match label {
            Label::Heavy => self.heavy.sample(&mut self.rng),
            Label::Light => self.light.sample(&mut self.rng),
        };
        self.record(TraceKind::Sample(x), Some(index));
        Ok(x)
    }

    /// Declares the current arm heavy and terminates.
    pub fn declare_heavy(&mut self) -> Result<StrategyOutcome, SessionError> {
        self.live()?;
        let cur = self.current.ok_or(SessionError::NoCurrentArm)?;
        self.close(
            TraceKind::DeclareHeavy,
            Some(cur.index),
            Termination::DeclaredHeavy,
            Some(cur),
        );
        Ok(self.finished.take().expect("just closed"))
    }

    /// Terminates without declaring any arm.
    pub fn declare_null(&mut self) -> Result<StrategyOutcome, SessionError> {
        self.live()?;
        let arm = self.current.map(|c| c.index);
        self.close(TraceKind::DeclareNull, arm, Termination::DeclaredNull, None);
        Ok(self.finished.take().expect("just closed"))
    }

    fn close(
        &mut self,
        kind: TraceKind,
        arm: Option<u64>,
        termination: Termination,
        declared: Option<CurrentArm>,
    ) {
        self.record(kind, arm);
        self.terminated = true;
        self.finished = Some(StrategyOutcome {
            declared: declared.map(|c| c.index),
            truth: declared.map(|c| c.label),
            correct: declared.map(|c| c.label == Label::Heavy),
            arms_drawn: self.arms_drawn,
            total_samples: self.total_samples,
            termination,
            stage: StageInfo::None,
            trace: std::mem::take(&mut self.trace),
        });
    }

    /// Resolves a strategy result: budget exhaustion becomes the stored
    /// terminal outcome, other protocol errors are passed through.
    pub fn finish(
        &mut self,
        result: Result<StrategyOutcome, SessionError>,
    ) -> Result<StrategyOutcome, SessionError> {
        match result {
            Err(SessionError::BudgetExhausted(limit)) => {
                self.finished.take().ok_or(SessionError::BudgetExhausted(limit))
            }
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArmFamily;

    fn session(alpha: f64, t0: f64, t1: f64, trace: bool) -> BagSession {
        let spec = MixtureSpec::new(alpha.min(0.5), t0, t1, ArmFamily::Bernoulli)
            .unwrap()
            .with_alpha_override(alpha)
            .unwrap();
        BagSession::new(
            spec,
            RandomSource::new(3, 0),
            SessionOptions {
                record_trace: trace,
                ..Default::default()
            },
        )
    }

    #[test]
    fn draw_counts_arms() {
        let mut s = session(0.2, 0.3, 0.6, false);
        assert_eq!(s.arms_drawn(), 0);
        assert_eq!(s.draw_next().unwrap().index(), 1);
        assert_eq!(s.arms_drawn(), 1);
        assert_eq!(s.total_samples(), 0);
    }

    #[test]
    fn all_heavy_bag() {
        let mut s = session(1.0, 0.0, 1.0, false);
        for _ in 0..50 {
            s.draw_next().unwrap();
            for _ in 0..5 {
                assert_eq!(s.sample_current().unwrap(), 1.0);
            }
        }
        assert_eq!(s.total_samples(), 250);
        let out = s.declare_heavy().unwrap();
        assert_eq!(out.correct, Some(true));
        assert_eq!(out.truth, Some(Label::Heavy));
        assert_eq!(out.declared, Some(50));
    }

    #[test]
    fn light_declaration_is_incorrect() {
        let mut s = session(0.0, 0.3, 0.6, false);
        s.draw_next().unwrap();
        let out = s.declare_heavy().unwrap();
        assert_eq!(out.correct, Some(false));
        assert!(out.is_light_error());
    }

    #[test]
    fn sampling_requires_an_arm() {
        let mut s = session(0.2, 0.3, 0.6, false);
        assert_eq!(s.sample_current(), Err(SessionError::NoCurrentArm));
        assert_eq!(s.declare_heavy(), Err(SessionError::NoCurrentArm));
    }

    #[test]
    fn terminated_session_rejects_everything() {
        let mut s = session(0.2, 0.3, 0.6, false);
        s.draw_next().unwrap();
        let out = s.declare_null().unwrap();
        assert_eq!(out.declared, None);
        assert_eq!(out.correct, None);
        assert_eq!(s.draw_next(), Err(SessionError::Terminated));
        assert_eq!(s.sample_current(), Err(SessionError::Terminated));
        assert_eq!(s.declare_null(), Err(SessionError::Terminated));
    }

    #[test]
    fn heavy_arm_mean() {
        let mut s = session(1.0, 0.3, 0.7, false);
        s.draw_next().unwrap();
        let n = 10_000;
        let mean = (0..n).map(|_| s.sample_current().unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.7).abs() <= 0.02, "{mean}");
        assert_eq!(s.current_samples(), Some(n));
    }

    #[test]
    fn label_sequence_replays() {
        let labels = || {
            let mut s = session(0.2, 0.0, 1.0, false);
            (0..200)
                .map(|_| {
                    s.draw_next().unwrap();
                    s.sample_current().unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(labels(), labels());
    }

    #[test]
    fn budget_exhaustion_is_terminal() {
        let spec = MixtureSpec::new(0.2, 0.3, 0.6, ArmFamily::Bernoulli).unwrap();
        let mut s = BagSession::new(
            spec,
            RandomSource::new(0, 0),
            SessionOptions {
                record_trace: true,
                max_total_samples: 10,
            },
        );
        s.draw_next().unwrap();
        let r = (|| loop {
            s.sample_current()?;
        })();
        let out = s.finish(r).unwrap();
        assert_eq!(out.termination, Termination::BudgetExhausted);
        assert_eq!(out.total_samples, 10);
        assert_eq!(out.correct, None);
        let last = out.trace.last().unwrap();
        assert_eq!(last.kind, TraceKind::BudgetExhausted);
        assert_eq!(last.t, 10);
    }

    #[test]
    fn trace_accounting_and_json() {
        let mut s = session(0.3, 0.2, 0.8, true);
        for _ in 0..3 {
            s.draw_next().unwrap();
            for _ in 0..4 {
                s.sample_current().unwrap();
            }
        }
        let out = s.declare_heavy().unwrap();
        assert_eq!(out.trace.len(), 3 + 12 + 1);
        assert_eq!(out.trace.last().unwrap().t, out.total_samples);
        let samples = out
            .trace
            .iter()
            .filter(|e| matches!(e.kind, TraceKind::Sample(_)))
            .count() as u64;
        assert_eq!(samples, out.total_samples);

        let mut buf = Vec::new();
        write_trace_jsonl(&out.trace[..2], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "{\"kind\":\"draw_arm\",\"arm\":1,\"t\":0}\n{\"kind\":\"sample\",\"arm\":1,\"t\":1}\n"
        );
    }
}
