//! Run logs produced by the inference loop, the perception simulator, and
//! the walker, with CSV round-tripping for offline analysis.
//!
//! Logs are the determinism surface: two runs agree iff their logs compare
//! equal, so records hold exactly what the run produced and nothing
//! derived.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

/// Tags attached to a step. A step can carry several (an update plus a
/// switch, say); within a record they are stored in this declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    /// Posterior update from an observed datum.
    B,
    /// Material likelihood re-estimation.
    Ib,
    /// Hypothesis-set repair after degeneracy.
    Explore,
    /// The maximum-posterior percept changed.
    Switch,
}

pub const ALL_EVENTS: [Event; 4] = [Event::B, Event::Ib, Event::Explore, Event::Switch];

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Event::B => "B",
            Event::Ib => "IB",
            Event::Explore => "EXPLORE",
            Event::Switch => "SWITCH",
        })
    }
}

impl FromStr for Event {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "B" => Ok(Event::B),
            "IB" => Ok(Event::Ib),
            "EXPLORE" => Ok(Event::Explore),
            "SWITCH" => Ok(Event::Switch),
            other => Err(format!("unknown event tag {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn join_events(events: &[Event]) -> String {
    let parts: Vec<String> = events.iter().map(Event::to_string).collect();
    parts.join(";")
}

fn split_events(field: &str, line: usize) -> Result<Vec<Event>, LogError> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|tag| tag.parse().map_err(|msg| LogError::Parse { line, msg }))
        .collect()
}

/// One step of a percept-valued run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerceptRecord {
    pub t: u64,
    /// Index into the log's label table.
    pub percept: usize,
    pub events: Vec<Event>,
}

/// Percept-valued run log. Timestamps are strictly increasing; percepts
/// index into `labels`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrajectoryLog {
    pub labels: Vec<String>,
    pub records: Vec<PerceptRecord>,
}

impl TrajectoryLog {
    pub fn new(labels: Vec<String>) -> Self {
        Self { labels, records: Vec::new() }
    }

    pub fn push(&mut self, t: u64, percept: usize, events: Vec<Event>) {
        debug_assert!(self.records.last().is_none_or(|r| r.t < t));
        debug_assert!(percept < self.labels.len());
        self.records.push(PerceptRecord { t, percept, events });
    }

    /// The percept sequence in time order.
    pub fn percepts(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.percept).collect()
    }

    pub fn count(&self, event: Event) -> usize {
        self.records.iter().filter(|r| r.events.contains(&event)).count()
    }

    pub fn validate(&self) -> Result<(), String> {
        for w in self.records.windows(2) {
            if w[1].t <= w[0].t {
                return Err(format!("timestamps not increasing at t={}", w[1].t));
            }
        }
        if let Some(r) = self.records.iter().find(|r| r.percept >= self.labels.len()) {
            return Err(format!("percept {} out of range at t={}", r.percept, r.t));
        }
        Ok(())
    }

    /// CSV rows `t,percept,event` with the percept written as its label and
    /// events joined by ';'.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<(), LogError> {
        writeln!(w, "t,percept,event")?;
        for r in &self.records {
            writeln!(w, "{},{},{}", r.t, self.labels[r.percept], join_events(&r.events))?;
        }
        Ok(())
    }

    /// Inverse of `write_csv`. Labels are rebuilt in order of first
    /// appearance, so a round trip preserves the percept sequence (and is
    /// identical when the original labels were in first-appearance order).
    pub fn read_csv(r: &mut impl BufRead) -> Result<Self, LogError> {
        let mut log = TrajectoryLog::default();
        let mut last_t = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line != "t,percept,event" {
                    return Err(LogError::Parse { line: 1, msg: format!("bad header {line:?}") });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let mut parts = line.splitn(3, ',');
            let (t, label, events) = match (parts.next(), parts.next(), parts.next()) {
                (Some(t), Some(p), Some(e)) => (t, p, e),
                _ => return Err(LogError::Parse { line: lineno, msg: "expected 3 fields".into() }),
            };
            let t: u64 = t
                .parse()
                .map_err(|e| LogError::Parse { line: lineno, msg: format!("bad t: {e}") })?;
            if last_t.is_some_and(|prev| t <= prev) {
                return Err(LogError::Parse { line: lineno, msg: "timestamps not increasing".into() });
            }
            last_t = Some(t);
            let percept = match log.labels.iter().position(|l| l == label) {
                Some(p) => p,
                None => {
                    log.labels.push(label.to_string());
                    log.labels.len() - 1
                }
            };
            log.records.push(PerceptRecord { t, percept, events: split_events(events, lineno)? });
        }
        Ok(log)
    }
}

/// One step of a position-valued run.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkRecord {
    pub t: u64,
    pub x: f64,
    pub y: f64,
    pub events: Vec<Event>,
}

/// Position-valued run log for the walker.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WalkLog {
    pub records: Vec<WalkRecord>,
}

impl WalkLog {
    pub fn push(&mut self, t: u64, x: f64, y: f64, events: Vec<Event>) {
        debug_assert!(self.records.last().is_none_or(|r| r.t < t));
        self.records.push(WalkRecord { t, x, y, events });
    }

    pub fn positions(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.records.iter().map(|r| r.x).collect(),
            self.records.iter().map(|r| r.y).collect(),
        )
    }

    pub fn count(&self, event: Event) -> usize {
        self.records.iter().filter(|r| r.events.contains(&event)).count()
    }

    /// CSV rows `t,x,y,event`; float formatting is shortest-round-trip, so
    /// read(write(log)) reproduces the positions bit for bit.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<(), LogError> {
        writeln!(w, "t,x,y,event")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{}", r.t, r.x, r.y, join_events(&r.events))?;
        }
        Ok(())
    }

    pub fn read_csv(r: &mut impl BufRead) -> Result<Self, LogError> {
        let mut log = WalkLog::default();
        let mut last_t = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line != "t,x,y,event" {
                    return Err(LogError::Parse { line: 1, msg: format!("bad header {line:?}") });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let fields: Vec<&str> = line.splitn(4, ',').collect();
            if fields.len() != 4 {
                return Err(LogError::Parse { line: lineno, msg: "expected 4 fields".into() });
            }
            let t: u64 = fields[0]
                .parse()
                .map_err(|e| LogError::Parse { line: lineno, msg: format!("bad t: {e}") })?;
            if last_t.is_some_and(|prev| t <= prev) {
                return Err(LogError::Parse { line: lineno, msg: "timestamps not increasing".into() });
            }
            last_t = Some(t);
            let x: f64 = fields[1]
                .parse()
                .map_err(|e| LogError::Parse { line: lineno, msg: format!("bad x: {e}") })?;
            let y: f64 = fields[2]
                .parse()
                .map_err(|e| LogError::Parse { line: lineno, msg: format!("bad y: {e}") })?;
            log.records.push(WalkRecord { t, x, y, events: split_events(fields[3], lineno)? });
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    #[test]
    fn event_tags_round_trip_through_strings() {
        for e in ALL_EVENTS {
            assert_eq!(e.to_string().parse::<Event>().unwrap(), e);
        }
        assert!("b".parse::<Event>().is_err());
    }

    fn sample_log() -> TrajectoryLog {
        let mut log = TrajectoryLog::new(vec!["a".into(), "b".into()]);
        log.push(0, 0, vec![]);
        log.push(1, 0, vec![Event::B]);
        log.push(2, 1, vec![Event::B, Event::Ib, Event::Switch]);
        log.push(5, 1, vec![Event::Explore]);
        log
    }

    #[test]
    fn percept_csv_round_trips() {
        let log = sample_log();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,percept,event\n0,a,\n1,a,B\n2,b,B;IB;SWITCH\n"));
        let back = TrajectoryLog::read_csv(&mut BufReader::new(&buf[..])).unwrap();
        assert_eq!(back, log);
        assert!(back.validate().is_ok());
    }

    #[test]
    fn percept_csv_rejects_malformed_input() {
        let cases: &[&str] = &[
            "wrong,header\n",
            "t,percept,event\nx,a,B\n",
            "t,percept,event\n1,a,B\n1,a,B\n",
            "t,percept,event\n1,a,B;WAT\n",
            "t,percept,event\n1,a\n",
        ];
        for case in cases {
            assert!(
                TrajectoryLog::read_csv(&mut BufReader::new(case.as_bytes())).is_err(),
                "accepted {case:?}"
            );
        }
    }

    #[test]
    fn walk_csv_round_trips_positions_exactly() {
        let mut log = WalkLog::default();
        let mut x = 0.0f64;
        let mut y = 0.0f64;
        for t in 0..50u64 {
            x += (t as f64 * 0.7).cos();
            y += (t as f64 * 0.7).sin();
            let events = if t % 7 == 0 { vec![Event::Switch] } else { vec![] };
            log.push(t, x, y, events);
        }
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let back = WalkLog::read_csv(&mut BufReader::new(&buf[..])).unwrap();
        assert_eq!(back, log);
        for (a, b) in back.records.iter().zip(&log.records) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
    }

    #[test]
    fn event_counts_and_percept_sequence() {
        let log = sample_log();
        assert_eq!(log.count(Event::B), 2);
        assert_eq!(log.count(Event::Switch), 1);
        assert_eq!(log.percepts(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn validation_catches_corrupt_logs() {
        let mut log = sample_log();
        log.records[2].percept = 9;
        assert!(log.validate().is_err());
        let mut log = sample_log();
        log.records[1].t = 0;
        assert!(log.validate().is_err());
    }
}
