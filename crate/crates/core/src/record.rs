//! Photon/jump records and their text serialization.
//!
//! A stream holds one or more records. Each record starts with a header block
//! of `# key = value` lines opened by [`RECORD_MAGIC`], followed by one line
//! per event:
//!
//! ```text
//! # superrad jump record
//! # schema_version = 1
//! # model = adiabatic
//! # seed = 42
//! # total_time = 1.0000000000000000e2
//! # burn_in = 1.0000000000000000e1
//! # param.n_atoms = 2
//! # param.coupling = ...            (all SystemParams fields)
//! # events = 2
//! 1.2500000000000000e0<TAB>cavity
//! 3.0000000000000000e0<TAB>pump-1
//! ```
//!
//! Times carry 17 significant digits, enough to round-trip every `f64`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::operators::ModelKind;
use crate::params::SystemParams;

pub const RECORD_MAGIC: &str = "# superrad jump record";
pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    /// Index into [`JumpRecord::channels`].
    pub channel: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpRecord {
    pub events: Vec<JumpEvent>,
    /// Channel labels, in operator-set order.
    pub channels: Vec<String>,
    pub total_time: f64,
    /// Events earlier than this are transient; they stay in the record but
    /// estimators skip them.
    pub burn_in: f64,
    pub seed: u64,
    pub model: ModelKind,
    pub params: SystemParams,
}

impl JumpRecord {
    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == label)
    }

    pub fn label(&self, event: &JumpEvent) -> &str {
        &self.channels[event.channel]
    }

    /// Event times of one channel, including transient ones.
    pub fn times(&self, label: &str) -> Vec<f64> {
        match self.channel_index(label) {
            Some(k) => self
                .events
                .iter()
                .filter(|e| e.channel == k)
                .map(|e| e.time)
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn count(&self, label: &str) -> usize {
        self.channel_index(label)
            .map_or(0, |k| self.events.iter().filter(|e| e.channel == k).count())
    }

    /// Number of events of `label` at or after the burn-in.
    pub fn steady_count(&self, label: &str) -> usize {
        self.channel_index(label).map_or(0, |k| {
            self.events
                .iter()
                .filter(|e| e.channel == k && e.time >= self.burn_in)
                .count()
        })
    }

    pub fn is_transient(&self, event: &JumpEvent) -> bool {
        event.time < self.burn_in
    }

    /// `[burn_in, total_time]`.
    pub fn analysis_window(&self) -> (f64, f64) {
        (self.burn_in, self.total_time)
    }

    /// Checks ordering and range of the event times.
    pub fn validate(&self) -> Result<()> {
        let mut last = f64::NEG_INFINITY;
        for (i, e) in self.events.iter().enumerate() {
            if !(e.time > last) {
                return Err(Error::Internal(format!("event {i} at t = {} is not after t = {last}", e.time)));
            }
            if e.time < 0.0 || e.time > self.total_time {
                return Err(Error::Internal(format!(
                    "event {i} at t = {} lies outside [0, {}]",
                    e.time, self.total_time
                )));
            }
            if e.channel >= self.channels.len() {
                return Err(Error::Internal(format!("event {i} has unknown channel {}", e.channel)));
            }
            last = e.time;
        }
        Ok(())
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_record<W: Write>(out: &mut W, record: &JumpRecord) -> Result<()> {
    let p = &record.params;
    writeln!(out, "{RECORD_MAGIC}")?;
    writeln!(out, "# schema_version = {RECORD_SCHEMA_VERSION}")?;
    writeln!(out, "# model = {}", record.model)?;
    writeln!(out, "# seed = {}", record.seed)?;
    writeln!(out, "# total_time = {}", fmt_f64(record.total_time))?;
    writeln!(out, "# burn_in = {}", fmt_f64(record.burn_in))?;
    writeln!(out, "# channels = {}", record.channels.join(","))?;
    writeln!(out, "# param.n_atoms = {}", p.n_atoms)?;
    writeln!(out, "# param.coupling = {}", fmt_f64(p.coupling))?;
    writeln!(out, "# param.kappa = {}", fmt_f64(p.kappa))?;
    writeln!(out, "# param.pump = {}", fmt_f64(p.pump))?;
    writeln!(out, "# param.gamma_free = {}", fmt_f64(p.gamma_free))?;
    writeln!(out, "# param.detuning = {}", fmt_f64(p.detuning))?;
    writeln!(out, "# param.photon_cutoff = {}", p.photon_cutoff)?;
    writeln!(out, "# events = {}", record.events.len())?;
    for e in &record.events {
        writeln!(out, "{}\t{}", fmt_f64(e.time), record.channels[e.channel])?;
    }
    Ok(())
}

pub fn write_records<W: Write>(out: &mut W, records: &[JumpRecord]) -> Result<()> {
    records.iter().try_for_each(|r| write_record(out, r))
}

struct Header {
    schema: Option<u32>,
    model: Option<ModelKind>,
    seed: Option<u64>,
    total_time: Option<f64>,
    burn_in: Option<f64>,
    channels: Option<Vec<String>>,
    params: SystemParams,
    events: Option<usize>,
}


fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad value '{value}' for {key}"),
    })
}

impl Header {
    fn new() -> Self {
        Header {
            schema: None,
            model: None,
            seed: None,
            total_time: None,
            burn_in: None,
            channels: None,
            params: SystemParams::with_gamma_c(0, 0.0, 0.0, 0.0),
            events: None,
        }
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "schema_version" => self.schema = Some(parse_value(line, key, value)?),
            "model" => self.model = Some(value.parse()?),
            "seed" => self.seed = Some(parse_value(line, key, value)?),
            "total_time" => self.total_time = Some(parse_value(line, key, value)?),
            "burn_in" => self.burn_in = Some(parse_value(line, key, value)?),
            "channels" => self.channels = Some(value.split(',').map(str::to_string).collect()),
            "events" => self.events = Some(parse_value(line, key, value)?),
            "param.n_atoms" => self.params.n_atoms = parse_value(line, key, value)?,
            "param.coupling" => self.params.coupling = parse_value(line, key, value)?,
            "param.kappa" => self.params.kappa = parse_value(line, key, value)?,
            "param.pump" => self.params.pump = parse_value(line, key, value)?,
            "param.gamma_free" => self.params.gamma_free = parse_value(line, key, value)?,
            "param.detuning" => self.params.detuning = parse_value(line, key, value)?,
            "param.photon_cutoff" => self.params.photon_cutoff = parse_value(line, key, value)?,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown header key '{key}'"),
                })
            }
        }
        Ok(())
    }

    fn finish(self, line: usize, events: Vec<JumpEvent>) -> Result<JumpRecord> {
        let missing = |what: &str| Error::Parse {
            line,
            message: format!("record header lacks '{what}'"),
        };
        let schema = self.schema.ok_or_else(|| missing("schema_version"))?;
        if schema != RECORD_SCHEMA_VERSION {
            return Err(Error::Parse {
                line,
                message: format!("unsupported schema_version {schema}"),
            });
        }
        if let Some(n) = self.events {
            if n != events.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("header announces {n} events, found {}", events.len()),
                });
            }
        }
        let record = JumpRecord {
            events,
            channels: self.channels.ok_or_else(|| missing("channels"))?,
            total_time: self.total_time.ok_or_else(|| missing("total_time"))?,
            burn_in: self.burn_in.unwrap_or(0.0),
            seed: self.seed.ok_or_else(|| missing("seed"))?,
            model: self.model.ok_or_else(|| missing("model"))?,
            params: self.params,
        };
        record.validate()?;
        Ok(record)
    }
}

/// Reads every record of a stream.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<JumpRecord>> {
    let mut records = Vec::new();
    let mut current: Option<(Header, Vec<JumpEvent>)> = None;
    let mut lineno = 0;
    for line in input.lines() {
        lineno += 1;
        let line = line?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed == RECORD_MAGIC {
            if let Some((h, ev)) = current.take() {
                records.push(h.finish(lineno, ev)?);
            }
            current = Some((Header::new(), Vec::new()));
            continue;
        }
        let (header, events) = current.as_mut().ok_or(Error::Parse {
            line: lineno,
            message: "content before the first record header".into(),
        })?;
        if let Some(rest) = trimmed.strip_prefix('#') {
            let (key, value) = rest.split_once('=').ok_or(Error::Parse {
                line: lineno,
                message: "header line without '='".into(),
            })?;
            header.set(lineno, key.trim(), value.trim())?;
            continue;
        }
        let (time, label) = trimmed.split_once('\t').ok_or(Error::Parse {
            line: lineno,
            message: "event line must be 'time<TAB>label'".into(),
        })?;
        let time: f64 = parse_value(lineno, "time", time)?;
        let channels = header.channels.as_ref().ok_or(Error::Parse {
            line: lineno,
            message: "event before the channels header".into(),
        })?;
        let channel = channels.iter().position(|c| c == label).ok_or(Error::Parse {
            line: lineno,
            message: format!("unknown channel '{label}'"),
        })?;
        events.push(JumpEvent { time, channel });
    }
    if let Some((h, ev)) = current {
        records.push(h.finish(lineno, ev)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(times: Vec<(f64, usize)>) -> JumpRecord {
        JumpRecord {
            events: times
                .into_iter()
                .map(|(time, channel)| JumpEvent { time, channel })
                .collect(),
            channels: vec!["cavity".into(), "pump-1".into(), "pump-2".into()],
            total_time: 100.0,
            burn_in: 10.0,
            seed: 0xdead_beef,
            model: ModelKind::Adiabatic,
            params: SystemParams::with_gamma_c(2, 1.0, 1.0, 0.5),
        }
    }

    #[test]
    fn transient_flags_and_counts() {
        let r = record(vec![(1.0, 0), (10.0, 0), (20.0, 1)]);
        assert!(r.is_transient(&r.events[0]));
        assert!(!r.is_transient(&r.events[1]));
        assert_eq!(r.count("cavity"), 2);
        assert_eq!(r.steady_count("cavity"), 1);
        assert_eq!(r.times("pump-1"), vec![20.0]);
        assert_eq!(r.times("missing"), Vec::<f64>::new());
    }

    #[test]
    fn validation_rejects_disorder() {
        assert!(record(vec![(2.0, 0), (2.0, 1)]).validate().is_err());
        assert!(record(vec![(200.0, 0)]).validate().is_err());
    }

    #[test]
    fn header_errors() {
        let bad = "# superrad jump record\n# schema_version = 9\n";
        assert!(read_records(bad.as_bytes()).is_err());
        assert!(read_records("1.0\tcavity\n".as_bytes()).is_err());
        let mut buf = Vec::new();
        write_record(&mut buf, &record(vec![(1.0, 0)])).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\tcavity", "\tlaser");
        assert!(read_records(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn stream_round_trip_is_exact(
            gaps in proptest::collection::vec((1e-12f64..3.0, 0usize..3), 0..40),
            seed in any::<u64>(),
        ) {
            let mut t = 0.0;
            let mut events = Vec::new();
            for (g, c) in gaps {
                t += g;
                events.push((t, c));
            }
            let mut a = record(events);
            a.total_time = t + 1.0;
            a.seed = seed;
            let mut b = a.clone();
            b.model = ModelKind::Full;
            b.params.photon_cutoff = 3;
            let mut buf = Vec::new();
            write_records(&mut buf, &[a.clone(), b.clone()]).unwrap();
            let back = read_records(buf.as_slice()).unwrap();
            prop_assert_eq!(back, vec![a, b]);
        }
    }
}
