//! Line-oriented trace text format.
//!
//! ```text
//! #rate=50
//! 0,0.01,-0.02,9.81,0.001,0,-0.002
//! 20,0.02,-0.01,9.80,0.000,0.001,-0.001
//! !20,trigger
//! ```
//!
//! Sample lines are `t,ax,ay,az,gx,gy,gz` with `t` in milliseconds; a trace
//! carrying a magnetometer appends `mx,my,mz`. Event lines start with `!`.
//! Other lines starting with `#` are comments. Values are written in
//! shortest round-trip decimal form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::{EventKind, SensorSample, SensorTrace, TraceEvent};

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {what} {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite {what} {field:?}")));
    }
    Ok(v)
}

fn parse_scalar<T: Scalar>(field: &str, line: usize) -> Result<T> {
    let v = parse_f64(field, line, "value")?;
    T::from_f64(v).ok_or_else(|| Error::parse(line, format!("value {v} not representable")))
}

/// Parses one `t,ax,ay,az,gx,gy,gz[,mx,my,mz]` line.
pub(crate) fn parse_sample_line<T: Scalar>(text: &str, line: usize) -> Result<SensorSample<T>> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != 7 && fields.len() != 10 {
        return Err(Error::parse(
            line,
            format!("expected 7 or 10 comma-separated fields, found {}", fields.len()),
        ));
    }
    let t = parse_f64(fields[0], line, "timestamp")?;
    let mut vals = [T::zero(); 9];
    for (slot, f) in vals.iter_mut().zip(&fields[1..]) {
        *slot = parse_scalar(f, line)?;
    }
    let mut s = SensorSample::new(t, [vals[0], vals[1], vals[2]], [vals[3], vals[4], vals[5]]);
    if fields.len() == 10 {
        s.mag = Some([vals[6], vals[7], vals[8]]);
    }
    Ok(s)
}

pub(crate) fn write_sample_line<T: Scalar>(out: &mut String, s: &SensorSample<T>) {
    let _ = write!(out, "{}", s.t);
    let mag = s.mag.iter().flatten();
    for v in s.acc.iter().chain(&s.gyro).chain(mag) {
        let _ = write!(out, ",{}", v.to_f64());
    }
    out.push('\n');
}

/// Accumulates sample lines, enforcing strictly increasing timestamps.
pub(crate) struct SampleLines<T> {
    pub samples: Vec<SensorSample<T>>,
}

impl<T: Scalar> SampleLines<T> {
    pub fn new() -> Self {
        Self { samples: Vec::new() }
    }

    pub fn push(&mut self, text: &str, line: usize) -> Result<()> {
        let s = parse_sample_line::<T>(text, line)?;
        if let Some(prev) = self.samples.last() {
            if s.t <= prev.t {
                return Err(Error::parse(
                    line,
                    format!("timestamp {} not after previous {}", s.t, prev.t),
                ));
            }
            if s.mag.is_some() != prev.mag.is_some() {
                return Err(Error::parse(line, "field count differs from previous samples"));
            }
        }
        self.samples.push(s);
        Ok(())
    }
}

pub fn parse_trace<T: Scalar>(text: &str) -> Result<SensorTrace<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let rate = loop {
        match lines.next() {
            None => return Err(Error::parse(1, "missing #rate=<Hz> header")),
            Some((_, "")) => continue,
            Some((n, l)) => {
                let Some(v) = l.strip_prefix("#rate=") else {
                    return Err(Error::parse(n, "first line must be #rate=<Hz>"));
                };
                let rate = parse_f64(v, n, "rate")?;
                if rate <= 0.0 {
                    return Err(Error::parse(n, "rate must be positive"));
                }
                break rate;
            }
        }
    };
    let mut samples = SampleLines::<T>::new();
    let mut events: Vec<TraceEvent> = Vec::new();
    for (n, l) in lines {
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(ev) = l.strip_prefix('!') {
            let (t, kind) = ev
                .split_once(',')
                .ok_or_else(|| Error::parse(n, "event line must be !t,kind"))?;
            let t = parse_f64(t, n, "event timestamp")?;
            let kind = match kind.trim() {
                "trigger" => EventKind::Trigger,
                other => return Err(Error::parse(n, format!("unknown event kind {other:?}"))),
            };
            if events.last().is_some_and(|e| t < e.t) {
                return Err(Error::parse(n, "event timestamps out of order"));
            }
            events.push(TraceEvent { t, kind });
            continue;
        }
        samples.push(l, n)?;
    }
    SensorTrace::new(rate, samples.samples, events)
}

pub fn write_trace<T: Scalar>(trace: &SensorTrace<T>) -> String {
    let mut out = format!("#rate={}\n", trace.rate_hz());
    let mut events = trace.events().iter().peekable();
    for s in trace.samples() {
        write_sample_line(&mut out, s);
        while let Some(ev) = events.next_if(|e| e.t <= s.t) {
            write_event(&mut out, ev);
        }
    }
    for ev in events {
        write_event(&mut out, ev);
    }
    out
}

fn write_event(out: &mut String, ev: &TraceEvent) {
    let kind = match ev.kind {
        EventKind::Trigger => "trigger",
    };
    let _ = writeln!(out, "!{},{kind}", ev.t);
}

pub fn read_trace_file<T: Scalar>(path: impl AsRef<Path>) -> Result<SensorTrace<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text).map_err(|e| e.with_path(path))
}

pub fn write_trace_file<T: Scalar>(path: impl AsRef<Path>, trace: &SensorTrace<T>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_trace(trace)).map_err(|e| Error::io(path, e))
}
