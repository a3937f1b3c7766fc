//! Plain-text event files.
//!
//! ```text
//! # sfg-stream 1
//! # seed=42
//! # duration_s=1e0
//! # ...
//! time_s,freq_offset_hz,channel,pair_id
//! 1.2345e-7,-3.1e5,signal,0
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the stream bit for bit.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{Channel, DelayShape, EventStream, PhotonEvent};
use crate::analytic::{OperatingPoint, SpectralConfig};
use crate::error::{Result, SimError};

const MAGIC: &str = "# sfg-stream 1";
const COLUMNS: &str = "time_s,freq_offset_hz,channel,pair_id";

fn io_error(err: std::io::Error) -> SimError {
    SimError::StreamFormat {
        line: 0,
        message: err.to_string(),
    }
}

pub fn write_stream(stream: &EventStream, mut out: impl Write) -> Result<()> {
    let c = stream.config();
    let op = stream.operating_point();
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    let mut kv = |k: &str, v: String| header.push_str(&format!("# {k}={v}\n"));
    kv("seed", stream.seed().to_string());
    kv("duration_s", format!("{:e}", stream.duration()));
    kv("delay", stream.delay_shape().as_str().to_string());
    kv("n", format!("{:e}", op.n));
    kv("flux", format!("{:e}", op.flux));
    kv("pump_wavelength_m", format!("{:e}", c.pump_wavelength));
    kv("pump_bandwidth_hz", format!("{:e}", c.pump_bandwidth));
    kv(
        "dc_center_wavelength_m",
        format!("{:e}", c.dc_center_wavelength),
    );
    kv("dc_bandwidth_hz", format!("{:e}", c.dc_bandwidth));
    kv("uc_bandwidth_hz", format!("{:e}", c.uc_bandwidth));
    kv("events", stream.len().to_string());
    header.push_str(COLUMNS);
    header.push('\n');
    out.write_all(header.as_bytes()).map_err(io_error)?;
    for e in stream.events() {
        writeln!(
            out,
            "{:e},{:e},{},{}",
            e.time,
            e.freq_offset,
            e.channel.as_str(),
            e.pair_id
        )
        .map_err(io_error)?;
    }
    out.flush().map_err(io_error)
}

pub fn read_stream(input: impl BufRead) -> Result<EventStream> {
    let err = |line: usize, message: String| SimError::StreamFormat { line, message };
    let mut header: HashMap<String, String> = HashMap::new();
    let mut events = Vec::new();
    let mut seen_magic = false;
    let mut seen_columns = false;

    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| err(lineno, e.to_string()))?;
        let line = line.trim_end();
        if !seen_magic {
            if line != MAGIC {
                return Err(err(lineno, format!("expected `{MAGIC}`")));
            }
            seen_magic = true;
            continue;
        }
        if !seen_columns {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| err(lineno, format!("malformed header line `{line}`")))?;
                if header.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(err(lineno, format!("duplicate header key `{k}`")));
                }
            } else if line == COLUMNS {
                seen_columns = true;
            } else {
                return Err(err(lineno, format!("expected header or `{COLUMNS}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(err(
                lineno,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let float = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|_| err(lineno, format!("bad {what} `{s}`")))
        };
        let channel = match fields[2] {
            "signal" => Channel::Signal,
            "idler" => Channel::Idler,
            other => return Err(err(lineno, format!("unknown channel `{other}`"))),
        };
        events.push(PhotonEvent {
            time: float(fields[0], "time")?,
            freq_offset: float(fields[1], "frequency")?,
            channel,
            pair_id: fields[3]
                .parse()
                .map_err(|_| err(lineno, format!("bad pair id `{}`", fields[3])))?,
        });
    }
    if !seen_columns {
        return Err(err(0, "missing column header".into()));
    }

    let get = |k: &str| {
        header
            .get(k)
            .ok_or_else(|| err(0, format!("missing header key `{k}`")))
    };
    let float = |k: &str| -> Result<f64> {
        let v = get(k)?;
        v.parse()
            .map_err(|_| err(0, format!("bad value `{v}` for `{k}`")))
    };
    let seed: u64 = get("seed")?
        .parse()
        .map_err(|_| err(0, "bad seed".into()))?;
    let delay =
        DelayShape::parse(get("delay")?).ok_or_else(|| err(0, "unknown delay shape".into()))?;
    let declared: usize = get("events")?
        .parse()
        .map_err(|_| err(0, "bad event count".into()))?;
    if declared != events.len() {
        return Err(err(
            0,
            format!("header declares {declared} events, found {}", events.len()),
        ));
    }
    let config = SpectralConfig::new(
        float("pump_wavelength_m")?,
        float("pump_bandwidth_hz")?,
        float("dc_center_wavelength_m")?,
        float("dc_bandwidth_hz")?,
        float("uc_bandwidth_hz")?,
    )?;
    let op = OperatingPoint {
        n: float("n")?,
        flux: float("flux")?,
    };
    EventStream::from_parts(events, config, op, seed, float("duration_s")?, delay)
}
