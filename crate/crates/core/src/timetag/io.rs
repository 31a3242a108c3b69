//! Binary timetag files: little-endian `(u64 time_ps, u8 detector)`
//! records, with a JSON sidecar `<file>.json` describing the run.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DetectorId, Event, TimetagStream};
use crate::error::{Error, Result};

const RECORD: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub duration_s: f64,
    pub channel: String,
    pub seed: u64,
    pub config_hash: String,
    pub events: u64,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_stream(path: &Path, stream: &TimetagStream, seed: u64, config_hash: &str) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for ev in &stream.events {
        let mut rec = [0u8; RECORD];
        rec[..8].copy_from_slice(&ev.time_ps.to_le_bytes());
        rec[8] = ev.detector.code();
        w.write_all(&rec).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let header = StreamHeader {
        duration_s: stream.duration_s,
        channel: stream.channel.clone(),
        seed,
        config_hash: config_hash.to_string(),
        events: stream.events.len() as u64,
    };
    let side = sidecar(path);
    let json = serde_json::to_string_pretty(&header).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

pub fn read_stream(path: &Path) -> Result<(TimetagStream, StreamHeader)> {
    let side = sidecar(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let header: StreamHeader = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", side.display())))?;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file).read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() % RECORD != 0 || (bytes.len() / RECORD) as u64 != header.events {
        return Err(Error::Format(format!("{}: record count does not match its header", path.display())));
    }
    let events = bytes
        .chunks_exact(RECORD)
        .map(|r| {
            let time_ps = u64::from_le_bytes(r[..8].try_into().expect("8-byte slice"));
            Ok(Event { time_ps, detector: DetectorId::from_code(r[8])? })
        })
        .collect::<Result<Vec<_>>>()?;
    let stream = TimetagStream { events, duration_s: header.duration_s, channel: header.channel.clone() };
    if !stream.is_sorted() {
        return Err(Error::Format(format!("{}: events are not time ordered", path.display())));
    }
    Ok((stream, header))
}
