use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::TimetagRecord;
use crate::error::{Error, Result};

/// Bytes per record in the binary format: `u8` channel, then `u64` tick,
/// both little-endian.
pub const BINARY_RECORD_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimetagFormat {
    Csv,
    Binary,
}

impl TimetagFormat {
    /// `.bin` selects the binary layout; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("bin") => TimetagFormat::Binary,
            _ => TimetagFormat::Csv,
        }
    }
}

/// Writes records in the format implied by the file extension and returns
/// how many were written.
pub fn write_timetags<I>(path: &Path, records: I) -> Result<u64>
where
    I: IntoIterator<Item = TimetagRecord>,
{
    let mut w = BufWriter::new(File::create(path)?);
    let mut n = 0u64;
    match TimetagFormat::from_path(path) {
        TimetagFormat::Binary => {
            let mut buf = [0u8; BINARY_RECORD_LEN];
            for r in records {
                buf[0] = r.channel;
                buf[1..].copy_from_slice(&r.tick.to_le_bytes());
                w.write_all(&buf)?;
                n += 1;
            }
        }
        TimetagFormat::Csv => {
            writeln!(w, "channel,tick")?;
            for r in records {
                writeln!(w, "{},{}", r.channel, r.tick)?;
                n += 1;
            }
        }
    }
    w.flush()?;
    Ok(n)
}

/// Lazily decoded timetag file.
pub struct TimetagReader {
    inner: ReaderKind,
    index: u64,
}

enum ReaderKind {
    Binary(BufReader<File>),
    Csv(csv::StringRecordsIntoIter<BufReader<File>>),
}

impl TimetagReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = BufReader::new(File::open(path)?);
        let inner = match TimetagFormat::from_path(path) {
            TimetagFormat::Binary => ReaderKind::Binary(file),
            TimetagFormat::Csv => ReaderKind::Csv(
                csv::ReaderBuilder::new()
                    .has_headers(false)
                    .trim(csv::Trim::All)
                    .comment(Some(b'#'))
                    .from_reader(file)
                    .into_records(),
            ),
        };
        Ok(Self { inner, index: 0 })
    }

    fn bad(&self, reason: impl Into<String>) -> Error {
        Error::Timetag {
            index: self.index,
            reason: reason.into(),
        }
    }
}

impl Iterator for TimetagReader {
    type Item = Result<TimetagRecord>;

    fn next(&mut self) -> Option<Result<TimetagRecord>> {
        let out = match &mut self.inner {
            ReaderKind::Binary(r) => {
                let mut buf = [0u8; BINARY_RECORD_LEN];
                let mut got = 0;
                while got < BINARY_RECORD_LEN {
                    match r.read(&mut buf[got..]) {
                        Ok(0) => break,
                        Ok(k) => got += k,
                        Err(e) if e.kind() == ErrorKind::Interrupted => {}
                        Err(e) => return Some(Err(e.into())),
                    }
                }
                match got {
                    0 => return None,
                    BINARY_RECORD_LEN => {
                        let tick = u64::from_le_bytes(buf[1..].try_into().expect("8 bytes"));
                        Ok(TimetagRecord::new(buf[0], tick))
                    }
                    _ => Err(self.bad(format!(
                        "truncated record ({got} of {BINARY_RECORD_LEN} bytes)"
                    ))),
                }
            }
            ReaderKind::Csv(rows) => loop {
                let row = match rows.next()? {
                    Ok(row) => row,
                    Err(e) => {
                        return Some(Err(Error::Timetag {
                            index: self.index,
                            reason: e.to_string(),
                        }))
                    }
                };
                if self.index == 0 && row.get(0) == Some("channel") {
                    continue;
                }
                if row.len() != 2 {
                    break Err(self.bad(format!("expected 2 fields, found {}", row.len())));
                }
                let channel = row[0].parse::<u8>();
                let tick = row[1].parse::<u64>();
                break match (channel, tick) {
                    (Ok(c), Ok(t)) => Ok(TimetagRecord::new(c, t)),
                    _ => Err(self.bad(format!("cannot parse `{},{}`", &row[0], &row[1]))),
                };
            },
        };
        self.index += 1;
        Some(out)
    }
}

pub fn read_timetags(path: &Path) -> Result<Vec<TimetagRecord>> {
    TimetagReader::open(path)?.collect()
}

/// Writes `outcome_index,count` rows.
pub fn write_counts_csv(path: &Path, counts: &[u64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["outcome_index", "count"])?;
    for (k, c) in counts.iter().enumerate() {
        w.write_record([k.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `outcome_index,count` rows; indices must run 0, 1, 2, ...
pub fn read_counts_csv(path: &Path) -> Result<Vec<u64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row?;
        if line == 0 && row.get(0) == Some("outcome_index") {
            continue;
        }
        if row.len() != 2 {
            return Err(Error::Parse(format!(
                "counts row {line}: expected 2 fields"
            )));
        }
        let k: usize = row[0]
            .parse()
            .map_err(|_| Error::Parse(format!("counts row {line}: bad index `{}`", &row[0])))?;
        let c: u64 = row[1]
            .parse()
            .map_err(|_| Error::Parse(format!("counts row {line}: bad count `{}`", &row[1])))?;
        if k != out.len() {
            return Err(Error::Parse(format!(
                "counts row {line}: index {k} out of sequence"
            )));
        }
        out.push(c);
    }
    if out.is_empty() {
        return Err(Error::Parse("counts file has no rows".into()));
    }
    Ok(out)
}
