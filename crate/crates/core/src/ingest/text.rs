//! CSV traces with header `timestamp_s,freq_index,level_dbuv`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::NoiseSample;

pub const CSV_HEADER: [&str; 3] = ["timestamp_s", "freq_index", "level_dbuv"];

pub struct CsvReader<R: Read> {
    inner: csv::Reader<R>,
    record: csv::StringRecord,
    failed: bool,
}

impl<R: Read> CsvReader<R> {
    pub fn new(inner: R) -> Result<Self> {
        let mut inner = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(inner);
        let headers = inner.headers().map_err(|e| Error::Malformed {
            location: "line 1".into(),
            reason: e.to_string(),
        })?;
        if headers.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::Malformed {
                location: "line 1".into(),
                reason: format!("expected header `{}`", CSV_HEADER.join(",")),
            });
        }
        Ok(Self {
            inner,
            record: csv::StringRecord::new(),
            failed: false,
        })
    }
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| Error::Malformed {
        location: format!("line {line}"),
        reason: format!("missing column `{}`", CSV_HEADER[i]),
    })?;
    raw.parse().map_err(|_| Error::Malformed {
        location: format!("line {line}"),
        reason: format!("cannot parse `{raw}` as {}", CSV_HEADER[i]),
    })
}

impl<R: Read> Iterator for CsvReader<R> {
    type Item = Result<NoiseSample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.inner.read_record(&mut self.record) {
            Ok(false) => None,
            Ok(true) => {
                let line = self.record.position().map(|p| p.line()).unwrap_or(0);
                let parsed = (|| {
                    if self.record.len() != 3 {
                        return Err(Error::Malformed {
                            location: format!("line {line}"),
                            reason: format!("expected 3 columns, found {}", self.record.len()),
                        });
                    }
                    Ok(NoiseSample {
                        timestamp: parse_field(&self.record, 0, line)?,
                        freq_index: parse_field(&self.record, 1, line)?,
                        level: parse_field(&self.record, 2, line)?,
                    })
                })();
                if parsed.is_err() {
                    self.failed = true;
                }
                Some(parsed)
            }
            Err(e) => {
                self.failed = true;
                let location = e
                    .position()
                    .map(|p| format!("line {}", p.line()))
                    .unwrap_or_else(|| "unknown line".into());
                Some(Err(Error::Malformed {
                    location,
                    reason: e.to_string(),
                }))
            }
        }
    }
}

pub struct CsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(inner);
        inner.write_record(CSV_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, s: &NoiseSample) -> Result<()> {
        self.inner.write_record(&[
            s.timestamp.to_string(),
            s.freq_index.to_string(),
            s.level.to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| Error::RawIo(std::io::Error::other(e.to_string())))
    }
}
