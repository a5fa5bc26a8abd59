//! Packed little-endian binary traces.
//!
//! Layout: `PLNZ` magic, `u32` version (1), `u64` record count, then 12-byte
//! records of `f64` timestamp, `u16` frequency index and `i16` level in
//! tenths of a dBµV.

use std::io::{self, Read, Seek, SeekFrom, Write};

use crate::error::{Error, Result};
use crate::grid::NoiseSample;

pub const MAGIC: [u8; 4] = *b"PLNZ";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 12;

const RECORDS_PER_READ: usize = 8192;

/// Encodes a level to tenths of a dBµV.
pub fn encode_level(level: f64) -> Result<i16> {
    let tenths = (level * 10.0).round();
    if !tenths.is_finite() || tenths < i16::MIN as f64 || tenths > i16::MAX as f64 {
        return Err(Error::InvalidArgument(format!(
            "level {level} not representable in packed format"
        )));
    }
    Ok(tenths as i16)
}

#[inline]
pub fn decode_level(tenths: i16) -> f64 {
    tenths as f64 / 10.0
}

pub fn encode_record(s: &NoiseSample, out: &mut [u8]) -> Result<()> {
    out[0..8].copy_from_slice(&s.timestamp.to_le_bytes());
    out[8..10].copy_from_slice(&s.freq_index.to_le_bytes());
    out[10..12].copy_from_slice(&encode_level(s.level)?.to_le_bytes());
    Ok(())
}

#[inline]
pub fn decode_record(b: &[u8]) -> NoiseSample {
    let timestamp = f64::from_le_bytes(b[0..8].try_into().unwrap());
    let freq_index = u16::from_le_bytes([b[8], b[9]]);
    let level = decode_level(i16::from_le_bytes([b[10], b[11]]));
    NoiseSample {
        timestamp,
        freq_index,
        level,
    }
}

/// Streaming reader over a packed trace.
pub struct PackedReader<R> {
    inner: R,
    declared: u64,
    yielded: u64,
    buf: Vec<u8>,
    pos: usize,
    len: usize,
    eof: bool,
    failed: bool,
}

impl<R: Read> PackedReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        read_full(&mut inner, &mut header).and_then(|n| {
            if n < HEADER_LEN {
                Err(io::Error::new(io::ErrorKind::UnexpectedEof, "short header"))
            } else {
                Ok(())
            }
        })
        .map_err(|e| Error::Malformed {
            location: "byte 0".into(),
            reason: format!("cannot read header: {e}"),
        })?;
        if header[0..4] != MAGIC {
            return Err(Error::Malformed {
                location: "byte 0".into(),
                reason: "bad magic, expected PLNZ".into(),
            });
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Malformed {
                location: "byte 4".into(),
                reason: format!("unsupported version {version}"),
            });
        }
        let declared = u64::from_le_bytes(header[8..16].try_into().unwrap());
        Ok(Self {
            inner,
            declared,
            yielded: 0,
            buf: vec![0; RECORDS_PER_READ * RECORD_LEN],
            pos: 0,
            len: 0,
            eof: false,
            failed: false,
        })
    }

    /// Record count declared in the header.
    pub fn declared_records(&self) -> u64 {
        self.declared
    }

    fn record_offset(&self) -> u64 {
        HEADER_LEN as u64 + self.yielded * RECORD_LEN as u64
    }

    fn refill(&mut self) -> io::Result<()> {
        let rest = self.len - self.pos;
        self.buf.copy_within(self.pos..self.len, 0);
        self.pos = 0;
        self.len = rest;
        let n = read_full(&mut self.inner, &mut self.buf[rest..])?;
        if n < self.buf.len() - rest {
            self.eof = true;
        }
        self.len += n;
        Ok(())
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: Read> Iterator for PackedReader<R> {
    type Item = Result<NoiseSample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        if self.len - self.pos < RECORD_LEN && !self.eof {
            if let Err(e) = self.refill() {
                self.failed = true;
                return Some(Err(Error::Malformed {
                    location: format!("byte {}", self.record_offset()),
                    reason: e.to_string(),
                }));
            }
        }
        let available = self.len - self.pos;
        if available < RECORD_LEN {
            if available > 0 {
                self.failed = true;
                return Some(Err(Error::Truncated(format!(
                    "{available} trailing bytes after last whole record at byte {}",
                    self.record_offset()
                ))));
            }
            if self.yielded < self.declared {
                self.failed = true;
                return Some(Err(Error::Truncated(format!(
                    "header declares {} records but file ends after {}",
                    self.declared, self.yielded
                ))));
            }
            return None;
        }
        if self.yielded >= self.declared {
            self.failed = true;
            return Some(Err(Error::Malformed {
                location: format!("byte {}", self.record_offset()),
                reason: format!("data beyond the {} declared records", self.declared),
            }));
        }
        let sample = decode_record(&self.buf[self.pos..self.pos + RECORD_LEN]);
        self.pos += RECORD_LEN;
        self.yielded += 1;
        Some(Ok(sample))
    }
}

/// Streaming writer that patches the record count into the header on finish.
pub struct PackedWriter<W: Write + Seek> {
    inner: W,
    records: u64,
    scratch: [u8; RECORD_LEN],
}

impl<W: Write + Seek> PackedWriter<W> {
    pub fn new(mut inner: W) -> Result<Self> {
        inner.write_all(&header_bytes(0))?;
        Ok(Self {
            inner,
            records: 0,
            scratch: [0; RECORD_LEN],
        })
    }

    pub fn write(&mut self, s: &NoiseSample) -> Result<()> {
        encode_record(s, &mut self.scratch)?;
        self.inner.write_all(&self.scratch)?;
        self.records += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.seek(SeekFrom::Start(0))?;
        self.inner.write_all(&header_bytes(self.records))?;
        self.inner.seek(SeekFrom::End(0))?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub fn header_bytes(records: u64) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&MAGIC);
    h[4..8].copy_from_slice(&VERSION.to_le_bytes());
    h[8..16].copy_from_slice(&records.to_le_bytes());
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn encode(samples: &[NoiseSample]) -> Vec<u8> {
        let mut w = PackedWriter::new(Cursor::new(Vec::new())).unwrap();
        for s in samples {
            w.write(s).unwrap();
        }
        w.finish().unwrap().into_inner()
    }

    #[test]
    fn empty_payload_is_empty_stream() {
        let bytes = encode(&[]);
        assert_eq!(bytes.len(), HEADER_LEN);
        let r = PackedReader::new(Cursor::new(bytes)).unwrap();
        assert_eq!(r.count(), 0);
    }

    #[test]
    fn record_layout_is_twelve_bytes() {
        let bytes = encode(&[NoiseSample::new(1.5, 7, 68.3)]);
        assert_eq!(bytes.len(), HEADER_LEN + RECORD_LEN);
        assert_eq!(&bytes[0..4], b"PLNZ");
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 1);
        assert_eq!(i16::from_le_bytes([bytes[26], bytes[27]]), 683);
    }

    #[test]
    fn truncated_record_errors_after_last_whole_record() {
        let mut bytes = encode(&[NoiseSample::new(0.0, 0, 1.0), NoiseSample::new(1.0, 0, 2.0)]);
        bytes.truncate(bytes.len() - 5);
        let out: Vec<_> = PackedReader::new(Cursor::new(bytes)).unwrap().collect();
        assert_eq!(out.len(), 2);
        assert!(out[0].is_ok());
        assert!(matches!(out[1], Err(Error::Truncated(_))));
    }

    #[test]
    fn missing_records_are_truncation() {
        let mut bytes = encode(&[NoiseSample::new(0.0, 0, 1.0), NoiseSample::new(1.0, 0, 2.0)]);
        bytes.truncate(HEADER_LEN + RECORD_LEN);
        let out: Vec<_> = PackedReader::new(Cursor::new(bytes)).unwrap().collect();
        assert!(matches!(out.last(), Some(Err(Error::Truncated(_)))));
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = encode(&[]);
        bytes[0] = b'X';
        assert!(matches!(
            PackedReader::new(Cursor::new(bytes)),
            Err(Error::Malformed { .. })
        ));
    }
}
