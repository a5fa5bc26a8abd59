//! Trace ingest: streaming readers and writers for the CSV and packed-binary
//! formats, sampling-gap quality analysis, and optional regularization onto a
//! nominal tick grid.

mod gaps;
pub(crate) use gaps::lower_rank;
pub mod packed;
mod regularize;
pub mod text;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gaps::{sampling_gap_report, GapAnalyzer, GapReport, HistogramBin};
pub use regularize::{regularize, GapPolicy, RegularSeries, Regularized, RegularizationAudit};

use crate::error::{Error, Result};
use crate::grid::{NoiseSample, SampleBounds};
use packed::{PackedReader, PackedWriter};
use text::{CsvReader, CsvWriter};

/// On-disk trace encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    Csv,
    PackedBinary,
}

impl TraceFormat {
    /// Guesses the format from a file extension (`.csv` or anything else).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TraceFormat::Csv,
            _ => TraceFormat::PackedBinary,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::PackedBinary => "packed",
        }
    }
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "packed" | "packed-binary" | "bin" => Ok(TraceFormat::PackedBinary),
            other => Err(Error::Config(format!("unknown trace format `{other}`"))),
        }
    }
}

enum Source {
    Csv(CsvReader<BufReader<File>>),
    Packed(PackedReader<File>),
}

/// Single-pass stream of validated samples in file order.
pub struct TraceReader {
    source: Source,
    bounds: Option<SampleBounds>,
    index: u64,
    failed: bool,
}

impl TraceReader {
    /// Attaches per-sample validation.
    pub fn with_bounds(mut self, bounds: SampleBounds) -> Self {
        self.bounds = Some(bounds);
        self
    }
}

impl Iterator for TraceReader {
    type Item = Result<NoiseSample>;

    #[inline]
    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = match &mut self.source {
            Source::Csv(r) => r.next(),
            Source::Packed(r) => r.next(),
        }?;
        let item = item.and_then(|s| match &self.bounds {
            Some(b) => b.check(&s).map(|_| s).map_err(|reason| Error::Malformed {
                location: format!("record {}", self.index),
                reason,
            }),
            None => Ok(s),
        });
        if item.is_err() {
            self.failed = true;
        }
        self.index += 1;
        Some(item)
    }
}

/// Opens a trace for streaming.
pub fn open_trace(path: &Path, format: TraceFormat) -> Result<TraceReader> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let source = match format {
        TraceFormat::Csv => Source::Csv(CsvReader::new(BufReader::with_capacity(1 << 16, file))?),
        TraceFormat::PackedBinary => Source::Packed(PackedReader::new(file)?),
    };
    Ok(TraceReader {
        source,
        bounds: None,
        index: 0,
        failed: false,
    })
}

enum Sink {
    Csv(Box<CsvWriter<BufWriter<File>>>),
    Packed(PackedWriter<BufWriter<File>>),
}

/// Streaming trace writer for either format.
pub struct TraceWriter {
    sink: Sink,
}

impl TraceWriter {
    pub fn create(path: &Path, format: TraceFormat) -> Result<Self> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let buf = BufWriter::with_capacity(1 << 16, file);
        let sink = match format {
            TraceFormat::Csv => Sink::Csv(Box::new(CsvWriter::new(buf)?)),
            TraceFormat::PackedBinary => Sink::Packed(PackedWriter::new(buf)?),
        };
        Ok(Self { sink })
    }

    pub fn write(&mut self, s: &NoiseSample) -> Result<()> {
        match &mut self.sink {
            Sink::Csv(w) => w.write(s),
            Sink::Packed(w) => w.write(s),
        }
    }

    pub fn finish(self) -> Result<()> {
        match self.sink {
            Sink::Csv(w) => w.finish().map(drop),
            Sink::Packed(w) => w.finish().map(drop),
        }
    }
}

/// Writes a whole sample sequence to `path`, returning the record count.
pub fn write_trace<'a, I>(path: &Path, format: TraceFormat, samples: I) -> Result<u64>
where
    I: IntoIterator<Item = &'a NoiseSample>,
{
    let mut w = TraceWriter::create(path, format)?;
    let mut n = 0;
    for s in samples {
        w.write(s)?;
        n += 1;
    }
    w.finish()?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FrequencyGrid, QuantizationPolicy};

    #[test]
    fn format_from_path() {
        assert_eq!(TraceFormat::from_path(Path::new("a.CSV")), TraceFormat::Csv);
        assert_eq!(TraceFormat::from_path(Path::new("a.plnz")), TraceFormat::PackedBinary);
        assert_eq!("packed".parse::<TraceFormat>().unwrap(), TraceFormat::PackedBinary);
        assert!("xml".parse::<TraceFormat>().is_err());
    }

    #[test]
    fn bounds_violation_is_reported_with_record_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let samples = [NoiseSample::new(0.0, 0, 50.0), NoiseSample::new(1.0, 0, 150.0)];
        write_trace(&path, TraceFormat::Csv, &samples).unwrap();
        let bounds = SampleBounds::new(&FrequencyGrid::default(), &QuantizationPolicy::default());
        let out: Vec<_> = open_trace(&path, TraceFormat::Csv)
            .unwrap()
            .with_bounds(bounds)
            .collect();
        assert_eq!(out.len(), 2);
        match &out[1] {
            Err(Error::Malformed { location, .. }) => assert_eq!(location, "record 1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            open_trace(Path::new("/nonexistent/trace.bin"), TraceFormat::PackedBinary),
            Err(Error::Io { .. })
        ));
    }
}
