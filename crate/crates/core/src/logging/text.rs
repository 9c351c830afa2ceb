use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{LogRecord, Logger, LoopEvent};
use crate::error::{Error, Result};
use crate::evaluation::{MetricData, MetricValue};

/// `name = value` with floats at 4 decimals, integers as-is, and matrices
/// as one tab-indented row per line. Always LF-terminated.
pub fn format_metric_line(value: &MetricValue) -> String {
    match &value.value {
        MetricData::Int(v) => format!("{} = {v}\n", value.name),
        MetricData::Float(v) => format!("{} = {v:.4}\n", value.name),
        MetricData::Matrix(rows) => {
            let mut out = format!("{} =\n", value.name);
            for row in rows {
                let cells: Vec<String> = row.iter().map(u64::to_string).collect();
                out.push('\t');
                out.push_str(&cells.join(" "));
                out.push('\n');
            }
            out
        }
    }
}

/// Appends one line per metric to a writer. No timestamps, so identical
/// runs give identical logs.
pub struct TextLogger<W: Write> {
    out: W,
}

impl TextLogger<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|source| Error::FileAccess {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(TextLogger::new(BufWriter::new(file)))
    }
}

impl<W: Write> TextLogger<W> {
    pub fn new(out: W) -> Self {
        TextLogger { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Logger for TextLogger<W> {
    fn log_metric(&mut self, record: &LogRecord) -> Result<()> {
        self.out
            .write_all(format_metric_line(&record.metric).as_bytes())?;
        Ok(())
    }

    fn on_event(&mut self, event: &LoopEvent) -> Result<()> {
        if matches!(event, LoopEvent::PhaseEnd(_)) {
            self.out.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
