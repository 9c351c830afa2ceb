use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{LogRecord, Logger, LoopEvent};
use crate::error::{Error, Result};

/// One JSON object per line with the keys `name`, `x`, `value`, `phase`,
/// `stream`, `task`, `experience`, `timestamp` and `run_id`. Lines are
/// buffered whole and flushed at phase, experience and epoch boundaries.
pub struct JsonlLogger<W: Write> {
    out: BufWriter<W>,
}

impl JsonlLogger<File> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|source| Error::FileAccess {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(JsonlLogger::new(file))
    }
}

impl<W: Write> JsonlLogger<W> {
    pub fn new(out: W) -> Self {
        JsonlLogger {
            out: BufWriter::new(out),
        }
    }

    pub fn into_inner(self) -> Result<W> {
        self.out.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

impl<W: Write> Logger for JsonlLogger<W> {
    fn log_metric(&mut self, record: &LogRecord) -> Result<()> {
        let mut line = serde_json::to_string(record)
            .map_err(|e| Error::invalid(format!("metric record is not serializable: {e}")))?;
        line.push('\n');
        self.out.write_all(line.as_bytes())?;
        Ok(())
    }

    fn on_event(&mut self, event: &LoopEvent) -> Result<()> {
        match event {
            LoopEvent::PhaseStart(_)
            | LoopEvent::PhaseEnd(_)
            | LoopEvent::ExperienceEnd { .. }
            | LoopEvent::EpochEnd { .. } => self.flush(),
            _ => Ok(()),
        }
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
