use std::io::{self, IsTerminal, Stdout, Write};

use super::text::format_metric_line;
use super::{LogRecord, Logger, LoopEvent};
use crate::error::Result;

const BAR_WIDTH: usize = 30;

/// Text-logger output plus a progress bar per training epoch and
/// evaluation experience. Metric lines that arrive while a bar is drawn are
/// held back until it completes.
pub struct InteractiveLogger<W: Write> {
    out: W,
    show_bar: bool,
    bar: Option<usize>,
    pending: Vec<String>,
}

impl InteractiveLogger<Stdout> {
    /// Writes to standard output; the bar is drawn only on a terminal.
    pub fn stdout() -> Self {
        let out = io::stdout();
        let show_bar = out.is_terminal();
        InteractiveLogger::new(out, show_bar)
    }
}

impl<W: Write> InteractiveLogger<W> {
    pub fn new(out: W, show_bar: bool) -> Self {
        InteractiveLogger {
            out,
            show_bar,
            bar: None,
            pending: Vec::new(),
        }
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    fn draw(&mut self, done: usize, total: usize) -> Result<()> {
        let filled = (done * BAR_WIDTH).checked_div(total).unwrap_or(BAR_WIDTH);
        write!(
            self.out,
            "\r[{}{}] {done}/{total}",
            "#".repeat(filled),
            "-".repeat(BAR_WIDTH - filled)
        )?;
        self.out.flush()?;
        Ok(())
    }

    fn finish_bar(&mut self) -> Result<()> {
        if self.bar.take().is_some() {
            self.out.write_all(b"\n")?;
        }
        for line in std::mem::take(&mut self.pending) {
            self.out.write_all(line.as_bytes())?;
        }
        self.out.flush()?;
        Ok(())
    }
}

impl<W: Write> Logger for InteractiveLogger<W> {
    fn log_metric(&mut self, record: &LogRecord) -> Result<()> {
        let line = format_metric_line(&record.metric);
        if self.bar.is_some() {
            self.pending.push(line);
        } else {
            self.out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    fn on_event(&mut self, event: &LoopEvent) -> Result<()> {
        match *event {
            LoopEvent::ProgressStart { total } if self.show_bar => {
                self.finish_bar()?;
                self.bar = Some(total);
                self.draw(0, total)?;
                if total == 0 {
                    self.finish_bar()?;
                }
            }
            LoopEvent::Progress { done, total } if self.bar.is_some() => {
                self.draw(done, total)?;
                if done >= total {
                    self.finish_bar()?;
                }
            }
            LoopEvent::EpochEnd { .. }
            | LoopEvent::ExperienceEnd { .. }
            | LoopEvent::PhaseEnd(_) => {
                self.finish_bar()?;
            }
            _ => {}
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.finish_bar()
    }
}
