//! Caffe-style filelists: one `<relative-path> <label>` record per line.
//!
//! An optional third integer column carries a per-pattern task label
//! (defaults to 0). Files are read only when a sample is requested; their
//! bytes become features scaled to `[0, 1]`.

use std::path::{Path, PathBuf};

use crate::autograd::Tensor;
use crate::data::dataset::check_index;
use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileRecord {
    pub path: PathBuf,
    pub y: usize,
    pub t: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileListDataset {
    root: PathBuf,
    records: Vec<FileRecord>,
}

fn parse_int(field: &str, line: usize, what: &str) -> Result<usize> {
    field.parse::<usize>().map_err(|_| Error::FileList {
        line,
        reason: format!("{what} `{field}` is not a non-negative integer"),
    })
}

/// Parses filelist text (UTF-8, LF or CRLF line endings). Blank lines are
/// skipped. No file is touched.
pub fn parse_filelist(text: &str, root: impl AsRef<Path>) -> Result<FileListDataset> {
    let mut records = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        let (path, y, t) = match fields.as_slice() {
            [path, y] => (*path, parse_int(y, line_no, "label")?, 0),
            [path, y, t] => (
                *path,
                parse_int(y, line_no, "label")?,
                parse_int(t, line_no, "task label")?,
            ),
            [_] => {
                return Err(Error::FileList {
                    line: line_no,
                    reason: "missing label".into(),
                })
            }
            _ => {
                return Err(Error::FileList {
                    line: line_no,
                    reason: format!(
                        "expected 2 or 3 space-separated fields, found {}",
                        fields.len()
                    ),
                })
            }
        };
        if path.is_empty() {
            return Err(Error::FileList {
                line: line_no,
                reason: "empty path".into(),
            });
        }
        records.push(FileRecord {
            path: PathBuf::from(path),
            y,
            t,
        });
    }
    Ok(FileListDataset {
        root: root.as_ref().to_path_buf(),
        records,
    })
}

impl FileListDataset {
    pub fn records(&self) -> &[FileRecord] {
        &self.records
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl Dataset for FileListDataset {
    fn len(&self) -> usize {
        self.records.len()
    }

    fn get(&self, index: usize) -> Result<Sample> {
        check_index(index, self.len())?;
        let rec = &self.records[index];
        let path = self.root.join(&rec.path);
        let bytes = std::fs::read(&path).map_err(|source| Error::FileAccess { path, source })?;
        let x = Tensor::vector(bytes.iter().map(|&b| f64::from(b) / 255.0).collect());
        Ok(Sample {
            x,
            y: rec.y,
            t: rec.t,
        })
    }

    fn target(&self, index: usize) -> Result<usize> {
        check_index(index, self.len())?;
        Ok(self.records[index].y)
    }

    fn task_label(&self, index: usize) -> Result<usize> {
        check_index(index, self.len())?;
        Ok(self.records[index].t)
    }
}
