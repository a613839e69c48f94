//! Resumable CSV tables.
//!
//! A table keeps its rows in memory, appends every new row to `<name>.partial`
//! as soon as it is computed, and on `finish` writes the sorted file with two `#`
//! metadata lines: a timestamp (the only field that changes between identical
//! runs) and the config hash plus library version. Reopening with the same hash
//! picks up rows from both files, so an interrupted run continues where it
//! stopped.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::LIBRARY_VERSION;
use crate::error::Result;

pub const QFI_SWEEP: (&str, &str, usize) = ("qfi_sweep.csv", "family,L,gamma,h,qfi,method,step,flag", 4);
pub const QFI_MATRIX: (&str, &str, usize) = ("qfi_matrix.csv", "L,h1,h2,f11,f12,f22,trace_inv,weak_comm_residual,flag", 3);
pub const CFI_SWEEP: (&str, &str, usize) = ("cfi_sweep.csv", "family,L,h1,h2,povm,c11,c12,c22,flag", 5);
pub const GAP: (&str, &str, usize) = ("gap.csv", "family,L,h1,h2,gap", 4);
pub const WAVEFUNCTION: (&str, &str, usize) = ("wavefunction.csv", "L,h1,h2,site,prob", 4);
pub const SPECTRUM: (&str, &str, usize) = ("spectrum.csv", "family,L,potential,p1,p2,k,energy", 6);
pub const PEAKS: (&str, &str, usize) = ("peaks.csv", "family,L,gamma,h_max,f_max,boundary", 3);
pub const LINE_PEAKS: (&str, &str, usize) = ("line_peaks.csv", "family,L,line,entry,h2_max,f_max,boundary", 4);
pub const POINTS: (&str, &str, usize) = (
    "points.csv",
    "family,L,role,h1,h2,f11,f12,f22,c11,c12,c22,trace_inv,gap,flag",
    3,
);

/// Header line of a table file.
pub fn metadata_line(hash: &str) -> String {
    format!("# config={hash} version={LIBRARY_VERSION}")
}

fn timestamp_line() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("# generated unix={secs}")
}

/// Numbers compare numerically, everything else as text.
fn compare_fields(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

pub fn compare_keys(a: &[String], b: &[String]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| compare_fields(x, y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

fn split_row(line: &str) -> Vec<String> {
    line.split(',').map(str::to_string).collect()
}

/// Reads a table file, returning its metadata hash and rows.
pub fn read_table(path: &Path) -> Result<(Option<String>, Vec<Vec<String>>)> {
    let file = BufReader::new(File::open(path)?);
    let mut hash = None;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for line in file.lines() {
        let line = line?;
        if let Some(meta) = line.strip_prefix("# config=") {
            hash = meta.split_whitespace().next().map(str::to_string);
            continue;
        }
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if !header_seen && !path.extension().is_some_and(|e| e == "partial") {
            header_seen = true;
            continue;
        }
        rows.push(split_row(&line));
    }
    Ok((hash, rows))
}

pub struct Table {
    dir: PathBuf,
    name: &'static str,
    header: &'static str,
    key_len: usize,
    hash: String,
    rows: HashMap<Vec<String>, Vec<String>>,
    partial: Option<File>,
    /// Rows computed in this session (not taken from disk).
    pub computed: usize,
}

impl Table {
    /// Opens a table, reusing rows from earlier runs with the same config hash.
    pub fn open(dir: &Path, schema: (&'static str, &'static str, usize), hash: &str) -> Result<Table> {
        let (name, header, key_len) = schema;
        let columns = header.split(',').count();
        let mut rows = HashMap::new();
        let final_path = dir.join(name);
        let partial_path = dir.join(format!("{name}.partial"));
        for path in [&final_path, &partial_path] {
            if !path.exists() {
                continue;
            }
            let (h, found) = read_table(path)?;
            if h.as_deref() != Some(hash) {
                continue;
            }
            for r in found.into_iter().filter(|r| r.len() == columns) {
                rows.insert(r[..key_len].to_vec(), r);
            }
        }
        Ok(Table {
            dir: dir.to_path_buf(),
            name,
            header,
            key_len,
            hash: hash.to_string(),
            rows,
            partial: None,
            computed: 0,
        })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, key: &[String]) -> bool {
        self.rows.contains_key(key)
    }

    pub fn get(&self, key: &[String]) -> Option<&Vec<String>> {
        self.rows.get(key)
    }

    /// Adds a freshly computed row and flushes it to the partial file.
    pub fn insert(&mut self, row: Vec<String>) -> Result<()> {
        debug_assert_eq!(row.len(), self.header.split(',').count());
        if self.partial.is_none() {
            fs::create_dir_all(&self.dir)?;
            let path = self.dir.join(format!("{}.partial", self.name));
            let fresh = !path.exists() || read_table(&path)?.0.as_deref() != Some(self.hash.as_str());
            let mut f = if fresh {
                File::create(&path)?
            } else {
                OpenOptions::new().append(true).open(&path)?
            };
            if fresh {
                writeln!(f, "{}", metadata_line(&self.hash))?;
            }
            self.partial = Some(f);
        }
        let f = self.partial.as_mut().expect("partial file open");
        writeln!(f, "{}", row.join(","))?;
        f.flush()?;
        self.computed += 1;
        self.rows.insert(row[..self.key_len].to_vec(), row);
        Ok(())
    }

    /// Rows sorted by key columns.
    pub fn sorted_rows(&self) -> Vec<&Vec<String>> {
        let mut v: Vec<&Vec<String>> = self.rows.values().collect();
        v.sort_by(|a, b| compare_keys(&a[..self.key_len], &b[..self.key_len]));
        v
    }

    /// Writes the sorted table and removes the partial file.
    pub fn finish(mut self) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(self.name);
        let tmp = self.dir.join(format!("{}.tmp", self.name));
        {
            let mut f = File::create(&tmp)?;
            writeln!(f, "{}", timestamp_line())?;
            writeln!(f, "{}", metadata_line(&self.hash))?;
            writeln!(f, "{}", self.header)?;
            for r in self.sorted_rows() {
                writeln!(f, "{}", r.join(","))?;
            }
            f.flush()?;
        }
        fs::rename(&tmp, &path)?;
        self.partial = None;
        let partial = self.dir.join(format!("{}.partial", self.name));
        if partial.exists() {
            fs::remove_file(partial)?;
        }
        Ok(path)
    }
}

/// A table shared by worker threads.
pub type SharedTable = Mutex<Table>;
