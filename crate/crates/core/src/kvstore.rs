//! Embedded row-keyed table store.
//!
//! Tables map a row index to an immutable [`SparseRow`]. Each table is split
//! into lock shards by row index, so writers on different rows rarely
//! contend and a reader never observes a partially written row.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;
use thiserror::Error;

const SHARDS: usize = 16;

#[derive(Debug, Error)]
pub enum KvError {
    #[error("table name must be nonempty")]
    EmptyTableName,

    #[error("invalid row: {0}")]
    InvalidRow(String),

    #[error("corrupt snapshot: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, KvError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    table: String,
    row: usize,
}

impl RowKey {
    pub fn new(table: impl Into<String>, row: usize) -> Result<Self> {
        let table = table.into();
        if table.is_empty() {
            return Err(KvError::EmptyTableName);
        }
        Ok(RowKey { table, row })
    }

    pub fn table(&self) -> &str {
        &self.table
    }

    pub fn row(&self) -> usize {
        self.row
    }
}

/// Sparse vector with strictly increasing columns and no stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        for pair in entries.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(KvError::InvalidRow(format!(
                    "columns not strictly increasing at {} -> {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        if let Some(&(c, v)) = entries.iter().find(|(_, v)| !v.is_finite() || *v == 0.0) {
            return Err(KvError::InvalidRow(format!(
                "column {c} holds invalid value {v}"
            )));
        }
        Ok(SparseRow { entries })
    }

    /// Builds a row from entries in any order; zeros are dropped and
    /// repeated columns keep the last value.
    pub fn from_unsorted(entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let map: BTreeMap<usize, f64> = entries.into_iter().collect();
        SparseRow::new(map.into_iter().filter(|&(_, v)| v != 0.0).collect())
    }

    pub fn from_dense(values: &[f64]) -> Result<Self> {
        SparseRow::new(
            values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(c, &v)| (c, v))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, column: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&column, |&(c, _)| c)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Dense copy of length `width`, treating absent columns as zero.
    pub fn to_dense(&self, width: usize) -> Vec<f64> {
        let mut out = vec![0.0; width];
        for &(c, v) in &self.entries {
            if c < width {
                out[c] = v;
            }
        }
        out
    }
}

/// One table. Obtained from [`KvStore::table`] for repeated access without
/// the name lookup.
#[derive(Debug)]
pub struct Table {
    name: String,
    shards: Vec<RwLock<BTreeMap<usize, Arc<SparseRow>>>>,
}

impl Table {
    fn new(name: String) -> Self {
        Table {
            name,
            shards: (0..SHARDS).map(|_| RwLock::new(BTreeMap::new())).collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn shard(&self, row: usize) -> &RwLock<BTreeMap<usize, Arc<SparseRow>>> {
        &self.shards[row % SHARDS]
    }

    pub fn put(&self, row: usize, value: SparseRow) {
        self.shard(row).write().insert(row, Arc::new(value));
    }

    pub fn get(&self, row: usize) -> Option<Arc<SparseRow>> {
        self.shard(row).read().get(&row).cloned()
    }

    /// Rows with `range.start <= row < range.end`, ascending.
    pub fn scan(&self, range: Range<usize>) -> Vec<(usize, Arc<SparseRow>)> {
        if range.start >= range.end {
            return Vec::new();
        }
        let mut out: Vec<(usize, Arc<SparseRow>)> = Vec::new();
        for shard in &self.shards {
            let guard = shard.read();
            out.extend(guard.range(range.clone()).map(|(&r, v)| (r, Arc::clone(v))));
        }
        out.sort_unstable_by_key(|&(r, _)| r);
        out
    }

    pub fn row_count(&self) -> usize {
        self.shards.iter().map(|s| s.read().len()).sum()
    }

    /// Writes the table in the snapshot format: name length and bytes, row
    /// count, then per row its index, entry count and `(column, value)`
    /// pairs. All integers are 64-bit little endian, values IEEE-754 LE.
    pub fn write_snapshot<W: Write>(&self, sink: W) -> io::Result<()> {
        let mut w = BufWriter::new(sink);
        let rows = self.scan(0..usize::MAX);
        w.write_all(&(self.name.len() as u64).to_le_bytes())?;
        w.write_all(self.name.as_bytes())?;
        w.write_all(&(rows.len() as u64).to_le_bytes())?;
        for (r, row) in rows {
            w.write_all(&(r as u64).to_le_bytes())?;
            w.write_all(&(row.len() as u64).to_le_bytes())?;
            for &(c, v) in row.entries() {
                w.write_all(&(c as u64).to_le_bytes())?;
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    }
}

/// Shared handle-based store; clone the `Arc<KvStore>` to share it.
#[derive(Debug, Default)]
pub struct KvStore {
    tables: RwLock<HashMap<String, Arc<Table>>>,
}

impl KvStore {
    pub fn new() -> Self {
        KvStore::default()
    }

    /// Handle to `name`, created empty if missing.
    pub fn table(&self, name: &str) -> Result<Arc<Table>> {
        if name.is_empty() {
            return Err(KvError::EmptyTableName);
        }
        if let Some(t) = self.tables.read().get(name) {
            return Ok(Arc::clone(t));
        }
        let mut tables = self.tables.write();
        Ok(Arc::clone(
            tables
                .entry(name.to_string())
                .or_insert_with(|| Arc::new(Table::new(name.to_string()))),
        ))
    }

    pub fn put_row(&self, key: &RowKey, row: SparseRow) {
        // RowKey guarantees a nonempty name
        if let Ok(t) = self.table(&key.table) {
            t.put(key.row, row);
        }
    }

    pub fn get_row(&self, key: &RowKey) -> Option<Arc<SparseRow>> {
        self.tables.read().get(&key.table)?.get(key.row)
    }

    pub fn scan(&self, table: &str, range: Range<usize>) -> Vec<(RowKey, Arc<SparseRow>)> {
        let Some(t) = self.tables.read().get(table).cloned() else {
            return Vec::new();
        };
        t.scan(range)
            .into_iter()
            .map(|(r, row)| {
                (
                    RowKey {
                        table: table.to_string(),
                        row: r,
                    },
                    row,
                )
            })
            .collect()
    }

    pub fn drop_table(&self, table: &str) -> bool {
        self.tables.write().remove(table).is_some()
    }

    pub fn table_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.tables.read().keys().cloned().collect();
        names.sort();
        names
    }

    pub fn save_table(&self, table: &str, path: &Path) -> Result<()> {
        let t = self.table(table)?;
        t.write_snapshot(File::create(path)?)?;
        Ok(())
    }

    /// Loads a snapshot, replacing any table of the same name. Returns the
    /// table name.
    pub fn load_table(&self, path: &Path) -> Result<String> {
        let (name, rows) = read_snapshot(BufReader::new(File::open(path)?))?;
        let table = Table::new(name.clone());
        for (r, row) in rows {
            table.put(r, row);
        }
        self.tables.write().insert(name.clone(), Arc::new(table));
        Ok(name)
    }
}

fn read_u64<R: Read>(src: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    src.read_exact(&mut buf)
        .map_err(|e| KvError::Corrupt(format!("truncated snapshot: {e}")))?;
    Ok(u64::from_le_bytes(buf))
}

fn read_index<R: Read>(src: &mut R) -> Result<usize> {
    usize::try_from(read_u64(src)?).map_err(|_| KvError::Corrupt("index overflows usize".into()))
}

pub fn read_snapshot<R: Read>(mut src: R) -> Result<(String, Vec<(usize, SparseRow)>)> {
    let name_len = read_index(&mut src)?;
    let mut name = vec![0u8; name_len];
    src.read_exact(&mut name)
        .map_err(|e| KvError::Corrupt(format!("truncated table name: {e}")))?;
    let name =
        String::from_utf8(name).map_err(|_| KvError::Corrupt("table name is not UTF-8".into()))?;
    if name.is_empty() {
        return Err(KvError::EmptyTableName);
    }
    let count = read_index(&mut src)?;
    let mut rows = Vec::new();
    for _ in 0..count {
        let r = read_index(&mut src)?;
        let len = read_index(&mut src)?;
        let mut entries = Vec::new();
        for _ in 0..len {
            let c = read_index(&mut src)?;
            let v = f64::from_bits(read_u64(&mut src)?);
            entries.push((c, v));
        }
        let row = SparseRow::new(entries).map_err(|e| KvError::Corrupt(e.to_string()))?;
        rows.push((r, row));
    }
    Ok((name, rows))
}
