//! File formats: option chains, simulated paths, variance functions and check outputs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vixlab_core::chain::{OptionChain, StrikeRow};
use vixlab_core::consistency::ConsistencyReport;
use vixlab_core::sde::{PathBundle, TimeGrid};
use vixlab_core::vixcore::VarianceFunction;

use crate::error::{io_err, json_err, Error, Result};
use crate::scenario::Format;

/// Column order of a chain CSV.
pub const CHAIN_COLUMNS: [&str; 5] = ["strike", "call_bid", "call_ask", "put_bid", "put_ask"];

/// Magic bytes opening a binary path file.
pub const PATHS_MAGIC: &[u8; 8] = b"VIXPATH1";

/// Expiry metadata stored next to a chain CSV as `<stem>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainMeta {
    pub days_to_expiry: u32,
    /// Continuously compounded annual rate.
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spot_time: Option<String>,
}

/// One strike in a JSON chain; absent sides are `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRecord {
    pub strike: f64,
    pub call_bid: Option<f64>,
    pub call_ask: Option<f64>,
    pub put_bid: Option<f64>,
    pub put_ask: Option<f64>,
}

impl From<ChainRecord> for StrikeRow {
    fn from(r: ChainRecord) -> Self {
        let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
        StrikeRow {
            strike: r.strike,
            call_bid: v(r.call_bid),
            call_ask: v(r.call_ask),
            put_bid: v(r.put_bid),
            put_ask: v(r.put_ask),
        }
    }
}

impl From<&StrikeRow> for ChainRecord {
    fn from(r: &StrikeRow) -> Self {
        let v = |x: f64| x.is_finite().then_some(x);
        ChainRecord {
            strike: r.strike,
            call_bid: v(r.call_bid),
            call_ask: v(r.call_ask),
            put_bid: v(r.put_bid),
            put_ask: v(r.put_ask),
        }
    }
}

/// Self-contained JSON chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    #[serde(flatten)]
    pub meta: ChainMeta,
    pub rows: Vec<ChainRecord>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Reads a JSON document.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(json_err(path))
}

/// Writes a pretty-printed JSON document with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(json_err(path))?;
    w.write_all(b"\n").and_then(|()| w.flush()).map_err(io_err(path))
}

/// Sidecar path of a chain CSV.
pub fn meta_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("chain");
    csv.with_file_name(format!("{stem}.meta.json"))
}

fn expiry_time(days: u32) -> f64 {
    days as f64 / 365.0
}

fn parse_cell(path: &Path, line: u64, column: &str, cell: &str) -> Result<f64> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(f64::NAN);
    }
    cell.parse::<f64>().map_err(|_| Error::Row {
        path: path.to_path_buf(),
        line,
        message: format!("column `{column}`: cannot parse `{cell}` as a number"),
    })
}

/// Reads chain rows from a CSV; empty cells mark missing quotes.
pub fn read_chain_rows(path: &Path) -> Result<Vec<StrikeRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Row { path: path.to_path_buf(), line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CHAIN_COLUMNS {
        return Err(Error::Row {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`, found `{}`", CHAIN_COLUMNS.join(","), header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Row {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut v = [0.0; 5];
        for (i, col) in CHAIN_COLUMNS.iter().enumerate() {
            v[i] = parse_cell(path, line, col, &rec[i])?;
        }
        if !v[0].is_finite() {
            return Err(Error::Row { path: path.to_path_buf(), line, message: "missing strike".into() });
        }
        let row = StrikeRow { strike: v[0], call_bid: v[1], call_ask: v[2], put_bid: v[3], put_ask: v[4] };
        OptionChain::from_rows(1.0, 1, 0.0, vec![row])
            .map_err(|e| Error::Row { path: path.to_path_buf(), line, message: e.to_string() })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a chain from a JSON file or from a CSV with its `.meta.json` sidecar.
pub fn read_chain(path: &Path) -> Result<OptionChain> {
    let (meta, rows) = if path.extension().is_some_and(|e| e == "json") {
        let file: ChainFile = read_json(path)?;
        (file.meta, file.rows.into_iter().map(StrikeRow::from).collect())
    } else {
        let meta: ChainMeta = read_json(&meta_path(path))?;
        (meta, read_chain_rows(path)?)
    };
    if meta.days_to_expiry == 0 {
        return Err(Error::Format(format!("{}: days_to_expiry must be positive", path.display())));
    }
    Ok(OptionChain::from_rows(expiry_time(meta.days_to_expiry), meta.days_to_expiry, meta.rate, rows)?)
}

/// Writes a chain as CSV plus sidecar.
pub fn write_chain_csv(path: &Path, chain: &OptionChain, spot_time: Option<String>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let row_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    w.write_record(CHAIN_COLUMNS).map_err(row_err)?;
    let cell = |x: f64| if x.is_finite() { x.to_string() } else { String::new() };
    for r in chain.rows() {
        w.write_record([r.strike, r.call_bid, r.call_ask, r.put_bid, r.put_ask].map(cell)).map_err(row_err)?;
    }
    w.flush().map_err(io_err(path))?;
    let meta = ChainMeta { days_to_expiry: chain.days_to_expiry, rate: chain.rate, spot_time };
    write_json(&meta_path(path), &meta)
}

/// Writes paths in long form: `path,step,t,component,value`.
pub fn write_paths_csv(path: &Path, bundle: &PathBundle) -> Result<()> {
    let mut w = create(path)?;
    let e = io_err(path);
    let mut body = String::from("path,step,t,component,value\n");
    let n = bundle.grid.n_steps;
    for p in 0..bundle.n_paths {
        for s in 0..=n {
            let t = bundle.grid.time(s);
            for (c, v) in bundle.state(p, s).iter().enumerate() {
                use std::fmt::Write as _;
                let _ = writeln!(body, "{p},{s},{t},{},{v}", bundle.names[c]);
            }
        }
        if body.len() > 1 << 20 {
            if let Err(err) = w.write_all(body.as_bytes()) {
                return Err(e(err));
            }
            body.clear();
        }
    }
    w.write_all(body.as_bytes()).and_then(|()| w.flush()).map_err(e)
}

/// Paths and increments read back from a binary file.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryPaths {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub dim: usize,
    pub n_factors: usize,
    /// `[path][step][component]`, `n_steps + 1` steps.
    pub states: Vec<f64>,
    /// `[path][step][factor]`, `n_steps` steps.
    pub increments: Vec<f64>,
}

/// Writes `VIXPATH1`, then `n_paths, n_steps, dim, n_factors` as u64 and `t0, t_end`, states
/// and increments as f64, all little-endian.
pub fn write_paths_bin(path: &Path, bundle: &PathBundle) -> Result<()> {
    let mut w = create(path)?;
    let mut buf = Vec::with_capacity(56 + 8 * (bundle.states.len() + bundle.increments.len()));
    buf.extend_from_slice(PATHS_MAGIC);
    for n in [bundle.n_paths, bundle.grid.n_steps, bundle.dim, bundle.n_factors] {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for x in [bundle.grid.t0, bundle.grid.t_end].iter().chain(&bundle.states).chain(&bundle.increments) {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf).and_then(|()| w.flush()).map_err(io_err(path))
}

pub fn read_paths_bin(path: &Path) -> Result<BinaryPaths> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(io_err(path))?;
    let bad = |m: &str| Error::Format(format!("{}: {m}", path.display()));
    if bytes.len() < 56 || &bytes[..8] != PATHS_MAGIC {
        return Err(bad("not a VIXPATH1 file"));
    }
    let word = |i: usize| <[u8; 8]>::try_from(&bytes[8 + 8 * i..16 + 8 * i]).unwrap_or_else(|_| unreachable!());
    let [n_paths, n_steps, dim, n_factors] = [0, 1, 2, 3].map(|i| u64::from_le_bytes(word(i)) as usize);
    let n_states = n_paths * (n_steps + 1) * dim;
    let n_inc = n_paths * n_steps * n_factors;
    if bytes.len() != 56 + 8 * (n_states + n_inc) {
        return Err(bad("length does not match header"));
    }
    let floats: Vec<f64> = bytes[40..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap_or_else(|_| unreachable!())))
        .collect();
    let grid = TimeGrid::new(floats[0], floats[1], n_steps).map_err(|e| bad(&e.to_string()))?;
    Ok(BinaryPaths {
        grid,
        n_paths,
        dim,
        n_factors,
        states: floats[2..2 + n_states].to_vec(),
        increments: floats[2 + n_states..].to_vec(),
    })
}

pub fn write_variance_function(path: &Path, hf: &VarianceFunction) -> Result<()> {
    write_json(path, hf)
}

pub fn read_variance_function(path: &Path) -> Result<VarianceFunction> {
    read_json(path)
}

/// Writes `report.json`, `report.txt` and one `residuals_<check>.csv` per check, as selected.
pub fn write_report(dir: &Path, report: &ConsistencyReport, formats: &[Format]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if formats.contains(&Format::Json) {
        let json = dir.join("report.json");
        write_json(&json, report)?;
        written.push(json);
    }
    if formats.contains(&Format::Txt) {
        let txt = dir.join("report.txt");
        std::fs::write(&txt, report.table()).map_err(io_err(&txt))?;
        written.push(txt);
    }
    if !formats.contains(&Format::Csv) {
        return Ok(written);
    }
    for r in &report.results {
        if r.field.columns.is_empty() {
            continue;
        }
        let p = dir.join(format!("residuals_{}.csv", r.name.as_str()));
        let mut w = csv::Writer::from_writer(create(&p)?);
        let row_err = |e: csv::Error| Error::Format(format!("{}: {e}", p.display()));
        w.write_record(&r.field.columns).map_err(row_err)?;
        for row in &r.field.rows {
            w.write_record(row.iter().map(f64::to_string)).map_err(row_err)?;
        }
        w.flush().map_err(io_err(&p))?;
        written.push(p);
    }
    Ok(written)
}
