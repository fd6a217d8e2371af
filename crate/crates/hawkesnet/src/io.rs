//! CSV and JSON file formats.
//!
//! Floats are written with Rust's shortest round-trip representation, so
//! saving and reloading reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hawkesnet_core::eventnet::EventGraph;
use hawkesnet_core::metrics::RocCurve;
use hawkesnet_core::{BackgroundSource, BinnedKernel, Event, EventCatalog, Region, ResponsibilityMatrix, TriggeringMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{data, Error, Result};

/// Catalog metadata stored next to the CSV as `<path>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogMeta {
    pub horizon: f64,
    pub region: Region,
    pub n_nodes: usize,
    /// External id of every dense node index; absent when ids are the
    /// indices themselves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_ids: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct LoadedCatalog {
    pub catalog: EventCatalog,
    /// External id of every node index.
    pub node_ids: Vec<String>,
    /// Things the caller may want to report, such as re-sorting.
    pub notices: Vec<String>,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Appends `suffix` to the file name (`out.csv` → `out.csv.provenance.json`).
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(has_headers).trim(csv::Trim::All).flexible(true).from_reader(f))
}

type Rows = (Vec<String>, Vec<(u64, csv::StringRecord)>);

/// Header (if any) and the data rows with their 1-based line numbers.
fn rows(path: &Path, has_headers: bool) -> Result<Rows> {
    let mut rdr = reader(path, has_headers)?;
    let header = if has_headers {
        rdr.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_owned).collect()
    } else {
        Vec::new()
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    Ok((header, out))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::parse(path, line, format!("malformed row: {e}"))
}

fn field<'a>(path: &Path, line: u64, rec: &'a csv::StringRecord, k: usize, name: &str) -> Result<&'a str> {
    rec.get(k).ok_or_else(|| Error::parse(path, line, format!("malformed row: missing column `{name}`")))
}

fn number<T: std::str::FromStr>(path: &Path, line: u64, s: &str, name: &str) -> Result<T> {
    s.parse().map_err(|_| Error::parse(path, line, format!("malformed row: `{s}` is not a valid {name}")))
}

fn expect_header(path: &Path, header: &[String], want: &[&str], optional: &[&str]) -> Result<()> {
    let ok = header.len() >= want.len()
        && header.len() <= want.len() + optional.len()
        && header.iter().zip(want.iter().chain(optional)).all(|(h, w)| h == w);
    if ok {
        Ok(())
    } else {
        let mut all = want.to_vec();
        all.extend(optional.iter().copied());
        Err(Error::parse(path, 1, format!("expected header `{}`, found `{}`", all.join(","), header.join(","))))
    }
}

/// Dense index for a set of ids: numeric order when every id is an
/// unsigned integer, lexicographic otherwise.
pub fn dense_ids<'a, I: IntoIterator<Item = &'a str>>(ids: I) -> Vec<String> {
    let mut v: Vec<String> = ids.into_iter().map(str::to_owned).collect();
    v.sort();
    v.dedup();
    if v.iter().all(|s| s.parse::<u64>().is_ok()) {
        v.sort_by_key(|s| s.parse::<u64>().unwrap());
    }
    v
}

pub fn save_events(catalog: &EventCatalog, path: &Path, node_ids: Option<&[String]>) -> Result<()> {
    if let Some(ids) = node_ids {
        if ids.len() != catalog.n_nodes() {
            return Err(data(format!("{} node ids for {} nodes", ids.len(), catalog.n_nodes())));
        }
    }
    let mut w = create(path)?;
    let parents = catalog.parents();
    let io = |e| Error::io(path, e);
    if parents.is_some() {
        writeln!(w, "node,t,x,y,parent").map_err(io)?;
    } else {
        writeln!(w, "node,t,x,y").map_err(io)?;
    }
    for (k, e) in catalog.events().iter().enumerate() {
        match node_ids {
            Some(ids) => write!(w, "{}", ids[e.node]),
            None => write!(w, "{}", e.node),
        }
        .map_err(io)?;
        write!(w, ",{},{},{}", e.t, e.x, e.y).map_err(io)?;
        if let Some(p) = parents {
            match p[k] {
                Some(i) => write!(w, ",{i}"),
                None => write!(w, ","),
            }
            .map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    finish(path, w)?;
    let meta = CatalogMeta {
        horizon: catalog.horizon(),
        region: catalog.region(),
        n_nodes: catalog.n_nodes(),
        node_ids: node_ids.map(<[String]>::to_vec),
    };
    write_json(&meta_path(path), &meta)
}

/// Loads a catalog. Horizon, region and the node id map come from the
/// sidecar when present; otherwise they are inferred from the rows.
pub fn load_events(path: &Path) -> Result<LoadedCatalog> {
    let (header, rows) = rows(path, true)?;
    expect_header(path, &header, &["node", "t", "x", "y"], &["parent"])?;
    let with_parents = header.len() == 5;
    let mp = meta_path(path);
    let meta: Option<CatalogMeta> = if mp.exists() { Some(read_json(&mp)?) } else { None };

    let labels: Vec<&str> = rows.iter().map(|(_, r)| r.get(0).unwrap_or("")).collect();
    let ids = match meta.as_ref().and_then(|m| m.node_ids.clone()) {
        Some(ids) => ids,
        None => match &meta {
            Some(m) => (0..m.n_nodes).map(|k| k.to_string()).collect(),
            None => dense_ids(labels.iter().copied()),
        },
    };
    let index: std::collections::HashMap<&str, usize> =
        ids.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect();

    let mut events = Vec::with_capacity(rows.len());
    let mut parents = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let line = *line;
        let label = field(path, line, rec, 0, "node")?;
        let node = *index
            .get(label)
            .ok_or_else(|| Error::parse(path, line, format!("malformed row: unknown node `{label}`")))?;
        let t = number(path, line, field(path, line, rec, 1, "t")?, "number for t")?;
        let x = number(path, line, field(path, line, rec, 2, "x")?, "number for x")?;
        let y = number(path, line, field(path, line, rec, 3, "y")?, "number for y")?;
        if rec.len() > header.len() {
            return Err(Error::parse(path, line, format!("malformed row: {} fields, expected {}", rec.len(), header.len())));
        }
        events.push(Event::new(node, t, x, y));
        if with_parents {
            let cell = rec.get(4).unwrap_or("");
            parents.push(if cell.is_empty() { None } else { Some(number::<usize>(path, line, cell, "parent index")?) });
        }
    }

    let mut notices = Vec::new();
    if events.windows(2).any(|w| w[1].t < w[0].t) {
        notices.push(format!("{}: events were not in time order and have been sorted", path.display()));
    }
    let (horizon, region, n_nodes) = match &meta {
        Some(m) => (m.horizon, m.region, m.n_nodes),
        None => {
            let horizon = events.iter().map(|e| e.t).fold(0.0, f64::max);
            (horizon, Region::bounding(&events), ids.len())
        }
    };
    let catalog = if with_parents {
        EventCatalog::with_parents(events, parents, horizon, region, n_nodes)?
    } else {
        EventCatalog::new(events, horizon, region, n_nodes)?
    };
    Ok(LoadedCatalog { catalog, node_ids: ids, notices })
}

pub fn save_matrix(k: &TriggeringMatrix, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for u in 0..k.dim() {
        let row: Vec<String> = k.row(u).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(",")).map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

/// Headerless square matrix, one row per line.
pub fn load_matrix(path: &Path) -> Result<TriggeringMatrix> {
    let (_, rows) = rows(path, false)?;
    let n = rows.len();
    let mut data = Vec::with_capacity(n * n);
    for (line, rec) in &rows {
        if rec.len() != n {
            return Err(Error::parse(path, *line, format!("malformed row: {} entries in a {n}-row matrix", rec.len())));
        }
        for s in rec.iter() {
            data.push(number(path, *line, s, "matrix entry")?);
        }
    }
    Ok(TriggeringMatrix::from_row_major(n, data)?)
}

pub fn save_kernel(k: &BinnedKernel, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "bin_left,bin_right,value").map_err(io)?;
    for b in 0..k.n_bins() {
        writeln!(w, "{},{},{}", k.edges()[b], k.edges()[b + 1], k.values()[b]).map_err(io)?;
    }
    finish(path, w)
}

pub fn load_kernel(path: &Path) -> Result<BinnedKernel> {
    let (header, rows) = rows(path, true)?;
    expect_header(path, &header, &["bin_left", "bin_right", "value"], &[])?;
    let mut edges = Vec::with_capacity(rows.len() + 1);
    let mut values = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let line = *line;
        let left: f64 = number(path, line, field(path, line, rec, 0, "bin_left")?, "number")?;
        let right: f64 = number(path, line, field(path, line, rec, 1, "bin_right")?, "number")?;
        match edges.last() {
            None => edges.push(left),
            Some(&prev) if prev != left => {
                return Err(Error::parse(path, line, "malformed row: bins are not contiguous"));
            }
            _ => {}
        }
        edges.push(right);
        values.push(number(path, line, field(path, line, rec, 2, "value")?, "number")?);
    }
    Ok(BinnedKernel::new(edges, values)?)
}

/// Sparse `i,j,p` triplets including the diagonal.
pub fn save_responsibilities(p: &ResponsibilityMatrix, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "i,j,p").map_err(io)?;
    for (i, j, v) in p.triplets() {
        writeln!(w, "{i},{j},{v}").map_err(io)?;
    }
    finish(path, w)
}

/// The event count is one past the largest index unless given.
pub fn load_responsibilities(path: &Path, n_events: Option<usize>) -> Result<ResponsibilityMatrix> {
    let (header, rows) = rows(path, true)?;
    expect_header(path, &header, &["i", "j", "p"], &[])?;
    let mut trip = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let line = *line;
        let i: usize = number(path, line, field(path, line, rec, 0, "i")?, "event index")?;
        let j: usize = number(path, line, field(path, line, rec, 1, "j")?, "event index")?;
        let p: f64 = number(path, line, field(path, line, rec, 2, "p")?, "probability")?;
        trip.push((i, j, p));
    }
    let n = n_events.unwrap_or_else(|| trip.iter().map(|t| t.0.max(t.1) + 1).max().unwrap_or(0));
    Ok(ResponsibilityMatrix::from_triplets(n, &trip)?)
}

pub fn save_edges(g: &EventGraph, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    match g.weights() {
        Some(ws) => {
            writeln!(w, "src,dst,weight").map_err(io)?;
            for (&(a, b), wt) in g.edges().iter().zip(ws) {
                writeln!(w, "{a},{b},{wt}").map_err(io)?;
            }
        }
        None => {
            writeln!(w, "src,dst").map_err(io)?;
            for &(a, b) in g.edges() {
                writeln!(w, "{a},{b}").map_err(io)?;
            }
        }
    }
    finish(path, w)
}

/// Edge list over `n_nodes` vertices; the vertex count defaults to one past
/// the largest endpoint.
pub fn load_edges(path: &Path, n_nodes: Option<usize>) -> Result<EventGraph> {
    let (header, rows) = rows(path, true)?;
    expect_header(path, &header, &["src", "dst"], &["weight"])?;
    let weighted = header.len() == 3;
    let mut edges = Vec::with_capacity(rows.len());
    let mut weights = Vec::new();
    for (line, rec) in &rows {
        let line = *line;
        let a: usize = number(path, line, field(path, line, rec, 0, "src")?, "vertex index")?;
        let b: usize = number(path, line, field(path, line, rec, 1, "dst")?, "vertex index")?;
        edges.push((a, b));
        if weighted {
            weights.push(number(path, line, field(path, line, rec, 2, "weight")?, "number")?);
        }
    }
    let n = n_nodes.unwrap_or_else(|| edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap_or(0));
    Ok(if weighted { EventGraph::with_weights(n, edges, weights)? } else { EventGraph::new(n, edges)? })
}

/// `event_index,label` with labels `background` or `triggered`.
pub fn save_labels(labels: &[bool], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "event_index,label").map_err(io)?;
    for (k, &b) in labels.iter().enumerate() {
        writeln!(w, "{k},{}", if b { "background" } else { "triggered" }).map_err(io)?;
    }
    finish(path, w)
}

/// Reads background labels; `1`/`0` are accepted for
/// `background`/`triggered`. Every index below the row count must appear
/// exactly once.
pub fn load_labels(path: &Path) -> Result<Vec<bool>> {
    let (header, rows) = rows(path, true)?;
    expect_header(path, &header, &["event_index", "label"], &[])?;
    let mut out = vec![None; rows.len()];
    for (line, rec) in &rows {
        let line = *line;
        let k: usize = number(path, line, field(path, line, rec, 0, "event_index")?, "event index")?;
        let b = match field(path, line, rec, 1, "label")? {
            "background" | "1" => true,
            "triggered" | "0" => false,
            s => return Err(Error::parse(path, line, format!("malformed row: unknown label `{s}`"))),
        };
        match out.get_mut(k) {
            Some(slot @ None) => *slot = Some(b),
            _ => return Err(Error::parse(path, line, format!("malformed row: index {k} repeated or out of range"))),
        }
    }
    Ok(out.into_iter().map(|b| b.expect("every index filled")).collect())
}

/// `node,community` assignments, returned in node order with communities
/// renumbered densely.
pub fn load_communities(path: &Path) -> Result<Vec<usize>> {
    let (header, rows) = rows(path, true)?;
    expect_header(path, &header, &["node", "community"], &[])?;
    let mut out = vec![None; rows.len()];
    let mut names: Vec<String> = Vec::new();
    for (line, rec) in &rows {
        let line = *line;
        let k: usize = number(path, line, field(path, line, rec, 0, "node")?, "node index")?;
        let c = field(path, line, rec, 1, "community")?;
        let id = match names.iter().position(|n| n == c) {
            Some(id) => id,
            None => {
                names.push(c.to_owned());
                names.len() - 1
            }
        };
        match out.get_mut(k) {
            Some(slot @ None) => *slot = Some(id),
            _ => return Err(Error::parse(path, line, format!("malformed row: node {k} repeated or out of range"))),
        }
    }
    Ok(out.into_iter().map(|c| c.expect("every node filled")).collect())
}

pub fn save_communities(labels: &[usize], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "node,community").map_err(io)?;
    for (k, c) in labels.iter().enumerate() {
        writeln!(w, "{k},{c}").map_err(io)?;
    }
    finish(path, w)
}

/// Background Gaussians of a nonparametric fit, `x,y,weight,bandwidth`.
pub fn save_background(sources: &[BackgroundSource], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "x,y,weight,bandwidth").map_err(io)?;
    for s in sources {
        writeln!(w, "{},{},{},{}", s.x, s.y, s.weight, s.bandwidth).map_err(io)?;
    }
    finish(path, w)
}

pub fn save_roc(roc: &RocCurve, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "threshold,fpr,tpr").map_err(io)?;
    for p in &roc.points {
        writeln!(w, "{},{},{}", p.threshold, p.fpr, p.tpr).map_err(io)?;
    }
    finish(path, w)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(f))
        .map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}
