//! On-disk formats: edge lists, energy tables, bit-packed sample files,
//! trace and heatmap CSVs.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use afmhyst_core::lattice::{Edge, Geometry, Sublattice, DEFAULT_FIELD};
use afmhyst_core::observables::{Heatmap, HysteresisTrace};
use afmhyst_core::schedule::EnergyRow;
use afmhyst_core::{EnergyTable, SampleSet, SpinLattice};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SAMPLE_MAGIC: [u8; 4] = *b"AFMS";
pub const SAMPLE_VERSION: u16 = 1;
/// magic + version + n_sites + shots + field.
pub const SAMPLE_HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::disk(path, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::disk(path, e))
}

/// Write through a sibling temporary file and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::disk(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    let mut file = fs::File::create(tmp).map_err(|e| CliError::disk(tmp, e))?;
    file.write_all(bytes).map_err(|e| CliError::disk(tmp, e))?;
    file.sync_all().map_err(|e| CliError::disk(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| CliError::disk(path, e))
}

// Edge lists -----------------------------------------------------------------

/// Text edge list.
///
/// ```text
/// # n_sites=5
/// # geometry=ring            (or grid:LXxLY, optional)
/// # bipartition=ABABA        (optional)
/// 0 1 1.0                    (i j J)
/// h 3 0.5                    (site field, default 1.0)
/// ```
pub fn write_edge_list(lattice: &SpinLattice) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# n_sites={}", lattice.n_sites());
    match lattice.geometry() {
        Some(Geometry::Ring { .. }) => out.push_str("# geometry=ring\n"),
        Some(Geometry::Grid { lx, ly }) => {
            let _ = writeln!(out, "# geometry=grid:{lx}x{ly}");
        }
        None => {}
    }
    if let Some(labels) = lattice.bipartition() {
        let text: String = labels
            .iter()
            .map(|l| if *l == Sublattice::A { 'A' } else { 'B' })
            .collect();
        let _ = writeln!(out, "# bipartition={text}");
    }
    for e in lattice.edges() {
        let _ = writeln!(out, "{} {} {}", e.i, e.j, e.coupling);
    }
    for (i, &h) in lattice.fields().iter().enumerate() {
        if h != DEFAULT_FIELD {
            let _ = writeln!(out, "h {i} {h}");
        }
    }
    out
}

pub fn parse_edge_list(text: &str, path: &Path) -> CliResult<SpinLattice> {
    let bad = |line: usize, msg: &str| CliError::format(path, format!("line {}: {msg}", line + 1));
    let mut n_sites = None;
    let mut geometry = None;
    let mut labels = None;
    let mut edges = Vec::new();
    let mut fields = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let Some((key, value)) = meta.trim().split_once('=') else {
                continue;
            };
            match key.trim() {
                "n_sites" => {
                    n_sites = Some(value.trim().parse::<usize>().map_err(|_| bad(k, "bad n_sites"))?)
                }
                "geometry" => geometry = Some((k, value.trim().to_string())),
                "bipartition" => {
                    let parsed: Option<Vec<Sublattice>> = value
                        .trim()
                        .chars()
                        .map(|c| match c {
                            'A' => Some(Sublattice::A),
                            'B' => Some(Sublattice::B),
                            _ => None,
                        })
                        .collect();
                    labels = Some(parsed.ok_or_else(|| bad(k, "bipartition must use A and B"))?);
                }
                _ => {}
            }
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["h", i, h] => {
                let i = i.parse::<usize>().map_err(|_| bad(k, "bad site index"))?;
                let h = h.parse::<f64>().map_err(|_| bad(k, "bad field"))?;
                fields.push((i, h));
            }
            [i, j, c] => {
                let i = i.parse::<usize>().map_err(|_| bad(k, "bad site index"))?;
                let j = j.parse::<usize>().map_err(|_| bad(k, "bad site index"))?;
                let c = c.parse::<f64>().map_err(|_| bad(k, "bad coupling"))?;
                edges.push(Edge::new(i, j, c));
            }
            _ => return Err(bad(k, "expected `i j J` or `h i value`")),
        }
    }
    let n = match n_sites {
        Some(n) => n,
        None => edges.iter().map(|e| e.i.max(e.j) + 1).max().unwrap_or(0),
    };
    let mut h = vec![DEFAULT_FIELD; n];
    for (i, value) in fields {
        *h.get_mut(i)
            .ok_or_else(|| CliError::format(path, format!("field on site {i} out of range")))? = value;
    }
    let mut lattice = SpinLattice::new(n, edges, h)?;
    if let Some((k, text)) = geometry {
        let g = parse_geometry(&text, n).ok_or_else(|| bad(k, "bad geometry"))?;
        lattice = lattice.with_geometry(g)?;
    }
    if let Some(l) = labels {
        lattice = lattice.with_bipartition(l)?;
    }
    Ok(lattice)
}

fn parse_geometry(text: &str, n_sites: usize) -> Option<Geometry> {
    if text == "ring" {
        return Some(Geometry::Ring { n: n_sites });
    }
    let (lx, ly) = text.strip_prefix("grid:")?.split_once('x')?;
    Some(Geometry::Grid {
        lx: lx.parse().ok()?,
        ly: ly.parse().ok()?,
    })
}

pub fn read_edge_list(path: &Path) -> CliResult<SpinLattice> {
    parse_edge_list(&read_text(path)?, path)
}

// Energy tables --------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct TableRow {
    s: f64,
    #[serde(rename = "A_GHz")]
    a: f64,
    #[serde(rename = "B_GHz")]
    b: f64,
}

/// CSV with header `s,A_GHz,B_GHz`.
pub fn read_energy_table(path: &Path) -> CliResult<EnergyTable> {
    let text = read_text(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows = reader
        .deserialize::<TableRow>()
        .map(|r| r.map(|r| EnergyRow { s: r.s, a: r.a, b: r.b }))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::format(path, e))?;
    Ok(EnergyTable::new(rows)?)
}

pub fn write_energy_table(table: &EnergyTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in table.rows() {
        w.serialize(TableRow { s: r.s, a: r.a, b: r.b }).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv is utf-8")
}

// Sample files ---------------------------------------------------------------

/// Header and bit-packed spins: shots row-major, one bit per spin in a
/// continuous LSB-first stream, `-1 -> 0`, `+1 -> 1`.
pub fn encode_samples(samples: &SampleSet) -> Vec<u8> {
    let bits = samples.spins().len();
    let mut out = Vec::with_capacity(SAMPLE_HEADER_LEN + bits.div_ceil(8));
    out.extend_from_slice(&SAMPLE_MAGIC);
    out.extend_from_slice(&SAMPLE_VERSION.to_le_bytes());
    out.extend_from_slice(&(samples.n_sites() as u32).to_le_bytes());
    out.extend_from_slice(&(samples.shots() as u32).to_le_bytes());
    out.extend_from_slice(&samples.field_value.to_le_bytes());
    let mut packed = vec![0u8; bits.div_ceil(8)];
    for (k, &s) in samples.spins().iter().enumerate() {
        if s == 1 {
            packed[k / 8] |= 1 << (k % 8);
        }
    }
    out.extend_from_slice(&packed);
    out
}

pub fn decode_samples(bytes: &[u8], lattice_ref: &str, path: &Path) -> CliResult<SampleSet> {
    if bytes.len() < SAMPLE_HEADER_LEN || bytes[..4] != SAMPLE_MAGIC {
        return Err(CliError::format(path, "not a sample file"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != SAMPLE_VERSION {
        return Err(CliError::format(path, format!("unsupported version {version}")));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (n_sites, shots) = (word(6), word(10));
    let field = f64::from_le_bytes(bytes[14..22].try_into().expect("8 bytes"));
    let bits = n_sites * shots;
    let body = &bytes[SAMPLE_HEADER_LEN..];
    if body.len() != bits.div_ceil(8) {
        return Err(CliError::format(
            path,
            format!("expected {} payload bytes, found {}", bits.div_ceil(8), body.len()),
        ));
    }
    let spins = (0..bits)
        .map(|k| if body[k / 8] >> (k % 8) & 1 == 1 { 1 } else { -1 })
        .collect();
    Ok(SampleSet::new(n_sites, spins, field, lattice_ref)?)
}

// Traces ---------------------------------------------------------------------

#[derive(Serialize)]
struct TraceRow {
    step: usize,
    #[serde(rename = "H")]
    h: f64,
    m_z: f64,
    m_z_stderr: f64,
    m_s: Option<f64>,
    wall_total: Option<f64>,
    wall_dd: Option<f64>,
    direction: &'static str,
}

/// `step,H,m_z,m_z_stderr,m_s,wall_total,wall_dd,direction`; observables the
/// lattice does not support are left empty.
pub fn write_trace(trace: &HysteresisTrace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (step, s) in trace.steps().iter().enumerate() {
        w.serialize(TraceRow {
            step,
            h: s.h,
            m_z: s.m_z,
            m_z_stderr: s.m_z_stderr,
            m_s: s.m_s,
            wall_total: s.wall_total,
            wall_dd: s.wall_dd,
            direction: s.direction.name(),
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv is utf-8")
}

// Heatmaps -------------------------------------------------------------------

/// Matrix CSV: the header row lists `qx`, each later row starts with its
/// `qy` and holds `|S(qx, qy)|` across.
pub fn write_heatmap(map: &Heatmap) -> String {
    let grid = map.grid();
    let mut out = String::from("qy\\qx");
    for q in &map.q {
        let _ = write!(out, ",{q}");
    }
    out.push('\n');
    for b in 0..grid {
        let _ = write!(out, "{}", map.q[b]);
        for a in 0..grid {
            let _ = write!(out, ",{}", map.at(a, b));
        }
        out.push('\n');
    }
    out
}

/// Sidecar describing a heatmap CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMeta {
    pub grid: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub shots: usize,
    pub cycle: usize,
    pub step: usize,
    pub h_gain: f64,
    pub m_z: f64,
    pub argmax_qx: f64,
    pub argmax_qy: f64,
    pub brillouin_zone: [f64; 2],
}

/// Matrix CSV of a small integer map, `ly` rows of `lx` values.
pub fn write_int_grid(values: &[i8], lx: usize) -> String {
    let mut out = String::new();
    for row in values.chunks(lx) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_float_grid(values: &[f64], lx: usize) -> String {
    let mut out = String::new();
    for row in values.chunks(lx) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
