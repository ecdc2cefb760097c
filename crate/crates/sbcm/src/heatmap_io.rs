//! Heat-map TSV files and centre-of-mass reports.

use std::path::Path;

use sbcm_core::subband::{Band, BandGrid, ComResult, HeatMap};

use crate::error::{read_text, write_atomic, LineError, Result};
use crate::scores::{format_hash, parse_hash};

const COLUMNS: &str = "f_min\tf_max\tmin_tdcf";

#[derive(Debug, Clone, PartialEq)]
pub struct HeatMapFile {
    pub config_hash: u64,
    /// FFT bin width of the front-end that produced the map.
    pub bin_hz: Option<f64>,
    pub heatmap: HeatMap,
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

pub fn format_heatmap(f: &HeatMapFile) -> String {
    let hm = &f.heatmap;
    let g = hm.grid();
    let mut out = format!("# config_hash={}\n# attack_id={}\n", format_hash(f.config_hash), hm.attack_id());
    if let Some(b) = f.bin_hz {
        out.push_str(&format!("# bin_hz={b:?}\n"));
    }
    out.push_str(&format!(
        "# cut_in={}\n# cut_off={}\n# min_width={:?}\n",
        list(g.cut_in()),
        list(g.cut_off()),
        g.min_width()
    ));
    for (b, reason) in hm.failures() {
        out.push_str(&format!("# missing\t{:?}\t{:?}\t{}\n", b.f_min, b.f_max, reason.replace(['\n', '\t'], " ")));
    }
    out.push_str(COLUMNS);
    out.push('\n');
    for c in hm.cells() {
        out.push_str(&format!("{:?}\t{:?}\t{:?}\n", c.band.f_min, c.band.f_max, c.min_tdcf));
    }
    out
}

fn parse_f64(s: &str, line: usize) -> std::result::Result<f64, LineError> {
    s.trim().parse().map_err(|_| LineError::new(line, format!("bad number {s:?}")))
}

fn parse_list(s: &str, line: usize) -> std::result::Result<Vec<f64>, LineError> {
    s.split(',').map(|x| parse_f64(x, line)).collect()
}

fn dedup_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Parses a heat-map file. Without grid comments the grid is rebuilt from the
/// cells, with the narrowest cell as minimum width.
pub fn parse_heatmap(text: &str) -> std::result::Result<HeatMapFile, LineError> {
    let mut hash = None;
    let mut attack = None;
    let mut bin_hz = None;
    let (mut cut_in, mut cut_off, mut min_width) = (None, None, None);
    let mut missing: Vec<(Band, String, usize)> = Vec::new();
    let mut rows: Vec<(Band, f64, usize)> = Vec::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if let Some(c) = line.strip_prefix('#') {
            let c = c.trim_start();
            if let Some(rest) = c.strip_prefix("missing\t") {
                let f: Vec<&str> = rest.splitn(3, '\t').collect();
                let [lo, hi, why] = f[..] else { return Err(LineError::new(n, "bad missing-cell line")) };
                missing.push((Band::new(parse_f64(lo, n)?, parse_f64(hi, n)?), why.to_string(), n));
            } else if let Some((k, v)) = c.split_once('=') {
                match k {
                    "config_hash" => hash = Some(parse_hash(v).ok_or_else(|| LineError::new(n, "bad config hash"))?),
                    "attack_id" => attack = Some(v.to_string()),
                    "bin_hz" => bin_hz = Some(parse_f64(v, n)?),
                    "cut_in" => cut_in = Some(parse_list(v, n)?),
                    "cut_off" => cut_off = Some(parse_list(v, n)?),
                    "min_width" => min_width = Some(parse_f64(v, n)?),
                    _ => {}
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line != COLUMNS {
                return Err(LineError::new(n, format!("expected header {COLUMNS:?}")));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [lo, hi, v] = f[..] else { return Err(LineError::new(n, format!("expected 3 fields, found {}", f.len()))) };
        rows.push((Band::new(parse_f64(lo, n)?, parse_f64(hi, n)?), parse_f64(v, n)?, n));
    }
    if !header_seen {
        return Err(LineError::new(text.lines().count().max(1), "missing column header"));
    }
    let config_hash = hash.ok_or_else(|| LineError::new(1, "missing config_hash"))?;
    let bands = || rows.iter().map(|r| r.0).chain(missing.iter().map(|m| m.0));
    let cut_in = cut_in.unwrap_or_else(|| dedup_sorted(bands().map(|b| b.f_min).collect()));
    let cut_off = cut_off.unwrap_or_else(|| dedup_sorted(bands().map(|b| b.f_max).collect()));
    let min_width = min_width.unwrap_or_else(|| bands().map(|b| b.width()).fold(f64::INFINITY, f64::min));
    let grid = BandGrid::new(cut_in, cut_off, min_width).map_err(|e| LineError::new(1, e.to_string()))?;
    let mut heatmap = HeatMap::new(grid, attack.unwrap_or_else(|| "-".into()));
    for (b, why, n) in missing {
        if !heatmap.grid().is_valid(&b) {
            return Err(LineError::new(n, "missing cell is not on the grid"));
        }
        heatmap.record_failure(b, why);
    }
    for (b, v, n) in rows {
        if heatmap.get(&b).is_some() {
            return Err(LineError::new(n, "duplicate cell"));
        }
        heatmap.insert(b, v).map_err(|e| LineError::new(n, e.to_string()))?;
    }
    Ok(HeatMapFile { config_hash, bin_hz, heatmap })
}

pub fn read_heatmap(path: &Path) -> Result<HeatMapFile> {
    parse_heatmap(&read_text(path)?).map_err(|e| e.at(path))
}

pub fn write_heatmap(path: &Path, f: &HeatMapFile) -> Result<()> {
    write_atomic(path, format_heatmap(f).as_bytes())
}

/// Key-value centre-of-mass report. The snapped band is included when the bin width is known.
pub fn format_com_report(attack_id: &str, com: &ComResult, bin_hz: Option<f64>, config_hash: u64) -> String {
    let mut out = format!(
        "config_hash={}\nattack_id={attack_id}\nf_min_com={:?}\nf_max_com={:?}\n",
        format_hash(config_hash),
        com.f_min,
        com.f_max
    );
    if let Some(b) = bin_hz {
        let s = com.snapped(b);
        out.push_str(&format!("f_min_snapped={:?}\nf_max_snapped={:?}\n", s.f_min, s.f_max));
    }
    out.push_str(&format!("epsilon={:?}\nM={:?}\n", com.epsilon, com.total_mass));
    out
}

/// Reads a report back as ordered key-value pairs.
pub fn parse_key_values(text: &str) -> std::result::Result<Vec<(String, String)>, LineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| LineError::new(i + 1, "expected key=value"))
        })
        .collect()
}

pub fn write_com_report(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}
