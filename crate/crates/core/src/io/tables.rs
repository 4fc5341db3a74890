//! CSV artifacts. Every file starts with a `# parabolib-<kind> v1, ...`
//! comment line followed by a column header; numbers are written with 17
//! significant digits so they re-parse to the same f64.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::analysis::BiasCurve;
use crate::error::{Error, Result};
use crate::fit::{CalibrationProfiles, ProfileRow};
use crate::forward::FrequencyShift;
use crate::model::{GridRow, MeasurementGrid, Mode, ParabolaFit};

pub const FORMAT_VERSION: u32 = 1;
pub const GRID_COLUMNS: [&str; 4] = ["d_r", "V", "value", "sigma"];
pub const PROFILE_COLUMNS: [&str; 7] =
    ["d_r", "k", "sigma_k", "V_m", "sigma_V", "fluct", "sigma_f"];

/// Formats a float in decimal-exponent notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::schema(line, None, e.to_string())
}

struct Table {
    preamble: Vec<String>,
    header: Vec<String>,
    /// (file line number, fields)
    records: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn render(preamble: &[String], header: &[&str], rows: &[Vec<String>]) -> Result<String> {
        let mut out = String::new();
        for line in preamble {
            out.push_str(line);
            out.push('\n');
        }
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).map_err(csv_err)?;
        for row in rows {
            writer.write_record(row).map_err(csv_err)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
        Ok(out)
    }

    fn parse(text: &str) -> Result<Self> {
        let preamble: Vec<String> = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(str::to_owned)
            .collect();
        let offset = preamble.len();
        let body: String = text.lines().skip(offset).flat_map(|l| [l, "\n"]).collect();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(body.as_bytes());
        let header = reader
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(|h| h.trim().to_owned())
            .collect();
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line() as usize) + offset;
            records.push((line, rec.iter().map(str::to_owned).collect()));
        }
        Ok(Self {
            preamble,
            header,
            records,
        })
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| {
            Error::schema(
                self.preamble.len() + 1,
                Some(name),
                format!("missing column '{name}'"),
            )
        })
    }

    fn columns<const N: usize>(&self, names: [&str; N]) -> Result<[usize; N]> {
        let mut out = [0; N];
        for (slot, name) in out.iter_mut().zip(names) {
            *slot = self.column_index(name)?;
        }
        Ok(out)
    }
}

fn parse_field(fields: &[String], idx: usize, line: usize, name: &str) -> Result<f64> {
    let raw = fields
        .get(idx)
        .ok_or_else(|| Error::schema(line, Some(name), "missing value"))?;
    raw.trim().parse::<f64>().map_err(|_| {
        Error::schema(
            line,
            Some(name),
            format!("cannot parse '{raw}' as a number"),
        )
    })
}

/// Parses `# parabolib-<kind> v<N>, key=value, ...`.
fn parse_banner(line: Option<&String>, kind: &str) -> Result<HashMap<String, String>> {
    let line =
        line.ok_or_else(|| Error::schema(1, None, format!("missing parabolib-{kind} header")))?;
    let rest = line
        .strip_prefix(&format!("# parabolib-{kind} v"))
        .ok_or_else(|| {
            Error::schema(
                1,
                None,
                format!("expected '# parabolib-{kind} v{FORMAT_VERSION}' header"),
            )
        })?;
    let mut parts = rest.split(',').map(str::trim);
    let version = parts.next().unwrap_or_default();
    if version != FORMAT_VERSION.to_string() {
        return Err(Error::schema(
            1,
            None,
            format!("unsupported version v{version}, expected v{FORMAT_VERSION}"),
        ));
    }
    let mut map = HashMap::new();
    for part in parts {
        if let Some((k, v)) = part.split_once('=') {
            map.insert(k.trim().to_owned(), v.trim().to_owned());
        }
    }
    if let Some(units) = map.get("units") {
        if units != "SI" {
            return Err(Error::schema(
                1,
                None,
                format!("unsupported units '{units}'"),
            ));
        }
    }
    Ok(map)
}

fn banner_mode(map: &HashMap<String, String>) -> Result<Mode> {
    map.get("mode")
        .ok_or_else(|| Error::schema(1, None, "header lacks mode="))?
        .parse()
        .map_err(|e: Error| Error::schema(1, None, e.to_string()))
}

pub fn grid_to_string(grid: &MeasurementGrid) -> Result<String> {
    let preamble = vec![
        format!(
            "# parabolib-grid v{FORMAT_VERSION}, mode={}, units=SI",
            grid.mode()
        ),
        format!("# provenance={}", grid.provenance()),
    ];
    let rows: Vec<Vec<String>> = grid
        .rows()
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.d_r),
                fmt_f64(r.voltage),
                fmt_f64(r.value),
                fmt_f64(r.sigma),
            ]
        })
        .collect();
    Table::render(&preamble, &GRID_COLUMNS, &rows)
}

pub fn grid_from_str(text: &str) -> Result<MeasurementGrid> {
    let table = Table::parse(text)?;
    let banner = parse_banner(table.preamble.first(), "grid")?;
    let mode = banner_mode(&banner)?;
    let provenance = table
        .preamble
        .iter()
        .find_map(|l| l.strip_prefix("# provenance="))
        .unwrap_or("external")
        .to_owned();
    let idx = table.columns(GRID_COLUMNS)?;

    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(table.records.len());
    for (line, fields) in &table.records {
        let line = *line;
        let d_r = parse_field(fields, idx[0], line, "d_r")?;
        let voltage = parse_field(fields, idx[1], line, "V")?;
        let value = parse_field(fields, idx[2], line, "value")?;
        let sigma = parse_field(fields, idx[3], line, "sigma")?;
        if !(sigma > 0.0) {
            return Err(Error::schema(
                line,
                Some("sigma"),
                format!("sigma must be > 0, got {sigma}"),
            ));
        }
        let key = ((d_r + 0.0).to_bits(), (voltage + 0.0).to_bits());
        if !seen.insert(key) {
            return Err(Error::schema(
                line,
                None,
                format!("duplicate (d_r = {d_r}, V = {voltage}) breaks the rectangular grid"),
            ));
        }
        rows.push(GridRow {
            d_r,
            voltage,
            value,
            sigma,
        });
    }
    let last_line = table
        .records
        .last()
        .map_or(table.preamble.len() + 1, |r| r.0);
    MeasurementGrid::new(mode, rows, provenance)
        .map_err(|e| Error::schema(last_line, None, e.to_string()))
}

pub fn write_grid(grid: &MeasurementGrid, path: &Path) -> Result<()> {
    write_text(path, &grid_to_string(grid)?)
}

pub fn read_grid(path: &Path) -> Result<MeasurementGrid> {
    grid_from_str(&fs::read_to_string(path)?)
}

pub fn profiles_to_string(profiles: &CalibrationProfiles) -> Result<String> {
    let preamble = vec![format!(
        "# parabolib-profiles v{FORMAT_VERSION}, mode={}, units=SI",
        profiles.mode
    )];
    let rows: Vec<Vec<String>> = profiles
        .rows
        .iter()
        .map(|r| {
            [r.d_r, r.k, r.sigma_k, r.v_m, r.sigma_v, r.fluct, r.sigma_f]
                .into_iter()
                .map(fmt_f64)
                .collect()
        })
        .collect();
    Table::render(&preamble, &PROFILE_COLUMNS, &rows)
}

pub fn profiles_from_str(text: &str) -> Result<CalibrationProfiles> {
    let table = Table::parse(text)?;
    let banner = parse_banner(table.preamble.first(), "profiles")?;
    let mode = banner_mode(&banner)?;
    let idx = table.columns(PROFILE_COLUMNS)?;
    let mut rows = Vec::new();
    for (line, fields) in &table.records {
        let mut v = [0.0; 7];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = parse_field(fields, idx[k], *line, PROFILE_COLUMNS[k])?;
        }
        rows.push(ProfileRow {
            d_r: v[0],
            k: v[1],
            sigma_k: v[2],
            v_m: v[3],
            sigma_v: v[4],
            fluct: v[5],
            sigma_f: v[6],
        });
    }
    let last_line = table.records.last().map_or(0, |r| r.0);
    CalibrationProfiles::new(mode, rows).map_err(|e| Error::schema(last_line, None, e.to_string()))
}

pub fn write_profiles(profiles: &CalibrationProfiles, path: &Path) -> Result<()> {
    write_text(path, &profiles_to_string(profiles)?)
}

pub fn read_profiles(path: &Path) -> Result<CalibrationProfiles> {
    profiles_from_str(&fs::read_to_string(path)?)
}

pub fn bias_to_string(curve: &BiasCurve, mode: Mode) -> Result<String> {
    let preamble = vec![format!(
        "# parabolib-bias v{FORMAT_VERSION}, mode={mode}, v_const={}, units=SI",
        fmt_f64(curve.v_const)
    )];
    let rows: Vec<Vec<String>> = curve
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.d),
                fmt_f64(r.bias),
                fmt_f64(r.fluct_true),
                r.relative_overestimate.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect();
    Table::render(
        &preamble,
        &["d", "bias", "fluct_true", "relative_overestimate"],
        &rows,
    )
}

/// Measured and fitted parabolas at a few distances, for plotting.
pub fn parabolas_to_string(grid: &MeasurementGrid, fits: &[ParabolaFit]) -> Result<String> {
    let preamble = vec![format!(
        "# parabolib-parabolas v{FORMAT_VERSION}, mode={}, units=SI",
        grid.mode()
    )];
    let mut rows = Vec::new();
    for fit in fits {
        for r in grid.rows().iter().filter(|r| r.d_r == fit.d_r) {
            rows.push(vec![
                fmt_f64(r.d_r),
                fmt_f64(r.voltage),
                fmt_f64(r.value),
                fmt_f64(r.sigma),
                fmt_f64(fit.evaluate(r.voltage)),
            ]);
        }
    }
    Table::render(
        &preamble,
        &["d_r", "V", "measured", "sigma", "fitted"],
        &rows,
    )
}

/// Distance-only term along the minima path and at a fixed voltage.
pub fn fixed_voltage_to_string(
    mode: Mode,
    v_const: f64,
    d0: f64,
    path: &CalibrationProfiles,
    fixed: &[(f64, f64)],
) -> Result<String> {
    let preamble = vec![format!(
        "# parabolib-fixed-voltage v{FORMAT_VERSION}, mode={mode}, v_const={}, units=SI",
        fmt_f64(v_const)
    )];
    let rows: Vec<Vec<String>> = path
        .rows
        .iter()
        .zip(fixed)
        .map(|(p, (_, f))| {
            vec![
                fmt_f64(p.d_r),
                fmt_f64(d0 - p.d_r),
                fmt_f64(p.fluct),
                fmt_f64(*f),
                fmt_f64(f - p.fluct),
            ]
        })
        .collect();
    Table::render(
        &preamble,
        &["d_r", "d", "fluct_path", "fluct_fixed_v", "difference"],
        &rows,
    )
}

pub fn frequency_to_string(rows: &[(GridRow, FrequencyShift)]) -> Result<String> {
    let preamble = vec![format!(
        "# parabolib-frequency v{FORMAT_VERSION}, mode=gradient, units=SI"
    )];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(r, f)| {
            [
                r.d_r,
                r.voltage,
                r.value,
                f.delta_nu_sq,
                f.delta_nu,
                f.delta_nu_approx,
            ]
            .into_iter()
            .map(fmt_f64)
            .collect()
        })
        .collect();
    Table::render(
        &preamble,
        &[
            "d_r",
            "V",
            "G",
            "delta_nu_sq",
            "delta_nu",
            "delta_nu_approx",
        ],
        &body,
    )
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}
