use crate::CliError;
use crit_elliptic::profiles::GridFn;
use crit_elliptic::serde_num::format as num;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::Path;

/// JSON pointer of a deserialization path.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Parses JSON, reporting schema violations with the pointer of the offending field.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::Input(format!("{}: empty file (at pointer \"\")", origin.display())));
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        CliError::Input(format!(
            "{}: schema violation at pointer \"{}\": {}",
            origin.display(),
            pointer(e.path()),
            e.inner()
        ))
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_json(&text, path)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn coord_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|a| format!("x{a}")).chain(std::iter::once("u".to_string())).collect()
}

/// Sparse CSV of a box function: one row per nonzero node.
pub fn write_grid_csv(path: &Path, u: &GridFn) -> Result<(), CliError> {
    let header = coord_header(u.dim);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = u.nonzero_entries().into_iter().map(|(x, v)| {
        x.iter().map(|c| num(*c)).chain(std::iter::once(num(v))).collect::<Vec<_>>()
    });
    write_csv(path, &header, rows)
}

pub fn read_grid_csv(path: &Path, half_width: f64, nodes: usize, dim: usize) -> Result<GridFn, CliError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let expected = coord_header(dim);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(CliError::Input(format!("{}: header {header:?}, expected {expected:?}", path.display())));
    }
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| {
                crit_elliptic::serde_num::parse(f)
                    .ok_or_else(|| CliError::Input(format!("{}: not a number: {f:?}", path.display())))
            })
            .collect::<Result<_, _>>()?;
        let (x, u) = vals.split_at(dim);
        entries.push((x.to_vec(), u[0]));
    }
    Ok(GridFn::from_entries(half_width, nodes, dim, &entries)?)
}
