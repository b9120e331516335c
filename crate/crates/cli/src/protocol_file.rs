//! Reader for `protocol_t.csv`.

use std::fs;
use std::path::Path;

use crate::CliError;

/// Columns of a time-domain protocol file. `t` and `kappa` are required.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolFile {
    pub t: Vec<f64>,
    pub kappa: Vec<f64>,
    pub s: Option<Vec<f64>>,
    pub kbar: Option<Vec<f64>>,
}

pub fn read(path: &Path) -> Result<ProtocolFile, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn parse(text: &str) -> Result<ProtocolFile, String> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or("line 1: empty file")?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |n: &str| names.iter().position(|h| *h == n);
    let it = col("t").ok_or("line 1: missing column `t`")?;
    let ik = col("kappa").ok_or("line 1: missing column `kappa`")?;
    let (is, ib) = (col("s"), col("kbar"));

    let mut f = ProtocolFile {
        t: Vec::new(),
        kappa: Vec::new(),
        s: is.map(|_| Vec::new()),
        kbar: ib.map(|_| Vec::new()),
    };
    for (i, line) in lines {
        let no = i + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != names.len() {
            return Err(format!(
                "line {no}: expected {} fields, found {}",
                names.len(),
                cells.len()
            ));
        }
        let get = |k: usize| -> Result<f64, String> {
            let v: f64 = cells[k]
                .parse()
                .map_err(|_| format!("line {no}: `{}` is not a number", cells[k]))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!(
                    "line {no}: non-finite value in column `{}`",
                    names[k]
                ))
            }
        };
        let t = get(it)?;
        if let Some(&prev) = f.t.last() {
            if !(t > prev) {
                return Err(format!(
                    "line {no}: t = {t} does not increase (previous {prev})"
                ));
            }
        }
        f.t.push(t);
        f.kappa.push(get(ik)?);
        if let (Some(k), Some(v)) = (is, f.s.as_mut()) {
            v.push(get(k)?);
        }
        if let (Some(k), Some(v)) = (ib, f.kbar.as_mut()) {
            v.push(get(k)?);
        }
    }
    if f.t.len() < 2 {
        return Err("need at least 2 data rows".into());
    }
    Ok(f)
}
