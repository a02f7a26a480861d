//! CSV export of arcs: `t,j,<labels...>` for samples and
//! `t,j,pre_<label>...,post_<label>...,tag` for jumps. Floats carry 17
//! significant digits.

use std::io::{Read, Write};

use super::arc::HybridArc;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn fmt_float<T: Scalar>(x: T) -> String {
    format!("{x:.16e}")
}

pub fn write_arc_csv<T: Scalar, W: Write>(arc: &HybridArc<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "j".to_string()];
    header.extend(arc.labels().iter().cloned());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(arc.dim() + 2);
    for s in arc.samples() {
        row.clear();
        row.push(fmt_float(s.time.t));
        row.push(s.time.j.to_string());
        row.extend(s.state.iter().map(|&v| fmt_float(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jumps_csv<T: Scalar, W: Write>(arc: &HybridArc<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "j".to_string()];
    header.extend(arc.labels().iter().map(|l| format!("pre_{l}")));
    header.extend(arc.labels().iter().map(|l| format!("post_{l}")));
    header.push("tag".into());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(2 * arc.dim() + 3);
    for jv in arc.jumps() {
        row.clear();
        row.push(fmt_float(jv.t));
        row.push(jv.j.to_string());
        row.extend(jv.pre.iter().map(|&v| fmt_float(v)));
        row.extend(jv.post.iter().map(|&v| fmt_float(v)));
        row.push(jv.tag.map(|t| t.name.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed contents of a trajectory CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvArc<T> {
    pub labels: Vec<String>,
    pub rows: Vec<(T, usize, Vec<T>)>,
}

pub fn read_arc_csv<T: Scalar, R: Read>(input: R) -> Result<CsvArc<T>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 2 || &header[0] != "t" || &header[1] != "j" {
        return Err(Error::Io("trajectory CSV must start with t,j".into()));
    }
    let labels: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let parse = |s: &str| -> Result<T> {
        s.parse::<T>()
            .map_err(|_| Error::Io(format!("bad float field {s:?}")))
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let t = parse(&rec[0])?;
        let j = rec[1]
            .parse::<usize>()
            .map_err(|_| Error::Io(format!("bad jump count {:?}", &rec[1])))?;
        let x = rec.iter().skip(2).map(parse).collect::<Result<Vec<T>>>()?;
        rows.push((t, j, x));
    }
    Ok(CsvArc { labels, rows })
}
