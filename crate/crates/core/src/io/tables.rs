use std::io::{Read, Write};

use ndarray::Array2;

use super::fmt_f64;
use crate::error::{Error, Result};
use crate::sim::TradeoffPoint;
use crate::stefan::{GridSpec, ValueFunctionGrid};

pub const TRADEOFF_HEADER: [&str; 7] = ["h_avg", "J_H", "J_z", "stderr", "n_samples", "scheme", "param"];

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Io(format!("not a number: {s:?}")))
}

/// Header block of `# key,values…` lines, then one CSV row of V per x₁ index.
pub fn write_grid_csv<W: Write>(mut w: W, grid: &ValueFunctionGrid) -> Result<()> {
    let s = &grid.spec;
    let nn = s.n_nodes();
    let dx = s.dx();
    let header = [
        format!("# n_nodes,{},{}", nn[0], nn[1]),
        format!("# half_width,{},{}", fmt_f64(s.half_width[0]), fmt_f64(s.half_width[1])),
        format!("# dx,{},{}", fmt_f64(dx[0]), fmt_f64(dx[1])),
        format!("# dt,{}", fmt_f64(s.dt)),
        format!("# stationarity_tol,{}", fmt_f64(s.stationarity_tol)),
        format!("# max_steps,{}", s.max_steps),
        format!("# J,{}", fmt_f64(grid.j)),
        format!("# rho_effective,{}", fmt_f64(grid.rho_effective)),
    ];
    for line in header {
        writeln!(w, "{line}").map_err(io_err)?;
    }
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in grid.v.rows() {
        out.write_record(row.iter().map(|&v| fmt_f64(v))).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_grid_csv<R: Read>(mut r: R) -> Result<ValueFunctionGrid> {
    let mut text = String::new();
    r.read_to_string(&mut text).map_err(io_err)?;
    let mut fields = std::collections::HashMap::new();
    for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
        let mut parts = line.trim().split(',');
        let key = parts.next().unwrap_or_default().to_string();
        fields.insert(key, parts.map(str::to_string).collect::<Vec<_>>());
    }
    let get = |k: &str, i: usize| -> Result<&str> {
        fields
            .get(k)
            .and_then(|v| v.get(i))
            .map(String::as_str)
            .ok_or_else(|| Error::Io(format!("grid header is missing {k}")))
    };
    let to_usize =
        |s: &str| s.trim().parse::<usize>().map_err(|_| Error::Io(format!("not an integer: {s:?}")));
    let nn = [to_usize(get("n_nodes", 0)?)?, to_usize(get("n_nodes", 1)?)?];
    let spec = GridSpec {
        half_width: [parse_f64(get("half_width", 0)?)?, parse_f64(get("half_width", 1)?)?],
        n_cells: [nn[0].saturating_sub(1), nn[1].saturating_sub(1)],
        dt: parse_f64(get("dt", 0)?)?,
        stationarity_tol: parse_f64(get("stationarity_tol", 0)?)?,
        max_steps: to_usize(get("max_steps", 0)?)?,
    };
    let j = parse_f64(get("J", 0)?)?;

    let mut rd =
        csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_reader(text.as_bytes());
    let mut values = Vec::with_capacity(nn[0] * nn[1]);
    for rec in rd.records() {
        let rec = rec.map_err(io_err)?;
        if rec.len() != nn[1] {
            return Err(Error::Io(format!("grid row has {} values, expected {}", rec.len(), nn[1])));
        }
        for f in rec.iter() {
            values.push(parse_f64(f)?);
        }
    }
    let v = Array2::from_shape_vec((nn[0], nn[1]), values).map_err(io_err)?;
    ValueFunctionGrid::from_values(spec, v, j)
}

pub fn write_polyline_csv<W: Write>(w: W, points: &[[f64; 2]]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x1", "x2"]).map_err(io_err)?;
    for p in points {
        out.write_record([fmt_f64(p[0]), fmt_f64(p[1])]).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_polyline_csv<R: Read>(r: R) -> Result<Vec<[f64; 2]>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut pts = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(io_err)?;
        if rec.len() != 2 {
            return Err(Error::Io("polyline rows need two columns".into()));
        }
        pts.push([parse_f64(&rec[0])?, parse_f64(&rec[1])?]);
    }
    Ok(pts)
}

pub fn write_tradeoff_csv<W: Write>(w: W, points: &[TradeoffPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRADEOFF_HEADER).map_err(io_err)?;
    for p in points {
        out.write_record([
            fmt_f64(p.h_avg),
            fmt_f64(p.j_h_hat),
            fmt_f64(p.j_z_hat),
            fmt_f64(p.stderr),
            p.n_samples.to_string(),
            p.scheme.clone(),
            fmt_f64(p.param),
        ])
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_tradeoff_csv<R: Read>(r: R) -> Result<Vec<TradeoffPoint>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(io_err)?.clone();
    if header.iter().ne(TRADEOFF_HEADER) {
        return Err(Error::Io(format!("unexpected trade-off header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(io_err)?;
        if rec.len() != TRADEOFF_HEADER.len() {
            return Err(Error::Io("trade-off row has the wrong number of columns".into()));
        }
        out.push(TradeoffPoint {
            h_avg: parse_f64(&rec[0])?,
            j_h_hat: parse_f64(&rec[1])?,
            j_z_hat: parse_f64(&rec[2])?,
            stderr: parse_f64(&rec[3])?,
            n_samples: rec[4].trim().parse().map_err(io_err)?,
            scheme: rec[5].to_string(),
            param: parse_f64(&rec[6])?,
        });
    }
    Ok(out)
}
