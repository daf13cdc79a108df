//! Snapshot CSVs: `(r, v, f)` for distributions, `(r, rho, u, s)` for
//! hydrodynamic fields. Floats are written in shortest round-trip form, so
//! reading a snapshot back restores the values bit for bit.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{DistFn, HydroFields, PhaseGrid, ScalarField};
use crate::scalar::Real;

pub(crate) fn fmt<T: Real>(x: T) -> String {
    format!("{:e}", x.as_f64())
}

fn parse<T: Real>(s: &str, line: usize, column: &str) -> Result<T> {
    s.trim()
        .parse::<f64>()
        .map(T::of)
        .map_err(|e| Error::Config(format!("snapshot line {line}, column `{column}`: {e}")))
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Config(format!(
            "snapshot header {:?}, expected {:?}",
            got, expected
        )));
    }
    Ok(())
}

fn check_coordinate<T: Real>(got: T, want: T, scale: T, what: &str, line: usize) -> Result<()> {
    if (got - want).abs() > T::of(1e-9) * scale {
        return Err(Error::Config(format!(
            "snapshot line {line}: {what} = {got} does not match grid value {want}"
        )));
    }
    Ok(())
}

pub fn write_distribution<T: Real>(f: &DistFn<T>, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["r", "v", "f"])?;
    let g = f.grid();
    for i in 0..g.n_r() {
        for j in 0..g.n_v() {
            w.write_record([fmt(g.r(i)), fmt(g.v(j)), fmt(f.at(i, j))])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an `(r, v, f)` snapshot written for `grid`.
pub fn read_distribution<T: Real>(grid: &Arc<PhaseGrid<T>>, reader: impl Read) -> Result<DistFn<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, &["r", "v", "f"])?;
    let mut values = Vec::with_capacity(grid.len());
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if k >= grid.len() {
            return Err(Error::Shape {
                context: "read_distribution",
                expected: grid.len(),
                got: k + 1,
            });
        }
        let (i, j) = (k / grid.n_v(), k % grid.n_v());
        let field = |c: usize, name: &str| parse::<T>(rec.get(c).unwrap_or(""), line, name);
        check_coordinate(field(0, "r")?, grid.r(i), grid.length_r(), "r", line)?;
        check_coordinate(field(1, "v")?, grid.v(j), grid.v_max(), "v", line)?;
        values.push(field(2, "f")?);
    }
    DistFn::from_values(grid, values)
}

pub fn write_hydro<T: Real>(fields: &HydroFields<T>, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["r", "rho", "u", "s"])?;
    let g = fields.rho.grid();
    for i in 0..g.n_r() {
        w.write_record([
            fmt(g.r(i)),
            fmt(fields.rho.values()[i]),
            fmt(fields.u.values()[i]),
            fmt(fields.s.values()[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_hydro<T: Real>(grid: &Arc<PhaseGrid<T>>, reader: impl Read) -> Result<HydroFields<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, &["r", "rho", "u", "s"])?;
    let mut cols: [Vec<T>; 3] = Default::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if i >= grid.n_r() {
            return Err(Error::Shape {
                context: "read_hydro",
                expected: grid.n_r(),
                got: i + 1,
            });
        }
        let field = |c: usize, name: &str| parse::<T>(rec.get(c).unwrap_or(""), line, name);
        check_coordinate(field(0, "r")?, grid.r(i), grid.length_r(), "r", line)?;
        for (c, (col, name)) in cols.iter_mut().zip(["rho", "u", "s"]).enumerate() {
            col.push(field(c + 1, name)?);
        }
    }
    let [rho, u, s] = cols;
    Ok(HydroFields {
        rho: ScalarField::from_values(grid, rho)?,
        u: ScalarField::from_values(grid, u)?,
        s: ScalarField::from_values(grid, s)?,
    })
}

pub fn save_distribution<T: Real>(f: &DistFn<T>, path: &Path) -> Result<()> {
    write_distribution(f, std::fs::File::create(path)?)
}

pub fn load_distribution<T: Real>(grid: &Arc<PhaseGrid<T>>, path: &Path) -> Result<DistFn<T>> {
    read_distribution(grid, std::fs::File::open(path)?)
}

pub fn save_hydro<T: Real>(fields: &HydroFields<T>, path: &Path) -> Result<()> {
    write_hydro(fields, std::fs::File::create(path)?)
}

pub fn load_hydro<T: Real>(grid: &Arc<PhaseGrid<T>>, path: &Path) -> Result<HydroFields<T>> {
    read_hydro(grid, std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_round_trip_is_exact() {
        let grid = PhaseGrid::<f64>::new(5, 7, 2.0, 3.0).unwrap();
        let f = DistFn::from_fn(&grid, |r, v| (r * 1.7).sin() * (-v * v).exp() / 3.0);
        let mut buf = Vec::new();
        write_distribution(&f, &mut buf).unwrap();
        let back = read_distribution(&grid, buf.as_slice()).unwrap();
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn hydro_round_trip_is_exact() {
        let grid = PhaseGrid::<f64>::new(6, 4, 1.0, 3.0).unwrap();
        let h = HydroFields {
            rho: ScalarField::from_fn(&grid, |r| 1.0 + r / 3.0),
            u: ScalarField::from_fn(&grid, |r| -r * 0.1),
            s: ScalarField::from_fn(&grid, |r| r.exp()),
        };
        let mut buf = Vec::new();
        write_hydro(&h, &mut buf).unwrap();
        let back = read_hydro(&grid, buf.as_slice()).unwrap();
        assert_eq!(back.rho.values(), h.rho.values());
        assert_eq!(back.u.values(), h.u.values());
        assert_eq!(back.s.values(), h.s.values());
    }

    #[test]
    fn wrong_grid_is_rejected() {
        let grid = PhaseGrid::<f64>::new(5, 7, 2.0, 3.0).unwrap();
        let other = PhaseGrid::<f64>::new(5, 7, 2.0, 4.0).unwrap();
        let mut buf = Vec::new();
        write_distribution(&DistFn::zeros(&grid), &mut buf).unwrap();
        assert!(read_distribution(&other, buf.as_slice()).is_err());
        let bad = b"r,v,g\n0,0,1\n";
        assert!(read_distribution(&grid, &bad[..]).is_err());
    }
}
