//! Binary grid containers and CSV exports.
//!
//! Container layout (little-endian): 4-byte magic, `u32` version, `i64` a,
//! `i64` b, `f64` spacing, `f64` origin x, `f64` origin y, `u64` nx, `u64` ny,
//! `u32` singularity count then `(cx, cy, alpha, cap)` per singularity as
//! `f64`, `u32` extra count then that many `f64`, then `nx * ny` row-major
//! `f64` values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{FieldGrid, Singularity};
use crate::geometry::{CellMask, GridSpec, Point};
use crate::measure::{MeasureGrid, Normalization};
use crate::scalar::{lit, to_f64, Real};
use crate::voronoi::{Embedding, Tessellation, NO_SITE};

pub const FIELD_MAGIC: [u8; 4] = *b"LQGF";
pub const MEASURE_MAGIC: [u8; 4] = *b"LQGM";
pub const DISTANCE_MAGIC: [u8; 4] = *b"LQGD";
pub const FORMAT_VERSION: u32 = 1;

/// Decoded contents of a grid container.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub magic: [u8; 4],
    pub band_range: (i64, i64),
    pub grid: GridSpec<f64>,
    pub singularities: Vec<Singularity<f64>>,
    pub extras: Vec<f64>,
    pub values: Vec<f64>,
}

impl Container {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        if self.values.len() != self.grid.len() {
            return Err(Error::Shape { expected: self.grid.len(), found: self.values.len() });
        }
        let mut buf = Vec::with_capacity(96 + 8 * self.values.len());
        buf.extend_from_slice(&self.magic);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.band_range.0.to_le_bytes());
        buf.extend_from_slice(&self.band_range.1.to_le_bytes());
        for v in [self.grid.spacing, self.grid.origin.x, self.grid.origin.y] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(self.grid.nx as u64).to_le_bytes());
        buf.extend_from_slice(&(self.grid.ny as u64).to_le_bytes());
        buf.extend_from_slice(&(self.singularities.len() as u32).to_le_bytes());
        for s in &self.singularities {
            for v in [s.center.x, s.center.y, s.alpha, s.cap_radius] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf.extend_from_slice(&(self.extras.len() as u32).to_le_bytes());
        for v in &self.extras {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if ![FIELD_MAGIC, MEASURE_MAGIC, DISTANCE_MAGIC].contains(&magic) {
            return Err(Error::Format(format!("unknown magic {:?}", String::from_utf8_lossy(&magic))));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let a = read_i64(r)?;
        let b = read_i64(r)?;
        let spacing = read_f64(r)?;
        let ox = read_f64(r)?;
        let oy = read_f64(r)?;
        let nx = read_u64(r)? as usize;
        let ny = read_u64(r)? as usize;
        let grid = GridSpec::new(Point::new(ox, oy), spacing, nx, ny).map_err(|e| Error::Format(e.to_string()))?;
        let ns = read_u32(r)? as usize;
        let mut singularities = Vec::with_capacity(ns);
        for _ in 0..ns {
            let (cx, cy, alpha, cap) = (read_f64(r)?, read_f64(r)?, read_f64(r)?, read_f64(r)?);
            singularities.push(Singularity { center: Point::new(cx, cy), alpha, cap_radius: cap });
        }
        let ne = read_u32(r)? as usize;
        let extras = (0..ne).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        let mut raw = vec![0u8; 8 * grid.len()];
        r.read_exact(&mut raw).map_err(|_| Error::Format("truncated value block".into()))?;
        let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after value block".into()));
        }
        Ok(Container { magic, band_range: (a, b), grid, singularities, extras, values })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Container::read_from(&mut f)
    }

    fn expect(&self, magic: [u8; 4]) -> Result<()> {
        if self.magic != magic {
            return Err(Error::Format(format!(
                "expected {}, found {}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(&self.magic)
            )));
        }
        Ok(())
    }
}

fn read_bytes<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated header".into()))?;
    Ok(b)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_bytes(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_bytes(r)?))
}

fn read_i64(r: &mut impl Read) -> Result<i64> {
    Ok(i64::from_le_bytes(read_bytes(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_bytes(r)?))
}

fn grid_f64<T: Real>(g: &GridSpec<T>) -> GridSpec<f64> {
    GridSpec { origin: g.origin.cast(), spacing: to_f64(g.spacing), nx: g.nx, ny: g.ny }
}

fn grid_t<T: Real>(g: &GridSpec<f64>) -> GridSpec<T> {
    GridSpec { origin: g.origin.cast(), spacing: lit(g.spacing), nx: g.nx, ny: g.ny }
}

/// Field container; the normalisation shift is the single extra.
pub fn field_container<T: Real>(field: &FieldGrid<T>) -> Container {
    Container {
        magic: FIELD_MAGIC,
        band_range: field.band_range,
        grid: grid_f64(&field.grid),
        singularities: field
            .singularities
            .iter()
            .map(|s| Singularity { center: s.center.cast(), alpha: to_f64(s.alpha), cap_radius: to_f64(s.cap_radius) })
            .collect(),
        extras: vec![to_f64(field.shift)],
        values: field.values.iter().map(|&v| to_f64(v)).collect(),
    }
}

pub fn field_from_container<T: Real>(c: &Container) -> Result<FieldGrid<T>> {
    c.expect(FIELD_MAGIC)?;
    Ok(FieldGrid {
        grid: grid_t(&c.grid),
        values: c.values.iter().map(|&v| lit(v)).collect(),
        band_range: c.band_range,
        singularities: c
            .singularities
            .iter()
            .map(|s| Singularity { center: s.center.cast(), alpha: lit(s.alpha), cap_radius: lit(s.cap_radius) })
            .collect(),
        shift: lit(c.extras.first().copied().unwrap_or(0.0)),
    })
}

/// Measure container; extras are `(gamma, eps, normalization, margin)` with
/// normalization 0 for lqg and 1 for gmc.
pub fn measure_container<T: Real>(m: &MeasureGrid<T>, band_range: (i64, i64)) -> Container {
    let norm = match m.normalization {
        Normalization::Lqg => 0.0,
        Normalization::Gmc => 1.0,
    };
    Container {
        magic: MEASURE_MAGIC,
        band_range,
        grid: grid_f64(&m.grid),
        singularities: Vec::new(),
        extras: vec![to_f64(m.gamma), to_f64(m.eps), norm, m.margin as f64],
        values: m.masses.iter().map(|&v| to_f64(v)).collect(),
    }
}

pub fn measure_from_container<T: Real>(c: &Container) -> Result<MeasureGrid<T>> {
    c.expect(MEASURE_MAGIC)?;
    let [gamma, eps, norm, margin] = c.extras[..] else {
        return Err(Error::Format(format!("measure container needs 4 extras, found {}", c.extras.len())));
    };
    let normalization = if norm == 0.0 { Normalization::Lqg } else { Normalization::Gmc };
    MeasureGrid::from_masses(
        grid_t(&c.grid),
        c.values.iter().map(|&v| lit(v)).collect(),
        lit(gamma),
        lit(eps),
        normalization,
        margin as usize,
    )
}

/// Distance-field container; extras are `(source x, source y)`.
pub fn distance_container<T: Real>(grid: &GridSpec<T>, dist: &[T], source: Point<T>) -> Result<Container> {
    if dist.len() != grid.len() {
        return Err(Error::Shape { expected: grid.len(), found: dist.len() });
    }
    Ok(Container {
        magic: DISTANCE_MAGIC,
        band_range: (0, 0),
        grid: grid_f64(grid),
        singularities: Vec::new(),
        extras: vec![to_f64(source.x), to_f64(source.y)],
        values: dist.iter().map(|&v| to_f64(v)).collect(),
    })
}

/// Shortest round-trip decimal with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Writes a header and rows as comma-separated text.
pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `(x, y, value)` rows for every cell.
pub fn grid_values_csv<T: Real>(path: impl AsRef<Path>, grid: &GridSpec<T>, values: &[T], name: &str) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::Shape { expected: grid.len(), found: values.len() });
    }
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|i| {
            let p = grid.position_of(i);
            vec![fmt_f64(to_f64(p.x)), fmt_f64(to_f64(p.y)), fmt_f64(to_f64(values[i]))]
        })
        .collect();
    write_csv(path, &["x", "y", name], &rows)
}

pub fn measure_csv<T: Real>(path: impl AsRef<Path>, m: &MeasureGrid<T>) -> Result<()> {
    grid_values_csv(path, &m.grid, &m.masses, "mass")
}

/// `(x, y, value)` with value 1 for selected cells, selected cells only.
pub fn mask_csv<T: Real>(path: impl AsRef<Path>, mask: &CellMask<T>) -> Result<()> {
    let rows: Vec<Vec<String>> = mask
        .indices()
        .map(|i| {
            let p = mask.grid.position_of(i);
            vec![fmt_f64(to_f64(p.x)), fmt_f64(to_f64(p.y)), "1".into()]
        })
        .collect();
    write_csv(path, &["x", "y", "value"], &rows)
}

/// Writes `sites.csv`, `labels.csv`, `edges.csv` and, if given,
/// `embedding.csv` into `dir`.
pub fn tessellation_csv<T: Real>(dir: impl AsRef<Path>, tess: &Tessellation<T>, emb: Option<&Embedding>) -> Result<()> {
    let dir = dir.as_ref();
    let sites: Vec<Vec<String>> = tess
        .sites
        .iter()
        .enumerate()
        .map(|(i, p)| vec![i.to_string(), fmt_f64(to_f64(p.x)), fmt_f64(to_f64(p.y))])
        .collect();
    write_csv(dir.join("sites.csv"), &["id", "x", "y"], &sites)?;
    let labels: Vec<Vec<String>> = (0..tess.grid.len())
        .map(|i| {
            let (ix, iy) = tess.grid.coords(i);
            let l = tess.labels[i];
            vec![ix.to_string(), iy.to_string(), if l == NO_SITE { "-1".into() } else { l.to_string() }]
        })
        .collect();
    write_csv(dir.join("labels.csv"), &["ix", "iy", "site"], &labels)?;
    let edges: Vec<Vec<String>> = tess.edges().into_iter().map(|(i, j)| vec![i.to_string(), j.to_string()]).collect();
    write_csv(dir.join("edges.csv"), &["i", "j"], &edges)?;
    if let Some(e) = emb {
        let mut p_of = vec![f64::NAN; tess.sites.len()];
        for (j, &b) in tess.boundary_sites.iter().enumerate() {
            p_of[b] = e.p[j];
        }
        let rows: Vec<Vec<String>> = (0..tess.sites.len())
            .filter(|&i| tess.active[i])
            .map(|i| {
                vec![
                    i.to_string(),
                    fmt_f64(e.positions[i].x),
                    fmt_f64(e.positions[i].y),
                    (e.is_boundary[i] as u8).to_string(),
                    fmt_f64(p_of[i]),
                ]
            })
            .collect();
        write_csv(dir.join("embedding.csv"), &["id", "u", "v", "is_boundary", "p"], &rows)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{add_log_singularity, sample_star_field};
    use crate::geometry::Rect;

    #[test]
    fn field_round_trip() {
        let f = sample_star_field::<f64>(0, 2, Rect::centered(0.3), 0.01, 4).unwrap();
        let f = add_log_singularity(&f.shifted(0.25), Point::new(0.05, -0.02), 1.5, 0.02).unwrap();
        let c = field_container(&f);
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"LQGF");
        let back: FieldGrid<f64> = field_from_container(&Container::read_from(&mut buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back, f);
        let mut bad = buf.clone();
        bad.truncate(bad.len() - 3);
        assert!(matches!(Container::read_from(&mut bad.as_slice()), Err(Error::Format(_))));
        bad = buf.clone();
        bad[0] = b'X';
        assert!(Container::read_from(&mut bad.as_slice()).is_err());
    }

    #[test]
    fn measure_round_trip_and_magic_check() {
        let g = GridSpec::<f64>::square(0.5, 33).unwrap();
        let m = MeasureGrid::from_masses(g, (0..g.len()).map(|i| i as f64 * 1e-3).collect(), 1.2, 0.0625, Normalization::Gmc, 3).unwrap();
        let c = measure_container(&m, (0, 3));
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let c2 = Container::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(measure_from_container::<f64>(&c2).unwrap(), m);
        assert!(field_from_container::<f64>(&c2).is_err());
    }

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
