use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use super::domain::Domain;
use crate::error::Result;

/// Field values on the sites of a domain; exterior sites carry `exterior`.
#[derive(Clone, Debug)]
pub struct FieldSample {
    domain: Arc<Domain>,
    values: Vec<f64>,
    exterior: f64,
}

impl FieldSample {
    pub fn new(domain: Arc<Domain>, values: Vec<f64>, exterior: f64) -> Self {
        assert_eq!(domain.len(), values.len(), "one value per site");
        Self {
            domain,
            values,
            exterior,
        }
    }

    /// Evaluates `f` at every site.
    pub fn from_fn(domain: Arc<Domain>, exterior: f64, f: impl Fn(&[i64]) -> f64) -> Self {
        let values = domain.sites().iter().map(|x| f(x)).collect();
        Self {
            domain,
            values,
            exterior,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn domain_arc(&self) -> Arc<Domain> {
        self.domain.clone()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn exterior(&self) -> f64 {
        self.exterior
    }

    /// Value at any lattice site, the exterior datum off the domain.
    pub fn at(&self, x: &[i64]) -> f64 {
        self.domain
            .index_of(x)
            .map_or(self.exterior, |k| self.values[k])
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        write_f64_le(path, &self.values)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_site_csv(path, self.domain.sites(), &self.values, "value")
    }
}

/// Little-endian 64-bit floats, one per site in the domain's row-major order.
pub fn write_f64_le(path: &Path, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_f64_le(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// CSV with columns `x0..x{d-1}` and `column`.
pub fn write_site_csv(path: &Path, sites: &[Vec<i64>], values: &[f64], column: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = sites.first().map_or(0, |x| x.len());
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.push(column.to_string());
    w.write_record(&header)?;
    for (x, v) in sites.iter().zip(values) {
        let mut rec: Vec<String> = x.iter().map(|c| c.to_string()).collect();
        rec.push(v.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Green column export: same binary/CSV layout as field samples.
pub fn write_green_column(dir: &Path, stem: &str, domain: &Domain, column: &[f64]) -> Result<()> {
    write_f64_le(&dir.join(format!("{stem}.bin")), column)?;
    write_site_csv(
        &dir.join(format!("{stem}.csv")),
        domain.sites(),
        column,
        "green",
    )?;
    let mut f = std::fs::File::create(dir.join(format!("{stem}.shape")))?;
    writeln!(f, "{} {}", domain.len(), domain.dim())?;
    Ok(())
}
