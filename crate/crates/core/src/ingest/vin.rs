use std::io::{Read, Write};

use crate::error::{Error, Result};

/// `prefix,vehicle_group` lookup used to map VINs to make-model groups.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VinTable {
    // sorted by descending prefix length, then lexically
    entries: Vec<(String, String)>,
}

impl VinTable {
    pub fn new(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut entries: Vec<_> = entries.into_iter().filter(|(p, _)| !p.is_empty()).collect();
        entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
        Self { entries }
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "prefix" || &headers[1] != "vehicle_group" {
            return Err(Error::MissingHeader("VIN table"));
        }
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            entries.push((rec[0].to_string(), rec[1].to_string()));
        }
        Ok(Self::new(entries))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["prefix", "vehicle_group"])?;
        for (p, g) in &self.entries {
            w.write_record([p, g])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn lookup(&self, vin: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(p, _)| vin.starts_with(p.as_str()))
            .map(|(_, g)| g.as_str())
    }
}

/// Longest-prefix match, falling back to `unknown_<WMI>`.
pub fn decode_vehicle_group(vin: &str, table: &VinTable) -> String {
    if let Some(g) = table.lookup(vin) {
        return g.to_string();
    }
    let wmi: String = vin.chars().take(3).collect();
    format!("unknown_{wmi}")
}
