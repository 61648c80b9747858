//! CSV ingestion and export.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::{Dataset, RelationData, RelationDef, SchemaDef};
use crate::error::{Error, Result};
use crate::value::Value;

/// Reads one relation from CSV text with a header row naming the attributes.
/// Columns may appear in any order; rows get ids `0..n` in file order.
pub fn read_csv_relation(reader: impl Read, def: &RelationDef, source: &str) -> Result<RelationData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Ingest(format!("{source}: header: {e}")))?
        .clone();
    let mut order = Vec::with_capacity(def.attributes.len());
    for a in &def.attributes {
        let pos = headers
            .iter()
            .position(|h| h.trim() == a.name)
            .ok_or_else(|| Error::Ingest(format!("{source}: header lacks attribute '{}'", a.name)))?;
        order.push(pos);
    }
    if headers.len() != def.attributes.len() {
        return Err(Error::Ingest(format!(
            "{source}: header has {} columns, '{}' declares {}",
            headers.len(),
            def.name,
            def.attributes.len()
        )));
    }
    let mut data = RelationData::empty(def.clone());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Ingest(format!("{source}: row {row}: {e}")))?;
        if rec.len() != def.attributes.len() {
            return Err(Error::Ingest(format!(
                "{source}: row {row}: expected {} fields, found {}",
                def.attributes.len(),
                rec.len()
            )));
        }
        let mut values = Vec::with_capacity(order.len());
        for (a, &pos) in def.attributes.iter().zip(&order) {
            let v = Value::parse_as(a.kind, &rec[pos])
                .map_err(|e| Error::Ingest(format!("{source}: row {row}, attribute '{}': {e}", a.name)))?;
            values.push(v);
        }
        data.push_row(values)?;
    }
    Ok(data)
}

pub fn load_csv_relation(path: &Path, def: &RelationDef) -> Result<RelationData> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    read_csv_relation(std::io::BufReader::new(file), def, &path.display().to_string())
}

/// Loads `<dir>/<relation>.csv` for every relation of the schema-def.
pub fn load_dataset(dir: &Path, schema: &SchemaDef) -> Result<Dataset> {
    let mut ds = Dataset::new(schema.clone());
    for def in &schema.relations {
        let data = load_csv_relation(&dir.join(format!("{}.csv", def.name)), def)?;
        ds.relations.insert(def.name.clone(), data);
    }
    if let Some(fact) = schema.fact() {
        for fk in &schema.foreign_keys {
            ds.fk_row_map(fk).map_err(|e| Error::Ingest(format!("{}: {e}", fact.name)))?;
        }
    }
    Ok(ds)
}

pub fn write_csv_relation(data: &RelationData, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Ingest(format!("writing {}: {e}", data.name()));
    w.write_record(data.def.attributes.iter().map(|a| a.name.as_str())).map_err(wrap)?;
    for row in 0..data.len() {
        w.write_record(data.columns.iter().map(|c| c[row].raw_string())).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", data.name()), e))
}

/// Writes every relation to `<dir>/<relation>.csv` and the schema-def to
/// `<dir>/schema.toml`.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    for data in ds.relations.values() {
        let path = dir.join(format!("{}.csv", data.name()));
        let file = std::fs::File::create(&path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        write_csv_relation(data, std::io::BufWriter::new(file))?;
    }
    let path = dir.join("schema.toml");
    std::fs::write(&path, ds.schema.to_toml()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
