//! Catalog export as a SQL script for the reference DBMS, and the matching
//! parser used to check that the script carries every number of the store.

use std::fmt::Write as _;

use super::{AttributeCatalogRecord, CatalogStore, RelationCatalogRecord};
use crate::data::SchemaDef;
use crate::error::{Error, Result};
use crate::fragmodel::{PartitionSchema, RelationScheme};
use crate::value::{Kind, Value};

const MCV_KIND: u8 = 1;
const HISTOGRAM_KIND: u8 = 2;

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn array_literal(values: &[Value]) -> String {
    let items: Vec<String> = values
        .iter()
        .map(|v| {
            let raw = v.raw_string().replace('\\', "\\\\").replace('"', "\\\"");
            format!("\"{raw}\"")
        })
        .collect();
    format!("{{{}}}", items.join(","))
}

fn numbers_literal(freqs: &[f64]) -> String {
    let items: Vec<String> = freqs.iter().map(|f| f.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

fn check_clause(scheme: &RelationScheme, key_digits: &[u8]) -> Option<String> {
    let parts: Vec<String> = scheme
        .pset
        .iter()
        .zip(key_digits)
        .filter(|(_, d)| **d != 2)
        .map(|(p, d)| {
            let atom = format!("{} {} {}", p.attribute, p.op.symbol(), p.constant.sql_literal());
            if *d == 1 {
                atom
            } else {
                format!("NOT ({atom})")
            }
        })
        .collect();
    (!parts.is_empty()).then(|| parts.join(" AND "))
}

/// Per fragment: a CREATE TABLE with its check constraint, an UPDATE of the
/// relation catalog and one INSERT into the attribute statistics catalog
/// per attribute. One statement per line, ordered by fragment id then
/// attribute.
pub fn export_catalog_script(store: &CatalogStore, schema: &PartitionSchema, def: &SchemaDef) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "-- statistics epoch {}", store.epoch).unwrap();
    let mut fragments: Vec<(&str, &RelationScheme, &crate::fragmodel::Fragment)> = schema
        .relations
        .iter()
        .flat_map(|(r, s)| s.fragments.iter().map(move |f| (r.as_str(), s, f)))
        .collect();
    fragments.sort_by(|a, b| a.2.id.cmp(&b.2.id));
    for (rel, scheme, frag) in fragments {
        let rdef = def.require(rel)?;
        let record = store
            .relation(&frag.id)
            .ok_or_else(|| Error::Consistency(format!("no relation record for '{}'", frag.id)))?;
        let regclass = format!("{}::regclass", quote(&frag.id));
        let columns: Vec<String> = rdef
            .attributes
            .iter()
            .map(|a| format!("{} {}", a.name, a.kind.sql_type()))
            .collect();
        let check = if scheme.derived {
            writeln!(out, "-- {} is derived from its referenced dimension fragments", frag.id).unwrap();
            None
        } else {
            check_clause(scheme, frag.key.digits())
        };
        match check {
            Some(c) => writeln!(out, "CREATE TABLE {} ({}, CHECK ({c}));", frag.id, columns.join(", ")),
            None => writeln!(out, "CREATE TABLE {} ({});", frag.id, columns.join(", ")),
        }
        .unwrap();
        writeln!(
            out,
            "UPDATE pg_class SET relpages = {}, reltuples = {} WHERE oid = {regclass};",
            record.relpages, record.reltuples
        )
        .unwrap();
        for (name, a) in store.attributes.get(&frag.id).into_iter().flatten() {
            let kind = rdef
                .attribute(name)
                .ok_or_else(|| Error::Schema(format!("unknown attribute '{rel}.{name}'")))?
                .kind;
            let ty = kind.sql_type();
            let mut cols = vec!["starelid", "staattnum", "stainherit", "stanullfrac", "stawidth", "stadistinct"];
            let mut vals = vec![
                regclass.clone(),
                "attnum".to_string(),
                "false".to_string(),
                "0".to_string(),
                a.width.to_string(),
                a.stadistinct.to_string(),
            ];
            let mut slot = 1;
            let mut push_slot = |kind_code: u8, op: &str, numbers: Option<String>, values: String, cols: &mut Vec<&str>, vals: &mut Vec<String>| {
                let names: [&'static str; 4] = match slot {
                    1 => ["stakind1", "staop1", "stanumbers1", "stavalues1"],
                    _ => ["stakind2", "staop2", "stanumbers2", "stavalues2"],
                };
                cols.push(names[0]);
                vals.push(kind_code.to_string());
                cols.push(names[1]);
                vals.push(format!("'{op}({ty},{ty})'::regoperator"));
                if let Some(n) = numbers {
                    cols.push(names[2]);
                    vals.push(format!("{}::real[]", quote(&n)));
                }
                cols.push(names[3]);
                vals.push(format!("array_in({}, {}::regtype, -1)", quote(&values), quote(ty)));
                slot += 1;
            };
            if !a.mcv_values.is_empty() {
                push_slot(
                    MCV_KIND,
                    "=",
                    Some(numbers_literal(&a.mcv_freqs)),
                    array_literal(&a.mcv_values),
                    &mut cols,
                    &mut vals,
                );
            }
            if let Some(h) = &a.histogram {
                push_slot(HISTOGRAM_KIND, "<", None, array_literal(h), &mut cols, &mut vals);
            }
            writeln!(
                out,
                "INSERT INTO pg_statistic ({}) SELECT {} FROM pg_attribute WHERE attrelid = {regclass} AND attname = {};",
                cols.join(", "),
                vals.join(", "),
                quote(name)
            )
            .unwrap();
        }
    }
    Ok(out)
}

/// Splits on commas outside quotes and parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut in_quote, mut start) = (0i32, false, 0usize);
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\'' if in_quote && bytes.get(i + 1) == Some(&b'\'') => i += 1,
            b'\'' => in_quote = !in_quote,
            b'(' if !in_quote => depth += 1,
            b')' if !in_quote => depth -= 1,
            b',' if !in_quote && depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    parts.push(s[start..].trim());
    parts
}

/// Content of the first single-quoted string in `s`, unescaped.
fn first_quoted(s: &str) -> Result<String> {
    let start = s.find('\'').ok_or_else(|| bad(s))?;
    let mut out = String::new();
    let mut chars = s[start + 1..].chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\'' {
            if chars.peek() == Some(&'\'') {
                chars.next();
                out.push('\'');
            } else {
                return Ok(out);
            }
        } else {
            out.push(c);
        }
    }
    Err(bad(s))
}

fn bad(s: &str) -> Error {
    Error::Parse {
        line: 0,
        column: 0,
        message: format!("malformed catalog statement near '{}'", s.chars().take(60).collect::<String>()),
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| bad(s))
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim().parse().map_err(|_| bad(s))
}

fn parse_array(lit: &str) -> Result<Vec<String>> {
    let inner = lit
        .strip_prefix('{')
        .and_then(|l| l.strip_suffix('}'))
        .ok_or_else(|| bad(lit))?;
    let mut out = Vec::new();
    let mut chars = inner.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                let mut item = String::new();
                loop {
                    match chars.next().ok_or_else(|| bad(lit))? {
                        '\\' => item.push(chars.next().ok_or_else(|| bad(lit))?),
                        '"' => break,
                        other => item.push(other),
                    }
                }
                out.push(item);
            }
            ',' => {}
            _ => {
                let mut item = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n == ',' {
                        break;
                    }
                    item.push(n);
                    chars.next();
                }
                out.push(item);
            }
        }
    }
    Ok(out)
}

fn kind_from_sql(ty: &str) -> Result<Kind> {
    [Kind::Integer, Kind::Decimal, Kind::Date, Kind::Text]
        .into_iter()
        .find(|k| k.sql_type() == ty)
        .ok_or_else(|| bad(ty))
}

fn parse_values(item: &str) -> Result<Vec<Value>> {
    // array_in('<literal>', '<type>'::regtype, -1)
    let args = item
        .trim()
        .strip_prefix("array_in(")
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| bad(item))?;
    let parts = split_top_level(args);
    if parts.len() != 3 {
        return Err(bad(item));
    }
    let kind = kind_from_sql(&first_quoted(parts[1])?)?;
    parse_array(&first_quoted(parts[0])?)?
        .iter()
        .map(|raw| Value::parse_as(kind, raw).map_err(|_| bad(raw)))
        .collect()
}

/// Rebuilds a store from an exported script.
pub fn parse_catalog_script(text: &str) -> Result<CatalogStore> {
    let mut store = CatalogStore::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        let at_line = |e: Error| match e {
            Error::Parse { message, .. } => Error::Parse {
                line: lineno + 1,
                column: 1,
                message,
            },
            other => other,
        };
        if let Some(epoch) = line.strip_prefix("-- statistics epoch ") {
            store.epoch = parse_u64(epoch).map_err(at_line)?;
        } else if line.starts_with("UPDATE pg_class") {
            parse_update(line, &mut store).map_err(at_line)?;
        } else if line.starts_with("INSERT INTO pg_statistic") {
            parse_insert(line, &mut store).map_err(at_line)?;
        }
    }
    Ok(store)
}

fn parse_update(line: &str, store: &mut CatalogStore) -> Result<()> {
    let set = line
        .strip_prefix("UPDATE pg_class SET ")
        .and_then(|s| s.split_once(" WHERE oid = "))
        .ok_or_else(|| bad(line))?;
    let fragment = first_quoted(set.1)?;
    let mut relpages = None;
    let mut reltuples = None;
    for assign in set.0.split(',') {
        let (k, v) = assign.split_once('=').ok_or_else(|| bad(line))?;
        match k.trim() {
            "relpages" => relpages = Some(parse_u64(v)?),
            "reltuples" => reltuples = Some(parse_u64(v)?),
            _ => return Err(bad(line)),
        }
    }
    let relation = fragment
        .rsplit_once("__")
        .map(|(r, _)| r.to_string())
        .ok_or_else(|| bad(line))?;
    store.relations.insert(
        fragment.clone(),
        RelationCatalogRecord {
            fragment,
            relation,
            reltuples: reltuples.ok_or_else(|| bad(line))?,
            relpages: relpages.ok_or_else(|| bad(line))?,
        },
    );
    Ok(())
}

fn parse_insert(line: &str, store: &mut CatalogStore) -> Result<()> {
    let rest = line.strip_prefix("INSERT INTO pg_statistic (").ok_or_else(|| bad(line))?;
    let (cols, rest) = rest.split_once(") SELECT ").ok_or_else(|| bad(line))?;
    let (vals, cond) = rest
        .split_once(" FROM pg_attribute WHERE attrelid = ")
        .ok_or_else(|| bad(line))?;
    let (rel_part, attr_part) = cond.split_once(" AND attname = ").ok_or_else(|| bad(line))?;
    let fragment = first_quoted(rel_part)?;
    let attribute = first_quoted(attr_part)?;
    let cols: Vec<&str> = cols.split(',').map(str::trim).collect();
    let vals = split_top_level(vals);
    if cols.len() != vals.len() {
        return Err(bad(line));
    }
    let mut rec = AttributeCatalogRecord {
        fragment: fragment.clone(),
        attribute: attribute.clone(),
        stadistinct: 0.0,
        width: 0.0,
        mcv_values: Vec::new(),
        mcv_freqs: Vec::new(),
        histogram: None,
    };
    let mut kinds = [0u8; 2];
    let mut numbers: [Option<Vec<f64>>; 2] = [None, None];
    let mut values: [Option<Vec<Value>>; 2] = [None, None];
    for (c, v) in cols.iter().zip(&vals) {
        let slot = c.chars().last().and_then(|d| d.to_digit(10)).map(|d| d as usize - 1);
        match (c.trim_end_matches(char::is_numeric), slot) {
            ("stawidth", _) => rec.width = parse_f64(v)?,
            ("stadistinct", _) => rec.stadistinct = parse_f64(v)?,
            ("stakind", Some(s)) if s < 2 => kinds[s] = parse_u64(v)? as u8,
            ("stanumbers", Some(s)) if s < 2 => {
                numbers[s] = Some(
                    parse_array(&first_quoted(v)?)?
                        .iter()
                        .map(|n| parse_f64(n))
                        .collect::<Result<_>>()?,
                )
            }
            ("stavalues", Some(s)) if s < 2 => values[s] = Some(parse_values(v)?),
            _ => {}
        }
    }
    for s in 0..2 {
        match kinds[s] {
            MCV_KIND => {
                rec.mcv_values = values[s].take().ok_or_else(|| bad(line))?;
                rec.mcv_freqs = numbers[s].take().ok_or_else(|| bad(line))?;
            }
            HISTOGRAM_KIND => rec.histogram = Some(values[s].take().ok_or_else(|| bad(line))?),
            _ => {}
        }
    }
    store.attributes.entry(fragment).or_default().insert(attribute, rec);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn array_literals_round_trip() {
        let vals = vec![
            Value::Text("a,b".into()),
            Value::Text("say \"hi\"".into()),
            Value::Text("it's".into()),
        ];
        let lit = array_literal(&vals);
        let parsed = parse_array(&lit).unwrap();
        assert_eq!(parsed, vec!["a,b", "say \"hi\"", "it's"]);
        assert_eq!(split_top_level("a, 'x,y', f(1, 2)"), vec!["a", "'x,y'", "f(1, 2)"]);
    }
}
