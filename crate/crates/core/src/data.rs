//! Relation definitions and in-memory columnar relation data.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value::{Kind, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub kind: Kind,
    /// Declared fixed width in bytes; absent means the kind's default
    /// (variable-length for text).
    #[serde(default)]
    pub width: Option<u32>,
}

impl AttributeDef {
    pub fn new(name: impl Into<String>, kind: Kind) -> Self {
        AttributeDef {
            name: name.into(),
            kind,
            width: None,
        }
    }

    pub fn fixed_width(&self) -> Option<u32> {
        self.width.or_else(|| self.kind.fixed_width())
    }

    pub fn is_variable(&self) -> bool {
        self.fixed_width().is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Fact,
    Dimension,
    #[default]
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDef {
    pub name: String,
    #[serde(default)]
    pub role: Role,
    #[serde(default)]
    pub primary_key: Vec<String>,
    #[serde(rename = "attribute")]
    pub attributes: Vec<AttributeDef>,
}

impl RelationDef {
    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn all_fixed(&self) -> bool {
        self.attributes.iter().all(|a| !a.is_variable())
    }

    /// The single-attribute primary key, if the relation has one.
    pub fn single_pk(&self) -> Option<&str> {
        match self.primary_key.as_slice() {
            [only] => Some(only.as_str()),
            _ => None,
        }
    }
}

/// Foreign-key edge from the fact relation to one dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForeignKey {
    pub fact_attribute: String,
    pub dimension: String,
    pub dimension_key: String,
}

/// Parsed schema-def file: relations plus optional star roles and FK edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDef {
    #[serde(rename = "relation")]
    pub relations: Vec<RelationDef>,
    #[serde(default, rename = "foreign_key")]
    pub foreign_keys: Vec<ForeignKey>,
}

impl SchemaDef {
    pub fn relation(&self, name: &str) -> Option<&RelationDef> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&RelationDef> {
        self.relation(name)
            .ok_or_else(|| Error::Schema(format!("unknown relation '{name}'")))
    }

    pub fn kind_of(&self, relation: &str, attribute: &str) -> Option<Kind> {
        self.relation(relation)?.attribute(attribute).map(|a| a.kind)
    }

    pub fn fact(&self) -> Option<&RelationDef> {
        self.relations.iter().find(|r| r.role == Role::Fact)
    }

    pub fn from_toml(text: &str) -> Result<SchemaDef> {
        let def: SchemaDef =
            toml::from_str(text).map_err(|e| Error::Config(format!("schema-def: {e}")))?;
        def.check()?;
        Ok(def)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("schema-def serializes")
    }

    pub fn load(path: &Path) -> Result<SchemaDef> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        SchemaDef::from_toml(&text)
    }

    /// Structural checks: unique names, PK attributes exist, FK edges resolve.
    pub fn check(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for rel in &self.relations {
            if seen.insert(rel.name.as_str(), ()).is_some() {
                return Err(Error::Schema(format!("duplicate relation '{}'", rel.name)));
            }
            let mut attrs = BTreeMap::new();
            for a in &rel.attributes {
                if attrs.insert(a.name.as_str(), ()).is_some() {
                    return Err(Error::Schema(format!(
                        "duplicate attribute '{}.{}'",
                        rel.name, a.name
                    )));
                }
            }
            for pk in &rel.primary_key {
                if rel.attribute(pk).is_none() {
                    return Err(Error::Schema(format!(
                        "primary key attribute '{}.{pk}' not declared",
                        rel.name
                    )));
                }
            }
        }
        let facts = self
            .relations
            .iter()
            .filter(|r| r.role == Role::Fact)
            .count();
        if facts > 1 {
            return Err(Error::Schema("more than one fact relation".into()));
        }
        if !self.foreign_keys.is_empty() {
            let fact = self
                .fact()
                .ok_or_else(|| Error::Schema("foreign keys declared without a fact".into()))?;
            let mut dims = BTreeMap::new();
            for fk in &self.foreign_keys {
                if fact.attribute(&fk.fact_attribute).is_none() {
                    return Err(Error::Schema(format!(
                        "foreign key attribute '{}.{}' not declared",
                        fact.name, fk.fact_attribute
                    )));
                }
                let dim = self.require(&fk.dimension)?;
                if dim.single_pk() != Some(fk.dimension_key.as_str()) {
                    return Err(Error::Schema(format!(
                        "foreign key must reference the single-attribute primary key of '{}'",
                        dim.name
                    )));
                }
                if dims.insert(fk.dimension.as_str(), ()).is_some() {
                    return Err(Error::Schema(format!(
                        "dimension '{}' referenced by more than one foreign key",
                        fk.dimension
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Columnar relation contents with stable row ids `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationData {
    pub def: RelationDef,
    pub columns: Vec<Vec<Value>>,
}

impl RelationData {
    pub fn empty(def: RelationDef) -> Self {
        let columns = vec![Vec::new(); def.attributes.len()];
        RelationData { def, columns }
    }

    pub fn name(&self) -> &str {
        &self.def.name
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, attribute: &str) -> Option<&[Value]> {
        self.def
            .attribute_index(attribute)
            .map(|i| self.columns[i].as_slice())
    }

    /// Append a row, checking arity and kinds.
    pub fn push_row(&mut self, row: Vec<Value>) -> Result<()> {
        if row.len() != self.def.attributes.len() {
            return Err(Error::Ingest(format!(
                "{}: expected {} values, got {}",
                self.def.name,
                self.def.attributes.len(),
                row.len()
            )));
        }
        for (v, a) in row.iter().zip(&self.def.attributes) {
            if v.kind() != a.kind {
                return Err(Error::Ingest(format!(
                    "{}.{}: expected {}, got {}",
                    self.def.name,
                    a.name,
                    a.kind,
                    v.kind()
                )));
            }
        }
        for (col, v) in self.columns.iter_mut().zip(row) {
            col.push(v);
        }
        Ok(())
    }

    pub fn row(&self, id: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c[id].clone()).collect()
    }

    /// Row id lookup on a single-attribute key.
    pub fn key_index(&self, attribute: &str) -> Result<HashMap<Value, u32>> {
        let col = self.column(attribute).ok_or_else(|| {
            Error::Schema(format!("unknown attribute '{}.{attribute}'", self.def.name))
        })?;
        let mut map = HashMap::with_capacity(col.len());
        for (i, v) in col.iter().enumerate() {
            if map.insert(v.clone(), i as u32).is_some() {
                return Err(Error::Ingest(format!(
                    "duplicate key {v} in '{}.{attribute}'",
                    self.def.name
                )));
            }
        }
        Ok(map)
    }
}

/// All relations of one schema-def.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: SchemaDef,
    pub relations: BTreeMap<String, RelationData>,
}

impl Dataset {
    pub fn new(schema: SchemaDef) -> Self {
        let relations = schema
            .relations
            .iter()
            .map(|r| (r.name.clone(), RelationData::empty(r.clone())))
            .collect();
        Dataset { schema, relations }
    }

    pub fn relation(&self, name: &str) -> Result<&RelationData> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::Schema(format!("unknown relation '{name}'")))
    }

    /// For star schemas: maps each fact row to the referenced dimension row.
    pub fn fk_row_map(&self, fk: &ForeignKey) -> Result<Vec<u32>> {
        let fact = self.schema.fact().ok_or_else(|| {
            Error::Schema("foreign key resolution requires a fact relation".into())
        })?;
        let fact_data = self.relation(&fact.name)?;
        let dim = self.relation(&fk.dimension)?;
        let index = dim.key_index(&fk.dimension_key)?;
        let col = fact_data.column(&fk.fact_attribute).ok_or_else(|| {
            Error::Schema(format!("unknown attribute '{}'", fk.fact_attribute))
        })?;
        col.iter()
            .enumerate()
            .map(|(row, v)| {
                index.get(v).copied().ok_or_else(|| {
                    Error::Ingest(format!(
                        "{} row {row}: dangling foreign key {v} into '{}'",
                        fact.name, fk.dimension
                    ))
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEF: &str = r#"
[[relation]]
name = "r"
primary_key = ["id"]
[[relation.attribute]]
name = "id"
kind = "integer"
[[relation.attribute]]
name = "label"
kind = "text"
"#;

    #[test]
    fn parses_schema_def() {
        let def = SchemaDef::from_toml(DEF).unwrap();
        let r = def.relation("r").unwrap();
        assert_eq!(r.attributes.len(), 2);
        assert!(r.attributes[1].is_variable());
        assert!(!r.all_fixed());
        assert_eq!(def.kind_of("r", "id"), Some(Kind::Integer));
        let again = SchemaDef::from_toml(&def.to_toml()).unwrap();
        assert_eq!(again, def);
    }

    #[test]
    fn push_row_checks_kinds() {
        let def = SchemaDef::from_toml(DEF).unwrap();
        let mut data = RelationData::empty(def.relations[0].clone());
        data.push_row(vec![Value::Integer(1), Value::Text("a".into())])
            .unwrap();
        assert!(data
            .push_row(vec![Value::Text("x".into()), Value::Text("a".into())])
            .is_err());
        assert!(data.push_row(vec![Value::Integer(1)]).is_err());
        assert_eq!(data.len(), 1);
    }

    #[test]
    fn rejects_bad_foreign_key() {
        let text = format!(
            "{DEF}\n[[relation]]\nname = \"f\"\nrole = \"fact\"\n[[relation.attribute]]\nname = \"rid\"\nkind = \"integer\"\n[[foreign_key]]\nfact_attribute = \"rid\"\ndimension = \"r\"\ndimension_key = \"label\"\n"
        );
        assert!(SchemaDef::from_toml(&text).is_err());
    }
}
