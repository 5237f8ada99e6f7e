//! Field schema registry.
//!
//! A [`Schema`] is the single versioned artifact that governs extraction,
//! normalization and export. Every field carries a trust class: interpretive
//! fields need mandatory human review, quantitative fields are extracted
//! automatically and only edited on demand.

mod defaults;

use std::collections::{BTreeMap, HashMap};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use defaults::{default_schema, default_schema_document, DEFAULT_SCHEMA_ID, INTERPRETIVE_FIELD_IDS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("schema file could not be parsed: {0}")]
    SchemaParse(String),
    #[error("schema declares no fields")]
    SchemaEmpty,
    #[error("duplicate field id `{0}`")]
    DuplicateFieldId(String),
    #[error("invalid field spec `{field_id}`: {reason}")]
    InvalidFieldSpec { field_id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustClass {
    Interpretive,
    Quantitative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Categorical,
    Numeric,
    Boolean,
    Text,
}

/// Canonical measurement units. Lengths are stored in millimetres and
/// volumes in millilitres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalUnit {
    Millimetre,
    Millilitre,
}

impl CanonicalUnit {
    pub fn token(self) -> &'static str {
        match self {
            CanonicalUnit::Millimetre => "millimetre",
            CanonicalUnit::Millilitre => "millilitre",
        }
    }

    /// Short suffix used in export column headers.
    pub fn suffix(self) -> &'static str {
        match self {
            CanonicalUnit::Millimetre => "mm",
            CanonicalUnit::Millilitre => "ml",
        }
    }
}

/// One pattern rule for the deterministic rule-based backend.
///
/// `pattern` is matched against each sentence of the report; on a hit the
/// raw value is `value` with `$n` / `${name}` capture references expanded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionRule {
    pub pattern: String,
    #[serde(default = "default_rule_value")]
    pub value: String,
}

fn default_rule_value() -> String {
    "${1}".to_string()
}

/// Case-folds and collapses internal whitespace runs to a single space.
pub fn fold_term(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "field_id")]
pub enum SynonymScope {
    Global,
    Field(String),
}

/// Surface form to canonical token map. Keys are stored folded (see
/// [`fold_term`]) and every canonical token maps to itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymTable {
    pub scope: SynonymScope,
    pub entries: BTreeMap<String, String>,
}

impl SynonymTable {
    pub fn empty(scope: SynonymScope) -> Self {
        Self {
            scope,
            entries: BTreeMap::new(),
        }
    }

    /// Builds a table from raw `(surface, canonical)` pairs plus extra
    /// canonical tokens, enforcing the fixed-point property.
    pub fn build<'a, I, C>(scope: SynonymScope, pairs: I, extra_canonicals: C) -> Result<Self, String>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
        C: IntoIterator<Item = &'a str>,
    {
        let mut table = Self::empty(scope);
        let mut canonicals: Vec<&str> = extra_canonicals.into_iter().collect();
        for (surface, canonical) in pairs {
            let key = fold_term(surface);
            if key.is_empty() {
                return Err("empty synonym surface form".into());
            }
            check_canonical_token(canonical)?;
            if let Some(prev) = table.entries.insert(key.clone(), canonical.to_string()) {
                if prev != canonical {
                    return Err(format!("surface form `{key}` maps to both `{prev}` and `{canonical}`"));
                }
            }
            canonicals.push(canonical);
        }
        for canonical in canonicals {
            check_canonical_token(canonical)?;
            match table.entries.get(canonical) {
                Some(target) if target != canonical => {
                    return Err(format!(
                        "canonical token `{canonical}` is also mapped to `{target}`"
                    ))
                }
                _ => {
                    table.entries.insert(canonical.to_string(), canonical.to_string());
                }
            }
        }
        Ok(table)
    }

    pub fn lookup(&self, raw: &str) -> Option<&str> {
        self.entries.get(&fold_term(raw)).map(String::as_str)
    }

    pub fn is_canonical(&self, token: &str) -> bool {
        self.entries.get(token).is_some_and(|t| t == token)
    }

    /// Layers `overlay` over `self`; overlay entries win.
    fn merged_with(&self, overlay: &SynonymTable) -> Result<SynonymTable, String> {
        let mut entries = self.entries.clone();
        for (surface, canonical) in &overlay.entries {
            if self.is_canonical(surface) && surface != canonical {
                return Err(format!(
                    "field synonym remaps global canonical token `{surface}`"
                ));
            }
            entries.insert(surface.clone(), canonical.clone());
        }
        Ok(SynonymTable {
            scope: overlay.scope.clone(),
            entries,
        })
    }
}

fn check_canonical_token(token: &str) -> Result<(), String> {
    if token.is_empty() || fold_term(token) != token || token.contains(' ') {
        return Err(format!(
            "canonical token `{token}` must be lower-case without whitespace"
        ));
    }
    Ok(())
}

/// On-disk shape of one field, keys exactly as in the schema file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpecDocument {
    pub field_id: String,
    pub label: String,
    pub trust_class: TrustClass,
    pub value_type: ValueType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_unit: Option<CanonicalUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed_values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub synonyms: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requires_review: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction_rules: Option<Vec<ExtractionRule>>,
}

/// On-disk shape of a schema file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaDocument {
    pub schema_id: String,
    pub version: String,
    #[serde(default)]
    pub synonyms: BTreeMap<String, String>,
    pub fields: Vec<FieldSpecDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub field_id: String,
    pub label: String,
    pub trust_class: TrustClass,
    pub value_type: ValueType,
    pub canonical_unit: Option<CanonicalUnit>,
    pub allowed_values: Option<Vec<String>>,
    pub synonyms: Vec<(String, String)>,
    pub requires_review: bool,
    pub extraction_rules: Vec<ExtractionRule>,
}

impl FieldSpec {
    /// Column header used in exports; numeric headers always carry the unit
    /// suffix.
    pub fn export_header(&self) -> String {
        match self.canonical_unit {
            Some(unit) if self.value_type == ValueType::Numeric => {
                let suffix = format!("_{}", unit.suffix());
                if self.field_id.ends_with(&suffix) {
                    self.field_id.clone()
                } else {
                    format!("{}{}", self.field_id, suffix)
                }
            }
            _ => self.field_id.clone(),
        }
    }

    fn to_document(&self) -> FieldSpecDocument {
        FieldSpecDocument {
            field_id: self.field_id.clone(),
            label: self.label.clone(),
            trust_class: self.trust_class,
            value_type: self.value_type,
            canonical_unit: self.canonical_unit,
            allowed_values: self.allowed_values.clone(),
            synonyms: self.synonyms.iter().cloned().collect(),
            requires_review: Some(self.requires_review),
            extraction_rules: if self.extraction_rules.is_empty() {
                None
            } else {
                Some(self.extraction_rules.clone())
            },
        }
    }
}

/// A validated, immutable field schema.
#[derive(Debug, Clone)]
pub struct Schema {
    pub schema_id: String,
    pub version: String,
    pub synonyms: SynonymTable,
    pub fields: Vec<FieldSpec>,
    index: HashMap<String, usize>,
    field_tables: Vec<SynonymTable>,
    compiled_rules: Vec<Vec<Regex>>,
}

impl PartialEq for Schema {
    fn eq(&self, other: &Self) -> bool {
        self.schema_id == other.schema_id
            && self.version == other.version
            && self.synonyms == other.synonyms
            && self.fields == other.fields
    }
}

impl Schema {
    pub fn field(&self, field_id: &str) -> Option<&FieldSpec> {
        self.index.get(field_id).map(|&i| &self.fields[i])
    }

    pub fn position(&self, field_id: &str) -> Option<usize> {
        self.index.get(field_id).copied()
    }

    pub fn contains(&self, field_id: &str) -> bool {
        self.index.contains_key(field_id)
    }

    /// Global synonyms overlaid with the field's own entries and allowed
    /// values.
    pub fn synonyms_for(&self, field_id: &str) -> Option<&SynonymTable> {
        self.index.get(field_id).map(|&i| &self.field_tables[i])
    }

    pub(crate) fn rules_for(&self, position: usize) -> &[Regex] {
        &self.compiled_rules[position]
    }

    pub fn to_document(&self) -> SchemaDocument {
        SchemaDocument {
            schema_id: self.schema_id.clone(),
            version: self.version.clone(),
            synonyms: self
                .synonyms
                .entries
                .iter()
                .filter(|(k, v)| k != v)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            fields: self.fields.iter().map(FieldSpec::to_document).collect(),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("schema document serialises")
    }

    pub fn from_document(doc: SchemaDocument) -> Result<Schema, SchemaError> {
        if doc.fields.is_empty() {
            return Err(SchemaError::SchemaEmpty);
        }
        let global = SynonymTable::build(
            SynonymScope::Global,
            doc.synonyms.iter().map(|(k, v)| (k.as_str(), v.as_str())),
            std::iter::empty(),
        )
        .map_err(|reason| SchemaError::InvalidFieldSpec {
            field_id: "<global synonyms>".into(),
            reason,
        })?;

        let mut index = HashMap::with_capacity(doc.fields.len());
        let mut fields = Vec::with_capacity(doc.fields.len());
        let mut field_tables = Vec::with_capacity(doc.fields.len());
        let mut compiled_rules = Vec::with_capacity(doc.fields.len());

        for (i, f) in doc.fields.into_iter().enumerate() {
            let invalid = |reason: String| SchemaError::InvalidFieldSpec {
                field_id: f.field_id.clone(),
                reason,
            };
            if f.field_id.is_empty() || f.field_id.chars().any(char::is_whitespace) {
                return Err(invalid("field_id must be a non-empty token".into()));
            }
            if index.insert(f.field_id.clone(), i).is_some() {
                return Err(SchemaError::DuplicateFieldId(f.field_id));
            }
            match f.value_type {
                ValueType::Numeric if f.canonical_unit.is_none() => {
                    return Err(invalid("numeric field requires canonical_unit".into()))
                }
                ValueType::Categorical
                    if f.allowed_values.as_ref().is_none_or(|v| v.is_empty()) =>
                {
                    return Err(invalid("categorical field requires allowed_values".into()))
                }
                _ => {}
            }
            if f.value_type != ValueType::Numeric && f.canonical_unit.is_some() {
                return Err(invalid("canonical_unit is only valid on numeric fields".into()));
            }
            let allowed: Vec<&str> = f
                .allowed_values
                .iter()
                .flatten()
                .map(String::as_str)
                .collect();
            let own = SynonymTable::build(
                SynonymScope::Field(f.field_id.clone()),
                f.synonyms.iter().map(|(k, v)| (k.as_str(), v.as_str())),
                allowed.iter().copied(),
            )
            .map_err(&invalid)?;
            if let Some(allowed) = &f.allowed_values {
                if let Some((surface, target)) = f
                    .synonyms
                    .iter()
                    .find(|(_, target)| !allowed.contains(target))
                {
                    return Err(invalid(format!(
                        "synonym `{surface}` targets `{target}`, which is not an allowed value"
                    )));
                }
            }
            let merged = global.merged_with(&own).map_err(&invalid)?;

            let rules = f.extraction_rules.unwrap_or_default();
            let regexes = rules
                .iter()
                .map(|r| Regex::new(&r.pattern))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| invalid(format!("bad extraction rule: {e}")))?;

            let requires_review = f
                .requires_review
                .unwrap_or(f.trust_class == TrustClass::Interpretive);

            fields.push(FieldSpec {
                field_id: f.field_id,
                label: f.label,
                trust_class: f.trust_class,
                value_type: f.value_type,
                canonical_unit: f.canonical_unit,
                allowed_values: f.allowed_values,
                synonyms: f.synonyms.into_iter().collect(),
                requires_review,
                extraction_rules: rules,
            });
            field_tables.push(merged);
            compiled_rules.push(regexes);
        }

        Ok(Schema {
            schema_id: doc.schema_id,
            version: doc.version,
            synonyms: global,
            fields,
            index,
            field_tables,
            compiled_rules,
        })
    }
}

/// Parses and validates a schema file (JSON syntax, UTF-8).
pub fn load_schema(source: &[u8]) -> Result<Schema, SchemaError> {
    let text = std::str::from_utf8(source).map_err(|e| SchemaError::SchemaParse(e.to_string()))?;
    let doc: SchemaDocument =
        serde_json::from_str(text).map_err(|e| SchemaError::SchemaParse(e.to_string()))?;
    Schema::from_document(doc)
}

/// The fields that require mandatory human review, in schema order.
pub fn review_surface(schema: &Schema) -> Vec<&FieldSpec> {
    schema.fields.iter().filter(|f| f.requires_review).collect()
}
