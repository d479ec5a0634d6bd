//! Declarative table-to-graph mapping: entity IRI templates plus
//! column→predicate rules, executed row by row.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Deserialize;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::ingest::{parse_amount, parse_date, RecordTable};
use crate::rdf::{Datatype, Graph, Iri, Literal, RdfError, Triple, RDFS_LABEL, RDF_TYPE};

pub const DEFAULT_BASE_IRI: &str = "https://example.org/procurement/";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MappingError {
    #[error("malformed mapping document: {0}")]
    Malformed(String),
    #[error("missing base_iri")]
    MissingBaseIri,
    #[error("base_iri `{0}` must be an absolute IRI ending with `/`")]
    InvalidBaseIri(String),
    #[error("duplicate rule mapping column `{column}` to <{predicate}>")]
    DuplicateRule { column: String, predicate: String },
    #[error("unknown datatype `{0}`")]
    UnknownDatatype(String),
    #[error("template `{0}` has an unterminated or empty placeholder")]
    BadTemplate(String),
    #[error("mapping references column `{0}` absent from the input table")]
    MissingColumn(String),
    #[error("label `{0}` is empty after slugging")]
    EmptySlug(String),
    #[error(transparent)]
    Rdf(#[from] RdfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Contract,
    Institution,
    Supplier,
}

impl EntityKind {
    pub const ALL: [EntityKind; 3] = [EntityKind::Contract, EntityKind::Institution, EntityKind::Supplier];

    pub fn segment(self) -> &'static str {
        match self {
            EntityKind::Contract => "contract",
            EntityKind::Institution => "institution",
            EntityKind::Supplier => "supplier",
        }
    }

    pub fn class_name(self) -> &'static str {
        match self {
            EntityKind::Contract => "Contract",
            EntityKind::Institution => "Institution",
            EntityKind::Supplier => "Supplier",
        }
    }

    /// Column whose value names the entity in the default mapping.
    pub fn default_column(self) -> &'static str {
        match self {
            EntityKind::Contract => "record_id",
            EntityKind::Institution => "authority",
            EntityKind::Supplier => "supplier",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.segment())
    }
}

/// Class and property IRIs of the procurement ontology under one base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub base: String,
    pub contract: Iri,
    pub institution: Iri,
    pub supplier: Iri,
    pub has_institution: Iri,
    pub has_supplier: Iri,
    pub has_amount: Iri,
    pub has_date: Iri,
    pub has_description: Iri,
    pub rdf_type: Iri,
    pub label: Iri,
}

impl Vocabulary {
    pub fn new(base: &str) -> Result<Self, MappingError> {
        let base = check_base(base)?;
        let term = |name: &str| Iri::new(format!("{base}{name}"));
        Ok(Vocabulary {
            contract: term("Contract")?,
            institution: term("Institution")?,
            supplier: term("Supplier")?,
            has_institution: term("hasInstitution")?,
            has_supplier: term("hasSupplier")?,
            has_amount: term("hasAmount")?,
            has_date: term("hasDate")?,
            has_description: term("hasDescription")?,
            rdf_type: Iri::new(RDF_TYPE)?,
            label: Iri::new(RDFS_LABEL)?,
            base,
        })
    }

    pub fn class(&self, kind: EntityKind) -> &Iri {
        match kind {
            EntityKind::Contract => &self.contract,
            EntityKind::Institution => &self.institution,
            EntityKind::Supplier => &self.supplier,
        }
    }

    pub fn all(&self) -> [&Iri; 10] {
        [
            &self.contract,
            &self.institution,
            &self.supplier,
            &self.has_institution,
            &self.has_supplier,
            &self.has_amount,
            &self.has_date,
            &self.has_description,
            &self.rdf_type,
            &self.label,
        ]
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::new(DEFAULT_BASE_IRI).expect("default base IRI is valid")
    }
}

fn check_base(base: &str) -> Result<String, MappingError> {
    if !base.ends_with('/') || Iri::new(base).is_err() {
        return Err(MappingError::InvalidBaseIri(base.to_string()));
    }
    Ok(base.to_string())
}

/// Slug of a label: NFC, lowercase, whitespace runs to one hyphen, then
/// everything but letters, digits and hyphens removed.
pub fn slug(label: &str) -> String {
    let lowered: String = label.trim().nfc().collect::<String>().to_lowercase();
    lowered
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("-")
        .chars()
        .filter(|c| c.is_alphanumeric() || *c == '-')
        .collect()
}

pub fn mint_iri(base: &str, kind: EntityKind, label: &str) -> Result<Iri, MappingError> {
    let s = slug(label);
    if s.is_empty() {
        return Err(MappingError::EmptySlug(label.to_string()));
    }
    Ok(Iri::new(format!("{base}{}/{s}", kind.segment()))?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Column(String),
}

/// Subject template relative to the base IRI, e.g. `institution/{authority}`.
/// Placeholder values are slugged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    source: String,
    pieces: Vec<Piece>,
}

impl Template {
    pub fn parse(source: &str) -> Result<Self, MappingError> {
        let bad = || MappingError::BadTemplate(source.to_string());
        let mut pieces = Vec::new();
        let mut rest = source;
        while let Some(open) = rest.find('{') {
            if open > 0 {
                pieces.push(Piece::Text(rest[..open].to_string()));
            }
            let close = rest[open..].find('}').ok_or_else(bad)? + open;
            let column = rest[open + 1..close].trim();
            if column.is_empty() {
                return Err(bad());
            }
            pieces.push(Piece::Column(column.to_string()));
            rest = &rest[close + 1..];
        }
        if rest.contains('}') {
            return Err(bad());
        }
        if !rest.is_empty() {
            pieces.push(Piece::Text(rest.to_string()));
        }
        if !pieces.iter().any(|p| matches!(p, Piece::Column(_))) {
            return Err(bad());
        }
        Ok(Template {
            source: source.to_string(),
            pieces,
        })
    }

    pub fn columns(&self) -> impl Iterator<Item = &str> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Column(c) => Some(c.as_str()),
            Piece::Text(_) => None,
        })
    }

    pub fn expand<'a>(&self, base: &str, lookup: impl Fn(&str) -> Option<&'a str>) -> Result<Iri, MappingError> {
        let mut out = base.to_string();
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Column(c) => {
                    let raw = lookup(c).ok_or_else(|| MappingError::MissingColumn(c.clone()))?;
                    let s = slug(raw);
                    if s.is_empty() {
                        return Err(MappingError::EmptySlug(raw.to_string()));
                    }
                    out.push_str(&s);
                }
            }
        }
        Ok(Iri::new(out)?)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRule {
    pub class: Iri,
    pub template: Template,
    /// Column copied into an `rdfs:label` triple, if any.
    pub label: Option<String>,
}

/// What a property rule emits as its object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    Literal(Datatype),
    /// IRI of the row's entity of this kind.
    Entity(EntityKind),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyRule {
    pub column: String,
    pub predicate: Iri,
    pub object: ObjectKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingSpec {
    pub base_iri: String,
    pub entities: BTreeMap<EntityKind, EntityRule>,
    pub properties: Vec<PropertyRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMapping {
    base_iri: Option<String>,
    #[serde(default)]
    entities: BTreeMap<EntityKind, RawEntity>,
    #[serde(default)]
    properties: Vec<RawProperty>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntity {
    class: Option<String>,
    template: Option<String>,
    label: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProperty {
    column: String,
    predicate: String,
    datatype: String,
}

/// Resolves a name against the base unless it already is an absolute IRI
/// or uses one of the `rdf:`, `rdfs:`, `xsd:` prefixes.
pub fn resolve_iri(base: &str, name: &str) -> Result<Iri, RdfError> {
    for (prefix, ns) in [
        ("rdf:", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
        ("rdfs:", "http://www.w3.org/2000/01/rdf-schema#"),
        ("xsd:", crate::rdf::XSD),
    ] {
        if let Some(local) = name.strip_prefix(prefix) {
            return Iri::new(format!("{ns}{local}"));
        }
    }
    match Iri::new(name) {
        Ok(iri) if name.contains("://") || name.starts_with("urn:") => Ok(iri),
        _ => Iri::new(format!("{base}{name}")),
    }
}

fn parse_object_kind(name: &str) -> Result<ObjectKind, MappingError> {
    match name {
        "institution" => Ok(ObjectKind::Entity(EntityKind::Institution)),
        "supplier" => Ok(ObjectKind::Entity(EntityKind::Supplier)),
        "contract" => Ok(ObjectKind::Entity(EntityKind::Contract)),
        other => Datatype::from_local_name(other.strip_prefix("xsd:").unwrap_or(other))
            .map(ObjectKind::Literal)
            .ok_or_else(|| MappingError::UnknownDatatype(other.to_string())),
    }
}

fn default_entity(base: &str, kind: EntityKind) -> EntityRule {
    EntityRule {
        class: Iri::new(format!("{base}{}", kind.class_name())).expect("valid base"),
        template: Template::parse(&format!("{}/{{{}}}", kind.segment(), kind.default_column()))
            .expect("valid default template"),
        label: match kind {
            EntityKind::Contract => None,
            _ => Some(kind.default_column().to_string()),
        },
    }
}

impl MappingSpec {
    /// The standard five-property mapping over a normalized table.
    pub fn standard(base_iri: &str) -> Result<Self, MappingError> {
        let vocab = Vocabulary::new(base_iri)?;
        let rule = |column: &str, predicate: &Iri, object| PropertyRule {
            column: column.to_string(),
            predicate: predicate.clone(),
            object,
        };
        Ok(MappingSpec {
            entities: EntityKind::ALL
                .into_iter()
                .map(|k| (k, default_entity(&vocab.base, k)))
                .collect(),
            properties: vec![
                rule("authority", &vocab.has_institution, ObjectKind::Entity(EntityKind::Institution)),
                rule("supplier", &vocab.has_supplier, ObjectKind::Entity(EntityKind::Supplier)),
                rule("amount", &vocab.has_amount, ObjectKind::Literal(Datatype::Decimal)),
                rule("date", &vocab.has_date, ObjectKind::Literal(Datatype::Date)),
                rule("subject", &vocab.has_description, ObjectKind::Literal(Datatype::String)),
            ],
            base_iri: vocab.base,
        })
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new(&self.base_iri).expect("base validated at construction")
    }
}

pub fn parse_mapping(doc: &str) -> Result<MappingSpec, MappingError> {
    let raw: RawMapping = toml::from_str(doc).map_err(|e| MappingError::Malformed(e.message().to_string()))?;
    let base = check_base(&raw.base_iri.ok_or(MappingError::MissingBaseIri)?)?;

    let mut entities = BTreeMap::new();
    for kind in EntityKind::ALL {
        let mut rule = default_entity(&base, kind);
        if let Some(raw_entity) = raw.entities.get(&kind) {
            if let Some(class) = &raw_entity.class {
                rule.class = resolve_iri(&base, class)?;
            }
            if let Some(template) = &raw_entity.template {
                rule.template = Template::parse(template)?;
            }
            if raw_entity.label.is_some() {
                rule.label.clone_from(&raw_entity.label);
            }
        }
        entities.insert(kind, rule);
    }

    let mut seen = HashSet::new();
    let mut properties = Vec::with_capacity(raw.properties.len());
    for prop in raw.properties {
        let predicate = resolve_iri(&base, &prop.predicate)?;
        if !seen.insert((prop.column.clone(), predicate.clone())) {
            return Err(MappingError::DuplicateRule {
                column: prop.column,
                predicate: predicate.into_string(),
            });
        }
        properties.push(PropertyRule {
            column: prop.column,
            predicate,
            object: parse_object_kind(&prop.datatype)?,
        });
    }
    Ok(MappingSpec {
        base_iri: base,
        entities,
        properties,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MappingOptions {
    /// Map rows flagged during normalization instead of skipping them.
    pub include_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub record_id: String,
    pub message: String,
}

#[derive(Debug)]
pub struct MappingOutput {
    pub graph: Graph,
    pub row_errors: Vec<RowError>,
    /// Flagged rows left out because `include_flagged` was off.
    pub skipped: Vec<String>,
}

/// Maps every row into triples. Cells that fail to parse for their
/// datatype are reported per row and emitted with their raw lexical form,
/// leaving rejection to shape validation.
pub fn execute_mapping(
    table: &RecordTable,
    spec: &MappingSpec,
    options: MappingOptions,
) -> Result<MappingOutput, MappingError> {
    let has_column = |c: &str| c == "record_id" || table.column_index(c).is_some();
    let referenced = spec
        .properties
        .iter()
        .map(|p| p.column.as_str())
        .chain(spec.entities.values().flat_map(|e| e.template.columns().chain(e.label.as_deref())));
    for column in referenced {
        if !has_column(column) {
            return Err(MappingError::MissingColumn(column.to_string()));
        }
    }

    let rdf_type = Iri::new(RDF_TYPE)?;
    let rdfs_label = Iri::new(RDFS_LABEL)?;
    let contract_rule = &spec.entities[&EntityKind::Contract];

    let mut graph = Graph::new();
    let mut row_errors = Vec::new();
    let mut skipped = Vec::new();
    let mut entity_labels: HashMap<Iri, (EntityKind, String)> = HashMap::new();
    let mut entity_order: Vec<Iri> = Vec::new();

    for row in &table.rows {
        if row.is_flagged() && !options.include_flagged {
            skipped.push(row.record_id.clone());
            continue;
        }
        let lookup = |c: &str| table.cell(row, c);
        let mut report = |message: String| {
            row_errors.push(RowError {
                record_id: row.record_id.clone(),
                message,
            })
        };
        let contract = match contract_rule.template.expand(&spec.base_iri, lookup) {
            Ok(iri) => iri,
            Err(e) => {
                report(e.to_string());
                continue;
            }
        };
        graph.insert(Triple::new(contract.clone(), rdf_type.clone(), contract_rule.class.clone()));

        for rule in &spec.properties {
            let cell = lookup(&rule.column).unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            let object: crate::rdf::Term = match rule.object {
                ObjectKind::Entity(kind) => {
                    let entity = &spec.entities[&kind];
                    match entity.template.expand(&spec.base_iri, lookup) {
                        Ok(iri) => {
                            if !entity_labels.contains_key(&iri) {
                                let label = entity
                                    .label
                                    .as_deref()
                                    .and_then(lookup)
                                    .map(|l| l.trim().to_string())
                                    .unwrap_or_default();
                                entity_labels.insert(iri.clone(), (kind, label));
                                entity_order.push(iri.clone());
                            }
                            iri.into()
                        }
                        Err(e) => {
                            report(format!("{}: {e}", rule.column));
                            continue;
                        }
                    }
                }
                ObjectKind::Literal(datatype) => match typed_literal(cell, datatype) {
                    Ok(lit) => lit.into(),
                    Err(message) => {
                        report(format!("{}: {message}", rule.column));
                        Literal::new(cell, datatype).into()
                    }
                },
            };
            graph.insert(Triple::new(contract.clone(), rule.predicate.clone(), object));
        }
    }

    for iri in entity_order {
        let (kind, label) = &entity_labels[&iri];
        let rule = &spec.entities[kind];
        graph.insert(Triple::new(iri.clone(), rdf_type.clone(), rule.class.clone()));
        if rule.label.is_some() && !label.is_empty() {
            graph.insert(Triple::new(iri, rdfs_label.clone(), Literal::string(label.clone())));
        }
    }

    Ok(MappingOutput {
        graph,
        row_errors,
        skipped,
    })
}

fn typed_literal(cell: &str, datatype: Datatype) -> Result<Literal, String> {
    match datatype {
        Datatype::String => Ok(Literal::string(cell)),
        Datatype::Decimal => parse_amount(cell).map(Literal::decimal).map_err(|e| e.to_string()),
        Datatype::Integer => cell
            .parse::<i64>()
            .map(Literal::integer)
            .map_err(|_| format!("non-integer value `{cell}`")),
        Datatype::Date => parse_date(cell).map(Literal::date).map_err(|e| e.to_string()),
    }
}

/// Triple count of the standard mapping: 6 per contract, 2 per entity.
pub fn expected_triple_count(contracts: usize, institutions: usize, suppliers: usize) -> usize {
    6 * contracts + 2 * institutions + 2 * suppliers
}
