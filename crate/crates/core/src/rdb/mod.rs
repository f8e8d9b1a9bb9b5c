//! DTD-driven relational storage: compile a DTD to a table schema, shred
//! valid documents into rows, load them into an embedded database, and
//! rebuild documents from the rows.
//!
//! The mapping is a hybrid-inlining scheme: repeatable or choice-dependent
//! elements get their own table (with surrogate id, parent reference, and a
//! sibling position), while single-shot character-data leaves collapse into
//! columns of their parent's table.

use indexmap::IndexMap;

use crate::dtd::DtdAst;

mod compile;
mod reconstruct;
mod shred;
mod sql;

pub use compile::{dtd_to_relational, CompileError};
pub use reconstruct::{reconstruct, ReconstructError};
pub use shred::{shred, ShredError};
pub use sql::{create_schema, ddl, load, rebase, LoadError, LoadReport, SchemaSqlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqlType {
    Integer,
    Real,
    Text,
}

impl SqlType {
    pub fn sql(self) -> &'static str {
        match self {
            SqlType::Integer => "INTEGER",
            SqlType::Real => "REAL",
            SqlType::Text => "TEXT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: SqlType,
    pub nullable: bool,
}

/// One table of the generated schema. `id` is always the primary key. All
/// non-root tables carry `parent_id` and `pos`; a table whose element can
/// hang under several different parents also carries `parent_table` and
/// loses the foreign key (it cannot point at two tables at once).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    /// DTD element this table stores.
    pub element: String,
    pub columns: Vec<Column>,
    /// Parent table referenced by `parent_id`, when there is exactly one.
    pub foreign_key_parent: Option<String>,
    pub has_parent_link: bool,
    pub has_parent_table_column: bool,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Attribute-to-column binding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttrCol {
    pub attr: String,
    pub column: String,
    /// Declared fixed value; stored even when the document omits the
    /// attribute, mirroring attribute defaulting.
    pub fixed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mapping {
    OwnTable {
        table: String,
        /// Column holding character data, for PCDATA-content elements.
        value_column: Option<String>,
        attr_columns: Vec<AttrCol>,
        /// Tables this element's rows may hang under, declaration order.
        parents: Vec<String>,
    },
    Inlined {
        owner_element: String,
        owner_table: String,
        column: String,
        /// EMPTY-content elements inline as a 0/1 presence flag instead of a
        /// text value.
        presence: bool,
        nullable: bool,
        attr_columns: Vec<AttrCol>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationalSchema {
    /// The DTD this schema was compiled from; reconstruction walks its
    /// content models.
    pub dtd: DtdAst,
    /// Root element name.
    pub root: String,
    /// Creation order: parents precede children.
    pub tables: Vec<Table>,
    /// Every declared element appears exactly once.
    pub mapping: IndexMap<String, Mapping>,
}

impl RelationalSchema {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Table storing `element`, if the element maps to its own table.
    pub fn table_of_element(&self, element: &str) -> Option<&Table> {
        match self.mapping.get(element)? {
            Mapping::OwnTable { table, .. } => self.table(table),
            Mapping::Inlined { .. } => None,
        }
    }

    pub fn root_table(&self) -> &Table {
        self.table_of_element(&self.root)
            .expect("root always maps to a table")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }
}

/// One row destined for `table`. `parent_table` is always known in memory
/// for non-root rows; it is persisted only for multi-parent tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub table: String,
    pub id: i64,
    pub parent_id: Option<i64>,
    pub parent_table: Option<String>,
    pub pos: i64,
    /// Data columns in table column order (attributes, value, inlined).
    pub values: Vec<(String, Value)>,
}

/// Rows in topological order: every row precedes the rows that reference it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RowSet {
    pub rows: Vec<Row>,
}

impl RowSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row count per table, in first-appearance order.
    pub fn per_table_counts(&self) -> IndexMap<String, u64> {
        let mut counts = IndexMap::new();
        for row in &self.rows {
            *counts.entry(row.table.clone()).or_insert(0) += 1;
        }
        counts
    }
}
