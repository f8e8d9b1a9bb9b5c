//! DDL generation and row loading for SQLite.

use indexmap::IndexMap;
use rusqlite::types::ToSqlOutput;
use rusqlite::{ffi, Connection, OptionalExtension, ToSql};
use thiserror::Error;

use super::{RelationalSchema, RowSet, Table, Value};

#[derive(Debug, Error)]
pub enum SchemaSqlError {
    #[error("table `{0}` already exists")]
    TableExists(String),
    #[error("database error: {0}")]
    Database(String),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("id {id} already present in table `{table}`")]
    IdCollision { table: String, id: i64 },
    #[error("row for table `{table}` violates a constraint: {detail}")]
    ConstraintViolation { table: String, detail: String },
    #[error("database error: {0}")]
    Database(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows_inserted: IndexMap<String, u64>,
}

impl LoadReport {
    pub fn total(&self) -> u64 {
        self.rows_inserted.values().sum()
    }
}

pub(crate) fn quote(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn table_ddl(table: &Table) -> String {
    let mut lines = Vec::new();
    for col in &table.columns {
        let mut line = format!("  {} {}", quote(&col.name), col.ty.sql());
        if !col.nullable {
            line.push_str(" NOT NULL");
        }
        if col.name == "id" {
            line.push_str(" PRIMARY KEY");
        }
        lines.push(line);
    }
    if let Some(parent) = &table.foreign_key_parent {
        lines.push(format!(
            "  FOREIGN KEY (\"parent_id\") REFERENCES {} (\"id\")",
            quote(parent)
        ));
    }
    format!(
        "CREATE TABLE {} (\n{}\n);\n",
        quote(&table.name),
        lines.join(",\n")
    )
}

/// The full schema as a deterministic DDL script, one statement per table,
/// creation order.
pub fn ddl(schema: &RelationalSchema) -> String {
    let mut out = String::new();
    for (i, table) in schema.tables.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&table_ddl(table));
    }
    out
}

/// Create all tables, failing up front if any of them already exists.
/// Returns the executed DDL script.
pub fn create_schema(
    schema: &RelationalSchema,
    conn: &Connection,
) -> Result<String, SchemaSqlError> {
    for table in &schema.tables {
        let existing: Option<String> = conn
            .query_row(
                "SELECT name FROM sqlite_master WHERE type = 'table' AND name = ?1",
                [&table.name],
                |row| row.get(0),
            )
            .optional()
            .map_err(|e| SchemaSqlError::Database(e.to_string()))?;
        if existing.is_some() {
            return Err(SchemaSqlError::TableExists(table.name.clone()));
        }
    }
    let script = ddl(schema);
    conn.execute_batch(&script)
        .map_err(|e| SchemaSqlError::Database(e.to_string()))?;
    Ok(script)
}

impl ToSql for Value {
    fn to_sql(&self) -> rusqlite::Result<ToSqlOutput<'_>> {
        Ok(match self {
            Value::Null => ToSqlOutput::from(rusqlite::types::Null),
            Value::Int(i) => ToSqlOutput::from(*i),
            Value::Real(f) => ToSqlOutput::from(*f),
            Value::Text(s) => ToSqlOutput::from(s.as_str()),
        })
    }
}

/// Insert every row inside one transaction: either all rows land or none
/// do. Foreign keys are enforced, so child rows must follow their parents.
pub fn load(
    rows: &RowSet,
    schema: &RelationalSchema,
    conn: &mut Connection,
) -> Result<LoadReport, LoadError> {
    conn.pragma_update(None, "foreign_keys", true)
        .map_err(|e| LoadError::Database(e.to_string()))?;
    let tx = conn
        .transaction()
        .map_err(|e| LoadError::Database(e.to_string()))?;
    let mut report = LoadReport::default();
    for row in &rows.rows {
        let table = schema
            .table(&row.table)
            .ok_or_else(|| LoadError::Database(format!("no table `{}` in schema", row.table)))?;

        let mut columns: Vec<&str> = vec!["id"];
        let mut params: Vec<&dyn ToSql> = vec![&row.id];
        if table.has_parent_link {
            columns.push("parent_id");
            params.push(&row.parent_id);
            columns.push("pos");
            params.push(&row.pos);
        }
        if table.has_parent_table_column {
            columns.push("parent_table");
            params.push(&row.parent_table);
        }
        for (column, value) in &row.values {
            columns.push(column);
            params.push(value);
        }

        let sql = format!(
            "INSERT INTO {} ({}) VALUES ({})",
            quote(&row.table),
            columns
                .iter()
                .map(|c| quote(c))
                .collect::<Vec<_>>()
                .join(", "),
            (1..=columns.len())
                .map(|n| format!("?{n}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
        let mut stmt = tx
            .prepare_cached(&sql)
            .map_err(|e| LoadError::Database(e.to_string()))?;
        stmt.execute(params.as_slice()).map_err(|e| match &e {
            rusqlite::Error::SqliteFailure(f, _)
                if f.extended_code == ffi::SQLITE_CONSTRAINT_PRIMARYKEY =>
            {
                LoadError::IdCollision {
                    table: row.table.clone(),
                    id: row.id,
                }
            }
            rusqlite::Error::SqliteFailure(f, _)
                if f.code == rusqlite::ErrorCode::ConstraintViolation =>
            {
                LoadError::ConstraintViolation {
                    table: row.table.clone(),
                    detail: e.to_string(),
                }
            }
            _ => LoadError::Database(e.to_string()),
        })?;
        *report.rows_inserted.entry(row.table.clone()).or_insert(0) += 1;
    }
    tx.commit()
        .map_err(|e| LoadError::Database(e.to_string()))?;
    Ok(report)
}

/// Shift a row set's ids past whatever the database already holds, so that
/// several documents can be loaded into one store. Parent references move
/// by their parent table's offset; relative structure is untouched.
pub fn rebase(rows: &RowSet, conn: &Connection) -> Result<RowSet, LoadError> {
    let mut offsets: IndexMap<String, i64> = IndexMap::new();
    for row in &rows.rows {
        for table in std::iter::once(&row.table).chain(row.parent_table.iter()) {
            if offsets.contains_key(table) {
                continue;
            }
            let max: Option<i64> = conn
                .query_row(
                    &format!("SELECT MAX(\"id\") FROM {}", quote(table)),
                    [],
                    |r| r.get(0),
                )
                .map_err(|e| LoadError::Database(e.to_string()))?;
            offsets.insert(table.clone(), max.unwrap_or(0));
        }
    }
    let mut shifted = rows.clone();
    for row in &mut shifted.rows {
        row.id += offsets[&row.table];
        if let (Some(pid), Some(pt)) = (row.parent_id.as_mut(), row.parent_table.as_deref()) {
            *pid += offsets[pt];
        }
    }
    Ok(shifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtd::parse_dtd;
    use crate::rdb::{dtd_to_relational, shred};
    use crate::xml::read_xml;

    fn schema(dtd: &str, root: &str) -> RelationalSchema {
        dtd_to_relational(&parse_dtd(dtd).unwrap(), root).unwrap()
    }

    #[test]
    fn ddl_pins_the_two_table_shape() {
        let s = schema(
            "<!ELEMENT a (b, c*)>\n<!ELEMENT b (#PCDATA)>\n<!ELEMENT c (#PCDATA)>",
            "a",
        );
        assert_eq!(
            ddl(&s),
            "CREATE TABLE \"a\" (\n  \"id\" INTEGER NOT NULL PRIMARY KEY,\n  \"b\" TEXT NOT NULL\n);\n\
             \nCREATE TABLE \"c\" (\n  \"id\" INTEGER NOT NULL PRIMARY KEY,\n  \"parent_id\" INTEGER NOT NULL,\n  \"pos\" INTEGER NOT NULL,\n  \"value\" TEXT,\n  FOREIGN KEY (\"parent_id\") REFERENCES \"a\" (\"id\")\n);\n"
        );
    }

    #[test]
    fn create_schema_refuses_to_clobber() {
        let s = schema("<!ELEMENT a EMPTY>", "a");
        let conn = Connection::open_in_memory().unwrap();
        create_schema(&s, &conn).unwrap();
        let err = create_schema(&s, &conn).unwrap_err();
        assert!(matches!(err, SchemaSqlError::TableExists(t) if t == "a"));
    }

    #[test]
    fn load_inserts_everything_atomically() {
        let s = schema(
            "<!ELEMENT a (b, c*)>\n<!ELEMENT b (#PCDATA)>\n<!ELEMENT c (#PCDATA)>",
            "a",
        );
        let mut conn = Connection::open_in_memory().unwrap();
        create_schema(&s, &conn).unwrap();
        let rows = shred(&read_xml("<a><b>x</b><c>y</c><c>z</c></a>").unwrap(), &s).unwrap();
        let report = load(&rows, &s, &mut conn).unwrap();
        assert_eq!(report.total(), 3);
        assert_eq!(report.rows_inserted["c"], 2);
        let stored: String = conn
            .query_row("SELECT \"value\" FROM \"c\" WHERE \"pos\" = 2", [], |r| {
                r.get(0)
            })
            .unwrap();
        assert_eq!(stored, "z");
    }

    #[test]
    fn duplicate_id_rolls_the_whole_load_back() {
        let s = schema("<!ELEMENT a (c*)>\n<!ELEMENT c (#PCDATA)>", "a");
        let mut conn = Connection::open_in_memory().unwrap();
        create_schema(&s, &conn).unwrap();
        let mut rows = shred(&read_xml("<a><c>y</c><c>z</c></a>").unwrap(), &s).unwrap();
        rows.rows[2].id = 1; // collide with the first c row
        let err = load(&rows, &s, &mut conn).unwrap_err();
        assert!(matches!(err, LoadError::IdCollision { ref table, id: 1 } if table == "c"));
        let count: i64 = conn
            .query_row("SELECT COUNT(*) FROM \"a\"", [], |r| r.get(0))
            .unwrap();
        assert_eq!(count, 0);
    }

    #[test]
    fn orphan_child_is_a_constraint_violation() {
        let s = schema("<!ELEMENT a (c*)>\n<!ELEMENT c (#PCDATA)>", "a");
        let mut conn = Connection::open_in_memory().unwrap();
        create_schema(&s, &conn).unwrap();
        let mut rows = shred(&read_xml("<a><c>y</c></a>").unwrap(), &s).unwrap();
        rows.rows[1].parent_id = Some(99);
        let err = load(&rows, &s, &mut conn).unwrap_err();
        assert!(matches!(err, LoadError::ConstraintViolation { ref table, .. } if table == "c"));
    }

    #[test]
    fn rebase_shifts_ids_past_existing_rows() {
        let s = schema("<!ELEMENT a (c*)>\n<!ELEMENT c (#PCDATA)>", "a");
        let mut conn = Connection::open_in_memory().unwrap();
        create_schema(&s, &conn).unwrap();
        let first = shred(&read_xml("<a><c>y</c><c>z</c></a>").unwrap(), &s).unwrap();
        load(&first, &s, &mut conn).unwrap();
        let second = shred(&read_xml("<a><c>w</c></a>").unwrap(), &s).unwrap();
        let shifted = rebase(&second, &conn).unwrap();
        assert_eq!(shifted.rows[0].id, 2); // a table held one row
        assert_eq!(shifted.rows[1].id, 3); // c table held two
        assert_eq!(shifted.rows[1].parent_id, Some(2));
        load(&shifted, &s, &mut conn).unwrap();
        let count: i64 = conn
            .query_row("SELECT COUNT(*) FROM \"c\"", [], |r| r.get(0))
            .unwrap();
        assert_eq!(count, 3);
    }
}
