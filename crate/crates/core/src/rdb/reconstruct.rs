//! Rows-to-document rebuilding. Child tables are read back in `pos` order
//! and fitted to the owning element's content model with a small
//! backtracking matcher; inlined columns turn back into leaf elements.
//!
//! One storage ambiguity is inherent: an absent optional character-data
//! leaf and a present-but-empty one both store NULL. Reconstruction renders
//! the present-but-empty form, which re-shreds to the same rows. Presence
//! flags for empty-content leaves carry no such ambiguity.

use std::cell::Cell;
use std::collections::HashSet;

use rusqlite::types::ValueRef;
use rusqlite::Connection;
use thiserror::Error;

use crate::dtd::{ContentModel, GroupKind, Multiplicity, Particle, Term};
use crate::xml::{Element, Node, XmlDocument};

use super::sql::quote;
use super::{Mapping, RelationalSchema, Table, Value};

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("no row with id {0} in the root table")]
    UnknownRootId(i64),
    #[error("rows under `{element}` do not fit its content model")]
    Unreconstructable { element: String },
    #[error("database error: {0}")]
    Database(String),
}

pub fn reconstruct(
    conn: &Connection,
    schema: &RelationalSchema,
    root_id: i64,
) -> Result<XmlDocument, ReconstructError> {
    let builder = Builder { conn, schema };
    let root_table = schema.root_table();
    let values = builder
        .fetch_row(root_table, root_id)?
        .ok_or(ReconstructError::UnknownRootId(root_id))?;
    let root = builder.build_element(&schema.root, root_id, &values)?;
    Ok(XmlDocument { root })
}

/// One stored child row: sibling position, element name, row id, column values.
type ChildRow = (i64, String, i64, Vec<(String, Value)>);

fn db_err(e: rusqlite::Error) -> ReconstructError {
    ReconstructError::Database(e.to_string())
}

fn value_from(vr: ValueRef<'_>) -> Value {
    match vr {
        ValueRef::Null => Value::Null,
        ValueRef::Integer(i) => Value::Int(i),
        ValueRef::Real(f) => Value::Real(f),
        ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Value::Text(String::from_utf8_lossy(b).into_owned()),
    }
}

fn text_of(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Int(i) => i.to_string(),
        Value::Real(f) => f.to_string(),
        Value::Text(s) => s.clone(),
    }
}

fn lookup<'v>(values: &'v [(String, Value)], column: &str) -> Option<&'v Value> {
    values.iter().find(|(c, _)| c == column).map(|(_, v)| v)
}

fn data_columns(table: &Table) -> Vec<&str> {
    table
        .columns
        .iter()
        .map(|c| c.name.as_str())
        .filter(|n| {
            *n != "id"
                && !(table.has_parent_link && (*n == "parent_id" || *n == "pos"))
                && !(table.has_parent_table_column && *n == "parent_table")
        })
        .collect()
}

struct Builder<'a> {
    conn: &'a Connection,
    schema: &'a RelationalSchema,
}

/// A child row with its subtree already rebuilt, ready for the matcher.
struct BuiltChild {
    pos: i64,
    name: String,
    node: Element,
}

impl Builder<'_> {
    fn fetch_row(
        &self,
        table: &Table,
        id: i64,
    ) -> Result<Option<Vec<(String, Value)>>, ReconstructError> {
        let cols = data_columns(table);
        let sql = format!(
            "SELECT {} FROM {} WHERE \"id\" = ?1",
            if cols.is_empty() {
                "NULL".to_string()
            } else {
                cols.iter().map(|c| quote(c)).collect::<Vec<_>>().join(", ")
            },
            quote(&table.name)
        );
        let mut stmt = self.conn.prepare(&sql).map_err(db_err)?;
        let mut rows = stmt.query([id]).map_err(db_err)?;
        match rows.next().map_err(db_err)? {
            None => Ok(None),
            Some(row) => {
                let mut values = Vec::new();
                for (i, col) in cols.iter().enumerate() {
                    values.push((col.to_string(), value_from(row.get_ref(i).map_err(db_err)?)));
                }
                Ok(Some(values))
            }
        }
    }

    /// All stored children of one row, across every child table, merged in
    /// sibling-position order.
    fn fetch_children(
        &self,
        parent: &Table,
        parent_id: i64,
    ) -> Result<Vec<ChildRow>, ReconstructError> {
        let mut out = Vec::new();
        for (element, mapping) in &self.schema.mapping {
            let Mapping::OwnTable { table, parents, .. } = mapping else {
                continue;
            };
            if !parents.iter().any(|p| p == &parent.name) {
                continue;
            }
            let child_table = self.schema.table(table).expect("mapped table exists");
            let cols = data_columns(child_table);
            let mut sql = format!(
                "SELECT \"id\", \"pos\"{} FROM {} WHERE \"parent_id\" = ?1",
                cols.iter()
                    .map(|c| format!(", {}", quote(c)))
                    .collect::<String>(),
                quote(&child_table.name)
            );
            if child_table.has_parent_table_column {
                sql.push_str(" AND \"parent_table\" = ?2");
            }
            sql.push_str(" ORDER BY \"pos\"");
            let mut stmt = self.conn.prepare(&sql).map_err(db_err)?;
            let mut collect = |rows: &mut rusqlite::Rows<'_>| -> Result<(), ReconstructError> {
                while let Some(row) = rows.next().map_err(db_err)? {
                    let id: i64 = row.get(0).map_err(db_err)?;
                    let pos: i64 = row.get(1).map_err(db_err)?;
                    let mut values = Vec::new();
                    for (i, col) in cols.iter().enumerate() {
                        values.push((
                            col.to_string(),
                            value_from(row.get_ref(i + 2).map_err(db_err)?),
                        ));
                    }
                    out.push((pos, element.clone(), id, values));
                }
                Ok(())
            };
            if child_table.has_parent_table_column {
                let mut rows = stmt
                    .query(rusqlite::params![parent_id, &parent.name])
                    .map_err(db_err)?;
                collect(&mut rows)?;
            } else {
                let mut rows = stmt.query([parent_id]).map_err(db_err)?;
                collect(&mut rows)?;
            }
        }
        out.sort_by_key(|r| r.0);
        Ok(out)
    }

    fn build_element(
        &self,
        element: &str,
        id: i64,
        values: &[(String, Value)],
    ) -> Result<Element, ReconstructError> {
        let Some(Mapping::OwnTable {
            table,
            value_column,
            attr_columns,
            ..
        }) = self.schema.mapping.get(element)
        else {
            return Err(ReconstructError::Database(format!(
                "element `{element}` has no table mapping"
            )));
        };
        let table_def = self.schema.table(table).expect("mapped table exists");

        let mut el = Element::new(element);
        for ac in attr_columns {
            if let Some(v) = lookup(values, &ac.column) {
                if !v.is_null() {
                    el.attributes.insert(ac.attr.clone(), text_of(v));
                }
            }
        }
        match self.schema.dtd.elements.get(element) {
            Some(ContentModel::Empty) | None => {}
            Some(ContentModel::PcdataOnly) => {
                if let Some(column) = value_column {
                    if let Some(v) = lookup(values, column) {
                        if !v.is_null() {
                            let text = text_of(v);
                            if !text.is_empty() {
                                el.children.push(Node::Text(text));
                            }
                        }
                    }
                }
            }
            Some(ContentModel::Children(particle)) => {
                let mut built = Vec::new();
                for (pos, child_element, child_id, child_values) in
                    self.fetch_children(table_def, id)?
                {
                    built.push(BuiltChild {
                        pos,
                        name: child_element.clone(),
                        node: self.build_element(&child_element, child_id, &child_values)?,
                    });
                }
                el.children = self.fit(element, particle, &built, values)?;
            }
        }
        Ok(el)
    }

    /// Arrange built children and inlined columns into the one child list
    /// that satisfies the content model and consumes every stored row.
    fn fit(
        &self,
        element: &str,
        particle: &Particle,
        rows: &[BuiltChild],
        parent_values: &[(String, Value)],
    ) -> Result<Vec<Node>, ReconstructError> {
        let matcher = Matcher {
            schema: self.schema,
            element,
            rows,
            parent_values,
            work: Cell::new(0),
        };
        // Inlined leaves whose column proves they were present must appear
        // in the output; NULL leaves each legitimately match either way.
        let mandatory: HashSet<&str> = self
            .schema
            .mapping
            .iter()
            .filter_map(|(name, m)| match m {
                Mapping::Inlined {
                    owner_element,
                    column,
                    presence,
                    ..
                } if owner_element == element => {
                    let definite = match lookup(parent_values, column) {
                        Some(Value::Int(i)) if *presence => *i != 0,
                        Some(v) if !presence => !v.is_null(),
                        _ => false,
                    };
                    definite.then_some(name.as_str())
                }
                _ => None,
            })
            .collect();
        let init = MatchState {
            next: 0,
            cursor: 0,
            out: Vec::new(),
            emitted: HashSet::new(),
        };
        let states = matcher.match_particle(particle, init)?;
        states
            .into_iter()
            .find(|s| s.next == rows.len() && mandatory.iter().all(|m| s.emitted.contains(*m)))
            .map(|s| s.out)
            .ok_or_else(|| ReconstructError::Unreconstructable {
                element: element.to_string(),
            })
    }
}

#[derive(Clone)]
struct MatchState {
    /// Next unconsumed stored child row.
    next: usize,
    /// Index of the next child slot, counting inlined children too.
    cursor: i64,
    out: Vec<Node>,
    emitted: HashSet<String>,
}

impl MatchState {
    fn progress_key(&self) -> (usize, i64, usize) {
        (self.next, self.cursor, self.out.len())
    }
}

struct Matcher<'a> {
    schema: &'a RelationalSchema,
    element: &'a str,
    rows: &'a [BuiltChild],
    parent_values: &'a [(String, Value)],
    work: Cell<usize>,
}

impl Matcher<'_> {
    fn charge(&self) -> Result<(), ReconstructError> {
        let n = self.work.get() + 1;
        self.work.set(n);
        if n > 200_000 {
            return Err(ReconstructError::Unreconstructable {
                element: self.element.to_string(),
            });
        }
        Ok(())
    }

    /// All ways this particle can match from `state`, preferred first:
    /// emission over omission, longer repetition over shorter.
    fn match_particle(
        &self,
        particle: &Particle,
        state: MatchState,
    ) -> Result<Vec<MatchState>, ReconstructError> {
        self.charge()?;
        match particle.rep {
            Multiplicity::One => self.match_term(&particle.term, state),
            Multiplicity::Optional => {
                let mut states = self.match_term(&particle.term, state.clone())?;
                states.push(state);
                Ok(states)
            }
            Multiplicity::Star => self.repeat(&particle.term, state, 0),
            Multiplicity::Plus => self.repeat(&particle.term, state, 1),
        }
    }

    fn repeat(
        &self,
        term: &Term,
        state: MatchState,
        min: usize,
    ) -> Result<Vec<MatchState>, ReconstructError> {
        let initial_key = state.progress_key();
        let mut nullable = false;
        let mut levels: Vec<Vec<MatchState>> = vec![vec![state]];
        loop {
            let mut next_level = Vec::new();
            for s in levels.last().unwrap() {
                let key = s.progress_key();
                for r in self.match_term(term, s.clone())? {
                    // A zero-width iteration would repeat forever; just note
                    // that the body can match nothing.
                    if r.progress_key() != key {
                        next_level.push(r);
                    } else if key == initial_key {
                        nullable = true;
                    }
                }
            }
            if next_level.is_empty() {
                break;
            }
            levels.push(next_level);
        }
        let mut out = Vec::new();
        if levels.len() > min {
            for level in levels[min..].iter().rev() {
                out.extend(level.iter().cloned());
            }
        }
        // `+` over a body that can match nothing: a single empty iteration
        // is a legitimate match, preferred after any real content.
        if min == 1 && nullable {
            out.push(levels[0][0].clone());
        }
        Ok(out)
    }

    fn match_term(
        &self,
        term: &Term,
        state: MatchState,
    ) -> Result<Vec<MatchState>, ReconstructError> {
        self.charge()?;
        match term {
            Term::Name(name) => self.match_name(name, state),
            Term::Group {
                kind: GroupKind::Sequence,
                items,
            } => {
                let mut states = vec![state];
                for item in items {
                    let mut next = Vec::new();
                    for s in states {
                        next.extend(self.match_particle(item, s)?);
                    }
                    states = next;
                    if states.is_empty() {
                        break;
                    }
                }
                Ok(states)
            }
            Term::Group {
                kind: GroupKind::Choice,
                items,
            } => {
                let mut out = Vec::new();
                for item in items {
                    out.extend(self.match_particle(item, state.clone())?);
                }
                Ok(out)
            }
        }
    }

    fn match_name(
        &self,
        name: &str,
        state: MatchState,
    ) -> Result<Vec<MatchState>, ReconstructError> {
        match self.schema.mapping.get(name) {
            Some(Mapping::Inlined {
                column,
                presence,
                attr_columns,
                ..
            }) => {
                let stored = lookup(self.parent_values, column);
                let text = if *presence {
                    match stored {
                        Some(Value::Int(i)) if *i != 0 => None,
                        // Flag says absent: the element cannot match here.
                        _ => return Ok(Vec::new()),
                    }
                } else {
                    match stored {
                        Some(v) if !v.is_null() => Some(text_of(v)),
                        // NULL: render as present-but-empty; an enclosing
                        // optional supplies the omission alternative.
                        _ => None,
                    }
                };
                let mut el = Element::new(name);
                for ac in attr_columns {
                    if let Some(v) = lookup(self.parent_values, &ac.column) {
                        if !v.is_null() {
                            el.attributes.insert(ac.attr.clone(), text_of(v));
                        }
                    }
                }
                if let Some(text) = text {
                    if !text.is_empty() {
                        el.children.push(Node::Text(text));
                    }
                }
                let mut next = state;
                next.cursor += 1;
                next.out.push(Node::Element(el));
                next.emitted.insert(name.to_string());
                Ok(vec![next])
            }
            Some(Mapping::OwnTable { .. }) => {
                let candidate = self.rows.get(state.next);
                match candidate {
                    Some(row) if row.name == name && row.pos == state.cursor => {
                        let mut next = state;
                        next.next += 1;
                        next.cursor += 1;
                        next.out.push(Node::Element(row.node.clone()));
                        Ok(vec![next])
                    }
                    _ => Ok(Vec::new()),
                }
            }
            None => Ok(Vec::new()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtd::parse_dtd;
    use crate::rdb::{create_schema, dtd_to_relational, load, shred};
    use crate::xml::{read_xml, write_xml};

    fn round_trip(dtd: &str, root: &str, doc: &str) -> String {
        let schema = dtd_to_relational(&parse_dtd(dtd).unwrap(), root).unwrap();
        let mut conn = Connection::open_in_memory().unwrap();
        create_schema(&schema, &conn).unwrap();
        let rows = shred(&read_xml(doc).unwrap(), &schema).unwrap();
        load(&rows, &schema, &mut conn).unwrap();
        write_xml(&reconstruct(&conn, &schema, 1).unwrap())
    }

    #[test]
    fn nested_repetition_comes_back_in_document_order() {
        let dtd = "<!ELEMENT a (b*)>\n<!ELEMENT b (c*)>\n<!ELEMENT c (#PCDATA)>";
        let doc = "<a><b><c>1</c></b><b><c>2</c><c>3</c></b></a>";
        assert_eq!(
            round_trip(dtd, "a", doc),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<a>\n  <b>\n    <c>1</c>\n  </b>\n  <b>\n    <c>2</c>\n    <c>3</c>\n  </b>\n</a>\n"
        );
    }

    #[test]
    fn inlined_leaves_and_attributes_come_back() {
        let dtd = "<!ELEMENT a (b, c*)>\n<!ELEMENT b (#PCDATA)>\n<!ELEMENT c (#PCDATA)>\n<!ATTLIST b kind CDATA #REQUIRED>";
        let doc = "<a><b kind=\"k\">x</b><c>y</c></a>";
        assert_eq!(
            round_trip(dtd, "a", doc),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<a>\n  <b kind=\"k\">x</b>\n  <c>y</c>\n</a>\n"
        );
    }

    #[test]
    fn sibling_positions_decide_whether_an_optional_leaf_was_absent() {
        let dtd = "<!ELEMENT a (b?, c*)>\n<!ELEMENT b (#PCDATA)>\n<!ELEMENT c (#PCDATA)>";
        assert_eq!(
            round_trip(dtd, "a", "<a><c>x</c></a>"),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<a>\n  <c>x</c>\n</a>\n"
        );
        assert_eq!(
            round_trip(dtd, "a", "<a><b/><c>x</c></a>"),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<a>\n  <b/>\n  <c>x</c>\n</a>\n"
        );
    }

    #[test]
    fn presence_flags_round_trip_exactly() {
        let dtd = "<!ELEMENT a (b?, c?)>\n<!ELEMENT b EMPTY>\n<!ELEMENT c EMPTY>";
        assert_eq!(
            round_trip(dtd, "a", "<a><c/></a>"),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<a>\n  <c/>\n</a>\n"
        );
        assert_eq!(
            round_trip(dtd, "a", "<a/>"),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<a/>\n"
        );
    }

    #[test]
    fn choice_branches_are_recovered_from_row_names() {
        let dtd = "<!ELEMENT a (b | c)+>\n<!ELEMENT b (#PCDATA)>\n<!ELEMENT c (#PCDATA)>";
        assert_eq!(
            round_trip(dtd, "a", "<a><c>1</c><b>2</b><c>3</c></a>"),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<a>\n  <c>1</c>\n  <b>2</b>\n  <c>3</c>\n</a>\n"
        );
    }

    #[test]
    fn plus_over_optional_body_can_match_nothing() {
        let dtd = "<!ELEMENT a (b?)+>\n<!ELEMENT b (#PCDATA)>";
        assert_eq!(
            round_trip(dtd, "a", "<a/>"),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<a/>\n"
        );
        // real content is still preferred over the empty iteration
        assert_eq!(
            round_trip(dtd, "a", "<a><b>x</b><b>y</b></a>"),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<a>\n  <b>x</b>\n  <b>y</b>\n</a>\n"
        );
    }

    #[test]
    fn unknown_root_id_is_reported() {
        let schema = dtd_to_relational(&parse_dtd("<!ELEMENT a EMPTY>").unwrap(), "a").unwrap();
        let conn = Connection::open_in_memory().unwrap();
        create_schema(&schema, &conn).unwrap();
        let err = reconstruct(&conn, &schema, 7).unwrap_err();
        assert!(matches!(err, ReconstructError::UnknownRootId(7)));
    }

    #[test]
    fn multi_parent_children_return_to_the_right_parent() {
        let dtd =
            "<!ELEMENT a (b, c)>\n<!ELEMENT b (d*)>\n<!ELEMENT c (d*)>\n<!ELEMENT d (#PCDATA)>";
        let doc = "<a><b><d>1</d></b><c><d>2</d><d>3</d></c></a>";
        assert_eq!(
            round_trip(dtd, "a", doc),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<a>\n  <b>\n    <d>1</d>\n  </b>\n  <c>\n    <d>2</d>\n    <d>3</d>\n  </c>\n</a>\n"
        );
    }
}
