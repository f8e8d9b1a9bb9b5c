//! Document-to-rows conversion. Expects a document that already validates
//! against the DTD the schema was compiled from; structural mismatches it
//! can detect on its own are reported, not silently dropped.

use std::collections::HashSet;

use thiserror::Error;

use crate::xml::{Element, Node, XmlDocument};

use super::{Mapping, RelationalSchema, Row, RowSet, SqlType, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShredError {
    #[error("element `{0}` does not fit the schema")]
    SchemaMismatch(String),
    #[error("empty `{element}` cannot be stored: column `{column}` forbids NULL")]
    NullViolation { element: String, column: String },
}

/// Flatten a document into rows, parents before children. Surrogate ids
/// count from 1 per table; `pos` is the element's index among all element
/// children of its parent, inlined siblings included.
pub fn shred(doc: &XmlDocument, schema: &RelationalSchema) -> Result<RowSet, ShredError> {
    if doc.root.name != schema.root {
        return Err(ShredError::SchemaMismatch(doc.root.name.clone()));
    }
    let mut shredder = Shredder {
        schema,
        counters: Vec::new(),
        rows: Vec::new(),
    };
    shredder.own_row(&doc.root, None, 0)?;
    Ok(RowSet {
        rows: shredder.rows,
    })
}

struct Shredder<'a> {
    schema: &'a RelationalSchema,
    counters: Vec<(String, i64)>,
    rows: Vec<Row>,
}

impl Shredder<'_> {
    fn next_id(&mut self, table: &str) -> i64 {
        if let Some(entry) = self.counters.iter_mut().find(|(t, _)| t == table) {
            entry.1 += 1;
            return entry.1;
        }
        self.counters.push((table.to_string(), 1));
        1
    }

    fn own_row(
        &mut self,
        el: &Element,
        parent: Option<(&str, i64)>,
        pos: i64,
    ) -> Result<(), ShredError> {
        let Some(Mapping::OwnTable {
            table,
            value_column,
            attr_columns,
            ..
        }) = self.schema.mapping.get(&el.name)
        else {
            return Err(ShredError::SchemaMismatch(el.name.clone()));
        };
        let table = table.clone();
        let table_def = self.schema.table(&table).expect("mapped table exists");
        let id = self.next_id(&table);

        // Data columns in table order; presence flags start at 0 (absent).
        let presence_columns: HashSet<String> = self
            .schema
            .mapping
            .values()
            .filter_map(|m| match m {
                Mapping::Inlined {
                    owner_table,
                    column,
                    presence: true,
                    ..
                } if *owner_table == table => Some(column.clone()),
                _ => None,
            })
            .collect();
        let mut values: Vec<(String, Value)> = Vec::new();
        for col in &table_def.columns {
            let structural = col.name == "id"
                || (table_def.has_parent_link && (col.name == "parent_id" || col.name == "pos"))
                || (table_def.has_parent_table_column && col.name == "parent_table");
            if structural {
                continue;
            }
            let initial = if presence_columns.contains(&col.name) {
                Value::Int(0)
            } else {
                Value::Null
            };
            values.push((col.name.clone(), initial));
        }

        let row_index = self.rows.len();
        self.rows.push(Row {
            table: table.clone(),
            id,
            parent_id: parent.map(|(_, pid)| pid),
            parent_table: parent.map(|(pt, _)| pt.to_string()),
            pos,
            values,
        });

        self.set_attributes(row_index, el, attr_columns)?;

        if let Some(value_column) = value_column.clone() {
            // Character-data element: no element children allowed.
            if el.child_elements().next().is_some() {
                return Err(ShredError::SchemaMismatch(el.name.clone()));
            }
            let text = el.text();
            if !text.is_empty() {
                self.set_value(row_index, &value_column, Value::Text(text));
            }
            return Ok(());
        }

        let mut written: HashSet<String> = HashSet::new();
        let mut child_pos = 0i64;
        for node in &el.children {
            match node {
                Node::Text(text) => {
                    if !text.trim().is_empty() {
                        return Err(ShredError::SchemaMismatch(el.name.clone()));
                    }
                }
                Node::Element(child) => {
                    match self.schema.mapping.get(&child.name).cloned() {
                        Some(Mapping::Inlined {
                            owner_table,
                            column,
                            presence,
                            nullable,
                            attr_columns,
                            ..
                        }) => {
                            if owner_table != table || !written.insert(column.clone()) {
                                return Err(ShredError::SchemaMismatch(child.name.clone()));
                            }
                            self.inline_child(
                                row_index,
                                child,
                                &column,
                                presence,
                                nullable,
                                &attr_columns,
                            )?;
                        }
                        Some(Mapping::OwnTable { .. }) => {
                            self.own_row(child, Some((&table, id)), child_pos)?;
                        }
                        None => return Err(ShredError::SchemaMismatch(child.name.clone())),
                    }
                    child_pos += 1;
                }
            }
        }
        Ok(())
    }

    fn inline_child(
        &mut self,
        row_index: usize,
        child: &Element,
        column: &str,
        presence: bool,
        nullable: bool,
        attr_columns: &[super::AttrCol],
    ) -> Result<(), ShredError> {
        self.set_attributes(row_index, child, attr_columns)?;
        if presence {
            if !child.is_empty() || child.child_elements().next().is_some() {
                return Err(ShredError::SchemaMismatch(child.name.clone()));
            }
            self.set_value(row_index, column, Value::Int(1));
            return Ok(());
        }
        if child.child_elements().next().is_some() {
            return Err(ShredError::SchemaMismatch(child.name.clone()));
        }
        let text = child.text();
        if !text.is_empty() {
            self.set_value(row_index, column, Value::Text(text));
        } else if !nullable {
            // An empty element still occupies a mandatory slot; TEXT columns
            // hold it as the empty string.
            let table = self.rows[row_index].table.clone();
            let col_def = self
                .schema
                .table(&table)
                .and_then(|t| t.column(column))
                .expect("mapped column exists");
            if col_def.ty == SqlType::Text {
                self.set_value(row_index, column, Value::Text(String::new()));
            } else {
                return Err(ShredError::NullViolation {
                    element: child.name.clone(),
                    column: column.to_string(),
                });
            }
        }
        Ok(())
    }

    fn set_attributes(
        &mut self,
        row_index: usize,
        el: &Element,
        attr_columns: &[super::AttrCol],
    ) -> Result<(), ShredError> {
        for (name, _) in &el.attributes {
            if !attr_columns.iter().any(|ac| &ac.attr == name) {
                return Err(ShredError::SchemaMismatch(el.name.clone()));
            }
        }
        for ac in attr_columns {
            // Absent fixed attributes default to their declared value.
            let value = el
                .attributes
                .get(&ac.attr)
                .cloned()
                .or_else(|| ac.fixed.clone());
            if let Some(v) = value {
                self.set_value(row_index, &ac.column, Value::Text(v));
            }
        }
        Ok(())
    }

    fn set_value(&mut self, row_index: usize, column: &str, value: Value) {
        let slot = self.rows[row_index]
            .values
            .iter_mut()
            .find(|(c, _)| c == column)
            .expect("column present in row template");
        slot.1 = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtd::parse_dtd;
    use crate::rdb::dtd_to_relational;
    use crate::xml::read_xml;

    fn schema(dtd: &str, root: &str) -> RelationalSchema {
        dtd_to_relational(&parse_dtd(dtd).unwrap(), root).unwrap()
    }

    fn rows(dtd: &str, root: &str, doc: &str) -> RowSet {
        shred(&read_xml(doc).unwrap(), &schema(dtd, root)).unwrap()
    }

    #[test]
    fn ids_count_per_table_and_pos_counts_every_child() {
        let set = rows(
            "<!ELEMENT a (b, c*)>\n<!ELEMENT b (#PCDATA)>\n<!ELEMENT c (#PCDATA)>",
            "a",
            "<a><b>x</b><c>y</c><c>z</c></a>",
        );
        assert_eq!(set.len(), 3);
        let a = &set.rows[0];
        assert_eq!((a.table.as_str(), a.id, a.parent_id), ("a", 1, None));
        assert_eq!(
            a.values,
            vec![("b".to_string(), Value::Text("x".to_string()))]
        );
        let c1 = &set.rows[1];
        assert_eq!(
            (c1.table.as_str(), c1.id, c1.parent_id, c1.pos),
            ("c", 1, Some(1), 1)
        );
        assert_eq!(c1.values[0].1, Value::Text("y".to_string()));
        let c2 = &set.rows[2];
        assert_eq!((c2.id, c2.pos), (2, 2));
    }

    #[test]
    fn absent_optional_leaf_stores_null_and_empty_mandatory_leaf_stores_empty_string() {
        let dtd = "<!ELEMENT a (b, c?)>\n<!ELEMENT b (#PCDATA)>\n<!ELEMENT c (#PCDATA)>";
        let set = rows(dtd, "a", "<a><b></b></a>");
        assert_eq!(
            set.rows[0].values,
            vec![
                ("b".to_string(), Value::Text(String::new())),
                ("c".to_string(), Value::Null),
            ]
        );
        // Present-but-empty optional leaf is also NULL: the column cannot
        // tell the two apart, and absence is the canonical reading.
        let set = rows(dtd, "a", "<a><b>x</b><c></c></a>");
        assert_eq!(set.rows[0].values[1], ("c".to_string(), Value::Null));
    }

    #[test]
    fn presence_flag_records_empty_leaves() {
        let dtd = "<!ELEMENT a (b?, c)>\n<!ELEMENT b EMPTY>\n<!ELEMENT c EMPTY>";
        let set = rows(dtd, "a", "<a><c/></a>");
        assert_eq!(
            set.rows[0].values,
            vec![
                ("b".to_string(), Value::Int(0)),
                ("c".to_string(), Value::Int(1))
            ]
        );
    }

    #[test]
    fn attributes_land_in_their_columns_and_fixed_ones_default() {
        let dtd = "<!ELEMENT a (b)>\n<!ELEMENT b (#PCDATA)>\n<!ATTLIST a lang CDATA #IMPLIED\n  rel CDATA #FIXED \"canonical\">";
        let set = rows(dtd, "a", "<a><b>t</b></a>");
        assert_eq!(
            set.rows[0].values,
            vec![
                ("lang".to_string(), Value::Null),
                ("rel".to_string(), Value::Text("canonical".to_string())),
                ("b".to_string(), Value::Text("t".to_string())),
            ]
        );
    }

    #[test]
    fn wrong_root_and_unknown_elements_are_mismatches() {
        let s = schema("<!ELEMENT a (#PCDATA)>", "a");
        let err = shred(&read_xml("<z/>").unwrap(), &s).unwrap_err();
        assert_eq!(err, ShredError::SchemaMismatch("z".to_string()));
    }

    #[test]
    fn duplicated_single_shot_leaf_is_a_mismatch() {
        let s = schema("<!ELEMENT a (b)>\n<!ELEMENT b (#PCDATA)>", "a");
        let err = shred(&read_xml("<a><b>x</b><b>y</b></a>").unwrap(), &s).unwrap_err();
        assert_eq!(err, ShredError::SchemaMismatch("b".to_string()));
    }

    #[test]
    fn unmapped_attribute_is_a_mismatch() {
        let s = schema("<!ELEMENT a (#PCDATA)>", "a");
        let err = shred(&read_xml("<a lang=\"en\">x</a>").unwrap(), &s).unwrap_err();
        assert_eq!(err, ShredError::SchemaMismatch("a".to_string()));
    }

    #[test]
    fn nested_tables_get_parent_ids_in_document_order() {
        let set = rows(
            "<!ELEMENT a (b*)>\n<!ELEMENT b (c*)>\n<!ELEMENT c (#PCDATA)>",
            "a",
            "<a><b><c>1</c></b><b><c>2</c><c>3</c></b></a>",
        );
        let tags: Vec<(&str, i64, Option<i64>, i64)> = set
            .rows
            .iter()
            .map(|r| (r.table.as_str(), r.id, r.parent_id, r.pos))
            .collect();
        assert_eq!(
            tags,
            vec![
                ("a", 1, None, 0),
                ("b", 1, Some(1), 0),
                ("c", 1, Some(1), 0),
                ("b", 2, Some(1), 1),
                ("c", 2, Some(2), 0),
                ("c", 3, Some(2), 1),
            ]
        );
    }

    #[test]
    fn multi_parent_rows_remember_their_parent_table() {
        let set = rows(
            "<!ELEMENT a (b, c)>\n<!ELEMENT b (d*)>\n<!ELEMENT c (d*)>\n<!ELEMENT d (#PCDATA)>",
            "a",
            "<a><b><d>1</d></b><c><d>2</d></c></a>",
        );
        let d_rows: Vec<(&str, i64)> = set
            .rows
            .iter()
            .filter(|r| r.table == "d")
            .map(|r| (r.parent_table.as_deref().unwrap(), r.id))
            .collect();
        assert_eq!(d_rows, vec![("b", 1), ("c", 2)]);
    }
}
