//! Content-model analysis that decides, element by element, between a
//! dedicated table and an inlined column on the parent's table.

use indexmap::{IndexMap, IndexSet};
use thiserror::Error;

use crate::dtd::{AttDefault, ContentModel, DtdAst, GroupKind, Multiplicity, Particle, Term};

use super::{AttrCol, Column, Mapping, RelationalSchema, SqlType, Table};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("root element `{0}` is not declared")]
    UnknownRoot(String),
    #[error("root element `{0}` is referenced inside a content model")]
    RootNotTopLevel(String),
    #[error("gave up deriving a name for `{0}` after 99 collisions")]
    NameCollisionOverflow(String),
}

/// How one `Term::Name` reference sits inside its parent's content model.
struct Occurrence {
    parent: String,
    /// Some enclosing group (or the reference itself) is a choice member.
    in_choice: bool,
    /// Some multiplicity on the path admits repetition.
    repeatable: bool,
    /// Every multiplicity on the path is exactly one.
    all_one: bool,
}

fn scan_particle(
    parent: &str,
    particle: &Particle,
    in_choice: bool,
    repeatable: bool,
    all_one: bool,
    out: &mut IndexMap<String, Vec<Occurrence>>,
) {
    let repeatable = repeatable || particle.rep.admits_many();
    let all_one = all_one && particle.rep == Multiplicity::One;
    match &particle.term {
        Term::Name(name) => out.entry(name.clone()).or_default().push(Occurrence {
            parent: parent.to_string(),
            in_choice,
            repeatable,
            all_one,
        }),
        Term::Group { kind, items } => {
            let in_choice = in_choice || *kind == GroupKind::Choice;
            for item in items {
                scan_particle(parent, item, in_choice, repeatable, all_one, out);
            }
        }
    }
}

/// Name references of a content model in document order, duplicates kept.
fn names_in_order(particle: &Particle, out: &mut Vec<String>) {
    match &particle.term {
        Term::Name(name) => out.push(name.clone()),
        Term::Group { items, .. } => {
            for item in items {
                names_in_order(item, out);
            }
        }
    }
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .to_ascii_lowercase()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "x".to_string()
    } else {
        s
    }
}

/// Claim `base` in `used`, suffixing `_2`..`_100` on collision.
fn claim(base: &str, used: &mut IndexSet<String>) -> Result<String, CompileError> {
    if used.insert(base.to_string()) {
        return Ok(base.to_string());
    }
    for n in 2..=100u32 {
        let candidate = format!("{base}_{n}");
        if used.insert(candidate.clone()) {
            return Ok(candidate);
        }
    }
    Err(CompileError::NameCollisionOverflow(base.to_string()))
}

enum Kind {
    Own,
    Inlined {
        owner: String,
        presence: bool,
        /// The path to the single occurrence passes through an optional slot.
        optional_path: bool,
    },
}

pub fn dtd_to_relational(ast: &DtdAst, root: &str) -> Result<RelationalSchema, CompileError> {
    if !ast.elements.contains_key(root) {
        return Err(CompileError::UnknownRoot(root.to_string()));
    }

    let mut occurrences: IndexMap<String, Vec<Occurrence>> = IndexMap::new();
    for (parent, model) in &ast.elements {
        if let ContentModel::Children(particle) = model {
            scan_particle(parent, particle, false, false, true, &mut occurrences);
        }
    }
    if occurrences.contains_key(root) {
        return Err(CompileError::RootNotTopLevel(root.to_string()));
    }

    // Element-table rule: an element collapses into its parent's table only
    // when it is a character-data or empty leaf, referenced exactly once in
    // the whole DTD, outside any choice, never repeatable.
    let mut kinds: IndexMap<String, Kind> = IndexMap::new();
    for (element, model) in &ast.elements {
        let kind = if element == root {
            Kind::Own
        } else {
            match occurrences.get(element).map(Vec::as_slice) {
                Some([occ]) => {
                    let leaf = matches!(model, ContentModel::PcdataOnly | ContentModel::Empty);
                    if leaf && !occ.in_choice && !occ.repeatable {
                        Kind::Inlined {
                            owner: occ.parent.clone(),
                            presence: matches!(model, ContentModel::Empty),
                            optional_path: !occ.all_one,
                        }
                    } else {
                        Kind::Own
                    }
                }
                _ => Kind::Own,
            }
        };
        kinds.insert(element.clone(), kind);
    }

    // Table names, declaration order. `sqlite_`-prefixed names are illegal
    // for user tables, and the registry table name is spoken for.
    let mut used_tables: IndexSet<String> = IndexSet::new();
    used_tables.insert("_ods_registry".to_string());
    let mut table_names: IndexMap<String, String> = IndexMap::new();
    for (element, kind) in &kinds {
        if matches!(kind, Kind::Own) {
            let mut base = sanitize(element);
            if base.starts_with("sqlite_") {
                base = format!("t_{base}");
            }
            table_names.insert(element.clone(), claim(&base, &mut used_tables)?);
        }
    }

    // Parent tables per own-table element, first-reference order.
    let mut parent_elements: IndexMap<&str, Vec<&str>> = IndexMap::new();
    for (element, occs) in &occurrences {
        if !matches!(kinds[element.as_str()], Kind::Own) {
            continue;
        }
        let entry = parent_elements.entry(element.as_str()).or_default();
        for occ in occs {
            if !entry.contains(&occ.parent.as_str()) {
                entry.push(occ.parent.as_str());
            }
        }
    }

    let mut tables: IndexMap<String, Table> = IndexMap::new();
    let mut mappings: IndexMap<String, Mapping> = IndexMap::new();

    for (element, kind) in &kinds {
        if !matches!(kind, Kind::Own) {
            continue;
        }
        let model = &ast.elements[element.as_str()];
        let table_name = table_names[element.as_str()].clone();
        let is_root = element == root;
        let parents: Vec<&str> = parent_elements
            .get(element.as_str())
            .cloned()
            .unwrap_or_default();
        let reachable = is_root || !parents.is_empty();
        let multi_parent = parents.len() > 1;

        let mut used: IndexSet<String> = IndexSet::new();
        let mut columns: Vec<Column> = Vec::new();

        used.insert("id".to_string());
        columns.push(Column {
            name: "id".to_string(),
            ty: SqlType::Integer,
            nullable: false,
        });
        if !is_root {
            used.insert("parent_id".to_string());
            columns.push(Column {
                name: "parent_id".to_string(),
                ty: SqlType::Integer,
                nullable: !reachable,
            });
            if multi_parent {
                used.insert("parent_table".to_string());
                columns.push(Column {
                    name: "parent_table".to_string(),
                    ty: SqlType::Text,
                    nullable: false,
                });
            }
            used.insert("pos".to_string());
            columns.push(Column {
                name: "pos".to_string(),
                ty: SqlType::Integer,
                nullable: !reachable,
            });
        }

        let value_column = if matches!(model, ContentModel::PcdataOnly) {
            let name = claim("value", &mut used)?;
            columns.push(Column {
                name: name.clone(),
                ty: SqlType::Text,
                nullable: true,
            });
            Some(name)
        } else {
            None
        };

        let mut attr_columns = Vec::new();
        for att in ast.atts_of(element) {
            let column = claim(&sanitize(&att.name), &mut used)?;
            columns.push(Column {
                name: column.clone(),
                ty: SqlType::Text,
                nullable: matches!(att.default, AttDefault::Implied),
            });
            let fixed = match &att.default {
                AttDefault::Fixed(v) => Some(v.clone()),
                _ => None,
            };
            attr_columns.push(AttrCol {
                attr: att.name.clone(),
                column,
                fixed,
            });
        }

        // Inlined children contribute columns in content-model order.
        if let ContentModel::Children(particle) = model {
            let mut names = Vec::new();
            names_in_order(particle, &mut names);
            for child in names {
                let (presence, optional_path) = match &kinds[child.as_str()] {
                    Kind::Inlined {
                        owner,
                        presence,
                        optional_path,
                    } if owner == element => (*presence, *optional_path),
                    _ => continue,
                };
                let base = sanitize(&child);
                let column = claim(&base, &mut used)?;
                let (ty, nullable) = if presence {
                    (SqlType::Integer, false)
                } else {
                    (SqlType::Text, optional_path)
                };
                columns.push(Column {
                    name: column.clone(),
                    ty,
                    nullable,
                });

                let mut child_attr_columns = Vec::new();
                for att in ast.atts_of(&child) {
                    let attr_column = claim(&format!("{base}_{}", sanitize(&att.name)), &mut used)?;
                    columns.push(Column {
                        name: attr_column.clone(),
                        ty: SqlType::Text,
                        nullable: matches!(att.default, AttDefault::Implied) || optional_path,
                    });
                    let fixed = match &att.default {
                        AttDefault::Fixed(v) => Some(v.clone()),
                        _ => None,
                    };
                    child_attr_columns.push(AttrCol {
                        attr: att.name.clone(),
                        column: attr_column,
                        fixed,
                    });
                }

                mappings.insert(
                    child.clone(),
                    Mapping::Inlined {
                        owner_element: element.clone(),
                        owner_table: table_name.clone(),
                        column,
                        presence,
                        nullable,
                        attr_columns: child_attr_columns,
                    },
                );
            }
        }

        let foreign_key_parent = if parents.len() == 1 {
            Some(table_names[parents[0]].clone())
        } else {
            None
        };
        tables.insert(
            element.clone(),
            Table {
                name: table_name.clone(),
                element: element.clone(),
                columns,
                foreign_key_parent,
                has_parent_link: !is_root,
                has_parent_table_column: multi_parent,
            },
        );
        mappings.insert(
            element.clone(),
            Mapping::OwnTable {
                table: table_name,
                value_column,
                attr_columns,
                parents: parents.iter().map(|p| table_names[*p].clone()).collect(),
            },
        );
    }

    // Creation order: a table follows every table it references. Mutually
    // recursive elements have no such order; they fall back to declaration
    // order (their links are not enforced as foreign keys anyway).
    let mut order: Vec<String> = Vec::new();
    let mut placed: IndexSet<&str> = IndexSet::new();
    loop {
        let mut progressed = false;
        for element in tables.keys() {
            if placed.contains(element.as_str()) {
                continue;
            }
            let parents = parent_elements.get(element.as_str());
            let ready = parents
                .map(|ps| ps.iter().all(|p| placed.contains(p)))
                .unwrap_or(true);
            if ready {
                placed.insert(element.as_str());
                order.push(element.clone());
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    for element in tables.keys() {
        if !placed.contains(element.as_str()) {
            order.push(element.clone());
        }
    }

    let ordered_tables: Vec<Table> = order.iter().map(|el| tables[el.as_str()].clone()).collect();
    // One mapping entry per declared element, declaration order.
    let mut mapping = IndexMap::new();
    for element in ast.elements.keys() {
        mapping.insert(element.clone(), mappings[element.as_str()].clone());
    }

    Ok(RelationalSchema {
        dtd: ast.clone(),
        root: root.to_string(),
        tables: ordered_tables,
        mapping,
    })
}
