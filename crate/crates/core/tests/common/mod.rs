//! Shared helpers for the acceptance and property suites: a seeded generator
//! for small DTDs and valid documents, a full store round trip, and a
//! brute-force regular-language oracle for content models.
//!
//! Document generation has one deliberate bias. An optional particle whose
//! subtree owns an inlined character-data column is always emitted: for such
//! leaves, absence and present-but-empty collapse to the same NULL, and
//! reconstruction renders the empty form. Presence flags and own-table
//! children carry no such ambiguity, so everything else is free.
#![allow(dead_code)] // compiled once per test target; not every target uses every helper

use std::collections::HashSet;

use complex_etl_core::dtd::{
    AttDef, AttDefault, AttType, ContentModel, DtdAst, GroupKind, Multiplicity, Particle, Term,
};
use complex_etl_core::rdb::{
    create_schema, dtd_to_relational, load, reconstruct, shred, Mapping, RelationalSchema,
};
use complex_etl_core::xml::{canonicalize, validate_xml, write_xml, Element, Node, XmlDocument};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rusqlite::Connection;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Root element of every generated DTD.
pub const ROOT: &str = "e1";

const TEXT_POOL: &[&str] = &["", "alpha", "beta", "gamma 42", "plain value", "7"];
const ATTR_VALUE_POOL: &[&str] = &["", "x", "two words", "v-1"];
const ATTR_NAME_POOL: &[&str] = &["kind", "lang", "ref", "id"];
const ENUM_POOL: &[&str] = &["red", "green", "blue"];

fn random_mult(rng: &mut ChaCha8Rng) -> Multiplicity {
    match rng.gen_range(0..100) {
        0..=39 => Multiplicity::One,
        40..=64 => Multiplicity::Optional,
        65..=84 => Multiplicity::Star,
        _ => Multiplicity::Plus,
    }
}

fn name_particle(rng: &mut ChaCha8Rng, name: &str) -> Particle {
    Particle {
        term: Term::Name(name.to_string()),
        rep: random_mult(rng),
    }
}

fn leaf_model(rng: &mut ChaCha8Rng) -> ContentModel {
    if rng.gen_bool(0.7) {
        ContentModel::PcdataOnly
    } else {
        ContentModel::Empty
    }
}

/// Parenthesized content model over `names`: shuffled, occasionally with a
/// duplicated reference, occasionally with two references folded into a
/// nested subgroup.
fn build_group(rng: &mut ChaCha8Rng, names: &[String]) -> Particle {
    let mut refs: Vec<String> = names.to_vec();
    refs.shuffle(rng);
    if rng.gen_bool(0.2) {
        let dup = refs.choose(rng).unwrap().clone();
        refs.push(dup);
    }
    let kind = if rng.gen_bool(0.6) {
        GroupKind::Sequence
    } else {
        GroupKind::Choice
    };
    let mut items = Vec::new();
    let mut i = 0;
    while i < refs.len() {
        if refs.len() - i >= 2 && rng.gen_bool(0.25) {
            let inner_kind = if rng.gen_bool(0.5) {
                GroupKind::Sequence
            } else {
                GroupKind::Choice
            };
            let inner = vec![
                name_particle(rng, &refs[i]),
                name_particle(rng, &refs[i + 1]),
            ];
            items.push(Particle {
                term: Term::Group {
                    kind: inner_kind,
                    items: inner,
                },
                rep: random_mult(rng),
            });
            i += 2;
        } else {
            items.push(name_particle(rng, &refs[i]));
            i += 1;
        }
    }
    let rep = match rng.gen_range(0..100) {
        0..=79 => Multiplicity::One,
        80..=87 => Multiplicity::Optional,
        88..=93 => Multiplicity::Star,
        _ => Multiplicity::Plus,
    };
    Particle {
        term: Term::Group { kind, items },
        rep,
    }
}

fn add_attlists(rng: &mut ChaCha8Rng, ast: &mut DtdAst) {
    let names: Vec<String> = ast.elements.keys().cloned().collect();
    for element in names {
        if !rng.gen_bool(0.35) {
            continue;
        }
        let mut pool: Vec<&str> = ATTR_NAME_POOL.to_vec();
        pool.shuffle(rng);
        let count = rng.gen_range(1..=2);
        let mut defs = Vec::new();
        for attr in pool.into_iter().take(count) {
            let ty = if rng.gen_bool(0.7) {
                AttType::Cdata
            } else {
                let mut values: Vec<String> = ENUM_POOL.iter().map(|s| s.to_string()).collect();
                values.shuffle(rng);
                values.truncate(rng.gen_range(2..=3));
                AttType::Enumerated(values)
            };
            let default = match rng.gen_range(0..10) {
                0..=3 => AttDefault::Required,
                4..=7 => AttDefault::Implied,
                _ => AttDefault::Fixed(match &ty {
                    AttType::Cdata => "pinned".to_string(),
                    AttType::Enumerated(values) => values[0].clone(),
                }),
            };
            defs.push(AttDef {
                name: attr.to_string(),
                ty,
                default,
            });
        }
        ast.attlists.insert(element, defs);
    }
}

/// Random DTD: up to six declarations named `e1..`, root `e1`, three tiers
/// deep at most. Leaves are character-data or empty; the root never appears
/// inside a content model. Exercises every multiplicity, nested groups,
/// duplicate references, shared children, and attribute lists.
pub fn random_dtd(rng: &mut ChaCha8Rng) -> DtdAst {
    let n: usize = rng.gen_range(1..=6);
    let names: Vec<String> = (1..=n).map(|i| format!("e{i}")).collect();
    let mut ast = DtdAst::default();

    if n == 1 {
        ast.elements.insert(names[0].clone(), leaf_model(rng));
        add_attlists(rng, &mut ast);
        return ast;
    }

    let mut mid: Vec<String> = vec![names[1].clone()];
    let mut deep: Vec<String> = Vec::new();
    for name in &names[2..] {
        if rng.gen_bool(0.55) {
            mid.push(name.clone());
        } else {
            deep.push(name.clone());
        }
    }

    let mut models: Vec<(String, ContentModel)> = Vec::new();
    for name in &deep {
        models.push((name.clone(), leaf_model(rng)));
    }

    // middle tier: each element is a leaf or a parent of some deep elements
    let mut child_lists: Vec<(String, Vec<String>)> = Vec::new();
    for (i, name) in mid.iter().enumerate() {
        let parent = !deep.is_empty() && (rng.gen_bool(0.7) || i == 0);
        if parent {
            let mut picked: Vec<String> =
                deep.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
            if picked.is_empty() {
                picked.push(deep.choose(rng).unwrap().clone());
            }
            child_lists.push((name.clone(), picked));
        } else {
            models.push((name.clone(), leaf_model(rng)));
        }
    }
    // every deep element must be reachable from somewhere
    for name in &deep {
        if !child_lists.iter().any(|(_, c)| c.contains(name)) {
            let slot = rng.gen_range(0..child_lists.len());
            child_lists[slot].1.push(name.clone());
        }
    }
    for (name, children) in child_lists {
        models.push((
            name.clone(),
            ContentModel::Children(build_group(rng, &children)),
        ));
    }

    let mut root_children = mid.clone();
    if !deep.is_empty() && rng.gen_bool(0.2) {
        root_children.push(deep.choose(rng).unwrap().clone());
    }
    models.push((
        names[0].clone(),
        ContentModel::Children(build_group(rng, &root_children)),
    ));

    // declaration order: root first, then the rest as named
    models.sort_by_key(|(name, _)| name.clone());
    for (name, model) in models {
        ast.elements.insert(name, model);
    }
    add_attlists(rng, &mut ast);
    ast
}

/// Compiled schema for a generated DTD; generation guarantees this succeeds.
pub fn compile(ast: &DtdAst) -> RelationalSchema {
    dtd_to_relational(ast, ROOT).expect("generated DTDs always compile")
}

/// True when the subtree owns an inlined character-data column, i.e. when
/// omitting it would be indistinguishable from emitting it empty.
fn must_emit(term: &Term, schema: &RelationalSchema) -> bool {
    match term {
        Term::Name(name) => {
            matches!(
                schema.mapping.get(name),
                Some(Mapping::Inlined {
                    presence: false,
                    ..
                })
            )
        }
        Term::Group { items, .. } => items.iter().any(|p| must_emit(&p.term, schema)),
    }
}

fn attr_value(rng: &mut ChaCha8Rng, ty: &AttType) -> String {
    match ty {
        AttType::Cdata => ATTR_VALUE_POOL.choose(rng).unwrap().to_string(),
        AttType::Enumerated(values) => values.choose(rng).unwrap().clone(),
    }
}

fn gen_attributes(rng: &mut ChaCha8Rng, element: &mut Element, ast: &DtdAst) {
    for att in ast.atts_of(&element.name) {
        match &att.default {
            AttDefault::Required => {
                element
                    .attributes
                    .insert(att.name.clone(), attr_value(rng, &att.ty));
            }
            AttDefault::Implied => {
                if rng.gen_bool(0.6) {
                    element
                        .attributes
                        .insert(att.name.clone(), attr_value(rng, &att.ty));
                }
            }
            AttDefault::Fixed(value) => {
                if rng.gen_bool(0.5) {
                    element.attributes.insert(att.name.clone(), value.clone());
                }
            }
        }
    }
}

fn gen_element(
    rng: &mut ChaCha8Rng,
    name: &str,
    ast: &DtdAst,
    schema: &RelationalSchema,
) -> Element {
    let mut el = Element::new(name);
    gen_attributes(rng, &mut el, ast);
    match &ast.elements[name] {
        ContentModel::Empty => {}
        ContentModel::PcdataOnly => {
            let text = *TEXT_POOL.choose(rng).unwrap();
            if !text.is_empty() {
                el.children.push(Node::Text(text.to_string()));
            }
        }
        ContentModel::Children(particle) => {
            gen_particle(rng, particle, ast, schema, &mut el.children)
        }
    }
    el
}

fn gen_particle(
    rng: &mut ChaCha8Rng,
    particle: &Particle,
    ast: &DtdAst,
    schema: &RelationalSchema,
    out: &mut Vec<Node>,
) {
    let count = match particle.rep {
        Multiplicity::One => 1,
        Multiplicity::Optional => {
            if must_emit(&particle.term, schema) || rng.gen_bool(0.5) {
                1
            } else {
                0
            }
        }
        // repeatable subtrees never contain inlined leaves, so no forcing here
        Multiplicity::Star => rng.gen_range(0..=2),
        Multiplicity::Plus => rng.gen_range(1..=2),
    };
    for _ in 0..count {
        gen_term(rng, &particle.term, ast, schema, out);
    }
}

fn gen_term(
    rng: &mut ChaCha8Rng,
    term: &Term,
    ast: &DtdAst,
    schema: &RelationalSchema,
    out: &mut Vec<Node>,
) {
    match term {
        Term::Name(name) => out.push(Node::Element(gen_element(rng, name, ast, schema))),
        Term::Group {
            kind: GroupKind::Sequence,
            items,
        } => {
            for item in items {
                gen_particle(rng, item, ast, schema, out);
            }
        }
        Term::Group {
            kind: GroupKind::Choice,
            items,
        } => {
            let pick = rng.gen_range(0..items.len());
            gen_particle(rng, &items[pick], ast, schema, out);
        }
    }
}

fn min_cost_element(name: &str, ast: &DtdAst, schema: &RelationalSchema) -> usize {
    1 + match &ast.elements[name] {
        ContentModel::Empty | ContentModel::PcdataOnly => 0,
        ContentModel::Children(p) => min_cost_particle(p, ast, schema),
    }
}

fn min_cost_particle(particle: &Particle, ast: &DtdAst, schema: &RelationalSchema) -> usize {
    let body = match &particle.term {
        Term::Name(n) => min_cost_element(n, ast, schema),
        Term::Group {
            kind: GroupKind::Sequence,
            items,
        } => items
            .iter()
            .map(|i| min_cost_particle(i, ast, schema))
            .sum(),
        Term::Group {
            kind: GroupKind::Choice,
            items,
        } => items
            .iter()
            .map(|i| min_cost_particle(i, ast, schema))
            .min()
            .unwrap_or(0),
    };
    match particle.rep {
        Multiplicity::One | Multiplicity::Plus => body,
        Multiplicity::Optional => {
            if must_emit(&particle.term, schema) {
                body
            } else {
                0
            }
        }
        Multiplicity::Star => 0,
    }
}

fn minimal_element(name: &str, ast: &DtdAst, schema: &RelationalSchema) -> Element {
    let mut el = Element::new(name);
    if let ContentModel::Children(p) = &ast.elements[name] {
        minimal_particle(p, ast, schema, &mut el.children);
    }
    el
}

fn minimal_particle(
    particle: &Particle,
    ast: &DtdAst,
    schema: &RelationalSchema,
    out: &mut Vec<Node>,
) {
    let count = match particle.rep {
        Multiplicity::One | Multiplicity::Plus => 1,
        Multiplicity::Optional => usize::from(must_emit(&particle.term, schema)),
        Multiplicity::Star => 0,
    };
    for _ in 0..count {
        match &particle.term {
            Term::Name(n) => out.push(Node::Element(minimal_element(n, ast, schema))),
            Term::Group {
                kind: GroupKind::Sequence,
                items,
            } => {
                for item in items {
                    minimal_particle(item, ast, schema, out);
                }
            }
            Term::Group {
                kind: GroupKind::Choice,
                items,
            } => {
                let cheapest = items
                    .iter()
                    .min_by_key(|i| min_cost_particle(i, ast, schema))
                    .expect("choice groups are never empty");
                minimal_particle(cheapest, ast, schema, out);
            }
        }
    }
}

/// Elements plus text nodes.
pub fn node_count(el: &Element) -> usize {
    1 + el
        .children
        .iter()
        .map(|n| match n {
            Node::Element(e) => node_count(e),
            Node::Text(_) => 1,
        })
        .sum::<usize>()
}

/// Random valid document within the node budget. Falls back to the minimal
/// document when sampling keeps overshooting; the minimum always fits.
pub fn random_document(
    rng: &mut ChaCha8Rng,
    ast: &DtdAst,
    schema: &RelationalSchema,
    max_nodes: usize,
) -> XmlDocument {
    for _ in 0..8 {
        let root = gen_element(rng, ROOT, ast, schema);
        if node_count(&root) <= max_nodes {
            return XmlDocument { root };
        }
    }
    XmlDocument {
        root: minimal_element(ROOT, ast, schema),
    }
}

/// shred → load into a fresh store → reconstruct, then compare canonical
/// serializations. Also checks the generated document actually validates.
pub fn round_trip(
    ast: &DtdAst,
    schema: &RelationalSchema,
    doc: &XmlDocument,
) -> Result<(), String> {
    let report = validate_xml(doc, ast);
    if !report.is_valid() {
        return Err(format!("generated document does not validate: {report}"));
    }
    let mut conn = Connection::open_in_memory().map_err(|e| e.to_string())?;
    create_schema(schema, &conn).map_err(|e| e.to_string())?;
    let rows = shred(doc, schema).map_err(|e| e.to_string())?;
    load(&rows, schema, &mut conn).map_err(|e| e.to_string())?;
    let root_row = &rows.rows[0];
    assert_eq!(
        root_row.table,
        schema.root_table().name,
        "shred puts the root row first"
    );
    let rebuilt = reconstruct(&conn, schema, root_row.id).map_err(|e| e.to_string())?;
    let want = write_xml(&canonicalize(doc, ast));
    let got = write_xml(&canonicalize(&rebuilt, ast));
    if want == got {
        Ok(())
    } else {
        Err(format!(
            "round trip mismatch\n--- original\n{want}--- rebuilt\n{got}"
        ))
    }
}

/// Random content-model particle over `a`/`b`/`c` with groups nested up to
/// `depth` levels; used to sample the matcher-vs-oracle space.
pub fn random_model(rng: &mut ChaCha8Rng, depth: u32) -> Particle {
    let arity = rng.gen_range(1..=3);
    let items = (0..arity)
        .map(|_| {
            if depth > 1 && rng.gen_bool(0.4) {
                random_model(rng, depth - 1)
            } else {
                let name = *["a", "b", "c"].choose(rng).unwrap();
                Particle {
                    term: Term::Name(name.to_string()),
                    rep: random_mult(rng),
                }
            }
        })
        .collect();
    let kind = if rng.gen_bool(0.5) {
        GroupKind::Sequence
    } else {
        GroupKind::Choice
    };
    Particle {
        term: Term::Group { kind, items },
        rep: random_mult(rng),
    }
}

pub type Word = Vec<String>;

fn concat_words(a: &HashSet<Word>, b: &HashSet<Word>, cap: usize) -> HashSet<Word> {
    let mut out = HashSet::new();
    for u in a {
        for v in b {
            if u.len() + v.len() <= cap {
                let mut w = u.clone();
                w.extend(v.iter().cloned());
                out.insert(w);
            }
        }
    }
    out
}

fn star_words(base: &HashSet<Word>, cap: usize) -> HashSet<Word> {
    let mut out: HashSet<Word> = HashSet::new();
    out.insert(Vec::new());
    let mut frontier = out.clone();
    loop {
        let grown: HashSet<Word> = concat_words(&frontier, base, cap)
            .into_iter()
            .filter(|w| !out.contains(w))
            .collect();
        if grown.is_empty() {
            return out;
        }
        out.extend(grown.iter().cloned());
        frontier = grown;
    }
}

/// Every word of length ≤ `cap` in the particle's language, by direct set
/// construction. Truncation is sound: concatenation and repetition only ever
/// combine kept words into longer ones, and every prefix/suffix split of a
/// word within the cap is itself within the cap, so no word ≤ `cap` is lost.
pub fn truncated_language(particle: &Particle, cap: usize) -> HashSet<Word> {
    let body: HashSet<Word> = match &particle.term {
        Term::Name(n) => [vec![n.clone()]].into_iter().collect(),
        Term::Group {
            kind: GroupKind::Sequence,
            items,
        } => {
            let mut acc: HashSet<Word> = [Vec::new()].into_iter().collect();
            for item in items {
                acc = concat_words(&acc, &truncated_language(item, cap), cap);
            }
            acc
        }
        Term::Group {
            kind: GroupKind::Choice,
            items,
        } => {
            let mut acc = HashSet::new();
            for item in items {
                acc.extend(truncated_language(item, cap));
            }
            acc
        }
    };
    match particle.rep {
        Multiplicity::One => body,
        Multiplicity::Optional => {
            let mut out = body;
            out.insert(Vec::new());
            out
        }
        Multiplicity::Star => star_words(&body, cap),
        Multiplicity::Plus => {
            let closure = star_words(&body, cap);
            concat_words(&body, &closure, cap)
        }
    }
}
