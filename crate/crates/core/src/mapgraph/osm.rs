use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};

pub type Tags = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct RawNode {
    pub id: i64,
    pub lat: f64,
    pub lon: f64,
    pub tags: Tags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawWay {
    pub id: i64,
    pub nodes: Vec<i64>,
    pub tags: Tags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub kind: String,
    pub reference: i64,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRelation {
    pub id: i64,
    pub members: Vec<Member>,
    pub tags: Tags,
}

impl RawRelation {
    pub fn is_lanelet(&self) -> bool {
        self.tags.get("type").is_some_and(|t| t == "lanelet")
    }

    pub fn member(&self, role: &str) -> Option<i64> {
        self.members
            .iter()
            .find(|m| m.kind == "way" && m.role == role)
            .map(|m| m.reference)
    }
}

/// Elements of a Lanelet2 `.osm` file, each list sorted by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawMap {
    pub nodes: Vec<RawNode>,
    pub ways: Vec<RawWay>,
    pub relations: Vec<RawRelation>,
}

impl RawMap {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.nodes.len(), self.ways.len(), self.relations.len())
    }

    pub fn node(&self, id: i64) -> Option<&RawNode> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok().map(|i| &self.nodes[i])
    }

    pub fn way(&self, id: i64) -> Option<&RawWay> {
        self.ways.binary_search_by_key(&id, |w| w.id).ok().map(|i| &self.ways[i])
    }
}

fn osm_err(element: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Osm {
        element: element.into(),
        message: message.into(),
    }
}

fn attr<'a>(n: roxmltree::Node<'a, '_>, name: &str, element: &str) -> Result<&'a str> {
    n.attribute(name)
        .ok_or_else(|| osm_err(element, format!("missing attribute `{name}`")))
}

fn parse_num<T: std::str::FromStr>(s: &str, name: &str, element: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| osm_err(element, format!("bad `{name}` value {s:?}")))
}

fn tags(n: roxmltree::Node) -> Tags {
    n.children()
        .filter(|c| c.has_tag_name("tag"))
        .filter_map(|c| Some((c.attribute("k")?.to_string(), c.attribute("v")?.to_string())))
        .collect()
}

pub fn parse_lanelet_osm_str(text: &str) -> Result<RawMap> {
    let doc = roxmltree::Document::parse(text).map_err(|e| osm_err("document", e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("osm") {
        return Err(osm_err("document", format!("root element is <{}>, not <osm>", root.tag_name().name())));
    }
    let mut map = RawMap::default();
    for el in root.children().filter(|c| c.is_element()) {
        if el.attribute("action") == Some("delete") {
            continue;
        }
        let kind = el.tag_name().name();
        if !matches!(kind, "node" | "way" | "relation") {
            continue;
        }
        let label = format!("{kind} {}", el.attribute("id").unwrap_or("?"));
        let id: i64 = parse_num(attr(el, "id", &label)?, "id", &label)?;
        match kind {
            "node" => map.nodes.push(RawNode {
                id,
                lat: parse_num(attr(el, "lat", &label)?, "lat", &label)?,
                lon: parse_num(attr(el, "lon", &label)?, "lon", &label)?,
                tags: tags(el),
            }),
            "way" => {
                let nodes = el
                    .children()
                    .filter(|c| c.has_tag_name("nd"))
                    .map(|c| parse_num(attr(c, "ref", &label)?, "ref", &label))
                    .collect::<Result<_>>()?;
                map.ways.push(RawWay { id, nodes, tags: tags(el) });
            }
            _ => {
                let members = el
                    .children()
                    .filter(|c| c.has_tag_name("member"))
                    .map(|c| {
                        Ok(Member {
                            kind: attr(c, "type", &label)?.to_string(),
                            reference: parse_num(attr(c, "ref", &label)?, "ref", &label)?,
                            role: c.attribute("role").unwrap_or("").to_string(),
                        })
                    })
                    .collect::<Result<_>>()?;
                map.relations.push(RawRelation { id, members, tags: tags(el) });
            }
        }
    }
    map.nodes.sort_by_key(|n| n.id);
    map.ways.sort_by_key(|w| w.id);
    map.relations.sort_by_key(|r| r.id);
    for (kind, ids) in [
        ("node", map.nodes.iter().map(|n| n.id).collect::<Vec<_>>()),
        ("way", map.ways.iter().map(|w| w.id).collect()),
        ("relation", map.relations.iter().map(|r| r.id).collect()),
    ] {
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(osm_err(format!("{kind} {}", w[0]), "duplicate id"));
        }
    }
    validate(&map)?;
    Ok(map)
}

fn validate(map: &RawMap) -> Result<()> {
    let nodes: HashSet<i64> = map.nodes.iter().map(|n| n.id).collect();
    for w in &map.ways {
        if let Some(r) = w.nodes.iter().find(|r| !nodes.contains(r)) {
            return Err(osm_err(format!("way {}", w.id), format!("references missing node {r}")));
        }
    }
    for r in map.relations.iter().filter(|r| r.is_lanelet()) {
        for role in ["left", "right"] {
            match r.member(role) {
                Some(w) if map.way(w).is_none() => {
                    return Err(osm_err(format!("relation {}", r.id), format!("{role} member references missing way {w}")));
                }
                None => return Err(osm_err(format!("relation {}", r.id), format!("lanelet without {role} boundary"))),
                _ => {}
            }
        }
    }
    Ok(())
}

pub fn parse_lanelet_osm(path: &Path) -> Result<RawMap> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_lanelet_osm_str(&text).map_err(|e| match e {
        Error::Osm { element, message } => Error::Osm {
            element: format!("{} {element}", path.display()),
            message,
        },
        e => e,
    })
}
