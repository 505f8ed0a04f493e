//! Rooted concept tree over item metadata and the depth-based concept
//! similarity computed on it.
//!
//! Depth counts nodes, so the root has depth 1. Path lengths count edges.
//! The similarity of concepts `a` and `b` with nearest common parent `p` is
//!
//! ```text
//! sim(a, b) = 2·depth(p) / (L(a, p) + L(b, p) + 2·depth(p))
//! ```
//!
//! which is 1 exactly when `a == b` and strictly positive otherwise.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::BookRecord;

pub type ConceptId = usize;

pub const ROOT_LABEL: &str = "root";
pub const UNKNOWN_LABEL: &str = "UNKNOWN";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConceptNode {
    pub id: ConceptId,
    pub label: String,
    pub parent: Option<ConceptId>,
    pub depth: usize,
    pub children: Vec<ConceptId>,
    /// Set on item leaves.
    pub isbn: Option<String>,
}

/// A similarity score in `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct SemSim(f64);

impl SemSim {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Book attribute used as one level of the hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HierarchyField {
    Publisher,
    Author,
    Year,
    Title,
}

impl HierarchyField {
    pub const DEFAULT: [HierarchyField; 2] = [HierarchyField::Publisher, HierarchyField::Author];

    fn value_of(self, book: &BookRecord) -> String {
        let raw = match self {
            HierarchyField::Publisher => book.publisher.trim().to_string(),
            HierarchyField::Author => book.author.trim().to_string(),
            HierarchyField::Title => book.title.trim().to_string(),
            // The dump uses 0 for an unknown year.
            HierarchyField::Year if book.year == 0 => String::new(),
            HierarchyField::Year => book.year.to_string(),
        };
        if raw.is_empty() {
            UNKNOWN_LABEL.to_string()
        } else {
            raw
        }
    }

    /// Parse a comma-separated list such as `publisher,author`.
    pub fn parse_list(s: &str) -> Result<Vec<HierarchyField>> {
        let fields = s
            .split(',')
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        if fields.is_empty() {
            return Err(Error::Config("hierarchy field list is empty".into()));
        }
        Ok(fields)
    }
}

impl FromStr for HierarchyField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "publisher" => Ok(HierarchyField::Publisher),
            "author" => Ok(HierarchyField::Author),
            "year" => Ok(HierarchyField::Year),
            "title" => Ok(HierarchyField::Title),
            other => Err(Error::Config(format!("unknown hierarchy field {other:?}"))),
        }
    }
}

impl fmt::Display for HierarchyField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HierarchyField::Publisher => "publisher",
            HierarchyField::Author => "author",
            HierarchyField::Year => "year",
            HierarchyField::Title => "title",
        })
    }
}

/// Serialized tree node: `{"label": ..., "children": [...]}`, with `isbn`
/// set on item leaves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyJson {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isbn: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TaxonomyJson>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Taxonomy {
    nodes: Vec<ConceptNode>,
    root: ConceptId,
    item_to_leaf: Vec<ConceptId>,
}

#[derive(Default)]
struct Branch {
    children: BTreeMap<String, Branch>,
    // isbn -> title
    leaves: BTreeMap<String, String>,
}

impl Taxonomy {
    /// Build a tree from a parent table; `parents[i]` is the parent of node
    /// `i` and exactly one node must have none. No items are attached.
    pub fn from_parents(parents: &[Option<ConceptId>]) -> Result<Taxonomy> {
        let n = parents.len();
        let roots: Vec<_> = (0..n).filter(|&i| parents[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::Taxonomy(format!("expected one root, found {}", roots.len())));
        }
        let mut children = vec![Vec::new(); n];
        for (i, p) in parents.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return Err(Error::InvalidConcept(p));
                }
                children[p].push(i);
            }
        }
        let mut depth = vec![0usize; n];
        depth[roots[0]] = 1;
        let mut stack = vec![roots[0]];
        let mut reached = 1;
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                depth[c] = depth[v] + 1;
                reached += 1;
                stack.push(c);
            }
        }
        if reached != n {
            return Err(Error::Taxonomy("parent table contains a cycle".into()));
        }
        let nodes = children
            .into_iter()
            .enumerate()
            .map(|(id, children)| ConceptNode {
                id,
                label: id.to_string(),
                parent: parents[id],
                depth: depth[id],
                children,
                isbn: None,
            })
            .collect();
        Ok(Taxonomy {
            nodes,
            root: roots[0],
            item_to_leaf: Vec::new(),
        })
    }

    /// Attach items to leaf concepts; `item_to_leaf[i]` is item `i`'s leaf.
    pub fn with_items(mut self, item_to_leaf: Vec<ConceptId>) -> Result<Taxonomy> {
        for &leaf in &item_to_leaf {
            let node = self.node(leaf)?;
            if !node.children.is_empty() {
                return Err(Error::Taxonomy(format!("concept {leaf} is not a leaf")));
            }
        }
        self.item_to_leaf = item_to_leaf;
        Ok(self)
    }

    pub fn nodes(&self) -> &[ConceptNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> ConceptId {
        self.root
    }

    pub fn node(&self, id: ConceptId) -> Result<&ConceptNode> {
        self.nodes.get(id).ok_or(Error::InvalidConcept(id))
    }

    pub fn depth(&self, id: ConceptId) -> Result<usize> {
        Ok(self.node(id)?.depth)
    }

    /// Greatest node depth in the tree.
    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn n_items(&self) -> usize {
        self.item_to_leaf.len()
    }

    pub fn leaf_of(&self, item: usize) -> Result<ConceptId> {
        self.item_to_leaf.get(item).copied().ok_or(Error::UnmappedItem(item))
    }

    /// Deepest concept that is an ancestor-or-self of both `a` and `b`.
    pub fn nearest_common_parent(&self, a: ConceptId, b: ConceptId) -> Result<ConceptId> {
        let (mut a, mut b) = (a, b);
        let (mut da, mut db) = (self.depth(a)?, self.depth(b)?);
        while da > db {
            a = self.nodes[a].parent.expect("non-root has a parent");
            da -= 1;
        }
        while db > da {
            b = self.nodes[b].parent.expect("non-root has a parent");
            db -= 1;
        }
        while a != b {
            a = self.nodes[a].parent.expect("single root");
            b = self.nodes[b].parent.expect("single root");
        }
        Ok(a)
    }

    /// Edge count from `node` up to its ancestor-or-self `ancestor`.
    pub fn path_length(&self, node: ConceptId, ancestor: ConceptId) -> Result<usize> {
        let (dn, da) = (self.depth(node)?, self.depth(ancestor)?);
        let not_ancestor = Error::NotAncestor { node, ancestor };
        if da > dn {
            return Err(not_ancestor);
        }
        let mut cur = node;
        for _ in 0..dn - da {
            cur = self.nodes[cur].parent.expect("non-root has a parent");
        }
        if cur == ancestor {
            Ok(dn - da)
        } else {
            Err(not_ancestor)
        }
    }

    pub fn sem_similarity(&self, a: ConceptId, b: ConceptId) -> Result<SemSim> {
        let p = self.nearest_common_parent(a, b)?;
        let depth = self.nodes[p].depth as f64;
        let la = self.path_length(a, p)? as f64;
        let lb = self.path_length(b, p)? as f64;
        Ok(SemSim(2.0 * depth / (la + lb + 2.0 * depth)))
    }

    /// Similarity of two items through their leaf concepts.
    pub fn item_similarity(&self, i: usize, j: usize) -> Result<SemSim> {
        self.sem_similarity(self.leaf_of(i)?, self.leaf_of(j)?)
    }

    pub fn to_json(&self) -> TaxonomyJson {
        fn emit(t: &Taxonomy, id: ConceptId) -> TaxonomyJson {
            let node = &t.nodes[id];
            TaxonomyJson {
                label: node.label.clone(),
                isbn: node.isbn.clone(),
                children: node.children.iter().map(|&c| emit(t, c)).collect(),
            }
        }
        emit(self, self.root())
    }

    /// Rebuild a taxonomy from its JSON form. `items` lists the ISBN of each
    /// item column; every one must name a leaf in the document.
    pub fn from_json(doc: &TaxonomyJson, items: &[String]) -> Result<Taxonomy> {
        let mut nodes = Vec::new();
        let mut stack = vec![(doc, None::<ConceptId>, 1usize)];
        // Preorder with children visited in document order.
        while let Some((json, parent, depth)) = stack.pop() {
            let id = nodes.len();
            if let Some(p) = parent {
                let parent_node: &mut ConceptNode = &mut nodes[p];
                parent_node.children.push(id);
            }
            if json.isbn.is_some() && !json.children.is_empty() {
                return Err(Error::Taxonomy(format!("node {:?} has an isbn and children", json.label)));
            }
            nodes.push(ConceptNode {
                id,
                label: json.label.clone(),
                parent,
                depth,
                children: Vec::new(),
                isbn: json.isbn.clone(),
            });
            for child in json.children.iter().rev() {
                stack.push((child, Some(id), depth + 1));
            }
        }

        let mut leaf_by_isbn = HashMap::new();
        for node in nodes.iter().filter(|n| n.isbn.is_some()) {
            let isbn = node.isbn.clone().expect("filtered");
            if leaf_by_isbn.insert(isbn.clone(), node.id).is_some() {
                return Err(Error::Taxonomy(format!("isbn {isbn:?} appears on two leaves")));
            }
        }
        let item_to_leaf = items
            .iter()
            .enumerate()
            .map(|(col, isbn)| leaf_by_isbn.get(isbn).copied().ok_or(Error::UnmappedItem(col)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Taxonomy {
            nodes,
            root: 0,
            item_to_leaf,
        })
    }
}

/// Build the metadata taxonomy: root, then one level per hierarchy field,
/// then one leaf per distinct ISBN. Equal field values under the same parent
/// share a node; siblings are ordered by label (leaves by ISBN), and ids are
/// assigned in preorder. `books[i]` describes item column `i`.
pub fn build_taxonomy(books: &[BookRecord], fields: &[HierarchyField]) -> Result<Taxonomy> {
    if books.is_empty() {
        return Err(Error::EmptyDataset("no item metadata to build a taxonomy from".into()));
    }
    if fields.is_empty() {
        return Err(Error::Config("hierarchy field list is empty".into()));
    }

    let mut root = Branch::default();
    for book in books {
        let mut branch = &mut root;
        for field in fields {
            branch = branch.children.entry(field.value_of(book)).or_default();
        }
        branch.leaves.entry(book.isbn.clone()).or_insert_with(|| book.title.clone());
    }

    let mut nodes = Vec::new();
    let mut leaf_by_isbn = HashMap::new();
    fn emit(
        branch: &Branch,
        label: String,
        parent: Option<ConceptId>,
        depth: usize,
        nodes: &mut Vec<ConceptNode>,
        leaf_by_isbn: &mut HashMap<String, ConceptId>,
    ) {
        let id = nodes.len();
        nodes.push(ConceptNode {
            id,
            label,
            parent,
            depth,
            children: Vec::new(),
            isbn: None,
        });
        if let Some(p) = parent {
            nodes[p].children.push(id);
        }
        for (label, child) in &branch.children {
            emit(child, label.clone(), Some(id), depth + 1, nodes, leaf_by_isbn);
        }
        for (isbn, title) in &branch.leaves {
            let leaf = nodes.len();
            nodes.push(ConceptNode {
                id: leaf,
                label: title.clone(),
                parent: Some(id),
                depth: depth + 1,
                children: Vec::new(),
                isbn: Some(isbn.clone()),
            });
            nodes[id].children.push(leaf);
            leaf_by_isbn.insert(isbn.clone(), leaf);
        }
    }
    emit(&root, ROOT_LABEL.to_string(), None, 1, &mut nodes, &mut leaf_by_isbn);

    let item_to_leaf = books.iter().map(|b| leaf_by_isbn[&b.isbn]).collect();
    Ok(Taxonomy {
        nodes,
        root: 0,
        item_to_leaf,
    })
}

/// The JSON description of the metadata taxonomy.
pub fn tabular_to_json(books: &[BookRecord], fields: &[HierarchyField]) -> Result<TaxonomyJson> {
    Ok(build_taxonomy(books, fields)?.to_json())
}
