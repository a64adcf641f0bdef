//! Digital-asset catalog: loading, validation, lookup and attribute search.

mod decimal;
pub mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decimal::{Decimal, ParseDecimalError};

use crate::ontology;
use crate::text::normalize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Fashion,
    Furniture,
}

impl Domain {
    pub const ALL: [Domain; 2] = [Domain::Fashion, Domain::Furniture];

    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Fashion => "fashion",
            Domain::Furniture => "furniture",
        }
    }

    /// The asset categories a catalog of this domain may declare.
    pub fn category_names(&self) -> &'static [&'static str] {
        match self {
            Domain::Fashion => FASHION_CATEGORIES,
            Domain::Furniture => FURNITURE_CATEGORIES,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const FASHION_CATEGORIES: &[&str] = &[
    "hat", "tshirt", "jacket", "hoodie", "sweater", "shirt", "suit", "vest", "coat", "trousers", "jeans", "joggers",
    "skirt", "blouse", "tank top", "dress", "shoes",
];

pub const FURNITURE_CATEGORIES: &[&str] = &[
    "area rug",
    "bed",
    "chair",
    "couch chair",
    "dining table",
    "coffee table",
    "end table",
    "lamp",
    "shelves",
    "sofa",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetCategory {
    pub name: String,
    pub compat_group: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogItem {
    pub item_id: String,
    pub category: String,
    pub price: Decimal,
    pub available_sizes: Vec<String>,
    pub color: String,
    pub pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    pub brand: String,
    pub customer_rating: f64,
    /// Width, height, depth in meters.
    pub extent: [f64; 3],
}

impl CatalogItem {
    /// Display value of a slot, as the assistant would report it.
    pub fn attribute(&self, slot: &str) -> Option<String> {
        match slot {
            "type" => Some(self.category.clone()),
            "color" => Some(self.color.clone()),
            "pattern" => Some(self.pattern.clone()),
            "material" => self.material.clone(),
            "brand" => Some(self.brand.clone()),
            "price" => Some(self.price.to_string()),
            "customer_rating" => Some(format_rating(self.customer_rating)),
            "size" if !self.available_sizes.is_empty() => Some(self.available_sizes.join(", ")),
            _ => None,
        }
    }

    /// Whether the item satisfies `slot == value` under normalized equality.
    /// `size` matches when the value is one of the available sizes.
    pub fn matches(&self, slot: &str, value: &str) -> bool {
        if slot == "size" {
            let want = normalize(value);
            return self.available_sizes.iter().any(|s| normalize(s) == want);
        }
        self.attribute(slot).is_some_and(|have| values_equal(&have, value))
    }
}

/// Normalized equality; numeric strings compare by value (`"29.9"` equals `"29.90"`).
pub fn values_equal(a: &str, b: &str) -> bool {
    let (a, b) = (normalize(a), normalize(b));
    if a == b {
        return true;
    }
    match (a.parse::<Decimal>(), b.parse::<Decimal>()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

pub fn format_rating(r: f64) -> String {
    serde_json::to_string(&r).unwrap_or_else(|_| r.to_string())
}

/// On-disk catalog document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogDocument {
    pub domain: Domain,
    pub categories: Vec<AssetCategory>,
    pub items: Vec<CatalogItem>,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse catalog: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate item_id {0:?}")]
    DuplicateId(String),
    #[error("category {0:?} declared more than once")]
    DuplicateCategory(String),
    #[error("category {name:?} is not a {domain} category")]
    ForeignCategory { name: String, domain: Domain },
    #[error("item {item_id:?}: unknown category {category:?}")]
    UnknownCategory { item_id: String, category: String },
    #[error("item {item_id:?}: invalid {field}: {reason}")]
    InvalidField {
        item_id: String,
        field: &'static str,
        reason: String,
    },
    #[error("item {0:?} not found")]
    NotFound(String),
    #[error("unknown slot {slot:?} for domain {domain}")]
    UnknownSlot { slot: String, domain: Domain },
}

/// A validated, indexed catalog. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Catalog {
    domain: Domain,
    categories: Vec<AssetCategory>,
    items: Vec<CatalogItem>,
    by_id: HashMap<String, usize>,
    by_category: BTreeMap<String, Vec<usize>>,
    group_of: HashMap<String, String>,
}

impl Catalog {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let doc: CatalogDocument = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: CatalogDocument) -> Result<Self, CatalogError> {
        let mut group_of = HashMap::new();
        for cat in &doc.categories {
            if !doc.domain.category_names().contains(&cat.name.as_str()) {
                return Err(CatalogError::ForeignCategory {
                    name: cat.name.clone(),
                    domain: doc.domain,
                });
            }
            if group_of.insert(cat.name.clone(), cat.compat_group.clone()).is_some() {
                return Err(CatalogError::DuplicateCategory(cat.name.clone()));
            }
        }

        let mut by_id = HashMap::new();
        let mut by_category: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, item) in doc.items.iter().enumerate() {
            validate_item(doc.domain, item, &group_of)?;
            if by_id.insert(item.item_id.clone(), i).is_some() {
                return Err(CatalogError::DuplicateId(item.item_id.clone()));
            }
            by_category.entry(item.category.clone()).or_default().push(i);
        }

        Ok(Self {
            domain: doc.domain,
            categories: doc.categories,
            items: doc.items,
            by_id,
            by_category,
            group_of,
        })
    }

    pub fn to_document(&self) -> CatalogDocument {
        CatalogDocument {
            domain: self.domain,
            categories: self.categories.clone(),
            items: self.items.clone(),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn items(&self) -> &[CatalogItem] {
        &self.items
    }

    pub fn categories(&self) -> &[AssetCategory] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn lookup(&self, item_id: &str) -> Result<&CatalogItem, CatalogError> {
        self.get(item_id)
            .ok_or_else(|| CatalogError::NotFound(item_id.to_string()))
    }

    pub fn get(&self, item_id: &str) -> Option<&CatalogItem> {
        self.by_id.get(item_id).map(|&i| &self.items[i])
    }

    pub fn items_in_category(&self, category: &str) -> impl Iterator<Item = &CatalogItem> {
        self.by_category
            .get(category)
            .into_iter()
            .flatten()
            .map(|&i| &self.items[i])
    }

    pub fn compat_group(&self, category: &str) -> Option<&str> {
        self.group_of.get(category).map(String::as_str)
    }

    /// Categories in a compatibility group, sorted by name.
    pub fn group_categories(&self, group: &str) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .categories
            .iter()
            .filter(|c| c.compat_group == group)
            .map(|c| c.name.as_str())
            .collect();
        v.sort_unstable();
        v
    }

    /// Items of any category in `group`, ordered by item_id.
    pub fn items_in_group(&self, group: &str) -> Vec<&CatalogItem> {
        let mut v: Vec<&CatalogItem> = self
            .group_categories(group)
            .into_iter()
            .flat_map(|c| self.items_in_category(c))
            .collect();
        v.sort_by(|a, b| a.item_id.cmp(&b.item_id));
        v
    }

    /// All items satisfying every constraint, ordered by item_id.
    pub fn filter_items(&self, constraints: &BTreeMap<String, String>) -> Result<Vec<&CatalogItem>, CatalogError> {
        let vocab = ontology::Ontology::builtin().slots(self.domain);
        for slot in constraints.keys() {
            if !vocab.iter().any(|s| s == slot) {
                return Err(CatalogError::UnknownSlot {
                    slot: slot.clone(),
                    domain: self.domain,
                });
            }
        }
        let mut out: Vec<&CatalogItem> = self
            .items
            .iter()
            .filter(|it| constraints.iter().all(|(k, v)| it.matches(k, v)))
            .collect();
        out.sort_by(|a, b| a.item_id.cmp(&b.item_id));
        Ok(out)
    }
}

fn validate_item(domain: Domain, item: &CatalogItem, groups: &HashMap<String, String>) -> Result<(), CatalogError> {
    let invalid = |field: &'static str, reason: &str| CatalogError::InvalidField {
        item_id: item.item_id.clone(),
        field,
        reason: reason.to_string(),
    };
    if item.item_id.trim().is_empty() {
        return Err(invalid("item_id", "empty"));
    }
    if !groups.contains_key(&item.category) {
        return Err(CatalogError::UnknownCategory {
            item_id: item.item_id.clone(),
            category: item.category.clone(),
        });
    }
    if !item.price.is_positive() {
        return Err(invalid("price", "must be > 0"));
    }
    if item.extent.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
        return Err(invalid("extent", "components must be > 0"));
    }
    if !(0.0..=5.0).contains(&item.customer_rating) {
        return Err(invalid("customer_rating", "must lie in [0, 5]"));
    }
    if domain == Domain::Fashion && item.available_sizes.is_empty() {
        return Err(invalid("available_sizes", "fashion items need at least one size"));
    }
    let distinct: BTreeSet<&String> = item.available_sizes.iter().collect();
    if distinct.len() != item.available_sizes.len() {
        return Err(invalid("available_sizes", "duplicate size label"));
    }
    Ok(())
}

/// Bundled catalogs, generated by [`synth::synthesize`] with the default counts.
pub mod bundled {
    use super::*;

    pub const FASHION_JSON: &str = include_str!("../../data/catalogs/fashion.json");
    pub const FURNITURE_JSON: &str = include_str!("../../data/catalogs/furniture.json");

    pub fn fashion() -> Catalog {
        Catalog::from_json(FASHION_JSON).expect("bundled fashion catalog is valid")
    }

    pub fn furniture() -> Catalog {
        Catalog::from_json(FURNITURE_JSON).expect("bundled furniture catalog is valid")
    }

    pub fn for_domain(domain: Domain) -> Catalog {
        match domain {
            Domain::Fashion => fashion(),
            Domain::Furniture => furniture(),
        }
    }
}
