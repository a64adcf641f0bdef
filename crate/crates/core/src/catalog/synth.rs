//! Seeded synthesizer for the bundled catalogs.
//!
//! Produces a catalog document with `count` items spread evenly over the
//! domain's categories. Attribute pools and size envelopes are fixed tables;
//! everything else is drawn from a `ChaCha8` stream seeded by `seed`.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{AssetCategory, CatalogDocument, CatalogItem, Decimal, Domain};
use crate::rng;

struct CategorySpec {
    name: &'static str,
    group: &'static str,
    /// Nominal width, height, depth in meters.
    extent: [f64; 3],
    /// Price range in whole currency units.
    price: (i64, i64),
    sizes: &'static [&'static str],
}

const APPAREL: &[&str] = &["XS", "S", "M", "L", "XL", "XXL"];
const WAIST: &[&str] = &["28", "30", "32", "34", "36", "38"];
const SHOE: &[&str] = &["6", "7", "8", "9", "10", "11", "12"];
const HAT: &[&str] = &["S", "M", "L"];

const fn cat(
    name: &'static str,
    group: &'static str,
    extent: [f64; 3],
    price: (i64, i64),
    sizes: &'static [&'static str],
) -> CategorySpec {
    CategorySpec {
        name,
        group,
        extent,
        price,
        sizes,
    }
}

const FASHION: &[CategorySpec] = &[
    cat("hat", "headwear", [0.30, 0.15, 0.30], (15, 60), HAT),
    cat("tshirt", "tops", [0.50, 0.70, 0.12], (10, 40), APPAREL),
    cat("jacket", "tops", [0.55, 0.75, 0.18], (60, 250), APPAREL),
    cat("hoodie", "tops", [0.55, 0.72, 0.18], (30, 90), APPAREL),
    cat("sweater", "tops", [0.52, 0.70, 0.15], (35, 120), APPAREL),
    cat("shirt", "tops", [0.50, 0.75, 0.12], (20, 80), APPAREL),
    cat("suit", "outerwear", [0.55, 1.05, 0.20], (180, 650), APPAREL),
    cat("vest", "light_tops", [0.45, 0.60, 0.10], (20, 70), APPAREL),
    cat("coat", "outerwear", [0.58, 1.00, 0.20], (90, 400), APPAREL),
    cat("trousers", "bottoms", [0.42, 1.00, 0.10], (30, 120), WAIST),
    cat("jeans", "bottoms", [0.42, 1.00, 0.10], (35, 150), WAIST),
    cat("joggers", "bottoms", [0.42, 0.95, 0.12], (25, 80), WAIST),
    cat("skirt", "skirts_dresses", [0.45, 0.55, 0.10], (20, 90), APPAREL),
    cat("blouse", "light_tops", [0.48, 0.65, 0.10], (25, 110), APPAREL),
    cat("tank top", "light_tops", [0.42, 0.60, 0.08], (10, 35), APPAREL),
    cat("dress", "skirts_dresses", [0.48, 1.05, 0.12], (40, 300), APPAREL),
    cat("shoes", "footwear", [0.30, 0.15, 0.28], (40, 220), SHOE),
];

const FURNITURE: &[CategorySpec] = &[
    cat("area rug", "rugs", [2.00, 0.02, 1.40], (80, 600), &[]),
    cat("bed", "beds", [1.60, 0.60, 2.10], (300, 1800), &[]),
    cat("chair", "seating", [0.50, 0.90, 0.55], (60, 350), &[]),
    cat("couch chair", "seating", [0.85, 0.85, 0.85], (200, 900), &[]),
    cat("dining table", "dining", [1.60, 0.76, 0.90], (250, 1500), &[]),
    cat("coffee table", "side_tables", [1.10, 0.45, 0.60], (90, 600), &[]),
    cat("end table", "side_tables", [0.50, 0.55, 0.50], (50, 300), &[]),
    cat("lamp", "lighting", [0.40, 1.60, 0.40], (30, 250), &[]),
    cat("shelves", "storage", [0.90, 1.80, 0.35], (80, 500), &[]),
    cat("sofa", "sofas", [2.10, 0.85, 0.90], (400, 2500), &[]),
];

const FASHION_COLORS: &[&str] = &[
    "red", "blue", "black", "white", "grey", "green", "yellow", "pink", "brown", "beige", "navy", "olive", "maroon",
    "purple", "orange",
];
const FASHION_PATTERNS: &[&str] = &[
    "plain",
    "striped",
    "checkered",
    "floral",
    "denim",
    "plaid",
    "dotted",
    "leopard print",
    "camouflage",
    "knit",
];
const FASHION_BRANDS: &[&str] = &[
    "North Lodge",
    "Urban Thread",
    "Coastal Loom",
    "Ember & Oak",
    "Ridgeway",
    "Pinecrest",
    "Vela",
    "Harbor Lane",
    "Marlowe",
    "Kestrel",
];
const FURNITURE_COLORS: &[&str] = &[
    "black", "white", "grey", "brown", "beige", "blue", "green", "natural", "walnut", "cream",
];
const FURNITURE_PATTERNS: &[&str] = &["plain", "striped", "geometric", "woven"];
const FURNITURE_MATERIALS: &[&str] = &[
    "wood", "leather", "fabric", "metal", "glass", "wicker", "marble", "velvet",
];
const FURNITURE_BRANDS: &[&str] = &[
    "Oakhaven",
    "Nordhus",
    "Loft & Line",
    "Casa Terra",
    "Greyson",
    "Willow Row",
    "Arbor",
    "Stillwater",
];

fn specs(domain: Domain) -> &'static [CategorySpec] {
    match domain {
        Domain::Fashion => FASHION,
        Domain::Furniture => FURNITURE,
    }
}

/// Default item count of the bundled catalog for a domain.
pub fn default_count(domain: Domain) -> usize {
    match domain {
        Domain::Fashion => 290,
        Domain::Furniture => 110,
    }
}

pub const DEFAULT_SEED: u64 = 20_211_100;

pub fn synthesize(domain: Domain, count: usize, seed: u64) -> CatalogDocument {
    let specs = specs(domain);
    let mut rng = rng::stream(seed, &[rng::streams::CATALOG, rng::label(domain.as_str())]);
    let categories = specs
        .iter()
        .map(|s| AssetCategory {
            name: s.name.to_string(),
            compat_group: s.group.to_string(),
        })
        .collect();

    let (colors, patterns, brands) = match domain {
        Domain::Fashion => (FASHION_COLORS, FASHION_PATTERNS, FASHION_BRANDS),
        Domain::Furniture => (FURNITURE_COLORS, FURNITURE_PATTERNS, FURNITURE_BRANDS),
    };

    let mut items = Vec::with_capacity(count);
    let mut per_cat = vec![0usize; specs.len()];
    for i in 0..count {
        let ci = i % specs.len();
        let spec = &specs[ci];
        per_cat[ci] += 1;
        let item_id = format!("{}_{:03}", spec.name.replace(' ', "_"), per_cat[ci]);

        let whole = rng.random_range(spec.price.0..=spec.price.1);
        let cents = *[0i64, 50, 95, 99].choose(&mut rng).unwrap();
        let price = Decimal::new(whole * 100 + cents, 2);

        let extent = spec.extent.map(|e| round_mm(e * rng.random_range(0.87..=1.13)));

        let available_sizes = if spec.sizes.is_empty() {
            Vec::new()
        } else {
            let n = spec.sizes.len();
            let lo = rng.random_range(0..n);
            let hi = rng.random_range(lo..n);
            spec.sizes[lo..=hi].iter().map(|s| s.to_string()).collect()
        };

        let material = (domain == Domain::Furniture).then(|| FURNITURE_MATERIALS.choose(&mut rng).unwrap().to_string());

        let rating = f64::from(rng.random_range(20u32..=50)) / 10.0;

        items.push(CatalogItem {
            item_id,
            category: spec.name.to_string(),
            price,
            available_sizes,
            color: colors.choose(&mut rng).unwrap().to_string(),
            pattern: patterns.choose(&mut rng).unwrap().to_string(),
            material,
            brand: brands.choose(&mut rng).unwrap().to_string(),
            customer_rating: rating,
            extent,
        });
    }

    CatalogDocument {
        domain,
        categories,
        items,
    }
}

fn round_mm(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}
