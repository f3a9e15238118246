//! TTP benchmark instances: parsing, validation, serialization and the
//! distance metric.
//!
//! Cities and items are 1-based in the text format and 0-based everywhere in
//! the library. City 0 is the depot where every tour starts and ends; it never
//! holds items.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Instances with more cities than this compute distances on demand instead
/// of precomputing the full matrix.
pub const DEFAULT_MATRIX_THRESHOLD: usize = 3000;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("{section}: declared {declared} entries, found {found}")]
    CountMismatch {
        section: &'static str,
        declared: usize,
        found: usize,
    },
    #[error("item {item} is assigned to invalid city {city}")]
    InvalidItemCity { item: usize, city: usize },
    #[error("item {item} has non-integer weight {raw:?}")]
    NonIntegerWeight { item: usize, raw: String },
    #[error("city index {index} out of range for {n} cities")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("unsupported edge weight type {0:?}")]
    UnsupportedEdgeWeightType(String),
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeWeightType {
    /// Euclidean distance rounded up.
    #[serde(rename = "CEIL_2D")]
    Ceil2d,
    /// Euclidean distance rounded to the nearest integer.
    #[serde(rename = "EUC_2D")]
    Euc2d,
}

impl EdgeWeightType {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeWeightType::Ceil2d => "CEIL_2D",
            EdgeWeightType::Euc2d => "EUC_2D",
        }
    }

    fn measure(self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let dx = a.0 - b.0;
        let dy = a.1 - b.1;
        let d = (dx * dx + dy * dy).sqrt();
        match self {
            EdgeWeightType::Ceil2d => d.ceil(),
            // TSPLIB nint(): round half up
            EdgeWeightType::Euc2d => (d + 0.5).floor(),
        }
    }
}

impl FromStr for EdgeWeightType {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CEIL_2D" => Ok(EdgeWeightType::Ceil2d),
            "EUC_2D" => Ok(EdgeWeightType::Euc2d),
            other => Err(InstanceError::UnsupportedEdgeWeightType(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub profit: f64,
    pub weight: u64,
    /// 0-based city index, never 0.
    pub city: usize,
}

#[derive(Debug, Clone)]
enum Distances {
    Matrix(Vec<f64>),
    OnDemand,
}

/// Immutable TTP problem data.
#[derive(Debug, Clone)]
pub struct Instance {
    name: String,
    knapsack_data_type: String,
    edge_weight_type: EdgeWeightType,
    coords: Vec<(f64, f64)>,
    items: Vec<Item>,
    capacity: u64,
    min_speed: f64,
    max_speed: f64,
    renting_ratio: f64,
    items_by_city: Vec<Vec<usize>>,
    distances: Distances,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.knapsack_data_type == other.knapsack_data_type
            && self.edge_weight_type == other.edge_weight_type
            && self.coords == other.coords
            && self.items == other.items
            && self.capacity == other.capacity
            && self.min_speed == other.min_speed
            && self.max_speed == other.max_speed
            && self.renting_ratio == other.renting_ratio
    }
}

/// Raw fields used to assemble an [`Instance`].
#[derive(Debug, Clone)]
pub struct InstanceBuilder {
    pub name: String,
    pub knapsack_data_type: String,
    pub edge_weight_type: EdgeWeightType,
    pub coords: Vec<(f64, f64)>,
    pub items: Vec<Item>,
    pub capacity: u64,
    pub min_speed: f64,
    pub max_speed: f64,
    pub renting_ratio: f64,
    pub matrix_threshold: usize,
}

impl InstanceBuilder {
    pub fn new(coords: Vec<(f64, f64)>, edge_weight_type: EdgeWeightType) -> Self {
        InstanceBuilder {
            name: "unnamed".to_string(),
            knapsack_data_type: String::new(),
            edge_weight_type,
            coords,
            items: Vec::new(),
            capacity: 0,
            min_speed: 0.1,
            max_speed: 1.0,
            renting_ratio: 0.0,
            matrix_threshold: DEFAULT_MATRIX_THRESHOLD,
        }
    }

    pub fn build(self) -> Result<Instance, InstanceError> {
        let n = self.coords.len();
        if n < 2 {
            return Err(InstanceError::Invalid(format!(
                "need at least 2 cities, got {n}"
            )));
        }
        if !(self.min_speed > 0.0 && self.max_speed > self.min_speed) {
            return Err(InstanceError::Invalid(format!(
                "speeds must satisfy max > min > 0 (min {}, max {})",
                self.min_speed, self.max_speed
            )));
        }
        if !self.items.is_empty() && self.capacity == 0 {
            return Err(InstanceError::Invalid(
                "capacity must be positive when items exist".to_string(),
            ));
        }
        if !(self.renting_ratio >= 0.0 && self.renting_ratio.is_finite()) {
            return Err(InstanceError::Invalid(format!(
                "renting ratio must be a non-negative number, got {}",
                self.renting_ratio
            )));
        }
        let mut items_by_city = vec![Vec::new(); n];
        for (j, item) in self.items.iter().enumerate() {
            if item.city == 0 || item.city >= n {
                return Err(InstanceError::InvalidItemCity {
                    item: j + 1,
                    city: item.city + 1,
                });
            }
            if !(item.profit >= 0.0 && item.profit.is_finite()) {
                return Err(InstanceError::Invalid(format!(
                    "item {} has invalid profit {}",
                    j + 1,
                    item.profit
                )));
            }
            items_by_city[item.city].push(j);
        }
        let distances = if n <= self.matrix_threshold {
            let mut m = vec![0.0; n * n];
            for u in 0..n {
                for v in (u + 1)..n {
                    let d = self
                        .edge_weight_type
                        .measure(self.coords[u], self.coords[v]);
                    m[u * n + v] = d;
                    m[v * n + u] = d;
                }
            }
            Distances::Matrix(m)
        } else {
            Distances::OnDemand
        };
        Ok(Instance {
            name: self.name,
            knapsack_data_type: self.knapsack_data_type,
            edge_weight_type: self.edge_weight_type,
            coords: self.coords,
            items: self.items,
            capacity: self.capacity,
            min_speed: self.min_speed,
            max_speed: self.max_speed,
            renting_ratio: self.renting_ratio,
            items_by_city,
            distances,
        })
    }
}

impl Instance {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let text = fs::read_to_string(path)?;
        parse_instance(&text)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn knapsack_data_type(&self) -> &str {
        &self.knapsack_data_type
    }

    pub fn edge_weight_type(&self) -> EdgeWeightType {
        self.edge_weight_type
    }

    /// Number of cities.
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// Number of items.
    pub fn m(&self) -> usize {
        self.items.len()
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, j: usize) -> &Item {
        &self.items[j]
    }

    /// Items located at `city`, in ascending index order.
    pub fn items_at(&self, city: usize) -> &[usize] {
        &self.items_by_city[city]
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn min_speed(&self) -> f64 {
        self.min_speed
    }

    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    pub fn renting_ratio(&self) -> f64 {
        self.renting_ratio
    }

    /// Speed loss per unit of carried weight, `(v_max - v_min) / W`.
    /// Zero when the instance has no capacity (and therefore no packable weight).
    pub fn speed_decay(&self) -> f64 {
        if self.capacity == 0 {
            0.0
        } else {
            (self.max_speed - self.min_speed) / self.capacity as f64
        }
    }

    /// Travel speed while carrying `weight`.
    #[inline]
    pub fn speed(&self, weight: u64) -> f64 {
        self.max_speed - self.speed_decay() * weight as f64
    }

    /// Distance between two 0-based cities. Panics when an index is out of range.
    #[inline]
    pub fn distance(&self, u: usize, v: usize) -> f64 {
        match &self.distances {
            Distances::Matrix(m) => m[u * self.coords.len() + v],
            Distances::OnDemand => {
                if u == v {
                    0.0
                } else {
                    self.edge_weight_type
                        .measure(self.coords[u], self.coords[v])
                }
            }
        }
    }

    pub fn checked_distance(&self, u: usize, v: usize) -> Result<f64, InstanceError> {
        let n = self.n();
        for idx in [u, v] {
            if idx >= n {
                return Err(InstanceError::IndexOutOfRange { index: idx, n });
            }
        }
        Ok(self.distance(u, v))
    }

    pub fn total_item_weight(&self) -> u64 {
        self.items.iter().map(|it| it.weight).sum()
    }

    /// Serializes back to the benchmark text layout.
    pub fn to_ttp_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "PROBLEM NAME: \t{}", self.name);
        let _ = writeln!(out, "KNAPSACK DATA TYPE: {}", self.knapsack_data_type);
        let _ = writeln!(out, "DIMENSION:\t{}", self.n());
        let _ = writeln!(out, "NUMBER OF ITEMS: \t{}", self.m());
        let _ = writeln!(out, "CAPACITY OF KNAPSACK: \t{}", self.capacity);
        let _ = writeln!(out, "MIN SPEED: \t{}", self.min_speed);
        let _ = writeln!(out, "MAX SPEED: \t{}", self.max_speed);
        let _ = writeln!(out, "RENTING RATIO: \t{}", self.renting_ratio);
        let _ = writeln!(out, "EDGE_WEIGHT_TYPE:\t{}", self.edge_weight_type.as_str());
        let _ = writeln!(out, "NODE_COORD_SECTION\t(INDEX, X, Y): ");
        for (i, (x, y)) in self.coords.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}\t{}", i + 1, x, y);
        }
        let _ = writeln!(
            out,
            "ITEMS SECTION\t(INDEX, PROFIT, WEIGHT, ASSIGNED NODE NUMBER): "
        );
        for (j, it) in self.items.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                j + 1,
                it.profit,
                it.weight,
                it.city + 1
            );
        }
        out
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (n={}, m={}, W={}, R={})",
            self.name,
            self.n(),
            self.m(),
            self.capacity,
            self.renting_ratio
        )
    }
}

impl FromStr for Instance {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_instance(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HeaderKey {
    Name,
    DataType,
    Dimension,
    Items,
    Capacity,
    MinSpeed,
    MaxSpeed,
    Renting,
    EdgeWeight,
}

const HEADER_KEYS: [(&str, HeaderKey); 9] = [
    ("PROBLEM NAME", HeaderKey::Name),
    ("KNAPSACK DATA TYPE", HeaderKey::DataType),
    ("DIMENSION", HeaderKey::Dimension),
    ("NUMBER OF ITEMS", HeaderKey::Items),
    ("CAPACITY OF KNAPSACK", HeaderKey::Capacity),
    ("MIN SPEED", HeaderKey::MinSpeed),
    ("MAX SPEED", HeaderKey::MaxSpeed),
    ("RENTING RATIO", HeaderKey::Renting),
    ("EDGE_WEIGHT_TYPE", HeaderKey::EdgeWeight),
];

fn normalize_key(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_ascii_uppercase()
}

#[derive(PartialEq)]
enum Section {
    Header,
    Nodes,
    Items,
}

fn parse_num<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<T, InstanceError> {
    tok.parse().map_err(|_| InstanceError::Syntax {
        line,
        msg: format!("cannot parse {what} from {tok:?}"),
    })
}

fn parse_weight(tok: &str, item: usize, line: usize) -> Result<u64, InstanceError> {
    if let Ok(w) = tok.parse::<u64>() {
        return Ok(w);
    }
    match tok.parse::<f64>() {
        Ok(w) if w >= 0.0 && w.fract() == 0.0 && w <= u64::MAX as f64 => Ok(w as u64),
        Ok(_) => Err(InstanceError::NonIntegerWeight {
            item,
            raw: tok.to_string(),
        }),
        Err(_) => Err(InstanceError::Syntax {
            line,
            msg: format!("cannot parse weight from {tok:?}"),
        }),
    }
}

/// Parses the benchmark `.ttp` text layout.
pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    let mut header: Vec<(HeaderKey, String)> = Vec::new();
    let mut coords = Vec::new();
    let mut items = Vec::new();
    let mut section = Section::Header;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let upper = line.to_ascii_uppercase();
        if upper.starts_with("NODE_COORD_SECTION") {
            section = Section::Nodes;
            continue;
        }
        if upper.starts_with("ITEMS SECTION") {
            section = Section::Items;
            continue;
        }
        if upper == "EOF" {
            break;
        }
        match section {
            Section::Header => {
                let (key, value) = line.split_once(':').ok_or_else(|| {
                    InstanceError::MalformedHeader(format!("line {lineno}: expected 'KEY: value'"))
                })?;
                let key_norm = normalize_key(key);
                // Unknown keys (COMMENT, TYPE, ...) are tolerated.
                if let Some(&(_, k)) = HEADER_KEYS.iter().find(|(name, _)| *name == key_norm) {
                    if header.iter().any(|(seen, _)| *seen == k) {
                        return Err(InstanceError::MalformedHeader(format!(
                            "duplicate key {key_norm}"
                        )));
                    }
                    header.push((k, value.trim().to_string()));
                }
            }
            Section::Nodes => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() < 3 {
                    return Err(InstanceError::Syntax {
                        line: lineno,
                        msg: "expected 'index x y'".to_string(),
                    });
                }
                let x: f64 = parse_num(toks[1], lineno, "x")?;
                let y: f64 = parse_num(toks[2], lineno, "y")?;
                coords.push((x, y));
            }
            Section::Items => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() < 4 {
                    return Err(InstanceError::Syntax {
                        line: lineno,
                        msg: "expected 'index profit weight node'".to_string(),
                    });
                }
                let index = items.len() + 1;
                let profit: f64 = parse_num(toks[1], lineno, "profit")?;
                let weight = parse_weight(toks[2], index, lineno)?;
                let node: usize = parse_num(toks[3], lineno, "assigned node")?;
                items.push(Item {
                    profit,
                    weight,
                    // 1-based in the file; node 0 is kept invalid for the check below
                    city: node.wrapping_sub(1),
                });
            }
        }
    }

    let get = |k: HeaderKey| -> Result<&str, InstanceError> {
        header
            .iter()
            .find(|(key, _)| *key == k)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| {
                let name = HEADER_KEYS.iter().find(|(_, hk)| *hk == k).unwrap().0;
                InstanceError::MalformedHeader(format!("missing key {name}"))
            })
    };
    let header_num = |k: HeaderKey, what: &str| -> Result<f64, InstanceError> {
        let v = get(k)?;
        v.parse()
            .map_err(|_| InstanceError::MalformedHeader(format!("{what}: cannot parse {v:?}")))
    };

    let name = get(HeaderKey::Name)?.to_string();
    let knapsack_data_type = get(HeaderKey::DataType)?.to_string();
    let n_decl = header_num(HeaderKey::Dimension, "DIMENSION")? as usize;
    let m_decl = header_num(HeaderKey::Items, "NUMBER OF ITEMS")? as usize;
    let capacity_raw = header_num(HeaderKey::Capacity, "CAPACITY OF KNAPSACK")?;
    if capacity_raw < 0.0 || capacity_raw.fract() != 0.0 {
        return Err(InstanceError::MalformedHeader(format!(
            "CAPACITY OF KNAPSACK must be a non-negative integer, got {capacity_raw}"
        )));
    }
    let min_speed = header_num(HeaderKey::MinSpeed, "MIN SPEED")?;
    let max_speed = header_num(HeaderKey::MaxSpeed, "MAX SPEED")?;
    let renting_ratio = header_num(HeaderKey::Renting, "RENTING RATIO")?;
    let edge_weight_type: EdgeWeightType = get(HeaderKey::EdgeWeight)?.parse()?;

    if coords.len() != n_decl {
        return Err(InstanceError::CountMismatch {
            section: "NODE_COORD_SECTION",
            declared: n_decl,
            found: coords.len(),
        });
    }
    if items.len() != m_decl {
        return Err(InstanceError::CountMismatch {
            section: "ITEMS SECTION",
            declared: m_decl,
            found: items.len(),
        });
    }
    for (j, it) in items.iter().enumerate() {
        if it.city == 0 || it.city >= n_decl {
            return Err(InstanceError::InvalidItemCity {
                item: j + 1,
                city: it.city.wrapping_add(1),
            });
        }
    }

    InstanceBuilder {
        name,
        knapsack_data_type,
        edge_weight_type,
        coords,
        items,
        capacity: capacity_raw as u64,
        min_speed,
        max_speed,
        renting_ratio,
        matrix_threshold: DEFAULT_MATRIX_THRESHOLD,
    }
    .build()
}
