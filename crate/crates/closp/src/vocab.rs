use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The twelve harmonized land-cover and crisis classes, in canonical order.
/// The first nine are the land-cover taxonomy, the last three are crisis
/// tags. Everything downstream (query enumeration, per-class reports, the
/// zero-shot classifier) relies on this order being stable.
pub const LABELS: [&str; 12] = [
    "trees",
    "crops",
    "shrub and scrub",
    "water",
    "grass",
    "built",
    "flooded vegetation",
    "bare",
    "snow and ice",
    "flooded area",
    "earthquake damage",
    "burned area",
];

pub const LABEL_COUNT: usize = LABELS.len();

pub const TREES: usize = 0;
pub const CROPS: usize = 1;
pub const SHRUB_AND_SCRUB: usize = 2;
pub const WATER: usize = 3;
pub const GRASS: usize = 4;
pub const BUILT: usize = 5;
pub const FLOODED_VEGETATION: usize = 6;
pub const BARE: usize = 7;
pub const SNOW_AND_ICE: usize = 8;
pub const FLOODED_AREA: usize = 9;
pub const EARTHQUAKE_DAMAGE: usize = 10;
pub const BURNED_AREA: usize = 11;

/// Case-insensitive, whitespace-trimmed label lookup.
pub fn lookup(name: &str) -> Result<usize> {
    let needle = name.trim().to_lowercase();
    LABELS
        .iter()
        .position(|&l| l == needle)
        .ok_or_else(|| Error::Vocabulary(name.to_string()))
}

pub fn name(index: usize) -> &'static str {
    LABELS[index]
}

/// FNV-1a digest of the label list; artifacts embed it so that a checkpoint
/// or index built against a different vocabulary is rejected on load.
pub fn vocabulary_hash() -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for label in LABELS {
        for byte in label.bytes().chain([0x1f]) {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// A set of vocabulary labels, stored as a 12-bit mask.
///
/// Ordering sorts by set size first, then by member indices
/// lexicographically; sorting queries this way yields the canonical
/// enumeration order (all singletons in vocabulary order, then pairs, ...).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LabelSet(u16);

impl LabelSet {
    pub fn new() -> Self {
        LabelSet(0)
    }

    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut set = LabelSet(0);
        for &i in indices {
            if i >= LABEL_COUNT {
                return Err(Error::Vocabulary(format!("label index {i}")));
            }
            set.0 |= 1 << i;
        }
        Ok(set)
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut set = LabelSet(0);
        for n in names {
            set.0 |= 1 << lookup(n.as_ref())?;
        }
        Ok(set)
    }

    /// Parses the canonical ". "-joined rendering; a comma-separated form
    /// is accepted as an alternative. Both normalize to the same set.
    pub fn parse(text: &str) -> Result<Self> {
        let sep = if text.contains(',') { ',' } else { '.' };
        let names: Vec<&str> = text
            .split(sep)
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .collect();
        if names.is_empty() {
            return Err(Error::Contract("empty label-set string".into()));
        }
        Self::from_names(&names)
    }

    /// Labels in vocabulary order, each with its first letter capitalized,
    /// joined by ". ".
    pub fn render(&self) -> String {
        let parts: Vec<String> = self
            .indices()
            .map(|i| {
                let mut s = LABELS[i].to_string();
                s[..1].make_ascii_uppercase();
                s
            })
            .collect();
        parts.join(". ")
    }

    pub fn insert(&mut self, index: usize) {
        debug_assert!(index < LABEL_COUNT);
        self.0 |= 1 << index;
    }

    pub fn contains(&self, index: usize) -> bool {
        index < LABEL_COUNT && self.0 & (1 << index) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        let mask = self.0;
        (0..LABEL_COUNT).filter(move |i| mask & (1 << i) != 0)
    }

    pub fn intersection(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0 & other.0)
    }

    pub fn union(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0 | other.0)
    }

    pub fn is_subset_of(&self, other: &LabelSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// All non-empty subsets, unordered.
    pub fn subsets(&self) -> Vec<LabelSet> {
        let members: Vec<usize> = self.indices().collect();
        let mut out = Vec::with_capacity((1 << members.len()) - 1);
        for mask in 1u32..(1 << members.len()) {
            let mut s = LabelSet(0);
            for (bit, &idx) in members.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    s.insert(idx);
                }
            }
            out.push(s);
        }
        out
    }
}

impl PartialOrd for LabelSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LabelSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.indices().cmp(other.indices()))
    }
}

impl fmt::Debug for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.indices().map(name).collect();
        write!(f, "{{{}}}", names.join(", "))
    }
}

impl Serialize for LabelSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let names: Vec<&str> = self.indices().map(name).collect();
        names.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        LabelSet::from_names(&names).map_err(serde::de::Error::custom)
    }
}
