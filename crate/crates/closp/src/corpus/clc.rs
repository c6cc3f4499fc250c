//! Harmonization of CORINE Land Cover classes onto the label vocabulary.

use crate::error::{Error, Result};

/// The full CORINE-to-harmonized-label mapping, one row per CORINE class.
pub static CLC_TO_DW: [(&str, &str); 44] = [
    ("Continuous urban fabric", "built"),
    ("Discontinuous urban fabric", "built"),
    ("Industrial or commercial units", "built"),
    ("Road and rail networks and associated land", "built"),
    ("Port areas", "built"),
    ("Airports", "built"),
    ("Mineral extraction sites", "bare"),
    ("Dump sites", "bare"),
    ("Construction sites", "bare"),
    ("Green urban areas", "grass"),
    ("Sport and leisure facilities", "grass"),
    ("Non-irrigated arable land", "crops"),
    ("Permanently irrigated land", "crops"),
    ("Rice fields", "flooded vegetation"),
    ("Vineyards", "crops"),
    ("Fruit trees and berry plantations", "crops"),
    ("Olive groves", "crops"),
    ("Pastures", "grass"),
    ("Annual crops associated with permanent crops", "crops"),
    ("Complex cultivation patterns", "crops"),
    (
        "Land principally occupied by agriculture, with significant areas of natural vegetation",
        "crops",
    ),
    ("Agro-forestry areas", "trees"),
    ("Broad-leaved forest", "trees"),
    ("Coniferous forest", "trees"),
    ("Mixed forest", "trees"),
    ("Natural grassland", "grass"),
    ("Moors and heathland", "shrub and scrub"),
    ("Sclerophyllous vegetation", "shrub and scrub"),
    ("Transitional woodland/shrub", "shrub and scrub"),
    ("Beaches, dunes, sands", "bare"),
    ("Bare rock", "bare"),
    ("Sparsely vegetated areas", "bare"),
    ("Burnt areas", "burned area"),
    ("Glaciers and perpetual snow", "snow and ice"),
    ("Inland marshes", "flooded vegetation"),
    ("Peatbogs", "flooded vegetation"),
    ("Salt marshes", "flooded vegetation"),
    ("Salines", "bare"),
    ("Intertidal flats", "bare"),
    ("Water courses", "water"),
    ("Water bodies", "water"),
    ("Coastal lagoons", "water"),
    ("Estuaries", "water"),
    ("Sea and ocean", "water"),
];

/// Maps a CORINE class name (case-insensitive, surrounding whitespace
/// ignored) to its harmonized vocabulary label.
pub fn map_clc_to_dw(clc_class: &str) -> Result<&'static str> {
    let needle = clc_class.trim().to_lowercase();
    CLC_TO_DW
        .iter()
        .find(|(clc, _)| clc.to_lowercase() == needle)
        .map(|(_, dw)| *dw)
        .ok_or_else(|| {
            Error::Vocabulary(format!(
                "unrecognized CORINE class \"{}\"",
                clc_class.trim()
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab;

    #[test]
    fn spot_rows_map_as_documented() {
        assert_eq!(map_clc_to_dw("Rice fields").unwrap(), "flooded vegetation");
        assert_eq!(map_clc_to_dw("Sea and ocean").unwrap(), "water");
        assert_eq!(map_clc_to_dw("Burnt areas").unwrap(), "burned area");
    }

    #[test]
    fn lookup_is_case_insensitive_and_trimmed() {
        assert_eq!(map_clc_to_dw("  CONIFEROUS FOREST ").unwrap(), "trees");
        assert_eq!(map_clc_to_dw("peatbogs").unwrap(), "flooded vegetation");
    }

    #[test]
    fn unknown_class_is_a_vocabulary_error() {
        assert!(matches!(
            map_clc_to_dw("Lunar regolith"),
            Err(crate::Error::Vocabulary(_))
        ));
    }

    #[test]
    fn table_covers_forty_four_distinct_classes_with_known_targets() {
        assert_eq!(CLC_TO_DW.len(), 44);
        let mut seen = std::collections::BTreeSet::new();
        for (clc, dw) in CLC_TO_DW {
            assert!(seen.insert(clc.to_lowercase()), "duplicate row {clc}");
            vocab::lookup(dw).expect("target must be a vocabulary label");
        }
    }
}
