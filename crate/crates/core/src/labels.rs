//! Canonical relation label space.
//!
//! Four relation families are predicted per event pair. Every family reserves
//! class index 0 for "no relation"; argmax ties therefore resolve toward
//! index 0 via first-maximum selection. Raw annotation labels map onto the
//! canonical classes as a function of whether the annotated pair order agrees
//! with textual order: the canonical pair is always (textually first,
//! textually second), and direction-bearing labels flip when the annotation
//! runs against that order. Annotations whose coarse temporal label expresses
//! containment or simultaneity collapse to `overlap` in either order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationFamily {
    Coref,
    Temporal,
    Causal,
    Subevent,
}

impl RelationFamily {
    pub const ALL: [RelationFamily; 4] = [
        RelationFamily::Coref,
        RelationFamily::Temporal,
        RelationFamily::Causal,
        RelationFamily::Subevent,
    ];

    /// Number of canonical classes, counting the none class at index 0.
    pub fn arity(self) -> usize {
        match self {
            RelationFamily::Coref => 2,
            RelationFamily::Temporal => 4,
            RelationFamily::Causal => 3,
            RelationFamily::Subevent => 3,
        }
    }

    pub fn class_name(self, class: usize) -> &'static str {
        match (self, class) {
            (_, 0) => "none",
            (RelationFamily::Coref, 1) => "corefer",
            (RelationFamily::Temporal, 1) => "before",
            (RelationFamily::Temporal, 2) => "after",
            (RelationFamily::Temporal, 3) => "overlap",
            (RelationFamily::Causal, 1) => "causes",
            (RelationFamily::Causal, 2) => "caused_by",
            (RelationFamily::Subevent, 1) => "contains",
            (RelationFamily::Subevent, 2) => "contained_by",
            _ => panic!("class {class} out of range for {self:?}"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RelationFamily::Coref => "coref",
            RelationFamily::Temporal => "temporal",
            RelationFamily::Causal => "causal",
            RelationFamily::Subevent => "subevent",
        }
    }
}

/// A relation family together with a canonical class index (0 = none).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalRelationLabel {
    pub family: RelationFamily,
    pub class: usize,
}

impl CanonicalRelationLabel {
    pub fn new(family: RelationFamily, class: usize) -> Self {
        assert!(class < family.arity(), "class {class} out of range for {family:?}");
        CanonicalRelationLabel { family, class }
    }

    pub fn is_none(self) -> bool {
        self.class == 0
    }
}

/// The eight typed event-event edges a graph can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeType {
    Coreference,
    Before,
    After,
    Overlap,
    Causes,
    CausedBy,
    Contains,
    ContainedBy,
}

impl EdgeType {
    pub const ALL: [EdgeType; 8] = [
        EdgeType::Coreference,
        EdgeType::Before,
        EdgeType::After,
        EdgeType::Overlap,
        EdgeType::Causes,
        EdgeType::CausedBy,
        EdgeType::Contains,
        EdgeType::ContainedBy,
    ];

    /// Edge type for a non-none canonical class.
    pub fn from_label(label: CanonicalRelationLabel) -> Self {
        match (label.family, label.class) {
            (RelationFamily::Coref, 1) => EdgeType::Coreference,
            (RelationFamily::Temporal, 1) => EdgeType::Before,
            (RelationFamily::Temporal, 2) => EdgeType::After,
            (RelationFamily::Temporal, 3) => EdgeType::Overlap,
            (RelationFamily::Causal, 1) => EdgeType::Causes,
            (RelationFamily::Causal, 2) => EdgeType::CausedBy,
            (RelationFamily::Subevent, 1) => EdgeType::Contains,
            (RelationFamily::Subevent, 2) => EdgeType::ContainedBy,
            _ => panic!("no edge type for {label:?}"),
        }
    }

    pub fn family(self) -> RelationFamily {
        match self {
            EdgeType::Coreference => RelationFamily::Coref,
            EdgeType::Before | EdgeType::After | EdgeType::Overlap => RelationFamily::Temporal,
            EdgeType::Causes | EdgeType::CausedBy => RelationFamily::Causal,
            EdgeType::Contains | EdgeType::ContainedBy => RelationFamily::Subevent,
        }
    }

    /// The same relationship viewed from the other endpoint.
    pub fn inverse(self) -> Self {
        match self {
            EdgeType::Coreference => EdgeType::Coreference,
            EdgeType::Before => EdgeType::After,
            EdgeType::After => EdgeType::Before,
            EdgeType::Overlap => EdgeType::Overlap,
            EdgeType::Causes => EdgeType::CausedBy,
            EdgeType::CausedBy => EdgeType::Causes,
            EdgeType::Contains => EdgeType::ContainedBy,
            EdgeType::ContainedBy => EdgeType::Contains,
        }
    }

    /// English phrase naming the relation; its first word seeds the relation
    /// embedding lookup.
    pub fn phrase(self) -> &'static str {
        match self {
            EdgeType::Coreference => "coreference",
            EdgeType::Before => "before",
            EdgeType::After => "after",
            EdgeType::Overlap => "overlap",
            EdgeType::Causes => "causes",
            EdgeType::CausedBy => "caused by",
            EdgeType::Contains => "contains",
            EdgeType::ContainedBy => "contained by",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeType::Coreference => "coreference",
            EdgeType::Before => "before",
            EdgeType::After => "after",
            EdgeType::Overlap => "overlap",
            EdgeType::Causes => "causes",
            EdgeType::CausedBy => "caused_by",
            EdgeType::Contains => "contains",
            EdgeType::ContainedBy => "contained_by",
        }
    }

    pub fn index(self) -> usize {
        EdgeType::ALL.iter().position(|&t| t == self).unwrap()
    }
}

/// Raw labels accepted per family in annotated corpora.
pub fn known_raw_labels(family: RelationFamily) -> &'static [&'static str] {
    match family {
        RelationFamily::Coref => &["COREFERENCE"],
        RelationFamily::Temporal => {
            &["BEFORE", "SIMULTANEOUS", "OVERLAP", "BEGINS-ON", "ENDS-ON", "CONTAINS"]
        }
        RelationFamily::Causal => &["CAUSES", "CAUSE", "PRECONDITION"],
        RelationFamily::Subevent => &["CONTAINS"],
    }
}

/// Maps a raw annotation label to its canonical class.
///
/// `aligned` is true when the annotated (a, b) order matches textual order.
/// Unknown raw labels are an error rather than silently dropped.
pub fn map_annotation_label(
    family: RelationFamily,
    raw: &str,
    aligned: bool,
) -> Result<CanonicalRelationLabel> {
    let class = match family {
        RelationFamily::Coref => match raw {
            "COREFERENCE" => 1,
            _ => return Err(unknown_raw(family, raw)),
        },
        RelationFamily::Temporal => match raw {
            "BEFORE" => {
                if aligned {
                    1
                } else {
                    2
                }
            }
            "SIMULTANEOUS" | "OVERLAP" | "BEGINS-ON" | "ENDS-ON" | "CONTAINS" => 3,
            _ => return Err(unknown_raw(family, raw)),
        },
        RelationFamily::Causal => match raw {
            "CAUSES" | "CAUSE" | "PRECONDITION" => {
                if aligned {
                    1
                } else {
                    2
                }
            }
            _ => return Err(unknown_raw(family, raw)),
        },
        RelationFamily::Subevent => match raw {
            "CONTAINS" => {
                if aligned {
                    1
                } else {
                    2
                }
            }
            _ => return Err(unknown_raw(family, raw)),
        },
    };
    Ok(CanonicalRelationLabel::new(family, class))
}

fn unknown_raw(family: RelationFamily, raw: &str) -> Error {
    Error::validation(format!("unknown raw {} label {raw:?}", family.name()))
}

/// First maximum wins, so exact ties resolve toward the lowest index and in
/// particular toward the none class.
pub fn argmax_tie_low(probs: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_mapping_table() {
        use RelationFamily::*;
        // Every (family, raw label, alignment) combination with its expected
        // canonical class name, frozen by hand from the mapping rules.
        let expected: &[(RelationFamily, &str, bool, &str)] = &[
            (Coref, "COREFERENCE", true, "corefer"),
            (Coref, "COREFERENCE", false, "corefer"),
            (Temporal, "BEFORE", true, "before"),
            (Temporal, "BEFORE", false, "after"),
            (Temporal, "SIMULTANEOUS", true, "overlap"),
            (Temporal, "SIMULTANEOUS", false, "overlap"),
            (Temporal, "OVERLAP", true, "overlap"),
            (Temporal, "OVERLAP", false, "overlap"),
            (Temporal, "BEGINS-ON", true, "overlap"),
            (Temporal, "BEGINS-ON", false, "overlap"),
            (Temporal, "ENDS-ON", true, "overlap"),
            (Temporal, "ENDS-ON", false, "overlap"),
            (Temporal, "CONTAINS", true, "overlap"),
            (Temporal, "CONTAINS", false, "overlap"),
            (Causal, "CAUSES", true, "causes"),
            (Causal, "CAUSES", false, "caused_by"),
            (Causal, "CAUSE", true, "causes"),
            (Causal, "CAUSE", false, "caused_by"),
            (Causal, "PRECONDITION", true, "causes"),
            (Causal, "PRECONDITION", false, "caused_by"),
            (Subevent, "CONTAINS", true, "contains"),
            (Subevent, "CONTAINS", false, "contained_by"),
        ];
        // The table covers every known raw label in both alignments.
        let combos: usize =
            RelationFamily::ALL.iter().map(|f| known_raw_labels(*f).len() * 2).sum();
        assert_eq!(expected.len(), combos);
        for &(family, raw, aligned, want) in expected {
            let got = map_annotation_label(family, raw, aligned).unwrap();
            assert_eq!(
                family.class_name(got.class),
                want,
                "{family:?} {raw} aligned={aligned}"
            );
        }
    }

    #[test]
    fn unknown_raw_label_is_an_error() {
        assert!(map_annotation_label(RelationFamily::Temporal, "AFTERWARDS", true).is_err());
        assert!(map_annotation_label(RelationFamily::Causal, "BEFORE", true).is_err());
        assert!(map_annotation_label(RelationFamily::Coref, "corefers", false).is_err());
    }

    #[test]
    fn before_maps_onto_both_directions() {
        let a = map_annotation_label(RelationFamily::Temporal, "BEFORE", true).unwrap();
        let b = map_annotation_label(RelationFamily::Temporal, "BEFORE", false).unwrap();
        assert_ne!(a.class, b.class);
        let ta = EdgeType::from_label(a);
        let tb = EdgeType::from_label(b);
        assert_eq!(ta.inverse(), tb);
    }

    #[test]
    fn edge_type_inverse_is_an_involution() {
        for t in EdgeType::ALL {
            assert_eq!(t.inverse().inverse(), t);
            assert_eq!(t.inverse().family(), t.family());
        }
    }

    #[test]
    fn arities_match_class_tables() {
        for family in RelationFamily::ALL {
            for class in 0..family.arity() {
                // class_name panics on out-of-range indices.
                let _ = family.class_name(class);
            }
        }
        assert_eq!(RelationFamily::Coref.arity(), 2);
        assert_eq!(RelationFamily::Temporal.arity(), 4);
        assert_eq!(RelationFamily::Causal.arity(), 3);
        assert_eq!(RelationFamily::Subevent.arity(), 3);
    }

    #[test]
    fn argmax_prefers_lower_index_on_ties() {
        assert_eq!(argmax_tie_low(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax_tie_low(&[0.1, 0.45, 0.45]), 1);
        assert_eq!(argmax_tie_low(&[0.1, 0.6, 0.2, 0.1]), 1);
    }

    #[test]
    fn edge_phrases_cover_all_types() {
        for t in EdgeType::ALL {
            assert!(!t.phrase().is_empty());
            let first = t.phrase().split_whitespace().next().unwrap();
            assert!(!first.is_empty());
        }
        assert_eq!(EdgeType::CausedBy.phrase().split_whitespace().next(), Some("caused"));
    }
}
