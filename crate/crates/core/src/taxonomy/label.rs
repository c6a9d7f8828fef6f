use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Coarse ESCO label assigned to a span.
///
/// Variants are declared in the canonical tag order used for every sorted
/// rendering (histograms, confusion matrices). `Artifact`, `KnowledgeArtifact`
/// and `SkillArtifact` (`0000`, `K?`, `S?`) are accepted on input only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoarseLabel {
    Artifact,
    A1,
    A2,
    K00,
    K01,
    K02,
    K03,
    K04,
    K05,
    K06,
    K07,
    K08,
    K09,
    K10,
    K99,
    L1,
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    S8,
    KnowledgeArtifact,
    SkillArtifact,
}

use CoarseLabel::*;

impl CoarseLabel {
    pub const ALL: [CoarseLabel; 26] = [
        Artifact,
        A1,
        A2,
        K00,
        K01,
        K02,
        K03,
        K04,
        K05,
        K06,
        K07,
        K08,
        K09,
        K10,
        K99,
        L1,
        S1,
        S2,
        S3,
        S4,
        S5,
        S6,
        S7,
        S8,
        KnowledgeArtifact,
        SkillArtifact,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Artifact => "0000",
            A1 => "A1",
            A2 => "A2",
            K00 => "K00",
            K01 => "K01",
            K02 => "K02",
            K03 => "K03",
            K04 => "K04",
            K05 => "K05",
            K06 => "K06",
            K07 => "K07",
            K08 => "K08",
            K09 => "K09",
            K10 => "K10",
            K99 => "K99",
            L1 => "L1",
            S1 => "S1",
            S2 => "S2",
            S3 => "S3",
            S4 => "S4",
            S5 => "S5",
            S6 => "S6",
            S7 => "S7",
            S8 => "S8",
            KnowledgeArtifact => "K?",
            SkillArtifact => "S?",
        }
    }

    pub fn is_artifact(self) -> bool {
        matches!(self, Artifact | KnowledgeArtifact | SkillArtifact)
    }

    /// Label group used by pickers: `S`, `K`, `A`, `L`, or `artifact`.
    pub fn group(self) -> &'static str {
        match self {
            _ if self.is_artifact() => "artifact",
            A1 | A2 => "A",
            L1 => "L",
            S1 | S2 | S3 | S4 | S5 | S6 | S7 | S8 => "S",
            _ => "K",
        }
    }

    pub fn subject(self) -> &'static str {
        match self {
            Artifact | KnowledgeArtifact | SkillArtifact => "Artifact",
            A1 => "Attitudes",
            A2 => "Values",
            K00 => "Generic programmes and qualifications",
            K01 => "Education",
            K02 => "Arts and humanities",
            K03 => "Social sciences, journalism and information",
            K04 => "Business, administration and law",
            K05 => "Natural sciences, mathematics and statistics",
            K06 => "Information and communication technologies (ICTs)",
            K07 => "Engineering, manufacturing and construction",
            K08 => "Agriculture, forestry, fisheries and veterinary",
            K09 => "Health and welfare",
            K10 => "Services",
            K99 => "Field unknown",
            L1 => "Languages",
            S1 => "Communication, collaboration and creativity",
            S2 => "Information skills",
            S3 => "Assisting and caring",
            S4 => "Management skills",
            S5 => "Working with computers",
            S6 => "Handling and moving",
            S7 => "Constructing",
            S8 => "Working with machinery and specialised equipment",
        }
    }

    pub(crate) fn knowledge_field(field: u8) -> Option<CoarseLabel> {
        Some(match field {
            0 => K00,
            1 => K01,
            2 => K02,
            3 => K03,
            4 => K04,
            5 => K05,
            6 => K06,
            7 => K07,
            8 => K08,
            9 => K09,
            10 => K10,
            99 => K99,
            _ => return None,
        })
    }

    pub(crate) fn skill_group(group: u8) -> Option<CoarseLabel> {
        Some(match group {
            1 => S1,
            2 => S2,
            3 => S3,
            4 => S4,
            5 => S5,
            6 => S6,
            7 => S7,
            8 => S8,
            _ => return None,
        })
    }
}

impl fmt::Display for CoarseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for CoarseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CoarseLabel::ALL
            .iter()
            .copied()
            .find(|l| l.tag() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

impl Serialize for CoarseLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for CoarseLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for label in CoarseLabel::ALL {
            assert_eq!(label.tag().parse::<CoarseLabel>().unwrap(), label);
        }
    }

    #[test]
    fn declaration_order_is_tag_order() {
        let mut sorted = CoarseLabel::ALL;
        sorted.sort();
        assert_eq!(sorted, CoarseLabel::ALL);
        assert!(CoarseLabel::K99 < CoarseLabel::L1);
        assert!(CoarseLabel::S8 < CoarseLabel::KnowledgeArtifact);
    }

    #[test]
    fn rejects_unpadded_and_unknown_tags() {
        assert!("K2".parse::<CoarseLabel>().is_err());
        assert!("S9".parse::<CoarseLabel>().is_err());
        assert!("".parse::<CoarseLabel>().is_err());
    }

    #[test]
    fn artifact_tags_are_accepted_verbatim() {
        assert_eq!("0000".parse::<CoarseLabel>().unwrap(), CoarseLabel::Artifact);
        assert!("K?".parse::<CoarseLabel>().unwrap().is_artifact());
        assert!("S?".parse::<CoarseLabel>().unwrap().is_artifact());
    }
}
