//! Universal part-of-speech inventory, the reserved input symbols and the
//! open/closed/other word class partition.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The 17 Universal Dependencies part-of-speech tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Upos {
    Adj,
    Adp,
    Adv,
    Aux,
    Cconj,
    Det,
    Intj,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Punct,
    Sconj,
    Sym,
    Verb,
    X,
}

impl Upos {
    pub const COUNT: usize = 17;

    pub const ALL: [Upos; Upos::COUNT] = [
        Upos::Adj,
        Upos::Adp,
        Upos::Adv,
        Upos::Aux,
        Upos::Cconj,
        Upos::Det,
        Upos::Intj,
        Upos::Noun,
        Upos::Num,
        Upos::Part,
        Upos::Pron,
        Upos::Propn,
        Upos::Punct,
        Upos::Sconj,
        Upos::Sym,
        Upos::Verb,
        Upos::X,
    ];

    /// Position of the tag in [`Upos::ALL`]; used as the classifier label.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Upos> {
        Upos::ALL.get(idx).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Upos::Adj => "ADJ",
            Upos::Adp => "ADP",
            Upos::Adv => "ADV",
            Upos::Aux => "AUX",
            Upos::Cconj => "CCONJ",
            Upos::Det => "DET",
            Upos::Intj => "INTJ",
            Upos::Noun => "NOUN",
            Upos::Num => "NUM",
            Upos::Part => "PART",
            Upos::Pron => "PRON",
            Upos::Propn => "PROPN",
            Upos::Punct => "PUNCT",
            Upos::Sconj => "SCONJ",
            Upos::Sym => "SYM",
            Upos::Verb => "VERB",
            Upos::X => "X",
        }
    }

    pub fn class(self) -> WordClass {
        match self {
            Upos::Adj | Upos::Adv | Upos::Intj | Upos::Noun | Upos::Propn | Upos::Verb => {
                WordClass::Open
            }
            Upos::Adp
            | Upos::Aux
            | Upos::Cconj
            | Upos::Det
            | Upos::Num
            | Upos::Part
            | Upos::Pron
            | Upos::Sconj => WordClass::Closed,
            Upos::Punct | Upos::Sym | Upos::X => WordClass::Other,
        }
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Upos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Upos::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTag(s.to_string()))
    }
}

impl From<Upos> for String {
    fn from(t: Upos) -> String {
        t.as_str().to_string()
    }
}

impl TryFrom<String> for Upos {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Word type class of a gold tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordClass {
    Open,
    Closed,
    Other,
}

impl WordClass {
    pub const ALL: [WordClass; 3] = [WordClass::Open, WordClass::Closed, WordClass::Other];

    pub fn members(self) -> Vec<Upos> {
        Upos::ALL.iter().copied().filter(|t| t.class() == self).collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WordClass::Open => "open",
            WordClass::Closed => "closed",
            WordClass::Other => "other",
        }
    }
}

/// Literal written in the UPOS column for a masked position.
pub const MASK_SYMBOL: &str = "<MASK>";

/// A tag as seen by a tag-conditioned parser: a real tag or the mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TagSymbol {
    Tag(Upos),
    Mask,
}

impl TagSymbol {
    pub fn as_str(self) -> &'static str {
        match self {
            TagSymbol::Tag(t) => t.as_str(),
            TagSymbol::Mask => MASK_SYMBOL,
        }
    }
}

impl fmt::Display for TagSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TagSymbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == MASK_SYMBOL {
            Ok(TagSymbol::Mask)
        } else {
            s.parse().map(TagSymbol::Tag)
        }
    }
}

impl From<Upos> for TagSymbol {
    fn from(t: Upos) -> Self {
        TagSymbol::Tag(t)
    }
}

/// Tag input vocabulary: padding and mask are reserved ahead of the 17 tags.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagInventory;

impl TagInventory {
    pub const PAD: usize = 0;
    pub const MASK: usize = 1;
    const OFFSET: usize = 2;

    /// Number of rows of a tag embedding table.
    pub fn input_size(self) -> usize {
        Upos::COUNT + Self::OFFSET
    }

    /// Number of classifier outputs.
    pub fn output_size(self) -> usize {
        Upos::COUNT
    }

    pub fn input_id(self, sym: TagSymbol) -> usize {
        match sym {
            TagSymbol::Tag(t) => t.index() + Self::OFFSET,
            TagSymbol::Mask => Self::MASK,
        }
    }

    pub fn tags(self) -> &'static [Upos] {
        &Upos::ALL
    }
}
