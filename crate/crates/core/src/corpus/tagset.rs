//! Closed tag inventories.
//!
//! The built-in inventory is the 41-tag BIS tagset for Assamese with its
//! eleven top-level categories, in the published table order. Ordinals are
//! dense `0..n` and double as CRF state indices.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Top-level grammatical category of a tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Noun,
    Pronoun,
    Demonstrative,
    Verb,
    Adjective,
    Adverb,
    PostPosition,
    Conjunction,
    Particles,
    Quantifiers,
    Residuals,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Category::Noun,
        Category::Pronoun,
        Category::Demonstrative,
        Category::Verb,
        Category::Adjective,
        Category::Adverb,
        Category::PostPosition,
        Category::Conjunction,
        Category::Particles,
        Category::Quantifiers,
        Category::Residuals,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Noun => "Noun",
            Category::Pronoun => "Pronoun",
            Category::Demonstrative => "Demonstrative",
            Category::Verb => "Verb",
            Category::Adjective => "Adjective",
            Category::Adverb => "Adverb",
            Category::PostPosition => "Post Position",
            Category::Conjunction => "Conjunction",
            Category::Particles => "Particles",
            Category::Quantifiers => "Quantifiers",
            Category::Residuals => "Residuals",
        }
    }

    pub fn from_name(name: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tag {
    pub code: String,
    pub category: Category,
    /// Human-readable subtype. Empty where the category has no subtypes
    /// (`RB`, `PSP`).
    pub type_name: String,
}

/// An ordered, closed set of tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    tags: Vec<Tag>,
    index: HashMap<String, usize>,
}

const BIS_TABLE: [(&str, Category, &str); 41] = [
    ("N_NNP", Category::Noun, "Proper Noun"),
    ("N_CNN", Category::Noun, "Common Noun"),
    ("N_VNN", Category::Noun, "Verbal Noun"),
    ("N_ANN", Category::Noun, "Abstract Noun"),
    ("N_MNN", Category::Noun, "Material Noun"),
    ("N_NST", Category::Noun, "Noun (Location)"),
    ("N_NN", Category::Noun, "Noun (unclassified)"),
    ("PR_PRP", Category::Pronoun, "Personal"),
    ("PR_PRF", Category::Pronoun, "Reflexive"),
    ("PR_PRC", Category::Pronoun, "Reciprocal"),
    ("PR_PRL", Category::Pronoun, "Relative"),
    ("PR_PRQ", Category::Pronoun, "Wh-words"),
    ("PR_PRI", Category::Pronoun, "Indefinite"),
    ("DM_DMD", Category::Demonstrative, "Deictic"),
    ("DM_DMR", Category::Demonstrative, "Relative"),
    ("DM_DMQ", Category::Demonstrative, "Wh-words"),
    ("DM_DMI", Category::Demonstrative, "Indefinite"),
    ("V_VAUX", Category::Verb, "Auxiliary Verb"),
    ("V_VM", Category::Verb, "Main Verb"),
    ("V_VBT", Category::Verb, "Transitive"),
    ("V_VBI", Category::Verb, "In-transitive"),
    ("J_PJJ", Category::Adjective, "Proper Adjective"),
    ("J_VJJ", Category::Adjective, "Verbal Adjective"),
    ("J_JJ", Category::Adjective, "Adjectival Adverb"),
    ("RB", Category::Adverb, ""),
    ("PSP", Category::PostPosition, ""),
    ("CC_CCD", Category::Conjunction, "Conjunction"),
    ("CC_CCS", Category::Conjunction, "Co-ordinator"),
    ("SUF", Category::Particles, "Particles (unclassified)"),
    ("RP_RPD", Category::Particles, "Classifier"),
    ("RP_INJ", Category::Particles, "Interjection"),
    ("RP_NEG", Category::Particles, "Negation"),
    ("RP_INTF", Category::Particles, "Intensifier"),
    ("QT_QTF", Category::Quantifiers, "General"),
    ("QT_QTC", Category::Quantifiers, "Cardinals"),
    ("QT_QTO", Category::Quantifiers, "Ordinals"),
    ("RD_RDF", Category::Residuals, "Foreign word"),
    ("RD_SYM", Category::Residuals, "Symbol"),
    ("RD_PUNC", Category::Residuals, "Punctuation"),
    ("RD_ECH", Category::Residuals, "Echowords"),
    ("RD_UNK", Category::Residuals, "Unknown"),
];

/// The 41-tag BIS inventory in table order.
pub fn builtin_bis_tagset() -> TagSet {
    let tags = BIS_TABLE
        .iter()
        .map(|&(code, category, type_name)| Tag {
            code: code.to_string(),
            category,
            type_name: type_name.to_string(),
        })
        .collect();
    TagSet::new(tags).expect("built-in tagset has unique codes")
}

impl TagSet {
    pub fn new(tags: Vec<Tag>) -> Result<TagSet, CorpusError> {
        if tags.is_empty() {
            return Err(CorpusError::InvalidTagSet("tagset is empty".into()));
        }
        let mut index = HashMap::with_capacity(tags.len());
        for (i, tag) in tags.iter().enumerate() {
            if tag.code.is_empty() || tag.code.chars().any(char::is_whitespace) {
                return Err(CorpusError::InvalidTagSet(format!(
                    "tag code {:?} is empty or contains whitespace",
                    tag.code
                )));
            }
            if index.insert(tag.code.clone(), i).is_some() {
                return Err(CorpusError::InvalidTagSet(format!(
                    "duplicate tag code {}",
                    tag.code
                )));
            }
        }
        Ok(TagSet { tags, index })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn ordinal(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn tag(&self, ordinal: usize) -> &Tag {
        &self.tags[ordinal]
    }

    pub fn code(&self, ordinal: usize) -> &str {
        &self.tags[ordinal].code
    }

    pub fn category_of(&self, code: &str) -> Option<(Category, &str)> {
        self.ordinal(code)
            .map(|i| (self.tags[i].category, self.tags[i].type_name.as_str()))
    }

    /// Distinct categories in first-appearance order.
    pub fn categories(&self) -> Vec<Category> {
        let mut seen = Vec::new();
        for t in &self.tags {
            if !seen.contains(&t.category) {
                seen.push(t.category);
            }
        }
        seen
    }
}
