//! Inflected-form lexicon: surface form to (lemma, morphological tag).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::text::{script_directive, PhonemeString, Script, ScriptTable};

const BUILTIN_LEXICON: &str = include_str!("../data/lexicon.tsv");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TagError {
    #[error("unknown tag value {0:?}")]
    UnknownValue(String),
    #[error("tag values out of order or repeated in {0:?}")]
    Order(String),
    #[error("{0}")]
    Constraint(String),
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("lexicon line {line}: {message}")]
    ConstraintViolation { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

macro_rules! tag_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            fn from_value(s: &str) -> Option<Self> {
                match s { $($text => Some($name::$variant),)+ _ => None }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

tag_enum!(Pos { Noun => "NOUN", Verb => "VERB", Adj => "ADJ", Pron => "PRON", Indecl => "INDECL" });
tag_enum!(Case {
    Nom => "NOM", Acc => "ACC", Ins => "INS", Dat => "DAT",
    Abl => "ABL", Gen => "GEN", Loc => "LOC", Voc => "VOC",
});
tag_enum!(Number { Sg => "SG", Du => "DU", Pl => "PL" });
tag_enum!(Gender { M => "M", F => "F", N => "N" });
tag_enum!(Person { First => "1", Second => "2", Third => "3" });
tag_enum!(TenseMood {
    Pres => "PRES", Impf => "IMPF", Impv => "IMPV", Opt => "OPT", Perf => "PERF",
    Aor => "AOR", Fut => "FUT", Cond => "COND", Ben => "BEN",
});

/// A factored morphological label.
///
/// The tag-spec string lists the set fields in the fixed order
/// pos, case, number, gender, person, tense/mood, e.g. `NOUN,NOM,SG,M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MorphTag {
    pub pos: Pos,
    pub case: Option<Case>,
    pub number: Option<Number>,
    pub gender: Option<Gender>,
    pub person: Option<Person>,
    pub tense_mood: Option<TenseMood>,
}

impl MorphTag {
    pub fn new(pos: Pos) -> Self {
        MorphTag {
            pos,
            case: None,
            number: None,
            gender: None,
            person: None,
            tense_mood: None,
        }
    }

    pub fn validate(&self) -> Result<(), TagError> {
        let nominal = matches!(self.pos, Pos::Noun | Pos::Adj | Pos::Pron);
        if !nominal && (self.case.is_some() || self.gender.is_some()) {
            return Err(TagError::Constraint(format!("{} cannot carry case or gender", self.pos)));
        }
        if self.pos != Pos::Verb && (self.person.is_some() || self.tense_mood.is_some()) {
            return Err(TagError::Constraint(format!("{} cannot carry person or tense", self.pos)));
        }
        if self.pos == Pos::Indecl && self.number.is_some() {
            return Err(TagError::Constraint("INDECL carries no other fields".into()));
        }
        Ok(())
    }
}

impl FromStr for MorphTag {
    type Err = TagError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let mut fields = spec.split(',').map(str::trim);
        let first = fields.next().unwrap_or_default();
        let pos = Pos::from_value(first).ok_or_else(|| TagError::UnknownValue(first.to_string()))?;
        let mut tag = MorphTag::new(pos);
        // Index of the last field filled, to enforce the fixed order.
        let mut last = 0;
        for value in fields {
            let slot = if let Some(v) = Case::from_value(value) {
                tag.case = Some(v);
                1
            } else if let Some(v) = Number::from_value(value) {
                tag.number = Some(v);
                2
            } else if let Some(v) = Gender::from_value(value) {
                tag.gender = Some(v);
                3
            } else if let Some(v) = Person::from_value(value) {
                tag.person = Some(v);
                4
            } else if let Some(v) = TenseMood::from_value(value) {
                tag.tense_mood = Some(v);
                5
            } else {
                return Err(TagError::UnknownValue(value.to_string()));
            };
            if slot <= last {
                return Err(TagError::Order(spec.to_string()));
            }
            last = slot;
        }
        tag.validate()?;
        Ok(tag)
    }
}

impl fmt::Display for MorphTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pos)?;
        let rest: [Option<&'static str>; 5] = [
            self.case.map(Case::as_str),
            self.number.map(Number::as_str),
            self.gender.map(Gender::as_str),
            self.person.map(Person::as_str),
            self.tense_mood.map(TenseMood::as_str),
        ];
        for v in rest.into_iter().flatten() {
            write!(f, ",{v}")?;
        }
        Ok(())
    }
}

impl Serialize for MorphTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MorphTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LexEntry {
    pub surface: PhonemeString,
    pub lemma: PhonemeString,
    pub tag: MorphTag,
}

/// Immutable lookup table of inflected forms.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<LexEntry>,
    by_surface: HashMap<PhonemeString, Range<usize>>,
}

impl Lexicon {
    /// The bundled toy lexicon.
    pub fn builtin() -> &'static Lexicon {
        static LEX: OnceLock<Lexicon> = OnceLock::new();
        LEX.get_or_init(|| Lexicon::parse(BUILTIN_LEXICON, ScriptTable::builtin()).expect("bundled lexicon is valid"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, ScriptTable::builtin())
    }

    /// Parses `surface<TAB>lemma<TAB>tag-spec` lines. Forms are SLP1 unless
    /// the file starts with a `#script=NAME` directive.
    pub fn parse(text: &str, table: &ScriptTable) -> Result<Self, LexiconError> {
        let script = script_directive(text)
            .map_err(|e| LexiconError::Parse { line: 0, message: e.to_string() })?
            .unwrap_or(Script::Slp1);
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| LexiconError::Parse { line, message };
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() != 3 {
                return Err(parse_err(format!("expected 3 columns, found {}", cols.len())));
            }
            let surface = table.to_phonemes(cols[0], script).map_err(|e| parse_err(e.to_string()))?;
            let lemma = table.to_phonemes(cols[1], script).map_err(|e| parse_err(e.to_string()))?;
            if surface.is_empty() || lemma.is_empty() {
                return Err(parse_err("empty surface or lemma".into()));
            }
            let tag = cols[2].parse::<MorphTag>().map_err(|e| match e {
                TagError::Constraint(message) => LexiconError::ConstraintViolation { line, message },
                other => parse_err(other.to_string()),
            })?;
            entries.push(LexEntry { surface, lemma, tag });
        }
        Ok(Self::from_entries(entries))
    }

    pub fn from_entries(mut entries: Vec<LexEntry>) -> Self {
        entries.sort();
        entries.dedup();
        let mut by_surface = HashMap::new();
        let mut start = 0;
        while start < entries.len() {
            let mut end = start + 1;
            while end < entries.len() && entries[end].surface == entries[start].surface {
                end += 1;
            }
            by_surface.insert(entries[start].surface.clone(), start..end);
            start = end;
        }
        Lexicon { entries, by_surface }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries for `form`, ordered by lemma then tag. Empty when unknown.
    pub fn lookup(&self, form: &PhonemeString) -> &[LexEntry] {
        match self.by_surface.get(form) {
            Some(r) => &self.entries[r.clone()],
            None => &[],
        }
    }

    pub fn contains(&self, form: &PhonemeString) -> bool {
        self.by_surface.contains_key(form)
    }

    pub fn entries(&self) -> &[LexEntry] {
        &self.entries
    }

    /// Distinct tags in the lexicon, in canonical order.
    pub fn tags(&self) -> BTreeSet<MorphTag> {
        self.entries.iter().map(|e| e.tag).collect()
    }

    /// Distinct surface forms carrying `tag`, in canonical order.
    pub fn forms_with_tag(&self, tag: &MorphTag) -> Vec<&PhonemeString> {
        let mut forms: Vec<&PhonemeString> = self.entries.iter().filter(|e| &e.tag == tag).map(|e| &e.surface).collect();
        forms.dedup();
        forms
    }
}
