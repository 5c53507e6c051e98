//! Canonical phoneme representation and transliteration.
//!
//! Every module works on [`PhonemeString`], a sequence of phonemes where each
//! phoneme is one SLP1 symbol. User-facing text in IAST or Devanagari is
//! converted at the edges through a [`ScriptTable`] loaded from a data file.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const BUILTIN_TABLE: &str = include_str!("../data/translit.tsv");

/// Separator inserted between IAST symbols whose concatenation would
/// otherwise read as a single symbol (`a:i` is a followed by i, `ai` is ai).
pub const IAST_SEPARATOR: char = ':';

const VIRAMA: char = '\u{094D}';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("invalid character {character:?} at position {position}")]
    InvalidCharacter { position: usize, character: char },
    #[error("unknown script {0:?}")]
    UnknownScript(String),
    #[error("transliteration table line {line}: {message}")]
    Table { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Script {
    #[serde(rename = "SLP1")]
    Slp1,
    #[serde(rename = "IAST")]
    Iast,
    #[serde(rename = "DEVANAGARI")]
    Devanagari,
}

impl Script {
    pub const ALL: [Script; 3] = [Script::Slp1, Script::Iast, Script::Devanagari];

    pub fn name(self) -> &'static str {
        match self {
            Script::Slp1 => "SLP1",
            Script::Iast => "IAST",
            Script::Devanagari => "DEVANAGARI",
        }
    }
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Script {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SLP1" => Ok(Script::Slp1),
            "IAST" => Ok(Script::Iast),
            "DEVANAGARI" => Ok(Script::Devanagari),
            _ => Err(TextError::UnknownScript(s.to_string())),
        }
    }
}

/// A single phoneme, stored as its SLP1 symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phoneme(u8);

impl Phoneme {
    pub fn symbol(self) -> char {
        self.0 as char
    }

    pub fn byte(self) -> u8 {
        self.0
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0 as char)
    }
}

/// An ordered sequence of phonemes. The empty sequence is legal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhonemeString(Vec<Phoneme>);

impl PhonemeString {
    pub fn new() -> Self {
        PhonemeString(Vec::new())
    }

    /// Parses SLP1 text against the built-in inventory.
    pub fn from_slp1(text: &str) -> Result<Self, TextError> {
        ScriptTable::builtin().to_phonemes(text, Script::Slp1)
    }

    pub fn from_phonemes(phonemes: Vec<Phoneme>) -> Self {
        PhonemeString(phonemes)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn phonemes(&self) -> &[Phoneme] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Phoneme> + '_ {
        self.0.iter().copied()
    }

    pub fn starts_with(&self, prefix: &[Phoneme]) -> bool {
        self.0.starts_with(prefix)
    }

    pub fn ends_with(&self, suffix: &[Phoneme]) -> bool {
        self.0.ends_with(suffix)
    }

    /// Sub-sequence `range` as a new string.
    pub fn slice(&self, range: std::ops::Range<usize>) -> PhonemeString {
        PhonemeString(self.0[range].to_vec())
    }

    pub fn concat(parts: &[&[Phoneme]]) -> PhonemeString {
        let mut v = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        for p in parts {
            v.extend_from_slice(p);
        }
        PhonemeString(v)
    }

    pub fn as_slp1(&self) -> String {
        self.0.iter().map(|p| p.0 as char).collect()
    }
}

impl fmt::Display for PhonemeString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.0 as char)?;
        }
        Ok(())
    }
}

impl FromStr for PhonemeString {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PhonemeString::from_slp1(s)
    }
}

impl From<&[Phoneme]> for PhonemeString {
    fn from(p: &[Phoneme]) -> Self {
        PhonemeString(p.to_vec())
    }
}

impl Serialize for PhonemeString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.as_slp1())
    }
}

impl<'de> Deserialize<'de> for PhonemeString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        PhonemeString::from_slp1(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhonemeClass {
    Vowel,
    Consonant,
    Mark,
}

#[derive(Debug, Clone)]
struct Row {
    slp1: u8,
    iast: String,
    deva: String,
    deva_sign: Option<String>,
    class: PhonemeClass,
}

/// Phoneme inventory with its SLP1, IAST and Devanagari renderings.
#[derive(Debug, Clone)]
pub struct ScriptTable {
    version: u32,
    rows: Vec<Row>,
    by_slp1: [Option<usize>; 128],
    iast_tokens: HashMap<String, usize>,
    iast_max_chars: usize,
    deva_letters: HashMap<char, usize>,
    deva_signs: HashMap<char, usize>,
}

fn is_deva_consonant(c: char) -> bool {
    ('\u{0915}'..='\u{0939}').contains(&c) || ('\u{0958}'..='\u{095F}').contains(&c)
}

impl ScriptTable {
    /// The table bundled with the crate.
    pub fn builtin() -> &'static ScriptTable {
        static TABLE: OnceLock<ScriptTable> = OnceLock::new();
        TABLE.get_or_init(|| ScriptTable::parse(BUILTIN_TABLE).expect("bundled table is valid"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| TextError::Table {
            line: 0,
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Parses `SLP1<TAB>IAST<TAB>DEVANAGARI` lines. Vowel rows write the
    /// Devanagari column as `independent|sign`.
    pub fn parse(text: &str) -> Result<Self, TextError> {
        let mut version = 1;
        let mut rows = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let err = |message: String| TextError::Table { line: line_no, message };
            let line = raw.trim_end_matches('\r');
            if let Some(v) = line.strip_prefix("#version=") {
                version = v.trim().parse().map_err(|_| err(format!("bad version {v:?}")))?;
                continue;
            }
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(format!("expected 3 columns, found {}", cols.len())));
            }
            let slp1 = cols[0].as_bytes();
            if slp1.len() != 1 || !slp1[0].is_ascii_graphic() {
                return Err(err(format!("SLP1 symbol must be one ASCII character: {:?}", cols[0])));
            }
            if cols[1].is_empty() || cols[1].contains(IAST_SEPARATOR) {
                return Err(err("empty or reserved IAST rendering".into()));
            }
            let (deva, deva_sign, class) = match cols[2].split_once('|') {
                Some((ind, sign)) => (
                    ind.to_string(),
                    if sign.is_empty() { None } else { Some(sign.to_string()) },
                    PhonemeClass::Vowel,
                ),
                None => {
                    let mut chars = cols[2].chars();
                    let c = chars.next().ok_or_else(|| err("empty Devanagari rendering".into()))?;
                    if chars.next().is_some() {
                        return Err(err("consonant or mark rendering must be one character".into()));
                    }
                    let class = if is_deva_consonant(c) { PhonemeClass::Consonant } else { PhonemeClass::Mark };
                    (cols[2].to_string(), None, class)
                }
            };
            rows.push(Row {
                slp1: slp1[0],
                iast: cols[1].to_string(),
                deva,
                deva_sign,
                class,
            });
        }

        let mut by_slp1 = [None; 128];
        let mut iast_tokens = HashMap::new();
        let mut deva_letters = HashMap::new();
        let mut deva_signs = HashMap::new();
        let mut iast_max_chars = 1;
        for (i, row) in rows.iter().enumerate() {
            let dup = |what: &str| TextError::Table {
                line: 0,
                message: format!("duplicate {what} for {:?}", row.slp1 as char),
            };
            if by_slp1[row.slp1 as usize].replace(i).is_some() {
                return Err(dup("SLP1 symbol"));
            }
            if iast_tokens.insert(row.iast.clone(), i).is_some() {
                return Err(dup("IAST rendering"));
            }
            iast_max_chars = iast_max_chars.max(row.iast.chars().count());
            let mut dchars = row.deva.chars();
            let letter = dchars.next().expect("checked non-empty");
            if dchars.next().is_some() {
                return Err(dup("multi-character Devanagari letter"));
            }
            if deva_letters.insert(letter, i).is_some() {
                return Err(dup("Devanagari letter"));
            }
            if let Some(sign) = &row.deva_sign {
                let mut sc = sign.chars();
                let s = sc.next().expect("non-empty sign");
                if sc.next().is_some() || deva_signs.insert(s, i).is_some() {
                    return Err(dup("Devanagari vowel sign"));
                }
            }
        }
        if !rows.iter().any(|r| r.class == PhonemeClass::Vowel && r.deva_sign.is_none()) {
            return Err(TextError::Table {
                line: 0,
                message: "no inherent vowel (a vowel row with an empty sign)".into(),
            });
        }
        Ok(ScriptTable {
            version,
            rows,
            by_slp1,
            iast_tokens,
            iast_max_chars,
            deva_letters,
            deva_signs,
        })
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// All phonemes of the inventory in table order.
    pub fn inventory(&self) -> Vec<Phoneme> {
        self.rows.iter().map(|r| Phoneme(r.slp1)).collect()
    }

    pub fn contains(&self, p: Phoneme) -> bool {
        self.row_index(p).is_some()
    }

    pub fn class(&self, p: Phoneme) -> Option<PhonemeClass> {
        self.row_index(p).map(|i| self.rows[i].class)
    }

    fn row_index(&self, p: Phoneme) -> Option<usize> {
        self.by_slp1.get(p.0 as usize).copied().flatten()
    }

    fn inherent_vowel(&self) -> usize {
        self.rows
            .iter()
            .position(|r| r.class == PhonemeClass::Vowel && r.deva_sign.is_none())
            .expect("validated at parse time")
    }

    /// Converts text in `script` to phonemes. Loss-free: rendering the result
    /// back into `script` yields the canonical form of the input.
    pub fn to_phonemes(&self, text: &str, script: Script) -> Result<PhonemeString, TextError> {
        let chars: Vec<char> = text.chars().collect();
        let rows = match script {
            Script::Slp1 => self.parse_slp1(&chars)?,
            Script::Iast => self.parse_iast(&chars)?,
            Script::Devanagari => self.parse_devanagari(&chars)?,
        };
        Ok(PhonemeString(rows.into_iter().map(|i| Phoneme(self.rows[i].slp1)).collect()))
    }

    fn parse_slp1(&self, chars: &[char]) -> Result<Vec<usize>, TextError> {
        chars
            .iter()
            .enumerate()
            .map(|(position, &character)| {
                let idx = if character.is_ascii() { self.by_slp1[character as usize] } else { None };
                idx.ok_or(TextError::InvalidCharacter { position, character })
            })
            .collect()
    }

    fn parse_iast(&self, chars: &[char]) -> Result<Vec<usize>, TextError> {
        let mut out = Vec::new();
        let mut pos = 0;
        let mut buf = String::new();
        while pos < chars.len() {
            if chars[pos] == IAST_SEPARATOR && pos > 0 && pos + 1 < chars.len() {
                pos += 1;
                continue;
            }
            let mut matched = None;
            let max = self.iast_max_chars.min(chars.len() - pos);
            for len in (1..=max).rev() {
                buf.clear();
                buf.extend(&chars[pos..pos + len]);
                if let Some(&i) = self.iast_tokens.get(&buf) {
                    matched = Some((i, len));
                    break;
                }
            }
            let (i, len) = matched.ok_or(TextError::InvalidCharacter {
                position: pos,
                character: chars[pos],
            })?;
            out.push(i);
            pos += len;
        }
        Ok(out)
    }

    fn parse_devanagari(&self, chars: &[char]) -> Result<Vec<usize>, TextError> {
        let inherent = self.inherent_vowel();
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < chars.len() {
            let c = chars[pos];
            let invalid = TextError::InvalidCharacter { position: pos, character: c };
            let &i = self.deva_letters.get(&c).ok_or(invalid.clone())?;
            out.push(i);
            pos += 1;
            if self.rows[i].class != PhonemeClass::Consonant {
                continue;
            }
            match chars.get(pos) {
                Some(&VIRAMA) => pos += 1,
                Some(next) if self.deva_signs.contains_key(next) => {
                    out.push(self.deva_signs[next]);
                    pos += 1;
                }
                _ => out.push(inherent),
            }
        }
        Ok(out)
    }

    /// Renders phonemes in `script`.
    pub fn render(&self, phonemes: &PhonemeString, script: Script) -> String {
        let idx: Vec<usize> = phonemes
            .iter()
            .map(|p| self.row_index(p).unwrap_or_else(|| panic!("phoneme {p} outside inventory")))
            .collect();
        match script {
            Script::Slp1 => phonemes.as_slp1(),
            Script::Iast => self.render_iast(&idx),
            Script::Devanagari => self.render_devanagari(&idx),
        }
    }

    fn render_iast(&self, idx: &[usize]) -> String {
        let pieces: Vec<&str> = idx.iter().map(|&i| self.rows[i].iast.as_str()).collect();
        let mut out = String::new();
        let mut buf = String::new();
        for (k, piece) in pieces.iter().enumerate() {
            out.push_str(piece);
            if k + 1 == pieces.len() {
                break;
            }
            // Does greedy parsing at this piece swallow more than the piece?
            buf.clear();
            buf.push_str(piece);
            let mut j = k + 1;
            while j < pieces.len() && buf.chars().count() < self.iast_max_chars + 1 {
                buf.push_str(pieces[j]);
                j += 1;
            }
            let chars: Vec<char> = buf.chars().collect();
            let own = piece.chars().count();
            let merges = (own + 1..=self.iast_max_chars.min(chars.len()))
                .any(|len| self.iast_tokens.contains_key(&chars[..len].iter().collect::<String>()));
            if merges {
                out.push(IAST_SEPARATOR);
            }
        }
        out
    }

    fn render_devanagari(&self, idx: &[usize]) -> String {
        let inherent = self.inherent_vowel();
        let mut out = String::new();
        let mut k = 0;
        while k < idx.len() {
            let row = &self.rows[idx[k]];
            out.push_str(&row.deva);
            k += 1;
            if row.class != PhonemeClass::Consonant {
                continue;
            }
            match idx.get(k).map(|&i| (i, &self.rows[i])) {
                Some((i, next)) if next.class == PhonemeClass::Vowel => {
                    if i != inherent {
                        out.push_str(next.deva_sign.as_deref().expect("non-inherent vowel has a sign"));
                    }
                    k += 1;
                }
                _ => out.push(VIRAMA),
            }
        }
        out
    }

    /// Transliterates running text. Spaces and hyphens separate words and are
    /// kept as they are; every other character must belong to `from`.
    pub fn transliterate(&self, text: &str, from: Script, to: Script) -> Result<String, TextError> {
        let mut out = String::with_capacity(text.len());
        for (offset, piece) in split_words(text) {
            match piece {
                Piece::Sep(c) => out.push(c),
                Piece::Word(w) => {
                    let p = self.to_phonemes(w, from).map_err(|e| shift(e, offset))?;
                    out.push_str(&self.render(&p, to));
                }
            }
        }
        Ok(out)
    }
}

enum Piece<'a> {
    Word(&'a str),
    Sep(char),
}

/// Splits on ' ' and '-' while keeping the separators; yields char offsets.
fn split_words(text: &str) -> Vec<(usize, Piece<'_>)> {
    let mut out = Vec::new();
    let mut start_byte = 0;
    let mut start_char = 0;
    for (ci, (bi, c)) in text.char_indices().enumerate() {
        if c == ' ' || c == '-' {
            if bi > start_byte {
                out.push((start_char, Piece::Word(&text[start_byte..bi])));
            }
            out.push((ci, Piece::Sep(c)));
            start_byte = bi + c.len_utf8();
            start_char = ci + 1;
        }
    }
    if start_byte < text.len() {
        out.push((start_char, Piece::Word(&text[start_byte..])));
    }
    out
}

fn shift(e: TextError, offset: usize) -> TextError {
    match e {
        TextError::InvalidCharacter { position, character } => TextError::InvalidCharacter {
            position: position + offset,
            character,
        },
        other => other,
    }
}

/// A whitespace-separated chunk of input text. Hyphenated chunks are
/// pre-segmented compounds and keep their parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub parts: Vec<PhonemeString>,
}

impl Chunk {
    pub fn is_compound(&self) -> bool {
        self.parts.len() > 1
    }
}

/// Splits `text` on whitespace and hyphens into phoneme chunks.
pub fn parse_chunks(table: &ScriptTable, text: &str, script: Script) -> Result<Vec<Chunk>, TextError> {
    let mut chunks = Vec::new();
    let mut char_offset: usize = 0;
    for raw in text.split(' ') {
        let len = raw.chars().count();
        if !raw.is_empty() {
            let mut parts = Vec::new();
            let mut part_offset = char_offset;
            for part in raw.split('-') {
                let plen = part.chars().count();
                if part.is_empty() {
                    return Err(TextError::InvalidCharacter {
                        position: part_offset.saturating_sub(1).max(char_offset),
                        character: '-',
                    });
                }
                parts.push(table.to_phonemes(part, script).map_err(|e| shift(e, part_offset))?);
                part_offset += plen + 1;
            }
            chunks.push(Chunk { parts });
        }
        char_offset += len + 1;
    }
    Ok(chunks)
}

/// Converts text through the built-in table.
pub fn transliterate(text: &str, from: Script, to: Script) -> Result<String, TextError> {
    ScriptTable::builtin().transliterate(text, from, to)
}

/// Converts text to phonemes through the built-in table.
pub fn to_phonemes(text: &str, script: Script) -> Result<PhonemeString, TextError> {
    ScriptTable::builtin().to_phonemes(text, script)
}

/// Renders phonemes through the built-in table.
pub fn render(phonemes: &PhonemeString, script: Script) -> String {
    ScriptTable::builtin().render(phonemes, script)
}

/// Reads a `#script=NAME` directive from the leading comment lines of a data file.
pub(crate) fn script_directive(text: &str) -> Result<Option<Script>, TextError> {
    for line in text.lines() {
        let line = line.trim();
        if let Some(name) = line.strip_prefix("#script=") {
            return name.parse().map(Some);
        }
        if !line.is_empty() && !line.starts_with('#') {
            break;
        }
    }
    Ok(None)
}
