//! CoNLL-U reading and writing.
//!
//! Only the ID, FORM, UPOS, HEAD and DEPREL columns are modelled. The
//! remaining columns are carried along verbatim, and multiword-token ranges
//! and empty nodes are kept as opaque lines so that a written treebank
//! reproduces its input.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tags::{TagSymbol, Upos};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub upos: Upos,
    /// Head position; 0 is the artificial root.
    pub head: usize,
    pub deprel: String,
    pub lemma: String,
    pub xpos: String,
    pub feats: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// A token with every unmodelled column set to `_`.
    pub fn new(index: usize, form: &str, upos: Upos, head: usize, deprel: &str) -> Self {
        Token {
            index,
            form: form.to_string(),
            upos,
            head,
            deprel: deprel.to_string(),
            lemma: "_".into(),
            xpos: "_".into(),
            feats: "_".into(),
            deps: "_".into(),
            misc: "_".into(),
        }
    }
}

/// A line that is not a word token (multiword range or empty node).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraLine {
    /// Number of word tokens that precede the line.
    pub position: usize,
    pub line: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sent_id: String,
    /// Raw comment lines including the leading `#`.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
    pub extra: Vec<ExtraLine>,
}

impl Sentence {
    /// Build a sentence from tokens; indices are assigned 1..n.
    pub fn from_tokens(sent_id: impl Into<String>, mut tokens: Vec<Token>) -> Self {
        for (i, tok) in tokens.iter_mut().enumerate() {
            tok.index = i + 1;
        }
        let sent_id = sent_id.into();
        Sentence {
            comments: vec![format!("# sent_id = {sent_id}")],
            sent_id,
            tokens,
            extra: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    pub fn tags(&self) -> Vec<Upos> {
        self.tokens.iter().map(|t| t.upos).collect()
    }

    /// Structural problems that do not prevent use of the sentence.
    pub fn anomalies(&self) -> Vec<String> {
        let mut out = Vec::new();
        let roots = self.tokens.iter().filter(|t| t.head == 0).count();
        if roots != 1 {
            out.push(format!("sentence {}: {} root tokens", self.sent_id, roots));
        }
        for t in &self.tokens {
            if t.head > self.tokens.len() {
                out.push(format!(
                    "sentence {}: token {} has head {} beyond sentence length {}",
                    self.sent_id,
                    t.index,
                    t.head,
                    self.tokens.len()
                ));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Treebank {
    pub name: String,
    pub split: Split,
    pub sentences: Vec<Sentence>,
    /// Anomalies found while reading (multiple roots, out-of-range heads).
    pub warnings: Vec<String>,
}

impl Treebank {
    pub fn new(name: impl Into<String>, split: Split, sentences: Vec<Sentence>) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::EmptyTreebank);
        }
        let warnings = sentences.iter().flat_map(|s| s.anomalies()).collect();
        Ok(Treebank {
            name: name.into(),
            split,
            sentences,
            warnings,
        })
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn gold_tags(&self) -> Vec<Vec<Upos>> {
        self.sentences.iter().map(Sentence::tags).collect()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Default)]
struct SentenceBuilder {
    comments: Vec<String>,
    tokens: Vec<Token>,
    extra: Vec<ExtraLine>,
}

impl SentenceBuilder {
    fn is_empty(&self) -> bool {
        self.comments.is_empty() && self.tokens.is_empty() && self.extra.is_empty()
    }

    fn finish(self, number: usize, line: usize) -> Result<Sentence> {
        if self.tokens.is_empty() {
            return Err(parse_err(line, "sentence has no word tokens"));
        }
        let sent_id = self
            .comments
            .iter()
            .find_map(|c| {
                c.strip_prefix('#')
                    .map(str::trim_start)
                    .and_then(|c| c.strip_prefix("sent_id"))
                    .map(str::trim_start)
                    .and_then(|c| c.strip_prefix('='))
                    .map(|id| id.trim().to_string())
            })
            .unwrap_or_else(|| number.to_string());
        Ok(Sentence {
            sent_id,
            comments: self.comments,
            tokens: self.tokens,
            extra: self.extra,
        })
    }
}

fn parse_token(fields: &[&str], line_no: usize, expected_index: usize) -> Result<Token> {
    let index: usize = fields[0]
        .parse()
        .map_err(|_| parse_err(line_no, format!("invalid token id `{}`", fields[0])))?;
    if index != expected_index {
        return Err(parse_err(
            line_no,
            format!("token id {index} out of sequence, expected {expected_index}"),
        ));
    }
    let upos: Upos = fields[3]
        .parse()
        .map_err(|_| parse_err(line_no, format!("unknown UPOS `{}`", fields[3])))?;
    let head: usize = fields[6]
        .parse()
        .map_err(|_| parse_err(line_no, format!("non-integer head `{}`", fields[6])))?;
    if head == index {
        return Err(parse_err(line_no, format!("token {index} is its own head")));
    }
    Ok(Token {
        index,
        form: fields[1].to_string(),
        lemma: fields[2].to_string(),
        upos,
        xpos: fields[4].to_string(),
        feats: fields[5].to_string(),
        head,
        deprel: fields[7].to_string(),
        deps: fields[8].to_string(),
        misc: fields[9].to_string(),
    })
}

/// Parse CoNLL-U text into a treebank.
pub fn parse_conllu(text: &str, name: &str, split: Split) -> Result<Treebank> {
    let mut sentences = Vec::new();
    let mut current = SentenceBuilder::default();
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = raw.strip_suffix('\r').unwrap_or(raw);

        if line.trim().is_empty() {
            if !current.is_empty() {
                let done = std::mem::take(&mut current);
                sentences.push(done.finish(sentences.len() + 1, line_no)?);
            }
            continue;
        }
        if line.starts_with('#') && current.tokens.is_empty() && current.extra.is_empty() {
            current.comments.push(line.to_string());
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(parse_err(
                line_no,
                format!("expected 10 tab-separated columns, found {}", fields.len()),
            ));
        }
        let id = fields[0];
        if id.contains('-') || id.contains('.') {
            current.extra.push(ExtraLine {
                position: current.tokens.len(),
                line: line.to_string(),
            });
            continue;
        }
        let token = parse_token(&fields, line_no, current.tokens.len() + 1)?;
        current.tokens.push(token);
    }
    if !current.is_empty() {
        sentences.push(current.finish(sentences.len() + 1, last_line)?);
    }

    let treebank = Treebank::new(name, split, sentences)?;
    for w in &treebank.warnings {
        log::warn!("{name}/{split}: {w}");
    }
    Ok(treebank)
}

pub fn read_conllu(path: impl AsRef<Path>, name: &str, split: Split) -> Result<Treebank> {
    let text = fs::read_to_string(path)?;
    parse_conllu(&text, name, split)
}

/// Serialise a treebank, optionally replacing the UPOS column.
pub fn write_conllu(treebank: &Treebank, overrides: Option<&[Vec<TagSymbol>]>) -> Result<String> {
    if let Some(ov) = overrides {
        check_alignment(treebank, ov)?;
    }
    let mut out = String::new();
    for (s_idx, sentence) in treebank.sentences.iter().enumerate() {
        for c in &sentence.comments {
            out.push_str(c);
            out.push('\n');
        }
        let mut extra = sentence.extra.iter().peekable();
        for (t_idx, tok) in sentence.tokens.iter().enumerate() {
            while let Some(e) = extra.next_if(|e| e.position == t_idx) {
                out.push_str(&e.line);
                out.push('\n');
            }
            let upos = match overrides {
                Some(ov) => ov[s_idx][t_idx].as_str(),
                None => tok.upos.as_str(),
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                tok.index,
                tok.form,
                tok.lemma,
                upos,
                tok.xpos,
                tok.feats,
                tok.head,
                tok.deprel,
                tok.deps,
                tok.misc
            )
            .expect("writing to a String cannot fail");
        }
        for e in extra {
            out.push_str(&e.line);
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

/// Check that per-token annotations line up with the treebank.
pub fn check_alignment<T>(treebank: &Treebank, per_token: &[Vec<T>]) -> Result<()> {
    if per_token.len() != treebank.sentences.len() {
        return Err(Error::LengthMismatch {
            expected: treebank.sentences.len(),
            actual: per_token.len(),
        });
    }
    for (s, o) in treebank.sentences.iter().zip(per_token) {
        if s.len() != o.len() {
            return Err(Error::LengthMismatch {
                expected: s.len(),
                actual: o.len(),
            });
        }
    }
    Ok(())
}

/// Read only the UPOS column of a CoNLL-U file, accepting the mask literal.
pub fn read_tag_column(text: &str) -> Result<Vec<Vec<TagSymbol>>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(parse_err(i + 1, "expected 10 tab-separated columns"));
        }
        if fields[0].contains('-') || fields[0].contains('.') {
            continue;
        }
        current.push(
            fields[3]
                .parse()
                .map_err(|_| parse_err(i + 1, format!("unknown tag `{}`", fields[3])))?,
        );
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}
