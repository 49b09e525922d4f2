//! Query rendering: `"<passage> what does <source> <relation> at <h>-hop?"`.
//!
//! The passage prefix and the hop clause are dropped under the paragraph and
//! hop ablations. Whitespace inside passage and source text is collapsed to
//! single spaces, so parsing a rendered query gives back normalized inputs.

use std::fmt;

use thiserror::Error;

use crate::derivation::Passage;
use crate::graph::{Hop, RelationKind};

const FRAME: &str = "what does ";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("source event text is empty")]
    EmptySource,
    #[error("malformed query: {0}")]
    MalformedQuery(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueryString(String);

impl QueryString {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for QueryString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for QueryString {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedQuery {
    pub passage: Option<String>,
    pub source: String,
    pub relation: RelationKind,
    pub hop: Option<Hop>,
}

pub(crate) fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn render_query(
    passage: Option<&Passage>,
    source: &str,
    relation: RelationKind,
    hop: Option<Hop>,
) -> Result<QueryString, TemplateError> {
    render_query_text(passage.map(|p| p.text()).as_deref(), source, relation, hop)
}

/// Same as [`render_query`] but takes the passage as already-joined text.
pub fn render_query_text(
    passage: Option<&str>,
    source: &str,
    relation: RelationKind,
    hop: Option<Hop>,
) -> Result<QueryString, TemplateError> {
    let source = collapse_whitespace(source);
    if source.is_empty() {
        return Err(TemplateError::EmptySource);
    }
    let mut out = String::new();
    if let Some(text) = passage.map(collapse_whitespace).filter(|t| !t.is_empty()) {
        out.push_str(&text);
        out.push(' ');
    }
    out.push_str(FRAME);
    out.push_str(&source);
    out.push(' ');
    out.push_str(relation.surface());
    if let Some(h) = hop {
        out.push_str(&format!(" at {h}-hop"));
    }
    out.push('?');
    Ok(QueryString(out))
}

pub fn parse_query(q: &str) -> Result<ParsedQuery, TemplateError> {
    let malformed = |why: &str| TemplateError::MalformedQuery(why.to_string());

    let frames: Vec<usize> = q
        .match_indices(FRAME)
        .map(|(i, _)| i)
        .filter(|&i| i == 0 || q.as_bytes()[i - 1] == b' ')
        .collect();
    let start = match frames.as_slice() {
        [] => return Err(malformed("missing `what does` frame")),
        [i] => *i,
        _ => return Err(malformed("ambiguous: `what does` occurs more than once")),
    };
    let passage = match q[..start].trim_end() {
        "" => None,
        text => Some(text.to_string()),
    };
    let body = q[start + FRAME.len()..]
        .strip_suffix('?')
        .ok_or_else(|| malformed("missing terminal `?`"))?;

    let (body, hop) = split_hop(body)?;

    // Longest surface forms first so "is hurt by" is not read as "... hurt by".
    let mut relations = RelationKind::ALL;
    relations.sort_by_key(|r| std::cmp::Reverse(r.surface().len()));
    let (source, relation) = relations
        .iter()
        .find_map(|r| {
            body.strip_suffix(r.surface())
                .and_then(|rest| rest.strip_suffix(' '))
                .map(|rest| (rest, *r))
        })
        .ok_or_else(|| malformed("unrecognized relation"))?;
    if source.trim().is_empty() {
        return Err(malformed("empty source event"));
    }
    Ok(ParsedQuery {
        passage,
        source: source.to_string(),
        relation,
        hop,
    })
}

fn split_hop(body: &str) -> Result<(&str, Option<Hop>), TemplateError> {
    let Some(rest) = body.strip_suffix("-hop") else {
        return Ok((body, None));
    };
    let Some(at) = rest.rfind(" at ") else {
        return Ok((body, None));
    };
    let digits = &rest[at + 4..];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Ok((body, None));
    }
    let hop = digits
        .parse::<u32>()
        .ok()
        .and_then(|n| Hop::new(n).ok())
        .ok_or_else(|| TemplateError::MalformedQuery(format!("invalid hop `{digits}`")))?;
    Ok((&rest[..at], Some(hop)))
}
