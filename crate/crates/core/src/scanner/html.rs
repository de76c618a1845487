//! HTML side of document scanning: a small tag tokenizer plus just enough
//! CSS to recover @font-face fonts and the elements they apply to.
//!
//! Extraction walks the text nodes of `<body>` in order (including
//! whitespace-only nodes, which carry the separators between paragraphs)
//! and tags each with the effective font-family, when that family is
//! declared by an @font-face rule.

use std::collections::BTreeMap;

use base64::Engine;

use super::{Extraction, FontSource, FontSlot, RawSpan, ScanError};

pub(crate) fn extract_html(input: &[u8]) -> Result<Extraction, ScanError> {
    let text = std::str::from_utf8(input)
        .map_err(|_| ScanError::MalformedDocument("document is not valid UTF-8".into()))?;
    let (events, css) = tokenize(text)?;
    let sheet = parse_css(&css);

    let mut fonts: BTreeMap<String, FontSlot> = BTreeMap::new();
    for (family, url) in &sheet.font_faces {
        fonts.insert(family.clone(), slot_for_source(url));
    }

    // Replay body events, tracking the effective family down the tree.
    let mut spans: Vec<RawSpan> = Vec::new();
    let mut stack: Vec<Option<String>> = vec![None];
    for event in &events {
        match event {
            Event::Open { classes, inline_family, self_closing } => {
                let inherited = stack.last().cloned().flatten();
                let family = inline_family
                    .clone()
                    .or_else(|| {
                        classes.iter().find_map(|c| sheet.class_families.get(c).cloned())
                    })
                    .or(inherited);
                if !self_closing {
                    stack.push(family);
                }
            }
            Event::Close => {
                if stack.len() > 1 {
                    stack.pop();
                }
            }
            Event::Text(text) => {
                let family = stack.last().cloned().flatten();
                let font = family.filter(|f| fonts.contains_key(f));
                match spans.last_mut() {
                    Some(last) if last.font == font => last.text.push_str(text),
                    _ => spans.push(RawSpan { text: text.clone(), font }),
                }
            }
        }
    }

    Ok(Extraction { spans, fonts })
}

fn slot_for_source(url: &str) -> FontSlot {
    if let Some(rest) = url.strip_prefix("data:") {
        let bytes = rest
            .split_once(',')
            .filter(|(meta, _)| meta.contains("base64"))
            .and_then(|(_, data)| {
                base64::engine::general_purpose::STANDARD.decode(data.trim()).ok()
            });
        FontSlot { source: FontSource::DataUri, bytes }
    } else if url.starts_with("http://") || url.starts_with("https://") || url.starts_with("//") {
        FontSlot { source: FontSource::Remote(url.to_string()), bytes: None }
    } else {
        FontSlot { source: FontSource::File(url.to_string()), bytes: None }
    }
}

#[derive(Debug)]
enum Event {
    Open { classes: Vec<String>, inline_family: Option<String>, self_closing: bool },
    Close,
    Text(String),
}

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param",
    "source", "track", "wbr",
];

/// One pass over the markup: collects body-content events and all <style>
/// text (wherever it appears).
fn tokenize(text: &str) -> Result<(Vec<Event>, String), ScanError> {
    let bytes = text.as_bytes();
    let mut at = 0usize;
    let mut events = Vec::new();
    let mut css = String::new();
    let mut in_body = false;
    let mut body_seen = false;

    while at < bytes.len() {
        if bytes[at] == b'<' {
            if text[at..].starts_with("<!--") {
                let end = text[at..].find("-->").map(|i| at + i + 3).unwrap_or(bytes.len());
                at = end;
                continue;
            }
            if text[at..].starts_with("<!") || text[at..].starts_with("<?") {
                at = text[at..].find('>').map(|i| at + i + 1).unwrap_or(bytes.len());
                continue;
            }
            let closing = text[at..].starts_with("</");
            let tag_start = at + if closing { 2 } else { 1 };
            let Some((name, attrs, self_closing, after)) = parse_tag(text, tag_start) else {
                // Stray '<' that opens no tag: treat as text.
                if in_body {
                    push_text(&mut events, "<");
                }
                at += 1;
                continue;
            };
            let name_lower = name.to_ascii_lowercase();
            at = after;
            if closing {
                match name_lower.as_str() {
                    "body" => in_body = false,
                    _ if in_body => events.push(Event::Close),
                    _ => {}
                }
                continue;
            }
            match name_lower.as_str() {
                "style" | "script" => {
                    // Raw text element: content runs to the matching close
                    // tag, uninterpreted.
                    let close = format!("</{name_lower}");
                    let rel = text[at..].to_ascii_lowercase().find(&close);
                    let content_end = rel.map(|i| at + i).unwrap_or(bytes.len());
                    if name_lower == "style" {
                        css.push_str(&text[at..content_end]);
                        css.push('\n');
                    }
                    at = text[content_end..]
                        .find('>')
                        .map(|i| content_end + i + 1)
                        .unwrap_or(bytes.len());
                }
                "body" => {
                    in_body = true;
                    body_seen = true;
                }
                _ => {
                    if in_body {
                        let classes = attrs
                            .get("class")
                            .map(|v| {
                                v.split_ascii_whitespace().map(|s| s.to_string()).collect()
                            })
                            .unwrap_or_default();
                        let inline_family =
                            attrs.get("style").and_then(|s| inline_font_family(s));
                        let self_closing =
                            self_closing || VOID_ELEMENTS.contains(&name_lower.as_str());
                        events.push(Event::Open { classes, inline_family, self_closing });
                    }
                }
            }
        } else {
            let end = text[at..].find('<').map(|i| at + i).unwrap_or(bytes.len());
            if in_body {
                push_text(&mut events, &text[at..end]);
            }
            at = end;
        }
    }
    if !body_seen {
        return Err(ScanError::MalformedDocument("no <body> element found".into()));
    }
    Ok((events, css))
}

fn push_text(events: &mut Vec<Event>, raw: &str) {
    let decoded = decode_entities(raw);
    if decoded.is_empty() {
        return;
    }
    if let Some(Event::Text(prev)) = events.last_mut() {
        prev.push_str(&decoded);
    } else {
        events.push(Event::Text(decoded));
    }
}

/// Parses a tag starting right after `<` (or `</`). Returns
/// `(name, attributes, self_closing, index_after_tag)`.
fn parse_tag(
    text: &str,
    start: usize,
) -> Option<(String, BTreeMap<String, String>, bool, usize)> {
    let bytes = text.as_bytes();
    let mut at = start;
    let name_start = at;
    while at < bytes.len() && (bytes[at].is_ascii_alphanumeric() || bytes[at] == b'-') {
        at += 1;
    }
    if at == name_start {
        return None;
    }
    let name = text[name_start..at].to_string();
    let mut attrs = BTreeMap::new();
    let mut self_closing = false;
    loop {
        while at < bytes.len() && bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        if at >= bytes.len() {
            return None;
        }
        match bytes[at] {
            b'>' => return Some((name, attrs, self_closing, at + 1)),
            b'/' => {
                self_closing = true;
                at += 1;
            }
            _ => {
                let key_start = at;
                while at < bytes.len()
                    && !bytes[at].is_ascii_whitespace()
                    && !matches!(bytes[at], b'=' | b'>' | b'/')
                {
                    at += 1;
                }
                let key = text[key_start..at].to_ascii_lowercase();
                while at < bytes.len() && bytes[at].is_ascii_whitespace() {
                    at += 1;
                }
                let mut value = String::new();
                if at < bytes.len() && bytes[at] == b'=' {
                    at += 1;
                    while at < bytes.len() && bytes[at].is_ascii_whitespace() {
                        at += 1;
                    }
                    if at < bytes.len() && (bytes[at] == b'"' || bytes[at] == b'\'') {
                        let quote = bytes[at];
                        at += 1;
                        let value_start = at;
                        while at < bytes.len() && bytes[at] != quote {
                            at += 1;
                        }
                        value = text[value_start..at].to_string();
                        at = (at + 1).min(bytes.len());
                    } else {
                        let value_start = at;
                        while at < bytes.len()
                            && !bytes[at].is_ascii_whitespace()
                            && bytes[at] != b'>'
                        {
                            at += 1;
                        }
                        value = text[value_start..at].to_string();
                    }
                }
                if !key.is_empty() {
                    attrs.insert(key, decode_entities(&value));
                }
            }
        }
    }
}

fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let semi = tail.find(';').filter(|&i| i <= 12);
        match semi {
            Some(end) => {
                let entity = &tail[1..end];
                let decoded = match entity {
                    "amp" => Some('&'),
                    "lt" => Some('<'),
                    "gt" => Some('>'),
                    "quot" => Some('"'),
                    "apos" => Some('\''),
                    "nbsp" => Some('\u{a0}'),
                    _ => entity
                        .strip_prefix("#x")
                        .or_else(|| entity.strip_prefix("#X"))
                        .and_then(|h| u32::from_str_radix(h, 16).ok())
                        .or_else(|| {
                            entity.strip_prefix('#').and_then(|d| d.parse::<u32>().ok())
                        })
                        .and_then(char::from_u32),
                };
                match decoded {
                    Some(c) => {
                        out.push(c);
                        rest = &tail[end + 1..];
                    }
                    None => {
                        out.push('&');
                        rest = &tail[1..];
                    }
                }
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Default)]
struct Stylesheet {
    /// family name -> src url
    font_faces: Vec<(String, String)>,
    /// class name -> family name
    class_families: BTreeMap<String, String>,
}

fn parse_css(css: &str) -> Stylesheet {
    let mut sheet = Stylesheet::default();
    let mut rest = css;
    while let Some(open) = rest.find('{') {
        let selector = rest[..open].trim().to_string();
        // Find the matching close brace (rules like @media nest).
        let mut depth = 1usize;
        let mut end = open + 1;
        let bytes = rest.as_bytes();
        while end < bytes.len() && depth > 0 {
            match bytes[end] {
                b'{' => depth += 1,
                b'}' => depth -= 1,
                _ => {}
            }
            end += 1;
        }
        let block = &rest[open + 1..end.saturating_sub(1).max(open + 1)];
        if selector.eq_ignore_ascii_case("@font-face") {
            let decls = parse_declarations(block);
            let family = decls.get("font-family").map(|v| strip_family(v));
            let url = decls.get("src").and_then(|v| first_url(v));
            if let (Some(family), Some(url)) = (family, url) {
                sheet.font_faces.push((family, url));
            }
        } else if !selector.starts_with('@') {
            let decls = parse_declarations(block);
            if let Some(family) = decls.get("font-family").map(|v| strip_family(v)) {
                for part in selector.split(',') {
                    let part = part.trim();
                    if let Some(class) = part.strip_prefix('.') {
                        if class.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
                        {
                            sheet.class_families.insert(class.to_string(), family.clone());
                        }
                    }
                }
            }
        }
        rest = &rest[end..];
    }
    sheet
}

/// Splits `name: value;` declarations; semicolons inside `url(...)` (data
/// URIs) do not terminate a declaration.
fn parse_declarations(block: &str) -> BTreeMap<String, String> {
    let mut decls = BTreeMap::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let push = |piece: &str, decls: &mut BTreeMap<String, String>| {
        if let Some((name, value)) = piece.split_once(':') {
            decls.insert(name.trim().to_ascii_lowercase(), value.trim().to_string());
        }
    };
    for (i, b) in block.bytes().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => depth = depth.saturating_sub(1),
            b';' if depth == 0 => {
                push(&block[start..i], &mut decls);
                start = i + 1;
            }
            _ => {}
        }
    }
    push(&block[start..], &mut decls);
    decls
}

fn strip_family(value: &str) -> String {
    let first = value.split(',').next().unwrap_or(value).trim();
    first.trim_matches(|c| c == '"' || c == '\'').to_string()
}

fn first_url(value: &str) -> Option<String> {
    let at = value.find("url(")?;
    let rest = &value[at + 4..];
    let end = rest.find(')')?;
    let inner = rest[..end].trim();
    Some(inner.trim_matches(|c| c == '"' || c == '\'').to_string())
}

/// Inline `style="font-family: X"` lookup.
fn inline_font_family(style: &str) -> Option<String> {
    parse_declarations(style).get("font-family").map(|v| strip_family(v))
}
