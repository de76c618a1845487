//! PDF side of document scanning: a sequential object parser, a content
//! stream tokenizer for the text-showing operators, and a structural lint.
//!
//! Scope: uncompressed documents of the kind this crate emits, plus a
//! tolerant read of similar hand-built files. Filtered streams are not
//! decoded; a filtered font program is reported as an unsupported
//! container rather than guessed at.

use std::collections::BTreeMap;

use super::{Extraction, FontSource, FontSlot, RawSpan, ScanError};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Obj {
    Null,
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(Vec<u8>),
    Name(String),
    Array(Vec<Obj>),
    Dict(BTreeMap<String, Obj>),
    Ref(u32),
}

impl Obj {
    fn as_dict(&self) -> Option<&BTreeMap<String, Obj>> {
        match self {
            Obj::Dict(d) => Some(d),
            _ => None,
        }
    }

    fn as_name(&self) -> Option<&str> {
        match self {
            Obj::Name(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Debug)]
pub(crate) struct Document {
    objects: BTreeMap<u32, (Obj, Option<Stream>)>,
    trailer: BTreeMap<String, Obj>,
}

#[derive(Debug)]
struct Stream {
    data: Vec<u8>,
    filtered: bool,
}

impl Document {
    fn resolve<'a>(&'a self, obj: &'a Obj) -> &'a Obj {
        let mut current = obj;
        for _ in 0..32 {
            match current {
                Obj::Ref(id) => match self.objects.get(id) {
                    Some((o, _)) => current = o,
                    None => return &Obj::Null,
                },
                other => return other,
            }
        }
        &Obj::Null
    }

    fn stream_of(&self, obj: &Obj) -> Option<&Stream> {
        match obj {
            Obj::Ref(id) => self.objects.get(id).and_then(|(_, s)| s.as_ref()),
            _ => None,
        }
    }
}

pub(crate) fn extract_pdf(input: &[u8]) -> Result<Extraction, ScanError> {
    let doc = parse_document(input)?;

    // Pages in tree order; fall back to object order if the tree is absent.
    let pages = collect_pages(&doc);
    if pages.is_empty() {
        return Err(ScanError::MalformedDocument("document has no pages".into()));
    }

    let mut fonts: BTreeMap<String, FontSlot> = BTreeMap::new();
    let mut spans: Vec<RawSpan> = Vec::new();

    for page in &pages {
        let resources = doc.resolve(page.get("Resources").unwrap_or(&Obj::Null));
        let font_dict = resources
            .as_dict()
            .and_then(|r| r.get("Font"))
            .map(|f| doc.resolve(f))
            .and_then(|f| f.as_dict())
            .cloned()
            .unwrap_or_default();

        // Resource name -> scope key for embedded TrueType fonts.
        let mut scope_of: BTreeMap<String, String> = BTreeMap::new();
        for (res_name, font_ref) in &font_dict {
            let font_obj = doc.resolve(font_ref);
            let Some(font) = font_obj.as_dict() else { continue };
            let subtype = font.get("Subtype").and_then(|s| s.as_name()).unwrap_or("");
            if subtype != "TrueType" && subtype != "Type0" {
                continue;
            }
            let base = font
                .get("BaseFont")
                .and_then(|b| b.as_name())
                .unwrap_or("Unnamed")
                .to_string();
            let descriptor = font
                .get("FontDescriptor")
                .map(|d| doc.resolve(d))
                .and_then(|d| d.as_dict());
            let Some(descriptor) = descriptor else { continue };
            let Some(file_ref) = descriptor.get("FontFile2") else { continue };
            let key = format!("{base}/{res_name}");
            if !fonts.contains_key(&key) {
                let slot = match doc.stream_of(file_ref) {
                    Some(stream) if !stream.filtered => FontSlot {
                        source: FontSource::Embedded,
                        bytes: Some(stream.data.clone()),
                    },
                    Some(_) => FontSlot { source: FontSource::Embedded, bytes: None },
                    None => FontSlot { source: FontSource::Embedded, bytes: None },
                };
                fonts.insert(key.clone(), slot);
            }
            scope_of.insert(res_name.clone(), key);
        }

        // Concatenate the page's content streams.
        let mut content = Vec::new();
        match page.get("Contents") {
            Some(Obj::Ref(id)) => {
                if let Some((_, Some(stream))) = doc.objects.get(id) {
                    if stream.filtered {
                        return Err(ScanError::MalformedDocument(
                            "filtered content streams are not supported".into(),
                        ));
                    }
                    content.extend_from_slice(&stream.data);
                }
            }
            Some(Obj::Array(refs)) => {
                for r in refs {
                    if let Some(stream) = doc.stream_of(r) {
                        if stream.filtered {
                            return Err(ScanError::MalformedDocument(
                                "filtered content streams are not supported".into(),
                            ));
                        }
                        content.extend_from_slice(&stream.data);
                        content.push(b'\n');
                    }
                }
            }
            _ => {}
        }

        extract_text_spans(&content, &scope_of, &mut spans);
    }

    Ok(Extraction { spans, fonts })
}

fn collect_pages(doc: &Document) -> Vec<BTreeMap<String, Obj>> {
    let mut pages = Vec::new();
    let root = doc
        .trailer
        .get("Root")
        .map(|r| doc.resolve(r))
        .and_then(|r| r.as_dict())
        .and_then(|c| c.get("Pages"))
        .cloned();
    if let Some(pages_ref) = root {
        walk_pages(doc, &pages_ref, &mut pages, 0, None);
    }
    if pages.is_empty() {
        for (obj, _) in doc.objects.values() {
            if let Some(dict) = obj.as_dict() {
                if dict.get("Type").and_then(|t| t.as_name()) == Some("Page") {
                    pages.push(dict.clone());
                }
            }
        }
    }
    pages
}

fn walk_pages(
    doc: &Document,
    node_ref: &Obj,
    pages: &mut Vec<BTreeMap<String, Obj>>,
    depth: usize,
    inherited_resources: Option<&Obj>,
) {
    if depth > 32 {
        return;
    }
    let node = doc.resolve(node_ref);
    let Some(dict) = node.as_dict() else { return };
    let resources = dict.get("Resources").or(inherited_resources);
    match dict.get("Type").and_then(|t| t.as_name()) {
        Some("Pages") => {
            if let Some(Obj::Array(kids)) = dict.get("Kids").map(|k| doc.resolve(k)) {
                let kids = kids.clone();
                for kid in &kids {
                    walk_pages(doc, kid, pages, depth + 1, resources);
                }
            }
        }
        Some("Page") => {
            let mut page = dict.clone();
            if !page.contains_key("Resources") {
                if let Some(resources) = resources {
                    page.insert("Resources".to_string(), resources.clone());
                }
            }
            pages.push(page);
        }
        _ => {}
    }
}

/// Runs the content stream, tracking Tf font selection and collecting the
/// string operands of Tj / ' / " / TJ in order.
fn extract_text_spans(
    content: &[u8],
    scope_of: &BTreeMap<String, String>,
    spans: &mut Vec<RawSpan>,
) {
    let mut lexer = Lexer::new(content);
    let mut operands: Vec<Obj> = Vec::new();
    let mut current_font: Option<String> = None;

    let emit = |bytes: &[u8], font: &Option<String>, spans: &mut Vec<RawSpan>| {
        let text: String = bytes.iter().map(|&b| b as char).collect();
        let scope = font.as_ref().and_then(|f| scope_of.get(f)).cloned();
        match spans.last_mut() {
            Some(last) if last.font == scope => last.text.push_str(&text),
            _ => spans.push(RawSpan { text, font: scope }),
        }
    };

    while let Some(token) = lexer.next_token() {
        match token {
            Token::Operand(obj) => operands.push(obj),
            Token::Operator(op) => {
                match op.as_str() {
                    "Tf" => {
                        if operands.len() >= 2 {
                            if let Obj::Name(name) = &operands[operands.len() - 2] {
                                current_font = Some(name.clone());
                            }
                        }
                    }
                    "Tj" | "'" => {
                        if let Some(Obj::Str(s)) = operands.last() {
                            emit(s, &current_font, spans);
                        }
                    }
                    "\"" => {
                        if let Some(Obj::Str(s)) = operands.last() {
                            emit(s, &current_font, spans);
                        }
                    }
                    "TJ" => {
                        if let Some(Obj::Array(items)) = operands.last() {
                            for item in items {
                                if let Obj::Str(s) = item {
                                    emit(s, &current_font, spans);
                                }
                            }
                        }
                    }
                    _ => {}
                }
                operands.clear();
            }
        }
    }
}

enum Token {
    Operand(Obj),
    Operator(String),
}

struct Lexer<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Lexer<'a> {
    fn new(data: &'a [u8]) -> Self {
        Lexer { data, at: 0 }
    }

    fn skip_ws(&mut self) {
        while self.at < self.data.len() {
            match self.data[self.at] {
                b' ' | b'\t' | b'\r' | b'\n' | b'\x0c' | b'\0' => self.at += 1,
                b'%' => {
                    while self.at < self.data.len()
                        && self.data[self.at] != b'\n'
                        && self.data[self.at] != b'\r'
                    {
                        self.at += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn next_token(&mut self) -> Option<Token> {
        self.skip_ws();
        if self.at >= self.data.len() {
            return None;
        }
        let obj = self.parse_value()?;
        Some(obj)
    }

    fn parse_value(&mut self) -> Option<Token> {
        self.skip_ws();
        let b = *self.data.get(self.at)?;
        match b {
            b'(' | b'<' | b'/' | b'[' | b'0'..=b'9' | b'+' | b'-' | b'.' => {
                self.parse_object_value().map(Token::Operand)
            }
            _ => {
                let start = self.at;
                while self.at < self.data.len() && is_regular(self.data[self.at]) {
                    self.at += 1;
                }
                if self.at == start {
                    // Lone delimiter (e.g. stray ')' or '>'): skip it.
                    self.at += 1;
                    return self.parse_value();
                }
                let word: String =
                    self.data[start..self.at].iter().map(|&b| b as char).collect();
                match word.as_str() {
                    "true" => Some(Token::Operand(Obj::Bool(true))),
                    "false" => Some(Token::Operand(Obj::Bool(false))),
                    "null" => Some(Token::Operand(Obj::Null)),
                    _ => Some(Token::Operator(word)),
                }
            }
        }
    }

    /// Parses a single object value (dict values, array items, object
    /// bodies). Integers followed by an integer and `R` collapse into a
    /// reference.
    fn parse_object_value(&mut self) -> Option<Obj> {
        self.skip_ws();
        let b = *self.data.get(self.at)?;
        match b {
            b'(' => self.parse_literal_string().map(Obj::Str),
            b'<' => {
                if self.data.get(self.at + 1) == Some(&b'<') {
                    self.parse_dict()
                } else {
                    self.parse_hex_string().map(Obj::Str)
                }
            }
            b'/' => self.parse_name().map(Obj::Name),
            b'[' => {
                self.at += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.data.get(self.at) {
                        Some(b']') => {
                            self.at += 1;
                            return Some(Obj::Array(items));
                        }
                        Some(_) => items.push(self.parse_object_value()?),
                        None => return None,
                    }
                }
            }
            b'0'..=b'9' | b'+' | b'-' | b'.' => {
                let number = self.parse_number()?;
                if let Obj::Int(id) = number {
                    if id >= 0 {
                        if let Some(r) = self.try_parse_ref(id as u32) {
                            return Some(r);
                        }
                    }
                }
                Some(number)
            }
            _ => {
                let start = self.at;
                while self.at < self.data.len() && is_regular(self.data[self.at]) {
                    self.at += 1;
                }
                if self.at == start {
                    return None;
                }
                match &self.data[start..self.at] {
                    b"true" => Some(Obj::Bool(true)),
                    b"false" => Some(Obj::Bool(false)),
                    b"null" => Some(Obj::Null),
                    _ => None,
                }
            }
        }
    }

    /// After an integer: consumes ` <gen> R` if present.
    fn try_parse_ref(&mut self, id: u32) -> Option<Obj> {
        let save = self.at;
        self.skip_ws();
        let gen_start = self.at;
        while self.at < self.data.len() && self.data[self.at].is_ascii_digit() {
            self.at += 1;
        }
        if self.at == gen_start {
            self.at = save;
            return None;
        }
        self.skip_ws();
        let is_ref = self.data.get(self.at) == Some(&b'R')
            && self.data.get(self.at + 1).is_none_or(|&b| !is_regular(b));
        if is_ref {
            self.at += 1;
            Some(Obj::Ref(id))
        } else {
            self.at = save;
            None
        }
    }

    /// Parses `<< /Key value ... >>`.
    fn parse_dict(&mut self) -> Option<Obj> {
        debug_assert!(self.data[self.at..].starts_with(b"<<"));
        self.at += 2;
        let mut map = BTreeMap::new();
        loop {
            self.skip_ws();
            if self.data[self.at..].starts_with(b">>") {
                self.at += 2;
                return Some(Obj::Dict(map));
            }
            if self.data.get(self.at) != Some(&b'/') {
                return None;
            }
            let key = self.parse_name()?;
            let value = self.parse_object_value()?;
            map.insert(key, value);
        }
    }

    fn parse_literal_string(&mut self) -> Option<Vec<u8>> {
        debug_assert_eq!(self.data[self.at], b'(');
        self.at += 1;
        let mut out = Vec::new();
        let mut depth = 1usize;
        while self.at < self.data.len() {
            let b = self.data[self.at];
            self.at += 1;
            match b {
                b'\\' => {
                    let e = *self.data.get(self.at)?;
                    self.at += 1;
                    match e {
                        b'n' => out.push(b'\n'),
                        b'r' => out.push(b'\r'),
                        b't' => out.push(b'\t'),
                        b'b' => out.push(0x08),
                        b'f' => out.push(0x0c),
                        b'(' | b')' | b'\\' => out.push(e),
                        b'\r' => {
                            // Line continuation; swallow a following \n too.
                            if self.data.get(self.at) == Some(&b'\n') {
                                self.at += 1;
                            }
                        }
                        b'\n' => {}
                        b'0'..=b'7' => {
                            let mut value = (e - b'0') as u32;
                            for _ in 0..2 {
                                match self.data.get(self.at) {
                                    Some(&d @ b'0'..=b'7') => {
                                        value = value * 8 + (d - b'0') as u32;
                                        self.at += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push(value as u8);
                        }
                        other => out.push(other),
                    }
                }
                b'(' => {
                    depth += 1;
                    out.push(b);
                }
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(out);
                    }
                    out.push(b);
                }
                _ => out.push(b),
            }
        }
        None
    }

    fn parse_hex_string(&mut self) -> Option<Vec<u8>> {
        debug_assert_eq!(self.data[self.at], b'<');
        self.at += 1;
        let mut digits = Vec::new();
        while self.at < self.data.len() {
            let b = self.data[self.at];
            self.at += 1;
            match b {
                b'>' => {
                    if digits.len() % 2 == 1 {
                        digits.push(b'0');
                    }
                    return Some(
                        digits
                            .chunks(2)
                            .map(|pair| {
                                let hi = (pair[0] as char).to_digit(16).unwrap_or(0);
                                let lo = (pair[1] as char).to_digit(16).unwrap_or(0);
                                (hi * 16 + lo) as u8
                            })
                            .collect(),
                    );
                }
                b if b.is_ascii_hexdigit() => digits.push(b),
                _ => {}
            }
        }
        None
    }

    fn parse_name(&mut self) -> Option<String> {
        debug_assert_eq!(self.data[self.at], b'/');
        self.at += 1;
        let mut out = String::new();
        while self.at < self.data.len() && is_regular(self.data[self.at]) {
            let b = self.data[self.at];
            self.at += 1;
            if b == b'#' {
                let hi = self.data.get(self.at).copied();
                let lo = self.data.get(self.at + 1).copied();
                if let (Some(hi), Some(lo)) = (hi, lo) {
                    let hex = [hi, lo];
                    if let Ok(v) =
                        u8::from_str_radix(std::str::from_utf8(&hex).unwrap_or("00"), 16)
                    {
                        out.push(v as char);
                        self.at += 2;
                        continue;
                    }
                }
                out.push('#');
            } else {
                out.push(b as char);
            }
        }
        Some(out)
    }

    fn parse_number(&mut self) -> Option<Obj> {
        let start = self.at;
        let mut is_real = false;
        while self.at < self.data.len() {
            match self.data[self.at] {
                b'0'..=b'9' | b'+' | b'-' => self.at += 1,
                b'.' => {
                    is_real = true;
                    self.at += 1;
                }
                _ => break,
            }
        }
        let text = std::str::from_utf8(&self.data[start..self.at]).ok()?;
        if is_real {
            text.parse::<f64>().ok().map(Obj::Real)
        } else {
            text.parse::<i64>().ok().map(Obj::Int)
        }
    }
}

fn is_regular(b: u8) -> bool {
    !matches!(
        b,
        b' ' | b'\t' | b'\r' | b'\n' | b'\x0c' | b'\0' | b'(' | b')' | b'<' | b'>' | b'[' | b']'
            | b'{' | b'}' | b'/' | b'%'
    )
}

/// Sequential whole-file parse. Streams are skipped over by their /Length
/// when it is a direct integer, else by searching for `endstream`, so
/// binary stream content never confuses the object scan.
fn parse_document(input: &[u8]) -> Result<Document, ScanError> {
    if !input.starts_with(b"%PDF-") {
        return Err(ScanError::MalformedDocument("missing %PDF header".into()));
    }
    let mut lexer = Lexer::new(input);
    let mut objects: BTreeMap<u32, (Obj, Option<Stream>)> = BTreeMap::new();
    let mut trailer: BTreeMap<String, Obj> = BTreeMap::new();
    let mut pending: Vec<Obj> = Vec::new();

    while let Some(token) = lexer.next_token() {
        match token {
            Token::Operand(obj) => pending.push(obj),
            Token::Operator(op) => match op.as_str() {
                "obj" => {
                    // pending: [.., Int(id), Int(gen)]
                    let id = match pending.get(pending.len().wrapping_sub(2)) {
                        Some(Obj::Int(id)) => *id as u32,
                        _ => {
                            pending.clear();
                            continue;
                        }
                    };
                    pending.clear();
                    let Some(value) = lexer.parse_object_value() else {
                        return Err(ScanError::MalformedDocument(format!(
                            "object {id} has no body"
                        )));
                    };
                    // Optional stream.
                    lexer.skip_ws();
                    let mut stream = None;
                    if input[lexer.at..].starts_with(b"stream") {
                        lexer.at += "stream".len();
                        if input.get(lexer.at) == Some(&b'\r') {
                            lexer.at += 1;
                        }
                        if input.get(lexer.at) == Some(&b'\n') {
                            lexer.at += 1;
                        }
                        let dict = value.as_dict().cloned().unwrap_or_default();
                        let length = dict.get("Length").and_then(|l| match l {
                            Obj::Int(v) => Some(*v as usize),
                            _ => None, // indirect length: fall back to search
                        });
                        let data_start = lexer.at;
                        let data_end = match length {
                            Some(len) if data_start + len <= input.len() => data_start + len,
                            _ => find_endstream(input, data_start).ok_or_else(|| {
                                ScanError::MalformedDocument(format!(
                                    "object {id}: unterminated stream"
                                ))
                            })?,
                        };
                        let filtered = dict.contains_key("Filter");
                        stream = Some(Stream {
                            data: input[data_start..data_end].to_vec(),
                            filtered,
                        });
                        // Position after the stream data; consume endstream.
                        lexer.at = data_end;
                        lexer.skip_ws();
                        if input[lexer.at..].starts_with(b"endstream") {
                            lexer.at += "endstream".len();
                        }
                    }
                    objects.insert(id, (value, stream));
                }
                "endobj" => pending.clear(),
                "xref" => {
                    // Skip the cross-reference table textually.
                    let rest = &input[lexer.at..];
                    let end = find_subslice(rest, b"trailer")
                        .or_else(|| find_subslice(rest, b"startxref"))
                        .unwrap_or(rest.len());
                    lexer.at += end;
                    pending.clear();
                }
                "trailer" => {
                    if let Some(Obj::Dict(dict)) = lexer.parse_object_value() {
                        trailer.extend(dict);
                    }
                    pending.clear();
                }
                "startxref" => {
                    lexer.next_token(); // the xref offset
                    pending.clear();
                }
                _ => pending.clear(),
            },
        }
    }
    if objects.is_empty() {
        return Err(ScanError::MalformedDocument("no objects found".into()));
    }
    Ok(Document { objects, trailer })
}

fn find_endstream(input: &[u8], from: usize) -> Option<usize> {
    let at = find_subslice(&input[from..], b"endstream")? + from;
    // Trim the EOL that precedes the keyword.
    let mut end = at;
    if end > from && input[end - 1] == b'\n' {
        end -= 1;
    }
    if end > from && input[end - 1] == b'\r' {
        end -= 1;
    }
    Some(end)
}

fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Structural lint: header, xref offsets, stream lengths, trailer.
/// Returns the list of problems found (empty = passes).
pub fn lint_pdf(input: &[u8]) -> Vec<String> {
    let mut problems = Vec::new();
    if !input.starts_with(b"%PDF-1.") {
        problems.push("missing or unexpected %PDF header".to_string());
    }
    let tail = String::from_utf8_lossy(&input[input.len().saturating_sub(256)..]).to_string();
    if !tail.contains("%%EOF") {
        problems.push("missing %%EOF marker".to_string());
    }
    let Some(sx) = tail.rfind("startxref") else {
        problems.push("missing startxref".to_string());
        return problems;
    };
    let offset: usize = match tail[sx..].lines().nth(1).map(str::trim).map(str::parse) {
        Some(Ok(v)) => v,
        _ => {
            problems.push("unreadable startxref offset".to_string());
            return problems;
        }
    };
    if offset >= input.len() || !input[offset..].starts_with(b"xref") {
        problems.push(format!("startxref {offset} does not point at an xref table"));
        return problems;
    }
    let xref_text = String::from_utf8_lossy(&input[offset..]);
    let mut lines = xref_text.lines();
    lines.next(); // "xref"
    let Some(range) = lines.next() else {
        problems.push("empty xref".to_string());
        return problems;
    };
    let mut parts = range.split_whitespace();
    let first: usize = parts.next().and_then(|v| v.parse().ok()).unwrap_or(0);
    let count: usize = parts.next().and_then(|v| v.parse().ok()).unwrap_or(0);
    for i in 0..count {
        let Some(entry) = lines.next() else {
            problems.push("xref table shorter than declared".to_string());
            break;
        };
        let id = first + i;
        let mut fields = entry.split_whitespace();
        let (Some(off), Some(_gen), Some(kind)) = (fields.next(), fields.next(), fields.next())
        else {
            problems.push(format!("xref entry {id} malformed"));
            continue;
        };
        if kind != "n" {
            continue;
        }
        let Ok(at) = off.parse::<usize>() else {
            problems.push(format!("xref entry {id} has a bad offset"));
            continue;
        };
        let expected = format!("{id} 0 obj");
        if at >= input.len()
            || !String::from_utf8_lossy(&input[at..(at + expected.len()).min(input.len())])
                .starts_with(&expected)
        {
            problems.push(format!("xref offset for object {id} does not match"));
        }
    }

    // Stream length exactness for direct /Length values.
    let mut search_from = 0usize;
    while let Some(rel) = find_subslice(&input[search_from..], b"stream") {
        let key_at = search_from + rel;
        search_from = key_at + 6;
        // Skip occurrences inside words like "endstream".
        if key_at > 0 && is_regular(input[key_at - 1]) {
            continue;
        }
        let mut data_start = key_at + 6;
        if input.get(data_start) == Some(&b'\r') {
            data_start += 1;
        }
        if input.get(data_start) != Some(&b'\n') {
            continue; // not actually a stream keyword
        }
        data_start += 1;
        // Find the /Length in the dict right before this keyword, taking
        // care not to read /Length1 (and friends) instead.
        let window_start = key_at.saturating_sub(512);
        let dict_text = String::from_utf8_lossy(&input[window_start..key_at]);
        let mut declared: Option<usize> = None;
        let mut search = 0usize;
        while let Some(rel) = dict_text[search..].find("/Length") {
            let after = search + rel + "/Length".len();
            search = after;
            if dict_text[after..].chars().next().is_some_and(|c| c.is_ascii_alphanumeric()) {
                continue;
            }
            declared = dict_text[after..]
                .trim_start()
                .split(|c: char| !c.is_ascii_digit())
                .next()
                .and_then(|v| v.parse().ok());
        }
        let Some(declared) = declared else { continue };
        let Some(end) = find_endstream(input, data_start) else {
            problems.push("stream without endstream".to_string());
            continue;
        };
        if end - data_start != declared {
            problems.push(format!(
                "stream at {key_at}: /Length {declared} but actual {}",
                end - data_start
            ));
        }
        search_from = end;
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docgen::{build_pdf, DocFormat, InjectionSpec, PayloadMode, Placement};
    use crate::synth::reference_font;

    fn sample_carrier() -> crate::docgen::CarrierDocument {
        let spec = InjectionSpec::new(
            "hidden payload text",
            PayloadMode::Invisible,
            Placement::Middle,
            2,
            DocFormat::Pdf,
        )
        .unwrap();
        build_pdf(
            "cover paragraph alpha\n\ncover paragraph beta",
            &spec,
            &reference_font(),
        )
        .unwrap()
    }

    #[test]
    fn generated_pdf_extracts_machine_text_exactly() {
        let doc = sample_carrier();
        let extraction = extract_pdf(&doc.bytes).unwrap();
        let text: String = extraction.spans.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(text, doc.machine_text);
    }

    #[test]
    fn payload_spans_carry_the_embedded_font_scope() {
        let doc = sample_carrier();
        let extraction = extract_pdf(&doc.bytes).unwrap();
        assert_eq!(extraction.fonts.len(), 1);
        let key = extraction.fonts.keys().next().unwrap();
        let payload_spans: Vec<&RawSpan> =
            extraction.spans.iter().filter(|s| s.font.as_ref() == Some(key)).collect();
        assert_eq!(payload_spans.len(), 2);
        for span in payload_spans {
            assert_eq!(span.text, "hidden payload text");
        }
        let slot = &extraction.fonts[key];
        let font = crate::font::FontFile::parse(slot.bytes.as_ref().unwrap()).unwrap();
        assert!(font.num_glyphs() > 0);
    }

    #[test]
    fn generated_pdf_passes_lint() {
        let doc = sample_carrier();
        assert_eq!(lint_pdf(&doc.bytes), Vec::<String>::new());
    }

    #[test]
    fn corrupted_xref_offset_fails_lint() {
        let doc = sample_carrier();
        let mut bytes = doc.bytes.clone();
        // Break the first in-use xref entry (right after the free entry).
        let free_entry = b"0000000000 65535 f \n";
        let at = find_subslice(&bytes, free_entry).unwrap() + free_entry.len();
        bytes[at..at + 10].copy_from_slice(b"0000000099");
        let problems = lint_pdf(&bytes);
        assert!(problems.iter().any(|p| p.contains("does not match")), "{problems:?}");
    }

    #[test]
    fn wrong_stream_length_fails_lint() {
        let doc = sample_carrier();
        let mut bytes = doc.bytes.clone();
        // Understate the content stream's declared length by one: find the
        // dict right before the text-operator stream and shrink its count.
        let marker = b"stream\nBT\n";
        let stream_at = find_subslice(&bytes, marker).unwrap();
        let window = String::from_utf8_lossy(&bytes[stream_at.saturating_sub(64)..stream_at])
            .into_owned();
        let digits_at = window.rfind("/Length ").unwrap() + "/Length ".len();
        let digits: String =
            window[digits_at..].chars().take_while(|c| c.is_ascii_digit()).collect();
        let at = stream_at - (window.len() - digits_at);
        bytes[at] = if bytes[at] == b'9' { b'8' } else { bytes[at] + 1 };
        let _ = digits;
        let problems = lint_pdf(&bytes);
        assert!(problems.iter().any(|p| p.contains("but actual")), "{problems:?}");
    }

    #[test]
    fn literal_string_escapes_decode() {
        let content = b"BT (a\\(b\\)c\\\\d\\ne) Tj ET";
        let mut spans = Vec::new();
        extract_text_spans(content, &BTreeMap::new(), &mut spans);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].text, "a(b)c\\d\ne");
    }

    #[test]
    fn tj_array_strings_concatenate() {
        let content = b"BT [(ab) -120 (cd)] TJ ET";
        let mut spans = Vec::new();
        extract_text_spans(content, &BTreeMap::new(), &mut spans);
        let text: String = spans.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(text, "abcd");
    }

    #[test]
    fn hex_strings_decode() {
        let content = b"BT <48656C6C6F> Tj ET";
        let mut spans = Vec::new();
        extract_text_spans(content, &BTreeMap::new(), &mut spans);
        assert_eq!(spans[0].text, "Hello");
    }

    #[test]
    fn non_pdf_is_malformed() {
        assert!(matches!(
            extract_pdf(b"plain text"),
            Err(ScanError::MalformedDocument(_))
        ));
    }
}
