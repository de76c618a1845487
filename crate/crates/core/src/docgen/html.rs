//! HTML carrier emission.
//!
//! The document body is emitted with no incidental whitespace: the only
//! text nodes are cover paragraphs, payload paragraphs and the literal
//! `\n\n` separators between them, so a text-node walk reproduces the
//! machine text exactly. The forged font arrives through an @font-face
//! rule (inline data URI by default) and applies only to payload spans.

use base64::Engine;

use super::{
    assemble, CarrierDocument, DocError, DocOptions, FontDelivery, InjectionSpec,
};
use crate::font::FontFile;

pub fn build_html_with(
    cover: &str,
    spec: &InjectionSpec,
    base_font: &FontFile,
    options: &DocOptions,
) -> Result<CarrierDocument, DocError> {
    let parts = assemble(cover, spec, base_font, options)?;

    let src = match &options.delivery {
        FontDelivery::InlineDataUri => {
            let encoded = base64::engine::general_purpose::STANDARD.encode(&parts.font_bytes);
            format!("url(data:font/ttf;base64,{encoded}) format(\"truetype\")")
        }
        FontDelivery::FileRef(path) => format!("url(\"{path}\") format(\"truetype\")"),
        FontDelivery::RemoteUrl(url) => format!("url(\"{url}\") format(\"truetype\")"),
    };

    let family = &options.font_family;
    let mut body = String::new();
    for span in &parts.spans {
        if span.text == "\n\n" && !span.is_payload {
            body.push_str("\n\n");
        } else if span.is_payload {
            body.push_str("<p class=\"pf\">");
            body.push_str(&escape_html(&span.text));
            body.push_str("</p>");
        } else {
            body.push_str("<p>");
            body.push_str(&escape_html(&span.text));
            body.push_str("</p>");
        }
    }

    let html = format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <title>Document</title>\n<style>\n\
         @font-face {{ font-family: \"{family}\"; src: {src}; }}\n\
         body {{ font-family: serif; max-width: 42em; margin: 2em auto; }}\n\
         .pf {{ font-family: \"{family}\"; }}\n\
         </style>\n</head>\n<body>{body}</body>\n</html>\n"
    );

    Ok(CarrierDocument {
        bytes: html.into_bytes(),
        cover_text: cover.to_string(),
        spec: spec.clone(),
        font_bytes: parts.font_bytes,
        machine_text: parts.machine_text,
        rendered_text: parts.rendered_text,
        manifest: parts.manifest,
    })
}

pub(crate) fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}
