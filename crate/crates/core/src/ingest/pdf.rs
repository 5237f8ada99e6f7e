use std::collections::BTreeMap;

use lopdf::content::Content;
use lopdf::{Document, Encoding, Object};

use super::IngestError;

/// Upper bound on decompressed content per page.
const MAX_PAGE_CONTENT: usize = 64 * 1024 * 1024;

/// Walks each page's content stream and returns its text layer.
///
/// `T*` always emits `\n`; `'`, `"` and `Td`/`TD` with a vertical offset emit
/// one unless nothing has been shown on the page yet. Nothing is emitted
/// between pages.
pub(super) fn extract_pages(bytes: &[u8]) -> Result<Vec<String>, IngestError> {
    let doc = Document::load_mem(bytes).map_err(|e| IngestError::MalformedPdf(e.to_string()))?;
    if doc.is_encrypted() {
        return Err(IngestError::MalformedPdf("encrypted document".into()));
    }
    let pages = doc.get_pages();
    if pages.is_empty() {
        return Err(IngestError::MalformedPdf("document has no pages".into()));
    }

    let mut saw_text_operator = false;
    let mut out = Vec::with_capacity(pages.len());
    for (_, page_id) in pages {
        let fonts = doc
            .get_page_fonts(page_id)
            .map_err(|e| IngestError::MalformedPdf(e.to_string()))?;
        let encodings: BTreeMap<Vec<u8>, Encoding> = fonts
            .into_iter()
            .filter_map(|(name, font)| font.get_font_encoding(&doc).ok().map(|enc| (name, enc)))
            .collect();
        let data = doc
            .get_page_content_with_limit(page_id, MAX_PAGE_CONTENT)
            .map_err(|e| IngestError::MalformedPdf(e.to_string()))?;
        let content =
            Content::decode(&data).map_err(|e| IngestError::MalformedPdf(e.to_string()))?;

        let mut text = String::new();
        let mut encoding: Option<&Encoding> = None;
        for op in &content.operations {
            match op.operator.as_str() {
                "Tf" => {
                    encoding = op
                        .operands
                        .first()
                        .and_then(|o| o.as_name().ok())
                        .and_then(|name| encodings.get(name));
                }
                "T*" => text.push('\n'),
                "Td" | "TD" => {
                    let dy = op.operands.get(1).and_then(|o| o.as_float().ok()).unwrap_or(0.0);
                    if dy != 0.0 {
                        newline(&mut text);
                    }
                }
                "Tj" => {
                    saw_text_operator = true;
                    show(&mut text, encoding, op.operands.first())?;
                }
                "TJ" => {
                    saw_text_operator = true;
                    if let Some(Object::Array(items)) = op.operands.first() {
                        for item in items {
                            show(&mut text, encoding, Some(item))?;
                        }
                    }
                }
                "'" => {
                    saw_text_operator = true;
                    newline(&mut text);
                    show(&mut text, encoding, op.operands.first())?;
                }
                "\"" => {
                    saw_text_operator = true;
                    newline(&mut text);
                    show(&mut text, encoding, op.operands.get(2))?;
                }
                _ => {}
            }
        }
        out.push(text);
    }
    if !saw_text_operator {
        return Err(IngestError::NoTextLayer);
    }
    Ok(out)
}

fn newline(text: &mut String) {
    if !text.is_empty() {
        text.push('\n');
    }
}

fn show(text: &mut String, encoding: Option<&Encoding>, operand: Option<&Object>) -> Result<(), IngestError> {
    let Some(Object::String(bytes, _)) = operand else {
        return Ok(());
    };
    match encoding {
        Some(enc) => {
            let decoded =
                Document::decode_text(enc, bytes).map_err(|e| IngestError::MalformedPdf(e.to_string()))?;
            text.push_str(&decoded);
        }
        None => text.extend(bytes.iter().map(|&b| b as char)),
    }
    Ok(())
}
