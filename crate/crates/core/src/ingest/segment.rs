//! Rule-based sentence splitting.
//!
//! A sentence ends at `.`, `!` or `?` (plus any closing quotes/brackets)
//! when followed by whitespace and then an upper-case letter or digit, or
//! by the end of the page. A blank line also ends a sentence, so headings
//! do not swallow the paragraph below them. Sentences never cross pages.

use super::{PageText, Sentence, SourceDocument};

/// Abbreviations after which a full stop never ends a sentence.
const NEVER_TERMINAL: &[&str] = &["approx.", "dr.", "no.", "e.g.", "i.e.", "vs.", "cf."];

/// Unit abbreviations: the full stop is terminal only before an upper-case
/// letter ("3 cm. The uterus"), never before a digit.
const UNIT_ABBREVIATIONS: &[&str] = &["cm.", "mm.", "ml.", "cc."];

const CLOSERS: &[char] = &[')', ']', '"', '\'', '\u{201d}', '\u{2019}'];

pub fn segment_sentences(doc: &SourceDocument) -> Vec<Sentence> {
    doc.pages
        .iter()
        .flat_map(|page| segment_page(&doc.doc_id, page))
        .collect()
}

pub fn segment_page(doc_id: &str, page: &PageText) -> Vec<Sentence> {
    let chars: Vec<char> = page.text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        if i >= chars.len() {
            break;
        }
        let start = i;
        let end = find_end(&chars, start);
        let text: String = chars[start..end].iter().collect();
        out.push(Sentence {
            doc_id: doc_id.to_string(),
            page_index: page.page_index,
            char_start: page.start_offset + start,
            char_end: page.start_offset + end,
            text,
        });
        i = end;
    }
    out
}

/// Exclusive end of the sentence beginning at `start` (never includes
/// trailing whitespace).
fn find_end(chars: &[char], start: usize) -> usize {
    let n = chars.len();
    let mut j = start;
    while j < n {
        let c = chars[j];
        if matches!(c, '.' | '!' | '?') {
            let mut k = j + 1;
            while k < n && (matches!(chars[k], '.' | '!' | '?') || CLOSERS.contains(&chars[k])) {
                k += 1;
            }
            if k == n {
                return k;
            }
            if chars[k].is_whitespace() {
                let mut m = k;
                while m < n && chars[m].is_whitespace() {
                    m += 1;
                }
                if m == n || paragraph_break(&chars[k..m]) {
                    return k;
                }
                if starts_sentence(chars[m]) && !guarded(chars, start, j, chars[m]) {
                    return k;
                }
            }
            j = k;
            continue;
        }
        if c.is_whitespace() {
            let mut m = j;
            while m < n && chars[m].is_whitespace() {
                m += 1;
            }
            if m == n || paragraph_break(&chars[j..m]) {
                return j;
            }
            j = m;
            continue;
        }
        j += 1;
    }
    n
}

fn paragraph_break(ws: &[char]) -> bool {
    ws.iter().filter(|&&c| c == '\n').count() >= 2
}

fn starts_sentence(c: char) -> bool {
    c.is_uppercase() || c.is_ascii_digit() || matches!(c, '(' | '"' | '\u{201c}')
}

/// Whether the terminator at `dot` closes a guarded abbreviation.
fn guarded(chars: &[char], start: usize, dot: usize, next: char) -> bool {
    if chars[dot] != '.' {
        return false;
    }
    let mut w = dot;
    while w > start && !chars[w - 1].is_whitespace() {
        w -= 1;
    }
    let word: String = chars[w..=dot]
        .iter()
        .skip_while(|c| matches!(c, '(' | '[' | '"'))
        .flat_map(|c| c.to_lowercase())
        .collect();
    if NEVER_TERMINAL.contains(&word.as_str()) {
        return true;
    }
    UNIT_ABBREVIATIONS.contains(&word.as_str()) && !next.is_uppercase()
}
