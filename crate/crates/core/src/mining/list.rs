// SPDX-License-Identifier: MIT OR Apache-2.0

//! Extraction of string lists from free-form model replies.
//!
//! Accepts strict JSON arrays and Python-style lists (single or double
//! quotes, backslash escapes), possibly surrounded by prose or code fences.
//! The first balanced `[…]` block that yields at least one quoted item wins.

use crate::error::{Error, Result};

pub fn extract_string_list(text: &str) -> Result<Vec<String>> {
    let mut from = 0;
    while let Some(offset) = text[from..].find('[') {
        let start = from + offset;
        let Some(end) = balanced_end(text, start) else {
            break;
        };
        let block = &text[start..=end];
        if let Ok(items) = serde_json::from_str::<Vec<String>>(block) {
            return Ok(items);
        }
        let items = quoted_items(&block[1..block.len() - 1]);
        if !items.is_empty() {
            return Ok(items);
        }
        from = start + 1;
    }
    Err(Error::MalformedResponse(format!(
        "no quoted list found in reply: {}",
        preview(text)
    )))
}

/// Byte index of the `]` closing the `[` at `start`, honoring quotes.
fn balanced_end(text: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' if depth > 0 && opens_string(text, start + i) => quote = Some(c),
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + i);
                }
            }
            _ => {}
        }
    }
    None
}

/// A quote opens a string only at an item boundary, so apostrophes inside
/// bare words (`[round]`, `[dog's]`) do not swallow the rest of the text.
fn opens_string(text: &str, at: usize) -> bool {
    text[..at]
        .chars()
        .rev()
        .find(|c| !c.is_whitespace())
        .is_none_or(|c| c == '[' || c == ',')
}

fn quoted_items(inner: &str) -> Vec<String> {
    let mut items = Vec::new();
    let mut chars = inner.chars().peekable();
    let mut at_boundary = true;
    while let Some(c) = chars.next() {
        if (c == '"' || c == '\'') && at_boundary {
            let mut item = String::new();
            let mut closed = false;
            while let Some(x) = chars.next() {
                match x {
                    '\\' => match chars.next() {
                        Some('n') => item.push('\n'),
                        Some('t') => item.push('\t'),
                        Some(other) => item.push(other),
                        None => break,
                    },
                    x if x == c => {
                        closed = true;
                        break;
                    }
                    x => item.push(x),
                }
            }
            if closed {
                items.push(item);
            }
            at_boundary = false;
        } else if c == ',' {
            at_boundary = true;
        } else if !c.is_whitespace() {
            at_boundary = false;
        }
    }
    items
}

pub(crate) fn preview(text: &str) -> String {
    const LIMIT: usize = 160;
    match text.char_indices().nth(LIMIT) {
        Some((i, _)) => format!("{}…", &text[..i]),
        None => text.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_json() {
        assert_eq!(extract_string_list(r#"["a", "b c"]"#).unwrap(), vec!["a", "b c"]);
    }

    #[test]
    fn python_style_with_prose_and_fences() {
        let reply = "Sure, here it is:\n```python\n['round', \"cake\", 'dog\\'s bowl',]\n```";
        assert_eq!(
            extract_string_list(reply).unwrap(),
            vec!["round", "cake", "dog's bowl"]
        );
    }

    #[test]
    fn skips_unquoted_bracket_spans() {
        let reply = "For a [round] cake: [\"round\", \"cake\"]";
        assert_eq!(extract_string_list(reply).unwrap(), vec!["round", "cake"]);
    }

    #[test]
    fn brackets_inside_strings() {
        let reply = r#"["a [bracketed] word", "x]y"]"#;
        assert_eq!(extract_string_list(reply).unwrap(), vec!["a [bracketed] word", "x]y"]);
    }

    #[test]
    fn multiline_list() {
        let reply = "[\n    \"Dogs are loyal.\",\n    \"A dog’s bark varies.\"\n]";
        assert_eq!(
            extract_string_list(reply).unwrap(),
            vec!["Dogs are loyal.", "A dog’s bark varies."]
        );
    }

    #[test]
    fn malformed() {
        for reply in ["no list here", "[unterminated", "[1, 2, 3]", ""] {
            assert!(matches!(
                extract_string_list(reply),
                Err(Error::MalformedResponse(_))
            ), "{reply}");
        }
    }
}
