//! Value normalization and the whitespace tokenizer shared by statistics,
//! BLEU and paraphrase validation.

/// Case-fold and trim. All slot-value equality goes through this.
pub fn normalize(value: &str) -> String {
    value.trim().to_lowercase()
}

/// Splits on whitespace after detaching punctuation into separate tokens.
///
/// Punctuation inside a token between two alphanumerics (`29.99`, `t-shirt`,
/// `don't`) stays attached.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else if c.is_alphanumeric() {
            cur.push(c);
        } else {
            let prev = i.checked_sub(1).map(|j| chars[j]);
            let next = chars.get(i + 1).copied();
            let inner = matches!(c, '.' | ',' | '-' | '\'' | '/')
                && prev.is_some_and(char::is_alphanumeric)
                && next.is_some_and(char::is_alphanumeric);
            if inner {
                cur.push(c);
            } else {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn word_count(text: &str) -> usize {
    tokenize(text).len()
}
