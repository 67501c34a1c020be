//! A small lexer shared by the n-gram metrics and the flat fallback tree.

use crate::corpus::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    String,
    Operator,
}

impl TokenKind {
    pub fn label(self) -> &'static str {
        match self {
            TokenKind::Identifier => "identifier",
            TokenKind::Keyword => "keyword",
            TokenKind::Number => "number",
            TokenKind::String => "string",
            TokenKind::Operator => "operator",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub start: usize,
}

pub const PYTHON_KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

pub const JAVA_KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while", "true", "false", "null", "var",
];

pub fn is_keyword(word: &str, language: Language) -> bool {
    match language {
        Language::Python => PYTHON_KEYWORDS.contains(&word),
        Language::Java => JAVA_KEYWORDS.contains(&word),
    }
}

const OPERATORS: &[&str] = &[
    ">>>=", "**=", "//=", ">>=", "<<=", "...", ">>>", "->", "==", "!=", "<=", ">=", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "**", "//", "<<", ">>", "&&", "||", "++", "--", "::",
    ":=",
];

/// Splits code into tokens. Comments are dropped when the language is known;
/// with `None` every non-space character belongs to some token.
pub fn lex(text: &str, language: Option<Language>) -> Vec<Token<'_>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let c = text[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let rest = &text[i..];
        // Comments.
        match language {
            Some(Language::Python) if c == '#' => {
                i += rest.find('\n').unwrap_or(rest.len());
                continue;
            }
            Some(Language::Java) if rest.starts_with("//") => {
                i += rest.find('\n').unwrap_or(rest.len());
                continue;
            }
            Some(Language::Java) if rest.starts_with("/*") => {
                i += rest[2..].find("*/").map_or(rest.len(), |p| p + 4);
                continue;
            }
            _ => {}
        }
        let start = i;
        let kind;
        if c.is_alphabetic() || c == '_' {
            let len = rest
                .find(|ch: char| !(ch.is_alphanumeric() || ch == '_'))
                .unwrap_or(rest.len());
            let word = &rest[..len];
            // Python string prefixes such as r"..", f'..'.
            let next = rest[len..].chars().next();
            if language == Some(Language::Python)
                && len <= 2
                && matches!(next, Some('"') | Some('\''))
                && word.chars().all(|ch| "rRbBuUfF".contains(ch))
            {
                i += len + string_len(&rest[len..]);
                kind = TokenKind::String;
            } else {
                i += len;
                kind = match language {
                    Some(lang) if is_keyword(word, lang) => TokenKind::Keyword,
                    _ => TokenKind::Identifier,
                };
            }
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let mut j = i + 1;
            while j < text.len() {
                let b = bytes[j];
                let exp_sign = (b == b'+' || b == b'-') && matches!(bytes[j - 1], b'e' | b'E') && !text[i..j].starts_with("0x");
                if b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || exp_sign {
                    j += 1;
                } else {
                    break;
                }
            }
            i = j;
            kind = TokenKind::Number;
        } else if c == '"' || c == '\'' {
            i += string_len(rest);
            kind = TokenKind::String;
        } else {
            let op = OPERATORS.iter().find(|op| rest.starts_with(**op));
            i += op.map_or(c.len_utf8(), |op| op.len());
            kind = TokenKind::Operator;
        }
        out.push(Token {
            kind,
            text: &text[start..i],
            start,
        });
    }
    out
}

// Length of a quoted literal starting at `s`, including triple quotes. An
// unterminated literal runs to the end of the line.
fn string_len(s: &str) -> usize {
    let quote = s.as_bytes()[0];
    let triple = s.len() >= 3 && s.as_bytes()[1] == quote && s.as_bytes()[2] == quote;
    let bytes = s.as_bytes();
    if triple {
        let delim = &s[..3];
        return s[3..].find(delim).map_or(s.len(), |p| p + 6);
    }
    let mut j = 1;
    while j < bytes.len() {
        match bytes[j] {
            b'\\' => j += 2,
            b'\n' => return j,
            b if b == quote => return j + 1,
            _ => j += 1,
        }
    }
    s.len().min(j)
}
