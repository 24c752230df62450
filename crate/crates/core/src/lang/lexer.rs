use super::ast::Span;
use super::LangError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Str(String),
    /// `// @key: value` comment.
    Annotation(String, String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

const SYMBOLS: [&str; 27] = [
    "..", "<=", ">=", "!=", "->", "=>", "[", "]", "(", ")", "{", "}", ";", ":", ",", "=", "'", "+", "-", "*", "/", "<",
    ">", "&", "|", "!", "?",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LangError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for &b in &bytes[*i..*i + n] {
            if b == b'\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };

    while i < bytes.len() {
        let c = bytes[i];
        let span = Span::new(line, col);
        if c.is_ascii_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if src[i..].starts_with("//") {
            let end = src[i..].find('\n').map_or(src.len(), |e| i + e);
            let body = src[i + 2..end].trim();
            if let Some(rest) = body.strip_prefix('@') {
                if let Some((key, value)) = rest.split_once(':') {
                    out.push(Token { tok: Tok::Annotation(key.trim().to_string(), value.trim().to_string()), span });
                }
            }
            let n = end - i;
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let len = src[i..].find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_')).unwrap_or(src.len() - i);
            out.push(Token { tok: Tok::Ident(src[i..i + len].to_string()), span });
            advance(&mut i, &mut line, &mut col, len);
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let (len, is_real) = number_len(&bytes[i..]);
            let text = &src[i..i + len];
            let tok = if is_real {
                Tok::Real(text.parse().map_err(|_| LangError::syntax(span, format!("bad number `{text}`")))?)
            } else {
                Tok::Int(text.parse().map_err(|_| LangError::syntax(span, format!("integer `{text}` too large")))?)
            };
            out.push(Token { tok, span });
            advance(&mut i, &mut line, &mut col, len);
            continue;
        }
        if c == b'"' {
            let end = src[i + 1..]
                .find(['"', '\n'])
                .map(|e| i + 1 + e)
                .filter(|&e| bytes[e] == b'"')
                .ok_or_else(|| LangError::syntax(span, "unterminated string"))?;
            out.push(Token { tok: Tok::Str(src[i + 1..end].to_string()), span });
            let n = end + 1 - i;
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(sym) => {
                out.push(Token { tok: Tok::Sym(sym), span });
                advance(&mut i, &mut line, &mut col, sym.len());
            }
            None => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(LangError::syntax(span, format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(line, col) });
    Ok(out)
}

/// Length of the numeric literal at the start of `b` and whether it is real-valued.
fn number_len(b: &[u8]) -> (usize, bool) {
    let mut n = 0;
    let mut real = false;
    while n < b.len() && b[n].is_ascii_digit() {
        n += 1;
    }
    // `0..4` is a range, not a real.
    if n < b.len() && b[n] == b'.' && b.get(n + 1) != Some(&b'.') {
        real = true;
        n += 1;
        while n < b.len() && b[n].is_ascii_digit() {
            n += 1;
        }
    }
    if n < b.len() && (b[n] == b'e' || b[n] == b'E') {
        let mut m = n + 1;
        if m < b.len() && (b[m] == b'+' || b[m] == b'-') {
            m += 1;
        }
        if m < b.len() && b[m].is_ascii_digit() {
            while m < b.len() && b[m].is_ascii_digit() {
                m += 1;
            }
            n = m;
            real = true;
        }
    }
    (n, real)
}
