use super::{GeomError, GeomErrorKind};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Decimal literal kept as text so it converts exactly.
    Num(String),
    Str(String),
    Punct(char),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(src: &str) -> Result<Vec<Token>, GeomError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - s;
            out.push(Token {
                tok: Tok::Ident(chars[s..i].iter().collect()),
                line: l0,
                col: c0,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let s = i;
            let mut dot = false;
            while i < chars.len() && (chars[i].is_ascii_digit() || (chars[i] == '.' && !dot)) {
                dot |= chars[i] == '.';
                i += 1;
            }
            col += i - s;
            out.push(Token {
                tok: Tok::Num(chars[s..i].iter().collect()),
                line: l0,
                col: c0,
            });
            continue;
        }
        if c == '"' {
            let s = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(GeomError::new(GeomErrorKind::SyntaxError, l0, c0, "unterminated string"));
            }
            let text: String = chars[s..i].iter().collect();
            i += 1;
            col += text.chars().count() + 2;
            out.push(Token {
                tok: Tok::Str(text),
                line: l0,
                col: c0,
            });
            continue;
        }
        if "{}[](),;=+-*/^".contains(c) {
            out.push(Token {
                tok: Tok::Punct(c),
                line: l0,
                col: c0,
            });
            i += 1;
            col += 1;
            continue;
        }
        return Err(GeomError::new(
            GeomErrorKind::SyntaxError,
            l0,
            c0,
            format!("unexpected character {c:?}"),
        ));
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
