//! Tokenizer for the expression DSL.

use super::ExprError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Comma,
    LParen,
    RParen,
}

/// A token with its starting byte offset.
#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub offset: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        let start = i;
        let simple = match ch {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b',' => Some(Tok::Comma),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, offset: start });
            i += 1;
            continue;
        }
        if ch.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if ch.is_ascii_digit() || (ch == b'.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // optional exponent, only if followed by digits
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                msg: format!("malformed number '{text}'"),
            })?;
            out.push(Token { tok: Tok::Num(v), offset: start });
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), offset: start });
            continue;
        }
        return Err(ExprError::IllegalCharacter { offset: start });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn power_and_division() {
        assert_eq!(
            kinds("u1^2/2"),
            vec![Tok::Ident("u1".into()), Tok::Caret, Tok::Num(2.0), Tok::Slash, Tok::Num(2.0)]
        );
    }

    #[test]
    fn call_with_negation() {
        assert_eq!(
            kinds("exp(-u3)"),
            vec![Tok::Ident("exp".into()), Tok::LParen, Tok::Minus, Tok::Ident("u3".into()), Tok::RParen]
        );
    }

    #[test]
    fn illegal_character_offset() {
        assert_eq!(tokenize("u1 @ 2"), Err(ExprError::IllegalCharacter { offset: 3 }));
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(kinds("1.5e-3"), vec![Tok::Num(1.5e-3)]);
        assert_eq!(kinds("2e"), vec![Tok::Num(2.0), Tok::Ident("e".into())]);
    }
}
