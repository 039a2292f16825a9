use crate::DslError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Name(String),
    Number(String),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub offset: usize,
}

const PUNCT: [&str; 24] = [
    "...", "&&", "||", "==", "!=", "<=", ">=", "@", "(", ")", "{", "}", ";", ",", ".", "=", "+", "-", "*", "/", "<",
    ">", "!", ":",
];

fn name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

pub fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(i, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        let rest = &src[i..];
        if rest.starts_with("//") {
            while it.peek().is_some_and(|(_, c)| *c != '\n') {
                it.next();
            }
            continue;
        }
        if rest.starts_with("/*") {
            let end = rest[2..]
                .find("*/")
                .ok_or_else(|| DslError::syntax(i, "unterminated comment"))?;
            let stop = i + 2 + end + 2;
            while it.peek().is_some_and(|(j, _)| *j < stop) {
                it.next();
            }
            continue;
        }
        if name_start(c) {
            let mut end = i;
            while let Some(&(j, c)) = it.peek() {
                if !name_char(c) {
                    break;
                }
                end = j + c.len_utf8();
                it.next();
            }
            out.push(Token {
                tok: Tok::Name(src[i..end].to_string()),
                offset: i,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut end = i;
            let mut seen_dot = false;
            while let Some(&(j, c)) = it.peek() {
                let dot_ok = c == '.' && !seen_dot && src[j + 1..].starts_with(|d: char| d.is_ascii_digit());
                if !(c.is_ascii_digit() || dot_ok) {
                    break;
                }
                seen_dot |= c == '.';
                end = j + 1;
                it.next();
            }
            out.push(Token {
                tok: Tok::Number(src[i..end].to_string()),
                offset: i,
            });
            continue;
        }
        if c == '"' {
            it.next();
            let mut s = String::new();
            loop {
                match it.next() {
                    None | Some((_, '\n')) => return Err(DslError::syntax(i, "unterminated string")),
                    Some((_, '"')) => break,
                    Some((j, '\\')) => match it.next() {
                        Some((_, c @ ('"' | '\\'))) => s.push(c),
                        _ => return Err(DslError::syntax(j, "bad escape")),
                    },
                    Some((_, c)) => s.push(c),
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                offset: i,
            });
            continue;
        }
        match PUNCT.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                for _ in 0..p.len() {
                    it.next();
                }
                out.push(Token {
                    tok: Tok::Punct(p),
                    offset: i,
                });
            }
            None => return Err(DslError::syntax(i, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn basic_tokens() {
        assert_eq!(
            toks("a.b(1.5, \"x\") >= 2 // hi\n..."),
            vec![
                Tok::Name("a".into()),
                Tok::Punct("."),
                Tok::Name("b".into()),
                Tok::Punct("("),
                Tok::Number("1.5".into()),
                Tok::Punct(","),
                Tok::Str("x".into()),
                Tok::Punct(")"),
                Tok::Punct(">="),
                Tok::Number("2".into()),
                Tok::Punct("..."),
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn number_then_member() {
        assert_eq!(
            toks("1.x"),
            vec![Tok::Number("1".into()), Tok::Punct("."), Tok::Name("x".into()), Tok::Eof]
        );
    }

    #[test]
    fn offsets_point_at_the_problem() {
        let err = lex("ab #").unwrap_err();
        assert_eq!(err, DslError::syntax(3, "unexpected character `#`"));
        assert!(matches!(lex("x \"abc").unwrap_err(), DslError::Syntax { offset: 2, .. }));
    }
}
