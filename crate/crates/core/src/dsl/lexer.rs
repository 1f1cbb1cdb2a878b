use super::{ParseError, ParseErrorKind, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    Semi,
    Colon,
    Tilde,
    Assign,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Pipe,
    Arrow,
    Equals,
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(v) => format!("number {v}"),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Tilde => "~",
            Tok::Assign => ":=",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Comma => ",",
            Tok::Pipe => "|",
            Tok::Arrow => "->",
            Tok::Equals => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Ident(_) | Tok::Number(_) => "",
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

/// Splits `source` into tokens. Unrecognised characters are reported and
/// skipped so that later errors are still found.
pub(crate) fn tokenize(source: &str) -> (Vec<Token>, Vec<ParseError>) {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let start = SourceSpan::new(line, col, 1);
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
                col += 1;
            }
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let double = match two.as_str() {
            ":=" => Some(Tok::Assign),
            "->" => Some(Tok::Arrow),
            "<=" => Some(Tok::Le),
            ">=" => Some(Tok::Ge),
            "==" => Some(Tok::EqEq),
            "!=" => Some(Tok::Ne),
            _ => None,
        };
        if let Some(tok) = double {
            tokens.push(Token {
                tok,
                span: SourceSpan::new(line, col, 2),
            });
            i += 2;
            col += 2;
            continue;
        }
        let single = match c {
            ';' => Some(Tok::Semi),
            ':' => Some(Tok::Colon),
            '~' => Some(Tok::Tilde),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '|' => Some(Tok::Pipe),
            '=' => Some(Tok::Equals),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '<' => Some(Tok::Lt),
            '>' => Some(Tok::Gt),
            _ => None,
        };
        if let Some(tok) = single {
            tokens.push(Token { tok, span: start });
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            while i < chars.len() && chars[i] == '\'' {
                i += 1;
            }
            let text: String = chars[begin..i].iter().collect();
            let len = i - begin;
            tokens.push(Token {
                tok: Tok::Ident(text),
                span: SourceSpan::new(line, col, len),
            });
            col += len;
            continue;
        }
        if c.is_ascii_digit() {
            let begin = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[begin..i].iter().collect();
            let len = i - begin;
            let span = SourceSpan::new(line, col, len);
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => tokens.push(Token {
                    tok: Tok::Number(v),
                    span,
                }),
                _ => errors.push(ParseError::new(
                    span,
                    ParseErrorKind::Syntax,
                    format!("number `{text}` is out of range"),
                )),
            }
            col += len;
            continue;
        }
        errors.push(ParseError::new(
            start,
            ParseErrorKind::Syntax,
            format!("unexpected character {c:?}"),
        ));
        i += 1;
        col += 1;
    }
    (tokens, errors)
}
