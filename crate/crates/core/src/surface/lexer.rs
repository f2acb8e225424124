use super::{ErrorKind, Span, SurfaceSyntaxError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Data,
    Extern,
    Let,
    Forall,
    Case,
    Of,
    UpId(String),
    LoId(String),
    Int(i64),
    Str(String),
    Eq,
    Bar,
    Colon,
    Arrow,
    Backslash,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Dot,
    Underscore,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Data => "`data`".into(),
            Tok::Extern => "`extern`".into(),
            Tok::Let => "`let`".into(),
            Tok::Forall => "`forall`".into(),
            Tok::Case => "`case`".into(),
            Tok::Of => "`of`".into(),
            Tok::UpId(s) | Tok::LoId(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Eq => "`=`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Backslash => "`\\`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Underscore => "`_`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

pub fn lex(text: &str) -> Result<Vec<(Tok, Span)>, SurfaceSyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let err = |span: Span, message: String| SurfaceSyntaxError { span, message, kind: ErrorKind::Lex };
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        let advance = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            out.push((Tok::Arrow, span));
            advance(2, &mut i, &mut col);
            continue;
        }
        let single = match c {
            '=' => Some(Tok::Eq),
            '|' => Some(Tok::Bar),
            ':' => Some(Tok::Colon),
            '\\' => Some(Tok::Backslash),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ';' => Some(Tok::Semi),
            '.' => Some(Tok::Dot),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, span));
            advance(1, &mut i, &mut col);
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let n = s.parse().map_err(|_| err(span, format!("integer literal `{s}` out of range")))?;
            out.push((Tok::Int(n), span));
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(span, "unterminated string literal".into())),
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        let e = match chars.get(i + 1) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            _ => {
                                return Err(err(Span { line, col }, "invalid escape in string literal".into()));
                            }
                        };
                        s.push(e);
                        i += 2;
                        col += 2;
                    }
                    Some(ch) => {
                        s.push(*ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            out.push((Tok::Str(s), span));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let t = match s.as_str() {
                "data" => Tok::Data,
                "extern" => Tok::Extern,
                "let" => Tok::Let,
                "forall" => Tok::Forall,
                "case" => Tok::Case,
                "of" => Tok::Of,
                "_" => Tok::Underscore,
                _ if c == '_' => return Err(err(span, format!("identifiers may not start with `_`: `{s}`"))),
                _ if c.is_uppercase() => Tok::UpId(s),
                _ => Tok::LoId(s),
            };
            out.push((t, span));
            continue;
        }
        return Err(err(span, format!("unexpected character `{c}`")));
    }
    out.push((Tok::Eof, Span { line, col }));
    Ok(out)
}
