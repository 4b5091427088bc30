use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::span::{Pos, SourceSpan};
use crate::values::path::{is_ident_continue, is_ident_start};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    InputPort,
    OutputPort,
    Interface,
    Type,
    Cset,
    Define,
    Main,
    Provide,
    Until,
    Execution,
    If,
    Else,
    While,
    Nil,
    New,
    Rebind,
    Sleep,
    True,
    False,
}

impl Keyword {
    const ALL: [(Keyword, &'static str); 19] = [
        (Keyword::InputPort, "inputPort"),
        (Keyword::OutputPort, "outputPort"),
        (Keyword::Interface, "interface"),
        (Keyword::Type, "type"),
        (Keyword::Cset, "cset"),
        (Keyword::Define, "define"),
        (Keyword::Main, "main"),
        (Keyword::Provide, "provide"),
        (Keyword::Until, "until"),
        (Keyword::Execution, "execution"),
        (Keyword::If, "if"),
        (Keyword::Else, "else"),
        (Keyword::While, "while"),
        (Keyword::Nil, "nil"),
        (Keyword::New, "new"),
        (Keyword::Rebind, "rebind"),
        (Keyword::Sleep, "sleep"),
        (Keyword::True, "true"),
        (Keyword::False, "false"),
    ];

    pub fn from_word(word: &str) -> Option<Keyword> {
        Self::ALL.iter().find(|(_, w)| *w == word).map(|(k, _)| *k)
    }

    pub fn as_str(self) -> &'static str {
        Self::ALL
            .iter()
            .find(|(k, _)| *k == self)
            .map(|(_, w)| *w)
            .unwrap()
    }
}

/// True if `word` is reserved and cannot be used as an identifier.
pub fn is_keyword(word: &str) -> bool {
    Keyword::from_word(word).is_some()
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Keyword(Keyword),
    Str(String),
    /// Integer magnitude; the sign is a separate `Minus` token.
    Int(u64),
    Double(f64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Dot,
    Comma,
    Colon,
    Semi,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    AndAnd,
    OrOr,
    Bang,
    Pipe,
    Amp,
    Hash,
    At,
    Question,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Ident(name) => return write!(f, "identifier `{name}`"),
            TokenKind::Keyword(k) => return write!(f, "`{}`", k.as_str()),
            TokenKind::Str(s) => return write!(f, "string {s:?}"),
            TokenKind::Int(i) => return write!(f, "integer {i}"),
            TokenKind::Double(d) => return write!(f, "number {d:?}"),
            TokenKind::LBrace => "{",
            TokenKind::RBrace => "}",
            TokenKind::LParen => "(",
            TokenKind::RParen => ")",
            TokenKind::LBracket => "[",
            TokenKind::RBracket => "]",
            TokenKind::Dot => ".",
            TokenKind::Comma => ",",
            TokenKind::Colon => ":",
            TokenKind::Semi => ";",
            TokenKind::Assign => "=",
            TokenKind::EqEq => "==",
            TokenKind::NotEq => "!=",
            TokenKind::Lt => "<",
            TokenKind::Le => "<=",
            TokenKind::Gt => ">",
            TokenKind::Ge => ">=",
            TokenKind::Plus => "+",
            TokenKind::Minus => "-",
            TokenKind::Star => "*",
            TokenKind::Slash => "/",
            TokenKind::Percent => "%",
            TokenKind::AndAnd => "&&",
            TokenKind::OrOr => "||",
            TokenKind::Bang => "!",
            TokenKind::Pipe => "|",
            TokenKind::Amp => "&",
            TokenKind::Hash => "#",
            TokenKind::At => "@",
            TokenKind::Question => "?",
        };
        write!(f, "`{s}`")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Error)]
#[error("{span}: error: {message}")]
pub struct LexError {
    pub span: SourceSpan,
    pub message: String,
}

struct Lexer<'a> {
    file: Arc<str>,
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl<'a> Lexer<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn span_from(&self, start: Pos) -> SourceSpan {
        SourceSpan::new(self.file.clone(), start, self.pos)
    }

    fn error(&self, start: Pos, message: impl Into<String>) -> LexError {
        LexError {
            span: self.span_from(start),
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) -> Result<(), LexError> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek2() == Some('/') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some('/') if self.peek2() == Some('*') => {
                    let start = self.pos;
                    self.bump();
                    self.bump();
                    loop {
                        match self.bump() {
                            Some('*') if self.peek() == Some('/') => {
                                self.bump();
                                break;
                            }
                            Some(_) => {}
                            None => return Err(self.error(start, "unterminated block comment")),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn string(&mut self, start: Pos) -> Result<TokenKind, LexError> {
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error(start, "unterminated string literal")),
                Some('"') => return Ok(TokenKind::Str(out)),
                Some('\\') => {
                    let esc_start = self.pos;
                    match self.bump() {
                        Some('n') => out.push('\n'),
                        Some('t') => out.push('\t'),
                        Some('r') => out.push('\r'),
                        Some('0') => out.push('\0'),
                        Some('\\') => out.push('\\'),
                        Some('"') => out.push('"'),
                        Some('u') => {
                            if self.bump() != Some('{') {
                                return Err(self.error(esc_start, "expected `{` after \\u"));
                            }
                            let mut hex = String::new();
                            loop {
                                match self.bump() {
                                    Some('}') => break,
                                    Some(c) if c.is_ascii_hexdigit() && hex.len() < 6 => hex.push(c),
                                    _ => return Err(self.error(esc_start, "malformed \\u{...} escape")),
                                }
                            }
                            let c = u32::from_str_radix(&hex, 16)
                                .ok()
                                .and_then(char::from_u32)
                                .ok_or_else(|| self.error(esc_start, "invalid unicode escape"))?;
                            out.push(c);
                        }
                        Some(c) => return Err(self.error(esc_start, format!("unknown escape `\\{c}`"))),
                        None => return Err(self.error(start, "unterminated string literal")),
                    }
                }
                Some(c) => out.push(c),
            }
        }
    }

    fn number(&mut self, start: Pos, first: char) -> Result<TokenKind, LexError> {
        let mut text = String::from(first);
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            text.push(c);
            self.bump();
        }
        let mut is_double = false;
        if self.peek() == Some('.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            is_double = true;
            text.push('.');
            self.bump();
            while let Some(c) = self.peek().filter(char::is_ascii_digit) {
                text.push(c);
                self.bump();
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let mut look = self.chars.clone();
            look.next();
            let mut sign = None;
            if let Some(s @ ('+' | '-')) = look.peek().copied() {
                sign = Some(s);
                look.next();
            }
            if look.peek().is_some_and(|c| c.is_ascii_digit()) {
                is_double = true;
                text.push('e');
                self.bump();
                if let Some(s) = sign {
                    text.push(s);
                    self.bump();
                }
                while let Some(c) = self.peek().filter(char::is_ascii_digit) {
                    text.push(c);
                    self.bump();
                }
            }
        }
        if self.peek().is_some_and(is_ident_start) {
            return Err(self.error(start, format!("malformed number literal `{text}...`")));
        }
        if is_double {
            let d: f64 = text
                .parse()
                .map_err(|_| self.error(start, format!("malformed number `{text}`")))?;
            if !d.is_finite() {
                return Err(self.error(start, format!("number `{text}` is out of range")));
            }
            Ok(TokenKind::Double(d))
        } else {
            text.parse()
                .map(TokenKind::Int)
                .map_err(|_| self.error(start, format!("integer `{text}` is out of range")))
        }
    }

    fn next_token(&mut self) -> Result<Option<Token>, LexError> {
        self.skip_trivia()?;
        let start = self.pos;
        let Some(c) = self.bump() else {
            return Ok(None);
        };
        let two = |lx: &mut Self, next: char, yes: TokenKind, no: TokenKind| {
            if lx.peek() == Some(next) {
                lx.bump();
                yes
            } else {
                no
            }
        };
        let kind = match c {
            '{' => TokenKind::LBrace,
            '}' => TokenKind::RBrace,
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            '[' => TokenKind::LBracket,
            ']' => TokenKind::RBracket,
            '.' => TokenKind::Dot,
            ',' => TokenKind::Comma,
            ':' => TokenKind::Colon,
            ';' => TokenKind::Semi,
            '+' => TokenKind::Plus,
            '-' => TokenKind::Minus,
            '*' => TokenKind::Star,
            '/' => TokenKind::Slash,
            '%' => TokenKind::Percent,
            '#' => TokenKind::Hash,
            '@' => TokenKind::At,
            '?' => TokenKind::Question,
            '=' => two(self, '=', TokenKind::EqEq, TokenKind::Assign),
            '!' => two(self, '=', TokenKind::NotEq, TokenKind::Bang),
            '<' => two(self, '=', TokenKind::Le, TokenKind::Lt),
            '>' => two(self, '=', TokenKind::Ge, TokenKind::Gt),
            '&' => two(self, '&', TokenKind::AndAnd, TokenKind::Amp),
            '|' => two(self, '|', TokenKind::OrOr, TokenKind::Pipe),
            '"' => self.string(start)?,
            c if c.is_ascii_digit() => self.number(start, c)?,
            c if is_ident_start(c) => {
                let mut word = String::from(c);
                while let Some(c) = self.peek().filter(|c| is_ident_continue(*c)) {
                    word.push(c);
                    self.bump();
                }
                match Keyword::from_word(&word) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident(word),
                }
            }
            other => return Err(self.error(start, format!("illegal character {other:?}"))),
        };
        Ok(Some(Token {
            kind,
            span: self.span_from(start),
        }))
    }
}

/// Splits `source` into tokens, discarding whitespace and comments.
pub fn tokenize_file(file: &str, source: &str) -> Result<Vec<Token>, LexError> {
    let mut lexer = Lexer {
        file: Arc::from(file),
        chars: source.chars().peekable(),
        pos: Pos::START,
    };
    let mut out = Vec::new();
    while let Some(tok) = lexer.next_token()? {
        out.push(tok);
    }
    Ok(out)
}

/// [`tokenize_file`] with the file name `<input>`.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    tokenize_file("<input>", source)
}
