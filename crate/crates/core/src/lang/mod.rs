//! Concrete syntax: lexer, parser, AST and canonical printer.
//!
//! One source file describes one service.

pub mod ast;
mod lexer;
mod parser;
mod printer;
mod span;

use thiserror::Error;

pub use ast::*;
pub use lexer::{is_keyword, tokenize, tokenize_file, Keyword, LexError, Token, TokenKind};
pub use parser::{ParseError, Parser};
pub use printer::{pretty_print, print_behavior, print_expr};
pub use span::{Pos, SourceSpan};

#[derive(Debug, Clone, Error)]
pub enum LangError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl LangError {
    pub fn span(&self) -> &SourceSpan {
        match self {
            LangError::Lex(e) => &e.span,
            LangError::Parse(e) => &e.span,
        }
    }
}

/// Parses a token stream produced by [`tokenize_file`].
pub fn parse_program(file: &str, tokens: Vec<Token>) -> Result<Program, ParseError> {
    Parser::new(file, tokens).program()
}

/// Tokenizes and parses a complete source file.
pub fn parse_source(file: &str, source: &str) -> Result<Program, LangError> {
    let tokens = tokenize_file(file, source)?;
    Ok(parse_program(file, tokens)?)
}

/// Parses a standalone behavior, e.g. `a = 1 | b = 2`.
pub fn parse_behavior(source: &str) -> Result<Behavior, LangError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser::new("<input>", tokens);
    let b = parser.behavior()?;
    parser.finish()?;
    Ok(b)
}
