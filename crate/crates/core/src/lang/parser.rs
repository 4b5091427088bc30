//! Recursive-descent parser.
//!
//! Statement grammar (`;` binds tighter than `|`, both right-associative):
//!
//! ```text
//! par   := seq ( '|' par )?
//! seq   := stmt ( ';' seq )?
//! stmt  := 'nil' | block | if | while | provide | choice | rebind | sleep
//!        | op '(' path? ')' ( '(' expr? ')' )? block?      receive
//!        | op '@' Port '(' expr? ')' ( '(' path? ')' )?    send
//!        | path '=' expr                                   assignment
//!        | name                                            procedure call
//! ```

use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use super::ast::*;
use super::lexer::{Keyword, Token, TokenKind};
use super::span::SourceSpan;
use crate::values::{BasicKind, BasicValue, Cardinality, FieldType, Path, TypeExpr};

#[derive(Debug, Clone, Error)]
#[error("{span}: error: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

type PResult<T> = Result<T, ParseError>;

pub struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    eof: SourceSpan,
}

impl Parser {
    pub fn new(file: &str, tokens: Vec<Token>) -> Self {
        let eof = match tokens.last() {
            Some(t) => SourceSpan::new(t.span.file.clone(), t.span.end, t.span.end),
            None => SourceSpan::new(Arc::from(file), Default::default(), Default::default()),
        };
        Parser { tokens, pos: 0, eof }
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn span(&self) -> SourceSpan {
        self.tokens
            .get(self.pos)
            .map_or_else(|| self.eof.clone(), |t| t.span.clone())
    }

    fn prev_span(&self) -> SourceSpan {
        self.pos
            .checked_sub(1)
            .and_then(|i| self.tokens.get(i))
            .map_or_else(|| self.eof.clone(), |t| t.span.clone())
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(ParseError {
            span: self.span(),
            expected: expected.iter().map(|s| (*s).to_owned()).collect(),
            found: self
                .peek()
                .map_or_else(|| "end of input".to_owned(), |k| k.to_string()),
        })
    }

    fn at(&self, kind: &TokenKind) -> bool {
        self.peek() == Some(kind)
    }

    fn at_kw(&self, kw: Keyword) -> bool {
        self.peek() == Some(&TokenKind::Keyword(kw))
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.at(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<SourceSpan> {
        if self.at(&kind) {
            self.pos += 1;
            Ok(self.prev_span())
        } else {
            self.error(&[&kind.to_string()])
        }
    }

    fn expect_kw(&mut self, kw: Keyword) -> PResult<SourceSpan> {
        self.expect(TokenKind::Keyword(kw))
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn at_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Some(TokenKind::Ident(w)) if w == word)
    }

    fn ident_at(&self, offset: usize) -> bool {
        matches!(self.peek_at(offset), Some(TokenKind::Ident(_)))
    }

    /// Fails unless every token has been consumed.
    pub fn finish(&self) -> PResult<()> {
        if self.peek().is_some() {
            return self.error(&["end of input"]);
        }
        Ok(())
    }

    // ---- program ----

    pub fn program(&mut self) -> PResult<Program> {
        let start = self.span();
        let mut types = Vec::new();
        let mut interfaces = Vec::new();
        let mut input_ports = Vec::new();
        let mut output_ports = Vec::new();
        let mut csets = Vec::new();
        let mut execution = None;
        let mut procedures = Vec::new();
        let mut main = None;
        while let Some(kind) = self.peek() {
            match kind {
                TokenKind::Keyword(Keyword::Type) => types.push(self.type_decl()?),
                TokenKind::Keyword(Keyword::Interface) => interfaces.push(self.interface_decl()?),
                TokenKind::Keyword(Keyword::InputPort) => {
                    input_ports.push(self.port_decl(PortDirection::Input)?)
                }
                TokenKind::Keyword(Keyword::OutputPort) => {
                    output_ports.push(self.port_decl(PortDirection::Output)?)
                }
                TokenKind::Keyword(Keyword::Cset) => csets.extend(self.cset_block()?),
                TokenKind::Keyword(Keyword::Execution) => {
                    if execution.is_some() {
                        return self.error(&["a single `execution` block"]);
                    }
                    execution = Some(self.execution_block()?);
                }
                TokenKind::Keyword(Keyword::Define) => procedures.push(self.procedure()?),
                TokenKind::Keyword(Keyword::Main) => {
                    if main.is_some() {
                        return self.error(&["a single `main` block"]);
                    }
                    self.pos += 1;
                    main = Some(self.block()?);
                }
                _ => {
                    return self.error(&[
                        "`type`",
                        "`interface`",
                        "`inputPort`",
                        "`outputPort`",
                        "`cset`",
                        "`execution`",
                        "`define`",
                        "`main`",
                    ])
                }
            }
        }
        let Some(main) = main else {
            return self.error(&["`main`"]);
        };
        Ok(Program {
            types,
            interfaces,
            input_ports,
            output_ports,
            csets,
            execution: execution.unwrap_or_default(),
            procedures,
            main,
            span: start.to(&self.prev_span()),
        })
    }

    fn type_decl(&mut self) -> PResult<TypeDecl> {
        let start = self.expect_kw(Keyword::Type)?;
        let name = self.ident()?;
        self.expect(TokenKind::Colon)?;
        let ty = self.type_expr()?;
        Ok(TypeDecl {
            name,
            ty,
            span: start.to(&self.prev_span()),
        })
    }

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        let name = self.ident()?;
        match BasicKind::from_name(&name) {
            Some(root) if self.at(&TokenKind::LBrace) => {
                self.pos += 1;
                let mut fields = IndexMap::new();
                while !self.eat(&TokenKind::RBrace) {
                    let fname = self.ident()?;
                    if fields.contains_key(&fname) {
                        self.pos -= 1;
                        return self.error(&["a field name not already declared in this type"]);
                    }
                    let card = self.cardinality()?;
                    self.expect(TokenKind::Colon)?;
                    let ty = self.type_expr()?;
                    fields.insert(fname, FieldType { ty, card });
                    self.eat(&TokenKind::Comma);
                }
                Ok(TypeExpr::Node { root, fields })
            }
            Some(root) => Ok(TypeExpr::Basic(root)),
            None => Ok(TypeExpr::Named(name)),
        }
    }

    fn small_int(&mut self) -> PResult<u32> {
        match self.peek() {
            Some(TokenKind::Int(i)) if *i <= u32::MAX as u64 => {
                let i = *i as u32;
                self.pos += 1;
                Ok(i)
            }
            _ => self.error(&["cardinality bound"]),
        }
    }

    fn cardinality(&mut self) -> PResult<Cardinality> {
        if self.eat(&TokenKind::Question) {
            return Ok(Cardinality::OPTIONAL);
        }
        if self.eat(&TokenKind::Star) {
            return Ok(Cardinality::MANY);
        }
        if !self.at(&TokenKind::LBracket) {
            return Ok(Cardinality::ONE);
        }
        self.pos += 1;
        let lo = self.small_int()?;
        self.expect(TokenKind::Comma)?;
        let hi = if self.eat(&TokenKind::Star) {
            None
        } else {
            let hi = self.small_int()?;
            if hi < lo {
                self.pos -= 1;
                return self.error(&["an upper bound not below the lower bound"]);
            }
            Some(hi)
        };
        self.expect(TokenKind::RBracket)?;
        Ok(Cardinality::new(lo, hi))
    }

    fn interface_decl(&mut self) -> PResult<InterfaceDecl> {
        let start = self.expect_kw(Keyword::Interface)?;
        let name = self.ident()?;
        let expr = if self.eat(&TokenKind::Assign) {
            self.iface_union()?
        } else if self.at(&TokenKind::LBrace) {
            self.iface_literal()?
        } else {
            return self.error(&["`{`", "`=`"]);
        };
        Ok(InterfaceDecl {
            name,
            expr,
            span: start.to(&self.prev_span()),
        })
    }

    fn iface_union(&mut self) -> PResult<InterfaceExpr> {
        let mut lhs = self.iface_inter()?;
        while self.eat(&TokenKind::Pipe) {
            let rhs = self.iface_inter()?;
            lhs = InterfaceExpr::Union(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn iface_inter(&mut self) -> PResult<InterfaceExpr> {
        let mut lhs = self.iface_atom()?;
        while self.eat(&TokenKind::Amp) {
            let rhs = self.iface_atom()?;
            lhs = InterfaceExpr::Intersection(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn iface_atom(&mut self) -> PResult<InterfaceExpr> {
        match self.peek() {
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let e = self.iface_union()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            Some(TokenKind::LBrace) => self.iface_literal(),
            Some(TokenKind::Ident(_)) => {
                let span = self.span();
                let name = self.ident()?;
                Ok(InterfaceExpr::Ref { name, span })
            }
            _ => self.error(&["interface name", "`(`", "`{`"]),
        }
    }

    fn iface_literal(&mut self) -> PResult<InterfaceExpr> {
        self.expect(TokenKind::LBrace)?;
        let mut ops = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            let kind = if self.at_ident("RequestResponse") {
                OpKind::RequestResponse
            } else if self.at_ident("OneWay") {
                OpKind::OneWay
            } else {
                return self.error(&["`RequestResponse:`", "`OneWay:`", "`}`"]);
            };
            self.pos += 1;
            self.expect(TokenKind::Colon)?;
            loop {
                ops.push(self.operation_decl(kind)?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        Ok(InterfaceExpr::Literal(ops))
    }

    fn operation_decl(&mut self, kind: OpKind) -> PResult<OperationDecl> {
        let start = self.span();
        let name = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let request = self.type_expr()?;
        self.expect(TokenKind::RParen)?;
        let signature = match kind {
            OpKind::OneWay => Signature::OneWay { request },
            OpKind::RequestResponse => {
                self.expect(TokenKind::LParen)?;
                let response = self.type_expr()?;
                self.expect(TokenKind::RParen)?;
                Signature::RequestResponse { request, response }
            }
        };
        Ok(OperationDecl {
            name,
            signature,
            span: start.to(&self.prev_span()),
        })
    }

    fn port_decl(&mut self, direction: PortDirection) -> PResult<PortDecl> {
        let start = self.span();
        self.pos += 1;
        let name = self.ident()?;
        self.expect(TokenKind::LBrace)?;
        let mut location = None;
        let mut protocol = None;
        let mut interfaces = None;
        while !self.eat(&TokenKind::RBrace) {
            let key = match self.peek() {
                Some(TokenKind::Ident(k)) => k.clone(),
                _ => return self.error(&["`Location:`", "`Protocol:`", "`Interfaces:`", "`}`"]),
            };
            let duplicate = match key.as_str() {
                "Location" => location.is_some(),
                "Protocol" => protocol.is_some(),
                "Interfaces" => interfaces.is_some(),
                _ => return self.error(&["`Location:`", "`Protocol:`", "`Interfaces:`", "`}`"]),
            };
            if duplicate {
                return self.error(&["each port entry at most once"]);
            }
            self.pos += 1;
            self.expect(TokenKind::Colon)?;
            match key.as_str() {
                "Location" => match self.peek() {
                    Some(TokenKind::Str(s)) => {
                        location = Some(s.clone());
                        self.pos += 1;
                    }
                    _ => return self.error(&["location string"]),
                },
                "Protocol" => protocol = Some(self.protocol_decl()?),
                _ => {
                    let mut names = Vec::new();
                    loop {
                        let span = self.span();
                        names.push(NameRef {
                            name: self.ident()?,
                            span,
                        });
                        if !self.eat(&TokenKind::Comma) {
                            break;
                        }
                    }
                    interfaces = Some(names);
                }
            }
        }
        Ok(PortDecl {
            name,
            direction,
            location,
            protocol,
            interfaces: interfaces.unwrap_or_default(),
            span: start.to(&self.prev_span()),
        })
    }

    fn protocol_decl(&mut self) -> PResult<ProtocolDecl> {
        let start = self.span();
        let mut name = self.ident()?;
        while self.at(&TokenKind::Minus) && self.ident_at(1) {
            self.pos += 1;
            name.push('-');
            name.push_str(&self.ident()?);
        }
        let mut params = Vec::new();
        if self.eat(&TokenKind::LBrace) {
            while !self.eat(&TokenKind::RBrace) {
                let key = self.ident()?;
                self.expect(TokenKind::Assign)?;
                let value = self.literal()?;
                params.push((key, value));
                self.eat(&TokenKind::Comma);
            }
        }
        Ok(ProtocolDecl {
            name,
            params,
            span: start.to(&self.prev_span()),
        })
    }

    fn literal(&mut self) -> PResult<BasicValue> {
        let negative = self.eat(&TokenKind::Minus);
        let v = match self.peek() {
            Some(TokenKind::Int(i)) => int_literal(*i, negative),
            Some(TokenKind::Double(d)) => Some(BasicValue::Double(if negative { -d } else { *d })),
            Some(TokenKind::Str(s)) if !negative => Some(BasicValue::String(s.clone())),
            Some(TokenKind::Keyword(Keyword::True)) if !negative => Some(BasicValue::Bool(true)),
            Some(TokenKind::Keyword(Keyword::False)) if !negative => Some(BasicValue::Bool(false)),
            Some(TokenKind::Ident(w)) if w == "void" && !negative => Some(BasicValue::Void),
            _ => None,
        };
        match v {
            Some(v) => {
                self.pos += 1;
                Ok(v)
            }
            None => self.error(&["literal"]),
        }
    }

    fn cset_block(&mut self) -> PResult<Vec<CsetDecl>> {
        self.expect_kw(Keyword::Cset)?;
        self.expect(TokenKind::LBrace)?;
        let mut out = Vec::new();
        loop {
            let start = self.span();
            let var = self.ident()?;
            self.expect(TokenKind::Colon)?;
            let mut aliases = Vec::new();
            loop {
                aliases.push(self.cset_alias()?);
                self.eat(&TokenKind::Comma);
                if !(self.ident_at(0) && self.peek_at(1) == Some(&TokenKind::Dot)) {
                    break;
                }
            }
            out.push(CsetDecl {
                var,
                aliases,
                span: start.to(&self.prev_span()),
            });
            if self.eat(&TokenKind::RBrace) {
                return Ok(out);
            }
        }
    }

    fn cset_alias(&mut self) -> PResult<CsetAlias> {
        let start = self.span();
        let operation = self.ident()?;
        self.expect(TokenKind::Dot)?;
        let mut path = Path::root();
        loop {
            let name = self.ident()?;
            let index = if self.eat(&TokenKind::LBracket) {
                let i = match self.peek() {
                    Some(TokenKind::Int(i)) => *i as usize,
                    _ => return self.error(&["index"]),
                };
                self.pos += 1;
                self.expect(TokenKind::RBracket)?;
                i
            } else {
                0
            };
            path.push(name, index);
            if !self.eat(&TokenKind::Dot) {
                break;
            }
        }
        Ok(CsetAlias {
            operation,
            path,
            span: start.to(&self.prev_span()),
        })
    }

    fn execution_block(&mut self) -> PResult<ExecutionMode> {
        self.expect_kw(Keyword::Execution)?;
        self.expect(TokenKind::LBrace)?;
        let mode = if self.at_ident("concurrent") {
            ExecutionMode::Concurrent
        } else if self.at_ident("sequential") {
            ExecutionMode::Sequential
        } else {
            return self.error(&["`concurrent`", "`sequential`"]);
        };
        self.pos += 1;
        self.expect(TokenKind::RBrace)?;
        Ok(mode)
    }

    fn procedure(&mut self) -> PResult<Procedure> {
        let start = self.expect_kw(Keyword::Define)?;
        let name = self.ident()?;
        let body = self.block()?;
        Ok(Procedure {
            name,
            body,
            span: start.to(&self.prev_span()),
        })
    }

    // ---- behaviors ----

    /// `{ par? }`; an empty block is `nil`.
    fn block(&mut self) -> PResult<Behavior> {
        let open = self.expect(TokenKind::LBrace)?;
        if self.eat(&TokenKind::RBrace) {
            return Ok(Behavior {
                kind: BehaviorKind::Nil,
                span: open.to(&self.prev_span()),
            });
        }
        let b = self.behavior()?;
        self.expect(TokenKind::RBrace)?;
        Ok(b)
    }

    pub fn behavior(&mut self) -> PResult<Behavior> {
        let lhs = self.sequence()?;
        if self.eat(&TokenKind::Pipe) {
            let rhs = self.behavior()?;
            let span = lhs.span.to(&rhs.span);
            return Ok(Behavior {
                kind: BehaviorKind::Parallel(Box::new(lhs), Box::new(rhs)),
                span,
            });
        }
        Ok(lhs)
    }

    fn sequence(&mut self) -> PResult<Behavior> {
        let lhs = self.statement()?;
        if self.eat(&TokenKind::Semi) {
            // A trailing `;` before a closing brace is allowed.
            if self.at(&TokenKind::RBrace) || self.peek().is_none() {
                return Ok(lhs);
            }
            let rhs = self.sequence()?;
            let span = lhs.span.to(&rhs.span);
            return Ok(Behavior {
                kind: BehaviorKind::Sequence(Box::new(lhs), Box::new(rhs)),
                span,
            });
        }
        Ok(lhs)
    }

    fn statement(&mut self) -> PResult<Behavior> {
        let start = self.span();
        let kind = match self.peek() {
            Some(TokenKind::Keyword(Keyword::Nil)) => {
                self.pos += 1;
                BehaviorKind::Nil
            }
            Some(TokenKind::LBrace) => return self.block(),
            Some(TokenKind::Keyword(Keyword::If)) => return self.if_stmt(),
            Some(TokenKind::Keyword(Keyword::While)) => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let body = self.block()?;
                BehaviorKind::While {
                    cond,
                    body: Box::new(body),
                }
            }
            Some(TokenKind::Keyword(Keyword::Provide)) => {
                self.pos += 1;
                let provide = self.branches()?;
                self.expect_kw(Keyword::Until)?;
                let until = self.branches()?;
                BehaviorKind::ProvideUntil { provide, until }
            }
            Some(TokenKind::LBracket) => BehaviorKind::InputChoice(self.branches()?),
            Some(TokenKind::Keyword(Keyword::Rebind)) => {
                self.pos += 1;
                let port = self.ident()?;
                let location = self.expr()?;
                let protocol = self.expr()?;
                BehaviorKind::Rebind {
                    port,
                    location,
                    protocol,
                }
            }
            Some(TokenKind::Keyword(Keyword::Sleep)) => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                BehaviorKind::Sleep(e)
            }
            Some(TokenKind::Ident(_)) => match self.peek_at(1) {
                Some(TokenKind::LParen) => {
                    let (branch, _) = self.branch_head(start.clone())?;
                    BehaviorKind::InputChoice(vec![branch])
                }
                Some(TokenKind::At) => self.send()?,
                Some(TokenKind::Dot | TokenKind::LBracket | TokenKind::Assign) => {
                    let target = self.path_expr()?;
                    self.expect(TokenKind::Assign)?;
                    let value = self.expr()?;
                    BehaviorKind::Assign { target, value }
                }
                _ => BehaviorKind::Call(self.ident()?),
            },
            _ => return self.error(&["statement"]),
        };
        Ok(Behavior {
            kind,
            span: start.to(&self.prev_span()),
        })
    }

    fn if_stmt(&mut self) -> PResult<Behavior> {
        let start = self.expect_kw(Keyword::If)?;
        self.expect(TokenKind::LParen)?;
        let cond = self.expr()?;
        self.expect(TokenKind::RParen)?;
        let then = self.block()?;
        let otherwise = if self.at_kw(Keyword::Else) {
            self.pos += 1;
            if self.at_kw(Keyword::If) {
                Some(Box::new(self.if_stmt()?))
            } else {
                Some(Box::new(self.block()?))
            }
        } else {
            None
        };
        Ok(Behavior {
            kind: BehaviorKind::If {
                cond,
                then: Box::new(then),
                otherwise,
            },
            span: start.to(&self.prev_span()),
        })
    }

    fn send(&mut self) -> PResult<BehaviorKind> {
        let operation = self.ident()?;
        self.expect(TokenKind::At)?;
        let port = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let request = if self.at(&TokenKind::RParen) {
            None
        } else {
            Some(self.expr()?)
        };
        self.expect(TokenKind::RParen)?;
        if self.eat(&TokenKind::LParen) {
            let response = if self.at(&TokenKind::RParen) {
                None
            } else {
                Some(self.path_expr()?)
            };
            self.expect(TokenKind::RParen)?;
            Ok(BehaviorKind::SolicitResponse {
                port,
                operation,
                request,
                response,
            })
        } else {
            Ok(BehaviorKind::Notify {
                port,
                operation,
                request,
            })
        }
    }

    /// One or more `[ branch ]`, each optionally followed by a body block when
    /// the body was not written inside the brackets.
    fn branches(&mut self) -> PResult<Vec<InputBranch>> {
        let mut out = Vec::new();
        if !self.at(&TokenKind::LBracket) {
            return self.error(&["`[`"]);
        }
        while self.at(&TokenKind::LBracket) {
            let start = self.span();
            self.pos += 1;
            let (mut branch, body_inside) = self.branch_head(start.clone())?;
            self.expect(TokenKind::RBracket)?;
            if self.at(&TokenKind::LBrace) {
                if body_inside {
                    return self.error(&["`[`", "end of input choice"]);
                }
                branch.body = self.block()?;
            }
            branch.span = start.to(&self.prev_span());
            out.push(branch);
        }
        Ok(out)
    }

    /// `op ( path? ) ( '(' expr? ')' )? block?`; also reports whether a body
    /// block was present.
    fn branch_head(&mut self, start: SourceSpan) -> PResult<(InputBranch, bool)> {
        let operation = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let request = if self.at(&TokenKind::RParen) {
            None
        } else {
            Some(self.path_expr()?)
        };
        self.expect(TokenKind::RParen)?;
        let kind = if self.eat(&TokenKind::LParen) {
            let response = if self.at(&TokenKind::RParen) {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect(TokenKind::RParen)?;
            BranchKind::RequestResponse { response }
        } else {
            BranchKind::OneWay
        };
        let has_body = self.at(&TokenKind::LBrace);
        let body = if has_body {
            self.block()?
        } else {
            Behavior {
                kind: BehaviorKind::Nil,
                span: self.prev_span(),
            }
        };
        let branch = InputBranch {
            operation,
            request,
            kind,
            body,
            span: start.to(&self.prev_span()),
        };
        Ok((branch, has_body))
    }

    // ---- expressions ----

    pub fn path_expr(&mut self) -> PResult<PathExpr> {
        let start = self.span();
        let mut segments = Vec::new();
        loop {
            let name = self.ident()?;
            let index = if self.eat(&TokenKind::LBracket) {
                let e = self.expr()?;
                self.expect(TokenKind::RBracket)?;
                Some(Box::new(e))
            } else {
                None
            };
            segments.push(PathSegment { name, index });
            if !self.eat(&TokenKind::Dot) {
                break;
            }
        }
        Ok(PathExpr {
            segments,
            span: start.to(&self.prev_span()),
        })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        Some(match self.peek()? {
            TokenKind::OrOr => BinaryOp::Or,
            TokenKind::AndAnd => BinaryOp::And,
            TokenKind::EqEq => BinaryOp::Eq,
            TokenKind::NotEq => BinaryOp::Ne,
            TokenKind::Lt => BinaryOp::Lt,
            TokenKind::Le => BinaryOp::Le,
            TokenKind::Gt => BinaryOp::Gt,
            TokenKind::Ge => BinaryOp::Ge,
            TokenKind::Plus => BinaryOp::Add,
            TokenKind::Minus => BinaryOp::Sub,
            TokenKind::Star => BinaryOp::Mul,
            TokenKind::Slash => BinaryOp::Div,
            TokenKind::Percent => BinaryOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op().filter(|op| op.precedence() >= min_prec) {
            self.pos += 1;
            let rhs = self.binary(op.precedence() + 1)?;
            let span = lhs.span.to(&rhs.span);
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let kind = match self.peek() {
            Some(TokenKind::Minus) => {
                self.pos += 1;
                match self.peek() {
                    Some(TokenKind::Int(i)) => {
                        let Some(v) = int_literal(*i, true) else {
                            return self.error(&["integer literal in range"]);
                        };
                        self.pos += 1;
                        ExprKind::Literal(v)
                    }
                    Some(TokenKind::Double(d)) => {
                        let d = -*d;
                        self.pos += 1;
                        ExprKind::Literal(BasicValue::Double(d))
                    }
                    _ => ExprKind::Unary(UnaryOp::Neg, Box::new(self.unary()?)),
                }
            }
            Some(TokenKind::Bang) => {
                self.pos += 1;
                ExprKind::Unary(UnaryOp::Not, Box::new(self.unary()?))
            }
            _ => return self.primary(),
        };
        Ok(Expr {
            kind,
            span: start.to(&self.prev_span()),
        })
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let kind = match self.peek() {
            Some(TokenKind::Int(i)) => {
                let Some(v) = int_literal(*i, false) else {
                    return self.error(&["integer literal in range"]);
                };
                self.pos += 1;
                ExprKind::Literal(v)
            }
            Some(TokenKind::Double(d)) => {
                let d = *d;
                self.pos += 1;
                ExprKind::Literal(BasicValue::Double(d))
            }
            Some(TokenKind::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                ExprKind::Literal(BasicValue::String(s))
            }
            Some(TokenKind::Keyword(Keyword::True)) => {
                self.pos += 1;
                ExprKind::Literal(BasicValue::Bool(true))
            }
            Some(TokenKind::Keyword(Keyword::False)) => {
                self.pos += 1;
                ExprKind::Literal(BasicValue::Bool(false))
            }
            Some(TokenKind::Keyword(Keyword::New)) => {
                self.pos += 1;
                ExprKind::New
            }
            Some(TokenKind::Hash) => {
                self.pos += 1;
                ExprKind::Count(self.path_expr()?)
            }
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let mut e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                e.span = start.to(&self.prev_span());
                return Ok(e);
            }
            // A bare `void` is the empty value; `void.x` is still a path.
            Some(TokenKind::Ident(w))
                if w == "void" && !matches!(self.peek_at(1), Some(TokenKind::Dot | TokenKind::LBracket)) =>
            {
                self.pos += 1;
                ExprKind::Literal(BasicValue::Void)
            }
            Some(TokenKind::Ident(_)) => ExprKind::Path(self.path_expr()?),
            _ => return self.error(&["expression"]),
        };
        Ok(Expr {
            kind,
            span: start.to(&self.prev_span()),
        })
    }
}

fn int_literal(magnitude: u64, negative: bool) -> Option<BasicValue> {
    if negative {
        if magnitude == 1u64 << 63 {
            Some(BasicValue::Int(i64::MIN))
        } else {
            i64::try_from(magnitude).ok().map(|i| BasicValue::Int(-i))
        }
    } else {
        i64::try_from(magnitude).ok().map(BasicValue::Int)
    }
}
