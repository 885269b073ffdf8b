//! Tokenizer and recursive-descent parser.

use super::ast::{BinOp, Block, Expr, Field, Function, Program, Stmt, UnOp};
use super::DslError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCTS: [&str; 24] = [
    "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", "[", "]", ",", ";", ".", "=", "<", ">",
    "+", "-", "*", "/", "%", "!",
];

fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, msg: String| DslError::Parse { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i);
        } else if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i);
            }
        } else if c.is_ascii_digit() {
            let start = i;
            let digits = |from: usize| (from..chars.len()).take_while(|&j| chars[j].is_ascii_digit()).count();
            let mut n = digits(i);
            if chars.get(i + n) == Some(&'.') && chars.get(i + n + 1).is_some_and(|d| d.is_ascii_digit()) {
                n += 1 + digits(i + n + 1);
            }
            advance(n, &mut i);
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let n = j - i;
                    advance(n, &mut i);
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| err(tl, tc, format!("bad number {text:?}")))?;
            tokens.push(Token { tok: Tok::Num(v), line: tl, col: tc });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                advance(1, &mut i);
            }
            let text: String = chars[start..i].iter().collect();
            tokens.push(Token { tok: Tok::Ident(text), line: tl, col: tc });
        } else if c == '"' {
            advance(1, &mut i);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(tl, tc, "unterminated string".into())),
                    Some('"') => {
                        advance(1, &mut i);
                        break;
                    }
                    Some('\\') => {
                        let next = *chars.get(i + 1).ok_or_else(|| err(tl, tc, "unterminated string".into()))?;
                        s.push(next);
                        advance(2, &mut i);
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(1, &mut i);
                    }
                }
            }
            tokens.push(Token { tok: Tok::Str(s), line: tl, col: tc });
        } else {
            let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) else {
                return Err(err(tl, tc, format!("unexpected character {c:?}")));
            };
            advance(p.len(), &mut i);
            tokens.push(Token { tok: Tok::Punct(*p), line: tl, col: tc });
        }
    }
    tokens.push(Token { tok: Tok::Eof, line, col });
    Ok(tokens)
}

const KEYWORDS: [&str; 13] = [
    "fn", "let", "if", "else", "for", "in", "while", "return", "true", "false", "and", "or", "not",
];

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)].tok
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, DslError> {
        let t = &self.tokens[self.pos];
        Err(DslError::Parse {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), DslError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), DslError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn program(&mut self) -> Result<Program, DslError> {
        let mut functions = Vec::new();
        while *self.peek() != Tok::Eof {
            functions.push(self.function()?);
        }
        Ok(Program { functions })
    }

    fn function(&mut self) -> Result<Function, DslError> {
        self.expect_kw("fn")?;
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                params.push(self.ident()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let body = self.block()?;
        Ok(Function { name, params, body })
    }

    fn block(&mut self) -> Result<Block, DslError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return self.error("unclosed block");
            }
            if self.eat_punct(";") {
                continue;
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, DslError> {
        let stmt = if self.is_kw("let") {
            self.bump();
            let name = self.ident()?;
            self.expect_punct("=")?;
            Stmt::Let(name, self.expr()?)
        } else if self.is_kw("if") {
            return self.if_stmt();
        } else if self.is_kw("for") {
            self.bump();
            let var = self.ident()?;
            self.expect_kw("in")?;
            let iter = self.expr()?;
            return Ok(Stmt::For(var, iter, self.block()?));
        } else if self.is_kw("while") {
            self.bump();
            let cond = self.expr()?;
            return Ok(Stmt::While(cond, self.block()?));
        } else if self.is_kw("return") {
            self.bump();
            Stmt::Return(self.expr()?)
        } else if self.is_kw("debug") && matches!(self.peek_at(1), Tok::Punct("(")) {
            self.bump();
            self.bump();
            let args = self.args(")")?;
            Stmt::Debug(args)
        } else if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Punct("=")) {
            let name = self.ident()?;
            self.bump();
            Stmt::Assign(name, self.expr()?)
        } else {
            Stmt::Expr(self.expr()?)
        };
        self.eat_punct(";");
        Ok(stmt)
    }

    fn if_stmt(&mut self) -> Result<Stmt, DslError> {
        self.expect_kw("if")?;
        let cond = self.expr()?;
        let then = self.block()?;
        let other = if self.is_kw("else") {
            self.bump();
            if self.is_kw("if") {
                Some(vec![self.if_stmt()?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt::If(cond, then, other))
    }

    fn args(&mut self, close: &str) -> Result<Vec<Expr>, DslError> {
        let mut args = Vec::new();
        if !self.eat_punct(close) {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(close)?;
        }
        Ok(args)
    }

    fn binop(&self) -> Option<BinOp> {
        let op = match self.peek() {
            Tok::Punct(p) => match *p {
                "||" => BinOp::Or,
                "&&" => BinOp::And,
                "==" => BinOp::Eq,
                "!=" => BinOp::Ne,
                "<" => BinOp::Lt,
                "<=" => BinOp::Le,
                ">" => BinOp::Gt,
                ">=" => BinOp::Ge,
                "+" => BinOp::Add,
                "-" => BinOp::Sub,
                "*" => BinOp::Mul,
                "/" => BinOp::Div,
                "%" => BinOp::Rem,
                _ => return None,
            },
            Tok::Ident(s) if s == "and" => BinOp::And,
            Tok::Ident(s) if s == "or" => BinOp::Or,
            _ => return None,
        };
        Some(op)
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.eat_punct("-") {
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Num(v) => Expr::Num(-v),
                other => Expr::Unary(UnOp::Neg, Box::new(other)),
            });
        }
        if self.eat_punct("!") || (self.is_kw("not") && {
            self.bump();
            true
        }) {
            let inner = self.unary()?;
            return Ok(Expr::Unary(UnOp::Not, Box::new(inner)));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, DslError> {
        let mut e = self.primary()?;
        loop {
            if self.eat_punct(".") {
                let field = match self.ident()?.as_str() {
                    "x" => Field::X,
                    "y" => Field::Y,
                    other => return self.error(format!("unknown field `{other}`, expected x or y")),
                };
                e = Expr::Field(Box::new(e), field);
            } else if self.eat_punct("[") {
                let idx = self.expr()?;
                self.expect_punct("]")?;
                e = Expr::Index(Box::new(e), Box::new(idx));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("[") => {
                self.bump();
                Ok(Expr::List(self.args("]")?))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::Bool(s == "true"))
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.eat_punct("(") {
                    Ok(Expr::Call(name, self.args(")")?))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            other => self.error(format!("expected expression, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Num(v) => format!("number {v}"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse(src: &str) -> Result<Program, DslError> {
    let tokens = lex(src)?;
    Parser { tokens, pos: 0 }.program()
}
