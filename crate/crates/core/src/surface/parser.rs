use super::ast::*;
use super::lexer::{lex, Tok};
use super::{ErrorKind, Span, SurfaceSyntaxError};

pub fn parse_program(text: &str) -> Result<Program, SurfaceSyntaxError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let mut decls = Vec::new();
    while p.peek() != &Tok::Eof {
        decls.push(p.decl()?);
    }
    Ok(Program { decls })
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, SurfaceSyntaxError> {
        Err(SurfaceSyntaxError {
            span: self.span(),
            message: format!("expected {expected}, found {}", self.peek().describe()),
            kind: ErrorKind::Parse,
        })
    }

    fn expect(&mut self, t: Tok) -> Result<Span, SurfaceSyntaxError> {
        if *self.peek() == t {
            Ok(self.bump().1)
        } else {
            self.error(&t.describe())
        }
    }

    fn up_id(&mut self, what: &str) -> Result<(String, Span), SurfaceSyntaxError> {
        match self.peek().clone() {
            Tok::UpId(s) => Ok((s, self.bump().1)),
            _ => self.error(what),
        }
    }

    fn lo_id(&mut self, what: &str) -> Result<(String, Span), SurfaceSyntaxError> {
        match self.peek().clone() {
            Tok::LoId(s) => Ok((s, self.bump().1)),
            _ => self.error(what),
        }
    }

    fn decl(&mut self) -> Result<Decl, SurfaceSyntaxError> {
        let span = self.span();
        match self.peek() {
            Tok::Data => {
                self.bump();
                let (name, _) = self.up_id("a datatype name")?;
                let mut params = Vec::new();
                while let Tok::LoId(_) = self.peek() {
                    params.push(self.lo_id("a type parameter")?.0);
                }
                self.expect(Tok::Eq)?;
                let mut ctors = vec![self.ctor()?];
                while *self.peek() == Tok::Bar {
                    self.bump();
                    ctors.push(self.ctor()?);
                }
                Ok(Decl::Data(DataDecl { name, params, ctors, span }))
            }
            Tok::Extern => {
                self.bump();
                let (name, _) = self.lo_id("a variable name")?;
                self.expect(Tok::Colon)?;
                let scheme = self.scheme()?;
                Ok(Decl::Extern(ExternDecl { name, scheme, span }))
            }
            Tok::Let => {
                self.bump();
                let (name, _) = self.lo_id("a variable name")?;
                self.expect(Tok::Colon)?;
                let scheme = self.scheme()?;
                self.expect(Tok::Eq)?;
                let body = self.expr()?;
                Ok(Decl::Let(LetDecl { name, scheme, body, span }))
            }
            _ => self.error("`data`, `extern` or `let`"),
        }
    }

    fn ctor(&mut self) -> Result<CtorDecl, SurfaceSyntaxError> {
        let (name, span) = self.up_id("a constructor name")?;
        let mut args = Vec::new();
        while self.starts_atype() {
            args.push(self.atype()?);
        }
        Ok(CtorDecl { name, args, span })
    }

    fn scheme(&mut self) -> Result<SchemeExpr, SurfaceSyntaxError> {
        let vars = if *self.peek() == Tok::Forall {
            self.bump();
            let mut vs = vec![self.lo_id("a type variable")?.0];
            while let Tok::LoId(_) = self.peek() {
                vs.push(self.lo_id("a type variable")?.0);
            }
            self.expect(Tok::Dot)?;
            Some(vs)
        } else {
            None
        };
        Ok(SchemeExpr { vars, ty: self.ty()? })
    }

    fn starts_atype(&self) -> bool {
        matches!(self.peek(), Tok::UpId(_) | Tok::LoId(_) | Tok::LParen)
    }

    fn ty(&mut self) -> Result<TypeExpr, SurfaceSyntaxError> {
        let lhs = self.btype()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            Ok(TypeExpr::Arrow(Box::new(lhs), Box::new(self.ty()?)))
        } else {
            Ok(lhs)
        }
    }

    fn btype(&mut self) -> Result<TypeExpr, SurfaceSyntaxError> {
        if let Tok::UpId(_) = self.peek() {
            let (name, span) = self.up_id("a type")?;
            let mut args = Vec::new();
            while self.starts_atype() {
                args.push(self.atype()?);
            }
            Ok(TypeExpr::Con(name, args, span))
        } else {
            self.atype()
        }
    }

    fn atype(&mut self) -> Result<TypeExpr, SurfaceSyntaxError> {
        match self.peek().clone() {
            Tok::UpId(name) => Ok(TypeExpr::Con(name, Vec::new(), self.bump().1)),
            Tok::LoId(name) => Ok(TypeExpr::Var(name, self.bump().1)),
            Tok::LParen => {
                self.bump();
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            _ => self.error("a type"),
        }
    }

    fn expr(&mut self) -> Result<Expr, SurfaceSyntaxError> {
        let span = self.span();
        match self.peek() {
            Tok::Backslash => {
                self.bump();
                let (param, _) = self.lo_id("a parameter name")?;
                let ann = if *self.peek() == Tok::Colon {
                    self.bump();
                    Some(self.atype()?)
                } else {
                    None
                };
                self.expect(Tok::Arrow)?;
                let body = self.expr()?;
                Ok(Expr::Lam { param, ann, body: Box::new(body), span })
            }
            Tok::Case => {
                self.bump();
                let scrut = self.expr()?;
                self.expect(Tok::Of)?;
                self.expect(Tok::LBrace)?;
                let mut arms = vec![self.arm()?];
                while *self.peek() == Tok::Semi {
                    self.bump();
                    if *self.peek() == Tok::RBrace {
                        break;
                    }
                    arms.push(self.arm()?);
                }
                self.expect(Tok::RBrace)?;
                Ok(Expr::Case { scrut: Box::new(scrut), arms, span })
            }
            _ => {
                let mut e = self.aexpr()?;
                while self.starts_aexpr() {
                    let a = self.aexpr()?;
                    e = Expr::App(Box::new(e), Box::new(a));
                }
                Ok(e)
            }
        }
    }

    fn arm(&mut self) -> Result<Arm, SurfaceSyntaxError> {
        let span = self.span();
        let pat = match self.peek() {
            Tok::Underscore => {
                self.bump();
                Pattern::Wildcard
            }
            Tok::UpId(_) => {
                let (name, _) = self.up_id("a constructor")?;
                let mut binders = Vec::new();
                while let Tok::LoId(_) = self.peek() {
                    binders.push(self.lo_id("a binder")?.0);
                }
                Pattern::Ctor(name, binders)
            }
            _ => return self.error("a pattern"),
        };
        self.expect(Tok::Arrow)?;
        let body = self.expr()?;
        Ok(Arm { pat, body, span })
    }

    fn starts_aexpr(&self) -> bool {
        matches!(self.peek(), Tok::LoId(_) | Tok::UpId(_) | Tok::Int(_) | Tok::Str(_) | Tok::LParen)
    }

    fn aexpr(&mut self) -> Result<Expr, SurfaceSyntaxError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::LoId(v) => {
                self.bump();
                Ok(Expr::Var(v, span))
            }
            Tok::UpId(c) => {
                self.bump();
                Ok(Expr::Con(c, span))
            }
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n, span))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s, span))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => self.error("an expression"),
        }
    }
}
