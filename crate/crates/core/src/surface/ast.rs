//! Surface syntax as parsed, before name resolution.

use super::Span;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub decls: Vec<Decl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    Data(DataDecl),
    Extern(ExternDecl),
    Let(LetDecl),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataDecl {
    pub name: String,
    pub params: Vec<String>,
    pub ctors: Vec<CtorDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CtorDecl {
    pub name: String,
    pub args: Vec<TypeExpr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternDecl {
    pub name: String,
    pub scheme: SchemeExpr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LetDecl {
    pub name: String,
    pub scheme: SchemeExpr,
    pub body: Expr,
    pub span: Span,
}

/// `forall a b. t`; without `forall`, the free type variables are
/// quantified implicitly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeExpr {
    pub vars: Option<Vec<String>>,
    pub ty: TypeExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeExpr {
    /// A named type applied to arguments; `Int` and `String` are names too.
    Con(String, Vec<TypeExpr>, Span),
    Var(String, Span),
    Arrow(Box<TypeExpr>, Box<TypeExpr>),
}

impl TypeExpr {
    pub fn span(&self) -> Span {
        match self {
            TypeExpr::Con(_, _, s) | TypeExpr::Var(_, s) => *s,
            TypeExpr::Arrow(a, _) => a.span(),
        }
    }

    /// Type variables in order of first occurrence.
    pub fn free_vars(&self, out: &mut Vec<String>) {
        match self {
            TypeExpr::Con(_, args, _) => args.iter().for_each(|a| a.free_vars(out)),
            TypeExpr::Var(v, _) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            TypeExpr::Arrow(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Var(String, Span),
    Con(String, Span),
    Int(i64, Span),
    Str(String, Span),
    App(Box<Expr>, Box<Expr>),
    Lam { param: String, ann: Option<TypeExpr>, body: Box<Expr>, span: Span },
    Case { scrut: Box<Expr>, arms: Vec<Arm>, span: Span },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Var(_, s) | Expr::Con(_, s) | Expr::Int(_, s) | Expr::Str(_, s) => *s,
            Expr::App(f, _) => f.span(),
            Expr::Lam { span, .. } | Expr::Case { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arm {
    pub pat: Pattern,
    pub body: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Ctor(String, Vec<String>),
    Wildcard,
}

/// Resets every location, so that programs can be compared structurally.
pub fn strip_spans(p: &Program) -> Program {
    let z = Span::default();
    fn ty(t: &TypeExpr) -> TypeExpr {
        match t {
            TypeExpr::Con(n, args, _) => TypeExpr::Con(n.clone(), args.iter().map(ty).collect(), Span::default()),
            TypeExpr::Var(v, _) => TypeExpr::Var(v.clone(), Span::default()),
            TypeExpr::Arrow(a, b) => TypeExpr::Arrow(Box::new(ty(a)), Box::new(ty(b))),
        }
    }
    fn expr(e: &Expr) -> Expr {
        let z = Span::default();
        match e {
            Expr::Var(v, _) => Expr::Var(v.clone(), z),
            Expr::Con(c, _) => Expr::Con(c.clone(), z),
            Expr::Int(n, _) => Expr::Int(*n, z),
            Expr::Str(s, _) => Expr::Str(s.clone(), z),
            Expr::App(f, a) => Expr::App(Box::new(expr(f)), Box::new(expr(a))),
            Expr::Lam { param, ann, body, .. } => Expr::Lam {
                param: param.clone(),
                ann: ann.as_ref().map(ty),
                body: Box::new(expr(body)),
                span: z,
            },
            Expr::Case { scrut, arms, .. } => Expr::Case {
                scrut: Box::new(expr(scrut)),
                arms: arms.iter().map(|a| Arm { pat: a.pat.clone(), body: expr(&a.body), span: z }).collect(),
                span: z,
            },
        }
    }
    let scheme = |s: &SchemeExpr| SchemeExpr { vars: s.vars.clone(), ty: ty(&s.ty) };
    Program {
        decls: p
            .decls
            .iter()
            .map(|d| match d {
                Decl::Data(d) => Decl::Data(DataDecl {
                    name: d.name.clone(),
                    params: d.params.clone(),
                    ctors: d
                        .ctors
                        .iter()
                        .map(|c| CtorDecl { name: c.name.clone(), args: c.args.iter().map(ty).collect(), span: z })
                        .collect(),
                    span: z,
                }),
                Decl::Extern(e) => Decl::Extern(ExternDecl { name: e.name.clone(), scheme: scheme(&e.scheme), span: z }),
                Decl::Let(l) => {
                    Decl::Let(LetDecl { name: l.name.clone(), scheme: scheme(&l.scheme), body: expr(&l.body), span: z })
                }
            })
            .collect(),
    }
}
