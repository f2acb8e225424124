//! Elaborated programs: every node carries its underlying type.

use crate::constraint::SiteId;
use crate::surface::Span;
use crate::types::{CtorId, DatatypeEnv, UScheme, UType};

#[derive(Debug, Clone)]
pub struct CoreProgram {
    pub env: DatatypeEnv,
    pub items: Vec<Item>,
    pub sites: Vec<CaseSite>,
    pub warnings: Vec<(Span, String)>,
}

impl CoreProgram {
    pub fn site(&self, s: SiteId) -> &CaseSite {
        &self.sites[s.0 as usize]
    }

    pub fn lookup_item(&self, name: &str) -> Option<usize> {
        self.items.iter().position(|i| i.name() == name)
    }

    pub fn let_count(&self) -> usize {
        self.items.iter().filter(|i| matches!(i, Item::Let { .. })).count()
    }
}

#[derive(Debug, Clone)]
pub enum Item {
    Extern { name: String, scheme: UScheme, span: Span },
    Let { name: String, scheme: UScheme, body: Expr, span: Span },
}

impl Item {
    pub fn name(&self) -> &str {
        match self {
            Item::Extern { name, .. } | Item::Let { name, .. } => name,
        }
    }

    pub fn scheme(&self) -> &UScheme {
        match self {
            Item::Extern { scheme, .. } | Item::Let { scheme, .. } => scheme,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Item::Extern { span, .. } | Item::Let { span, .. } => *span,
        }
    }
}

/// A case expression's location, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseSite {
    pub def: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarRef {
    /// A lambda or case binder.
    Local(String),
    /// A top-level item, by index.
    Global(usize),
    /// The definition currently being defined.
    SelfRef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub ty: UType,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Int(i64),
    Str(String),
    /// A constructor applied to explicit type arguments.
    Con { ctor: CtorId, type_args: Vec<UType> },
    Var { var: VarRef, type_args: Vec<UType> },
    App(Box<Expr>, Box<Expr>),
    Lam { param: String, param_ty: UType, body: Box<Expr> },
    Case { scrut: Box<Expr>, arms: Vec<CoreArm>, site: SiteId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreArm {
    pub ctor: CtorId,
    pub binders: Vec<String>,
    pub body: Expr,
    /// Produced by expanding a wildcard arm.
    pub from_wildcard: bool,
}

impl Expr {
    /// Calls `f` on this node and every descendant, parents first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Str(_) | ExprKind::Con { .. } | ExprKind::Var { .. } => {}
            ExprKind::App(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            ExprKind::Lam { body, .. } => body.walk(f),
            ExprKind::Case { scrut, arms, .. } => {
                scrut.walk(f);
                for a in arms {
                    a.body.walk(f);
                }
            }
        }
    }
}
