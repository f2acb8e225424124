//! Name resolution and underlying type inference.

use std::collections::{HashMap, HashSet};

use super::ast::{self, Decl, Pattern, SchemeExpr, TypeExpr};
use super::{ErrorKind, Span, SurfaceSyntaxError};
use crate::constraint::SiteId;
use crate::program::{CaseSite, CoreArm, CoreProgram, Expr, ExprKind, Item, VarRef};
use crate::types::{BaseType, DatatypeEnv, DatatypeEnvBuilder, EnvError, UScheme, UType};

fn error<T>(span: Span, kind: ErrorKind, message: impl Into<String>) -> Result<T, SurfaceSyntaxError> {
    Err(SurfaceSyntaxError { span, message: message.into(), kind })
}

pub fn elaborate(p: &ast::Program) -> Result<CoreProgram, SurfaceSyntaxError> {
    let env = build_env(p)?;
    let mut warnings = Vec::new();
    for d in p.decls.iter().filter_map(|d| match d {
        Decl::Data(d) => Some(d),
        _ => None,
    }) {
        let id = env.lookup_datatype(&d.name).unwrap();
        if !env.is_positive(id) {
            warnings.push((d.span, format!("datatype `{}` occurs negatively within its own slice", d.name)));
        }
    }
    let mut el = Elaborator { env: &env, items: Vec::new(), item_names: HashMap::new(), sites: Vec::new() };
    let later: HashSet<&str> = p
        .decls
        .iter()
        .filter_map(|d| match d {
            Decl::Let(l) => Some(l.name.as_str()),
            Decl::Extern(e) => Some(e.name.as_str()),
            Decl::Data(_) => None,
        })
        .collect();
    for d in &p.decls {
        match d {
            Decl::Data(_) => {}
            Decl::Extern(e) => {
                el.check_fresh_name(&e.name, e.span)?;
                let scheme = resolve_scheme(&env, &e.scheme)?;
                el.push_item(Item::Extern { name: e.name.clone(), scheme, span: e.span });
            }
            Decl::Let(l) => {
                el.check_fresh_name(&l.name, l.span)?;
                let scheme = resolve_scheme(&env, &l.scheme)?;
                let body = el.definition(l, &scheme, &later)?;
                el.push_item(Item::Let { name: l.name.clone(), scheme, body, span: l.span });
            }
        }
    }
    let Elaborator { items, sites, .. } = el;
    Ok(CoreProgram { env, items, sites, warnings })
}

fn build_env(p: &ast::Program) -> Result<DatatypeEnv, SurfaceSyntaxError> {
    let datas: Vec<&ast::DataDecl> = p
        .decls
        .iter()
        .filter_map(|d| match d {
            Decl::Data(d) => Some(d),
            _ => None,
        })
        .collect();
    let mut b = DatatypeEnvBuilder::new();
    let mut spans = HashMap::new();
    for d in &datas {
        if d.name == "Int" || d.name == "String" {
            return error(d.span, ErrorKind::Scope, format!("`{}` is a built-in type", d.name));
        }
        let mut seen = HashSet::new();
        for a in &d.params {
            if !seen.insert(a) {
                return error(d.span, ErrorKind::Scope, format!("duplicate type parameter `{a}` in `{}`", d.name));
            }
        }
        b.declare(&d.name, d.params.clone()).or_else(|e| error(d.span, ErrorKind::Scope, e.to_string()))?;
        spans.insert(d.name.clone(), d.span);
    }
    for d in &datas {
        let id = b.lookup(&d.name).unwrap();
        for c in &d.ctors {
            let args = c
                .args
                .iter()
                .map(|t| resolve_type(t, &|n| b.lookup(n).map(|id| b.params(id).len()), &|n| b.lookup(n), &d.params))
                .collect::<Result<Vec<_>, _>>()?;
            b.add_ctor(id, &c.name, args).or_else(|e| error(c.span, ErrorKind::Scope, e.to_string()))?;
        }
    }
    b.finish().or_else(|e| {
        let span = match &e {
            EnvError::TooManyCtors { name, .. } | EnvError::NonRegular(name) => spans.get(name).copied(),
            _ => None,
        };
        error(span.unwrap_or_default(), ErrorKind::Type, e.to_string())
    })
}

fn resolve_type(
    t: &TypeExpr,
    arity: &dyn Fn(&str) -> Option<usize>,
    lookup: &dyn Fn(&str) -> Option<crate::types::DatatypeId>,
    tyvars: &[String],
) -> Result<UType, SurfaceSyntaxError> {
    match t {
        TypeExpr::Var(v, span) => {
            if tyvars.contains(v) {
                Ok(UType::Var(v.clone()))
            } else {
                error(*span, ErrorKind::Scope, format!("unknown type variable `{v}`"))
            }
        }
        TypeExpr::Con(n, args, span) => {
            let base = match n.as_str() {
                "Int" => Some(BaseType::Int),
                "String" => Some(BaseType::String),
                _ => None,
            };
            if let Some(b) = base {
                if !args.is_empty() {
                    return error(*span, ErrorKind::Type, format!("`{n}` takes no type arguments"));
                }
                return Ok(UType::Base(b));
            }
            let Some(d) = lookup(n) else {
                return error(*span, ErrorKind::Scope, format!("unknown type `{n}`"));
            };
            let expected = arity(n).unwrap();
            if expected != args.len() {
                return error(
                    *span,
                    ErrorKind::Type,
                    format!("`{n}` expects {expected} type argument(s), given {}", args.len()),
                );
            }
            let args = args.iter().map(|a| resolve_type(a, arity, lookup, tyvars)).collect::<Result<_, _>>()?;
            Ok(UType::Data(d, args))
        }
        TypeExpr::Arrow(a, b) => Ok(UType::arrow(
            resolve_type(a, arity, lookup, tyvars)?,
            resolve_type(b, arity, lookup, tyvars)?,
        )),
    }
}

fn resolve_in_env(env: &DatatypeEnv, t: &TypeExpr, tyvars: &[String]) -> Result<UType, SurfaceSyntaxError> {
    resolve_type(
        t,
        &|n| env.lookup_datatype(n).map(|d| env.datatype(d).params.len()),
        &|n| env.lookup_datatype(n),
        tyvars,
    )
}

fn resolve_scheme(env: &DatatypeEnv, s: &SchemeExpr) -> Result<UScheme, SurfaceSyntaxError> {
    let vars = match &s.vars {
        Some(vs) => {
            let mut seen = HashSet::new();
            for v in vs {
                if !seen.insert(v) {
                    return error(s.ty.span(), ErrorKind::Scope, format!("duplicate type variable `{v}`"));
                }
            }
            vs.clone()
        }
        None => {
            let mut vs = Vec::new();
            s.ty.free_vars(&mut vs);
            vs
        }
    };
    let body = resolve_in_env(env, &s.ty, &vars)?;
    Ok(UScheme { vars, body })
}

struct Elaborator<'a> {
    env: &'a DatatypeEnv,
    items: Vec<Item>,
    item_names: HashMap<String, usize>,
    sites: Vec<CaseSite>,
}

impl Elaborator<'_> {
    fn check_fresh_name(&self, name: &str, span: Span) -> Result<(), SurfaceSyntaxError> {
        if self.item_names.contains_key(name) {
            return error(span, ErrorKind::Scope, format!("duplicate definition of `{name}`"));
        }
        Ok(())
    }

    fn push_item(&mut self, item: Item) {
        self.item_names.insert(item.name().to_string(), self.items.len());
        self.items.push(item);
    }

    fn definition(
        &mut self,
        l: &ast::LetDecl,
        scheme: &UScheme,
        later: &HashSet<&str>,
    ) -> Result<Expr, SurfaceSyntaxError> {
        let mut cx = DefCx {
            env: self.env,
            items: &self.items,
            item_names: &self.item_names,
            later,
            name: &l.name,
            scheme,
            locals: Vec::new(),
            metas: Unifier::default(),
            sites: &mut self.sites,
        };
        let body = cx.expr(&l.body)?;
        cx.unify(&body.ty, &scheme.body, l.body.span())?;
        let mut body = body;
        cx.metas.zonk_expr(&mut body);
        Ok(body)
    }
}

struct DefCx<'a> {
    env: &'a DatatypeEnv,
    items: &'a [Item],
    item_names: &'a HashMap<String, usize>,
    later: &'a HashSet<&'a str>,
    name: &'a str,
    scheme: &'a UScheme,
    locals: Vec<(String, UType)>,
    metas: Unifier,
    sites: &'a mut Vec<CaseSite>,
}

/// Metavariables are type variables named `?n`, which no source type can spell.
#[derive(Default)]
struct Unifier {
    solved: Vec<Option<UType>>,
}

fn meta_index(t: &UType) -> Option<usize> {
    match t {
        UType::Var(v) => v.strip_prefix('?').and_then(|n| n.parse().ok()),
        _ => None,
    }
}

impl Unifier {
    fn fresh(&mut self) -> UType {
        self.solved.push(None);
        UType::Var(format!("?{}", self.solved.len() - 1))
    }

    fn shallow(&self, t: &UType) -> UType {
        let mut t = t.clone();
        while let Some(i) = meta_index(&t) {
            match &self.solved[i] {
                Some(u) => t = u.clone(),
                None => break,
            }
        }
        t
    }

    fn zonk(&self, t: &UType) -> UType {
        match self.shallow(t) {
            t @ UType::Var(_) if meta_index(&t).is_some() => t,
            UType::Data(d, args) => UType::Data(d, args.iter().map(|a| self.zonk(a)).collect()),
            UType::Arrow(a, b) => UType::arrow(self.zonk(&a), self.zonk(&b)),
            t => t,
        }
    }

    /// Fills unresolved metavariables with `Int`; they are unconstrained, so
    /// any choice is a valid typing.
    fn zonk_final(&self, t: &UType) -> UType {
        match self.zonk(t) {
            t if meta_index(&t).is_some() => UType::Base(BaseType::Int),
            UType::Var(v) => UType::Var(v),
            UType::Data(d, args) => UType::Data(d, args.iter().map(|a| self.zonk_final(a)).collect()),
            UType::Arrow(a, b) => UType::arrow(self.zonk_final(&a), self.zonk_final(&b)),
            t => t,
        }
    }

    fn occurs(&self, i: usize, t: &UType) -> bool {
        match self.shallow(t) {
            t @ UType::Var(_) => meta_index(&t) == Some(i),
            UType::Base(_) => false,
            UType::Data(_, args) => args.iter().any(|a| self.occurs(i, a)),
            UType::Arrow(a, b) => self.occurs(i, &a) || self.occurs(i, &b),
        }
    }

    fn unify(&mut self, a: &UType, b: &UType) -> Result<(), String> {
        let a = self.shallow(a);
        let b = self.shallow(b);
        match (meta_index(&a), meta_index(&b)) {
            (Some(i), Some(j)) if i == j => return Ok(()),
            (Some(i), _) => return self.bind(i, &b),
            (_, Some(j)) => return self.bind(j, &a),
            _ => {}
        }
        match (&a, &b) {
            (UType::Var(x), UType::Var(y)) if x == y => Ok(()),
            (UType::Base(x), UType::Base(y)) if x == y => Ok(()),
            (UType::Data(d, xs), UType::Data(e, ys)) if d == e && xs.len() == ys.len() => {
                xs.iter().zip(ys).try_for_each(|(x, y)| self.unify(x, y))
            }
            (UType::Arrow(a1, b1), UType::Arrow(a2, b2)) => {
                self.unify(a1, a2)?;
                self.unify(b1, b2)
            }
            _ => Err(String::new()),
        }
    }

    fn bind(&mut self, i: usize, t: &UType) -> Result<(), String> {
        if self.occurs(i, t) {
            return Err("infinite type".into());
        }
        self.solved[i] = Some(t.clone());
        Ok(())
    }

    fn zonk_expr(&self, e: &mut Expr) {
        e.ty = self.zonk_final(&e.ty);
        match &mut e.kind {
            ExprKind::Int(_) | ExprKind::Str(_) => {}
            ExprKind::Con { type_args, .. } | ExprKind::Var { type_args, .. } => {
                for t in type_args {
                    *t = self.zonk_final(t);
                }
            }
            ExprKind::App(a, b) => {
                self.zonk_expr(a);
                self.zonk_expr(b);
            }
            ExprKind::Lam { param_ty, body, .. } => {
                *param_ty = self.zonk_final(param_ty);
                self.zonk_expr(body);
            }
            ExprKind::Case { scrut, arms, .. } => {
                self.zonk_expr(scrut);
                for a in arms {
                    self.zonk_expr(&mut a.body);
                }
            }
        }
    }
}

impl DefCx<'_> {
    fn unify(&mut self, a: &UType, b: &UType, span: Span) -> Result<(), SurfaceSyntaxError> {
        self.metas.unify(a, b).or_else(|why| {
            let (a, b) = (self.metas.zonk(a), self.metas.zonk(b));
            let mut msg = format!("type mismatch: `{}` vs `{}`", a.display(self.env), b.display(self.env));
            if !why.is_empty() {
                msg = format!("{msg} ({why})");
            }
            error(span, ErrorKind::Type, msg)
        })
    }

    fn instantiate(&mut self, s: &UScheme) -> (UType, Vec<UType>) {
        let args: Vec<_> = s.vars.iter().map(|_| self.metas.fresh()).collect();
        (s.instantiate(&args), args)
    }

    fn expr(&mut self, e: &ast::Expr) -> Result<Expr, SurfaceSyntaxError> {
        let env = self.env;
        match e {
            ast::Expr::Int(n, span) => Ok(Expr { kind: ExprKind::Int(*n), ty: UType::Base(BaseType::Int), span: *span }),
            ast::Expr::Str(s, span) => {
                Ok(Expr { kind: ExprKind::Str(s.clone()), ty: UType::Base(BaseType::String), span: *span })
            }
            ast::Expr::Con(name, span) => {
                let Some(k) = env.lookup_ctor(name) else {
                    return error(*span, ErrorKind::Scope, format!("unknown constructor `{name}`"));
                };
                let (ty, type_args) = self.instantiate(&env.ctor_scheme(k));
                Ok(Expr { kind: ExprKind::Con { ctor: k, type_args }, ty, span: *span })
            }
            ast::Expr::Var(name, span) => {
                if let Some((_, t)) = self.locals.iter().rev().find(|(n, _)| n == name) {
                    let ty = t.clone();
                    return Ok(Expr { kind: ExprKind::Var { var: VarRef::Local(name.clone()), type_args: vec![] }, ty, span: *span });
                }
                if name == self.name {
                    let ty = self.scheme.body.clone();
                    return Ok(Expr { kind: ExprKind::Var { var: VarRef::SelfRef, type_args: vec![] }, ty, span: *span });
                }
                if let Some(&i) = self.item_names.get(name) {
                    let (ty, type_args) = self.instantiate(&self.items[i].scheme().clone());
                    return Ok(Expr { kind: ExprKind::Var { var: VarRef::Global(i), type_args }, ty, span: *span });
                }
                if self.later.contains(name.as_str()) {
                    return error(
                        *span,
                        ErrorKind::Scope,
                        format!("`{name}` is defined later; definitions must precede their uses and mutual recursion is not supported"),
                    );
                }
                error(*span, ErrorKind::Scope, format!("unknown variable `{name}`"))
            }
            ast::Expr::App(f, a) => {
                let ef = self.expr(f)?;
                let ea = self.expr(a)?;
                let r = self.metas.fresh();
                self.unify(&ef.ty, &UType::arrow(ea.ty.clone(), r.clone()), a.span())?;
                let span = ef.span;
                Ok(Expr { kind: ExprKind::App(Box::new(ef), Box::new(ea)), ty: r, span })
            }
            ast::Expr::Lam { param, ann, body, span } => {
                let param_ty = match ann {
                    Some(t) => resolve_in_env(env, t, &self.scheme.vars)?,
                    None => self.metas.fresh(),
                };
                self.locals.push((param.clone(), param_ty.clone()));
                let body = self.expr(body);
                self.locals.pop();
                let body = body?;
                let ty = UType::arrow(param_ty.clone(), body.ty.clone());
                Ok(Expr { kind: ExprKind::Lam { param: param.clone(), param_ty, body: Box::new(body) }, ty, span: *span })
            }
            ast::Expr::Case { scrut, arms, span } => self.case(scrut, arms, *span),
        }
    }

    fn case(&mut self, scrut: &ast::Expr, arms: &[ast::Arm], span: Span) -> Result<Expr, SurfaceSyntaxError> {
        let env = self.env;
        let es = self.expr(scrut)?;
        let site = SiteId(self.sites.len() as u32);
        self.sites.push(CaseSite { def: self.name.to_string(), span });
        let first_ctor = arms.iter().find_map(|a| match &a.pat {
            Pattern::Ctor(k, _) => Some((k, a.span)),
            Pattern::Wildcard => None,
        });
        let d = match first_ctor {
            Some((k, kspan)) => match env.lookup_ctor(k) {
                Some(k) => env.ctor(k).datatype,
                None => return error(kspan, ErrorKind::Scope, format!("unknown constructor `{k}`")),
            },
            None => match self.metas.zonk(&es.ty) {
                UType::Data(d, _) => d,
                t => {
                    return error(
                        span,
                        ErrorKind::Type,
                        format!("cannot determine the datatype scrutinised by this case (scrutinee has type `{}`)", t.display(env)),
                    )
                }
            },
        };
        let type_args: Vec<UType> = env.datatype(d).params.iter().map(|_| self.metas.fresh()).collect();
        self.unify(&es.ty, &UType::Data(d, type_args.clone()), scrut.span())?;
        let result = self.metas.fresh();
        let mut covered = 0u64;
        let mut out = Vec::new();
        let mut seen_wildcard = false;
        for arm in arms {
            if seen_wildcard {
                return error(arm.span, ErrorKind::Parse, "unreachable case arm after a wildcard");
            }
            match &arm.pat {
                Pattern::Ctor(kname, binders) => {
                    let Some(k) = env.lookup_ctor(kname) else {
                        return error(arm.span, ErrorKind::Scope, format!("unknown constructor `{kname}`"));
                    };
                    if env.ctor(k).datatype != d {
                        return error(
                            arm.span,
                            ErrorKind::Type,
                            format!("`{kname}` is not a constructor of `{}`", env.datatype_name(d)),
                        );
                    }
                    if covered & env.ctor_bit(k) != 0 {
                        return error(arm.span, ErrorKind::Scope, format!("duplicate arm for `{kname}`"));
                    }
                    covered |= env.ctor_bit(k);
                    let arg_tys = env.ctor_args_at(k, &type_args);
                    if arg_tys.len() != binders.len() {
                        return error(
                            arm.span,
                            ErrorKind::Type,
                            format!("`{kname}` has {} argument(s), pattern binds {}", arg_tys.len(), binders.len()),
                        );
                    }
                    let mut seen = HashSet::new();
                    for b in binders {
                        if !seen.insert(b) {
                            return error(arm.span, ErrorKind::Scope, format!("`{b}` is bound twice in this pattern"));
                        }
                    }
                    let depth = self.locals.len();
                    self.locals.extend(binders.iter().cloned().zip(arg_tys));
                    let body = self.expr(&arm.body);
                    self.locals.truncate(depth);
                    let body = body?;
                    self.unify(&body.ty, &result, arm.body.span())?;
                    out.push(CoreArm { ctor: k, binders: binders.clone(), body, from_wildcard: false });
                }
                Pattern::Wildcard => {
                    seen_wildcard = true;
                    let body = self.expr(&arm.body)?;
                    self.unify(&body.ty, &result, arm.body.span())?;
                    let rest = env.full_mask(d) & !covered;
                    for k in env.ctors_in_mask(d, rest).collect::<Vec<_>>() {
                        let binders = (0..env.ctor(k).args.len()).map(|i| format!("_{i}")).collect();
                        out.push(CoreArm { ctor: k, binders, body: body.clone(), from_wildcard: true });
                    }
                    covered = env.full_mask(d);
                }
            }
        }
        Ok(Expr { kind: ExprKind::Case { scrut: Box::new(es), arms: out, site }, ty: result, span })
    }
}
