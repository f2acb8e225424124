//! Constraint-generating refinement inference over elaborated programs.
//!
//! Every expression node yields an extended type and a saturated constraint
//! set restricted to the variables its context and type can observe, so the
//! summaries stay small no matter how large the program is.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::constraint::{Body, Cell, Constraint, ConstraintSet, GuardAtom, SiteId};
use crate::program::{CoreProgram, Expr, ExprKind, Item, VarRef};
use crate::refinement::{inject, ConstrainedScheme, ExtType, Refinement, RefinementVar, VarSupply};
use crate::solver::{restrict, saturate_onto_with, LimitExceeded, SaturateOptions, DEFAULT_MAX_CONSTRAINTS};
use crate::subtype::{infer_subtype, instantiate_arg, ShapeMismatch};
use crate::surface::Span;
use crate::types::{DatatypeId, UScheme, UType};

/// When saturation and restriction run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RestrictMode {
    /// After every expression node.
    #[default]
    Node,
    /// Only when a definition is generalized.
    Module,
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub restrict: RestrictMode,
    /// Never let a single-constructor datatype be refined to empty.
    pub no_empty_single: bool,
    pub max_constraints: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { restrict: RestrictMode::Node, no_empty_single: false, max_constraints: DEFAULT_MAX_CONSTRAINTS }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("while checking `{def}`: {source}")]
    Limit { def: String, source: LimitExceeded },
    /// Elaboration produced a node whose underlying types disagree.
    #[error("internal error while checking `{def}`: {message}")]
    Internal { def: String, message: String },
}

/// Why a definition could not be given a refinement typing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blame {
    /// The case expression whose exhaustiveness failed, when known.
    pub site: Option<SiteId>,
    /// The definition containing that case.
    pub site_def: String,
    pub span: Span,
    pub datatype: Option<String>,
    /// Constructors that may reach the case but have no arm.
    pub missing: Vec<String>,
    /// The unsatisfiable constraints, rendered.
    pub core: Vec<String>,
}

impl Blame {
    pub fn message(&self) -> String {
        match &self.datatype {
            Some(d) if !self.missing.is_empty() => format!(
                "pattern match in `{}` may fail: constructor{} {} of `{d}` not covered",
                self.site_def,
                if self.missing.len() == 1 { "" } else { "s" },
                self.missing.join(", ")
            ),
            _ => format!("no refinement typing exists for `{}`", self.site_def),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Safe,
    Unsafe(Blame),
}

#[derive(Debug, Clone)]
pub struct DefSummary {
    pub name: String,
    pub span: Span,
    pub verdict: Verdict,
    /// The inferred scheme; for an unsafe definition it is unsatisfiable.
    pub scheme: ConstrainedScheme,
}

impl DefSummary {
    pub fn is_safe(&self) -> bool {
        self.verdict == Verdict::Safe
    }
}

/// Per-run counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Top-level definitions.
    pub n: usize,
    /// Most constructors in any datatype.
    pub k: usize,
    /// Refinement variables allocated.
    pub v: usize,
    /// Most datatypes in any slice.
    pub d: usize,
    /// Largest interface passed to restriction.
    pub i: usize,
    pub warnings: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SafetyReport {
    pub defs: Vec<DefSummary>,
    pub stats: RunStats,
}

impl SafetyReport {
    pub fn is_safe(&self) -> bool {
        self.defs.iter().all(DefSummary::is_safe)
    }

    pub fn unsafe_defs(&self) -> impl Iterator<Item = (&DefSummary, &Blame)> {
        self.defs.iter().filter_map(|d| match &d.verdict {
            Verdict::Unsafe(b) => Some((d, b)),
            Verdict::Safe => None,
        })
    }

    pub fn def(&self, name: &str) -> Option<&DefSummary> {
        self.defs.iter().find(|d| d.name == name)
    }

    /// Size of the largest stored summary.
    pub fn max_restricted_size(&self) -> usize {
        self.defs.iter().map(|d| d.scheme.constraints.len()).max().unwrap_or(0)
    }
}

pub fn check_program(p: &CoreProgram, opts: &CheckOptions) -> Result<SafetyReport, CheckError> {
    let start = Instant::now();
    let mut ck = Checker::new(p, opts.clone());
    let mut defs = Vec::new();
    for i in 0..p.items.len() {
        if let Some(d) = ck.item(i)? {
            defs.push(d);
        }
    }
    let stats = RunStats {
        n: p.let_count(),
        k: p.env.max_ctors(),
        v: ck.supply.allocated(),
        d: p.env.max_slice(),
        i: ck.max_interface,
        warnings: defs.iter().filter(|d| !d.is_safe()).count(),
        elapsed: start.elapsed(),
    };
    Ok(SafetyReport { defs, stats })
}

/// An inferred type with its constraints.
#[derive(Debug, Clone)]
pub struct Inferred {
    pub ty: ExtType,
    pub constraints: ConstraintSet,
}

/// Inference state for one program. Items must be processed in order.
pub struct Checker<'p> {
    prog: &'p CoreProgram,
    opts: CheckOptions,
    pub supply: VarSupply,
    globals: Vec<Option<ConstrainedScheme>>,
    locals: Vec<(String, ExtType)>,
    self_ty: Option<ExtType>,
    current: String,
    // Pins for fresh variables under `no_empty_single`, not yet attached.
    pending: ConstraintSet,
    pub max_interface: usize,
}

type Res<T> = Result<T, CheckError>;

impl<'p> Checker<'p> {
    pub fn new(prog: &'p CoreProgram, opts: CheckOptions) -> Self {
        Checker {
            prog,
            opts,
            supply: VarSupply::new(),
            globals: vec![None; prog.items.len()],
            locals: Vec::new(),
            self_ty: None,
            current: String::new(),
            pending: ConstraintSet::new(),
            max_interface: 0,
        }
    }

    pub fn scheme(&self, item: usize) -> Option<&ConstrainedScheme> {
        self.globals[item].as_ref()
    }

    /// Processes item `i`, returning a summary for definitions.
    pub fn item(&mut self, i: usize) -> Res<Option<DefSummary>> {
        match &self.prog.items[i] {
            Item::Extern { scheme, .. } => {
                self.globals[i] = Some(self.full_scheme(scheme));
                Ok(None)
            }
            Item::Let { name, scheme, body, span } => {
                self.current = name.clone();
                let t = self.fresh_type(&scheme.body);
                // Pins on the template must not end up under a case guard.
                let template_pins = std::mem::take(&mut self.pending);
                self.self_ty = Some(t.clone());
                let inferred = self.infer_expr(&[], body);
                self.self_ty = None;
                let inferred = inferred?;
                let mut c2 = std::mem::take(&mut self.pending);
                c2.extend_from(&template_pins);
                self.subtype(&inferred.ty, &t, &mut c2)?;
                let iface = t.frv();
                self.max_interface = self.max_interface.max(iface.len());
                let base = (self.opts.restrict == RestrictMode::Node).then_some(&inferred.constraints);
                let mut extra = c2;
                if base.is_none() {
                    extra.extend_from(&inferred.constraints);
                }
                let sat = saturate_onto_with(&self.prog.env, base, &extra, self.sat_opts())
                    .map_err(|source| CheckError::Limit { def: name.clone(), source })?;
                let restricted = restrict(&sat.set, &iface);
                let generalized = ConstrainedScheme {
                    tyvars: scheme.vars.clone(),
                    vars: iface.iter().copied().collect(),
                    constraints: restricted,
                    body: t,
                };
                let verdict = if sat.trivially_unsat {
                    Verdict::Unsafe(self.blame(&sat.set, name, *span))
                } else {
                    Verdict::Safe
                };
                self.globals[i] = Some(if verdict == Verdict::Safe {
                    generalized.clone()
                } else {
                    // Downstream uses see an unconstrained summary instead of
                    // inheriting the failure.
                    self.full_scheme(scheme)
                });
                Ok(Some(DefSummary { name: name.clone(), span: *span, verdict, scheme: generalized }))
            }
        }
    }

    fn sat_opts(&self) -> SaturateOptions {
        SaturateOptions { limit: self.opts.max_constraints, subsume: true }
    }

    fn blame(&self, set: &ConstraintSet, def: &str, span: Span) -> Blame {
        let env = &self.prog.env;
        let mut unsat: Vec<(Option<SiteId>, &Constraint)> =
            set.iter_with_origins().filter(|(c, _)| c.is_trivially_unsat()).map(|(c, o)| (o, c)).collect();
        unsat.sort_by_key(|(o, c)| (o.is_none(), *o, (*c).clone()));
        let site = unsat.first().and_then(|(o, _)| *o);
        let chosen: Vec<&Constraint> = unsat.iter().filter(|(o, _)| *o == site).map(|(_, c)| *c).collect();
        let mut missing = Vec::new();
        let mut datatype = None;
        for c in &chosen {
            if let Body::Empty(k) = c.body {
                missing.push(env.ctor_name(k).to_string());
                datatype.get_or_insert_with(|| env.datatype_name(env.ctor(k).datatype).to_string());
            }
        }
        let (site_def, span) = match site {
            Some(s) => {
                let cs = self.prog.site(s);
                (cs.def.clone(), cs.span)
            }
            None => (def.to_string(), span),
        };
        Blame {
            site,
            site_def,
            span,
            datatype,
            missing,
            core: chosen.iter().map(|c| c.display(env).to_string()).collect(),
        }
    }

    /// The summary of a function known only by its underlying type: every
    /// datatype occurrence is pinned to its full refinement.
    fn full_scheme(&mut self, s: &UScheme) -> ConstrainedScheme {
        let env = &self.prog.env;
        let body = self.supply.fresh_type(&s.body);
        let vars: Vec<RefinementVar> = body.frv().into_iter().collect();
        let mut constraints = ConstraintSet::new();
        for &x in &vars {
            for &d in &env.slice(self.supply.root(x)).members {
                for &k in env.ctors_of(d) {
                    constraints.insert(Constraint::unguarded(Body::Mem(k, Cell::new(x, d))));
                }
            }
        }
        ConstrainedScheme { tyvars: s.vars.clone(), vars, constraints, body }
    }

    fn fresh_var(&mut self, root: DatatypeId) -> RefinementVar {
        let x = self.supply.fresh(root);
        if self.opts.no_empty_single {
            let env = &self.prog.env;
            for &d in &env.slice(root).members {
                if let [k] = env.ctors_of(d) {
                    self.pending.insert(Constraint::unguarded(Body::Mem(*k, Cell::new(x, d))));
                }
            }
        }
        x
    }

    fn fresh_type(&mut self, ul: &UType) -> ExtType {
        match ul {
            UType::Var(a) => ExtType::Var(a.clone()),
            UType::Base(b) => ExtType::Base(*b),
            UType::Data(d, args) => {
                let x = self.fresh_var(*d);
                ExtType::Data(*d, Refinement::Var(x), args.iter().map(|t| self.fresh_type(t)).collect())
            }
            UType::Arrow(a, b) => {
                let a = self.fresh_type(a);
                ExtType::arrow(a, self.fresh_type(b))
            }
        }
    }

    fn subtype(&self, t1: &ExtType, t2: &ExtType, out: &mut ConstraintSet) -> Res<()> {
        infer_subtype(&self.prog.env, t1, t2, out).map_err(|e: ShapeMismatch| self.internal(e.to_string()))
    }

    fn internal(&self, message: impl Into<String>) -> CheckError {
        CheckError::Internal { def: self.current.clone(), message: message.into() }
    }

    fn ctx_frv(&self) -> BTreeSet<RefinementVar> {
        let mut out = BTreeSet::new();
        for (_, t) in &self.locals {
            t.collect_frv(&mut out);
        }
        if let Some(t) = &self.self_ty {
            t.collect_frv(&mut out);
        }
        out
    }

    /// Infers `e` under the given local bindings (plus whatever this checker
    /// already binds).
    pub fn infer_expr(&mut self, locals: &[(String, ExtType)], e: &Expr) -> Res<Inferred> {
        let depth = self.locals.len();
        self.locals.extend(locals.iter().cloned());
        let r = self.expr(e);
        self.locals.truncate(depth);
        let (ty, constraints) = r?;
        Ok(Inferred { ty, constraints })
    }

    /// Combines already-closed child sets with new constraints, then
    /// saturates and restricts to the observable variables.
    fn close(
        &mut self,
        mut parts: Vec<ConstraintSet>,
        mut new: ConstraintSet,
        ty: &ExtType,
        extra: &BTreeSet<RefinementVar>,
    ) -> Res<ConstraintSet> {
        new.extend_from(&std::mem::take(&mut self.pending));
        if self.opts.restrict == RestrictMode::Module {
            let mut all = ConstraintSet::new();
            for p in &parts {
                all.extend_from(p);
            }
            all.extend_from(&new);
            return Ok(all);
        }
        parts.retain(|p| !p.is_empty());
        let largest = (0..parts.len()).max_by_key(|&i| parts[i].len());
        let base = largest.map(|i| parts.swap_remove(i));
        for p in &parts {
            new.extend_from(p);
        }
        let mut iface = self.ctx_frv();
        ty.collect_frv(&mut iface);
        iface.extend(extra.iter().copied());
        if new.is_empty() {
            let base = base.unwrap_or_default();
            return Ok(if base.frv().is_subset(&iface) { base } else { self.restricted(&base, &iface) });
        }
        let sat = saturate_onto_with(&self.prog.env, base.as_ref(), &new, self.sat_opts())
            .map_err(|source| CheckError::Limit { def: self.current.clone(), source })?;
        Ok(self.restricted(&sat.set, &iface))
    }

    fn restricted(&mut self, set: &ConstraintSet, iface: &BTreeSet<RefinementVar>) -> ConstraintSet {
        self.max_interface = self.max_interface.max(iface.len());
        restrict(set, iface)
    }

    fn expr(&mut self, e: &Expr) -> Res<(ExtType, ConstraintSet)> {
        let r = self.expr_inner(e)?;
        if self.opts.restrict == RestrictMode::Node && cfg!(debug_assertions) {
            let mut allowed = self.ctx_frv();
            r.0.collect_frv(&mut allowed);
            debug_assert!(r.1.frv().is_subset(&allowed), "constraints escape their interface");
        }
        Ok(r)
    }

    fn expr_inner(&mut self, e: &Expr) -> Res<(ExtType, ConstraintSet)> {
        let env = &self.prog.env;
        let none = BTreeSet::new();
        match &e.kind {
            ExprKind::Int(_) | ExprKind::Str(_) => Ok((self.fresh_type(&e.ty), ConstraintSet::new())),
            ExprKind::Con { ctor, type_args } => {
                let d = env.ctor(*ctor).datatype;
                let scheme = env.ctor_scheme(*ctor);
                let x = self.fresh_var(d);
                let args: Vec<ExtType> = type_args.iter().map(|u| self.fresh_type(u)).collect();
                let sub: BTreeMap<String, ExtType> = scheme.vars.iter().cloned().zip(args).collect();
                let t = inject(&self.prog.env, &Refinement::Var(x), &scheme.body).subst(&sub);
                let mut new = ConstraintSet::new();
                new.insert(Constraint::unguarded(Body::Mem(*ctor, Cell::new(x, d))));
                let c = self.close(vec![], new, &t, &none)?;
                Ok((t, c))
            }
            ExprKind::Var { var, type_args } => match var {
                VarRef::Local(name) => {
                    let t = self
                        .locals
                        .iter()
                        .rev()
                        .find(|(n, _)| n == name)
                        .map(|(_, t)| t.clone())
                        .ok_or_else(|| self.internal(format!("unbound local `{name}`")))?;
                    Ok((t, ConstraintSet::new()))
                }
                VarRef::SelfRef => {
                    let t = self.self_ty.clone().ok_or_else(|| self.internal("recursive reference outside a definition"))?;
                    Ok((t, ConstraintSet::new()))
                }
                VarRef::Global(i) => {
                    let scheme = self.globals[*i].clone().ok_or_else(|| self.internal("reference to an unchecked item"))?;
                    if scheme.tyvars.len() != type_args.len() {
                        return Err(self.internal("type argument arity mismatch"));
                    }
                    let args: Vec<ExtType> = type_args.iter().map(|u| self.fresh_type(u)).collect();
                    let (t, c) = scheme.instantiate(&mut self.supply, &args);
                    let c = self.close(vec![c], ConstraintSet::new(), &t, &none)?;
                    Ok((t, c))
                }
            },
            ExprKind::App(f, a) => {
                let (tf, c1) = self.expr(f)?;
                let (ta, c2) = self.expr(a)?;
                let ExtType::Arrow(dom, cod) = tf else {
                    return Err(self.internal("application of a non-function"));
                };
                let mut c3 = ConstraintSet::new();
                self.subtype(&ta, &dom, &mut c3)?;
                let c = self.close(vec![c1, c2], c3, &cod, &none)?;
                Ok((*cod, c))
            }
            ExprKind::Lam { param, param_ty, body } => {
                let t1 = self.fresh_type(param_ty);
                let pins = std::mem::take(&mut self.pending);
                self.locals.push((param.clone(), t1.clone()));
                let r = self.expr(body);
                self.locals.pop();
                let (t2, c) = r?;
                let t = ExtType::arrow(t1, t2);
                let c = self.close(vec![c], pins, &t, &none)?;
                Ok((t, c))
            }
            ExprKind::Case { scrut, arms, site } => self.case(e, scrut, arms, *site),
        }
    }

    fn case(&mut self, e: &Expr, scrut: &Expr, arms: &[crate::program::CoreArm], site: SiteId) -> Res<(ExtType, ConstraintSet)> {
        let env = &self.prog.env;
        let (ts, c0) = self.expr(scrut)?;
        let ExtType::Data(d, Refinement::Var(x), sargs) = &ts else {
            return Err(self.internal("case on a value that is not a refined datatype"));
        };
        let (d, x) = (*d, *x);
        let cell = Cell::new(x, d);
        let mut mask = 0;
        let mut branches = Vec::with_capacity(arms.len());
        for arm in arms {
            mask |= env.ctor_bit(arm.ctor);
            let binders: Vec<(String, ExtType)> = arm
                .binders
                .iter()
                .zip(&env.ctor(arm.ctor).args)
                .map(|(b, u)| (b.clone(), instantiate_arg(env, d, &Refinement::Var(x), u, sargs)))
                .collect();
            let depth = self.locals.len();
            self.locals.extend(binders);
            let r = self.expr(&arm.body);
            self.locals.truncate(depth);
            branches.push((arm.ctor, r?));
        }
        let t = self.fresh_type(&e.ty);
        let pins = std::mem::take(&mut self.pending);
        let scrut_vars = ts.frv();
        let mut parts = vec![c0];
        for (k, (ti, ci)) in branches {
            let mut flow = ConstraintSet::new();
            self.subtype(&ti, &t, &mut flow)?;
            let bi = self.close(vec![ci], flow, &t, &scrut_vars)?;
            let atom = [GuardAtom::new(k, cell)];
            let mut guarded = ConstraintSet::new();
            for (c, o) in bi.iter_with_origins() {
                let g = c.with_guard(&atom);
                if !g.is_tautology(env) {
                    guarded.insert_with_origin(g, o);
                }
            }
            parts.push(guarded);
        }
        let mut exhaust = pins;
        exhaust.insert_with_origin(Constraint::unguarded(Body::Upper(cell, mask)), Some(site));
        let c = self.close(parts, exhaust, &t, &BTreeSet::new())?;
        Ok((t, c))
    }
}

/// True if the definition's summary stays satisfiable when every datatype
/// in its first-order argument positions is pinned to its full refinement,
/// i.e. it accepts every well-typed input.
pub fn accepts_all_inputs(p: &CoreProgram, scheme: &ConstrainedScheme) -> Option<bool> {
    let env = &p.env;
    let mut args = Vec::new();
    let mut t = &scheme.body;
    while let ExtType::Arrow(a, b) = t {
        args.push(&**a);
        t = b;
    }
    if args.iter().any(|a| !a.under().is_first_order()) {
        return None;
    }
    let mut pins = ConstraintSet::new();
    for a in args {
        let mut scopes = BTreeMap::new();
        a.var_scopes(env, &mut scopes);
        for (x, ds) in scopes {
            for d in ds {
                for &k in env.ctors_of(d) {
                    pins.insert(Constraint::unguarded(Body::Mem(k, Cell::new(x, d))));
                }
            }
        }
    }
    let r = saturate_onto_with(env, Some(&scheme.constraints), &pins, SaturateOptions { limit: DEFAULT_MAX_CONSTRAINTS, subsume: true }).ok()?;
    Some(!r.trivially_unsat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{enumerate_assignments, parse_constraint_set, satisfies};
    use crate::refinement::VarScopes;
    use crate::surface::load;

    const LAM: &str = "\
data Arith = Lit Int | Add | Mul
data Lam = Cst Arith | BVr Int | FVr String | Abs Lam | App Lam Lam
";

    fn checked(src: &str) -> (CoreProgram, SafetyReport) {
        let p = load(src).unwrap();
        let r = check_program(&p, &CheckOptions::default()).unwrap();
        (p, r)
    }

    fn scopes_of(p: &CoreProgram, s: &ConstrainedScheme) -> VarScopes {
        let mut scopes = VarScopes::new();
        s.body.var_scopes(&p.env, &mut scopes);
        scopes
    }

    /// Parses `text` with `X1, X2, ...` standing for the scheme's variables
    /// in order.
    fn over_scheme(p: &CoreProgram, s: &ConstrainedScheme, text: &str) -> ConstraintSet {
        let ren = (0..s.vars.len()).map(|i| (RefinementVar(i as u32 + 1), s.vars[i])).collect();
        parse_constraint_set(&p.env, text).unwrap().rename(&ren)
    }

    fn entails(p: &CoreProgram, s: &ConstrainedScheme, family: &ConstraintSet) -> bool {
        enumerate_assignments(&p.env, &scopes_of(p, s))
            .filter(|t| satisfies(&p.env, t, &s.constraints).unwrap())
            .all(|t| satisfies(&p.env, &t, family).unwrap())
    }

    fn equivalent(p: &CoreProgram, s: &ConstrainedScheme, other: &ConstraintSet) -> bool {
        enumerate_assignments(&p.env, &scopes_of(p, s))
            .all(|t| satisfies(&p.env, &t, &s.constraints).unwrap() == satisfies(&p.env, &t, other).unwrap())
    }

    const K_SCHEME: &str = "\
? X1(Lam) <= X2(Lam)
? X2(Lam) <= X1(Lam)
[Cst in X1(Lam)] ? X1(Arith) <= X2(Arith)
[Cst in X2(Lam)] ? X2(Arith) <= X1(Arith)
";

    #[test]
    fn constructor_shares_one_variable() {
        let p = load(&format!("{LAM}let c : Arith -> Lam = Cst")).unwrap();
        let Item::Let { body, .. } = &p.items[0] else { panic!() };
        let mut ck = Checker::new(&p, CheckOptions::default());
        let r = ck.infer_expr(&[], body).unwrap();
        let x = *r.ty.frv().iter().next().unwrap();
        assert_eq!(r.ty.frv().len(), 1);
        assert_eq!(r.ty.display(&p.env).to_string(), format!("inj{{{x}}} Arith -> inj{{{x}}} Lam"));
        assert_eq!(r.constraints.render(&p.env), format!("? Cst in {x}(Lam)\n"));
    }

    #[test]
    fn literal_has_no_constraints() {
        let p = load("let n : Int = 42").unwrap();
        let Item::Let { body, .. } = &p.items[0] else { panic!() };
        let r = Checker::new(&p, CheckOptions::default()).infer_expr(&[], body).unwrap();
        assert_eq!(r.ty, ExtType::Base(crate::types::BaseType::Int));
        assert!(r.constraints.is_empty());
    }

    #[test]
    fn k_combinator_extern() {
        let (p, r) = checked(&format!("{LAM}extern k : forall a b. a -> b -> a\nlet f : Lam -> Lam = \\x -> k x (f (f x))"));
        let f = r.def("f").unwrap();
        assert!(f.is_safe());
        assert_eq!(f.scheme.vars.len(), 2);
        assert!(equivalent(&p, &f.scheme, &over_scheme(&p, &f.scheme, K_SCHEME)));
    }

    #[test]
    fn k_combinator_defined() {
        let (p, r) = checked(&format!(
            "{LAM}let k : forall a b. a -> b -> a = \\x -> \\y -> x\nlet f : Lam -> Lam = \\x -> k x (f (f x))"
        ));
        let f = r.def("f").unwrap();
        assert!(equivalent(&p, &f.scheme, &over_scheme(&p, &f.scheme, K_SCHEME)));
        let opts = CheckOptions { restrict: RestrictMode::Module, ..CheckOptions::default() };
        let r = check_program(&p, &opts).unwrap();
        let f = r.def("f").unwrap();
        assert!(equivalent(&p, &f.scheme, &over_scheme(&p, &f.scheme, K_SCHEME)));
    }

    #[test]
    fn instantiations_are_disjoint() {
        let p = load(&format!("{LAM}let k : forall a b. a -> b -> a = \\x -> \\y -> x\nlet g : Lam -> Lam = \\x -> x")).unwrap();
        let mut ck = Checker::new(&p, CheckOptions::default());
        ck.item(0).unwrap();
        ck.item(1).unwrap();
        let Item::Let { body, .. } = &p.items[1] else { panic!() };
        let a = ck.infer_expr(&[], body).unwrap();
        let b = ck.infer_expr(&[], body).unwrap();
        assert!(!a.ty.frv().is_empty());
        assert!(a.ty.frv().is_disjoint(&b.ty.frv()));
    }

    #[test]
    fn extern_scheme_is_full() {
        let (p, _) = checked(&format!("{LAM}extern lkup : String -> Lam"));
        let mut ck = Checker::new(&p, CheckOptions::default());
        ck.item(0).unwrap();
        let s = ck.scheme(0).unwrap();
        let x = s.vars[0];
        let lam = p.env.lookup_datatype("Lam").unwrap();
        let arith = p.env.lookup_datatype("Arith").unwrap();
        for d in [lam, arith] {
            for &k in p.env.ctors_of(d) {
                assert!(s.constraints.contains(&Constraint::unguarded(Body::Mem(k, Cell::new(x, d)))));
            }
        }
        assert_eq!(s.constraints.len(), 8);
    }

    #[test]
    fn exhaustiveness_constraint_in_summary() {
        let (p, r) = checked(include_str!("../../../corpus/dnf.idr0"));
        assert!(r.is_safe());
        let s = &r.def("nnf2dnf").unwrap().scheme;
        let x = s.vars[0];
        let dump = s.constraints.render(&p.env);
        assert!(dump.lines().any(|l| l == format!("? {x}(Fm) <= {{Lit,And,Or}}")), "{dump}");
    }

    #[test]
    fn subst_families() {
        let (p, r) = checked(include_str!("../../../corpus/subst.idr0"));
        let s = &r.def("subst").unwrap().scheme;
        assert_eq!(s.vars.len(), 3);
        for family in [
            "[Var in X2(Tm)] ? X1(Tm) <= X3(Tm)",
            "[Cst in X2(Tm)] ? Cst in X3(Tm)",
            "[App in X2(Tm)] ? App in X3(Tm)",
            "? X2(Tm) <= {Var,Cst,App}",
        ] {
            assert!(entails(&p, s, &over_scheme(&p, s, family)), "{family}");
        }
        // Path sensitivity: nothing is forced when the input is empty.
        assert!(!entails(&p, s, &over_scheme(&p, s, "? Cst in X3(Tm)")));
        assert!(r.def("countApps").unwrap().is_safe());
        assert!(r.def("closedApps").unwrap().is_safe());
    }

    #[test]
    fn verdicts_and_blame() {
        let (_, r) = checked(include_str!("../../../corpus/dnf_unsafe.idr0"));
        let bad: Vec<_> = r.unsafe_defs().collect();
        assert_eq!(bad.len(), 1);
        let (d, b) = bad[0];
        assert_eq!(d.name, "dnf");
        assert_eq!(b.site_def, "nnf2dnf");
        assert_eq!(b.missing, ["Imp"]);
        assert_eq!(b.message(), "pattern match in `nnf2dnf` may fail: constructor Imp of `Fm` not covered");
        assert_eq!(r.stats.warnings, 1);
    }

    #[test]
    fn unsafe_definition_does_not_poison_callers() {
        let (_, r) = checked(include_str!("../../../corpus/list_unsafe.idr0"));
        assert!(r.def("head").unwrap().is_safe());
        assert!(!r.def("oops").unwrap().is_safe());
        let (_, r) = checked(&format!("{LAM}let bad : Lam = case Cst Add of {{ FVr s -> FVr s }}\nlet ok : Lam = bad"));
        assert!(!r.def("bad").unwrap().is_safe());
        assert!(r.def("ok").unwrap().is_safe());
    }

    #[test]
    fn modes_agree_on_corpus_verdicts() {
        for src in [
            include_str!("../../../corpus/lam.idr0"),
            include_str!("../../../corpus/subst.idr0"),
            include_str!("../../../corpus/lists.idr0"),
            include_str!("../../../corpus/list_unsafe.idr0"),
        ] {
            let p = load(src).unwrap();
            let node = check_program(&p, &CheckOptions::default()).unwrap();
            let module = check_program(&p, &CheckOptions { restrict: RestrictMode::Module, ..CheckOptions::default() }).unwrap();
            let v = |r: &SafetyReport| r.defs.iter().map(|d| (d.name.clone(), d.is_safe())).collect::<Vec<_>>();
            assert_eq!(v(&node), v(&module));
        }
    }

    #[test]
    fn no_empty_single_pins_single_constructor_types() {
        let src = "data Box = MkBox Int\ndata U = A | B\nlet f : Box -> U = \\b -> case b of { MkBox n -> A }";
        let p = load(src).unwrap();
        let plain = check_program(&p, &CheckOptions::default()).unwrap();
        let pinned = check_program(&p, &CheckOptions { no_empty_single: true, ..CheckOptions::default() }).unwrap();
        let s = &pinned.def("f").unwrap().scheme;
        // Box is single-constructor, U is not.
        assert!(entails(&p, s, &over_scheme(&p, s, "? MkBox in X1(Box)")));
        assert!(!entails(&p, s, &over_scheme(&p, s, "? A in X2(U)")) || entails(&p, s, &over_scheme(&p, s, "[MkBox in X1(Box)] ? A in X2(U)")));
        let s = &plain.def("f").unwrap().scheme;
        assert!(!entails(&p, s, &over_scheme(&p, s, "? MkBox in X1(Box)")));
    }

    #[test]
    fn accepts_all_inputs_distinguishes_partial_functions() {
        let (p, r) = checked(include_str!("../../../corpus/dnf.idr0"));
        assert_eq!(accepts_all_inputs(&p, &r.def("nnf").unwrap().scheme), Some(true));
        assert_eq!(accepts_all_inputs(&p, &r.def("nnf2dnf").unwrap().scheme), Some(false));
        let (p, r) = checked(include_str!("../../../corpus/subst.idr0"));
        assert_eq!(accepts_all_inputs(&p, &r.def("subst").unwrap().scheme), None);
    }

    #[test]
    fn stats_are_consistent() {
        let (_, r) = checked(include_str!("../../../corpus/dnf.idr0"));
        assert_eq!(r.stats.n, 6);
        assert_eq!(r.stats.k, 5);
        assert_eq!(r.stats.d, 2);
        assert!(r.stats.i <= r.stats.v);
        assert!(r.max_restricted_size() > 0);
    }
}
