//! Guarded constructor-set constraints.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use rustc_hash::FxBuildHasher;
use thiserror::Error;

use crate::refinement::{ChoiceFunction, RefinementVar, VarScopes};
use crate::types::{CtorId, DatatypeEnv, DatatypeId};

/// The cell `X(d)`: variable `X`'s choice at datatype `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub var: RefinementVar,
    pub dt: DatatypeId,
}

impl Cell {
    pub fn new(var: RefinementVar, dt: DatatypeId) -> Self {
        Cell { var, dt }
    }
}

/// A constructor set expression: a literal set or a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetExpr {
    Lit(DatatypeId, u64),
    Cell(Cell),
}

impl SetExpr {
    pub fn datatype(&self) -> DatatypeId {
        match self {
            SetExpr::Lit(d, _) => *d,
            SetExpr::Cell(c) => c.dt,
        }
    }

    pub fn singleton(env: &DatatypeEnv, k: CtorId) -> SetExpr {
        SetExpr::Lit(env.ctor(k).datatype, env.ctor_bit(k))
    }
}

/// A guard atom `k in X(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GuardAtom {
    pub cell: Cell,
    pub ctor: CtorId,
}

impl GuardAtom {
    pub fn new(ctor: CtorId, cell: Cell) -> Self {
        GuardAtom { cell, ctor }
    }
}

/// The four atomic body shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Body {
    /// `X(d) <= Y(d)`
    Sub(Cell, Cell),
    /// `X(d) <= {k..}`, as a constructor bitmask of `d`.
    Upper(Cell, u64),
    /// `k in X(d)`
    Mem(CtorId, Cell),
    /// `k in {}`
    Empty(CtorId),
}

impl Body {
    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        let (a, b) = match *self {
            Body::Sub(a, b) => (Some(a), Some(b)),
            Body::Upper(a, _) => (Some(a), None),
            Body::Mem(_, a) => (Some(a), None),
            Body::Empty(_) => (None, None),
        };
        a.into_iter().chain(b)
    }
}

/// `guard ? body`; the guard is kept sorted and duplicate free.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constraint {
    pub body: Body,
    guard: Vec<GuardAtom>,
}

impl Constraint {
    pub fn new(guard: impl IntoIterator<Item = GuardAtom>, body: Body) -> Self {
        let mut guard: Vec<_> = guard.into_iter().collect();
        guard.sort_unstable();
        guard.dedup();
        Constraint { body, guard }
    }

    pub fn unguarded(body: Body) -> Self {
        Constraint { body, guard: Vec::new() }
    }

    pub fn guard(&self) -> &[GuardAtom] {
        &self.guard
    }

    pub fn is_unguarded(&self) -> bool {
        self.guard.is_empty()
    }

    /// `? k in {}`: unsatisfiable under every assignment.
    pub fn is_trivially_unsat(&self) -> bool {
        self.guard.is_empty() && matches!(self.body, Body::Empty(_))
    }

    /// Holds under every assignment.
    pub fn is_tautology(&self, env: &DatatypeEnv) -> bool {
        match self.body {
            Body::Sub(a, b) => a == b,
            Body::Upper(a, m) => m & env.full_mask(a.dt) == env.full_mask(a.dt),
            Body::Mem(k, c) => self.guard.binary_search(&GuardAtom::new(k, c)).is_ok(),
            Body::Empty(_) => false,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.guard.iter().map(|a| a.cell).chain(self.body.cells())
    }

    pub fn vars(&self) -> impl Iterator<Item = RefinementVar> + '_ {
        self.cells().map(|c| c.var)
    }

    pub fn mentions_only(&self, interface: &BTreeSet<RefinementVar>) -> bool {
        self.vars().all(|x| interface.contains(&x))
    }

    pub fn rename(&self, ren: &BTreeMap<RefinementVar, RefinementVar>) -> Constraint {
        let rc = |c: Cell| Cell::new(*ren.get(&c.var).unwrap_or(&c.var), c.dt);
        let body = match self.body {
            Body::Sub(a, b) => Body::Sub(rc(a), rc(b)),
            Body::Upper(a, m) => Body::Upper(rc(a), m),
            Body::Mem(k, a) => Body::Mem(k, rc(a)),
            Body::Empty(k) => Body::Empty(k),
        };
        Constraint::new(self.guard.iter().map(|g| GuardAtom::new(g.ctor, rc(g.cell))), body)
    }

    /// The same body under `self.guard` extended with `extra`.
    pub fn with_guard(&self, extra: &[GuardAtom]) -> Constraint {
        if extra.is_empty() {
            return self.clone();
        }
        Constraint::new(self.guard.iter().chain(extra).copied(), self.body)
    }

    pub fn display<'a>(&'a self, env: &'a DatatypeEnv) -> impl fmt::Display + 'a {
        DisplayConstraint { c: self, env }
    }
}

struct DisplayCell<'a>(Cell, &'a DatatypeEnv);

impl fmt::Display for DisplayCell<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.0.var, self.1.datatype_name(self.0.dt))
    }
}

struct DisplayConstraint<'a> {
    c: &'a Constraint,
    env: &'a DatatypeEnv,
}

impl fmt::Display for DisplayConstraint<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let env = self.env;
        if !self.c.guard.is_empty() {
            f.write_str("[")?;
            for (i, g) in self.c.guard.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{} in {}", env.ctor_name(g.ctor), DisplayCell(g.cell, env))?;
            }
            f.write_str("] ")?;
        }
        f.write_str("? ")?;
        match self.c.body {
            Body::Sub(a, b) => write!(f, "{} <= {}", DisplayCell(a, env), DisplayCell(b, env)),
            Body::Upper(a, m) => {
                write!(f, "{} <= {{", DisplayCell(a, env))?;
                for (i, k) in env.ctors_in_mask(a.dt, m).enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    f.write_str(env.ctor_name(k))?;
                }
                f.write_str("}")
            }
            Body::Mem(k, a) => write!(f, "{} in {}", env.ctor_name(k), DisplayCell(a, env)),
            Body::Empty(k) => write!(f, "{} in {{}}", env.ctor_name(k)),
        }
    }
}

/// A constraint before atomization: `guard ? lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawConstraint {
    pub guard: Vec<GuardAtom>,
    pub lhs: SetExpr,
    pub rhs: SetExpr,
}

impl RawConstraint {
    pub fn new(guard: Vec<GuardAtom>, lhs: SetExpr, rhs: SetExpr) -> Self {
        RawConstraint { guard, lhs, rhs }
    }

    pub fn membership(env: &DatatypeEnv, guard: Vec<GuardAtom>, k: CtorId, rhs: SetExpr) -> Self {
        RawConstraint { guard, lhs: SetExpr::singleton(env, k), rhs }
    }
}

/// Splits a constraint into equivalent atomic ones.
pub fn atomize(env: &DatatypeEnv, raw: &RawConstraint) -> Vec<Constraint> {
    debug_assert_eq!(raw.lhs.datatype(), raw.rhs.datatype());
    let guard = || raw.guard.iter().copied();
    match (raw.lhs, raw.rhs) {
        (SetExpr::Lit(d, a), SetExpr::Lit(_, b)) => env
            .ctors_in_mask(d, a & !b)
            .map(|k| Constraint::new(guard(), Body::Empty(k)))
            .collect(),
        (SetExpr::Lit(d, a), SetExpr::Cell(c)) => env
            .ctors_in_mask(d, a)
            .map(|k| Constraint::new(guard(), Body::Mem(k, c)))
            .collect(),
        (SetExpr::Cell(a), SetExpr::Cell(b)) => vec![Constraint::new(guard(), Body::Sub(a, b))],
        (SetExpr::Cell(a), SetExpr::Lit(_, m)) => vec![Constraint::new(guard(), Body::Upper(a, m))],
    }
}

/// Identifies the case expression a constraint was generated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteId(pub u32);

/// A deduplicated set of atomic constraints, each with the case site it
/// traces back to, if any.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    items: IndexMap<Constraint, Option<SiteId>, FxBuildHasher>,
}

impl PartialEq for ConstraintSet {
    fn eq(&self, other: &Self) -> bool {
        self.items.len() == other.items.len() && self.items.keys().all(|c| other.items.contains_key(c))
    }
}

impl Eq for ConstraintSet {}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Adds `c`; returns false if it was already present (its origin is kept).
    pub fn insert(&mut self, c: Constraint) -> bool {
        self.insert_with_origin(c, None)
    }

    pub fn insert_with_origin(&mut self, c: Constraint, origin: Option<SiteId>) -> bool {
        match self.items.entry(c) {
            indexmap::map::Entry::Occupied(mut e) => {
                if e.get().is_none() && origin.is_some() {
                    *e.get_mut() = origin;
                }
                false
            }
            indexmap::map::Entry::Vacant(e) => {
                e.insert(origin);
                true
            }
        }
    }

    pub fn insert_raw(&mut self, env: &DatatypeEnv, raw: &RawConstraint, origin: Option<SiteId>) {
        for c in atomize(env, raw) {
            self.insert_with_origin(c, origin);
        }
    }

    pub fn extend_from(&mut self, other: &ConstraintSet) {
        for (c, o) in &other.items {
            self.insert_with_origin(c.clone(), *o);
        }
    }

    /// Adds every constraint of `other` under the extra guard atoms.
    pub fn extend_guarded(&mut self, other: &ConstraintSet, extra: &[GuardAtom]) {
        for (c, o) in &other.items {
            self.insert_with_origin(c.with_guard(extra), *o);
        }
    }

    pub fn contains(&self, c: &Constraint) -> bool {
        self.items.contains_key(c)
    }

    pub fn origin(&self, c: &Constraint) -> Option<SiteId> {
        self.items.get(c).copied().flatten()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.items.keys()
    }

    pub fn iter_with_origins(&self) -> impl Iterator<Item = (&Constraint, Option<SiteId>)> {
        self.items.iter().map(|(c, o)| (c, *o))
    }

    /// Constraints in canonical order.
    pub fn sorted(&self) -> Vec<&Constraint> {
        let mut v: Vec<_> = self.items.keys().collect();
        v.sort();
        v
    }

    pub fn frv(&self) -> BTreeSet<RefinementVar> {
        self.items.keys().flat_map(|c| c.vars().collect::<Vec<_>>()).collect()
    }

    /// Scopes derived from the cells mentioned: each variable gets the union of
    /// the slices of the datatypes it is mentioned at.
    pub fn var_scopes(&self, env: &DatatypeEnv) -> VarScopes {
        let mut out = VarScopes::new();
        for c in self.items.keys() {
            for cell in c.cells() {
                out.entry(cell.var).or_default().extend(env.slice(cell.dt).members.iter().copied());
            }
        }
        out
    }

    pub fn rename(&self, ren: &BTreeMap<RefinementVar, RefinementVar>) -> ConstraintSet {
        let mut out = ConstraintSet::new();
        for (c, o) in &self.items {
            out.insert_with_origin(c.rename(ren), *o);
        }
        out
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&Constraint) -> bool) {
        self.items.retain(|c, _| keep(c));
    }

    pub fn first_trivially_unsat(&self) -> Option<(&Constraint, Option<SiteId>)> {
        self.items.iter().find(|(c, _)| c.is_trivially_unsat()).map(|(c, o)| (c, *o))
    }

    pub fn is_trivially_unsat(&self) -> bool {
        self.first_trivially_unsat().is_some()
    }

    /// One constraint per line in canonical order.
    pub fn render(&self, env: &DatatypeEnv) -> String {
        let mut s = String::new();
        for c in self.sorted() {
            s.push_str(&c.display(env).to_string());
            s.push('\n');
        }
        s
    }
}

impl FromIterator<Constraint> for ConstraintSet {
    fn from_iter<I: IntoIterator<Item = Constraint>>(iter: I) -> Self {
        let mut s = ConstraintSet::new();
        for c in iter {
            s.insert(c);
        }
        s
    }
}

/// A total map from cells to constructor subsets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Assignment {
    cells: BTreeMap<Cell, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("assignment has no value for {0}")]
pub struct MissingVar(pub RefinementVar);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, var: RefinementVar, dt: DatatypeId, mask: u64) {
        self.cells.insert(Cell::new(var, dt), mask);
    }

    pub fn set_choice(&mut self, var: RefinementVar, f: &ChoiceFunction) {
        for (d, m) in f.iter() {
            self.set(var, d, m);
        }
    }

    pub fn get(&self, var: RefinementVar, dt: DatatypeId) -> Option<u64> {
        self.cells.get(&Cell::new(var, dt)).copied()
    }

    pub fn cell(&self, c: Cell) -> Result<u64, MissingVar> {
        self.cells.get(&c).copied().ok_or(MissingVar(c.var))
    }

    pub fn choice_function(&self, env: &DatatypeEnv, var: RefinementVar, root: DatatypeId) -> Option<ChoiceFunction> {
        let mut choices = BTreeMap::new();
        for &d in &env.slice(root).members {
            choices.insert(d, self.get(var, d)?);
        }
        Some(ChoiceFunction::new(env, root, &choices))
    }

    pub fn cells(&self) -> impl Iterator<Item = (Cell, u64)> + '_ {
        self.cells.iter().map(|(c, m)| (*c, *m))
    }

    /// Restriction to the given variables.
    pub fn project(&self, vars: &BTreeSet<RefinementVar>) -> Assignment {
        Assignment {
            cells: self.cells.iter().filter(|(c, _)| vars.contains(&c.var)).map(|(c, m)| (*c, *m)).collect(),
        }
    }

    pub fn eval(&self, e: SetExpr) -> Result<u64, MissingVar> {
        match e {
            SetExpr::Lit(_, m) => Ok(m),
            SetExpr::Cell(c) => self.cell(c),
        }
    }

    fn guard_holds(&self, env: &DatatypeEnv, guard: &[GuardAtom]) -> Result<bool, MissingVar> {
        for g in guard {
            if self.cell(g.cell)? & env.ctor_bit(g.ctor) == 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn satisfies_constraint(&self, env: &DatatypeEnv, c: &Constraint) -> Result<bool, MissingVar> {
        let body = match c.body {
            Body::Sub(a, b) => self.cell(a)? & !self.cell(b)? == 0,
            Body::Upper(a, m) => self.cell(a)? & !m == 0,
            Body::Mem(k, a) => self.cell(a)? & env.ctor_bit(k) != 0,
            Body::Empty(_) => false,
        };
        // Missing variables in the guard are reported even when the body holds.
        let guard = self.guard_holds(env, &c.guard)?;
        Ok(body || !guard)
    }

    pub fn satisfies_raw(&self, env: &DatatypeEnv, c: &RawConstraint) -> Result<bool, MissingVar> {
        let body = self.eval(c.lhs)? & !self.eval(c.rhs)? == 0;
        let guard = self.guard_holds(env, &c.guard)?;
        Ok(body || !guard)
    }
}

pub fn satisfies(env: &DatatypeEnv, theta: &Assignment, set: &ConstraintSet) -> Result<bool, MissingVar> {
    for c in set.iter() {
        if !theta.satisfies_constraint(env, c)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every total assignment over `scopes`, in a fixed order.
pub fn enumerate_assignments<'a>(env: &'a DatatypeEnv, scopes: &VarScopes) -> AssignmentIter<'a> {
    let cells: Vec<(Cell, u32)> = scopes
        .iter()
        .flat_map(|(x, ds)| ds.iter().map(|d| (Cell::new(*x, *d), env.ctors_of(*d).len() as u32)))
        .collect();
    let total: u32 = cells.iter().map(|(_, n)| n).sum();
    assert!(total < 64, "assignment space of 2^{total} is too large to enumerate");
    AssignmentIter { _env: env, cells, next: 0, end: 1u64 << total }
}

/// Number of assignments `enumerate_assignments` yields.
pub fn assignment_count(env: &DatatypeEnv, scopes: &VarScopes) -> u128 {
    let bits: u32 = scopes.values().flatten().map(|d| env.ctors_of(*d).len() as u32).sum();
    1u128 << bits
}

pub struct AssignmentIter<'a> {
    _env: &'a DatatypeEnv,
    cells: Vec<(Cell, u32)>,
    next: u64,
    end: u64,
}

impl Iterator for AssignmentIter<'_> {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        if self.next >= self.end {
            return None;
        }
        let mut code = self.next;
        self.next += 1;
        let mut theta = Assignment::new();
        for (c, n) in &self.cells {
            let mask = if *n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            theta.cells.insert(*c, code & mask);
            code = code.checked_shr(*n).unwrap_or(0);
        }
        Some(theta)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ConstraintParseError {
    pub line: usize,
    pub message: String,
}

/// Parses constraints in the line format, e.g.
/// `[Cst in X3(Lam)] ? X1(Lam) <= X2(Lam)`. Variable names are resolved by
/// `var`; blank lines and `--` comments are skipped.
pub fn parse_constraints(
    env: &DatatypeEnv,
    text: &str,
    var: &mut dyn FnMut(&str) -> Option<RefinementVar>,
) -> Result<Vec<RawConstraint>, ConstraintParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split("--").next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ConstraintParseError { line: i + 1, message };
        out.push(parse_line(env, line, var).map_err(err)?);
    }
    Ok(out)
}

/// Resolves `X<n>` to variable `n`.
pub fn numbered_var(name: &str) -> Option<RefinementVar> {
    name.strip_prefix('X')?.parse().ok().map(RefinementVar)
}

/// Parses and atomizes, with `X<n>` naming variable `n`.
pub fn parse_constraint_set(env: &DatatypeEnv, text: &str) -> Result<ConstraintSet, ConstraintParseError> {
    let raws = parse_constraints(env, text, &mut numbered_var)?;
    let mut set = ConstraintSet::new();
    for r in &raws {
        set.insert_raw(env, r, None);
    }
    Ok(set)
}

fn parse_line(
    env: &DatatypeEnv,
    line: &str,
    var: &mut dyn FnMut(&str) -> Option<RefinementVar>,
) -> Result<RawConstraint, String> {
    let (guard_text, body_text) = match line.find('?') {
        Some(p) => (line[..p].trim(), line[p + 1..].trim()),
        None => return Err("expected `?`".into()),
    };
    let mut guard = Vec::new();
    if !guard_text.is_empty() {
        let inner = guard_text
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or("guard must be bracketed")?;
        for atom in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, s) = atom.split_once(" in ").ok_or_else(|| format!("bad guard atom `{atom}`"))?;
            let k = ctor(env, k.trim())?;
            let cell = parse_cell(env, s.trim(), var)?;
            if env.ctor(k).datatype != cell.dt {
                return Err(format!("`{}` is not a constructor of {}", env.ctor_name(k), env.datatype_name(cell.dt)));
            }
            guard.push(GuardAtom::new(k, cell));
        }
    }
    if let Some((l, r)) = body_text.split_once("<=") {
        let lhs = parse_set(env, l.trim(), None, var)?;
        let rhs = parse_set(env, r.trim(), Some(lhs.datatype()), var)?;
        let lhs = match lhs {
            SetExpr::Lit(_, m) => SetExpr::Lit(rhs.datatype(), m),
            e => e,
        };
        if lhs.datatype() != rhs.datatype() {
            return Err("sides have different datatypes".into());
        }
        Ok(RawConstraint::new(guard, lhs, rhs))
    } else if let Some((k, s)) = body_text.split_once(" in ") {
        let k = ctor(env, k.trim())?;
        let d = env.ctor(k).datatype;
        let rhs = parse_set(env, s.trim(), Some(d), var)?;
        if rhs.datatype() != d {
            return Err("membership across datatypes".into());
        }
        Ok(RawConstraint::membership(env, guard, k, rhs))
    } else {
        Err(format!("cannot parse body `{body_text}`"))
    }
}

fn ctor(env: &DatatypeEnv, name: &str) -> Result<CtorId, String> {
    env.lookup_ctor(name).ok_or_else(|| format!("unknown constructor `{name}`"))
}

fn parse_cell(
    env: &DatatypeEnv,
    s: &str,
    var: &mut dyn FnMut(&str) -> Option<RefinementVar>,
) -> Result<Cell, String> {
    let (name, rest) = s.split_once('(').ok_or_else(|| format!("expected cell, got `{s}`"))?;
    let dt = rest.strip_suffix(')').ok_or_else(|| format!("unclosed cell `{s}`"))?.trim();
    let x = var(name.trim()).ok_or_else(|| format!("unknown variable `{}`", name.trim()))?;
    let d = env.lookup_datatype(dt).ok_or_else(|| format!("unknown datatype `{dt}`"))?;
    Ok(Cell::new(x, d))
}

fn parse_set(
    env: &DatatypeEnv,
    s: &str,
    hint: Option<DatatypeId>,
    var: &mut dyn FnMut(&str) -> Option<RefinementVar>,
) -> Result<SetExpr, String> {
    if let Some(inner) = s.strip_prefix('{') {
        let inner = inner.strip_suffix('}').ok_or("unclosed set literal")?;
        let mut d = hint;
        let mut mask = 0;
        for name in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let k = ctor(env, name)?;
            let kd = env.ctor(k).datatype;
            if d.is_some_and(|d| d != kd) {
                return Err("set literal mixes datatypes".into());
            }
            d = Some(kd);
            mask |= env.ctor_bit(k);
        }
        // An empty literal on the left takes the datatype of the right side.
        Ok(SetExpr::Lit(d.unwrap_or(DatatypeId(u32::MAX)), mask))
    } else {
        parse_cell(env, s, var).map(SetExpr::Cell)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::fixtures::lam_env;

    fn x(n: u32) -> RefinementVar {
        RefinementVar(n)
    }

    #[test]
    fn roundtrip_text_format() {
        let env = lam_env();
        let text = "[Cst in X3(Lam), Lit in X4(Arith)] ? X1(Lam) <= X2(Lam)\n? Cst in X1(Lam)\n? X3(Lam) <= {Cst,FVr}\n? Cst in {}\n";
        let set = parse_constraint_set(&env, text).unwrap();
        assert_eq!(set.len(), 4);
        let rendered = set.render(&env);
        let again = parse_constraint_set(&env, &rendered).unwrap();
        assert_eq!(again, set);
        assert!(rendered.contains("[Cst in X3(Lam), Lit in X4(Arith)] ? X1(Lam) <= X2(Lam)"));
        assert!(rendered.contains("? X3(Lam) <= {Cst,FVr}"));
    }

    #[test]
    fn literal_order_is_declaration_order() {
        let env = lam_env();
        let set = parse_constraint_set(&env, "? X3(Lam) <= {FVr,Cst}").unwrap();
        assert_eq!(set.render(&env), "? X3(Lam) <= {Cst,FVr}\n");
    }

    #[test]
    fn atomize_examples() {
        let env = lam_env();
        let lam = env.lookup_datatype("Lam").unwrap();
        let cst = env.lookup_ctor("Cst").unwrap();
        let fvr = env.lookup_ctor("FVr").unwrap();
        let cell = Cell::new(x(0), lam);
        let single = RawConstraint::membership(&env, vec![], cst, SetExpr::Cell(cell));
        assert_eq!(atomize(&env, &single), vec![Constraint::unguarded(Body::Mem(cst, cell))]);
        let lit = SetExpr::Lit(lam, env.ctor_bit(cst) | env.ctor_bit(fvr));
        assert!(atomize(&env, &RawConstraint::membership(&env, vec![], cst, lit)).is_empty());
        let g = vec![GuardAtom::new(fvr, cell)];
        let empty = RawConstraint::membership(&env, g.clone(), cst, SetExpr::Lit(lam, 0));
        assert_eq!(atomize(&env, &empty), vec![Constraint::new(g, Body::Empty(cst))]);
    }

    #[test]
    fn enumeration_counts() {
        let env = lam_env();
        let lam = env.lookup_datatype("Lam").unwrap();
        let arith = env.lookup_datatype("Arith").unwrap();
        let one = |d: DatatypeId| -> VarScopes { [(x(0), env.slice(d).members.clone())].into() };
        assert_eq!(enumerate_assignments(&env, &one(arith)).count(), 8);
        assert_eq!(enumerate_assignments(&env, &one(lam)).count(), 256);
        assert_eq!(assignment_count(&env, &one(lam)), 256);
        let none: Vec<_> = enumerate_assignments(&env, &VarScopes::new()).collect();
        assert_eq!(none, vec![Assignment::new()]);
        let distinct: BTreeSet<Vec<(Cell, u64)>> =
            enumerate_assignments(&env, &one(lam)).map(|t| t.cells().collect()).collect();
        assert_eq!(distinct.len(), 256);
    }

    #[test]
    fn satisfaction_examples() {
        let env = lam_env();
        let lam = env.lookup_datatype("Lam").unwrap();
        let set = parse_constraint_set(&env, "? Cst in X1(Lam)").unwrap();
        let mut theta = Assignment::new();
        let f = ChoiceFunction::from_ctor_names(&env, lam, &["Cst"]).unwrap();
        theta.set_choice(x(1), &f);
        assert!(satisfies(&env, &theta, &set).unwrap());
        assert!(satisfies(&env, &theta, &ConstraintSet::new()).unwrap());

        let set = parse_constraint_set(&env, "[FVr in X1(Lam)] ? X1(Lam) <= X3(Lam)").unwrap();
        let mut theta = Assignment::new();
        theta.set_choice(x(1), &ChoiceFunction::from_ctor_names(&env, lam, &["Cst", "FVr", "App"]).unwrap());
        theta.set_choice(x(3), &ChoiceFunction::empty(&env, lam));
        assert!(!satisfies(&env, &theta, &set).unwrap());
        assert_eq!(satisfies(&env, &Assignment::new(), &set), Err(MissingVar(x(1))));
    }

    #[test]
    fn atomize_preserves_solutions() {
        let env = lam_env();
        let lam = env.lookup_datatype("Lam").unwrap();
        let scopes: VarScopes = [(x(0), env.slice(lam).members.clone()), (x(1), env.slice(lam).members.clone())].into();
        let cst = env.lookup_ctor("Cst").unwrap();
        let app = env.lookup_ctor("App").unwrap();
        let c0 = Cell::new(x(0), lam);
        let c1 = Cell::new(x(1), lam);
        let two = env.ctor_bit(cst) | env.ctor_bit(app);
        let raws = [
            RawConstraint::new(vec![GuardAtom::new(app, c1)], SetExpr::Lit(lam, two), SetExpr::Cell(c0)),
            RawConstraint::new(vec![], SetExpr::Lit(lam, two), SetExpr::Lit(lam, env.ctor_bit(cst))),
            RawConstraint::new(vec![GuardAtom::new(cst, c0)], SetExpr::Cell(c0), SetExpr::Lit(lam, two)),
        ];
        for raw in &raws {
            let atoms: ConstraintSet = atomize(&env, raw).into_iter().collect();
            for theta in enumerate_assignments(&env, &scopes) {
                assert_eq!(theta.satisfies_raw(&env, raw).unwrap(), satisfies(&env, &theta, &atoms).unwrap());
            }
        }
    }

    #[test]
    fn duplicates_collapse() {
        let env = lam_env();
        let a = parse_constraint_set(&env, "[Cst in X1(Lam), Cst in X1(Lam)] ? X1(Lam) <= X2(Lam)\n[Cst in X1(Lam)] ? X1(Lam) <= X2(Lam)").unwrap();
        assert_eq!(a.len(), 1);
    }
}
