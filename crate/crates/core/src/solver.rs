//! Saturation, restriction and solution extraction.

use std::collections::{BTreeSet, HashMap, VecDeque};

use indexmap::IndexMap;
use rustc_hash::{FxBuildHasher, FxHashMap};
use thiserror::Error;

use crate::constraint::{Assignment, Body, Cell, Constraint, ConstraintSet, GuardAtom, SiteId};
use crate::refinement::{RefinementVar, VarScopes};
use crate::types::DatatypeEnv;

pub const DEFAULT_MAX_CONSTRAINTS: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("saturation exceeded the limit of {limit} constraints")]
pub struct LimitExceeded {
    pub limit: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SaturationStats {
    pub input: usize,
    pub output: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SaturationResult {
    pub set: ConstraintSet,
    pub trivially_unsat: bool,
    pub stats: SaturationStats,
}

impl SaturationResult {
    pub fn is_unsatisfiable(&self) -> bool {
        self.trivially_unsat
    }
}

pub fn is_unsatisfiable(r: &SaturationResult) -> bool {
    r.trivially_unsat
}

pub fn saturate(env: &DatatypeEnv, c: &ConstraintSet) -> Result<SaturationResult, LimitExceeded> {
    saturate_onto(env, None, c, DEFAULT_MAX_CONSTRAINTS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaturateOptions {
    pub limit: usize,
    /// Drop a constraint when another with the same body and a subset of its
    /// guard is present. The result is then closed only up to such redundant
    /// constraints, which is equivalent for satisfiability, solutions and
    /// restriction, and avoids enumerating guard combinations around cycles.
    pub subsume: bool,
}

impl Default for SaturateOptions {
    fn default() -> Self {
        SaturateOptions { limit: DEFAULT_MAX_CONSTRAINTS, subsume: false }
    }
}

/// Saturates `base ∪ extra`, where `base` must already be closed under the
/// rules; pairs of base constraints are not recombined.
pub fn saturate_onto(
    env: &DatatypeEnv,
    base: Option<&ConstraintSet>,
    extra: &ConstraintSet,
    limit: usize,
) -> Result<SaturationResult, LimitExceeded> {
    saturate_onto_with(env, base, extra, SaturateOptions { limit, subsume: false })
}

/// [`saturate_onto`] with explicit options; with `subsume` the base need only
/// be closed up to subsumed constraints.
pub fn saturate_onto_with(
    env: &DatatypeEnv,
    base: Option<&ConstraintSet>,
    extra: &ConstraintSet,
    opts: SaturateOptions,
) -> Result<SaturationResult, LimitExceeded> {
    let mut st = State::new(env, opts);
    let input = base.map_or(0, ConstraintSet::len) + extra.len();
    if let Some(base) = base {
        for (c, o) in base.iter_with_origins() {
            if let Some(i) = st.add(c.clone(), o)? {
                st.index(i);
            }
        }
        st.queue.clear();
    }
    for (c, o) in extra.iter_with_origins() {
        st.add(c.clone(), o)?;
    }
    let iterations = st.run()?;
    let mut set = ConstraintSet::new();
    for (i, (c, o)) in st.items.into_iter().enumerate() {
        if !st.dead.get(i).copied().unwrap_or(false) {
            set.insert_with_origin(c, o);
        }
    }
    let trivially_unsat = set.is_trivially_unsat();
    let output = set.len();
    Ok(SaturationResult { set, trivially_unsat, stats: SaturationStats { input, output, iterations } })
}

/// Keeps exactly the constraints whose variables all lie in `interface`.
pub fn restrict(c: &ConstraintSet, interface: &BTreeSet<RefinementVar>) -> ConstraintSet {
    let mut out = c.clone();
    out.retain(|k| k.mentions_only(interface));
    out
}

/// Reads a solution off the unguarded memberships of a saturated set; every
/// cell in `scopes` not mentioned by one is empty.
pub fn extract_solution(env: &DatatypeEnv, r: &SaturationResult, scopes: &VarScopes) -> Option<Assignment> {
    if r.trivially_unsat {
        return None;
    }
    let mut theta = Assignment::new();
    for (x, ds) in scopes {
        for d in ds {
            theta.set(*x, *d, 0);
        }
    }
    let mut bits: HashMap<Cell, u64> = HashMap::new();
    for c in r.set.iter().filter(|c| c.is_unguarded()) {
        if let Body::Mem(k, cell) = c.body {
            *bits.entry(cell).or_default() |= env.ctor_bit(k);
        }
    }
    for (cell, m) in bits {
        theta.set(cell.var, cell.dt, m);
    }
    Some(theta)
}

#[derive(Default)]
struct Indexes {
    // Sub(c, _) and Upper(c, _).
    by_lhs: FxHashMap<Cell, Vec<usize>>,
    // Sub(_, c) and Mem(_, c).
    by_rhs: FxHashMap<Cell, Vec<usize>>,
    mem_by_atom: FxHashMap<GuardAtom, Vec<usize>>,
    guarded_by_atom: FxHashMap<GuardAtom, Vec<usize>>,
    guarded_by_cell: FxHashMap<Cell, Vec<usize>>,
}

impl Indexes {
    fn insert(&mut self, i: usize, c: &Constraint) {
        match c.body {
            Body::Sub(a, b) => {
                self.by_lhs.entry(a).or_default().push(i);
                self.by_rhs.entry(b).or_default().push(i);
            }
            Body::Upper(a, _) => self.by_lhs.entry(a).or_default().push(i),
            Body::Mem(k, a) => {
                self.by_rhs.entry(a).or_default().push(i);
                self.mem_by_atom.entry(GuardAtom::new(k, a)).or_default().push(i);
            }
            Body::Empty(_) => {}
        }
        let mut last_cell = None;
        for g in c.guard() {
            self.guarded_by_atom.entry(*g).or_default().push(i);
            if last_cell != Some(g.cell) {
                self.guarded_by_cell.entry(g.cell).or_default().push(i);
                last_cell = Some(g.cell);
            }
        }
    }
}

fn peers<'m, K: std::hash::Hash + Eq>(
    map: &'m FxHashMap<K, Vec<usize>>,
    key: &K,
    dead: &'m [bool],
) -> impl Iterator<Item = usize> + 'm {
    map.get(key).map_or(&[][..], Vec::as_slice).iter().copied().filter(move |&j| !dead[j])
}

/// Whether sorted `a` is a subset of sorted `b`.
fn subset(a: &[GuardAtom], b: &[GuardAtom]) -> bool {
    let mut it = b.iter();
    a.iter().all(|x| it.any(|y| y == x))
}

type Derived = (Vec<GuardAtom>, Body, Option<SiteId>);

struct State<'a> {
    env: &'a DatatypeEnv,
    opts: SaturateOptions,
    items: IndexMap<Constraint, Option<SiteId>, FxBuildHasher>,
    queue: VecDeque<usize>,
    idx: Indexes,
    // Subsumed constraints; only ever set when `opts.subsume`.
    dead: Vec<bool>,
    live: usize,
    by_body: FxHashMap<Body, Vec<usize>>,
}

impl<'a> State<'a> {
    fn new(env: &'a DatatypeEnv, opts: SaturateOptions) -> Self {
        State {
            env,
            opts,
            items: IndexMap::default(),
            queue: VecDeque::new(),
            idx: Indexes::default(),
            dead: Vec::new(),
            live: 0,
            by_body: FxHashMap::default(),
        }
    }

    fn add(&mut self, c: Constraint, origin: Option<SiteId>) -> Result<Option<usize>, LimitExceeded> {
        if self.opts.subsume && !self.items.contains_key(&c) {
            let peers = self.by_body.entry(c.body).or_default();
            let mut covered = false;
            peers.retain(|&j| {
                if covered || self.dead[j] {
                    return !self.dead[j];
                }
                let g = self.items.get_index(j).unwrap().0.guard();
                if subset(g, c.guard()) {
                    covered = true;
                    true
                } else if subset(c.guard(), g) {
                    self.dead[j] = true;
                    self.live -= 1;
                    false
                } else {
                    true
                }
            });
            if covered {
                return Ok(None);
            }
            peers.push(self.items.len());
        }
        match self.items.entry(c) {
            indexmap::map::Entry::Occupied(mut e) => {
                if e.get().is_none() && origin.is_some() {
                    *e.get_mut() = origin;
                }
                Ok(None)
            }
            indexmap::map::Entry::Vacant(e) => {
                let i = e.index();
                e.insert(origin);
                self.dead.push(false);
                self.live += 1;
                if self.live > self.opts.limit {
                    return Err(LimitExceeded { limit: self.opts.limit });
                }
                self.queue.push_back(i);
                Ok(Some(i))
            }
        }
    }

    fn index(&mut self, i: usize) {
        let (c, _) = self.items.get_index(i).unwrap();
        self.idx.insert(i, c);
    }

    fn run(&mut self) -> Result<usize, LimitExceeded> {
        let mut iterations = 0;
        let mut out = Vec::new();
        while let Some(i) = self.queue.pop_front() {
            if self.dead[i] {
                continue;
            }
            iterations += 1;
            self.index(i);
            Step { env: self.env, items: &self.items, idx: &self.idx, dead: &self.dead, out: &mut out }.all(i);
            for (guard, body, origin) in out.drain(..) {
                let c = Constraint::new(guard, body);
                if !c.is_tautology(self.env) {
                    self.add(c, origin)?;
                }
            }
        }
        Ok(iterations)
    }
}

/// One worklist step: every rule instance with the popped constraint as
/// either premise and a previously processed constraint (or itself) as the
/// other.
struct Step<'s> {
    env: &'s DatatypeEnv,
    items: &'s IndexMap<Constraint, Option<SiteId>, FxBuildHasher>,
    idx: &'s Indexes,
    dead: &'s [bool],
    out: &'s mut Vec<Derived>,
}

impl<'s> Step<'s> {
    fn get(&self, i: usize) -> (&'s Constraint, Option<SiteId>) {
        let (c, o) = self.items.get_index(i).unwrap();
        (c, *o)
    }

    fn all(&mut self, i: usize) {
        let (c, o) = self.get(i);
        match c.body {
            Body::Sub(_, b) | Body::Mem(_, b) => {
                for j in peers(&self.idx.by_lhs, &b, self.dead) {
                    let (r, ro) = self.get(j);
                    self.transitivity(c, o, r, ro);
                }
            }
            _ => {}
        }
        match c.body {
            Body::Sub(a, _) | Body::Upper(a, _) => {
                for j in peers(&self.idx.by_rhs, &a, self.dead) {
                    let (l, lo) = self.get(j);
                    self.transitivity(l, lo, c, o);
                }
            }
            _ => {}
        }
        if let Body::Mem(k, cell) = c.body {
            let atom = GuardAtom::new(k, cell);
            for j in peers(&self.idx.guarded_by_atom, &atom, self.dead) {
                let (g, go) = self.get(j);
                self.satisfaction(c, o, g, go, atom);
            }
        }
        for &atom in c.guard() {
            for j in peers(&self.idx.mem_by_atom, &atom, self.dead) {
                let (m, mo) = self.get(j);
                self.satisfaction(m, mo, c, o, atom);
            }
        }
        if let Body::Sub(_, y) = c.body {
            for j in peers(&self.idx.guarded_by_cell, &y, self.dead) {
                let (g, go) = self.get(j);
                for &atom in g.guard().iter().filter(|a| a.cell == y) {
                    self.weakening(c, o, g, go, atom);
                }
            }
        }
        for &atom in c.guard() {
            for j in peers(&self.idx.by_rhs, &atom.cell, self.dead) {
                let (s, so) = self.get(j);
                if matches!(s.body, Body::Sub(..)) {
                    self.weakening(s, so, c, o, atom);
                }
            }
        }
    }

    fn transitivity(&mut self, l: &Constraint, lo: Option<SiteId>, r: &Constraint, ro: Option<SiteId>) {
        let guard = union(l.guard(), r.guard());
        let origin = ro.or(lo);
        let body = match (l.body, r.body) {
            (Body::Sub(a, _), Body::Sub(_, b)) => Body::Sub(a, b),
            (Body::Sub(a, _), Body::Upper(_, m)) => Body::Upper(a, m),
            (Body::Mem(k, _), Body::Sub(_, b)) => Body::Mem(k, b),
            (Body::Mem(k, _), Body::Upper(_, m)) => {
                if m & self.env.ctor_bit(k) != 0 {
                    return;
                }
                Body::Empty(k)
            }
            _ => unreachable!("transitivity on non-matching bodies"),
        };
        self.out.push((guard, body, origin));
    }

    fn satisfaction(&mut self, m: &Constraint, mo: Option<SiteId>, g: &Constraint, go: Option<SiteId>, atom: GuardAtom) {
        let mut guard: Vec<_> = g.guard().iter().copied().filter(|a| *a != atom).collect();
        guard.extend_from_slice(m.guard());
        self.out.push((guard, g.body, go.or(mo)));
    }

    fn weakening(&mut self, s: &Constraint, so: Option<SiteId>, g: &Constraint, go: Option<SiteId>, atom: GuardAtom) {
        let Body::Sub(x, _) = s.body else { unreachable!() };
        let mut guard: Vec<_> = g.guard().iter().copied().filter(|a| *a != atom).collect();
        guard.push(GuardAtom::new(atom.ctor, x));
        guard.extend_from_slice(s.guard());
        self.out.push((guard, g.body, go.or(so)));
    }
}

fn union(a: &[GuardAtom], b: &[GuardAtom]) -> Vec<GuardAtom> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{enumerate_assignments, parse_constraint_set, satisfies};
    use crate::gen::{oracle_env, random_atomic_set, random_scopes, GenConfig};
    use crate::types::fixtures::lam_env;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EX_SAT_INPUT: &str = "\
? Cst in X1(Lam)
? X1(Lam) <= X2(Lam)
[FVr in X2(Lam)] ? X2(Lam) <= X3(Lam)
? X3(Lam) <= {FVr,Cst}
";

    fn lines(s: &str) -> BTreeSet<String> {
        s.lines().map(str::to_string).collect()
    }

    #[test]
    fn ex_sat_golden() {
        let env = lam_env();
        let input = parse_constraint_set(&env, EX_SAT_INPUT).unwrap();
        let r = saturate(&env, &input).unwrap();
        let expected = lines(
            "\
? Cst in X1(Lam)
? X1(Lam) <= X2(Lam)
? Cst in X2(Lam)
[FVr in X2(Lam)] ? X2(Lam) <= X3(Lam)
[FVr in X2(Lam)] ? X1(Lam) <= X3(Lam)
[FVr in X2(Lam)] ? Cst in X3(Lam)
[FVr in X1(Lam)] ? X2(Lam) <= X3(Lam)
[FVr in X1(Lam)] ? X1(Lam) <= X3(Lam)
[FVr in X1(Lam)] ? Cst in X3(Lam)
? X3(Lam) <= {Cst,FVr}
[FVr in X2(Lam)] ? X2(Lam) <= {Cst,FVr}
[FVr in X2(Lam)] ? X1(Lam) <= {Cst,FVr}
[FVr in X1(Lam)] ? X2(Lam) <= {Cst,FVr}
[FVr in X1(Lam)] ? X1(Lam) <= {Cst,FVr}",
        );
        assert_eq!(lines(&r.set.render(&env)), expected);
        assert!(!r.is_unsatisfiable());
        let restricted = restrict(&r.set, &[RefinementVar(1), RefinementVar(3)].into());
        let starred = lines(
            "\
? Cst in X1(Lam)
[FVr in X1(Lam)] ? X1(Lam) <= X3(Lam)
[FVr in X1(Lam)] ? Cst in X3(Lam)
? X3(Lam) <= {Cst,FVr}
[FVr in X1(Lam)] ? X1(Lam) <= {Cst,FVr}",
        );
        assert_eq!(lines(&restricted.render(&env)), starred);
    }

    #[test]
    fn ex_sat_solution() {
        let env = lam_env();
        let r = saturate(&env, &parse_constraint_set(&env, EX_SAT_INPUT).unwrap()).unwrap();
        let scopes = r.set.var_scopes(&env);
        let theta = extract_solution(&env, &r, &scopes).unwrap();
        let lam = env.lookup_datatype("Lam").unwrap();
        let arith = env.lookup_datatype("Arith").unwrap();
        let cst = env.ctor_bit(env.lookup_ctor("Cst").unwrap());
        assert_eq!(theta.get(RefinementVar(1), lam), Some(cst));
        assert_eq!(theta.get(RefinementVar(2), lam), Some(cst));
        assert_eq!(theta.get(RefinementVar(3), lam), Some(0));
        assert_eq!(theta.get(RefinementVar(1), arith), Some(0));
        assert!(satisfies(&env, &theta, &r.set).unwrap());
    }

    #[test]
    fn empty_set() {
        let env = lam_env();
        let r = saturate(&env, &ConstraintSet::new()).unwrap();
        assert!(r.set.is_empty());
        assert!(!r.is_unsatisfiable());
        assert_eq!(extract_solution(&env, &r, &VarScopes::new()), Some(Assignment::new()));
    }

    #[test]
    fn chain_on_single_constructor() {
        let env = DatatypeEnv::from_defs(&[("U", &[], &[("K", &[])])]).unwrap();
        let input = parse_constraint_set(&env, "? X1(U) <= X2(U)\n? X2(U) <= X3(U)\n? K in X1(U)").unwrap();
        let r = saturate(&env, &input).unwrap();
        let got = lines(&r.set.render(&env));
        for c in ["? X1(U) <= X3(U)", "? K in X2(U)", "? K in X3(U)"] {
            assert!(got.contains(c), "missing {c}");
        }
        let scopes = input.var_scopes(&env);
        for theta in enumerate_assignments(&env, &scopes) {
            assert_eq!(satisfies(&env, &theta, &input).unwrap(), satisfies(&env, &theta, &r.set).unwrap());
        }
    }

    #[test]
    fn detects_unsat() {
        let env = lam_env();
        let input = parse_constraint_set(&env, "? X1(Lam) <= {Cst}\n? FVr in X1(Lam)").unwrap();
        let r = saturate(&env, &input).unwrap();
        assert!(r.is_unsatisfiable());
        assert_eq!(r.set.first_trivially_unsat().unwrap().0.display(&env).to_string(), "? FVr in {}");
        assert!(enumerate_assignments(&env, &input.var_scopes(&env)).all(|t| !satisfies(&env, &t, &input).unwrap()));
        assert_eq!(extract_solution(&env, &r, &input.var_scopes(&env)), None);
    }

    #[test]
    fn limit_is_reported() {
        let env = lam_env();
        let input = parse_constraint_set(&env, EX_SAT_INPUT).unwrap();
        assert_eq!(saturate_onto(&env, None, &input, 8).unwrap_err(), LimitExceeded { limit: 8 });
    }

    #[test]
    fn restrict_identities() {
        let env = lam_env();
        let r = saturate(&env, &parse_constraint_set(&env, EX_SAT_INPUT).unwrap()).unwrap();
        assert_eq!(restrict(&r.set, &r.set.frv()), r.set);
        let ground = parse_constraint_set(&env, "? Cst in {}\n? Cst in X1(Lam)").unwrap();
        assert_eq!(restrict(&ground, &BTreeSet::new()).render(&env), "? Cst in {}\n");
    }

    #[test]
    fn origins_follow_upper_bounds() {
        let env = lam_env();
        let mut input = parse_constraint_set(&env, "? FVr in X1(Lam)").unwrap();
        for c in parse_constraint_set(&env, "? X1(Lam) <= {Cst}").unwrap().iter() {
            input.insert_with_origin(c.clone(), Some(SiteId(7)));
        }
        let r = saturate(&env, &input).unwrap();
        assert_eq!(r.set.first_trivially_unsat().unwrap().1, Some(SiteId(7)));
    }

    #[test]
    fn random_sets_are_idempotent_and_incremental() {
        let env = oracle_env();
        let cfg = GenConfig { max_constraints: 8, ..GenConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let scopes = random_scopes(&env, &mut rng, &cfg);
            let a = random_atomic_set(&env, &mut rng, &scopes, &cfg);
            let b = random_atomic_set(&env, &mut rng, &scopes, &cfg);
            let sa = saturate(&env, &a).unwrap();
            let again = saturate(&env, &sa.set).unwrap();
            assert_eq!(again.set, sa.set);
            let mut union = a.clone();
            union.extend_from(&b);
            let full = saturate(&env, &union).unwrap();
            let inc = saturate_onto(&env, Some(&sa.set), &b, DEFAULT_MAX_CONSTRAINTS).unwrap();
            assert_eq!(inc.set, full.set);
        }
    }

    #[test]
    fn random_sets_preserve_solutions() {
        let env = oracle_env();
        let cfg = GenConfig { max_bits: 9, ..GenConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let scopes = random_scopes(&env, &mut rng, &cfg);
            let c = random_atomic_set(&env, &mut rng, &scopes, &cfg);
            let r = saturate(&env, &c).unwrap();
            let mut any = false;
            for theta in enumerate_assignments(&env, &scopes) {
                let s = satisfies(&env, &theta, &c).unwrap();
                any |= s;
                assert_eq!(s, satisfies(&env, &theta, &r.set).unwrap());
            }
            assert_eq!(any, !r.is_unsatisfiable());
            if let Some(theta) = extract_solution(&env, &r, &scopes) {
                assert!(satisfies(&env, &theta, &r.set).unwrap());
            }
        }
    }

    // Every constraint of `full` is present in `reduced` or subsumed by one
    // of its members, and `reduced` adds nothing new.
    fn reduces(reduced: &ConstraintSet, full: &ConstraintSet) -> bool {
        reduced.iter().all(|c| full.contains(c))
            && full.iter().all(|c| reduced.iter().any(|r| r.body == c.body && subset(r.guard(), c.guard())))
    }

    #[test]
    fn subsumption_matches_plain_saturation() {
        let env = oracle_env();
        let cfg = GenConfig { max_bits: 9, ..GenConfig::default() };
        let opts = SaturateOptions { subsume: true, ..SaturateOptions::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let scopes = random_scopes(&env, &mut rng, &cfg);
            let a = random_atomic_set(&env, &mut rng, &scopes, &cfg);
            let b = random_atomic_set(&env, &mut rng, &scopes, &cfg);
            let mut union = a.clone();
            union.extend_from(&b);
            let full = saturate(&env, &union).unwrap();
            let red = saturate_onto_with(&env, None, &union, opts).unwrap();
            assert!(reduces(&red.set, &full.set));
            assert_eq!(red.is_unsatisfiable(), full.is_unsatisfiable());
            let ra = saturate_onto_with(&env, None, &a, opts).unwrap();
            let inc = saturate_onto_with(&env, Some(&ra.set), &b, opts).unwrap();
            assert!(reduces(&inc.set, &full.set));
            let iface: BTreeSet<_> = scopes.keys().copied().filter(|_| rng.gen_bool(0.5)).collect();
            let (rr, rf) = (restrict(&red.set, &iface), restrict(&full.set, &iface));
            let sub: VarScopes = scopes.iter().filter(|(x, _)| iface.contains(x)).map(|(x, d)| (*x, d.clone())).collect();
            for theta in enumerate_assignments(&env, &sub) {
                assert_eq!(satisfies(&env, &theta, &rr).unwrap(), satisfies(&env, &theta, &rf).unwrap());
            }
        }
    }
}
