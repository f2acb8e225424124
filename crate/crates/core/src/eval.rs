//! A call-by-value interpreter and a typed input generator. Programs the
//! checker accepts must never reach a case with no matching arm.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::constraint::SiteId;
use crate::infer::{accepts_all_inputs, SafetyReport};
use crate::program::{CoreArm, CoreProgram, Expr, ExprKind, Item, VarRef};
use crate::surface::Span;
use crate::types::{BaseType, CtorId, DatatypeEnv, UType};

#[derive(Clone)]
pub enum Value<'p> {
    Int(i64),
    Str(Rc<str>),
    /// A constructor applied to the arguments seen so far.
    Con(CtorId, Rc<Vec<Value<'p>>>),
    Closure(Rc<Closure<'p>>),
    /// A generated function ignoring its argument.
    Const(Rc<Value<'p>>),
    Extern(usize),
}

pub struct Closure<'p> {
    param: &'p str,
    body: &'p Expr,
    env: Env<'p>,
    owner: Option<usize>,
}

impl<'p> Value<'p> {
    pub fn con(k: CtorId, args: Vec<Value<'p>>) -> Self {
        Value::Con(k, Rc::new(args))
    }

    pub fn display<'a>(&'a self, env: &'a DatatypeEnv) -> impl fmt::Display + 'a {
        DisplayValue { v: self, env, nested: false }
    }

    /// Structural equality on first-order values; functions never compare equal.
    pub fn same(&self, other: &Value<'_>) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Con(k, a), Value::Con(l, b)) => k == l && a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.same(y)),
            _ => false,
        }
    }
}

impl fmt::Debug for Value<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "Int({n})"),
            Value::Str(s) => write!(f, "Str({s:?})"),
            Value::Con(k, args) => f.debug_tuple("Con").field(&k.0).field(&**args).finish(),
            Value::Closure(c) => write!(f, "Closure({})", c.param),
            Value::Const(v) => f.debug_tuple("Const").field(&**v).finish(),
            Value::Extern(i) => write!(f, "Extern({i})"),
        }
    }
}

struct DisplayValue<'a, 'p> {
    v: &'a Value<'p>,
    env: &'a DatatypeEnv,
    nested: bool,
}

impl fmt::Display for DisplayValue<'_, '_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.v {
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Con(k, args) => {
                let paren = self.nested && !args.is_empty();
                if paren {
                    f.write_str("(")?;
                }
                f.write_str(self.env.ctor_name(*k))?;
                for a in args.iter() {
                    write!(f, " {}", DisplayValue { v: a, env: self.env, nested: true })?;
                }
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Value::Closure(_) | Value::Const(_) | Value::Extern(_) => f.write_str("<function>"),
        }
    }
}

#[derive(Clone)]
struct EnvNode<'p> {
    name: &'p str,
    value: Value<'p>,
    next: Env<'p>,
}

type Env<'p> = Option<Rc<EnvNode<'p>>>;

fn bind<'p>(env: &Env<'p>, name: &'p str, value: Value<'p>) -> Env<'p> {
    Some(Rc::new(EnvNode { name, value, next: env.clone() }))
}

fn lookup<'p>(mut env: &Env<'p>, name: &str) -> Option<Value<'p>> {
    while let Some(n) = env {
        if n.name == name {
            return Some(n.value.clone());
        }
        env = &n.next;
    }
    None
}

#[derive(Debug, Clone)]
pub enum RunOutcome<'p> {
    Normal(Value<'p>),
    PatternMatchFailure { site: SiteId, span: Span, def: String, ctor: String },
    FuelExhausted,
    /// An extern was called; it has no implementation, so the run is
    /// inconclusive.
    ExternReached(String),
}

impl RunOutcome<'_> {
    pub fn is_failure(&self) -> bool {
        matches!(self, RunOutcome::PatternMatchFailure { .. })
    }
}

enum Stop {
    Match { site: SiteId, ctor: CtorId },
    Fuel,
    Extern(usize),
}

enum Frame<'p> {
    Arg(&'p Expr, Env<'p>, Option<usize>),
    Call(Value<'p>),
    Case(&'p [CoreArm], SiteId, Env<'p>, Option<usize>),
}

enum Global<'p> {
    Unevaluated,
    InProgress,
    Done(Value<'p>),
}

/// Evaluates expressions of one program; top-level values are computed once
/// and shared between runs.
pub struct Evaluator<'p> {
    prog: &'p CoreProgram,
    globals: Vec<Global<'p>>,
    fuel: u64,
}

impl<'p> Evaluator<'p> {
    pub fn new(prog: &'p CoreProgram) -> Self {
        Evaluator { prog, globals: prog.items.iter().map(|_| Global::Unevaluated).collect(), fuel: 0 }
    }

    /// Evaluates a closed expression.
    pub fn eval(&mut self, e: &'p Expr, fuel: u64) -> RunOutcome<'p> {
        self.fuel = fuel;
        let r = self.run(e, None, None);
        self.outcome(r)
    }

    /// Applies top-level item `item` to `args`.
    pub fn call(&mut self, item: usize, args: Vec<Value<'p>>, fuel: u64) -> RunOutcome<'p> {
        self.fuel = fuel;
        let r = self.global(item).and_then(|f| args.into_iter().try_fold(f, |f, a| self.apply(f, a)));
        self.outcome(r)
    }

    fn outcome(&mut self, r: Result<Value<'p>, Stop>) -> RunOutcome<'p> {
        match r {
            Ok(v) => RunOutcome::Normal(v),
            Err(Stop::Fuel) => {
                // A global interrupted mid-evaluation is retried next time.
                for g in &mut self.globals {
                    if matches!(g, Global::InProgress) {
                        *g = Global::Unevaluated;
                    }
                }
                RunOutcome::FuelExhausted
            }
            Err(Stop::Extern(i)) => RunOutcome::ExternReached(self.prog.items[i].name().to_string()),
            Err(Stop::Match { site, ctor }) => {
                let s = self.prog.site(site);
                RunOutcome::PatternMatchFailure {
                    site,
                    span: s.span,
                    def: s.def.clone(),
                    ctor: self.prog.env.ctor_name(ctor).to_string(),
                }
            }
        }
    }

    fn global(&mut self, i: usize) -> Result<Value<'p>, Stop> {
        match &self.globals[i] {
            Global::Done(v) => return Ok(v.clone()),
            // Only a divergent definition can need its own value.
            Global::InProgress => return Err(Stop::Fuel),
            Global::Unevaluated => {}
        }
        let prog = self.prog;
        let v = match &prog.items[i] {
            Item::Extern { .. } => Value::Extern(i),
            Item::Let { body, .. } => {
                self.globals[i] = Global::InProgress;
                self.run(body, None, Some(i))?
            }
        };
        self.globals[i] = Global::Done(v.clone());
        Ok(v)
    }

    fn apply(&mut self, f: Value<'p>, a: Value<'p>) -> Result<Value<'p>, Stop> {
        match f {
            Value::Closure(c) => {
                let env = bind(&c.env, c.param, a);
                self.run(c.body, env, c.owner)
            }
            other => self.apply_simple(other, a).map(|r| r.expect("closures handled above")),
        }
    }

    // Application of anything but a closure; `None` for closures.
    fn apply_simple(&mut self, f: Value<'p>, a: Value<'p>) -> Result<Option<Value<'p>>, Stop> {
        match f {
            Value::Con(k, args) => {
                let mut args = (*args).clone();
                args.push(a);
                Ok(Some(Value::con(k, args)))
            }
            Value::Const(v) => Ok(Some((*v).clone())),
            Value::Extern(i) => Err(Stop::Extern(i)),
            Value::Closure(_) => Ok(None),
            Value::Int(_) | Value::Str(_) => unreachable!("elaborated programs only apply functions"),
        }
    }

    fn tick(&mut self) -> Result<(), Stop> {
        if self.fuel == 0 {
            return Err(Stop::Fuel);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn run(&mut self, e: &'p Expr, env: Env<'p>, owner: Option<usize>) -> Result<Value<'p>, Stop> {
        let mut stack: Vec<Frame<'p>> = Vec::new();
        let mut ctl: Result<(&'p Expr, Env<'p>, Option<usize>), Value<'p>> = Ok((e, env, owner));
        loop {
            let v = match ctl {
                Ok((e, env, owner)) => {
                    self.tick()?;
                    match &e.kind {
                        ExprKind::Int(n) => Value::Int(*n),
                        ExprKind::Str(s) => Value::Str(s.as_str().into()),
                        ExprKind::Con { ctor, .. } => Value::con(*ctor, Vec::new()),
                        ExprKind::Var { var, .. } => match var {
                            VarRef::Local(n) => lookup(&env, n).expect("elaboration resolves locals"),
                            VarRef::Global(i) => self.global(*i)?,
                            VarRef::SelfRef => self.global(owner.expect("recursive reference inside a definition"))?,
                        },
                        ExprKind::App(f, a) => {
                            stack.push(Frame::Arg(a, env.clone(), owner));
                            ctl = Ok((f, env, owner));
                            continue;
                        }
                        ExprKind::Lam { param, body, .. } => {
                            Value::Closure(Rc::new(Closure { param, body, env, owner }))
                        }
                        ExprKind::Case { scrut, arms, site } => {
                            stack.push(Frame::Case(arms, *site, env.clone(), owner));
                            ctl = Ok((scrut, env, owner));
                            continue;
                        }
                    }
                }
                Err(v) => v,
            };
            ctl = match stack.pop() {
                None => return Ok(v),
                Some(Frame::Arg(a, env, owner)) => {
                    stack.push(Frame::Call(v));
                    Ok((a, env, owner))
                }
                Some(Frame::Call(f)) => match f {
                    Value::Closure(c) => Ok((c.body, bind(&c.env, c.param, v), c.owner)),
                    other => Err(self.apply_simple(other, v)?.expect("not a closure")),
                },
                Some(Frame::Case(arms, site, env, owner)) => {
                    let Value::Con(k, args) = v else { unreachable!("case scrutinees are constructor values") };
                    let Some(arm) = arms.iter().find(|a| a.ctor == k) else {
                        return Err(Stop::Match { site, ctor: k });
                    };
                    let mut env = env;
                    for (b, a) in arm.binders.iter().zip(args.iter()) {
                        env = bind(&env, b, a.clone());
                    }
                    Ok((&arm.body, env, owner))
                }
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("cannot enumerate values of function type `{0}`")]
    Function(String),
}

/// Type variables in entry points are instantiated at `Int`.
fn literal(b: BaseType) -> Value<'static> {
    match b {
        BaseType::Int => Value::Int(0),
        BaseType::String => Value::Str("a".into()),
    }
}

/// Enumerates inputs by constructor depth: a constructor with no datatype
/// arguments has depth 1, and base-type arguments come from a one-element
/// literal pool.
pub struct InputGen<'a> {
    env: &'a DatatypeEnv,
    memo: HashMap<(UType, usize), Rc<Vec<Value<'static>>>>,
}

impl<'a> InputGen<'a> {
    pub fn new(env: &'a DatatypeEnv) -> Self {
        InputGen { env, memo: HashMap::new() }
    }

    /// Every value of `ty` up to `depth`, in a fixed order.
    pub fn exhaustive(&mut self, ty: &UType, depth: usize) -> Result<Rc<Vec<Value<'static>>>, GenError> {
        if let Some(v) = self.memo.get(&(ty.clone(), depth)) {
            return Ok(v.clone());
        }
        let out = match ty {
            UType::Base(b) => vec![literal(*b)],
            UType::Var(_) => vec![literal(BaseType::Int)],
            UType::Arrow(..) => return Err(GenError::Function(ty.display(self.env).to_string())),
            UType::Data(d, args) => {
                let mut out = Vec::new();
                if depth > 0 {
                    for &k in self.env.ctors_of(*d) {
                        let arg_tys = self.env.ctor_args_at(k, args);
                        let mut combos: Vec<Vec<Value<'static>>> = vec![Vec::new()];
                        for t in &arg_tys {
                            let vs = self.exhaustive(t, depth - 1)?;
                            combos = combos
                                .iter()
                                .flat_map(|c| {
                                    vs.iter().map(move |v| {
                                        let mut c = c.clone();
                                        c.push(v.clone());
                                        c
                                    })
                                })
                                .collect();
                        }
                        out.extend(combos.into_iter().map(|c| Value::con(k, c)));
                    }
                }
                out
            }
        };
        let out = Rc::new(out);
        self.memo.insert((ty.clone(), depth), out.clone());
        Ok(out)
    }

    /// How many values `exhaustive` would produce, without building them.
    pub fn count(&self, ty: &UType, depth: usize) -> Result<u128, GenError> {
        Ok(match ty {
            UType::Base(_) | UType::Var(_) => 1,
            UType::Arrow(..) => return Err(GenError::Function(ty.display(self.env).to_string())),
            UType::Data(d, args) => {
                if depth == 0 {
                    return Ok(0);
                }
                let mut total = 0u128;
                for &k in self.env.ctors_of(*d) {
                    let mut n = 1u128;
                    for t in self.env.ctor_args_at(k, args) {
                        n = n.saturating_mul(self.count(&t, depth - 1)?);
                    }
                    total = total.saturating_add(n);
                }
                total
            }
        })
    }

    /// A random value of `ty` of depth at most `depth`, if one exists.
    /// Function types yield constant functions.
    pub fn random(&self, ty: &UType, depth: usize, rng: &mut impl Rng) -> Option<Value<'static>> {
        match ty {
            UType::Base(b) => Some(literal(*b)),
            UType::Var(_) => Some(literal(BaseType::Int)),
            UType::Arrow(_, b) => Some(Value::Const(Rc::new(self.random(b, depth, rng)?))),
            UType::Data(d, args) => {
                if depth == 0 {
                    return None;
                }
                let mut ctors = self.env.ctors_of(*d).to_vec();
                ctors.shuffle(rng);
                'next: for k in ctors {
                    let mut vals = Vec::new();
                    for t in self.env.ctor_args_at(k, args) {
                        match self.random(&t, depth - 1, rng) {
                            Some(v) => vals.push(v),
                            None => continue 'next,
                        }
                    }
                    return Some(Value::con(k, vals));
                }
                None
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    pub depth: usize,
    pub fuel: u64,
    /// Above this many input tuples, a seeded sample of this size is used.
    pub max_runs: usize,
    pub seed: u64,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig { depth: 4, fuel: 1_000_000, max_runs: 50_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FuzzResult {
    pub runs: usize,
    pub normal: usize,
    pub inconclusive: usize,
    pub exhaustive: bool,
    /// Rendered input tuple and outcome of each failing run.
    pub failures: Vec<(String, String)>,
}

/// The argument types of a definition with every type variable set to `Int`.
pub fn entry_arguments(p: &CoreProgram, item: usize) -> Vec<UType> {
    let s = p.items[item].scheme();
    let sub = s.vars.iter().map(|v| (v.clone(), UType::Base(BaseType::Int))).collect();
    let ty = s.body.subst(&sub);
    let (args, _) = ty.uncurry();
    args.into_iter().cloned().collect()
}

/// Runs item `item` on generated inputs of its argument types.
pub fn fuzz_entry(p: &CoreProgram, item: usize, cfg: &FuzzConfig) -> Result<FuzzResult, GenError> {
    let env = &p.env;
    let args = entry_arguments(p, item);
    let mut gen = InputGen::new(env);
    let mut total = 1u128;
    for a in &args {
        total = total.saturating_mul(gen.count(a, cfg.depth)?);
    }
    let mut tuples: Vec<Vec<Value<'static>>> = Vec::new();
    let exhaustive = total <= cfg.max_runs as u128;
    if exhaustive {
        tuples.push(Vec::new());
        for a in &args {
            let vs = gen.exhaustive(a, cfg.depth)?;
            tuples = tuples
                .iter()
                .flat_map(|t| {
                    vs.iter().map(move |v| {
                        let mut t = t.clone();
                        t.push(v.clone());
                        t
                    })
                })
                .collect();
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        'sample: for _ in 0..cfg.max_runs {
            let mut t = Vec::new();
            for a in &args {
                match gen.random(a, cfg.depth, &mut rng) {
                    Some(v) => t.push(v),
                    None => break 'sample,
                }
            }
            tuples.push(t);
        }
    }
    let mut ev = Evaluator::new(p);
    let mut res = FuzzResult { exhaustive, ..Default::default() };
    for t in tuples {
        let shown: Vec<String> = t.iter().map(|v| v.display(env).to_string()).collect();
        let out = ev.call(item, t, cfg.fuel);
        res.runs += 1;
        match out {
            RunOutcome::Normal(_) => res.normal += 1,
            RunOutcome::FuelExhausted | RunOutcome::ExternReached(_) => res.inconclusive += 1,
            RunOutcome::PatternMatchFailure { span, def, ctor, .. } => res
                .failures
                .push((shown.join(" "), format!("no arm for {ctor} in the case at {span} in `{def}`"))),
        }
    }
    Ok(res)
}

/// Fuzz results for one entry point of a program.
#[derive(Debug, Clone)]
pub struct EntryFuzz {
    pub def: String,
    pub result: FuzzResult,
}

/// Fuzzes every definition that was found safe and whose summary accepts
/// every input of its first-order argument types. Definitions that are safe
/// only under a precondition on their arguments are skipped, as are
/// higher-order ones.
pub fn fuzz_program(p: &CoreProgram, report: &SafetyReport, cfg: &FuzzConfig) -> Result<Vec<EntryFuzz>, GenError> {
    let mut out = Vec::new();
    for d in report.defs.iter().filter(|d| d.is_safe()) {
        let Some(item) = p.lookup_item(&d.name) else { continue };
        if accepts_all_inputs(p, &d.scheme) != Some(true) {
            continue;
        }
        out.push(EntryFuzz { def: d.name.clone(), result: fuzz_entry(p, item, cfg)? });
    }
    Ok(out)
}
