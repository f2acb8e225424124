//! End-to-end acceptance checks. Runs every criterion, prints one line per
//! criterion and fails if any of them fails.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use patmatch_core::bench::bench_chain;
use patmatch_core::constraint::{enumerate_assignments, parse_constraint_set, satisfies, ConstraintSet};
use patmatch_core::eval::{fuzz_entry, fuzz_program, FuzzConfig};
use patmatch_core::gen::{lam_env, oracle_env, random_atomic_set, random_scopes, GenConfig};
use patmatch_core::infer::{check_program, CheckOptions, SafetyReport};
use patmatch_core::program::CoreProgram;
use patmatch_core::refinement::{ChoiceFunction, ConstrainedScheme, ExtType, Refinement, RefinementVar, VarScopes};
use patmatch_core::solver::{restrict, saturate};
use patmatch_core::subtype::{check_subtype_by_simulation, infer_subtype, is_subtype_ground};
use patmatch_core::surface::load;
use patmatch_core::types::{BaseType, DatatypeEnv};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus(name: &str) -> PathBuf {
    corpus_dir().join(name)
}

fn checked(name: &str) -> (CoreProgram, SafetyReport) {
    let text = std::fs::read_to_string(corpus(name)).unwrap();
    let p = load(&text).unwrap();
    let r = check_program(&p, &CheckOptions::default()).unwrap();
    (p, r)
}

fn cli_exit(file: &str) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_patmatch-refine"))
        .arg("check")
        .arg(corpus(file))
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

const EX_SAT_INPUT: &str = "\
? Cst in X1(Lam)
? X1(Lam) <= X2(Lam)
[FVr in X2(Lam)] ? X2(Lam) <= X3(Lam)
? X3(Lam) <= {FVr,Cst}
";

// Listed in the order it is usually presented, not canonical order.
const EX_SAT_SATURATED: &str = "\
? Cst in X1(Lam)
? X1(Lam) <= X2(Lam)
? Cst in X2(Lam)
[FVr in X2(Lam)] ? X2(Lam) <= X3(Lam)
[FVr in X2(Lam)] ? X1(Lam) <= X3(Lam)
[FVr in X2(Lam)] ? Cst in X3(Lam)
[FVr in X1(Lam)] ? X2(Lam) <= X3(Lam)
[FVr in X1(Lam)] ? X1(Lam) <= X3(Lam)
[FVr in X1(Lam)] ? Cst in X3(Lam)
? X3(Lam) <= {FVr,Cst}
[FVr in X2(Lam)] ? X2(Lam) <= {FVr,Cst}
[FVr in X2(Lam)] ? X1(Lam) <= {FVr,Cst}
[FVr in X1(Lam)] ? X2(Lam) <= {FVr,Cst}
[FVr in X1(Lam)] ? X1(Lam) <= {FVr,Cst}
";

const EX_SAT_STARRED: &str = "\
? Cst in X1(Lam)
[FVr in X1(Lam)] ? X1(Lam) <= X3(Lam)
[FVr in X1(Lam)] ? Cst in X3(Lam)
? X3(Lam) <= {FVr,Cst}
[FVr in X1(Lam)] ? X1(Lam) <= {FVr,Cst}
";

fn golden_saturation() -> Outcome {
    let start = Instant::now();
    let env = lam_env();
    let input = parse_constraint_set(&env, EX_SAT_INPUT).map_err(|e| e.to_string())?;
    let r = saturate(&env, &input).map_err(|e| e.to_string())?;
    let expected = parse_constraint_set(&env, EX_SAT_SATURATED).map_err(|e| e.to_string())?;
    ensure!(expected.len() == EX_SAT_SATURATED.lines().count(), "expected listing has duplicates");
    let got = r.set.render(&env);
    ensure!(got == expected.render(&env), "saturation differs:\n{got}");
    let iface: BTreeSet<_> = [RefinementVar(1), RefinementVar(3)].into();
    let starred = parse_constraint_set(&env, EX_SAT_STARRED).map_err(|e| e.to_string())?;
    let restricted = restrict(&r.set, &iface).render(&env);
    ensure!(restricted == starred.render(&env), "restriction differs:\n{restricted}");
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(1), "took {t:?}");
    Ok(format!("{} constraints, {} after restriction, {t:?}", r.set.len(), starred.len()))
}

fn oracle_corpus() -> (DatatypeEnv, Vec<(VarScopes, ConstraintSet)>) {
    let env = oracle_env();
    let cfg = GenConfig { max_vars: 3, max_constraints: 12, ..GenConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let sets = (0..500)
        .map(|_| {
            let scopes = random_scopes(&env, &mut rng, &cfg);
            let c = random_atomic_set(&env, &mut rng, &scopes, &cfg);
            (scopes, c)
        })
        .collect();
    (env, sets)
}

fn saturation_equivalence() -> Outcome {
    let start = Instant::now();
    let (env, sets) = oracle_corpus();
    let mut checked = 0u64;
    for (i, (scopes, c)) in sets.iter().enumerate() {
        let r = saturate(&env, c).map_err(|e| e.to_string())?;
        for theta in enumerate_assignments(&env, scopes) {
            let a = satisfies(&env, &theta, c).unwrap();
            let b = satisfies(&env, &theta, &r.set).unwrap();
            ensure!(a == b, "set {i}: solutions differ at {theta:?}");
            checked += 1;
        }
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(60), "took {t:?}");
    Ok(format!("{} sets, {checked} assignments, 0 violations, {t:?}", sets.len()))
}

fn unsat_detection() -> Outcome {
    let (env, sets) = oracle_corpus();
    let mut unsat = 0;
    for (i, (scopes, c)) in sets.iter().enumerate() {
        let r = saturate(&env, c).map_err(|e| e.to_string())?;
        let solvable = enumerate_assignments(&env, scopes).any(|t| satisfies(&env, &t, c).unwrap());
        ensure!(solvable != r.is_unsatisfiable(), "set {i}: brute force says solvable={solvable}");
        unsat += usize::from(!solvable);
    }
    Ok(format!("{} sets ({unsat} unsatisfiable), 0 violations", sets.len()))
}

fn restriction_extension() -> Outcome {
    let env = oracle_env();
    let cfg = GenConfig { max_vars: 3, max_constraints: 12, ..GenConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut done = 0;
    while done < 200 {
        let scopes = random_scopes(&env, &mut rng, &cfg);
        let c = random_atomic_set(&env, &mut rng, &scopes, &cfg);
        let r = saturate(&env, &c).map_err(|e| e.to_string())?;
        if r.is_unsatisfiable() {
            continue;
        }
        let iface: BTreeSet<RefinementVar> = scopes.keys().copied().filter(|_| rng.gen_bool(0.5)).collect();
        let restricted = restrict(&r.set, &iface);
        let extendable: HashSet<_> = enumerate_assignments(&env, &scopes)
            .filter(|t| satisfies(&env, t, &r.set).unwrap())
            .map(|t| t.project(&iface))
            .collect();
        let sub: VarScopes = scopes.iter().filter(|(x, _)| iface.contains(x)).map(|(x, d)| (*x, d.clone())).collect();
        for theta in enumerate_assignments(&env, &sub) {
            if satisfies(&env, &theta, &restricted).unwrap() {
                ensure!(extendable.contains(&theta), "solution {theta:?} of the restriction does not extend");
            }
        }
        done += 1;
    }
    Ok("200 solvable sets, 0 violations".into())
}

/// Every refinement position is one of two variables or a fixed choice.
fn positions(env: &DatatypeEnv, shape: &[&str]) -> Vec<Vec<Refinement>> {
    let choices = |d: &str| -> Vec<Refinement> {
        let root = env.lookup_datatype(d).unwrap();
        let named: &[&[&str]] = match d {
            "Lam" => &[&["Cst", "BVr", "FVr", "Abs", "App", "Lit", "Add", "Mul"], &["Cst", "App", "Lit"]],
            _ => &[&["Lit", "Add", "Mul"], &["Add"], &[]],
        };
        named
            .iter()
            .map(|n| Refinement::Choice(Arc::new(ChoiceFunction::from_ctor_names(env, root, n).unwrap())))
            .collect()
    };
    shape
        .iter()
        .map(|d| {
            let mut v = vec![Refinement::Var(RefinementVar(1)), Refinement::Var(RefinementVar(2))];
            v.extend(choices(d));
            v
        })
        .collect()
}

fn data(env: &DatatypeEnv, d: &str, r: Refinement) -> ExtType {
    ExtType::Data(env.lookup_datatype(d).unwrap(), r, vec![])
}

fn subtype_oracle() -> Outcome {
    let env = lam_env();
    // Each shape lists its datatype occurrences and builds the type from
    // one refinement per occurrence.
    type Build = fn(&DatatypeEnv, &[Refinement]) -> ExtType;
    let shapes: Vec<(Vec<&str>, Build)> = vec![
        (vec!["Lam"], |e, r| data(e, "Lam", r[0].clone())),
        (vec!["Arith"], |e, r| data(e, "Arith", r[0].clone())),
        (vec!["Lam"], |e, r| ExtType::arrow(data(e, "Lam", r[0].clone()), ExtType::Base(BaseType::String))),
        (vec!["Arith", "Lam"], |e, r| ExtType::arrow(data(e, "Arith", r[0].clone()), data(e, "Lam", r[1].clone()))),
        (vec!["Lam", "Arith"], |e, r| {
            ExtType::arrow(ExtType::arrow(data(e, "Lam", r[0].clone()), ExtType::Base(BaseType::Int)), data(e, "Arith", r[1].clone()))
        }),
    ];
    let mut pairs = 0u64;
    let mut checks = 0u64;
    for (shape, build) in &shapes {
        let both: Vec<&str> = shape.iter().chain(shape.iter()).copied().collect();
        let alphabet = positions(&env, &both);
        let mut idx = vec![0usize; both.len()];
        loop {
            let picks: Vec<Refinement> = idx.iter().zip(&alphabet).map(|(i, a)| a[*i].clone()).collect();
            let (l, r) = picks.split_at(shape.len());
            let (t1, t2) = (build(&env, l), build(&env, r));
            let mut out = ConstraintSet::new();
            infer_subtype(&env, &t1, &t2, &mut out).map_err(|e| e.to_string())?;
            let mut scopes = VarScopes::new();
            t1.var_scopes(&env, &mut scopes);
            t2.var_scopes(&env, &mut scopes);
            for theta in enumerate_assignments(&env, &scopes) {
                let g1 = t1.ground(&env, &theta).unwrap();
                let g2 = t2.ground(&env, &theta).unwrap();
                let expected = is_subtype_ground(&env, &g1, &g2);
                ensure!(
                    expected == check_subtype_by_simulation(&env, &g1, &g2).is_ok(),
                    "ground checkers disagree on {} vs {}",
                    g1.display(&env),
                    g2.display(&env)
                );
                ensure!(
                    satisfies(&env, &theta, &out).unwrap() == expected,
                    "constraints for {} <= {} wrong at {theta:?}",
                    t1.display(&env),
                    t2.display(&env)
                );
                checks += 1;
            }
            pairs += 1;
            // Next index vector, odometer style.
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < alphabet[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    Ok(format!("{pairs} type pairs, {checks} assignments, 0 violations"))
}

/// Parses `text` with `X1, X2, ...` standing for the scheme's variables.
fn over_scheme(env: &DatatypeEnv, s: &ConstrainedScheme, text: &str) -> ConstraintSet {
    let ren: BTreeMap<_, _> = (0..s.vars.len()).map(|i| (RefinementVar(i as u32 + 1), s.vars[i])).collect();
    parse_constraint_set(env, text).unwrap().rename(&ren)
}

fn scheme_scopes(env: &DatatypeEnv, s: &ConstrainedScheme) -> VarScopes {
    let mut scopes = VarScopes::new();
    s.body.var_scopes(env, &mut scopes);
    scopes
}

fn k_combinator() -> Outcome {
    let src = "\
data Arith = Lit Int | Add | Mul
data Lam = Cst Arith | BVr Int | FVr String | Abs Lam | App Lam Lam
extern k : forall a b. a -> b -> a
let f : Lam -> Lam = \\x -> k x (f (f x))
";
    let p = load(src).map_err(|e| e.to_string())?;
    let r = check_program(&p, &CheckOptions::default()).map_err(|e| e.to_string())?;
    let s = &r.def("f").unwrap().scheme;
    ensure!(s.vars.len() == 2, "expected two interface variables, got {}", s.vars.len());
    let expected = over_scheme(
        &p.env,
        s,
        "? X1(Lam) <= X2(Lam)\n? X2(Lam) <= X1(Lam)\n[Cst in X1(Lam)] ? X1(Arith) <= X2(Arith)\n[Cst in X2(Lam)] ? X2(Arith) <= X1(Arith)",
    );
    let mut n = 0u64;
    for theta in enumerate_assignments(&p.env, &scheme_scopes(&p.env, s)) {
        let a = satisfies(&p.env, &theta, &s.constraints).unwrap();
        ensure!(a == satisfies(&p.env, &theta, &expected).unwrap(), "differs at {theta:?}");
        n += 1;
    }
    ensure!(n == 1 << 16, "enumerated {n} assignments");
    Ok(format!("equivalent over {n} assignments"))
}

fn end_to_end() -> Outcome {
    let (code, _) = cli_exit("dnf.idr0");
    ensure!(code == 0, "dnf.idr0 exit {code}");
    let (code, out) = cli_exit("dnf_unsafe.idr0");
    ensure!(code == 1, "dnf_unsafe.idr0 exit {code}");
    let (_, r) = checked("dnf_unsafe.idr0");
    let blamed: Vec<_> = r.unsafe_defs().map(|(_, b)| b.site_def.clone()).collect();
    ensure!(blamed == ["nnf2dnf"], "mutant blamed {blamed:?}");
    ensure!(out.contains("`nnf2dnf`"), "warning does not name nnf2dnf: {out}");
    let (p, _) = checked("dnf_unsafe.idr0");
    let cfg = FuzzConfig { depth: 2, ..FuzzConfig::default() };
    let crash = fuzz_entry(&p, p.lookup_item("dnf").unwrap(), &cfg).map_err(|e| e.to_string())?;
    ensure!(!crash.failures.is_empty(), "evaluator found no crash at depth 2");
    ensure!(crash.failures[0].1.contains("`nnf2dnf`"), "crash elsewhere: {:?}", crash.failures[0]);
    let (code, _) = cli_exit("map_poly.idr0");
    ensure!(code == 0, "map_poly.idr0 exit {code}");
    let (code, _) = cli_exit("map_misuse.idr0");
    ensure!(code == 1, "map_misuse.idr0 exit {code}");
    let (_, r) = checked("map_misuse.idr0");
    let blamed: Vec<_> = r.unsafe_defs().map(|(d, b)| (d.name.clone(), b.missing.clone())).collect();
    ensure!(blamed == [("main".to_string(), vec!["Imp".to_string()])], "misuse blamed {blamed:?}");
    Ok(format!("dnf safe, mutant flagged and crashed on {}, map safe, misuse flagged", crash.failures[0].0))
}

fn subst_fixture() -> Outcome {
    let (p, r) = checked("subst.idr0");
    let s = &r.def("subst").unwrap().scheme;
    ensure!(s.vars.len() == 3, "expected three interface variables");
    let scopes = scheme_scopes(&p.env, s);
    let solutions: Vec<_> =
        enumerate_assignments(&p.env, &scopes).filter(|t| satisfies(&p.env, t, &s.constraints).unwrap()).collect();
    ensure!(!solutions.is_empty(), "scheme is unsatisfiable");
    let families = [
        "[Var in X2(Tm)] ? X1(Tm) <= X3(Tm)",
        "[Cst in X2(Tm)] ? Cst in X3(Tm)",
        "[App in X2(Tm)] ? App in X3(Tm)",
        "? X2(Tm) <= {Var,Cst,App}",
    ];
    for f in families {
        let c = over_scheme(&p.env, s, f);
        ensure!(solutions.iter().all(|t| satisfies(&p.env, t, &c).unwrap()), "not entailed: {f}");
    }
    Ok(format!("{} families entailed over {} solutions", families.len(), solutions.len()))
}

fn scaling() -> Outcome {
    let start = Instant::now();
    let opts = CheckOptions::default();
    let mut best = BTreeMap::new();
    let mut sizes = BTreeMap::new();
    // Best of three runs per size, to keep scheduler noise out of the ratio.
    for _ in 0..3 {
        for n in [50, 100, 200] {
            let r = bench_chain(n, &opts).map_err(|e| e.to_string())?;
            ensure!(r.safe, "chain of {n} reported unsafe");
            sizes.insert(n, (r.max_size(), r.stats.i));
            let e = best.entry(n).or_insert(r.elapsed);
            *e = (*e).min(r.elapsed);
        }
    }
    let distinct: BTreeSet<_> = sizes.values().collect();
    ensure!(distinct.len() == 1, "summary sizes vary: {sizes:?}");
    let ratio = best[&200].as_secs_f64() / best[&100].as_secs_f64();
    ensure!(ratio <= 3.0, "t(200)/t(100) = {ratio:.2}");
    let total = start.elapsed();
    ensure!(total < Duration::from_secs(120), "took {total:?}");
    Ok(format!(
        "max size {} for every N, t(200)/t(100) = {ratio:.2}, total {total:?}",
        sizes[&50].0
    ))
}

fn fuzz_soundness() -> Outcome {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(corpus_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "idr0") {
            files.push(path);
        }
    }
    files.sort();
    let cfg = FuzzConfig { depth: 4, ..FuzzConfig::default() };
    let (mut safe_files, mut runs) = (0, 0);
    for f in &files {
        let p = load(&std::fs::read_to_string(f).unwrap()).unwrap();
        let r = check_program(&p, &CheckOptions::default()).unwrap();
        if !r.is_safe() {
            continue;
        }
        safe_files += 1;
        for e in fuzz_program(&p, &r, &cfg).map_err(|e| e.to_string())? {
            ensure!(e.result.exhaustive, "{}: `{}` was sampled, not enumerated", f.display(), e.def);
            ensure!(e.result.failures.is_empty(), "{}: `{}` failed on {:?}", f.display(), e.def, e.result.failures[0]);
            runs += e.result.runs;
        }
    }
    ensure!(safe_files >= 10, "only {safe_files} safe corpus files");
    Ok(format!("{safe_files} safe files, {runs} runs, 0 failures"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("golden saturation", golden_saturation),
        ("saturation preserves solutions", saturation_equivalence),
        ("unsatisfiability detection", unsat_detection),
        ("restriction and extension", restriction_extension),
        ("subtype constraint inference", subtype_oracle),
        ("K combinator scheme", k_combinator),
        ("end-to-end examples", end_to_end),
        ("subst scheme families", subst_fixture),
        ("chain scaling", scaling),
        ("fuzz soundness", fuzz_soundness),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match r {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
