//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Every criterion returns a transcript of its outputs. Criterion 11 reruns
//! the others on a wider worker pool and compares transcripts byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use unravel::pipeline::{evaluate_workload, with_threads, EvalSettings};
use unravel::report::ReportJson;
use unravel_core::embed::{gradient_check, train, BilinearModel, TrainConfig};
use unravel_core::eval::{evaluate_cq, evaluate_plan, AnswerSet};
use unravel_core::fuzzy::{execute, predicted_cardinality, FuzzyConfig};
use unravel_core::homomorphism::{find_homomorphism, is_contained, verify_mapping};
use unravel_core::metrics::{
    average_ranks, hits_at, mape, mrr, spearman, MetricsReport, QueryEvalRecord, QueryOutcome, RankScope,
};
use unravel_core::plan::compile_plan;
use unravel_core::predictor::{CrispPredictor, LinkPredictor, ScoreTable};
use unravel_core::query::classify;
use unravel_core::querygen::{generate, GenConfig, QueryType};
use unravel_core::synth::{cluster_graph, split, SynthConfig};
use unravel_core::unravel::unravel;
use unravel_core::{derive_seed, Atom, ConjunctiveQuery, EntityId, GraphBuilder, KnowledgeGraph, Term, Triple};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

struct CqShape {
    max_vars: usize,
    max_atoms: usize,
    max_consts: usize,
    relations: Vec<String>,
    constants: Vec<String>,
}

impl CqShape {
    fn small() -> Self {
        CqShape {
            max_vars: 5,
            max_atoms: 6,
            max_consts: 2,
            relations: vec!["R".into(), "S".into(), "T".into()],
            constants: vec!["a".into(), "b".into(), "c".into()],
        }
    }
}

/// Connected pure CQ: each new atom touches a variable already present.
fn random_cq(rng: &mut ChaCha8Rng, shape: &CqShape) -> ConjunctiveQuery {
    let n_atoms = rng.gen_range(1..=shape.max_atoms);
    let mut vars = vec!["x".to_owned()];
    let mut consts: Vec<String> = Vec::new();
    let mut atoms: Vec<Atom> = Vec::new();
    let mut guard = 0;
    while atoms.len() < n_atoms && guard < 1000 {
        guard += 1;
        let from = Term::Var(vars[rng.gen_range(0..vars.len())].clone());
        let roll = rng.gen_range(0..10);
        let other = if roll < 4 && vars.len() < shape.max_vars {
            let name = format!("v{}", vars.len());
            vars.push(name.clone());
            Term::Var(name)
        } else if roll < 6 {
            if consts.len() < shape.max_consts {
                let c = shape.constants[rng.gen_range(0..shape.constants.len())].clone();
                if !consts.contains(&c) {
                    consts.push(c);
                }
            }
            if consts.is_empty() {
                continue;
            }
            Term::Const(consts[rng.gen_range(0..consts.len())].clone())
        } else {
            Term::Var(vars[rng.gen_range(0..vars.len())].clone())
        };
        let rel = &shape.relations[rng.gen_range(0..shape.relations.len())];
        let atom = if rng.gen_bool(0.5) {
            Atom::new(rel, from, other)
        } else {
            Atom::new(rel, other, from)
        };
        if !atoms.contains(&atom) {
            atoms.push(atom);
        }
    }
    ConjunctiveQuery::new("x", atoms)
}

fn render(q: &ConjunctiveQuery) -> String {
    q.atoms().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
}

fn corpus(seed: u64) -> Vec<ConjunctiveQuery> {
    let shape = CqShape::small();
    (0..200)
        .map(|i| random_cq(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, i)), &shape))
        .collect()
}

fn c1_completeness() -> Outcome {
    let qs = corpus(101);
    let lines: Vec<Result<String, String>> = qs
        .par_iter()
        .map(|q| {
            let mut line = String::new();
            for d in 1..=4 {
                let u = ok(unravel(q, d))?;
                let h = ok(find_homomorphism(&u.query, q))?;
                ensure!(h.is_some(), "no homomorphism from depth-{d} unraveling of {}", render(q));
                ensure!(ok(u.canonical_map().verify(&u.query, q))?, "canonical map fails at depth {d} for {}", render(q));
                line.push_str(&format!("{}:{} ", d, u.query.atoms().count()));
            }
            Ok(line)
        })
        .collect();
    Ok(lines.into_iter().collect::<Result<Vec<_>, _>>()?.join("\n"))
}

fn c2_chain() -> Outcome {
    let qs = corpus(101);
    let lines: Vec<Result<String, String>> = qs
        .par_iter()
        .map(|q| {
            let us: Vec<_> = (1..=4).map(|d| unravel(q, d)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
            for d in 0..3 {
                let (lo, hi) = (&us[d].query, &us[d + 1].query);
                ensure!(ok(is_contained(hi, lo))?, "depth {} not contained in depth {} for {}", d + 2, d + 1, render(q));
                let identity: BTreeMap<Term, Term> = lo
                    .atoms()
                    .flat_map(|a| [a.subject.clone(), a.object.clone()])
                    .chain([lo.target_term()])
                    .map(|t| (t.clone(), t))
                    .collect();
                ensure!(ok(verify_mapping(lo, hi, &identity))?, "identity embedding fails at depth {} for {}", d + 1, render(q));
            }
            Ok(us.iter().map(|u| u.query.atoms().count().to_string()).collect::<Vec<_>>().join(","))
        })
        .collect();
    Ok(lines.into_iter().collect::<Result<Vec<_>, _>>()?.join("\n"))
}

/// A random tree-like query of depth at most `d` with a homomorphism into
/// `q`, grown by walking `q` from its target.
fn tree_into(rng: &mut ChaCha8Rng, q: &ConjunctiveQuery, d: usize) -> (ConjunctiveQuery, BTreeMap<Term, Term>) {
    let atoms = q.pure_atoms().expect("pure");
    let mut nodes: Vec<(Term, Term, usize)> = vec![(Term::var("x"), Term::var("x"), 0)];
    let mut hom: BTreeMap<Term, Term> = BTreeMap::new();
    hom.insert(Term::var("x"), Term::var("x"));
    let mut out: Vec<Atom> = Vec::new();
    let want = rng.gen_range(1..=6);
    for _ in 0..50 {
        if out.len() >= want {
            break;
        }
        let (node, image, depth) = nodes[rng.gen_range(0..nodes.len())].clone();
        if depth >= d {
            continue;
        }
        let mut incident: Vec<(&Atom, bool)> = Vec::new();
        for a in atoms {
            if a.subject == image {
                incident.push((a, true));
            }
            if a.object == image {
                incident.push((a, false));
            }
        }
        if incident.is_empty() {
            continue;
        }
        let (a, fwd) = incident[rng.gen_range(0..incident.len())];
        let far = if fwd { &a.object } else { &a.subject };
        let child = match far {
            Term::Const(_) => far.clone(),
            Term::Var(_) => {
                let t = Term::Var(format!("t{}", nodes.len()));
                nodes.push((t.clone(), far.clone(), depth + 1));
                hom.insert(t.clone(), far.clone());
                t
            }
        };
        if child.is_const() {
            hom.insert(child.clone(), child.clone());
        }
        let atom = if fwd {
            Atom::new(&a.relation, node, child)
        } else {
            Atom::new(&a.relation, child, node)
        };
        if !out.contains(&atom) {
            out.push(atom);
        }
    }
    (ConjunctiveQuery::new("x", out), hom)
}

fn c3_optimality() -> Outcome {
    let qs = corpus(303);
    let lines: Vec<Result<String, String>> = (0..100usize)
        .into_par_iter()
        .map(|i| {
            let q = &qs[i];
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(304, i as u64));
            let d = rng.gen_range(1..=4);
            let (tree, hom) = tree_into(&mut rng, q, d);
            if tree.branches[0].is_empty() {
                return Ok(format!("{i}: empty"));
            }
            let shape = ok(classify(&tree))?;
            ensure!(shape.is_tree_like && shape.depth.unwrap_or(0) <= d, "instance {i} is not a tree of depth <= {d}");
            ensure!(ok(verify_mapping(&tree, q, &hom))?, "instance {i}: construction is not a homomorphism");
            let u = ok(unravel(q, d))?;
            let h = ok(find_homomorphism(&tree, &u.query))?;
            ensure!(h.is_some(), "instance {i}: {} has no image in the depth-{d} unraveling of {}", render(&tree), render(q));
            ensure!(ok(h.unwrap().verify(&tree, &u.query))?, "instance {i}: witness fails");
            Ok(format!("{i}: d{d} {}", render(&tree)))
        })
        .collect();
    Ok(lines.into_iter().collect::<Result<Vec<_>, _>>()?.join("\n"))
}

fn random_kg(rng: &mut ChaCha8Rng, n: usize, m: usize, edges: usize) -> KnowledgeGraph {
    let mut b = GraphBuilder::new();
    for e in 0..n {
        b.add_entity(&format!("e{e}"));
    }
    for r in 0..m {
        b.add_relation(&format!("r{r}"));
    }
    while b.num_edges() < edges {
        let t = Triple::new(rng.gen_range(0..n as u32), rng.gen_range(0..m as u32), rng.gen_range(0..n as u32));
        b.add_triple(t).expect("ids in range");
    }
    b.build().expect("nonempty")
}

fn c4_data_completeness() -> Outcome {
    let shape = CqShape {
        max_vars: 5,
        max_atoms: 6,
        max_consts: 2,
        relations: (0..4).map(|r| format!("r{r}")).collect(),
        constants: (0..50).map(|e| format!("e{e}")).collect(),
    };
    let lines: Vec<Result<String, String>> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(404, k));
            let g = random_kg(&mut rng, 50, 4, 300);
            let mut line = Vec::new();
            let mut found = 0;
            while found < 20 {
                let q = random_cq(&mut rng, &shape);
                if !ok(classify(&q))?.is_cyclic {
                    continue;
                }
                found += 1;
                let exact = ok(evaluate_cq(&q, &g))?;
                let mut prev: Option<AnswerSet> = None;
                for d in 1..=3 {
                    let approx = ok(evaluate_cq(&ok(unravel(&q, d))?.query, &g))?;
                    ensure!(exact.is_subset(&approx), "graph {k}: depth {d} loses answers of {}", render(&q));
                    if let Some(p) = &prev {
                        ensure!(approx.is_subset(p), "graph {k}: depth {d} gains answers over depth {} for {}", d - 1, render(&q));
                    }
                    line.push(approx.len().to_string());
                    prev = Some(approx);
                }
                line.push(format!("/{}", exact.len()));
            }
            Ok(line.join(" "))
        })
        .collect();
    Ok(lines.into_iter().collect::<Result<Vec<_>, _>>()?.join("\n"))
}

fn c5_crisp_faithfulness() -> Outcome {
    let g = ok(cluster_graph(&SynthConfig {
        entities: 100,
        relations: 6,
        edges: 900,
        clusters: 5,
        noise: 0.1,
        seed: 505,
    }))?;
    let (train_g, full_g) = ok(split(&g, 0.1, 505))?;
    let crisp = CrispPredictor::new(&full_g);
    let cfg = FuzzyConfig::default();
    let per_type: Vec<Result<String, String>> = QueryType::WORKLOAD
        .par_iter()
        .map(|&t| {
            let gen = GenConfig {
                count: 100,
                seed: 506,
                require_hard: false,
                ..GenConfig::default()
            };
            let batch = ok(generate(t, &train_g, &full_g, &gen))?;
            let mut outcomes = Vec::new();
            for lq in &batch {
                let plan = ok(compile_plan(&lq.query, &full_g))?;
                let fuzzy = ok(execute(&plan, &crisp, &cfg))?;
                let exact = ok(evaluate_plan(&lq.query, &full_g))?;
                ensure!(fuzzy.support() == exact, "{}: fuzzy support differs from exact answers", lq.id());
                let record = QueryEvalRecord {
                    id: lq.id(),
                    query_type: t.name(),
                    scores: fuzzy.scores(),
                    easy: &lq.easy,
                    hard: &lq.hard,
                    predicted_count: predicted_cardinality(&fuzzy, &cfg),
                };
                outcomes.push(ok(record.outcome(RankScope::All))?);
            }
            let report = ok(MetricsReport::from_outcomes(outcomes, false))?;
            let m = &report.aggregate;
            if !t.has_negation() {
                ensure!(m.mrr == 1.0, "{t}: crisp mrr {} != 1", m.mrr);
                ensure!(m.mape == 0.0, "{t}: crisp mape {} != 0", m.mape);
            }
            Ok(format!("{t}: mrr {} mape {} n {}", m.mrr, m.mape, m.n))
        })
        .collect();
    Ok(per_type.into_iter().collect::<Result<Vec<_>, _>>()?.join("\n"))
}

/// Brute-force isomorphism of two pure CQs fixing the target.
fn isomorphic(a: &ConjunctiveQuery, b: &ConjunctiveQuery) -> bool {
    fn vars(q: &ConjunctiveQuery) -> Vec<Term> {
        let mut v: Vec<Term> = q.variables().into_iter().map(Term::Var).collect();
        v.retain(|t| t != &q.target_term());
        v
    }
    let (va, vb) = (vars(a), vars(b));
    if va.len() != vb.len() || a.atoms().count() != b.atoms().count() {
        return false;
    }
    let target: BTreeSet<(String, Term, Term)> =
        b.atoms().map(|x| (x.relation.clone(), x.subject.clone(), x.object.clone())).collect();
    let mut perm: Vec<usize> = (0..vb.len()).collect();
    loop {
        let mut map: BTreeMap<Term, Term> = va.iter().cloned().zip(perm.iter().map(|&i| vb[i].clone())).collect();
        map.insert(a.target_term(), b.target_term());
        let img = |t: &Term| map.get(t).cloned().unwrap_or_else(|| t.clone());
        let mapped: BTreeSet<(String, Term, Term)> =
            a.atoms().map(|x| (x.relation.clone(), img(&x.subject), img(&x.object))).collect();
        if mapped == target {
            return true;
        }
        // next permutation
        let Some(i) = (1..perm.len()).rev().find(|&i| perm[i - 1] < perm[i]) else {
            return false;
        };
        let j = (i..perm.len()).rev().find(|&j| perm[j] > perm[i - 1]).expect("pivot");
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
}

fn c6_triangle_fixture() -> Outcome {
    let v = Term::var;
    let tri = ConjunctiveQuery::new(
        "x",
        vec![
            Atom::new("Friend", v("x"), v("y")),
            Atom::new("Friend", v("y"), v("z")),
            Atom::new("Coworker", v("z"), v("x")),
        ],
    );
    let u = ok(unravel(&tri, 3))?;
    let nvars = u.query.variables().len();
    let natoms = u.query.atoms().count();
    ensure!(nvars == 7 && natoms == 6, "depth-3 triangle has {nvars} variables and {natoms} atoms");
    let expected = ConjunctiveQuery::new(
        "x",
        vec![
            Atom::new("Friend", v("x"), v("y2")),
            Atom::new("Friend", v("y2"), v("z2")),
            Atom::new("Coworker", v("z2"), v("x2")),
            Atom::new("Coworker", v("z1"), v("x")),
            Atom::new("Friend", v("y1"), v("z1")),
            Atom::new("Friend", v("x1"), v("y1")),
        ],
    );
    ensure!(isomorphic(&u.query, &expected), "unraveling {} is not the expected pair of chains", render(&u.query));
    Ok(render(&u.query))
}

fn brute_force_hom(src: &ConjunctiveQuery, dst: &ConjunctiveQuery) -> bool {
    let vars: Vec<Term> = src
        .variables()
        .into_iter()
        .map(Term::Var)
        .filter(|t| t != &src.target_term())
        .collect();
    let mut images: BTreeSet<Term> = dst.atoms().flat_map(|a| [a.subject.clone(), a.object.clone()]).collect();
    images.insert(dst.target_term());
    let images: Vec<Term> = images.into_iter().collect();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let mut map: BTreeMap<Term, Term> = vars.iter().cloned().zip(idx.iter().map(|&i| images[i].clone())).collect();
        map.insert(src.target_term(), dst.target_term());
        for t in src.constants() {
            map.insert(Term::Const(t.clone()), Term::Const(t));
        }
        if verify_mapping(src, dst, &map).unwrap_or(false) {
            return true;
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return false;
            }
            idx[k] += 1;
            if idx[k] < images.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn c7_brute_force_hom() -> Outcome {
    let small = CqShape {
        max_vars: 4,
        max_atoms: 5,
        max_consts: 1,
        relations: vec!["R".into(), "S".into()],
        constants: vec!["a".into(), "b".into()],
    };
    let big = CqShape {
        relations: vec!["R".into(), "S".into()],
        constants: vec!["a".into(), "b".into()],
        ..CqShape::small()
    };
    let lines: Vec<Result<String, String>> = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(707, i));
            let src = random_cq(&mut rng, &small);
            let dst = random_cq(&mut rng, &big);
            let found = ok(find_homomorphism(&src, &dst))?;
            let oracle = brute_force_hom(&src, &dst);
            ensure!(found.is_some() == oracle, "pair {i}: engine says {}, enumeration says {oracle}", found.is_some());
            if let Some(h) = &found {
                ensure!(ok(h.verify(&src, &dst))?, "pair {i}: witness fails verification");
            }
            Ok(format!("{i}:{oracle}"))
        })
        .collect();
    let lines = lines.into_iter().collect::<Result<Vec<_>, _>>()?;
    let positives = lines.iter().filter(|l| l.ends_with("true")).count();
    ensure!(positives > 50 && positives < 450, "degenerate corpus: {positives} of 500 pairs admit a homomorphism");
    Ok(lines.join(" "))
}

fn c8_gradient() -> Outcome {
    let cfg = TrainConfig {
        dim: 16,
        seed: 808,
        ..TrainConfig::default()
    };
    let model = ok(BilinearModel::init(40, 5, &cfg))?;
    let errs: Vec<Result<f64, String>> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(809, i));
            let t = Triple::new(rng.gen_range(0..40), rng.gen_range(0..5), rng.gen_range(0..40));
            let e = ok(gradient_check(&model, &t, 1e-5))?;
            ensure!(e < 1e-4, "triple {i}: relative error {e:e}");
            Ok(e)
        })
        .collect();
    let errs = errs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Ok(format!("max relative error {worst:e}"))
}

fn outcome(id: &str, ranks: &[f64], pred: usize, truth: usize) -> QueryOutcome {
    QueryOutcome {
        id: id.into(),
        query_type: "t".into(),
        ranks: ranks.to_vec(),
        predicted_count: pred,
        true_count: truth,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn c9_metric_fixtures() -> Outcome {
    let qs = vec![
        outcome("q1", &[1.0, 3.0], 2, 2),
        outcome("q2", &[2.0], 3, 1),
        outcome("q3", &[4.0, 12.0, 1.0], 1, 4),
    ];
    // per query: (1 + 1/3)/2, 1/2, (1/4 + 1/12 + 1)/3
    let want_mrr = ((1.0 + 1.0 / 3.0) / 2.0 + 0.5 + (0.25 + 1.0 / 12.0 + 1.0) / 3.0) / 3.0;
    let got = ok(mrr(&qs, false))?;
    ensure!(close(got, want_mrr), "mrr {got} != {want_mrr}");
    let pooled_want = (1.0 + 1.0 / 3.0 + 0.5 + 0.25 + 1.0 / 12.0 + 1.0) / 6.0;
    let got = ok(mrr(&qs, true))?;
    ensure!(close(got, pooled_want), "pooled mrr {got} != {pooled_want}");
    // hits@1: 1/2, 0, 1/3; hits@3: 1, 1, 1/3; hits@10: 1, 1, 2/3
    for (k, want) in [
        (1, (0.5 + 0.0 + 1.0 / 3.0) / 3.0),
        (3, (1.0 + 1.0 + 1.0 / 3.0) / 3.0),
        (10, (1.0 + 1.0 + 2.0 / 3.0) / 3.0),
    ] {
        let got = ok(hits_at(&qs, k))?;
        ensure!(close(got, want), "hits@{k} {got} != {want}");
    }
    let pred = [2.0, 3.0, 1.0];
    let truth = [2.0, 1.0, 4.0];
    let want_mape = (0.0 + 2.0 + 0.75) / 3.0;
    let got = ok(mape(&pred, &truth))?;
    ensure!(close(got, want_mape), "mape {got} != {want_mape}");
    // ranks pred (2,3,1), truth (2,1,3): d = (0,2,-2), 1 - 6*8/(3*8) = -1
    let got = ok(spearman(&pred, &truth))?;
    ensure!(close(got, -1.0), "spearman {got} != -1");
    let xs: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
    let rev: Vec<f64> = xs.iter().rev().cloned().collect();
    let got = ok(spearman(&xs, &rev))?;
    ensure!(close(got, -1.0), "reversed spearman {got}");

    // ties: average ranks, then Pearson on the ranks
    let a = [1.0, 2.0, 2.0, 3.0, 5.0, 5.0, 5.0];
    let b = [2.0, 1.0, 4.0, 4.0, 3.0, 7.0, 6.0];
    let ra = average_ranks(&a);
    ensure!(ra == vec![1.0, 2.5, 2.5, 4.0, 6.0, 6.0, 6.0], "average ranks {ra:?}");
    let rb = average_ranks(&b);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&ra), mean(&rb));
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let sa: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum::<f64>().sqrt();
    let sb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum::<f64>().sqrt();
    let want = cov / (sa * sb);
    let got = ok(spearman(&a, &b))?;
    ensure!(close(got, want), "tie spearman {got} != {want}");
    Ok(format!("{want_mrr} {pooled_want} {want_mape} {want}"))
}

struct EndToEnd {
    reports: Vec<String>,
    best_triangle: f64,
    margin: f64,
}

fn held_out_margin(model: &BilinearModel, train_g: &KnowledgeGraph, full_g: &KnowledgeGraph) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(1010, 7));
    let n = full_g.num_entities() as u32;
    let held: Vec<&Triple> = full_g
        .edges()
        .iter()
        .filter(|t| !train_g.contains(t.head, t.relation, t.tail))
        .collect();
    let (mut pos, mut neg) = (0.0, 0.0);
    for t in &held {
        pos += model.probability(t);
        let mut c = **t;
        loop {
            let e = EntityId(rng.gen_range(0..n));
            if rng.gen_bool(0.5) {
                c.tail = e;
            } else {
                c.head = e;
            }
            if c != **t {
                break;
            }
        }
        neg += model.probability(&c);
    }
    (pos - neg) / held.len() as f64
}

fn end_to_end() -> Result<EndToEnd, String> {
    let g = ok(cluster_graph(&SynthConfig {
        entities: 1000,
        relations: 20,
        edges: 10_000,
        seed: 1001,
        ..SynthConfig::default()
    }))?;
    let (train_g, full_g) = ok(split(&g, 0.1, 1001))?;
    let cfg = TrainConfig {
        dim: 32,
        epochs: 20,
        seed: 1002,
        ..TrainConfig::default()
    };
    let trained = ok(train(&train_g, &cfg))?;
    let margin = held_out_margin(&trained.model, &train_g, &full_g);
    let table = ScoreTable::from_predictor(&trained.model);
    ensure!(table.num_entities() == 1000, "score table size");

    let mut reports = Vec::new();
    let mut best_triangle = f64::NEG_INFINITY;
    for (t, depths) in [(QueryType::Triangle, vec![2, 3, 4]), (QueryType::Square, vec![4, 6])] {
        let gen = GenConfig {
            count: 100,
            seed: 1003,
            ..GenConfig::default()
        };
        let batch = ok(generate(t, &train_g, &full_g, &gen))?;
        ensure!(batch.iter().all(|q| !q.hard.is_empty()), "{t} without hard answers");
        let settings = EvalSettings {
            depths,
            ..EvalSettings::default()
        };
        let out = ok(evaluate_workload(&batch, &full_g, &table, &settings))?;
        for d in &out {
            let m = &d.report.aggregate;
            for (name, v) in [("mrr", m.mrr), ("hits1", m.hits1), ("hits3", m.hits3), ("hits10", m.hits10)] {
                ensure!(v.is_finite() && (0.0..=1.0).contains(&v), "{t} depth {}: {name} = {v}", d.depth);
            }
            ensure!(m.hits1 <= m.hits3 && m.hits3 <= m.hits10, "{t} depth {}: hits not monotone", d.depth);
            ensure!(m.mape.is_finite() && m.mape >= 0.0, "{t} depth {}: mape {}", d.depth, m.mape);
            if let Some(s) = m.spearmanr {
                ensure!((-1.0..=1.0).contains(&s), "{t} depth {}: spearman {s}", d.depth);
                if t == QueryType::Triangle {
                    best_triangle = best_triangle.max(s);
                }
            }
            let json = ok(ReportJson::new("synthetic", "bilinear", d, &settings).to_json())?;
            reports.push(json);
        }
    }
    Ok(EndToEnd {
        reports,
        best_triangle,
        margin,
    })
}

fn c10_end_to_end() -> Outcome {
    let e = end_to_end()?;
    let again = end_to_end()?;
    ensure!(e.reports == again.reports, "identical seeds gave different reports");
    ensure!(e.margin > 0.1, "held-out margin {:.4} <= 0.1", e.margin);
    ensure!(
        e.best_triangle > 0.3,
        "best triangle spearman {:.4} <= 0.3 (margin {:.4})",
        e.best_triangle,
        e.margin
    );
    Ok(format!(
        "margin {:.4} best triangle spearman {:.4}\n{}",
        e.margin,
        e.best_triangle,
        e.reports.join("")
    ))
}

struct Criterion {
    id: usize,
    name: &'static str,
    run: fn() -> Outcome,
}

const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, name: "unraveling maps back into the query", run: c1_completeness },
    Criterion { id: 2, name: "deeper unravelings are contained in shallower ones", run: c2_chain },
    Criterion { id: 3, name: "tree-like queries below the query embed in the unraveling", run: c3_optimality },
    Criterion { id: 4, name: "unraveling answers contain the exact answers", run: c4_data_completeness },
    Criterion { id: 5, name: "crisp fuzzy execution equals symbolic answers", run: c5_crisp_faithfulness },
    Criterion { id: 6, name: "depth-3 triangle unraveling fixture", run: c6_triangle_fixture },
    Criterion { id: 7, name: "homomorphism search agrees with enumeration", run: c7_brute_force_hom },
    Criterion { id: 8, name: "bilinear gradients match finite differences", run: c8_gradient },
    Criterion { id: 9, name: "metric fixtures", run: c9_metric_fixtures },
    Criterion { id: 10, name: "end-to-end synthetic pipeline", run: c10_end_to_end },
];

fn run_guarded(f: fn() -> Outcome, threads: usize) -> Outcome {
    match catch_unwind(AssertUnwindSafe(|| with_threads(threads, f))) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into())),
    }
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let selected = |id: usize| only.as_ref().map_or(true, |o| o.contains(&id));
    let mut failed = 0;
    let mut transcripts: Vec<(usize, Outcome)> = Vec::new();
    for c in CRITERIA.iter().filter(|c| selected(c.id)) {
        let start = Instant::now();
        let r = run_guarded(c.run, 1);
        let secs = start.elapsed().as_secs_f64();
        match &r {
            Ok(_) => println!("criterion {:>2} PASS ({secs:.1}s) {}", c.id, c.name),
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} FAIL ({secs:.1}s) {}: {e}", c.id, c.name);
            }
        }
        transcripts.push((c.id, r));
    }
    if selected(11) {
        let start = Instant::now();
        let mut diffs = Vec::new();
        for (id, first) in &transcripts {
            let c = &CRITERIA[id - 1];
            let again = run_guarded(c.run, 4);
            if &again != first {
                diffs.push(id.to_string());
            }
        }
        let secs = start.elapsed().as_secs_f64();
        if diffs.is_empty() {
            println!("criterion 11 PASS ({secs:.1}s) reruns on 4 workers are byte-identical");
        } else {
            failed += 1;
            println!("criterion 11 FAIL ({secs:.1}s) transcripts differ for criteria {}", diffs.join(","));
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
