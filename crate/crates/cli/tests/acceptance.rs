//! One check per acceptance criterion. Each prints a PASS/FAIL line; the
//! test fails if any criterion does.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::SeedableRng;

use carat_core::synth::{raise_inlet, random_chain, SynthOptions};
use carat_core::valuechain::{read_csv, InletRecord};
use carat_core::{
    build_lp, derive_phi, derive_psi, fixed_point_oracle, load_graph, parse_reaction, InletAttributeTable,
    LoadOptions, MixNodeId, ProductionNodeId, ValueChainGraph,
};

use common::{beta, carat, fixture, tables, workdir};

const ONE_NODE_TOL: f64 = 1e-9;
const ONE_NODE_BUDGET: Duration = Duration::from_secs(1);
const BASE_SLACK: f64 = 1e-6;
const BASE_BETA_TOL: f64 = 1e-9;
const BASE_BUDGET: Duration = Duration::from_secs(5);
const CASE1_TOL: f64 = 1e-9;
const CASE2_TOL: f64 = 1e-6;
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_FIXTURES: u64 = 50;
const ORACLE_MIN_CYCLIC: usize = 10;
const ORACLE_MAX_NODES: usize = 10;
const MONO_FIXTURES: u64 = 20;
const MONO_STEP: f64 = 0.1;
const MONO_TOL: f64 = 1e-9;

const TDI: &str = "Cc1ccc(N=C=O)cc1N=C=O";
const TDA: &str = "Cc1ccc(N)cc1N";
const CO: &str = "[C-]#[O+]";
const TDI_MAPPED: &str = "[CH3:1][c:2]1[cH:3][cH:4][c:5]([NH2:6])[cH:7][c:8]1[NH2:9].[C-:10]#[O+:11].[C-:12]#[O+:13]>>[CH3:1][c:2]1[cH:3][cH:4][c:5]([N:6]=[C:10]=[O:11])[cH:7][c:8]1[N:9]=[C:12]=[O:13]";
const CO2_MAPPED: &str = "[C-:1]#[O+:2].[OH2:3]>>[O:2]=[C:1]=[O:3]";

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(label: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || format!("{label} = {got}, want {want} ± {tol:e}"))
}

fn load(name: &str) -> ValueChainGraph {
    let dir = fixture(name);
    let bom = read_csv(&dir.join("bom.csv")).unwrap();
    let bos = read_csv(&dir.join("bos.csv")).unwrap();
    let mix = read_csv(&dir.join("mix.csv")).unwrap();
    load_graph(&bom, &bos, &mix, LoadOptions::default()).unwrap().graph
}

fn inlet_table(path: &Path) -> InletAttributeTable {
    let rows: Vec<InletRecord> = read_csv(path).unwrap();
    InletAttributeTable::from_records(&rows).unwrap()
}

fn one_node() -> Outcome {
    let start = Instant::now();
    let g = load("one_node");
    let node = ProductionNodeId::new("COMP2", "PLNT11", "PROD29");
    let bill = g.bill(&node).ok_or("fixture lacks the TDI node")?;
    let alpha = (bill.ratio(carat_core::Role::Reactant, "M1"), bill.ratio(carat_core::Role::Reactant, "M2"));
    close("alpha1", alpha.0, 20.0 / 60.0, ONE_NODE_TOL)?;
    close("alpha2", alpha.1, 40.0 / 60.0, ONE_NODE_TOL)?;
    close("lambda11", bill.lambda(carat_core::Role::Reactant, "M1", TDA), 0.8, ONE_NODE_TOL)?;
    close("lambda12", bill.lambda(carat_core::Role::Reactant, "M1", CO), 0.2, ONE_NODE_TOL)?;
    close("lambda22", bill.lambda(carat_core::Role::Reactant, "M2", CO), 1.0, ONE_NODE_TOL)?;

    let phi = derive_phi(&[parse_reaction(TDI_MAPPED).unwrap()], &["C".to_string()]).map_err(|e| e.to_string())?;
    let psi = derive_psi(&phi, bill);
    let psi1 = psi.share("M1", CO, "PROD29", TDI, "C");
    let psi2 = psi.share("M2", CO, "PROD29", TDI, "C");
    close("psi(M1,CO)", psi1, 2.0 / 99.0, ONE_NODE_TOL)?;
    close("psi(M2,CO)", psi2, 20.0 / 99.0, ONE_NODE_TOL)?;
    let h = inlet_table(&fixture("one_node").join("inlet.csv"));
    let attrs = vec!["fossil".to_string(), "biogenic".to_string()];
    let lp = build_lp(&g, &BTreeMap::from([(node, psi)]), &h, &attrs, &["C".to_string()]).map_err(|e| e.to_string())?;
    let sol = lp.solve().map_err(|e| e.to_string())?;
    let key = carat_core::AttributeKey::mix(MixNodeId::new("COMP2", "PROD29"), TDI, "C");
    let bio = sol.share(&key, "biogenic").ok_or("no TDI beta")?;
    close("beta_bio(TDI)", bio, 20.0 / 99.0, ONE_NODE_TOL)?;
    let took = start.elapsed();
    ensure(took < ONE_NODE_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("psi {psi1:.6}, {psi2:.6}; beta_bio(TDI) {bio:.9} in {took:?}"))
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn total_slack(out: &Path) -> f64 {
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("solution.json")).unwrap()).unwrap();
    v["total_slack"].as_f64().unwrap()
}

fn base_case() -> Outcome {
    let dir = workdir("tdi");
    let mut args = vec!["trace"];
    args.extend(tables("inlet_base.csv", "out"));
    let start = Instant::now();
    let r = carat(dir.path(), &args);
    let took = start.elapsed();
    ensure(r.code == 0, || format!("exit {} {}", r.code, r.stderr))?;
    let g = load("tdi");
    ensure(g.node_count() == 27, || format!("{} nodes", g.node_count()))?;
    let out = dir.path().join("out");
    let bio: Vec<f64> =
        rows(&out.join("beta.csv")).iter().filter(|f| f[7] == "biogenic").map(|f| f[8].parse().unwrap()).collect();
    let worst = bio.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ensure(worst <= BASE_BETA_TOL, || format!("max beta_bio {worst}"))?;
    let slack = total_slack(&out);
    ensure(slack < BASE_SLACK, || format!("total slack {slack}"))?;
    ensure(took < BASE_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("{} beta rows all 0, total slack {slack:e}, {took:?}", bio.len()))
}

fn case1() -> Outcome {
    let dir = workdir("tdi");
    let r = carat(dir.path(), &["--config", "case1.toml", "scenario", "--out", "runs"]);
    ensure(r.code == 0, || format!("exit {} {}", r.code, r.stderr))?;
    let out = dir.path().join("runs/case1");
    let tdi = beta(&out.join("beta.csv"), "d:COMP2|PROD29", TDI, "biogenic");
    close("beta_bio(TDI)", tdi, 2.0 / 9.0, CASE1_TOL)?;
    let co_rows: Vec<Vec<String>> = rows(&out.join("beta.csv"))
        .into_iter()
        .filter(|f| (f[5] == CO || f[5] == "O=C=O") && f[7] == "biogenic")
        .collect();
    ensure(!co_rows.is_empty(), || "no CO-derived rows".into())?;
    for f in &co_rows {
        close(&format!("beta_bio({}/{}/{})", f[1], f[4], f[5]), f[8].parse().unwrap(), 1.0, CASE1_TOL)?;
    }
    ensure(r.stdout.contains("BCC(TDI) = 22.2%"), || r.stdout.clone())?;
    Ok(format!("beta_bio(TDI) {tdi:.12}; {} CO-derived rows at 1.0", co_rows.len()))
}

/// Kahn's algorithm over the graph's edges; true when some node never frees up.
fn has_cycle(g: &ValueChainGraph) -> bool {
    let mut indegree: BTreeMap<String, usize> = BTreeMap::new();
    let mut succ: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for e in g.edges() {
        indegree.entry(e.from.to_string()).or_default();
        *indegree.entry(e.to.to_string()).or_default() += 1;
        succ.entry(e.from.to_string()).or_default().push(e.to.to_string());
    }
    let mut ready: Vec<String> = indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| n.clone()).collect();
    let mut done = BTreeSet::new();
    while let Some(n) = ready.pop() {
        done.insert(n.clone());
        for m in succ.get(&n).into_iter().flatten() {
            let d = indegree.get_mut(m).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push(m.clone());
            }
        }
    }
    done.len() < indegree.len()
}

fn case2() -> Outcome {
    let g = load("bdo");
    ensure(has_cycle(&g), || "BDO fixture has a topological order".into())?;
    let h = inlet_table(&fixture("bdo").join("inlet.csv"));
    let ace = h.share(&MixNodeId::new("COMPB", "PROD50"), "C#C", "C", "biogenic");
    let rec = h.share(&MixNodeId::new("COMPB", "PROD53"), "OCCCCO", "C", "biogenic");
    ensure(ace == Some(0.75) && rec == Some(0.5), || format!("inlet shares {ace:?} {rec:?}"))?;
    let dir = workdir("bdo");
    let mut args = vec!["trace"];
    args.extend(tables("inlet.csv", "out"));
    let r = carat(dir.path(), &args);
    ensure(r.code == 0, || format!("exit {} {}", r.code, r.stderr))?;
    let out = dir.path().join("out");
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("solution.json")).unwrap()).unwrap();
    ensure(v["status"] == "optimal", || format!("status {}", v["status"]))?;
    let bdo = beta(&out.join("beta.csv"), "d:COMPB|PROD57", "OCCCCO", "biogenic");
    close("beta_bio(BDO)", bdo, 0.375, CASE2_TOL)?;
    Ok(format!("cyclic graph, optimal, beta_bio(BDO) {bdo:.9}"))
}

fn oracle() -> Outcome {
    let mut cyclic = 0;
    let mut worst = 0.0f64;
    for seed in 0..ORACLE_FIXTURES {
        let mut rng = StdRng::seed_from_u64(1000 + seed);
        let want_cycle = seed % 4 == 0;
        let opts = SynthOptions::small(&mut rng, want_cycle);
        let c = random_chain(&mut rng, &opts);
        ensure(c.node_count() <= ORACLE_MAX_NODES, || format!("seed {seed}: {} nodes", c.node_count()))?;
        cyclic += usize::from(has_cycle(&c.graph));
        let lp = build_lp(&c.graph, &c.psi, &c.inlets, &c.attributes, &c.elements)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let sol = lp.solve().map_err(|e| format!("seed {seed}: {e}"))?;
        let o = fixed_point_oracle(&c.graph, &c.psi, &c.inlets, &c.attributes, &c.elements)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(o.converged, || format!("seed {seed}: oracle did not converge"))?;
        ensure(o.beta.len() == sol.beta.len(), || format!("seed {seed}: key sets differ"))?;
        for (k, v) in &sol.beta {
            let w = o.beta.get(k).ok_or_else(|| format!("seed {seed}: oracle lacks {k}"))?;
            for (a, b) in v.iter().zip(w) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    ensure(worst < ORACLE_TOL, || format!("max |lp - oracle| {worst:e}"))?;
    ensure(cyclic >= ORACLE_MIN_CYCLIC, || format!("only {cyclic} cyclic fixtures"))?;
    Ok(format!("{ORACLE_FIXTURES} fixtures ({cyclic} cyclic), max |lp - oracle| {worst:e}"))
}

fn phi_table() -> Outcome {
    let elements: Vec<String> = ["C", "H", "N", "O"].iter().map(|s| s.to_string()).collect();
    let reactions = [parse_reaction(TDI_MAPPED).unwrap(), parse_reaction(CO2_MAPPED).unwrap()];
    let phi = derive_phi(&reactions, &elements).map_err(|e| e.to_string())?;
    // (reactant, product, element, atom count, atoms in product)
    let expected = [
        (TDA, TDI, "C", 7, 9),
        (CO, TDI, "C", 2, 9),
        (TDA, TDI, "H", 6, 6),
        (TDA, TDI, "N", 2, 2),
        (CO, TDI, "O", 2, 2),
        (CO, "O=C=O", "C", 1, 1),
        (CO, "O=C=O", "O", 1, 2),
        ("O", "O=C=O", "O", 1, 2),
    ];
    for (r, p, e, n, d) in expected {
        let row = phi
            .rows
            .iter()
            .find(|x| x.reactant == r && x.product == p && x.element == e)
            .ok_or_else(|| format!("missing row {r} -> {p} {e}"))?;
        ensure((row.atom_count, row.total_atoms) == (n, d), || {
            format!("{r} -> {p} {e}: {}/{}, want {n}/{d}", row.atom_count, row.total_atoms)
        })?;
        ensure(row.share == f64::from(n) / f64::from(d), || format!("{r} -> {p} {e}: share {}", row.share))?;
    }
    ensure(phi.rows.len() == expected.len(), || format!("{} rows, want {}", phi.rows.len(), expected.len()))?;
    Ok("7/9, 2/9, 1, 1/2 reproduced exactly".into())
}

fn monotonicity() -> Outcome {
    let mut checks = 0;
    for seed in 0..MONO_FIXTURES {
        let mut rng = StdRng::seed_from_u64(5000 + seed);
        let opts = SynthOptions::small(&mut rng, seed % 2 == 1);
        let c = random_chain(&mut rng, &opts);
        let base = build_lp(&c.graph, &c.psi, &c.inlets, &c.attributes, &c.elements)
            .unwrap()
            .solve()
            .map_err(|e| e.to_string())?;
        for i in 0..c.inlets.len() {
            let raised = raise_inlet(&c, i, MONO_STEP);
            let sol = build_lp(&c.graph, &c.psi, &raised, &c.attributes, &c.elements)
                .unwrap()
                .solve()
                .map_err(|e| e.to_string())?;
            for (k, v) in &base.beta {
                let after = sol.share(k, "biogenic").ok_or_else(|| format!("lost {k}"))?;
                ensure(after >= v[1] - MONO_TOL, || format!("seed {seed} inlet {i} {k}: {} -> {after}", v[1]))?;
                checks += 1;
            }
        }
    }
    Ok(format!("{MONO_FIXTURES} fixtures, {checks} node comparisons, none decreased"))
}

fn determinism() -> Outcome {
    let dir = workdir("tdi");
    let mut args = vec!["trace"];
    args.extend(tables("inlet_case1.csv", "out"));
    let mut runs = Vec::new();
    for _ in 0..2 {
        let r = carat(dir.path(), &args);
        ensure(r.code == 0, || format!("exit {} {}", r.code, r.stderr))?;
        let out = dir.path().join("out");
        runs.push((std::fs::read(out.join("beta.csv")).unwrap(), std::fs::read(out.join("sankey.json")).unwrap()));
    }
    ensure(runs[0].0 == runs[1].0, || "beta.csv differs".into())?;
    ensure(runs[0].1 == runs[1].1, || "sankey.json differs".into())?;
    Ok(format!("beta.csv {} bytes, sankey.json {} bytes, identical", runs[0].0.len(), runs[0].1.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("one-node worked example", one_node),
        ("base case all fossil", base_case),
        ("case 1 biogenic natural gas", case1),
        ("case 2 BDO recycle", case2),
        ("LP matches fixed-point oracle", oracle),
        ("phi extraction exact", phi_table),
        ("monotonicity", monotonicity),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                println!("FAIL [{}] {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
