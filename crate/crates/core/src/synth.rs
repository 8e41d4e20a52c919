//! Random value chains with consistent data (Σψ = 1 per output, Σμ = 1),
//! for property tests and benchmarks.

use std::collections::BTreeMap;

use rand::Rng;

use crate::atombill::{MaterialAtomBill, PsiRow};
use crate::valuechain::{
    load_graph, BomRecord, BosRecord, InletAttributeTable, InletRecord, LoadOptions, MixRecord, ProductionNodeId,
    Role, ValueChainGraph,
};

pub const COMPANY: &str = "S";

#[derive(Debug, Clone)]
pub struct SynthOptions {
    /// Distinct product materials, each with one main producer.
    pub products: usize,
    pub inlets: usize,
    /// Add a second producer for one product, splitting its μ.
    pub twin: bool,
    /// Chain every product into the next and feed the last back to the first.
    pub cyclic: bool,
}

impl SynthOptions {
    /// At most 10 nodes in total.
    pub fn small<R: Rng>(rng: &mut R, cyclic: bool) -> Self {
        Self { products: rng.gen_range(2..=3), inlets: rng.gen_range(1..=2), twin: rng.gen_bool(0.5), cyclic }
    }
}

#[derive(Debug, Clone)]
pub struct SynthChain {
    pub bom: Vec<BomRecord>,
    pub bos: Vec<BosRecord>,
    pub mix: Vec<MixRecord>,
    pub inlet: Vec<InletRecord>,
    pub graph: ValueChainGraph,
    pub psi: BTreeMap<ProductionNodeId, MaterialAtomBill>,
    pub inlets: InletAttributeTable,
    pub attributes: Vec<String>,
    pub elements: Vec<String>,
}

impl SynthChain {
    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }
}

fn inlet_material(j: usize) -> String {
    format!("F{j}")
}

fn inlet_smiles(j: usize) -> String {
    format!("O{}", "C".repeat(j + 1))
}

fn product_material(i: usize) -> String {
    format!("P{i}")
}

fn product_substances(i: usize) -> [String; 2] {
    let chain = "C".repeat(i + 2);
    [chain.clone(), format!("{chain}O")]
}

struct Producer {
    id: ProductionNodeId,
    product: usize,
    inlet: usize,
    feeds: Vec<usize>,
}

pub fn random_chain<R: Rng>(rng: &mut R, opts: &SynthOptions) -> SynthChain {
    let k = opts.products.max(1);
    let inlets = opts.inlets.max(1);
    let mut producers: Vec<Producer> = (0..k)
        .map(|i| {
            let mut feeds = Vec::new();
            if i > 0 && rng.gen_bool(0.7) {
                feeds.push(i - 1);
            }
            for m in 0..i.saturating_sub(1) {
                if rng.gen_bool(0.3) {
                    feeds.push(m);
                }
            }
            Producer {
                id: ProductionNodeId::new(COMPANY, format!("B{i}"), product_material(i)),
                product: i,
                inlet: i % inlets,
                feeds,
            }
        })
        .collect();
    if opts.cyclic && k > 1 {
        for i in 1..k {
            if !producers[i].feeds.contains(&(i - 1)) {
                producers[i].feeds.push(i - 1);
            }
        }
        producers[0].feeds.push(k - 1);
    } else if opts.cyclic {
        producers[0].feeds.push(0);
    }
    let mut mu: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    if opts.twin {
        let i = rng.gen_range(0..k);
        let feeds = producers[i].feeds.clone();
        let inlet = rng.gen_range(0..inlets);
        let u: f64 = rng.gen_range(0.1..0.9);
        mu.insert(i, vec![(i, u), (producers.len(), 1.0 - u)]);
        producers.push(Producer {
            id: ProductionNodeId::new(COMPANY, format!("B{i}x"), product_material(i)),
            product: i,
            inlet,
            feeds,
        });
    }

    let mut bom = Vec::new();
    let mut bos = Vec::new();
    let mut psi = BTreeMap::new();
    let record = |t: &ProductionNodeId, role: Role, material: &str, ratio: f64| BomRecord {
        node_c: t.company.clone(),
        node_b: t.process.clone(),
        node_g: t.main_product.clone(),
        role,
        material: material.to_string(),
        ratio,
        material_text: None,
    };
    let substance = |t: &ProductionNodeId, role: Role, material: &str, smiles: &str, ratio: f64| BosRecord {
        node_c: t.company.clone(),
        node_b: t.process.clone(),
        node_g: t.main_product.clone(),
        role,
        material: material.to_string(),
        smiles: smiles.to_string(),
        ratio,
    };

    for p in &producers {
        let mut sources: Vec<(String, String)> = Vec::new();
        let a: f64 = rng.gen_range(0.2..2.0);
        let f = inlet_material(p.inlet);
        bom.push(record(&p.id, Role::Reactant, &f, a));
        bos.push(substance(&p.id, Role::Reactant, &f, &inlet_smiles(p.inlet), a));
        sources.push((f, inlet_smiles(p.inlet)));
        for &m in &p.feeds {
            let a: f64 = rng.gen_range(0.2..2.0);
            let mat = product_material(m);
            bom.push(record(&p.id, Role::Reactant, &mat, a));
            let lam: f64 = rng.gen_range(0.2..0.8);
            let subs = product_substances(m);
            bos.push(substance(&p.id, Role::Reactant, &mat, &subs[0], a * lam));
            bos.push(substance(&p.id, Role::Reactant, &mat, &subs[1], a * (1.0 - lam)));
            sources.push((mat.clone(), subs[0].clone()));
            sources.push((mat, subs[1].clone()));
        }
        let out = product_material(p.product);
        bom.push(record(&p.id, Role::Product, &out, 1.0));
        let lam: f64 = rng.gen_range(0.2..0.8);
        let subs = product_substances(p.product);
        bos.push(substance(&p.id, Role::Product, &out, &subs[0], lam));
        bos.push(substance(&p.id, Role::Product, &out, &subs[1], 1.0 - lam));

        let mut bill = MaterialAtomBill::default();
        for s in &subs {
            let lead: f64 = 0.2 + 0.8 * rng.gen::<f64>();
            let raw: Vec<f64> = sources.iter().skip(1).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            let shares = std::iter::once(if raw.is_empty() { 1.0 } else { lead })
                .chain(raw.iter().map(|r| (1.0 - lead) * r / total));
            for ((mat, smiles), share) in sources.iter().zip(shares) {
                bill.rows.push(PsiRow {
                    reactant_material: mat.clone(),
                    reactant_smiles: smiles.clone(),
                    product_material: out.clone(),
                    product_smiles: s.clone(),
                    element: "C".into(),
                    share,
                    atom_count: 0,
                    substance_share: share,
                });
            }
        }
        psi.insert(p.id.clone(), bill);
    }

    let mut mix = Vec::new();
    for p in &producers {
        let share = mu
            .get(&p.product)
            .and_then(|v| v.iter().find(|(who, _)| producers[*who].id == p.id).map(|(_, s)| *s))
            .unwrap_or(1.0);
        mix.push(MixRecord {
            mix_c: COMPANY.into(),
            mix_p: product_material(p.product),
            src_c: p.id.company.clone(),
            src_b: p.id.process.clone(),
            src_g: p.id.main_product.clone(),
            mu: share,
        });
    }

    let mut inlet = Vec::new();
    for j in 0..inlets {
        if !producers.iter().any(|p| p.inlet == j) {
            continue;
        }
        let h: f64 = rng.gen();
        for (attribute, share) in [("fossil", 1.0 - h), ("biogenic", h)] {
            inlet.push(InletRecord {
                mix_c: COMPANY.into(),
                mix_p: inlet_material(j),
                smiles: inlet_smiles(j),
                element: "C".into(),
                attribute: attribute.into(),
                share,
            });
        }
    }

    let graph = load_graph(&bom, &bos, &mix, LoadOptions { normalize_mu: false })
        .expect("synthetic records are consistent")
        .graph;
    let inlets = InletAttributeTable::from_records(&inlet).expect("synthetic shares sum to 1");
    SynthChain {
        bom,
        bos,
        mix,
        inlet,
        graph,
        psi,
        inlets,
        attributes: vec!["fossil".into(), "biogenic".into()],
        elements: vec!["C".into()],
    }
}

/// Same chain with one inlet's biogenic share raised by `delta` (capped at 1).
pub fn raise_inlet(chain: &SynthChain, index: usize, delta: f64) -> InletAttributeTable {
    let keys: Vec<_> = chain.inlets.entries().keys().cloned().collect();
    let target = &keys[index % keys.len()];
    let records: Vec<InletRecord> = chain
        .inlets
        .records()
        .into_iter()
        .map(|mut r| {
            if (&r.mix_c, &r.mix_p, &r.smiles) == (&target.0.company, &target.0.product, &target.1) {
                let h = chain.inlets.share(&target.0, &target.1, &target.2, "biogenic").unwrap_or(0.0);
                let raised = (h + delta).min(1.0);
                r.share = if r.attribute == "biogenic" { raised } else { 1.0 - raised };
            }
            r
        })
        .collect();
    InletAttributeTable::from_records(&records).expect("raised shares still sum to 1")
}
