//! Inputs shared by the benchmarks.

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::SeedableRng;

use carat_core::atombill::{FileProvider, MappingCache};
use carat_core::synth::{random_chain, SynthChain, SynthOptions};
use carat_core::valuechain::{read_csv, InletRecord};
use carat_core::{load_graph, InletAttributeTable, LoadOptions, ValueChainGraph};

/// Random consistent chain with `products` product materials.
pub fn chain(seed: u64, products: usize, cyclic: bool) -> SynthChain {
    let mut rng = StdRng::seed_from_u64(seed);
    let opts = SynthOptions { products, inlets: (products / 4).max(1), twin: true, cyclic };
    random_chain(&mut rng, &opts)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub struct Fixture {
    pub graph: ValueChainGraph,
    pub inlets: InletAttributeTable,
    pub provider: FileProvider,
    pub cache: MappingCache,
}

pub fn load_fixture(name: &str, inlet: &str) -> Fixture {
    let dir = fixture(name);
    let bom = read_csv(&dir.join("bom.csv")).unwrap();
    let bos = read_csv(&dir.join("bos.csv")).unwrap();
    let mix = read_csv(&dir.join("mix.csv")).unwrap();
    let graph = load_graph(&bom, &bos, &mix, LoadOptions::default()).unwrap().graph;
    let rows: Vec<InletRecord> = read_csv(&dir.join(inlet)).unwrap();
    Fixture {
        graph,
        inlets: InletAttributeTable::from_records(&rows).unwrap(),
        provider: FileProvider::open(&dir.join("mapped.csv")).unwrap(),
        cache: MappingCache::new(),
    }
}
