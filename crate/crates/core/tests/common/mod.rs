#![allow(dead_code)]

pub mod mock;

use std::path::PathBuf;

use carat_core::atombill::{FileProvider, MappingCache};
use carat_core::valuechain::{read_csv, InletRecord};
use carat_core::{load_graph, trace, InletAttributeTable, LoadOptions, Trace, TraceOptions, ValueChainGraph};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn graph(name: &str) -> ValueChainGraph {
    let dir = fixture(name);
    let bom = read_csv(&dir.join("bom.csv")).unwrap();
    let bos = read_csv(&dir.join("bos.csv")).unwrap();
    let mix = read_csv(&dir.join("mix.csv")).unwrap();
    load_graph(&bom, &bos, &mix, LoadOptions::default()).unwrap().graph
}

pub fn inlets(name: &str, file: &str) -> InletAttributeTable {
    let rows: Vec<InletRecord> = read_csv(&fixture(name).join(file)).unwrap();
    InletAttributeTable::from_records(&rows).unwrap()
}

pub fn run(name: &str, g: &ValueChainGraph, inlets: &InletAttributeTable) -> Trace {
    let provider = FileProvider::open(&fixture(name).join("mapped.csv")).unwrap();
    trace(g, inlets, &MappingCache::new(), Some(&provider), &TraceOptions::default()).unwrap()
}

pub fn run_fixture(name: &str, inlet_file: &str) -> Trace {
    let g = graph(name);
    let h = inlets(name, inlet_file);
    run(name, &g, &h)
}
