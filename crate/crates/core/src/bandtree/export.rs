use rug::Float;
use serde::Serialize;

use crate::error::Result;

use super::{BandKind, BandTree};

/// Decimal string carrying every bit of the value.
pub fn decimal(x: &Float) -> String {
    let digits = (x.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1;
    x.to_string_radix(10, Some(digits))
}

#[derive(Clone, Debug, Serialize)]
pub struct BandExport {
    pub lo: String,
    pub hi: String,
    pub kind: BandKind,
    pub parent: Option<usize>,
    pub type_index: Vec<BandKind>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeExport {
    pub cf: String,
    pub lambda: f64,
    pub precision_bits: u32,
    pub alignment: String,
    pub depth: usize,
    pub beam: Option<usize>,
    pub levels: Vec<Vec<BandExport>>,
}

impl TreeExport {
    pub fn new(tree: &BandTree) -> Self {
        let levels = tree
            .levels
            .iter()
            .enumerate()
            .map(|(k, lv)| {
                lv.iter()
                    .enumerate()
                    .map(|(i, b)| BandExport {
                        lo: decimal(&b.lo),
                        hi: decimal(&b.hi),
                        kind: b.kind,
                        parent: b.parent,
                        type_index: tree.type_index(k, i),
                    })
                    .collect()
            })
            .collect();
        Self {
            cf: tree.params.cf.to_string(),
            lambda: tree.params.lambda,
            precision_bits: tree.params.precision_bits,
            alignment: format!("{:?}", tree.alignment),
            depth: tree.depth(),
            beam: tree.beam,
            levels,
        }
    }
}

pub fn tree_to_json(tree: &BandTree) -> Result<String> {
    Ok(serde_json::to_string_pretty(&TreeExport::new(tree))?)
}

/// One row per band: level, ordinal, lo, hi, kind, parent, type_index.
pub fn tree_to_csv(tree: &BandTree) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "ordinal", "lo", "hi", "kind", "parent", "type_index"])?;
    for (k, lv) in tree.levels.iter().enumerate() {
        for (i, b) in lv.iter().enumerate() {
            let tau: Vec<&str> = tree.type_index(k, i).iter().map(|t| t.as_str()).collect();
            w.write_record([
                k.to_string(),
                i.to_string(),
                decimal(&b.lo),
                decimal(&b.hi),
                b.kind.to_string(),
                b.parent.map(|p| p.to_string()).unwrap_or_default(),
                tau.join("-"),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
