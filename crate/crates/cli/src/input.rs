//! Spec files: loading, format detection, and state-list parsing.

use std::fs;
use std::path::Path;

use dppchains::kernel::KernelFile;
use dppchains::renewal::SemiMarkovFile;
use dppchains::{digest_bytes, ChainSpec, Error, LoopFreeChain, RenewalSpec, SemiMarkovSpec};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::Failure;

/// The recognized input documents, told apart by a distinguishing key.
#[derive(Debug, Clone)]
pub enum Document {
    Chain(ChainSpec),
    Renewal(RenewalSpec),
    SemiMarkov(SemiMarkovSpec),
    Kernel(KernelFile),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Chain(_) => "chain",
            Document::Renewal(_) => "renewal",
            Document::SemiMarkov(_) => "semi_markov",
            Document::Kernel(_) => "kernel",
        }
    }
}

pub struct Input {
    pub sha256: String,
    pub doc: Document,
}

fn parse<T: DeserializeOwned>(value: Value, what: &str) -> Result<T, Failure> {
    serde_json::from_value(value).map_err(|e| Failure::malformed(format!("invalid {what} spec: {e}")))
}

pub fn load(path: &Path) -> Result<Input, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::malformed(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::malformed(format!("{} is not valid JSON: {e}", path.display())))?;
    let mut value = value;
    // Our own JSON reports wrap the document as {"header": .., "result": ..}; read the result.
    if let Value::Object(map) = &mut value {
        if map.contains_key("header") && map.get("result").is_some_and(Value::is_object) {
            value = map.remove("result").expect("checked above");
        }
    }
    let Value::Object(map) = &value else {
        return Err(Failure::malformed("input must be a JSON object"));
    };
    let doc = if map.contains_key("transitions") {
        Document::Chain(parse(value, "chain")?)
    } else if map.contains_key("xi1") {
        Document::Renewal(parse(value, "renewal")?)
    } else if map.contains_key("kernel") {
        let file: SemiMarkovFile = parse(value, "semi-Markov")?;
        Document::SemiMarkov(SemiMarkovSpec::from_file(&file)?)
    } else if map.contains_key("matrix") {
        Document::Kernel(parse(value, "kernel")?)
    } else {
        return Err(Failure::malformed(
            "unrecognized input: expected a chain (transitions), renewal (xi1), semi-Markov (kernel) or kernel (matrix) document",
        ));
    };
    Ok(Input { sha256: digest_bytes(&bytes), doc })
}

/// Builds the loop-free chain described by a chain, renewal or semi-Markov document.
pub fn chain_of(doc: &Document) -> Result<LoopFreeChain, Failure> {
    Ok(match doc {
        Document::Chain(spec) => LoopFreeChain::from_spec(spec)?,
        Document::Renewal(spec) => dppchains::renewal_chain(spec)?,
        Document::SemiMarkov(spec) => dppchains::semi_markov_chain(spec)?,
        Document::Kernel(_) => {
            return Err(Failure::malformed("this command needs a chain, renewal or semi-Markov spec"))
        }
    })
}

/// Splits a comma-separated list of state labels. Commas inside parentheses belong to the
/// label, so semi-Markov states such as `(a,3)` can be listed directly.
pub fn split_labels(list: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in list.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_owned());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur.trim().to_owned());
    }
    out
}

/// Resolves a state list; `all` selects every state.
pub fn resolve_window(chain: &LoopFreeChain, list: &str) -> Result<Vec<usize>, Failure> {
    if list.trim() == "all" {
        return Ok((0..chain.len()).collect());
    }
    let names = split_labels(list);
    if names.iter().any(|n| n.is_empty()) {
        return Err(Failure::malformed(format!("empty label in state list {list:?}")));
    }
    Ok(chain.resolve(&names)?)
}

/// Per-site probabilities: one value for every site, or one value per state.
pub fn site_values(list: &str, n: usize, name: &str) -> Result<Vec<f64>, Failure> {
    let vals = list
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::malformed(format!("--{name}: {e}")))?;
    match vals.len() {
        1 => Ok(vec![vals[0]; n]),
        len if len == n => Ok(vals),
        len => Err(Error::DimensionMismatch { expected: n, got: len }.into()),
    }
}
