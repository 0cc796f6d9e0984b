//! Text trace format: a `key=value` header, a `---` line, then one CSV row per draw.
//!
//! Floats are written in shortest round-trip exponent form, so reading a
//! written trace reproduces it bit for bit.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{ChainTrace, Reference, TraceMeta};
use crate::error::{Error, Result};

const MAGIC: &str = "ebsurf-trace";
const VERSION: u32 = 1;

fn floats(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad number `{x}`")))).collect()
}

pub fn write_trace<W: Write>(trace: &ChainTrace, out: &mut W) -> Result<()> {
    for f in trace.functionals() {
        if f.is_empty() || f.contains([',', '\n', '=']) {
            return Err(Error::Format(format!("functional name `{f}` cannot be written")));
        }
    }
    let m = &trace.meta;
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "version={VERSION}")?;
    writeln!(out, "n={}", trace.len())?;
    writeln!(out, "k={}", m.reference.dim())?;
    writeln!(out, "stat_dim={}", trace.stat_dim())?;
    writeln!(out, "functionals={}", trace.functionals().join(","))?;
    writeln!(out, "seed={}", m.seed)?;
    writeln!(out, "kernel={}", m.kernel)?;
    writeln!(out, "family={}", m.family)?;
    let dims: Vec<String> = m.family_dims.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    writeln!(out, "family_dims={}", dims.join(","))?;
    match &m.reference {
        Reference::Single { h1 } => {
            writeln!(out, "reference=single")?;
            writeln!(out, "h1={}", floats(h1))?;
        }
        Reference::Mixture { anchors, log_zeta } => {
            writeln!(out, "reference=mixture")?;
            let a: Vec<String> = anchors.iter().map(|h| floats(h)).collect();
            writeln!(out, "anchors={}", a.join(";"))?;
            writeln!(out, "log_zeta={}", floats(log_zeta))?;
        }
    }
    writeln!(out, "closed={}", trace.closed())?;
    writeln!(out, "labels={}", trace.labels().is_some())?;
    writeln!(out, "---")?;
    let nf = trace.functionals().len();
    let mut row = String::new();
    for i in 0..trace.len() {
        row.clear();
        for x in trace.stat(i) {
            row.push_str(&format!("{x:e},"));
        }
        for j in 0..nf {
            row.push_str(&format!("{:e},", trace.value(i, j)));
        }
        row.push(if trace.regen_flags()[i] { '1' } else { '0' });
        if let Some(l) = trace.labels() {
            row.push_str(&format!(",{}", l[i]));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<ChainTrace> {
    let mut lines = input.lines().enumerate();
    let mut header = BTreeMap::new();
    match lines.next() {
        Some((_, Ok(l))) if l.trim() == MAGIC => {}
        _ => return Err(Error::Format("missing trace header".into())),
    }
    for (no, line) in lines.by_ref() {
        let line = line?;
        if line.trim() == "---" {
            break;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| Error::Format(format!("line {}: expected key=value", no + 1)))?;
        header.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| header.get(k).ok_or_else(|| Error::Format(format!("header is missing `{k}`")));
    let int = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| Error::Format(format!("bad `{k}`"))) };
    if int("version")? != VERSION as u64 {
        return Err(Error::Format("unsupported trace version".into()));
    }
    let n = int("n")? as usize;
    let stat_dim = int("stat_dim")? as usize;
    let functionals: Vec<String> = match get("functionals")?.as_str() {
        "" => Vec::new(),
        s => s.split(',').map(str::to_string).collect(),
    };
    let mut family_dims = BTreeMap::new();
    for kv in get("family_dims")?.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = kv.split_once(':').ok_or_else(|| Error::Format("bad family_dims".into()))?;
        family_dims.insert(k.to_string(), v.parse().map_err(|_| Error::Format("bad family_dims".into()))?);
    }
    let reference = match get("reference")?.as_str() {
        "single" => Reference::Single { h1: parse_floats(get("h1")?)? },
        "mixture" => Reference::Mixture {
            anchors: get("anchors")?.split(';').map(parse_floats).collect::<Result<_>>()?,
            log_zeta: parse_floats(get("log_zeta")?)?,
        },
        other => return Err(Error::Format(format!("unknown reference `{other}`"))),
    };
    let meta = TraceMeta {
        seed: int("seed")?,
        kernel: get("kernel")?.clone(),
        family: get("family")?.clone(),
        family_dims,
        reference,
    };
    let labelled = get("labels")? == "true";
    let closed = get("closed")? == "true";
    let nf = functionals.len();
    let mut trace = ChainTrace::new(meta, stat_dim, functionals).with_capacity(n);
    let width = stat_dim + nf + 1 + labelled as usize;
    for (no, line) in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width {
            return Err(Error::Format(format!("line {}: expected {width} fields", no + 1)));
        }
        let nums = cells[..stat_dim + nf]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| Error::Format(format!("line {}: bad number `{c}`", no + 1))))
            .collect::<Result<Vec<_>>>()?;
        let regen = match cells[stat_dim + nf] {
            "1" => true,
            "0" => false,
            c => return Err(Error::Format(format!("line {}: bad flag `{c}`", no + 1))),
        };
        let (stat, values) = nums.split_at(stat_dim);
        if labelled {
            let label = cells[width - 1].parse().map_err(|_| Error::Format(format!("line {}: bad label", no + 1)))?;
            trace.push_labelled(stat, values, regen, label);
        } else {
            trace.push(stat, values, regen);
        }
    }
    if trace.len() != n {
        return Err(Error::Format(format!("header says {n} draws, found {}", trace.len())));
    }
    trace.set_closed(closed);
    Ok(trace)
}

pub fn save_trace(trace: &ChainTrace, path: &std::path::Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trace(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_trace(path: &std::path::Path) -> Result<ChainTrace> {
    read_trace(std::io::BufReader::new(std::fs::File::open(path)?))
}
