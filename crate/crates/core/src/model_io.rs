//! Plain-text model files.
//!
//! ```text
//! eof-model v1
//! task reg
//! lambda 0.02
//! map eof
//! kernel laplace 2 2 false sqrt      (kind omega dim strict scale)
//! features 5
//! 1,1 1,1                            (level vector, position vector)
//! ...
//! scaler 2                           (or `scaler none`)
//! <mins>
//! <maxs>
//! target range -3 4                  (or `binary <neg> <pos>`, or `none`)
//! weights 5
//! <one weight per line>
//! end
//! ```
//!
//! Random maps store `map <method> <sigma> <seed> <pool>` and one
//! `phase γ_1 … γ_D` line per feature. Floats use the shortest round-trip
//! representation, so reading a written model restores it bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use crate::baselines::{RandomFeatureMap, RfMethod};
use crate::bench::{MinMaxScaler, TargetEncoding};
use crate::design::IndexSet;
use crate::embed::{EofMap, FeatureScale};
use crate::error::{Error, Result};
use crate::features::FeatureIndex;
use crate::kernels::{KernelKind, KernelSpec};
use crate::learn::{FeatureMap, Model, Task};

const HEADER: &str = "eof-model v1";

/// A model together with the preprocessing needed to apply it to raw rows.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub model: Model,
    pub scaler: Option<MinMaxScaler>,
    pub target: Option<TargetEncoding>,
}

fn join<T: ToString>(v: &[T], sep: &str) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

/// Renders `saved` in the text format.
pub fn model_to_string(saved: &SavedModel) -> String {
    let m = &saved.model;
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "task {}", m.task);
    let _ = writeln!(out, "lambda {}", m.lambda);
    match &m.map {
        FeatureMap::Eof(map) => {
            let k = map.kernel();
            let _ = writeln!(out, "map eof");
            let _ = writeln!(out, "kernel {} {} {} {} {}", k.kind, k.omega, k.dim, k.strict, map.scale_mode().name());
            let _ = writeln!(out, "features {}", map.len());
            for f in map.design() {
                let _ = writeln!(out, "{} {}", join(f.level(), ","), join(f.pos(), ","));
            }
        }
        FeatureMap::Random(map) => {
            let _ = writeln!(out, "map {} {} {} {}", map.method, map.sigma, map.seed, map.pool_size);
            let _ = writeln!(out, "features {}", map.len());
            for (g, b) in map.frequencies.iter().zip(&map.phases) {
                let _ = writeln!(out, "{b} {}", join(g, " "));
            }
        }
    }
    match &saved.scaler {
        Some(s) => {
            let _ = writeln!(out, "scaler {}", s.mins.len());
            let _ = writeln!(out, "{}", join(&s.mins, " "));
            let _ = writeln!(out, "{}", join(&s.maxs, " "));
        }
        None => {
            let _ = writeln!(out, "scaler none");
        }
    }
    match saved.target {
        Some(TargetEncoding::Range { min, max }) => {
            let _ = writeln!(out, "target range {min} {max}");
        }
        Some(TargetEncoding::Binary { negative, positive }) => {
            let _ = writeln!(out, "target binary {negative} {positive}");
        }
        None => {
            let _ = writeln!(out, "target none");
        }
    }
    let _ = writeln!(out, "weights {}", m.weights.len());
    for w in &m.weights {
        let _ = writeln!(out, "{w}");
    }
    out.push_str("end\n");
    out
}

pub fn write_model<W: Write>(mut writer: W, saved: &SavedModel) -> Result<()> {
    writer.write_all(model_to_string(saved).as_bytes())?;
    Ok(())
}

struct Lines {
    lines: Vec<String>,
    next: usize,
}

impl Lines {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::ModelFormat { line: self.next, msg: msg.into() }
    }

    fn line(&mut self) -> Result<&str> {
        let i = self.next;
        if i >= self.lines.len() {
            return Err(Error::ModelFormat { line: i + 1, msg: "unexpected end of file".into() });
        }
        self.next += 1;
        Ok(self.lines[i].trim())
    }

    /// Next line split on whitespace, first token checked against `key`.
    fn keyed(&mut self, key: &str) -> Result<Vec<String>> {
        let parts: Vec<String> = self.line()?.split_whitespace().map(String::from).collect();
        if parts.first().map(String::as_str) != Some(key) {
            return Err(self.err(format!("expected '{key}'")));
        }
        Ok(parts[1..].to_vec())
    }

    fn parse<T: FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse '{s}'")))
    }

    fn parse_list<T: FromStr>(&self, s: &str, sep: char) -> Result<Vec<T>> {
        s.split(sep).filter(|t| !t.is_empty()).map(|t| self.parse(t)).collect()
    }

    fn arity(&self, parts: &[String], n: usize) -> Result<()> {
        if parts.len() != n {
            return Err(self.err(format!("expected {n} fields, found {}", parts.len())));
        }
        Ok(())
    }
}

fn read_eof_map(lines: &mut Lines) -> Result<FeatureMap> {
    let k = lines.keyed("kernel")?;
    lines.arity(&k, 5)?;
    let kind: KernelKind = lines.parse(&k[0])?;
    let kernel = KernelSpec::new(kind, lines.parse(&k[1])?, lines.parse(&k[2])?)?.with_strict(lines.parse(&k[3])?);
    let scale: FeatureScale = lines.parse(&k[4])?;
    let f = lines.keyed("features")?;
    lines.arity(&f, 1)?;
    let count: usize = lines.parse(&f[0])?;
    let mut indices = Vec::with_capacity(count);
    for _ in 0..count {
        let parts: Vec<String> = lines.line()?.split_whitespace().map(String::from).collect();
        lines.arity(&parts, 2)?;
        let level = lines.parse_list(&parts[0], ',')?;
        let pos = lines.parse_list(&parts[1], ',')?;
        indices.push(FeatureIndex::new(level, pos).map_err(|e| lines.err(e.to_string()))?);
    }
    let design = IndexSet::from_indices(kernel.dim, indices)?;
    Ok(FeatureMap::Eof(EofMap::new(kernel, design, scale)?))
}

fn read_random_map(lines: &mut Lines, header: &[String]) -> Result<FeatureMap> {
    lines.arity(header, 4)?;
    let method: RfMethod = lines.parse(&header[0])?;
    let sigma = lines.parse(&header[1])?;
    let seed = lines.parse(&header[2])?;
    let pool_size = lines.parse(&header[3])?;
    let f = lines.keyed("features")?;
    lines.arity(&f, 1)?;
    let count: usize = lines.parse(&f[0])?;
    let mut frequencies = Vec::with_capacity(count);
    let mut phases = Vec::with_capacity(count);
    for _ in 0..count {
        let values: Vec<f64> = {
            let l = lines.line()?.to_string();
            lines.parse_list(&l, ' ')?
        };
        if values.len() < 2 {
            return Err(lines.err("feature line needs a phase and at least one frequency"));
        }
        if frequencies.first().is_some_and(|g: &Vec<f64>| g.len() != values.len() - 1) {
            return Err(lines.err("frequency rows differ in length"));
        }
        phases.push(values[0]);
        frequencies.push(values[1..].to_vec());
    }
    Ok(FeatureMap::Random(RandomFeatureMap { method, frequencies, phases, sigma, seed, pool_size }))
}

/// Parses the text format.
pub fn read_model<R: Read>(reader: R) -> Result<SavedModel> {
    let lines = BufReader::new(reader).lines().collect::<std::io::Result<Vec<_>>>()?;
    let mut lines = Lines { lines, next: 0 };
    if lines.line()? != HEADER {
        return Err(lines.err(format!("missing '{HEADER}' header")));
    }
    let t = lines.keyed("task")?;
    lines.arity(&t, 1)?;
    let task: Task = lines.parse(&t[0])?;
    let l = lines.keyed("lambda")?;
    lines.arity(&l, 1)?;
    let lambda: f64 = lines.parse(&l[0])?;

    let header = lines.keyed("map")?;
    let map = match header.first().map(String::as_str) {
        Some("eof") => read_eof_map(&mut lines)?,
        Some(_) => read_random_map(&mut lines, &header)?,
        None => return Err(lines.err("map type missing")),
    };

    let s = lines.keyed("scaler")?;
    lines.arity(&s, 1)?;
    let scaler = if s[0] == "none" {
        None
    } else {
        let dim: usize = lines.parse(&s[0])?;
        let mins_line = lines.line()?.to_string();
        let mins: Vec<f64> = lines.parse_list(&mins_line, ' ')?;
        let maxs_line = lines.line()?.to_string();
        let maxs: Vec<f64> = lines.parse_list(&maxs_line, ' ')?;
        if mins.len() != dim || maxs.len() != dim {
            return Err(lines.err(format!("scaler rows must have {dim} values")));
        }
        Some(MinMaxScaler { mins, maxs })
    };

    let t = lines.keyed("target")?;
    let target = match t.first().map(String::as_str) {
        Some("none") => None,
        Some("range") => {
            lines.arity(&t, 3)?;
            Some(TargetEncoding::Range { min: lines.parse(&t[1])?, max: lines.parse(&t[2])? })
        }
        Some("binary") => {
            lines.arity(&t, 3)?;
            Some(TargetEncoding::Binary { negative: lines.parse(&t[1])?, positive: lines.parse(&t[2])? })
        }
        _ => return Err(lines.err("unknown target encoding")),
    };

    let w = lines.keyed("weights")?;
    lines.arity(&w, 1)?;
    let count: usize = lines.parse(&w[0])?;
    if count != map.len() {
        return Err(lines.err(format!("{count} weights for {} features", map.len())));
    }
    let mut weights = Vec::with_capacity(count);
    for _ in 0..count {
        let v = lines.line()?.to_string();
        weights.push(lines.parse(&v)?);
    }
    if lines.line()? != "end" {
        return Err(lines.err("expected 'end'"));
    }
    let model = Model { weights, map, lambda, task, feature_seconds: 0.0, solve_seconds: 0.0, nnz_f: 0 };
    Ok(SavedModel { model, scaler, target })
}
