//! Line-oriented text serialization of explicit models.
//!
//! ```text
//! pdtmc <nstates> <ntrans> <nparams>
//! param <name>
//! state <id> z=<a,b,..> k=<k> t=<t> c=<a,b,..> [khat=<k> v=<bits>]
//! init <id>
//! trans <src> <dst> <const>[*<param>]
//! label <name> <id...>
//! reward <name> state <id> <val>
//! reward <name> trans <src> <dst> <val>
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a written
//! model reproduces every weight bit for bit.

use std::fmt::Write as _;
use std::io::Write;

use super::builder::ModelBuilder;
use super::model::{ExplicitPdtmc, StateId, StateTuple, Weight};
use super::ModelError;

fn join(values: &[i64]) -> String {
    values.iter().map(i64::to_string).collect::<Vec<_>>().join(",")
}

pub fn write_model<W: Write>(model: &ExplicitPdtmc, out: &mut W) -> std::io::Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "pdtmc {} {} {}", model.num_states(), model.num_transitions(), model.params().len());
    for p in model.params() {
        let _ = writeln!(s, "param {}", p.name);
    }
    for (i, t) in model.states().iter().enumerate() {
        let _ = write!(s, "state {i} z={} k={} t={} c={}", join(&t.z), t.k, t.t, join(&t.c));
        if let Some((khat, v)) = &t.perception {
            let bits: String = v.iter().map(|&b| if b { '1' } else { '0' }).collect();
            let _ = write!(s, " khat={khat} v={bits}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "init {}", model.initial());
    for (i, row) in model.rows().iter().enumerate() {
        for e in row {
            match e.weight.param {
                Some(p) => {
                    let _ = writeln!(s, "trans {i} {} {}*{}", e.target, e.weight.coeff, model.param_name(p));
                }
                None => {
                    let _ = writeln!(s, "trans {i} {} {}", e.target, e.weight.coeff);
                }
            }
        }
    }
    for (name, ids) in model.labels() {
        let _ = write!(s, "label {name}");
        for id in ids {
            let _ = write!(s, " {id}");
        }
        s.push('\n');
    }
    for r in model.rewards() {
        if r.state_rewards.is_empty() && r.transition_rewards.is_empty() {
            let _ = writeln!(s, "reward {} state {} 0", r.name, model.initial());
        }
        for (id, v) in &r.state_rewards {
            let _ = writeln!(s, "reward {} state {id} {v}", r.name);
        }
        for ((a, b), v) in &r.transition_rewards {
            let _ = writeln!(s, "reward {} trans {a} {b} {v}", r.name);
        }
    }
    out.write_all(s.as_bytes())
}

struct Lines<'a> {
    line: usize,
    tokens: Vec<&'a str>,
}

impl<'a> Lines<'a> {
    fn err(&self, message: impl Into<String>) -> ModelError {
        ModelError::Format { line: self.line, message: message.into() }
    }

    fn arg(&self, i: usize) -> Result<&'a str, ModelError> {
        self.tokens.get(i).copied().ok_or_else(|| self.err(format!("missing field {i}")))
    }

    fn num<T: std::str::FromStr>(&self, i: usize) -> Result<T, ModelError> {
        let tok = self.arg(i)?;
        tok.parse().map_err(|_| self.err(format!("cannot parse `{tok}`")))
    }

    fn state(&self, i: usize, n: usize) -> Result<StateId, ModelError> {
        let id: usize = self.num(i)?;
        if id >= n {
            return Err(self.err(format!("state {id} out of range (model has {n} states)")));
        }
        Ok(StateId::from(id))
    }

    fn int_list(&self, text: &str) -> Result<Vec<i64>, ModelError> {
        if text.is_empty() {
            return Ok(Vec::new());
        }
        text.split(',').map(|x| x.parse().map_err(|_| self.err(format!("cannot parse `{x}`")))).collect()
    }
}

pub fn read_model(text: &str) -> Result<ExplicitPdtmc, ModelError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| Lines { line: i + 1, tokens: l.split_whitespace().collect() })
        .filter(|l| !l.tokens.is_empty() && !l.tokens[0].starts_with('#'));

    let header = lines.next().ok_or(ModelError::Empty)?;
    if header.arg(0)? != "pdtmc" {
        return Err(header.err("expected `pdtmc <nstates> <ntrans> <nparams>`"));
    }
    let n: usize = header.num(1)?;
    let ntrans: usize = header.num(2)?;
    let nparams: usize = header.num(3)?;

    let mut b = ModelBuilder::new();
    let mut declared_params = 0usize;
    let mut seen_trans = 0usize;
    let mut pending = Vec::new();
    let mut last_line = header.line;

    for l in lines {
        last_line = l.line;
        match l.arg(0)? {
            "param" => {
                b.param(l.arg(1)?);
                declared_params += 1;
            }
            "state" => {
                let id: usize = l.num(1)?;
                if id != b.num_states() {
                    return Err(l.err(format!("expected state {} next, found {id}", b.num_states())));
                }
                let mut tuple = StateTuple::new(Vec::new(), 0, 0, Vec::new());
                let mut khat = None;
                let mut bits = None;
                for tok in &l.tokens[2..] {
                    let (key, value) = tok.split_once('=').ok_or_else(|| l.err(format!("bad field `{tok}`")))?;
                    let parse_u = |v: &str| v.parse::<u32>().map_err(|_| l.err(format!("cannot parse `{v}`")));
                    match key {
                        "z" => tuple.z = l.int_list(value)?,
                        "c" => tuple.c = l.int_list(value)?,
                        "k" => tuple.k = parse_u(value)?,
                        "t" => tuple.t = parse_u(value)? as u8,
                        "khat" => khat = Some(parse_u(value)?),
                        "v" => {
                            bits = Some(
                                value
                                    .chars()
                                    .map(|ch| match ch {
                                        '1' => Ok(true),
                                        '0' => Ok(false),
                                        _ => Err(l.err(format!("bad verdict bit `{ch}`"))),
                                    })
                                    .collect::<Result<Vec<_>, _>>()?,
                            )
                        }
                        _ => return Err(l.err(format!("unknown state field `{key}`"))),
                    }
                }
                match (khat, bits) {
                    (Some(k), Some(v)) => tuple = tuple.with_perception(k, v),
                    (None, None) => {}
                    _ => return Err(l.err("khat and v must appear together")),
                }
                if !(1..=3).contains(&tuple.t) {
                    return Err(l.err(format!("turn flag {} not in 1..3", tuple.t)));
                }
                let (_, fresh) = b.intern(tuple)?;
                if !fresh {
                    return Err(l.err("duplicate state tuple"));
                }
            }
            "init" => {
                let s = l.state(1, b.num_states())?;
                b.set_initial(s);
            }
            "trans" => {
                let src = l.state(1, b.num_states())?;
                let dst = l.state(2, n)?;
                let w = l.arg(3)?;
                let weight = match w.split_once('*') {
                    Some((c, p)) => {
                        let coeff: f64 = c.parse().map_err(|_| l.err(format!("cannot parse `{c}`")))?;
                        if declared_params > 0 && !b.has_param(p) {
                            return Err(l.err(format!("undeclared parameter `{p}`")));
                        }
                        Weight { coeff, param: Some(b.param(p)) }
                    }
                    None => Weight::constant(w.parse().map_err(|_| l.err(format!("cannot parse `{w}`")))?),
                };
                if dst.index() >= b.num_states() {
                    // Forward references are resolved after all states are read.
                    pending.push((l.line, src, dst, weight));
                } else {
                    b.add_transition(src, dst, weight).map_err(|e| l.err(e.to_string()))?;
                }
                seen_trans += 1;
            }
            "label" => {
                let name = l.arg(1)?;
                b.declare_label(name);
                for i in 2..l.tokens.len() {
                    let s = l.state(i, b.num_states())?;
                    b.add_label(name, s);
                }
            }
            "reward" => {
                let idx = b.reward(l.arg(1)?);
                match l.arg(2)? {
                    "state" => {
                        let s = l.state(3, b.num_states())?;
                        let v: f64 = l.num(4)?;
                        b.add_state_reward(idx, s, v).map_err(|e| l.err(e.to_string()))?;
                    }
                    "trans" => {
                        let s = l.state(3, b.num_states())?;
                        let t = l.state(4, b.num_states())?;
                        let v: f64 = l.num(5)?;
                        b.add_transition_reward(idx, s, t, v).map_err(|e| l.err(e.to_string()))?;
                    }
                    other => return Err(l.err(format!("unknown reward kind `{other}`"))),
                }
            }
            other => return Err(l.err(format!("unknown directive `{other}`"))),
        }
    }

    for (line, src, dst, weight) in pending {
        if dst.index() >= b.num_states() {
            return Err(ModelError::Format { line, message: format!("state {dst} was never declared") });
        }
        b.add_transition(src, dst, weight).map_err(|e| ModelError::Format { line, message: e.to_string() })?;
    }
    let fail = |message: String| ModelError::Format { line: last_line, message };
    if b.num_states() != n {
        return Err(fail(format!("header declares {n} states, found {}", b.num_states())));
    }
    let model = b.finish()?;
    if seen_trans != ntrans || model.num_transitions() != ntrans {
        return Err(fail(format!("header declares {ntrans} transitions, found {seen_trans}")));
    }
    if model.params().len() != nparams {
        return Err(fail(format!("header declares {nparams} parameters, found {}", model.params().len())));
    }
    Ok(model)
}
