//! C-like source emission.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use super::{Body, Loop, LoopNest, LoopOrigin};

const INDENT: &str = "  ";

struct Emitter<'a> {
    nest: &'a LoopNest,
    loops: &'a [Loop],
    out: String,
    defined: HashSet<String>,
    emitted_lets: Vec<bool>,
    /// Point-loop upper bound while inside a full or remainder tile section.
    point_upper: HashMap<String, i64>,
    /// Loops hidden inside the microkernel call; lets over them are skipped.
    hidden: HashSet<String>,
}

pub(super) fn emit(nest: &LoopNest) -> String {
    let hidden = match &nest.body {
        Body::Call { band } => band.iter().map(|l| l.var.clone()).collect(),
        Body::Inline => HashSet::new(),
    };
    let mut e = Emitter {
        nest,
        loops: &nest.loops,
        out: String::new(),
        defined: HashSet::new(),
        emitted_lets: vec![false; nest.lets.len()],
        point_upper: HashMap::new(),
        hidden,
    };
    for (name, v) in &nest.params {
        writeln!(e.out, "#define {name} {v}").unwrap();
    }
    if !nest.params.is_empty() {
        e.out.push('\n');
    }
    e.emit_ready_lets(0);
    for a in &nest.annotations {
        writeln!(e.out, "{a}").unwrap();
    }
    e.level(0, 0);
    e.out
}

impl Emitter<'_> {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str(INDENT);
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn emit_ready_lets(&mut self, depth: usize) {
        for (i, l) in self.nest.lets.iter().enumerate() {
            if self.emitted_lets[i] || l.expr.vars().any(|v| self.hidden.contains(v)) {
                continue;
            }
            if l.expr.vars().all(|v| self.defined.contains(v)) {
                self.emitted_lets[i] = true;
                let text = format!("{} = {};", l.name, l.text);
                self.line(depth, &text);
            }
        }
    }

    fn level(&mut self, idx: usize, depth: usize) {
        let Some(l) = self.loops.get(idx) else {
            self.innermost(depth);
            return;
        };
        match &l.origin {
            LoopOrigin::TileIndex { of, size, trip } => {
                let (full, rem) = (trip / size, trip % size);
                if full > 0 {
                    self.point_upper.insert(of.clone(), *size);
                    self.open_const(idx, depth, 0, full);
                }
                if rem > 0 {
                    self.point_upper.insert(of.clone(), rem);
                    self.open_const(idx, depth, full, full + 1);
                }
                self.point_upper.remove(of);
            }
            LoopOrigin::TilePoint { of, size, .. } => {
                let upper = self.point_upper.get(of).copied().unwrap_or(*size);
                self.open_const(idx, depth, 0, upper);
            }
            LoopOrigin::Source { lower_text, upper_text } => {
                let head = header(&l.var, lower_text, upper_text, l.step);
                self.open(idx, depth, head);
            }
        }
    }

    fn open_const(&mut self, idx: usize, depth: usize, lo: i64, hi: i64) {
        let l = &self.loops[idx];
        let head = header(&l.var, &lo.to_string(), &hi.to_string(), l.step);
        self.open(idx, depth, head);
    }

    fn open(&mut self, idx: usize, depth: usize, head: String) {
        let l = &self.loops[idx];
        self.line(depth, &format!("{head} {{"));
        let mut new_defs = vec![l.var.clone()];
        if let LoopOrigin::TilePoint { of, size, base, tile_var } = &l.origin {
            let mut def = format!("{of} = {size} * {tile_var} + {}", l.var);
            if *base != 0 {
                write!(def, " + {base}").unwrap();
            }
            def.push(';');
            self.line(depth + 1, &def);
            new_defs.push(of.clone());
        }
        let saved = self.emitted_lets.clone();
        for v in &new_defs {
            self.defined.insert(v.clone());
        }
        self.emit_ready_lets(depth + 1);
        self.level(idx + 1, depth + 1);
        for v in &new_defs {
            self.defined.remove(v);
        }
        self.emitted_lets = saved;
        self.line(depth, "}");
    }

    fn innermost(&mut self, depth: usize) {
        let nest = self.nest;
        match (&nest.body, &nest.microkernel) {
            (Body::Call { .. }, Some(spec)) => {
                let call = format!("{}({});", spec.callee, spec.call_args.join(", "));
                self.line(depth, &call);
            }
            _ => {
                let text = match &nest.stmt.body {
                    Some(b) => b.clone(),
                    None => synthesized_body(nest),
                };
                self.line(depth, &text);
            }
        }
    }
}

fn header(var: &str, lo: &str, hi: &str, step: i64) -> String {
    let inc = if step == 1 { format!("++{var}") } else { format!("{var} += {step}") };
    format!("for ({var} = {lo}; {var} < {hi}; {inc})")
}

fn synthesized_body(nest: &LoopNest) -> String {
    let stmt = &nest.stmt;
    let reads: Vec<&str> = stmt.reads().map(|r| r.text.as_str()).collect();
    let writes: Vec<&str> = stmt.writes().map(|r| r.text.as_str()).collect();
    match writes.as_slice() {
        [w] => format!("{w} = {}({});", stmt.id, reads.join(", ")),
        _ => {
            let all: Vec<&str> = stmt.refs.iter().map(|r| r.text.as_str()).collect();
            format!("{}({});", stmt.id, all.join(", "))
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::loopnest::parse_nest;

    #[test]
    fn inline_body_with_lets_and_steps() {
        let doc = "\
param N = 6
loop i lower 0 upper N step 2
let ii = i * 2
loop j lower i upper N
statement S
  read A[ii][j]
  write B[j]
end
annotation #pragma omp parallel for
";
        let expected = "\
#define N 6

#pragma omp parallel for
for (i = 0; i < N; i += 2) {
  ii = i * 2;
  for (j = i; j < N; ++j) {
    B[j] = S(A[ii][j]);
  }
}
";
        assert_eq!(parse_nest(doc).unwrap().emit(), expected);
    }
}
