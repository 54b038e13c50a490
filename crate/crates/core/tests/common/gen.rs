//! Seeded generator of small, terminating programs in the supported subset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Generated {
    pub source: String,
    pub is_function: bool,
}

struct Gen {
    rng: ChaCha8Rng,
    out: Vec<String>,
    budget: usize,
    loop_vars: usize,
    in_function: bool,
}

impl Gen {
    fn line(&mut self, depth: usize, text: &str) {
        self.out.push(format!("{}{}", "    ".repeat(depth), text));
    }

    fn simple(&mut self, depth: usize, loop_depth: usize) {
        let pick = self.rng.random_range(0..12);
        let n = self.rng.random_range(1..9);
        match pick {
            0 => self.line(depth, &format!("a = a + {n}")),
            1 => self.line(depth, &format!("b = (a * {n}) % 7")),
            2 => self.line(depth, &format!("print(\"a#{n}\", 'say \"hi\"', a)")),
            3 => self.line(depth, "pass"),
            4 => self.line(depth, &format!("a += {n}  # bump")),
            5 => {
                self.line(depth, "# a comment line");
                self.line(depth, &format!("c = [a,\n{}     {n}]", "    ".repeat(depth)));
            }
            6 if loop_depth > 0 => self.line(depth, "break"),
            7 if loop_depth > 0 => self.line(depth, "continue"),
            8 if self.in_function => self.line(depth, &format!("return a + {n}")),
            9 => self.line(depth, &format!("if a > {}:\n{}    raise ValueError(\"x\")", 40 + n, "    ".repeat(depth))),
            _ => self.line(depth, &format!("b = a - {n}")),
        }
    }

    fn block(&mut self, depth: usize, loop_depth: usize) {
        let count = self.rng.random_range(1..4);
        for _ in 0..count {
            self.statement(depth, loop_depth);
        }
    }

    fn statement(&mut self, depth: usize, loop_depth: usize) {
        if self.budget == 0 || depth >= 4 {
            return self.simple(depth, loop_depth);
        }
        self.budget -= 1;
        let n = self.rng.random_range(0..5);
        match self.rng.random_range(0..6) {
            0 => {
                self.line(depth, &format!("if a % 3 == {}:", n % 3));
                self.block(depth + 1, loop_depth);
                for k in 0..self.rng.random_range(0..3) {
                    self.line(depth, &format!("elif a % 5 == {}:", (n + k) % 5));
                    self.block(depth + 1, loop_depth);
                }
                if self.rng.random_bool(0.5) {
                    self.line(depth, "else:");
                    self.block(depth + 1, loop_depth);
                }
            }
            1 => {
                let v = self.fresh();
                self.line(depth, &format!("for {v} in range({}):", 1 + n % 3));
                self.block(depth + 1, loop_depth + 1);
            }
            2 => {
                let v = self.fresh();
                self.line(depth, &format!("{v} = 0"));
                self.line(depth, &format!("while {v} < {}:", 1 + n % 3));
                // Incrementing first keeps `continue` from spinning forever.
                self.line(depth + 1, &format!("{v} += 1"));
                self.block(depth + 1, loop_depth + 1);
            }
            _ => self.simple(depth, loop_depth),
        }
    }

    fn fresh(&mut self) -> String {
        self.loop_vars += 1;
        format!("i{}", self.loop_vars)
    }
}

/// Programs alternate between module bodies and single functions.
pub fn program(seed: u64) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let is_function = rng.random_bool(0.4);
    let start: u32 = rng.random_range(0..20);
    let mut g = Gen { rng, out: Vec::new(), budget: 6, loop_vars: 0, in_function: is_function };
    let depth = if is_function {
        g.line(0, "def f(a):");
        1
    } else {
        g.line(0, &format!("a = {start}"));
        0
    };
    g.block(depth, 0);
    g.block(depth, 0);
    if is_function {
        g.line(0, &format!("# oracle-call: f({start})"));
        g.line(0, &format!("# oracle-call: f({})", start + 7));
    }
    let mut source = g.out.join("\n");
    source.push('\n');
    Generated { source, is_function }
}
