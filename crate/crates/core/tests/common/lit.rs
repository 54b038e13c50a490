//! Seeded random Python literals with alternative spellings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub enum Lit {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    None,
    List(Vec<Lit>),
    Tuple(Vec<Lit>),
    Dict(Vec<(Lit, Lit)>),
}

fn gen(rng: &mut ChaCha8Rng, depth: usize) -> Lit {
    let top = if depth >= 3 { 5 } else { 8 };
    match rng.random_range(0..top) {
        0 => Lit::Int(rng.random_range(-1000..1000)),
        1 => Lit::Float(rng.random_range(-400..400) as f64 / 8.0),
        2 => {
            let chars = ['a', 'Z', ' ', '"', '\'', '#', '\\', '7'];
            let n = rng.random_range(0..6);
            Lit::Str((0..n).map(|_| chars[rng.random_range(0..chars.len())]).collect())
        }
        3 => Lit::Bool(rng.random_bool(0.5)),
        4 => Lit::None,
        5 => Lit::List((0..rng.random_range(0..4)).map(|_| gen(rng, depth + 1)).collect()),
        6 => Lit::Tuple((0..rng.random_range(0..4)).map(|_| gen(rng, depth + 1)).collect()),
        _ => Lit::Dict(
            (0..rng.random_range(0..4))
                .map(|i| (Lit::Int(i), gen(rng, depth + 1)))
                .collect(),
        ),
    }
}

pub fn literal(seed: u64) -> Lit {
    gen(&mut ChaCha8Rng::seed_from_u64(seed), 0)
}

fn quote(s: &str, q: char) -> String {
    let mut out = String::from(q);
    for c in s.chars() {
        if c == q || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push(q);
    out
}

/// Python source for `lit`. `loose` switches quote style and spacing, which
/// must not change the value.
pub fn render(lit: &Lit, loose: bool) -> String {
    let sep = if loose { " ,  " } else { ", " };
    let join = |items: Vec<String>| items.join(sep);
    match lit {
        Lit::Int(i) => i.to_string(),
        Lit::Float(f) => if loose { format!("{f:e}") } else { format!("{f:?}") },
        Lit::Str(s) => quote(s, if loose { '"' } else { '\'' }),
        Lit::Bool(b) => if *b { "True" } else { "False" }.into(),
        Lit::None => "None".into(),
        Lit::List(xs) => format!("[{}]", join(xs.iter().map(|x| render(x, loose)).collect())),
        Lit::Tuple(xs) if xs.len() == 1 => format!("({},)", render(&xs[0], loose)),
        Lit::Tuple(xs) => format!("({})", join(xs.iter().map(|x| render(x, loose)).collect())),
        Lit::Dict(kv) => format!(
            "{{{}}}",
            join(kv.iter().map(|(k, v)| format!("{}: {}", render(k, loose), render(v, loose))).collect())
        ),
    }
}

/// A literal with a different value: the first leaf changes, or an empty
/// container gains an element.
pub fn perturb(lit: &Lit) -> Lit {
    match lit {
        Lit::Int(i) => Lit::Int(i + 1),
        Lit::Float(f) => Lit::Float(f + 0.5),
        Lit::Str(s) => Lit::Str(format!("{s}x")),
        Lit::Bool(b) => Lit::Bool(!b),
        Lit::None => Lit::Int(0),
        Lit::List(xs) if xs.is_empty() => Lit::List(vec![Lit::None]),
        Lit::Tuple(xs) if xs.is_empty() => Lit::Tuple(vec![Lit::None]),
        Lit::Dict(kv) if kv.is_empty() => Lit::Dict(vec![(Lit::Int(0), Lit::None)]),
        Lit::List(xs) => Lit::List([vec![perturb(&xs[0])], xs[1..].to_vec()].concat()),
        Lit::Tuple(xs) => Lit::Tuple([vec![perturb(&xs[0])], xs[1..].to_vec()].concat()),
        Lit::Dict(kv) => {
            let mut kv = kv.clone();
            kv[0].1 = perturb(&kv[0].1);
            Lit::Dict(kv)
        }
    }
}
