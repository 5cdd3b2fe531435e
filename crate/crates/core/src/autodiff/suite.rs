use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{relative_error, Prim, Tape, Var};

/// Worst agreement between tape partials and central differences for one
/// primitive over random points in its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveCheck {
    pub prim: Prim,
    pub points: usize,
    pub max_rel_error: f64,
}

const SUITE: [Prim; 20] = [
    Prim::Add,
    Prim::Sub,
    Prim::Mul,
    Prim::Div,
    Prim::Neg,
    Prim::PowConst(2.0),
    Prim::PowConst(3.0),
    Prim::PowConst(0.5),
    Prim::PowConst(-1.5),
    Prim::Sqrt,
    Prim::Exp,
    Prim::Ln,
    Prim::Sin,
    Prim::Cos,
    Prim::Tanh,
    Prim::Sigmoid,
    Prim::Relu,
    Prim::Abs,
    Prim::Min,
    Prim::Max,
];

const DOT_ARGS: usize = 6;

fn sample<G: Rng>(prim: Prim, rng: &mut G) -> Vec<f64> {
    let away = |rng: &mut G, lo: f64, hi: f64| {
        let m = rng.random_range(lo..hi);
        if rng.random::<bool>() {
            m
        } else {
            -m
        }
    };
    match prim {
        Prim::Sqrt | Prim::Ln | Prim::PowConst(_) => vec![rng.random_range(0.1..5.0)],
        Prim::Div => vec![rng.random_range(-3.0..3.0), away(rng, 0.2, 3.0)],
        Prim::Relu | Prim::Abs => vec![away(rng, 1e-3, 3.0)],
        Prim::Exp => vec![rng.random_range(-5.0..5.0)],
        Prim::Min | Prim::Max => {
            let a = rng.random_range(-3.0..3.0);
            vec![a, a + away(rng, 1e-3, 2.0)]
        }
        Prim::Dot => (0..DOT_ARGS).map(|_| rng.random_range(-3.0..3.0)).collect(),
        _ if matches!(prim, Prim::Add | Prim::Sub | Prim::Mul) => {
            vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]
        }
        _ => vec![rng.random_range(-4.0..4.0)],
    }
}

fn eval_plain(prim: Prim, x: &[f64]) -> f64 {
    let tape = Tape::new();
    let args: Vec<Var> = x.iter().map(|&v| Var::constant(v)).collect();
    tape.apply(prim, &args)
        .expect("sample lies in the domain")
        .value()
}

/// Checks every primitive at `points` random arguments with step `h`.
pub fn primitive_suite(points: usize, seed: u64, h: f64) -> Vec<PrimitiveCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SUITE
        .iter()
        .copied()
        .chain(std::iter::once(Prim::Dot))
        .map(|prim| {
            let mut worst = 0.0f64;
            for _ in 0..points {
                let x = sample(prim, &mut rng);
                let tape = Tape::new();
                let vars = tape.vars(&x);
                let out = tape.apply(prim, &vars).expect("sample lies in the domain");
                let g = tape.backward(out).wrt_all(&vars);
                let mut probe = x.clone();
                for i in 0..x.len() {
                    probe[i] = x[i] + h;
                    let fp = eval_plain(prim, &probe);
                    probe[i] = x[i] - h;
                    let fm = eval_plain(prim, &probe);
                    probe[i] = x[i];
                    worst = worst.max(relative_error(g[i], (fp - fm) / (2.0 * h)));
                }
            }
            PrimitiveCheck {
                prim,
                points,
                max_rel_error: worst,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_primitives_agree() {
        for c in primitive_suite(200, 3, 1e-6) {
            assert!(c.max_rel_error < 1e-6, "{c:?}");
        }
    }
}
