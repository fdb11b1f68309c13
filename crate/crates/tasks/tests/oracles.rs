use mann_tasks::dataset::Dataset;
use mann_tasks::m10ae::{count_lpo, eval_m10ae, format_tokens, gen_m10ae_dataset, parse, Op, Token};
use mann_tasks::mirror::gen_mirror_dataset;
use mann_tasks::strategy::{sann_m10ae_strategy, sann_mirror_strategy, tann_mirror_strategy, CellContent};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Two-pass evaluator working on the expression text: first collapse every
/// `*` / `/` run, then fold `+` / `-` left to right.
fn brute_force(expr: &str) -> i64 {
    let m = |v: i64| v.rem_euclid(10);
    let chars: Vec<char> = expr.chars().collect();
    let mut terms: Vec<i64> = vec![chars[0].to_digit(10).unwrap() as i64];
    let mut lows: Vec<char> = Vec::new();
    let mut i = 1;
    while i < chars.len() {
        let op = chars[i];
        let d = chars[i + 1].to_digit(10).unwrap() as i64;
        match op {
            '*' => *terms.last_mut().unwrap() = m(terms.last().unwrap() * d),
            '/' => *terms.last_mut().unwrap() = m(terms.last().unwrap() % d),
            _ => {
                lows.push(op);
                terms.push(d);
            }
        }
        i += 2;
    }
    let mut acc = terms[0];
    for (op, t) in lows.iter().zip(&terms[1..]) {
        acc = if *op == '+' { m(acc + t) } else { m(acc - t) };
    }
    acc
}

fn all_expressions(n_ops: usize) -> Vec<Vec<Token>> {
    let mut out: Vec<Vec<Token>> = (1..=9).map(|d| vec![Token::Num(d)]).collect();
    for _ in 0..n_ops {
        let mut next = Vec::with_capacity(out.len() * 36);
        for e in &out {
            for op in Op::ALL {
                for d in 1..=9 {
                    let mut f = e.clone();
                    f.push(Token::Op(op));
                    f.push(Token::Num(d));
                    next.push(f);
                }
            }
        }
        out = next;
    }
    out
}

#[test]
fn evaluator_and_strategy_match_brute_force_exhaustively() {
    let mut total = 0;
    for n_ops in 0..=3 {
        for tokens in all_expressions(n_ops) {
            let expr = format_tokens(&tokens);
            let expected = brute_force(&expr) as u8;
            assert_eq!(eval_m10ae(&tokens).unwrap(), expected, "{expr}");
            let (result, trace) = sann_m10ae_strategy(&tokens).unwrap();
            assert_eq!(result, expected, "{expr}");
            assert!(trace.steps.iter().all(|s| s.memory.len() <= 2), "{expr}");
            total += 1;
        }
    }
    assert_eq!(total, 9 + 324 + 11664 + 419904);
}

#[test]
fn evaluator_matches_brute_force_on_long_expressions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut seen = HashSet::new();
    let data = gen_m10ae_dataset(5000, 10, &mut seen, &mut rng);
    for s in data {
        let expr = s.expr();
        assert_eq!(s.label as i64, brute_force(&expr), "{expr}");
        let (r, _) = sann_m10ae_strategy(&s.tokens).unwrap();
        assert_eq!(r, s.label, "{expr}");
        let scanned = expr.chars().filter(|c| *c == '+' || *c == '-').count();
        assert_eq!(count_lpo(&s.tokens), scanned);
        assert_eq!(s.n_lpo, scanned);
    }
}

#[test]
fn worked_examples() {
    for (expr, want) in [("8+6*3/2-4", 4), ("3*4", 2), ("7/3", 1), ("2-9", 3), ("9*9*9*9", 1)] {
        assert_eq!(eval_m10ae(&parse(expr).unwrap()).unwrap(), want, "{expr}");
        assert_eq!(brute_force(expr), want as i64, "{expr}");
    }
}

fn sequences(len: usize, alphabet: u8) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..alphabet).map(move |a| {
                    let mut t = s.clone();
                    t.push(a);
                    t
                })
            })
            .collect();
    }
    out
}

fn reversed(seq: &[u8]) -> Vec<u8> {
    let mut r = Vec::with_capacity(seq.len());
    for i in (0..seq.len()).rev() {
        r.push(seq[i]);
    }
    r
}

#[test]
fn mirror_strategies_reverse_exhaustively() {
    for len in 1..=8 {
        for seq in sequences(len, 3) {
            let want = reversed(&seq);
            assert_eq!(sann_mirror_strategy(&seq).0, want);
            for start in [0, 17] {
                assert_eq!(tann_mirror_strategy(&seq, 20, start).unwrap().0, want);
            }
            assert_eq!(tann_mirror_strategy(&seq, len, 3).unwrap().0, want);
        }
    }
}

#[test]
fn mirror_strategies_reverse_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let len = rng.random_range(1..=20);
        let seq: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let want = reversed(&seq);
        let (sann, trace) = sann_mirror_strategy(&seq);
        assert_eq!(sann, want);
        assert_eq!(trace.len(), 2 * len + 1);
        let start = rng.random_range(0..20);
        let (tann, trace) = tann_mirror_strategy(&seq, 20, start).unwrap();
        assert_eq!(tann, want);
        assert_eq!(trace.len(), 2 * len + 1);
    }
}

#[test]
fn dataset_round_trips_through_file() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dir = tempfile::tempdir().unwrap();
    let mut seen = HashSet::new();
    for data in [
        Dataset::Mirror(gen_mirror_dataset(50, 1, 20, &mut rng).unwrap()),
        Dataset::M10ae(gen_m10ae_dataset(50, 5, &mut seen, &mut rng)),
    ] {
        let path = dir.path().join(format!("{}.txt", data.task()));
        data.save(&path).unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), data);
    }
}

proptest! {
    #[test]
    fn parse_format_round_trip(digits in prop::collection::vec(1u8..=9, 1..12), ops in prop::collection::vec(0usize..4, 11)) {
        let mut tokens = vec![Token::Num(digits[0])];
        for (i, d) in digits.iter().enumerate().skip(1) {
            tokens.push(Token::Op(Op::ALL[ops[i - 1]]));
            tokens.push(Token::Num(*d));
        }
        let expr = format_tokens(&tokens);
        prop_assert_eq!(parse(&expr).unwrap(), tokens.clone());
        prop_assert_eq!(eval_m10ae(&tokens).unwrap() as i64, brute_force(&expr));
        let (_, trace) = sann_m10ae_strategy(&tokens).unwrap();
        // After every numeral the stack holds exactly the running result.
        for (t, tok) in tokens.iter().enumerate() {
            if let Token::Num(_) = tok {
                prop_assert_eq!(trace.steps[t].memory.len(), 1);
                prop_assert!(matches!(trace.steps[t].memory[&0], CellContent::Value(_)));
            }
        }
    }

    #[test]
    fn tann_cells_hold_inputs_in_order(len in 1usize..=20, start in 0usize..20) {
        let seq: Vec<usize> = (0..len).collect();
        let (_, trace) = tann_mirror_strategy(&seq, 20, start).unwrap();
        for i in 0..len {
            let label = trace.cell_label(len, (start + i) % 20).unwrap();
            prop_assert_eq!(label, Some(CellContent::Input(i)));
        }
    }
}
