use std::str::FromStr;

use num_rational::BigRational;
use num_traits::ToPrimitive;

use typecount::exact::rational::exact_type_distribution;
use typecount::exact::type_distribution;
use typecount::{Measure, RateTable};

fn load(text: &str) -> Vec<(usize, usize, BigRational)> {
    text.lines()
        .skip(1)
        .map(|line| {
            let mut it = line.split(',');
            let m = it.next().unwrap().parse().unwrap();
            let k = it.next().unwrap().parse().unwrap();
            let p = BigRational::from_str(it.next().unwrap()).unwrap();
            (m, k, p)
        })
        .collect()
}

fn check(measure: Measure, r: f64, text: &str) {
    let golden = load(text);
    assert_eq!(golden.len(), 55);
    let exact = exact_type_distribution(&measure, r, 10).unwrap();
    let float = type_distribution(&RateTable::build(&measure, 10).unwrap(), r, 10).unwrap();
    for (m, k, p) in golden {
        assert_eq!(exact.prob(m, k), p, "m={m} k={k}");
        let pf = p.to_f64().unwrap();
        assert!((float.prob(m, k) - pf).abs() <= 1e-14, "m={m} k={k}: {} vs {pf}", float.prob(m, k));
    }
}

#[test]
fn kingman_half_rate() {
    check(Measure::kingman(1.0).unwrap(), 0.5, include_str!("fixtures/kingman_r0.5_n10.csv"));
}

#[test]
fn star_unit_rate() {
    check(Measure::star(1.0).unwrap(), 1.0, include_str!("fixtures/star_r1_n10.csv"));
}
