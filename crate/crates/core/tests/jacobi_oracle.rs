//! Fractional integrals of the weighted Jacobi basis against 60-digit reference values
//! (generated by `tests/oracle/gen_jacobi_oracle.py` from monomial expansions and
//! incomplete Beta functions).

use robin_fhbvm::weighted_jacobi::JacobiIntegrals;

const ORACLE: &str = include_str!("oracle/jacobi_oracle.csv");

struct Row {
    kind: char,
    alpha: f64,
    mu: usize,
    arg: f64,
    value: f64,
}

fn rows() -> Vec<Row> {
    ORACLE
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            Row {
                kind: f[0].chars().next().unwrap(),
                alpha: f[1].parse().unwrap(),
                mu: f[2].parse().unwrap(),
                arg: f[3].parse().unwrap(),
                value: f[4].parse().unwrap(),
            }
        })
        .collect()
}

fn integrals(alpha: f64) -> JacobiIntegrals {
    JacobiIntegrals::new(alpha, 22, 22).unwrap()
}

#[test]
fn frac_int_matches_reference() {
    let mut worst = 0.0f64;
    for r in rows().iter().filter(|r| r.kind == 'I') {
        let got = integrals(r.alpha).frac_int(r.arg)[r.mu];
        let err = (got - r.value).abs();
        worst = worst.max(err);
        assert!(
            err <= 1e-13,
            "alpha={} mu={} c={}: {got} vs {}",
            r.alpha,
            r.mu,
            r.arg,
            r.value
        );
    }
    assert!(worst > 0.0);
}

#[test]
fn j_function_matches_reference() {
    for r in rows().iter().filter(|r| r.kind == 'J') {
        let got = integrals(r.alpha).j_values(r.arg).unwrap()[r.mu];
        let err = (got - r.value).abs();
        let tol = 1e-12 * r.value.abs().max(1e-3);
        assert!(
            err <= tol,
            "alpha={} mu={} x={}: {got} vs {}",
            r.alpha,
            r.mu,
            r.arg,
            r.value
        );
    }
}

#[test]
fn j_at_one_is_frac_int_at_one() {
    for alpha in [0.1, 0.5, 0.9] {
        let ints = integrals(alpha);
        let j = ints.j_values(1.0).unwrap();
        let i = ints.frac_int(1.0);
        for mu in 0..22 {
            assert!((j[mu] - i[mu]).abs() < 1e-14);
        }
    }
}
