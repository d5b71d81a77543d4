//! Oracles shared by the integration tests.
#![allow(dead_code)]

pub mod grad;
pub mod mdp;

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use glucolab::eval::RolloutTrace;
use glucolab::sim::AgeGroup;
use rand::Rng;

const P: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

fn dec(s: &str, cc: &mut Consts) -> BigFloat {
    BigFloat::parse(s, Radix::Dec, P, RM, cc)
}

fn to_f64(x: &BigFloat, cc: &mut Consts) -> f64 {
    x.format(Radix::Dec, RM, cc).unwrap().parse().unwrap()
}

/// Magni risk `10 (3.5506 (ln(g)^0.8353 - 3.7932))^2` in 256-bit arithmetic.
pub fn magni_risk_hp(g: f64) -> f64 {
    let mut cc = Consts::new().unwrap();
    let lg = BigFloat::from_f64(g, P).ln(P, RM, &mut cc);
    let powed = lg.pow(&dec("0.8353", &mut cc), P, RM, &mut cc);
    let inner = powed.sub(&dec("3.7932", &mut cc), P, RM).mul(&dec("3.5506", &mut cc), P, RM);
    let risk = inner.mul(&inner, P, RM).mul(&dec("10", &mut cc), P, RM);
    to_f64(&risk, &mut cc)
}

/// Zero of the risk, `exp(3.7932^(1/0.8353))`, in 256-bit arithmetic.
pub fn magni_minimizer_hp() -> f64 {
    let mut cc = Consts::new().unwrap();
    let one = dec("1", &mut cc);
    let e = one.div(&dec("0.8353", &mut cc), P, RM);
    let x = dec("3.7932", &mut cc).pow(&e, P, RM, &mut cc).exp(P, RM, &mut cc);
    to_f64(&x, &mut cc)
}

/// Per-trace recount: counts in one pass and the population variance as an
/// exact rational from integer sums. Readings must lie on a 1/16 mg/dl grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recount {
    pub tir: f64,
    pub tbr: f64,
    pub tar: f64,
    pub cv: f64,
}

pub fn recount(cgm: &[f64]) -> Recount {
    let (mut inr, mut below, mut above) = (0usize, 0usize, 0usize);
    let (mut s1, mut s2) = (0i128, 0i128);
    for &g in cgm {
        if g < 70.0 {
            below += 1;
        } else if g > 180.0 {
            above += 1;
        } else {
            inr += 1;
        }
        let q = (g * 16.0) as i128;
        assert_eq!(q as f64, g * 16.0, "reading {g} is off the 1/16 grid");
        s1 += q;
        s2 += q * q;
    }
    let n = cgm.len() as i128;
    // var = (n s2 - s1^2) / (256 n^2), mean = s1 / (16 n), cv = 100 sd / mean
    let num = n * s2 - s1 * s1;
    let cv = 100.0 * (num as f64).sqrt() / s1 as f64;
    let pct = |k: usize| 100.0 * k as f64 / cgm.len() as f64;
    Recount { tir: pct(inr), tbr: pct(below), tar: pct(above), cv }
}

/// Random trace with readings on the 1/16 grid, often hitting 70 and 180
/// exactly.
pub fn random_trace<R: Rng>(rng: &mut R) -> RolloutTrace {
    let n = rng.gen_range(1..400);
    let cgm = (0..n)
        .map(|_| match rng.gen_range(0..10) {
            0 => 70.0,
            1 => 180.0,
            2 => 70.0 - 1.0 / 16.0,
            3 => 180.0 + 1.0 / 16.0,
            _ => (rng.gen_range(39 * 16..=600 * 16) as f64) / 16.0,
        })
        .collect();
    let age_group = [AgeGroup::Adult, AgeGroup::Adolescent, AgeGroup::Child][rng.gen_range(0..3)];
    RolloutTrace {
        patient_id: "synthetic".into(),
        age_group,
        cgm,
        reward_sum: -rng.gen_range(0.0..1e5),
        failed: rng.gen_bool(0.1),
    }
}

/// Mean and sample-sd standard error, written independently of the library.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0) / n).sqrt())
}
