//! Weighted MAX k-CSP instances over the alphabet `[q]`.
//!
//! Allowed tuples list values in the order of the sorted scope. Internally a
//! tuple `α` on scope `a` is encoded as `Σ_i α_i q^i`, position `i` counting
//! from the smallest variable.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binom_u, unrank_combination};
use crate::complex::{build_pure_complex_on, SimplicialComplex};
use crate::error::{Error, Result};
use crate::face::{Face, MAX_VERTICES};

/// Exhaustive search is refused above this many assignments.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// A total assignment `η : [n] → [q]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment {
    pub values: Vec<usize>,
}

impl Assignment {
    pub fn new(values: Vec<usize>) -> Assignment {
        Assignment { values }
    }

    /// Code of the restriction to `scope`.
    pub fn restrict_code(&self, scope: Face, q: usize) -> usize {
        scope
            .iter()
            .rev()
            .fold(0, |acc, v| acc * q + self.values[v])
    }
}

/// Encode a tuple listed in scope order.
pub fn tuple_code(tuple: &[usize], q: usize) -> usize {
    tuple.iter().rev().fold(0, |acc, &a| acc * q + a)
}

/// Decode a tuple of length `k`.
pub fn decode_tuple(mut code: usize, k: usize, q: usize) -> Vec<usize> {
    (0..k)
        .map(|_| {
            let a = code % q;
            code /= q;
            a
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub scope: Face,
    allowed: Vec<bool>,
    /// Normalized weight.
    pub weight: f64,
    raw_weight: f64,
}

impl Constraint {
    /// Weight as supplied, before normalization.
    pub fn raw_weight(&self) -> f64 {
        self.raw_weight
    }

    /// Whether the tuple with the given code satisfies the constraint.
    pub fn allows_code(&self, code: usize) -> bool {
        self.allowed[code]
    }

    pub fn allowed_mask(&self) -> &[bool] {
        &self.allowed
    }

    /// Allowed tuples in lexicographic order.
    pub fn allowed_tuples(&self, q: usize) -> Vec<Vec<usize>> {
        let k = self.scope.len();
        let mut out: Vec<Vec<usize>> = (0..self.allowed.len())
            .filter(|&c| self.allowed[c])
            .map(|c| decode_tuple(c, k, q))
            .collect();
        out.sort();
        out
    }
}

/// `k`-uniform weighted constraint family on `n` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct CspInstance {
    n: usize,
    k: usize,
    q: usize,
    constraints: Vec<Constraint>,
    raw_total: f64,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    k: usize,
    q: usize,
    constraints: Vec<ConstraintEntry>,
}

#[derive(Serialize, Deserialize)]
struct ConstraintEntry {
    scope: Face,
    allowed: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

impl CspInstance {
    /// Validate, merge identical duplicate scopes, and normalize weights.
    pub fn new(
        n: usize,
        k: usize,
        q: usize,
        constraints: Vec<(Face, Vec<Vec<usize>>, f64)>,
    ) -> Result<CspInstance> {
        if n == 0 || n > MAX_VERTICES {
            return Err(Error::Parameter(format!("n = {n} must lie in 1..=64")));
        }
        if k == 0 || k > n {
            return Err(Error::Parameter(format!("arity k = {k} must lie in 1..=n")));
        }
        if q < 2 {
            return Err(Error::Parameter(format!("alphabet size q = {q} must be ≥ 2")));
        }
        let table = (q as u128).pow(k as u32);
        if table > 1 << 20 {
            return Err(Error::TooLarge(format!("q^k = {table} tuples per constraint")));
        }
        if constraints.is_empty() {
            return Err(Error::Empty("instance has no constraints".into()));
        }
        let mut merged: Vec<Constraint> = Vec::new();
        let mut by_scope: BTreeMap<Face, usize> = BTreeMap::new();
        for (scope, tuples, weight) in constraints {
            if scope.len() != k {
                return Err(Error::Invalid(format!("scope {scope} does not have {k} variables")));
            }
            if scope.max_vertex().is_some_and(|v| v >= n) {
                return Err(Error::Invalid(format!("scope {scope} exceeds n = {n}")));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::Invalid(format!("scope {scope} has nonpositive weight {weight}")));
            }
            if tuples.is_empty() {
                return Err(Error::Invalid(format!("scope {scope} allows no tuple")));
            }
            let mut allowed = vec![false; table as usize];
            for t in &tuples {
                if t.len() != k || t.iter().any(|&a| a >= q) {
                    return Err(Error::Invalid(format!("tuple {t:?} is not in [{q}]^{k}")));
                }
                allowed[tuple_code(t, q)] = true;
            }
            match by_scope.get(&scope) {
                Some(&i) if merged[i].allowed == allowed => merged[i].raw_weight += weight,
                Some(_) => {
                    return Err(Error::Invalid(format!(
                        "duplicate scope {scope} with different allowed sets"
                    )))
                }
                None => {
                    by_scope.insert(scope, merged.len());
                    merged.push(Constraint {
                        scope,
                        allowed,
                        weight: 0.0,
                        raw_weight: weight,
                    });
                }
            }
        }
        let raw_total: f64 = merged.iter().map(|c| c.raw_weight).sum();
        for c in &mut merged {
            c.weight = c.raw_weight / raw_total;
        }
        Ok(CspInstance {
            n,
            k,
            q,
            constraints: merged,
            raw_total,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn from_json(text: &str) -> Result<CspInstance> {
        let file: InstanceFile = serde_json::from_str(text)?;
        CspInstance::new(
            file.n,
            file.k,
            file.q,
            file.constraints
                .into_iter()
                .map(|c| (c.scope, c.allowed, c.weight.unwrap_or(1.0)))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            n: self.n,
            k: self.k,
            q: self.q,
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintEntry {
                    scope: c.scope,
                    allowed: c.allowed_tuples(self.q),
                    weight: Some(c.raw_weight),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("instance serializes")
    }
}

/// Weighted fraction of satisfied constraints.
pub fn sat_fraction(inst: &CspInstance, eta: &Assignment) -> Result<f64> {
    if eta.values.len() != inst.n || eta.values.iter().any(|&a| a >= inst.q) {
        return Err(Error::Invalid(format!(
            "assignment must give each of {} variables a value below {}",
            inst.n, inst.q
        )));
    }
    // Summing raw weights in a fixed order makes a fully satisfied instance score exactly 1.
    let raw: f64 = inst
        .constraints
        .iter()
        .filter(|c| c.allows_code(eta.restrict_code(c.scope, inst.q)))
        .map(|c| c.raw_weight)
        .sum();
    Ok(raw / inst.raw_total)
}

/// Exact optimum by exhaustive search, with the lexicographically smallest witness.
pub fn brute_force_opt(inst: &CspInstance) -> Result<(f64, Assignment)> {
    let space = (inst.q as u128).checked_pow(inst.n as u32).unwrap_or(u128::MAX);
    if space > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(format!(
            "{}^{} assignments exceed the exhaustive limit {BRUTE_FORCE_LIMIT}",
            inst.q, inst.n
        )));
    }
    let mut eta = Assignment::new(vec![0; inst.n]);
    let mut best = (-1.0, eta.clone());
    loop {
        let val = sat_fraction(inst, &eta)?;
        if val > best.0 {
            best = (val, eta.clone());
        }
        // Lexicographic successor, last variable fastest.
        let mut i = inst.n;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            eta.values[i] += 1;
            if eta.values[i] < inst.q {
                break;
            }
            eta.values[i] = 0;
        }
    }
}

/// Downward closure of the scopes, with `Π_k` equal to the constraint weights.
pub fn constraint_complex(inst: &CspInstance) -> Result<SimplicialComplex> {
    let top: Vec<(Face, f64)> = inst.constraints.iter().map(|c| (c.scope, c.weight)).collect();
    build_pure_complex_on(inst.n, &top)
}

/// Random `k`-XOR over `Z_q` with `m` distinct scopes and uniform weights.
///
/// With `planted`, right-hand sides agree with a hidden uniform assignment,
/// which is returned alongside the instance.
pub fn gen_random_kxor(
    n: usize,
    k: usize,
    m: usize,
    q: usize,
    seed: u64,
    planted: bool,
) -> Result<(CspInstance, Option<Assignment>)> {
    if k == 0 || k > n || n > MAX_VERTICES {
        return Err(Error::Parameter(format!("need 0 < k ≤ n ≤ 64, got k = {k}, n = {n}")));
    }
    let total = binom_u(n, k);
    if m == 0 || m as u128 > total {
        return Err(Error::Parameter(format!("m = {m} must lie in 1..=C({n},{k}) = {total}")));
    }
    if q < 2 {
        return Err(Error::Parameter(format!("alphabet size q = {q} must be ≥ 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = planted.then(|| Assignment::new((0..n).map(|_| rng.gen_range(0..q)).collect()));
    let mut ranks: Vec<usize> = sample(&mut rng, total as usize, m).into_vec();
    ranks.sort_unstable();
    let all_tuples: Vec<Vec<usize>> = (0..q.pow(k as u32)).map(|c| decode_tuple(c, k, q)).collect();
    let constraints = ranks
        .into_iter()
        .map(|r| {
            let scope = Face::new(&unrank_combination(n, k, r as u128)).unwrap();
            let rhs = match &hidden {
                Some(h) => scope.iter().map(|v| h.values[v]).sum::<usize>() % q,
                None => rng.gen_range(0..q),
            };
            let allowed = all_tuples
                .iter()
                .filter(|t| t.iter().sum::<usize>() % q == rhs)
                .cloned()
                .collect();
            (scope, allowed, 1.0)
        })
        .collect();
    Ok((CspInstance::new(n, k, q, constraints)?, hidden))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{build_pure_complex, complete_complex};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn f(v: &[usize]) -> Face {
        Face::new(v).unwrap()
    }

    fn all_zero_3xor(n: usize) -> CspInstance {
        let even: Vec<Vec<usize>> = vec![vec![0, 0, 0], vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]];
        let cons = f(&(0..n).collect::<Vec<_>>())
            .subsets_of_size(3)
            .into_iter()
            .map(|s| (s, even.clone(), 1.0))
            .collect();
        CspInstance::new(n, 3, 2, cons).unwrap()
    }

    /// Independent optimum: scan every assignment, counting satisfied weight directly.
    fn oracle_opt(inst: &CspInstance) -> f64 {
        let mut best = 0.0f64;
        for mask in 0..inst.q().pow(inst.n() as u32) {
            let vals = decode_tuple(mask, inst.n(), inst.q());
            let mut val = 0.0;
            for c in inst.constraints() {
                let t: Vec<usize> = c.scope.iter().map(|v| vals[v]).collect();
                if c.allowed_tuples(inst.q()).contains(&t) {
                    val += c.weight;
                }
            }
            best = best.max(val);
        }
        best
    }

    #[test]
    fn tuple_codes_roundtrip() {
        for c in 0..27 {
            assert_eq!(tuple_code(&decode_tuple(c, 3, 3), 3), c);
        }
        let eta = Assignment::new(vec![1, 0, 2, 1]);
        assert_eq!(eta.restrict_code(f(&[0, 2]), 3), tuple_code(&[1, 2], 3));
    }

    #[test]
    fn sat_examples() {
        let inst = all_zero_3xor(5);
        assert_eq!(sat_fraction(&inst, &Assignment::new(vec![0; 5])).unwrap(), 1.0);

        let only_zero = CspInstance::new(4, 3, 2, vec![(f(&[0, 1, 2]), vec![vec![0, 0, 0]], 1.0)]).unwrap();
        assert_eq!(sat_fraction(&only_zero, &Assignment::new(vec![1; 4])).unwrap(), 0.0);

        let two = CspInstance::new(
            3,
            2,
            2,
            vec![
                (f(&[0, 1]), vec![vec![0, 0]], 1.0),
                (f(&[1, 2]), vec![vec![1, 1]], 1.0),
            ],
        )
        .unwrap();
        assert_eq!(sat_fraction(&two, &Assignment::new(vec![0, 0, 0])).unwrap(), 0.5);
        assert!(sat_fraction(&two, &Assignment::new(vec![0, 0])).is_err());
        assert!(sat_fraction(&two, &Assignment::new(vec![0, 0, 2])).is_err());
    }

    #[test]
    fn validation() {
        let ok = vec![vec![0, 1]];
        assert!(CspInstance::new(3, 2, 2, vec![]).is_err());
        assert!(CspInstance::new(3, 2, 2, vec![(f(&[0]), ok.clone(), 1.0)]).is_err());
        assert!(CspInstance::new(3, 2, 2, vec![(f(&[0, 1]), vec![], 1.0)]).is_err());
        assert!(CspInstance::new(3, 2, 2, vec![(f(&[0, 1]), vec![vec![0, 2]], 1.0)]).is_err());
        assert!(CspInstance::new(3, 2, 2, vec![(f(&[0, 1]), ok.clone(), 0.0)]).is_err());
        assert!(CspInstance::new(3, 2, 2, vec![(f(&[0, 5]), ok.clone(), 1.0)]).is_err());
        let merged = CspInstance::new(
            3,
            2,
            2,
            vec![
                (f(&[0, 1]), ok.clone(), 1.0),
                (f(&[1, 2]), ok.clone(), 1.0),
                (f(&[0, 1]), ok.clone(), 2.0),
            ],
        )
        .unwrap();
        assert_eq!(merged.constraints().len(), 2);
        assert_abs_diff_eq!(merged.constraints()[0].weight, 0.75, epsilon = 1e-15);
        assert_eq!(merged.constraints()[0].raw_weight(), 3.0);
        assert!(CspInstance::new(
            3,
            2,
            2,
            vec![(f(&[0, 1]), ok.clone(), 1.0), (f(&[0, 1]), vec![vec![1, 1]], 1.0)]
        )
        .is_err());
    }

    #[test]
    fn brute_force_examples() {
        let (opt, w) = brute_force_opt(&all_zero_3xor(6)).unwrap();
        assert_eq!(opt, 1.0);
        assert_eq!(w.values, vec![0; 6]);

        let full: Vec<Vec<usize>> = (0..8).map(|c| decode_tuple(c, 3, 2)).collect();
        let inst = CspInstance::new(5, 3, 2, vec![(f(&[0, 1, 2]), full, 1.0)]).unwrap();
        assert_eq!(brute_force_opt(&inst).unwrap().0, 1.0);

        let big = gen_random_kxor(24, 3, 10, 2, 0, false).unwrap().0;
        assert!(matches!(brute_force_opt(&big), Err(Error::TooLarge(_))));
    }

    #[test]
    fn brute_force_tie_break_is_lexicographic() {
        // x0 ≠ x1: the smallest witness is (0, 1, 0).
        let inst = CspInstance::new(3, 2, 2, vec![(f(&[0, 1]), vec![vec![0, 1], vec![1, 0]], 1.0)]).unwrap();
        assert_eq!(brute_force_opt(&inst).unwrap().1.values, vec![0, 1, 0]);
    }

    #[test]
    fn golden_random_3xor() {
        let (inst, _) = gen_random_kxor(6, 3, 20, 2, 7, false).unwrap();
        let (opt, witness) = brute_force_opt(&inst).unwrap();
        assert_abs_diff_eq!(opt, oracle_opt(&inst), epsilon = 1e-12);
        assert_eq!(sat_fraction(&inst, &witness).unwrap(), opt);
        assert_abs_diff_eq!(opt, GOLDEN_N6_M20_SEED7, epsilon = 1e-12);
    }

    // Frozen from `oracle_opt`: 14 of 20 constraints.
    const GOLDEN_N6_M20_SEED7: f64 = 0.7;

    #[test]
    fn generator_determinism_and_density() {
        let a = gen_random_kxor(8, 3, 20, 2, 11, false).unwrap().0;
        let b = gen_random_kxor(8, 3, 20, 2, 11, false).unwrap().0;
        assert_eq!(a.to_json(), b.to_json());
        assert_ne!(a.to_json(), gen_random_kxor(8, 3, 20, 2, 12, false).unwrap().0.to_json());

        let dense = gen_random_kxor(7, 3, 35, 2, 1, false).unwrap().0;
        let x = constraint_complex(&dense).unwrap();
        let delta = complete_complex(7, 3).unwrap();
        assert_eq!(x.faces(3), delta.faces(3));
        for (a, b) in x.measure(3).iter().zip(delta.measure(3)) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        assert!(gen_random_kxor(5, 3, 11, 2, 0, false).is_err());
    }

    #[test]
    fn planted_instances_are_satisfiable() {
        for q in [2, 3] {
            let (inst, hidden) = gen_random_kxor(6, 3, 15, q, 3, true).unwrap();
            let hidden = hidden.unwrap();
            assert_eq!(sat_fraction(&inst, &hidden).unwrap(), 1.0);
            assert_eq!(brute_force_opt(&inst).unwrap().0, 1.0);
        }
    }

    #[test]
    fn constraint_complexes() {
        let single = CspInstance::new(4, 3, 2, vec![(f(&[0, 2, 3]), vec![vec![0, 0, 0]], 1.0)]).unwrap();
        let x = constraint_complex(&single).unwrap();
        assert_eq!(x.faces(3), &[f(&[0, 2, 3])]);

        let two = CspInstance::new(
            4,
            3,
            2,
            vec![
                (f(&[0, 1, 2]), vec![vec![0, 0, 0]], 0.5),
                (f(&[1, 2, 3]), vec![vec![1, 1, 1]], 0.5),
            ],
        )
        .unwrap();
        let x = constraint_complex(&two).unwrap();
        let y = build_pure_complex(&[(f(&[0, 1, 2]), 0.5), (f(&[1, 2, 3]), 0.5)]).unwrap();
        for i in 0..=3 {
            assert_eq!(x.faces(i), y.faces(i));
            assert_eq!(x.measure(i), y.measure(i));
        }
    }

    #[test]
    fn json_roundtrip() {
        let (inst, _) = gen_random_kxor(6, 3, 10, 3, 5, false).unwrap();
        let back = CspInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
        let parsed = CspInstance::from_json(
            r#"{"n":3,"k":2,"q":2,"constraints":[{"scope":[0,1],"allowed":[[0,0],[1,1]]},{"scope":[1,2],"allowed":[[0,1]],"weight":3}]}"#,
        )
        .unwrap();
        assert_eq!(parsed.constraints()[1].weight, 0.75);
        assert_eq!(parsed.constraints()[1].raw_weight(), 3.0);
        assert!(CspInstance::from_json(r#"{"n":3,"k":2,"q":2,"constraints":[{"scope":[1,0],"allowed":[[0,0]]}]}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn witness_attains_opt(seed in any::<u64>(), m in 1usize..20, q in 2usize..4) {
            let (inst, _) = gen_random_kxor(5, 2, m.min(10), q, seed, false).unwrap();
            let (opt, w) = brute_force_opt(&inst).unwrap();
            prop_assert_eq!(sat_fraction(&inst, &w).unwrap(), opt);
            prop_assert!((opt - oracle_opt(&inst)).abs() <= 1e-12);
        }

        #[test]
        fn constraint_complex_has_unit_mass(seed in any::<u64>(), m in 1usize..20) {
            let (inst, _) = gen_random_kxor(7, 3, m, 2, seed, false).unwrap();
            let x = constraint_complex(&inst).unwrap();
            for i in 0..=3 {
                prop_assert!((x.measure(i).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
