use std::collections::BTreeSet;

use bilap::discrete::{bilaplacian_closed_form, bilaplacian_closed_form_int, discrete_semigroup, kappa};
use bilap::graph::{enumerate_connected_graphs, Graph};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

type EdgeSet = Vec<(usize, usize)>;

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            let w = if a == u { b } else if b == u { a } else { continue };
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn brute_force(n: usize) -> BTreeSet<EdgeSet> {
    let all = pairs(n);
    (0u64..1 << all.len())
        .map(|mask| {
            all.iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &p)| p)
                .collect::<EdgeSet>()
        })
        .filter(|e| connected(n, e))
        .collect()
}

fn normalized(g: &Graph) -> EdgeSet {
    let mut e: EdgeSet = g.edges().iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    e.sort();
    e
}

fn laplacian_from_adjacency(g: &Graph) -> DMatrix<i64> {
    let n = g.vertex_count();
    let mut l = DMatrix::zeros(n, n);
    for &(a, b) in g.edges() {
        l[(a, a)] += 1;
        l[(b, b)] += 1;
        l[(a, b)] -= 1;
        l[(b, a)] -= 1;
    }
    l
}

#[test]
fn enumeration_matches_brute_force() {
    for (n, expected) in [(1, 1), (2, 1), (3, 4), (4, 38), (5, 728)] {
        let listed: Vec<EdgeSet> = enumerate_connected_graphs(n).unwrap().map(|g| normalized(&g)).collect();
        let unique: BTreeSet<EdgeSet> = listed.iter().cloned().collect();
        assert_eq!(listed.len(), expected, "n = {n}");
        assert_eq!(unique.len(), listed.len());
        assert_eq!(unique, brute_force(n), "n = {n}");
    }
}

#[test]
fn closed_form_matches_squared_laplacian_exhaustively() {
    for n in 1..=6 {
        for g in enumerate_connected_graphs(n).unwrap() {
            let l = laplacian_from_adjacency(&g);
            assert_eq!(bilaplacian_closed_form_int(&g), &l * &l, "{:?}", g.edges());
        }
    }
}

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (2usize..=6)
        .prop_flat_map(|n| (Just(n), any::<u16>(), proptest::collection::vec(any::<bool>(), n - 1)))
        .prop_map(|(n, mask, flips)| {
            // A spanning path keeps every sample connected.
            let mut edges: Vec<(usize, usize)> =
                (1..n).zip(flips).map(|(i, f)| if f { (i, i - 1) } else { (i - 1, i) }).collect();
            for (k, &(a, b)) in pairs(n).iter().enumerate() {
                if b != a + 1 && mask >> (k % 16) & 1 == 1 {
                    edges.push((a, b));
                }
            }
            Graph::new(n, edges).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup_law_and_conservation(g in graph_strategy(), t in 0.01f64..1.0, s in 0.01f64..1.0) {
        let op = bilaplacian_closed_form(&g);
        let st = discrete_semigroup(&op, t).unwrap();
        let ss = discrete_semigroup(&op, s).unwrap();
        let sts = discrete_semigroup(&op, t + s).unwrap();
        prop_assert!((&st * &ss - &sts).amax() < 1e-10);
        let ones = DVector::from_element(g.vertex_count(), 1.0);
        prop_assert!((&st * &ones - &ones).amax() < 1e-10);
        prop_assert!((&st - st.transpose()).amax() < 1e-12);
    }

    #[test]
    fn kappa_at_two_is_squared_laplacian_norm(g in graph_strategy(), seed in proptest::collection::vec(-1.0f64..1.0, 6)) {
        let n = g.vertex_count();
        let f: Vec<f64> = seed[..n].to_vec();
        let l = laplacian_from_adjacency(&g).map(|x| x as f64);
        let lf = &l * DVector::from_column_slice(&f);
        let report = kappa(&g, &f, 2.0).unwrap();
        prop_assert!((report.kappa - lf.norm_squared()).abs() < 1e-10 * (1.0 + lf.norm_squared()));
    }

    #[test]
    fn orientation_does_not_matter(g in graph_strategy(), e in 0usize..16) {
        let e = e % g.edge_count();
        prop_assert_eq!(bilaplacian_closed_form_int(&g), bilaplacian_closed_form_int(&g.with_reversed_edge(e)));
    }
}
