use bilap::conditions::{ConditionYR, LocalSpace, VertexRule};
use bilap::fem::{assemble, eigensolve, kernel_dimension, Mesh};
use bilap::graph::{Graph, MetricGraph};

fn clamped() -> VertexRule {
    VertexRule::new(LocalSpace::Zero, LocalSpace::Zero)
}

fn free() -> VertexRule {
    VertexRule::new(LocalSpace::Full, LocalSpace::Full)
}

fn beam(length: f64, left: VertexRule, right: VertexRule, n: usize) -> Vec<f64> {
    let g = MetricGraph::new(Graph::new(2, vec![(0, 1)]).unwrap(), vec![length]).unwrap();
    let cond = ConditionYR::from_vertex_rules(g.graph(), &[left, right], None, "beam").unwrap();
    let sys = assemble(&g, &Mesh::uniform(1, n).unwrap(), &cond).unwrap();
    eigensolve(&sys, None).unwrap().values.iter().cloned().collect()
}

/// Roots of `cosh(b) cos(b) = sign` by bisection on unit brackets around `(k + 1/2) pi`.
fn frequency_roots(sign: f64, count: usize) -> Vec<f64> {
    let f = |b: f64| b.cosh() * b.cos() - sign;
    (0..count)
        .map(|k| {
            let mid = (k as f64 + 0.5) * std::f64::consts::PI;
            let (mut a, mut b) = (mid - 1.0, mid + 1.0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if f(a).signum() == f(m).signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

#[test]
fn clamped_beam_matches_frequency_equation() {
    let length = 1.3;
    let values = beam(length, clamped(), clamped(), 32);
    for (k, b) in frequency_roots(1.0, 4).into_iter().skip(1).enumerate() {
        let expected = (b / length).powi(4);
        assert!((values[k] / expected - 1.0).abs() < 1e-4, "mode {k}: {} vs {expected}", values[k]);
    }
}

#[test]
fn free_beam_has_rigid_motions_then_elastic_modes() {
    let values = {
        let g = MetricGraph::new(Graph::new(2, vec![(0, 1)]).unwrap(), vec![1.0]).unwrap();
        let cond = ConditionYR::from_vertex_rules(g.graph(), &[free(), free()], None, "free").unwrap();
        let sys = assemble(&g, &Mesh::uniform(1, 32).unwrap(), &cond).unwrap();
        let eig = eigensolve(&sys, None).unwrap();
        assert_eq!(kernel_dimension(&eig), Ok(2));
        eig.values.iter().cloned().collect::<Vec<_>>()
    };
    for (k, b) in frequency_roots(1.0, 4).into_iter().skip(1).enumerate() {
        let expected = b.powi(4);
        assert!((values[k + 2] / expected - 1.0).abs() < 1e-4, "mode {k}: {:?} vs {expected}", &values[..6]);
    }
}

#[test]
fn cantilever_matches_frequency_equation() {
    let values = beam(2.0, clamped(), free(), 32);
    for (k, b) in frequency_roots(-1.0, 3).into_iter().enumerate() {
        let expected = (b / 2.0).powi(4);
        assert!((values[k] / expected - 1.0).abs() < 1e-4, "mode {k}: {} vs {expected}", values[k]);
    }
}
