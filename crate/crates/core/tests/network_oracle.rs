use proptest::prelude::*;
use spillover_core::diffusion::{local_spillover_index, spillover_strengths};
use spillover_core::network::SpilloverNetwork;
use spillover_core::FlowDirection;

/// Floyd-Warshall on hop counts, then direct counting.
fn oracle(n: usize, adj: &[Vec<bool>]) -> [f64; 4] {
    const INF: usize = usize::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    let mut edges = 0;
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if i != j && adj[i][j] {
                d[i][j] = 1;
                edges += 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let ordered = (n * (n - 1)) as f64;
    let mut eff = 0.0;
    let (mut both, mut any, mut neither) = (0, 0, 0);
    for i in 0..n {
        for j in 0..n {
            if i != j && d[i][j] < INF {
                eff += 1.0 / d[i][j] as f64;
            }
            if i < j {
                let (f, b) = (d[i][j] < INF, d[j][i] < INF);
                both += (f && b) as usize;
                any += (f || b) as usize;
                neither += (!f && !b) as usize;
            }
        }
    }
    let nh = if any == 0 { 0.0 } else { 1.0 - both as f64 / any as f64 };
    [edges as f64 / ordered, eff / ordered, 1.0 - neither as f64 / (ordered / 2.0), nh]
}

fn graph() -> impl Strategy<Value = (usize, Vec<Vec<bool>>)> {
    (2usize..=5).prop_flat_map(|n| (Just(n), prop::collection::vec(prop::collection::vec(any::<bool>(), n), n)))
}

fn network(n: usize, adj: &[Vec<bool>], weight: impl Fn(usize, usize) -> f64) -> SpilloverNetwork {
    let edges: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && adj[i][j])
        .map(|(i, j)| (i, j, weight(i, j)))
        .collect();
    SpilloverNetwork::from_edges(n, &edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn metrics_match_floyd_warshall((n, adj) in graph()) {
        let net = network(n, &adj, |_, _| 1.0);
        let t = net.topology();
        let [nd, ne, nc, nh] = oracle(n, &adj);
        prop_assert!((t.nd - nd).abs() < 1e-12);
        prop_assert!((t.ne - ne).abs() < 1e-12);
        prop_assert!((t.nc - nc).abs() < 1e-12);
        prop_assert!((t.nh - nh).abs() < 1e-12);
        for m in [t.nd, t.ne, t.nc, t.nh] {
            prop_assert!((0.0..=1.0).contains(&m));
        }
    }

    #[test]
    fn strengths_sum_to_total_weight((n, adj) in graph(), scale in 0.01f64..100.0) {
        let w = |i: usize, j: usize| 0.1 + (i * 7 + j * 3) as f64 / 10.0;
        let net = network(n, &adj, w);
        let (d_out, d_in) = spillover_strengths(&net);
        let total: f64 = net.edges().iter().map(|e| e.2).sum();
        prop_assert!((d_out.iter().sum::<f64>() - total).abs() < 1e-9);
        prop_assert!((d_in.iter().sum::<f64>() - total).abs() < 1e-9);

        let scaled = network(n, &adj, |i, j| scale * w(i, j));
        for dir in [FlowDirection::Out, FlowDirection::In] {
            let (a, b) = (local_spillover_index(&net, dir), local_spillover_index(&scaled, dir));
            for (x, y) in a.iter().zip(&b) {
                match (x, y) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12 * (1.0 + x.abs())),
                    (None, None) => {}
                    _ => prop_assert!(false, "definedness changed under scaling"),
                }
            }
        }
    }
}
