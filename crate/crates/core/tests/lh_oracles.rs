mod common;

use tiernav::lh::{astar_cells, cell_path_cost};

#[test]
fn astar_cost_equals_dijkstra() {
    let mut rng = common::rng(21);
    let mut reachable = 0;
    for _ in 0..60 {
        let (grid, s, g) = common::random_grid(&mut rng);
        match (astar_cells(&grid, s, g), common::dijkstra_cells(&grid, s, g)) {
            (Ok(a), Some(d)) => {
                reachable += 1;
                assert_eq!(cell_path_cost(&a, 1.0), cell_path_cost(&d, 1.0));
                assert_eq!(a.first(), Some(&s));
                assert_eq!(a.last(), Some(&g));
            }
            (Err(_), None) => {}
            (a, d) => panic!("reachability disagrees: astar {:?} dijkstra {:?}", a.is_ok(), d.is_some()),
        }
    }
    assert!(reachable > 20);
}

#[test]
fn astar_paths_use_legal_moves() {
    let mut rng = common::rng(22);
    for _ in 0..30 {
        let (grid, s, g) = common::random_grid(&mut rng);
        if let Ok(path) = astar_cells(&grid, s, g) {
            for w in path.windows(2) {
                assert!(grid.neighbors(w[0]).any(|(n, _)| n == w[1]));
            }
        }
    }
}
