use retrogfn::econ::{format_table, route_prob, scenario_table, two_sig};

#[test]
fn six_cells_match_reference_table() {
    let rows = scenario_table();
    print!("{}", format_table(&rows));
    let cell = |model: &str, ratio: f64| {
        two_sig(rows.iter().find(|r| r.model == model && r.ratio == ratio).unwrap().income)
    };
    assert_eq!(cell("RT-optimal", 10.0), "1.1e3");
    assert_eq!(cell("RT-optimal", 100.0), "1.6e4");
    assert_eq!(cell("RT-optimal", 1000.0), "1.7e5");
    assert_eq!(cell("ACC-optimal", 10.0), "1.3e3");
    assert_eq!(cell("ACC-optimal", 100.0), "1.5e4");
    assert_eq!(cell("ACC-optimal", 1000.0), "1.5e5");
}

#[test]
fn rt_wins_two_of_three() {
    let rows = scenario_table();
    let wins = [10.0, 100.0, 1000.0]
        .iter()
        .filter(|&&ratio| {
            let get = |m: &str| rows.iter().find(|r| r.model == m && r.ratio == ratio).unwrap().income;
            get("RT-optimal") > get("ACC-optimal")
        })
        .count();
    assert_eq!(wins, 2);
}

#[test]
fn acc_route_probability_closed_form() {
    for m in 1..20 {
        assert!((route_prob(0.0, 0.05, m, 5) - 0.95f64.powi(5)).abs() < 1e-12);
    }
    assert!((0.95f64.powi(5) - 0.7738).abs() < 1e-4);
}

#[test]
fn route_probability_monotone() {
    for &(a, b) in &[(0.1, 0.025), (0.3, 0.2), (0.0, 0.5)] {
        let mut prev = 0.0;
        for m in 0..200 {
            let p = route_prob(a, b, m, 5);
            assert!((0.0..=1.0).contains(&p));
            assert!(p >= prev);
            prev = p;
        }
        assert!(route_prob(a, b + 0.1, 10, 5) <= route_prob(a, b, 10, 5));
    }
}
