//! Bifurcation sweeps: refinement keeps windows, and any single cell can be
//! recomputed bitwise.

use econ_attractors::basin::PointConfig;
use econ_attractors::sweep::{reproduce_cell, sweep, SweepSpec, Window};
use econ_attractors::IntegratorConfig;
use proptest::prelude::*;

fn spec(steps: usize, t_max: f64) -> SweepSpec {
    SweepSpec {
        range: [0.048, 0.053],
        steps,
        point: PointConfig {
            integrator: IntegratorConfig::precise().with_t_max(t_max),
            ..PointConfig::default()
        },
        ..SweepSpec::param_a()
    }
}

fn covered(w: &Window, fine: &[Window], slack: f64) -> bool {
    // every coarse window point must sit in some fine window, up to one
    // coarse step
    [w.lo, w.hi]
        .iter()
        .all(|&v| fine.iter().any(|f| f.lo - slack <= v && v <= f.hi + slack))
}

#[test]
fn refinement_never_removes_a_window() {
    let coarse_spec = spec(11, 5000.0);
    let coarse = sweep(&coarse_spec).unwrap();
    let fine = sweep(&spec(21, 5000.0)).unwrap();
    assert!(!coarse.windows.is_empty());
    let step = coarse_spec.spacing();
    for w in &coarse.windows {
        assert!(covered(w, &fine.windows, step), "{w:?} not within {:?}", fine.windows);
    }
}

#[test]
fn pool_size_does_not_change_the_diagram() {
    let s = spec(3, 1500.0);
    let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| sweep(&s).unwrap());
    let b = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| sweep(&s).unwrap());
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn single_cell_reproduces_bitwise(i in 0usize..4, j in 0usize..4) {
        let s = spec(4, 1200.0);
        let d = sweep(&s).unwrap();
        let cell = reproduce_cell(&s, i, j).unwrap();
        prop_assert_eq!(&d.cells[i][j].peaks, &cell.peaks);
        prop_assert_eq!(d.cells[i][j].signature().map(|g| g.mle), cell.signature().map(|g| g.mle));
    }
}
