use std::f64::consts::PI;

use sinpinn::pde::kdv::{kdv_reference_solve, load_or_solve, solve, KdvParams, KdvTable, CONVERGENCE_TOL};

#[test]
fn reference_converges_and_conserves_mass() {
    let params = KdvParams::default();
    let table = kdv_reference_solve(&params).unwrap();
    assert_eq!(table.u.len(), 257 * 251);
    for (ix, x) in table.x.iter().enumerate() {
        assert!((table.at(ix, 0) - (PI * x).cos()).abs() < 1e-13);
    }
    let m0 = table.mass(0);
    for it in 0..params.nt {
        assert!((table.mass(it) - m0).abs() <= 1e-8, "mass drift at frame {it}");
    }
    // periodic endpoints coincide
    for it in 0..params.nt {
        assert_eq!(table.at(0, it), table.at(params.nx - 1, it));
    }
    let fine = solve(&KdvParams { modes: 1024, dt: 1.25e-4, ..params }).unwrap();
    let rms = table.rms_difference(&fine);
    println!("refinement RMS change {rms:e}");
    assert!(rms <= CONVERGENCE_TOL);
}

#[test]
fn final_state_has_split_into_several_waves() {
    let table = solve(&KdvParams::default()).unwrap();
    let nx = table.params.nx;
    let last = table.params.nt - 1;
    let row: Vec<f64> = (0..nx - 1).map(|ix| table.at(ix, last)).collect();
    // local maxima above the initial mean level, counted on the periodic ring
    let n = row.len();
    let peaks = (0..n)
        .filter(|&i| {
            let (l, r) = (row[(i + n - 1) % n], row[(i + 1) % n]);
            row[i] > l && row[i] > r && row[i] > 0.5
        })
        .count();
    println!("peaks at final time: {peaks}");
    assert!(peaks >= 3, "{peaks}");
}

#[test]
fn cache_round_trip() {
    let params = KdvParams {
        modes: 64,
        dt: 1e-3,
        nu: 0.01,
        t_end: 0.1,
        nx: 33,
        nt: 11,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kdv.csv");
    let a = load_or_solve(Some(&path), &params).unwrap();
    let b = KdvTable::read_csv(&path, &params).unwrap().unwrap();
    assert_eq!(a, b);
    let other = KdvParams { nu: 0.02, ..params };
    assert!(KdvTable::read_csv(&path, &other).unwrap().is_none());
}
