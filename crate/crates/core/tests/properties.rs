use num_complex::Complex64;
use proptest::prelude::*;

use fracchemo::config::{parse_config, ModeList};
use fracchemo::dynamics::{Dynamics, Kinetics, ModelParams, State};
use fracchemo::integrator::{StepMode, Stepper};
use fracchemo::snapshot::Snapshot;
use fracchemo::spectral::{Grid, SpectralField, Transform, VectorField};

/// Real field with random coefficients on `|k_i| <= band`.
fn field(grid: Grid, band: i64, raw: &[(f64, f64)]) -> SpectralField {
    let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut it = raw.iter().cycle();
    let ky_band = if grid.dim() == 2 { band } else { 0 };
    for kx in 0..=band {
        for ky in -ky_band..=ky_band {
            if kx == 0 && ky < 0 {
                continue;
            }
            let &(re, im) = it.next().unwrap();
            let (Some(i), Some(j)) = (grid.index_of([kx, ky]), grid.index_of([-kx, -ky])) else {
                continue;
            };
            if i == j {
                c[i] = Complex64::new(re, 0.0);
            } else {
                c[i] = Complex64::new(re, im);
                c[j] = Complex64::new(re, -im);
            }
        }
    }
    SpectralField::from_coeffs(grid, c).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..40)
}

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (1usize..=2, prop::sample::select(vec![8usize, 12, 16, 24]))
        .prop_map(|(d, n)| Grid::new(d, n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn plancherel(grid in grid_strategy(), raw in coeffs()) {
        let f = field(grid, (grid.n() / 2 - 1) as i64, &raw);
        let spectral = f.sobolev_norm_sq(0.0, true);
        let nodal = f.lp_norm(2.0).unwrap().powi(2);
        prop_assert!((spectral - nodal).abs() <= 1e-12 * (1.0 + spectral));
    }

    #[test]
    fn derivative_is_skew_and_fractional_laplacian_symmetric(
        grid in grid_strategy(), a in coeffs(), b in coeffs(), alpha in 0.05f64..2.0
    ) {
        let band = (grid.n() / 2 - 1) as i64;
        let (f, g) = (field(grid, band, &a), field(grid, band, &b));
        for axis in 0..grid.dim() {
            let lhs = f.derivative(axis).inner(&g).unwrap();
            let rhs = -f.inner(&g.derivative(axis)).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
        let lf = f.fractional_laplacian(alpha).unwrap();
        let lg = g.fractional_laplacian(alpha).unwrap();
        let (x, y) = (lf.inner(&g).unwrap(), f.inner(&lg).unwrap());
        prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
    }

    #[test]
    fn curl_of_gradient_vanishes(n in prop::sample::select(vec![8usize, 16, 32]), raw in coeffs()) {
        let grid = Grid::new(2, n).unwrap();
        let phi = field(grid, (n / 2 - 1) as i64, &raw);
        let q = phi.gradient();
        let curl = q.curl2d().unwrap();
        prop_assert!(curl.sobolev_norm(0.0, true) <= 1e-14 * (1.0 + q.gradient_norm()));
    }

    #[test]
    fn dealias_is_idempotent(grid in grid_strategy(), raw in coeffs()) {
        let f = field(grid, (grid.n() / 2 - 1) as i64, &raw);
        let once = f.dealias();
        prop_assert_eq!(once.dealias(), once);
    }

    #[test]
    fn tendencies_have_zero_mean(grid in grid_strategy(), a in coeffs(), b in coeffs(), alpha in 0.1f64..=2.0) {
        let band = (grid.n() / 2 - 1) as i64;
        let u = field(grid, band, &a);
        let comps = (0..grid.dim()).map(|i| field(grid, band, &b[i.min(b.len() - 1)..])).collect();
        let s = State::new(0.0, u, VectorField::new(comps).unwrap()).unwrap();
        for kin in [Kinetics::Quadratic, Kinetics::Linear] {
            let mut dy = Dynamics::new(ModelParams::new(grid.dim(), alpha, kin).unwrap(), grid).unwrap();
            prop_assert!(dy.rhs_u(&s).unwrap().mean().abs() < 1e-15);
            for c in dy.q_rate(&s).unwrap().components() {
                prop_assert!(c.mean().abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dealiased_products_match_a_doubled_grid(
        dim in 1usize..=2, n in prop::sample::select(vec![12usize, 16, 24]), a in coeffs(), b in coeffs()
    ) {
        let coarse = Grid::new(dim, n).unwrap();
        let fine = coarse.refined(2);
        let band = ((n as i64) - 1) / 3;
        let u = field(coarse, band, &a);
        let q = VectorField::new((0..dim).map(|i| field(coarse, band, &b[i.min(b.len() - 1)..])).collect()).unwrap();
        let s = State::new(0.0, u.clone(), q.clone()).unwrap();
        let lift = |f: &SpectralField| f.resample(fine).unwrap();
        let s_fine = State::new(0.0, lift(&u), q.map(lift)).unwrap();
        let params = ModelParams::new(dim, 1.0, Kinetics::Quadratic).unwrap();
        let mut dc = Dynamics::new(params.clone(), coarse).unwrap();
        let mut df = Dynamics::new(params, fine).unwrap();
        let on_coarse = dc.transport(&s).unwrap().dealias();
        let on_fine = df.transport(&s_fine).unwrap().resample(coarse).unwrap().dealias();
        let diff = on_coarse.max_coeff_diff(&on_fine).unwrap();
        prop_assert!(diff < 1e-12, "diff {diff:e}");
    }

    #[test]
    fn gradient_fields_have_equal_grad_and_div_norms(n in prop::sample::select(vec![8usize, 16, 32]), raw in coeffs()) {
        let grid = Grid::new(2, n).unwrap();
        let q = field(grid, (n / 2 - 1) as i64, &raw).gradient();
        let g = q.gradient_norm();
        let d = q.divergence().sobolev_norm(0.0, true);
        prop_assert!((g - d).abs() <= 1e-12 * (1.0 + g));
    }

    #[test]
    fn step_conserves_means(grid in grid_strategy(), a in coeffs(), b in coeffs(), dt in 1e-4f64..1e-2) {
        let band = ((grid.n() as i64) - 1) / 3;
        let u = &field(grid, band, &a).scaled(0.3) + &SpectralField::constant(grid, 1.0);
        let q = VectorField::new((0..grid.dim()).map(|i| field(grid, band, &b[i.min(b.len() - 1)..]).scaled(0.3)).collect()).unwrap();
        let s = State::new(0.0, u, q).unwrap();
        let params = ModelParams::new(grid.dim(), 1.5, Kinetics::Quadratic).unwrap();
        let next = Stepper::new(params, grid, StepMode::Full).unwrap().step_ifrk2(&s, dt).unwrap();
        prop_assert!((next.u.mean() - s.u.mean()).abs() <= 1e-15);
        for (x, y) in next.q.components().iter().zip(s.q.components()) {
            prop_assert!((x.mean() - y.mean()).abs() <= 1e-15);
        }
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact(grid in grid_strategy(), a in coeffs(), t in 0.0f64..10.0, alpha in 0.1f64..=2.0) {
        let band = (grid.n() / 2 - 1) as i64;
        let u = field(grid, band, &a);
        let q = VectorField::new((0..grid.dim()).map(|i| field(grid, band, &a[i.min(a.len() - 1)..])).collect()).unwrap();
        let snap = Snapshot::from_state(&State::new(t, u, q).unwrap(), alpha, Kinetics::Quadratic).unwrap();
        let mut bytes = Vec::new();
        snap.write_to(&mut bytes).unwrap();
        let back = Snapshot::read_from(bytes.as_slice()).unwrap();
        prop_assert_eq!(back.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), snap.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(&back.header, &snap.header);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn config_dump_round_trips(
        alpha in 0.01f64..=2.0,
        n in prop::sample::select(vec![8usize, 16, 64]),
        amps in prop::collection::vec(-2.0f64..2.0, 1..4),
        k in 1i64..3,
        dt in 1e-5f64..1e-1,
        linear in any::<bool>(),
    ) {
        let u0 = ModeList::parse(&format!("1 + {}*cos({k})", amps[0].abs())).unwrap();
        let q0 = ModeList::parse(&format!("{}*sin({k}) - {}*cos(1)", amps[amps.len() - 1], amps[0].abs())).unwrap();
        prop_assert_eq!(ModeList::parse(&q0.to_string()).unwrap(), q0.clone());
        let text = format!(
            "[model]\nd = 1\nalpha = {alpha}\nn = {n}\nkinetics = {}\n[integrator]\nt_end = 1\ndt_max = {dt}\n[initial]\nu0 = \"{u0}\"\nq0 = \"{q0}\"\n",
            if linear { "linear" } else { "quadratic" }
        );
        let sc = parse_config(&text).unwrap();
        let dump = sc.to_config();
        let again = parse_config(&dump).unwrap();
        prop_assert_eq!(again.to_config(), dump);
        prop_assert_eq!(again.params.alpha, alpha);
        prop_assert_eq!(again.integrator.dt_max, dt);
        prop_assert_eq!(again.initial_state().unwrap(), sc.initial_state().unwrap());
    }
}

#[test]
fn transform_round_trip_on_nodes() {
    let grid = Grid::new(2, 16).unwrap();
    let mut tr = Transform::new(grid);
    let f = SpectralField::from_fn(grid, |x| (x[0] + 2.0 * x[1]).sin() + 0.5);
    let nodes = tr.inverse(&f).unwrap();
    let back = tr.forward(&nodes).unwrap();
    assert!(back.max_coeff_diff(&f).unwrap() < 1e-15);
}
