mod common;

use proptest::prelude::*;
use quasidiff::config::{read_pair, write_pair};

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn kernel_invariants_hold(seed in any::<u64>(), alpha in 0.1f64..5.0) {
        let pair = common::random_pair(seed);
        let rep = common::check_properties(&pair, alpha, seed);
        prop_assert!(rep.failures().is_empty(), "{:?}\n{}", rep.failures(), write_pair(&pair).unwrap());
    }

    #[test]
    fn pair_files_round_trip(seed in any::<u64>()) {
        let pair = common::random_pair(seed);
        let text = write_pair(&pair).unwrap();
        let back = read_pair(&text).unwrap();
        prop_assert_eq!(&back, &pair);
        prop_assert_eq!(write_pair(&back).unwrap(), text);
    }

    #[test]
    fn arbitrary_doubles_survive_the_file(x in any::<f64>().prop_filter("finite", |x| x.is_finite()), m in 1e-300f64..1e300) {
        let x = x.abs().clamp(1e-6, 1e307);
        let text = format!(
            "[interval]\nr = 1e308\n[scale]\nsegments = [{{ x0 = 0, x1 = 1e308, kind = \"identity\" }}]\n[measure]\natoms = [{{ x = {:?}, mass = {:?} }}]\n[options]\nrelaxed = true\n",
            x, m
        );
        let pair = read_pair(&text).unwrap();
        let a = pair.measure().atoms()[0];
        prop_assert_eq!(a.x.to_bits(), x.to_bits());
        prop_assert_eq!(a.mass.to_bits(), m.to_bits());
        prop_assert_eq!(read_pair(&write_pair(&pair).unwrap()).unwrap(), pair);
    }

    #[test]
    fn pushforward_preserves_mass(seed in any::<u64>(), t0 in 0.0f64..1.0, t1 in 0.0f64..1.0) {
        let pair = common::random_pair(seed);
        let (lo, hi) = quasidiff::kernel::default_window(&pair);
        let (a, b) = (lo + (hi - lo) * t0.min(t1), lo + (hi - lo) * t0.max(t1));
        let s = pair.scale();
        let want = pair.measure().mass_in(a, false, b, true);
        let got = pair.image_measure().mass_in(s.eval(a), false, s.eval(b), true);
        // Jump points carry their mass at s(x), which the half-open image
        // interval counts exactly when a < x ≤ b.
        prop_assert!((want - got).abs() <= 1e-10 * want.abs().max(1.0), "{want} vs {got} on ({a}, {b}]");
    }
}
