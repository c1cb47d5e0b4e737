use std::path::PathBuf;
use std::time::Instant;

use padic_theta::io::GroupSpec;

fn fixture(name: &str) -> GroupSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.json"));
    GroupSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn all_fixtures_are_in_good_position() {
    for name in [
        "q3_genus2",
        "q3_complement_ball",
        "q3_complement_ball_alt_gens",
        "q5_domain_b",
        "q5_domain_c",
    ] {
        let t = Instant::now();
        let g = fixture(name).build(60).unwrap();
        let rep = g.verify_good_position();
        assert!(rep.passed(), "{name}: {:?}", rep.failures());
        assert!(t.elapsed().as_secs_f64() < 1.0, "{name} took {:?}", t.elapsed());
    }
}
