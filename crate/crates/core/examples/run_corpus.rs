use conekit::corpus::{list_cases, run_case};
use conekit::probe::ProbeConfig;

fn main() {
    let eps: f64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let cfg = ProbeConfig { eps, ..ProbeConfig::default() };
    for c in list_cases() {
        let t = std::time::Instant::now();
        let rep = run_case(c.name, &cfg).unwrap();
        let dt = t.elapsed().as_secs_f64();
        println!("{:32} {:>6.2}s {}", c.name, dt, if rep.pass() { "pass" } else { "FAIL" });
        for e in rep.expectations.iter().filter(|e| !e.pass) {
            println!("    FAIL {} : {}", e.label, e.detail);
        }
    }
}
