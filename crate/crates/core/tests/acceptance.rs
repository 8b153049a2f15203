use immersa::selftest::{run_criterion, CRITERIA};

fn main() {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for &(id, _) in CRITERIA.iter().filter(|(id, _)| filter.is_empty() || filter.contains(id)) {
        let r = run_criterion(id);
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} [{:>2}] {} ({:.1} s): {}", r.id, r.title, r.seconds, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
